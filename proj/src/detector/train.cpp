#include <algorithm>
#include <cmath>
#include <numeric>

#include "provmon/detector.hpp"
#include "provmon/error.hpp"

namespace provmon {

void TrainConfig::validate() const {
  if (heads == 0 || hidden_dim == 0 || batch_size == 0) throw ConfigError("heads, hidden_dim and batch_size must be positive");
  if (!(learning_rate > 0)) throw ConfigError("learning_rate must be positive");
  if (!(weight_decay >= 0)) throw ConfigError("weight_decay must be non-negative");
  if (!(dropout >= 0 && dropout < 1)) throw ConfigError("dropout must lie in [0, 1)");
  if (epochs < 0) throw ConfigError("epochs must be non-negative");
}

std::string_view to_string(TrainConfig::Optimizer o) {
  return o == TrainConfig::Optimizer::Adam ? "adam" : "sgd";
}

std::optional<TrainConfig::Optimizer> parse_optimizer(std::string_view s) {
  if (s == "sgd") return TrainConfig::Optimizer::GradientDescent;
  if (s == "adam") return TrainConfig::Optimizer::Adam;
  return std::nullopt;
}

namespace {

class Optimizer {
 public:
  Optimizer(const TrainConfig& cfg, const GatModel& m) : cfg_(cfg) {
    for (const auto* p : m.parameters()) {
      m1_.emplace_back(p->size(), 0.0);
      m2_.emplace_back(p->size(), 0.0);
    }
  }

  void step(GatModel& m, const std::vector<Matrix>& grads) {
    ++t_;
    auto params = m.parameters();
    const double lr = cfg_.learning_rate, wd = cfg_.weight_decay;
    const double c1 = 1.0 - std::pow(kBeta1, t_), c2 = 1.0 - std::pow(kBeta2, t_);
    for (std::size_t p = 0; p < params.size(); ++p) {
      auto& theta = params[p]->data;
      const auto& g = grads[p].data;
      for (std::size_t i = 0; i < theta.size(); ++i) {
        const double gi = g[i] + wd * theta[i];
        if (cfg_.optimizer == TrainConfig::Optimizer::GradientDescent) {
          theta[i] -= lr * gi;
          continue;
        }
        m1_[p][i] = kBeta1 * m1_[p][i] + (1 - kBeta1) * gi;
        m2_[p][i] = kBeta2 * m2_[p][i] + (1 - kBeta2) * gi * gi;
        theta[i] -= lr * (m1_[p][i] / c1) / (std::sqrt(m2_[p][i] / c2) + kEps);
      }
    }
  }

 private:
  static constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  const TrainConfig& cfg_;
  std::vector<std::vector<double>> m1_, m2_;
  int t_ = 0;
};

}  // namespace

GatModel train_benign(const AttentionGraph& g, const Matrix& features, std::span<const int> labels,
                      std::size_t class_count, const TrainConfig& cfg) {
  cfg.validate();
  if (labels.size() != features.rows) throw ConfigError("one label per vertex required");
  std::vector<int> present(labels.begin(), labels.end());
  std::sort(present.begin(), present.end());
  present.erase(std::unique(present.begin(), present.end()), present.end());
  if (present.size() < 2)
    throw TrainingError("training needs at least 2 classes, found " + std::to_string(present.size()));
  if (present.front() < 0 || static_cast<std::size_t>(present.back()) >= class_count)
    throw TrainingError("label outside the class list");

  GatModel m = GatModel::init(features.cols, cfg.heads, cfg.hidden_dim, class_count, cfg.seed);
  if (cfg.epochs == 0) return m;

  Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  Optimizer opt(cfg, m);
  std::vector<std::uint32_t> order(features.rows);
  std::iota(order.begin(), order.end(), 0u);
  ForwardOptions fo;
  fo.training = true;
  fo.dropout = cfg.dropout;
  fo.rng = &rng;
  fo.policy = cfg.policy;
  ForwardCache cache;
  Matrix dlogits;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      const std::size_t e = std::min(order.size(), b + cfg.batch_size);
      std::span<const std::uint32_t> rows(order.data() + b, e - b);
      Matrix logits = gat_forward(m, g, features, fo, &cache);
      cross_entropy(logits, labels, rows, &dlogits);
      opt.step(m, gat_backward(m, g, cache, dlogits, cfg.policy));
    }
  }
  return m;
}

DetectorModel train_detector(const ProvenanceGraph& benign, const TrainConfig& cfg, AnomalyScorer::Kind scorer,
                             std::vector<std::string> classes) {
  if (scorer == AnomalyScorer::Kind::Custom) throw ConfigError("custom scorers cannot be stored in a model");
  DetectorModel d;
  d.registry = benign.registry();
  d.classes = std::move(classes);
  d.config = cfg;
  d.scorer = scorer;
  const auto labels = kind_labels(benign, d.classes);
  const Matrix raw = raw_features(
      benign, scorer == AnomalyScorer::Kind::Zero ? AnomalyScorer::zero() : AnomalyScorer::edge_rarity());
  d.normalizer = FeatureNormalizer::fit(raw, 2 * benign.registry().size());
  d.gat = train_benign(attention_graph(benign), d.normalizer.apply(raw), labels, d.classes.size(), cfg);
  return d;
}

}  // namespace provmon
