#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "provmon/kernels.hpp"
#include "provmon/matrix.hpp"
#include "provmon/provgraph.hpp"
#include "provmon/rng.hpp"

namespace provmon {

using FeatureVector = std::vector<double>;

// Per-vertex prior in [0, 1] appended to the count features.
class AnomalyScorer {
 public:
  enum class Kind { Zero, EdgeRarity, Custom };
  using Fn = std::function<double(const ProvenanceGraph&, VertexIndex)>;

  static AnomalyScorer zero() { return AnomalyScorer(Kind::Zero); }
  // 1 - count(rarest incident type) / |E|; isolated vertices score 0.
  static AnomalyScorer edge_rarity() { return AnomalyScorer(Kind::EdgeRarity); }
  static AnomalyScorer custom(Fn fn);

  Kind kind() const noexcept { return kind_; }
  // Counts edge types of g. Required before score() for EdgeRarity.
  void fit(const ProvenanceGraph& g);
  bool fitted() const noexcept { return fitted_; }
  // Clamped to [0, 1].
  double score(const ProvenanceGraph& g, VertexIndex v) const;

 private:
  explicit AnomalyScorer(Kind k) : kind_(k) {}
  Kind kind_;
  bool fitted_ = false;
  std::vector<std::int64_t> type_counts_;
  std::size_t edge_total_ = 0;
  Fn fn_;
};

std::string_view to_string(AnomalyScorer::Kind k);
std::optional<AnomalyScorer::Kind> parse_scorer_kind(std::string_view s);

// Raw layout [in-type counts | out-type counts | S(v)].
FeatureVector embed_vertex(const ProvenanceGraph& g, std::string_view id, const AnomalyScorer& scorer);
FeatureVector embed_vertex(const ProvenanceGraph& g, VertexIndex v, const AnomalyScorer& scorer);
// One row per vertex; fits a copy of the scorer on g.
Matrix raw_features(const ProvenanceGraph& g, const AnomalyScorer& scorer);

// log1p on the count dimensions, then per-dimension standardization with
// statistics from the training features.
struct FeatureNormalizer {
  std::size_t count_dims = 0;
  std::vector<double> mean;
  std::vector<double> stddev;

  static FeatureNormalizer fit(const Matrix& raw, std::size_t count_dims);
  Matrix apply(const Matrix& raw) const;
};

// Self-looped, undirected neighborhoods of g.
AttentionGraph attention_graph(const ProvenanceGraph& g);

struct GatModel {
  std::size_t input_dim = 0;
  std::size_t heads = 0;
  std::size_t hidden_dim = 0;
  std::size_t class_count = 0;
  double slope = 0.2;  // leaky rectifier on attention scores
  Matrix w1;           // input_dim x (heads * hidden_dim); head h owns column block h
  Matrix a1_src;       // heads x hidden_dim
  Matrix a1_dst;
  Matrix w2;  // (heads * hidden_dim) x (heads * class_count)
  Matrix a2_src;  // heads x class_count
  Matrix a2_dst;

  // Glorot-uniform weights drawn from a seeded generator.
  static GatModel init(std::size_t input_dim, std::size_t heads, std::size_t hidden_dim, std::size_t class_count,
                       std::uint64_t seed);
  std::vector<Matrix*> parameters();
  std::vector<const Matrix*> parameters() const;
  // Throws ConfigError when the matrices disagree with the declared sizes.
  void check_shapes() const;
  bool operator==(const GatModel&) const = default;
};

// Intermediate values of one forward pass, consumed by gat_backward.
struct ForwardCache {
  Matrix x_in;  // layer-1 input after dropout
  Matrix z1;
  std::vector<AttentionCache> att1;
  std::vector<std::vector<double>> att1_drop;
  Matrix h1;  // concatenated layer-1 output before ELU
  Matrix drop_e1;
  Matrix e1_in;  // ELU output after dropout
  Matrix z2;
  std::vector<AttentionCache> att2;
  std::vector<std::vector<double>> att2_drop;
};

struct ForwardOptions {
  bool training = false;
  double dropout = 0.0;
  Rng* rng = nullptr;  // required when training with dropout > 0
  ExecPolicy policy = ExecPolicy::Parallel;
};

// Per-vertex logits (vertex_count x class_count).
Matrix gat_forward(const GatModel& m, const AttentionGraph& g, const Matrix& x, const ForwardOptions& opts = {},
                   ForwardCache* cache = nullptr);

// Gradients with respect to every parameter, in parameters() order, given
// the logits' gradient.
std::vector<Matrix> gat_backward(const GatModel& m, const AttentionGraph& g, const ForwardCache& cache,
                                 const Matrix& dlogits, ExecPolicy policy = ExecPolicy::Parallel);

// Mean cross-entropy over `rows`; writes d(loss)/d(logits) when grad != null.
double cross_entropy(const Matrix& logits, std::span<const int> labels, std::span<const std::uint32_t> rows,
                     Matrix* grad);

// Attention coefficients for one head, indexed like g.col (inference mode).
std::vector<double> attention_coefficients(const GatModel& m, const AttentionGraph& g, const Matrix& x, int layer,
                                           std::size_t head);

struct TrainConfig {
  std::size_t heads = 8;
  std::size_t hidden_dim = 128;
  std::size_t batch_size = 500;
  double learning_rate = 0.01;
  double weight_decay = 5e-4;
  double dropout = 0.5;
  int epochs = 30;
  std::uint64_t seed = 0;
  enum class Optimizer { GradientDescent, Adam };
  Optimizer optimizer = Optimizer::Adam;
  ExecPolicy policy = ExecPolicy::Parallel;

  // Throws ConfigError on non-positive sizes or dropout outside [0, 1).
  void validate() const;
};

std::string_view to_string(TrainConfig::Optimizer o);
std::optional<TrainConfig::Optimizer> parse_optimizer(std::string_view s);

// Trains on every vertex of the prepared graph. Labels index the class list.
GatModel train_benign(const AttentionGraph& g, const Matrix& features, std::span<const int> labels,
                      std::size_t class_count, const TrainConfig& cfg);

struct PredictResult {
  Matrix probabilities;
  std::vector<int> predicted;
};

// Row-wise softmax and argmax (lowest index wins ties).
PredictResult predict_from_logits(const Matrix& logits);
PredictResult predict_type(const GatModel& m, const AttentionGraph& g, const Matrix& features,
                           ExecPolicy policy = ExecPolicy::Parallel);

inline bool is_anomalous(int predicted, int actual) { return predicted != actual; }

// Fraction of the k-hop neighborhood of v that is not flagged; 0 when the
// neighborhood is empty. `flagged` is indexed by vertex.
double benign_density(const ProvenanceGraph& g, VertexIndex v, const std::vector<char>& flagged, int k = 2);
double benign_density(const ProvenanceGraph& g, std::string_view id, const std::set<std::string>& flagged, int k = 2);

// One pass against the original flagged set: drops every vertex whose
// density strictly exceeds the threshold.
std::vector<char> postprocess(const ProvenanceGraph& g, const std::vector<char>& flagged, double threshold = 0.8,
                              int k = 2, ExecPolicy policy = ExecPolicy::Parallel);
std::set<std::string> postprocess(const ProvenanceGraph& g, const std::set<std::string>& flagged,
                                  double threshold = 0.8, int k = 2);

// Trained classifier plus everything needed to featurize a new graph.
struct DetectorModel {
  EdgeTypeRegistry registry;
  std::vector<std::string> classes;  // entity kind names, in label order
  TrainConfig config;
  AnomalyScorer::Kind scorer = AnomalyScorer::Kind::EdgeRarity;
  FeatureNormalizer normalizer;
  GatModel gat;
};

inline std::vector<std::string> default_classes() { return {"process", "file", "socket"}; }

// Label of every vertex as an index into classes; ConfigError for a kind
// outside the class list.
std::vector<int> kind_labels(const ProvenanceGraph& g, const std::vector<std::string>& classes);

DetectorModel train_detector(const ProvenanceGraph& benign, const TrainConfig& cfg,
                             AnomalyScorer::Kind scorer = AnomalyScorer::Kind::EdgeRarity,
                             std::vector<std::string> classes = default_classes());

struct DetectConfig {
  int k = 2;
  double density_threshold = 0.8;
  ExecPolicy policy = ExecPolicy::Parallel;
  void validate() const;
};

struct VertexPrediction {
  std::string id;
  std::string predicted;
  std::string actual;
  bool anomalous_pre = false;
  bool anomalous_post = false;
  std::optional<double> benign_density;  // set for flagged vertices
};

// Throws ConfigError when g's registry differs from the model's.
std::vector<VertexPrediction> detect(const DetectorModel& model, const ProvenanceGraph& g, const DetectConfig& cfg = {});

// One JSON object per line, in vertex order.
std::string predictions_to_jsonl(std::span<const VertexPrediction> preds);
std::vector<VertexPrediction> predictions_from_jsonl(std::string_view doc);

std::string serialize_model(const DetectorModel& m);
DetectorModel deserialize_model(std::string_view doc);

}  // namespace provmon
