#include <algorithm>
#include <cmath>
#include <limits>

#include "provmon/detector.hpp"
#include "provmon/error.hpp"

namespace provmon {

AnomalyScorer AnomalyScorer::custom(Fn fn) {
  if (!fn) throw ConfigError("custom scorer needs a function");
  AnomalyScorer s(Kind::Custom);
  s.fn_ = std::move(fn);
  s.fitted_ = true;
  return s;
}

void AnomalyScorer::fit(const ProvenanceGraph& g) {
  type_counts_.assign(g.registry().size(), 0);
  for (const auto& e : g.edges()) ++type_counts_[e.etype];
  edge_total_ = g.edge_count();
  fitted_ = true;
}

double AnomalyScorer::score(const ProvenanceGraph& g, VertexIndex v) const {
  switch (kind_) {
    case Kind::Zero:
      return 0.0;
    case Kind::Custom:
      return std::clamp(fn_(g, v), 0.0, 1.0);
    case Kind::EdgeRarity:
      break;
  }
  if (!fitted_) throw Error("edge-rarity scorer used before fit");
  auto rarest = std::numeric_limits<std::int64_t>::max();
  auto visit = [&](const std::vector<std::uint32_t>& edges) {
    for (auto ei : edges) rarest = std::min(rarest, type_counts_.at(g.edges()[ei].etype));
  };
  visit(g.in_edges(v));
  visit(g.out_edges(v));
  if (rarest == std::numeric_limits<std::int64_t>::max() || edge_total_ == 0) return 0.0;
  return std::clamp(1.0 - static_cast<double>(rarest) / static_cast<double>(edge_total_), 0.0, 1.0);
}

std::string_view to_string(AnomalyScorer::Kind k) {
  switch (k) {
    case AnomalyScorer::Kind::Zero: return "zero";
    case AnomalyScorer::Kind::EdgeRarity: return "edge_rarity";
    case AnomalyScorer::Kind::Custom: return "custom";
  }
  return "?";
}

std::optional<AnomalyScorer::Kind> parse_scorer_kind(std::string_view s) {
  if (s == "zero") return AnomalyScorer::Kind::Zero;
  if (s == "edge_rarity") return AnomalyScorer::Kind::EdgeRarity;
  if (s == "custom") return AnomalyScorer::Kind::Custom;
  return std::nullopt;
}

FeatureVector embed_vertex(const ProvenanceGraph& g, VertexIndex v, const AnomalyScorer& scorer) {
  const std::size_t r = g.registry().size();
  FeatureVector h(2 * r + 1, 0.0);
  for (auto ei : g.in_edges(v)) h[g.edges()[ei].etype] += 1.0;
  for (auto ei : g.out_edges(v)) h[r + g.edges()[ei].etype] += 1.0;
  h[2 * r] = scorer.score(g, v);
  return h;
}

FeatureVector embed_vertex(const ProvenanceGraph& g, std::string_view id, const AnomalyScorer& scorer) {
  return embed_vertex(g, g.index_of(id), scorer);
}

Matrix raw_features(const ProvenanceGraph& g, const AnomalyScorer& scorer) {
  AnomalyScorer s = scorer;
  if (s.kind() == AnomalyScorer::Kind::EdgeRarity) s.fit(g);
  const std::size_t d = 2 * g.registry().size() + 1;
  Matrix x(g.vertex_count(), d);
  for (VertexIndex v = 0; v < g.vertex_count(); ++v) {
    auto h = embed_vertex(g, v, s);
    std::copy(h.begin(), h.end(), x.row(v).begin());
  }
  return x;
}

namespace {

Matrix log_counts(const Matrix& raw, std::size_t count_dims) {
  Matrix x = raw;
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t j = 0; j < count_dims && j < x.cols; ++j) x(i, j) = std::log1p(x(i, j));
  return x;
}

}  // namespace

FeatureNormalizer FeatureNormalizer::fit(const Matrix& raw, std::size_t count_dims) {
  FeatureNormalizer n;
  n.count_dims = count_dims;
  Matrix x = log_counts(raw, count_dims);
  n.mean.assign(x.cols, 0.0);
  n.stddev.assign(x.cols, 1.0);
  if (x.rows == 0) return n;
  for (std::size_t j = 0; j < x.cols; ++j) {
    double sum = 0.0;
    for (std::size_t i = 0; i < x.rows; ++i) sum += x(i, j);
    const double mu = sum / static_cast<double>(x.rows);
    double var = 0.0;
    for (std::size_t i = 0; i < x.rows; ++i) var += (x(i, j) - mu) * (x(i, j) - mu);
    n.mean[j] = mu;
    n.stddev[j] = std::max(std::sqrt(var / static_cast<double>(x.rows)), 1e-6);
  }
  return n;
}

Matrix FeatureNormalizer::apply(const Matrix& raw) const {
  if (raw.cols != mean.size())
    throw ConfigError("feature width " + std::to_string(raw.cols) + " does not match normalizer width " +
                      std::to_string(mean.size()));
  Matrix x = log_counts(raw, count_dims);
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t j = 0; j < x.cols; ++j) x(i, j) = (x(i, j) - mean[j]) / stddev[j];
  return x;
}

AttentionGraph attention_graph(const ProvenanceGraph& g) {
  std::vector<std::vector<std::uint32_t>> adj(g.vertex_count());
  for (VertexIndex v = 0; v < g.vertex_count(); ++v) adj[v] = g.undirected_neighbors(v);
  return AttentionGraph::from_adjacency(adj);
}

std::vector<int> kind_labels(const ProvenanceGraph& g, const std::vector<std::string>& classes) {
  std::vector<int> labels(g.vertex_count());
  for (VertexIndex v = 0; v < g.vertex_count(); ++v) {
    auto name = to_string(g.vertex(v).kind);
    auto it = std::find(classes.begin(), classes.end(), name);
    if (it == classes.end()) throw ConfigError("entity kind \"" + std::string(name) + "\" is not a model class");
    labels[v] = static_cast<int>(it - classes.begin());
  }
  return labels;
}

}  // namespace provmon
