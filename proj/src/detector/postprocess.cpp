#include <sstream>

#include "provmon/detector.hpp"
#include "provmon/error.hpp"

namespace provmon {

using ojson = nlohmann::ordered_json;

double benign_density(const ProvenanceGraph& g, VertexIndex v, const std::vector<char>& flagged, int k) {
  if (k < 1) throw ArgumentError("k must be at least 1");
  if (flagged.size() != g.vertex_count()) throw ArgumentError("flag mask size does not match the graph");
  if (v >= g.vertex_count()) throw LookupError("unknown vertex index " + std::to_string(v));
  const auto hood = g.neighbors_k(v, k);
  if (hood.empty()) return 0.0;
  std::size_t benign = 0;
  for (auto u : hood) benign += flagged[u] ? 0 : 1;
  return static_cast<double>(benign) / static_cast<double>(hood.size());
}

namespace {

std::vector<char> mask_of(const ProvenanceGraph& g, const std::set<std::string>& flagged) {
  std::vector<char> mask(g.vertex_count(), 0);
  for (const auto& id : flagged) mask[g.index_of(id)] = 1;
  return mask;
}

}  // namespace

double benign_density(const ProvenanceGraph& g, std::string_view id, const std::set<std::string>& flagged, int k) {
  const auto v = g.index_of(id);
  return benign_density(g, v, mask_of(g, flagged), k);
}

std::vector<char> postprocess(const ProvenanceGraph& g, const std::vector<char>& flagged, double threshold, int k,
                              ExecPolicy policy) {
  if (!(threshold > 0.0 && threshold <= 1.0)) throw ConfigError("density threshold must lie in (0, 1]");
  if (k < 1) throw ConfigError("k must be at least 1");
  if (flagged.size() != g.vertex_count()) throw ArgumentError("flag mask size does not match the graph");
  std::vector<char> out = flagged;
  const auto n = static_cast<std::ptrdiff_t>(g.vertex_count());
#pragma omp parallel for schedule(dynamic, 16) if (policy == ExecPolicy::Parallel)
  for (std::ptrdiff_t v = 0; v < n; ++v)
    if (flagged[v] && benign_density(g, static_cast<VertexIndex>(v), flagged, k) > threshold) out[v] = 0;
  return out;
}

std::set<std::string> postprocess(const ProvenanceGraph& g, const std::set<std::string>& flagged, double threshold,
                                  int k) {
  const auto kept = postprocess(g, mask_of(g, flagged), threshold, k);
  std::set<std::string> out;
  for (VertexIndex v = 0; v < g.vertex_count(); ++v)
    if (kept[v]) out.insert(g.vertex(v).id);
  return out;
}

void DetectConfig::validate() const {
  if (k < 1) throw ConfigError("k must be at least 1");
  if (!(density_threshold > 0.0 && density_threshold <= 1.0))
    throw ConfigError("density threshold must lie in (0, 1]");
}

std::vector<VertexPrediction> detect(const DetectorModel& model, const ProvenanceGraph& g, const DetectConfig& cfg) {
  cfg.validate();
  if (!(g.registry() == model.registry))
    throw ConfigError("graph edge-type registry (" + std::to_string(g.registry().size()) +
                      " types) differs from the model's (" + std::to_string(model.registry.size()) + " types)");
  const auto actual = kind_labels(g, model.classes);
  const AnomalyScorer scorer =
      model.scorer == AnomalyScorer::Kind::Zero ? AnomalyScorer::zero() : AnomalyScorer::edge_rarity();
  const Matrix x = model.normalizer.apply(raw_features(g, scorer));
  const auto pred = predict_type(model.gat, attention_graph(g), x, cfg.policy);

  std::vector<char> flagged(g.vertex_count(), 0);
  for (VertexIndex v = 0; v < g.vertex_count(); ++v) flagged[v] = is_anomalous(pred.predicted[v], actual[v]);
  const auto kept = postprocess(g, flagged, cfg.density_threshold, cfg.k, cfg.policy);

  std::vector<VertexPrediction> out(g.vertex_count());
  for (VertexIndex v = 0; v < g.vertex_count(); ++v) {
    auto& p = out[v];
    p.id = g.vertex(v).id;
    p.predicted = model.classes[pred.predicted[v]];
    p.actual = model.classes[actual[v]];
    p.anomalous_pre = flagged[v];
    p.anomalous_post = kept[v];
    if (flagged[v]) p.benign_density = benign_density(g, v, flagged, cfg.k);
  }
  return out;
}

std::string predictions_to_jsonl(std::span<const VertexPrediction> preds) {
  std::string out;
  for (const auto& p : preds) {
    ojson j;
    j["id"] = p.id;
    j["predicted"] = p.predicted;
    j["actual"] = p.actual;
    j["anomalous_pre"] = p.anomalous_pre;
    j["anomalous_post"] = p.anomalous_post;
    j["benign_density"] = p.benign_density ? ojson(*p.benign_density) : ojson(nullptr);
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<VertexPrediction> predictions_from_jsonl(std::string_view doc) {
  std::vector<VertexPrediction> out;
  std::istringstream in{std::string(doc)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      VertexPrediction p;
      p.id = j.at("id").get<std::string>();
      p.predicted = j.at("predicted").get<std::string>();
      p.actual = j.at("actual").get<std::string>();
      p.anomalous_pre = j.at("anomalous_pre").get<bool>();
      p.anomalous_post = j.at("anomalous_post").get<bool>();
      if (j.contains("benign_density") && !j["benign_density"].is_null())
        p.benign_density = j["benign_density"].get<double>();
      out.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace provmon
