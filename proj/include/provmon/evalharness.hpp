#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "provmon/detector.hpp"
#include "provmon/provgraph.hpp"

namespace provmon {

enum class Label { Benign, Anomalous };

struct LabelSet {
  std::map<std::string, Label> labels;

  std::size_t anomalous_count() const;
  // JSON lines {"id": ..., "label": "benign"|"anomalous"}; ParseError with
  // line number on bad records or duplicate ids.
  static LabelSet from_jsonl(std::string_view doc);
  std::string to_jsonl() const;
};

struct Metrics {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  double precision = 0, recall = 0, fpr = 0, f1 = 0;
};

// Rates from counts; each is 0 when its denominator is 0.
Metrics metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn);
// Throws CoverageError listing flagged ids that have no label.
Metrics compute_metrics(const std::set<std::string>& flagged, const LabelSet& labels);

nlohmann::ordered_json metrics_to_json(const Metrics& m);
// Aligned columns, one row per named result.
std::string metrics_table(const std::vector<std::pair<std::string, Metrics>>& rows);

enum class ScenarioKind { Generic, Log4jEnv, OpenSmtpd };
std::string_view to_string(ScenarioKind k);
std::optional<ScenarioKind> parse_scenario_kind(std::string_view s);

struct ScenarioConfig {
  std::size_t benign_vertex_count = 800;  // includes the isolated anomalies
  std::size_t attack_cluster_size = 37;
  std::size_t isolated_anomaly_count = 12;
  double edge_density = 3.0;  // mean out-edges per benign process
  std::uint64_t seed = 0;
  ScenarioKind scenario = ScenarioKind::Generic;

  void validate() const;
};

struct Scenario {
  ProvenanceGraph graph;
  LabelSet labels;
  std::vector<std::string> cluster;   // attack vertices (labeled anomalous)
  std::vector<std::string> isolated;  // benign-labeled outliers
};

// Seeded and deterministic.
Scenario gen_scenario(const ScenarioConfig& cfg);

struct AblationResult {
  Metrics with_postprocess;
  Metrics without_postprocess;
  double f1_delta = 0;
};

// Trains once on the subgraph induced by benign-labeled vertices, then
// scores the flagged sets before and after post-processing.
AblationResult run_ablation(const ProvenanceGraph& g, const LabelSet& labels, const TrainConfig& train,
                            const DetectConfig& detect = {});
// Same, with an already trained model.
AblationResult evaluate_model(const DetectorModel& model, const ProvenanceGraph& g, const LabelSet& labels,
                              const DetectConfig& detect = {});

}  // namespace provmon
