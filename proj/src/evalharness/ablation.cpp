#include "provmon/error.hpp"
#include "provmon/evalharness.hpp"

namespace provmon {

AblationResult evaluate_model(const DetectorModel& model, const ProvenanceGraph& g, const LabelSet& labels,
                              const DetectConfig& detect_cfg) {
  const auto preds = detect(model, g, detect_cfg);
  std::set<std::string> pre, post;
  for (const auto& p : preds) {
    if (p.anomalous_pre) pre.insert(p.id);
    if (p.anomalous_post) post.insert(p.id);
  }
  AblationResult r;
  r.without_postprocess = compute_metrics(pre, labels);
  r.with_postprocess = compute_metrics(post, labels);
  r.f1_delta = r.with_postprocess.f1 - r.without_postprocess.f1;
  return r;
}

AblationResult run_ablation(const ProvenanceGraph& g, const LabelSet& labels, const TrainConfig& train,
                            const DetectConfig& detect_cfg) {
  std::vector<VertexIndex> keep;
  for (VertexIndex v = 0; v < g.vertex_count(); ++v) {
    auto it = labels.labels.find(g.vertex(v).id);
    if (it != labels.labels.end() && it->second == Label::Benign) keep.push_back(v);
  }
  const auto model = train_detector(g.induced(keep), train);
  return evaluate_model(model, g, labels, detect_cfg);
}

}  // namespace provmon
