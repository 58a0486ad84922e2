#include <iomanip>
#include <sstream>

#include "provmon/error.hpp"
#include "provmon/evalharness.hpp"

namespace provmon {

using ojson = nlohmann::ordered_json;

std::size_t LabelSet::anomalous_count() const {
  std::size_t n = 0;
  for (const auto& [id, l] : labels) n += l == Label::Anomalous;
  return n;
}

LabelSet LabelSet::from_jsonl(std::string_view doc) {
  LabelSet out;
  std::istringstream in{std::string(doc)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "line " + std::to_string(lineno) + ": ";
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(where + e.what());
    }
    if (!j.is_object() || !j.contains("id") || !j["id"].is_string()) throw ParseError(where + "field 'id' missing");
    if (!j.contains("label") || !j["label"].is_string()) throw ParseError(where + "field 'label' missing");
    const auto id = j["id"].get<std::string>();
    const auto text = j["label"].get<std::string>();
    Label l;
    if (text == "benign")
      l = Label::Benign;
    else if (text == "anomalous")
      l = Label::Anomalous;
    else
      throw ParseError(where + "field 'label': expected benign or anomalous, got \"" + text + "\"");
    if (!out.labels.emplace(id, l).second) throw ParseError(where + "duplicate id \"" + id + "\"");
  }
  return out;
}

std::string LabelSet::to_jsonl() const {
  std::string out;
  for (const auto& [id, l] : labels) {
    ojson j{{"id", id}, {"label", l == Label::Anomalous ? "anomalous" : "benign"}};
    out += j.dump() + "\n";
  }
  return out;
}

Metrics metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn) {
  auto ratio = [](double num, double den) { return den == 0 ? 0.0 : num / den; };
  Metrics m{tp, fp, tn, fn};
  m.precision = ratio(tp, tp + fp);
  m.recall = ratio(tp, tp + fn);
  m.fpr = ratio(fp, fp + tn);
  m.f1 = ratio(2 * m.precision * m.recall, m.precision + m.recall);
  return m;
}

Metrics compute_metrics(const std::set<std::string>& flagged, const LabelSet& labels) {
  std::vector<std::string> missing;
  for (const auto& id : flagged)
    if (!labels.labels.contains(id)) missing.push_back(id);
  if (!missing.empty()) {
    std::string msg = "flagged ids without labels:";
    for (const auto& id : missing) msg += " " + id;
    throw CoverageError(msg);
  }
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (const auto& [id, l] : labels.labels) {
    const bool hit = flagged.contains(id);
    if (l == Label::Anomalous)
      (hit ? tp : fn)++;
    else
      (hit ? fp : tn)++;
  }
  return metrics_from_counts(tp, fp, tn, fn);
}

ojson metrics_to_json(const Metrics& m) {
  return {{"tp", m.tp},           {"fp", m.fp},         {"tn", m.tn},   {"fn", m.fn},
          {"precision", m.precision}, {"recall", m.recall}, {"fpr", m.fpr}, {"f1", m.f1}};
}

std::string metrics_table(const std::vector<std::pair<std::string, Metrics>>& rows) {
  std::size_t w = 6;
  for (const auto& [name, m] : rows) w = std::max(w, name.size());
  std::ostringstream out;
  out << std::left << std::setw(static_cast<int>(w)) << "Run" << std::right;
  for (const char* h : {"TP", "FP", "TN", "FN"}) out << std::setw(8) << h;
  for (const char* h : {"Precision", "Recall", "FPR", "F1-Score"}) out << std::setw(11) << h;
  out << "\n";
  out << std::fixed << std::setprecision(4);
  for (const auto& [name, m] : rows) {
    out << std::left << std::setw(static_cast<int>(w)) << name << std::right;
    for (auto c : {m.tp, m.fp, m.tn, m.fn}) out << std::setw(8) << c;
    for (auto r : {m.precision, m.recall, m.fpr, m.f1}) out << std::setw(11) << r;
    out << "\n";
  }
  return out.str();
}

}  // namespace provmon
