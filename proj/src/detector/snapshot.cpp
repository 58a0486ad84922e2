#include "provmon/detector.hpp"
#include "provmon/error.hpp"

namespace provmon {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

constexpr const char* kFormat = "provmon-gat";
constexpr int kVersion = 1;

ojson matrix_json(const Matrix& m) { return {{"rows", m.rows}, {"cols", m.cols}, {"data", m.data}}; }

Matrix matrix_from(const json& j, const char* name) {
  Matrix m;
  m.rows = j.at("rows").get<std::size_t>();
  m.cols = j.at("cols").get<std::size_t>();
  m.data = j.at("data").get<std::vector<double>>();
  if (m.data.size() != m.rows * m.cols)
    throw ConfigError(std::string("model snapshot: matrix ") + name + " declares " + std::to_string(m.rows) + "x" +
                      std::to_string(m.cols) + " but holds " + std::to_string(m.data.size()) + " values");
  return m;
}

const char* const kMatrixNames[] = {"w1", "a1_src", "a1_dst", "w2", "a2_src", "a2_dst"};

}  // namespace

std::string serialize_model(const DetectorModel& m) {
  ojson j;
  j["format"] = kFormat;
  j["version"] = kVersion;
  j["registry"] = m.registry.names();
  j["classes"] = m.classes;
  const auto& c = m.config;
  j["config"] = {{"heads", c.heads},
                 {"hidden_dim", c.hidden_dim},
                 {"batch_size", c.batch_size},
                 {"learning_rate", c.learning_rate},
                 {"weight_decay", c.weight_decay},
                 {"dropout", c.dropout},
                 {"epochs", c.epochs},
                 {"seed", c.seed},
                 {"optimizer", to_string(c.optimizer)}};
  j["scorer"] = to_string(m.scorer);
  j["dims"] = {{"input_dim", m.gat.input_dim},
               {"heads", m.gat.heads},
               {"hidden_dim", m.gat.hidden_dim},
               {"class_count", m.gat.class_count},
               {"slope", m.gat.slope}};
  j["normalizer"] = {{"count_dims", m.normalizer.count_dims},
                     {"mean", m.normalizer.mean},
                     {"stddev", m.normalizer.stddev}};
  ojson mats;
  auto params = m.gat.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) mats[kMatrixNames[i]] = matrix_json(*params[i]);
  j["matrices"] = std::move(mats);
  return j.dump() + "\n";
}

DetectorModel deserialize_model(std::string_view doc) {
  DetectorModel m;
  try {
    auto j = json::parse(doc);
    if (j.at("format").get<std::string>() != kFormat) throw ConfigError("model snapshot: unknown format");
    if (j.at("version").get<int>() != kVersion)
      throw ConfigError("model snapshot: unsupported version " + j.at("version").dump());
    m.registry = EdgeTypeRegistry(j.at("registry").get<std::vector<std::string>>());
    m.classes = j.at("classes").get<std::vector<std::string>>();
    const auto& c = j.at("config");
    m.config.heads = c.at("heads");
    m.config.hidden_dim = c.at("hidden_dim");
    m.config.batch_size = c.at("batch_size");
    m.config.learning_rate = c.at("learning_rate");
    m.config.weight_decay = c.at("weight_decay");
    m.config.dropout = c.at("dropout");
    m.config.epochs = c.at("epochs");
    m.config.seed = c.at("seed");
    auto opt = parse_optimizer(c.at("optimizer").get<std::string>());
    if (!opt) throw ConfigError("model snapshot: unknown optimizer");
    m.config.optimizer = *opt;
    auto kind = parse_scorer_kind(j.at("scorer").get<std::string>());
    if (!kind || *kind == AnomalyScorer::Kind::Custom) throw ConfigError("model snapshot: unsupported scorer");
    m.scorer = *kind;
    const auto& d = j.at("dims");
    m.gat.input_dim = d.at("input_dim");
    m.gat.heads = d.at("heads");
    m.gat.hidden_dim = d.at("hidden_dim");
    m.gat.class_count = d.at("class_count");
    m.gat.slope = d.at("slope");
    const auto& n = j.at("normalizer");
    m.normalizer.count_dims = n.at("count_dims");
    m.normalizer.mean = n.at("mean").get<std::vector<double>>();
    m.normalizer.stddev = n.at("stddev").get<std::vector<double>>();
    auto params = m.gat.parameters();
    for (std::size_t i = 0; i < params.size(); ++i)
      *params[i] = matrix_from(j.at("matrices").at(kMatrixNames[i]), kMatrixNames[i]);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model snapshot: ") + e.what());
  }
  m.gat.check_shapes();
  if (m.classes.size() != m.gat.class_count) throw ConfigError("model snapshot: class list disagrees with dims");
  if (m.gat.input_dim != 2 * m.registry.size() + 1 || m.normalizer.mean.size() != m.gat.input_dim ||
      m.normalizer.stddev.size() != m.gat.input_dim)
    throw ConfigError("model snapshot: input width disagrees with the registry");
  return m;
}

}  // namespace provmon
