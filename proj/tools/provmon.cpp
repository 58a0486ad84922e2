// provmon command-line entry point.
//
// Every run writes a manifest (subcommand, config hash, seed, input digests,
// outputs, wall time) to --manifest, or to "<first output>.manifest.json".
// Exit codes: 0 ok, 1 internal error, 2 bad input, 3 bad configuration.

#include <cctype>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "provmon/capmodel.hpp"
#include "provmon/detector.hpp"
#include "provmon/digest.hpp"
#include "provmon/error.hpp"
#include "provmon/evalharness.hpp"
#include "provmon/extraction.hpp"
#include "provmon/planner.hpp"
#include "provmon/provgraph.hpp"
#include "provmon/textgen.hpp"

using namespace provmon;
using ojson = nlohmann::ordered_json;

namespace {

struct InputError : Error {
  explicit InputError(const std::string& w) : Error(w, ErrorKind::Input) {}
};

class Run {
 public:
  explicit Run(std::string subcommand) : subcommand_(std::move(subcommand)), start_(clock::now()) {}

  std::string read(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    std::string data = ss.str();
    inputs_.push_back({{"path", path}, {"sha256", sha256_hex(data)}});
    return data;
  }

  void write(const std::string& path, const std::string& data) {
    std::ofstream out(path, std::ios::binary);
    if (!out || !(out << data)) throw Error("cannot write " + path);
    outputs_.push_back(path);
  }

  void set_config(ojson cfg, std::optional<std::uint64_t> seed = std::nullopt) {
    config_ = std::move(cfg);
    seed_ = seed;
  }

  void finish(const std::string& manifest_path) {
    const double wall = std::chrono::duration<double>(clock::now() - start_).count();
    ojson m;
    m["subcommand"] = subcommand_;
    m["config"] = config_;
    m["config_hash"] = sha256_hex(config_.dump());
    m["seed"] = seed_ ? ojson(*seed_) : ojson(nullptr);
    m["inputs"] = inputs_;
    m["outputs"] = outputs_;
    m["wall_time_s"] = wall;
    std::string path = manifest_path;
    if (path.empty() && !outputs_.empty()) path = outputs_.front() + ".manifest.json";
    if (path.empty()) {
      std::cerr << m.dump() << "\n";
      return;
    }
    std::ofstream out(path);
    if (!out || !(out << m.dump(2) << "\n")) throw Error("cannot write " + path);
  }

 private:
  using clock = std::chrono::steady_clock;
  std::string subcommand_;
  clock::time_point start_;
  ojson config_ = ojson::object();
  std::optional<std::uint64_t> seed_;
  ojson inputs_ = ojson::array();
  std::vector<std::string> outputs_;
};

// Accepts either a graph snapshot or an event stream.
ProvenanceGraph load_graph(Run& run, const std::string& path, const ParseOptions& opts = {}) {
  const std::string text = run.read(path);
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    const auto eol = text.find('\n', first);
    auto head = nlohmann::json::parse(text.substr(first, eol == std::string::npos ? std::string::npos : eol - first),
                                      nullptr, false);
    if (!head.is_discarded() && head.is_object() && head.contains("format")) return deserialize_snapshot(text);
  }
  std::istringstream in(text);
  return read_event_stream(in, opts);
}

const CLI::IsMember kScenarioNames({"generic", "log4j_env", "opensmtpd"});

// Flags shared by every subcommand.
struct Common {
  std::string manifest;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--manifest", c.manifest, "Run manifest path (default: <first output>.manifest.json)")
      ->envname("PROVMON_MANIFEST");
}

// ---- ingest ----

struct IngestOpts {
  std::string input, out;
  bool extend = false;
};

void cmd_ingest(const IngestOpts& o, const Common& c) {
  Run run("ingest");
  run.set_config({{"input", o.input}, {"out", o.out}, {"extend_registry", o.extend}});
  const std::string text = run.read(o.input);
  std::istringstream in(text);
  ParseOptions po;
  po.extend_registry = o.extend;
  ProvenanceGraph g = read_event_stream(in, po);
  if (g.vertex_count() == 0) std::cerr << "warning: " << o.input << " contains no events\n";
  run.write(o.out, serialize_snapshot(g));
  std::cout << "vertices " << g.vertex_count() << " edges " << g.edge_count() << "\n";
  run.finish(c.manifest);
}

// ---- train ----

struct TrainOpts {
  std::string graph, labels, out;
  TrainConfig cfg;
  AnomalyScorer::Kind scorer = AnomalyScorer::Kind::EdgeRarity;
};

ojson train_config_json(const TrainConfig& t) {
  return {{"heads", t.heads},           {"hidden_dim", t.hidden_dim},     {"batch_size", t.batch_size},
          {"learning_rate", t.learning_rate}, {"weight_decay", t.weight_decay}, {"dropout", t.dropout},
          {"epochs", t.epochs},         {"seed", t.seed},                 {"optimizer", to_string(t.optimizer)}};
}

void add_train_flags(CLI::App* sub, TrainConfig& t) {
  sub->add_option("--seed", t.seed, "Random seed")->envname("PROVMON_SEED")->capture_default_str();
  sub->add_option("--epochs", t.epochs, "Training epochs")->envname("PROVMON_EPOCHS")->capture_default_str();
  sub->add_option("--heads", t.heads, "Attention heads")->envname("PROVMON_HEADS")->capture_default_str();
  sub->add_option("--hidden", t.hidden_dim, "Hidden units per head")->envname("PROVMON_HIDDEN")->capture_default_str();
  sub->add_option("--batch-size", t.batch_size, "Minibatch size")->envname("PROVMON_BATCH_SIZE")->capture_default_str();
  sub->add_option("--lr", t.learning_rate, "Learning rate")->envname("PROVMON_LR")->capture_default_str();
  sub->add_option("--weight-decay", t.weight_decay, "Weight decay")
      ->envname("PROVMON_WEIGHT_DECAY")
      ->capture_default_str();
  sub->add_option("--dropout", t.dropout, "Dropout rate")->envname("PROVMON_DROPOUT")->capture_default_str();
  sub->add_option_function<std::string>(
         "--optimizer", [&t](const std::string& s) { t.optimizer = *parse_optimizer(s); }, "Optimizer")
      ->check(CLI::IsMember({"adam", "sgd"}))
      ->envname("PROVMON_OPTIMIZER");
}

void cmd_train(const TrainOpts& o, const Common& c) {
  Run run("train");
  ojson cfg = train_config_json(o.cfg);
  cfg["graph"] = o.graph;
  cfg["labels"] = o.labels;
  cfg["scorer"] = to_string(o.scorer);
  run.set_config(cfg, o.cfg.seed);
  ProvenanceGraph g = load_graph(run, o.graph);
  if (!o.labels.empty()) {
    const LabelSet labels = LabelSet::from_jsonl(run.read(o.labels));
    std::vector<VertexIndex> keep;
    for (VertexIndex v = 0; v < g.vertex_count(); ++v) {
      auto it = labels.labels.find(g.vertex(v).id);
      if (it == labels.labels.end() || it->second == Label::Benign) keep.push_back(v);
    }
    g = g.induced(keep);
  }
  const DetectorModel model = train_detector(g, o.cfg, o.scorer);
  run.write(o.out, serialize_model(model));
  std::cout << "trained on " << g.vertex_count() << " vertices\n";
  run.finish(c.manifest);
}

// ---- detect ----

struct DetectOpts {
  std::string graph, model, out;
  DetectConfig cfg;
};

void add_detect_flags(CLI::App* sub, DetectConfig& d) {
  sub->add_option("--k", d.k, "Neighborhood radius for benign density")->envname("PROVMON_K")->capture_default_str();
  sub->add_option("--density-threshold", d.density_threshold, "Unflag when benign density exceeds this")
      ->envname("PROVMON_DENSITY_THRESHOLD")
      ->capture_default_str();
}

void cmd_detect(const DetectOpts& o, const Common& c) {
  Run run("detect");
  run.set_config({{"graph", o.graph}, {"model", o.model}, {"k", o.cfg.k}, {"density_threshold", o.cfg.density_threshold}});
  const DetectorModel model = deserialize_model(run.read(o.model));
  const ProvenanceGraph g = load_graph(run, o.graph);
  const auto preds = detect(model, g, o.cfg);
  run.write(o.out, predictions_to_jsonl(preds));
  std::size_t pre = 0, post = 0;
  for (const auto& p : preds) {
    pre += p.anomalous_pre;
    post += p.anomalous_post;
  }
  std::cout << "flagged " << pre << " before post-processing, " << post << " after\n";
  run.finish(c.manifest);
}

// ---- eval ----

struct EvalOpts {
  std::string predictions, labels, out;
  bool table = false;
  std::optional<ScenarioKind> scenario;
  ScenarioConfig scenario_cfg;
  TrainConfig train;
  DetectConfig detect;
};

void emit_metrics(Run& run, const EvalOpts& o, const std::vector<std::pair<std::string, Metrics>>& rows,
                  const ojson& doc) {
  if (!o.out.empty()) run.write(o.out, doc.dump(2) + "\n");
  if (o.table)
    std::cout << metrics_table(rows);
  else if (o.out.empty())
    std::cout << doc.dump(2) << "\n";
  const auto& best = rows.front().second;
  std::cout << "f1 = " << ojson(best.f1).dump() << "\n";
}

void cmd_eval(const EvalOpts& o, const Common& c) {
  Run run("eval");
  if (o.scenario) {
    ScenarioConfig sc = o.scenario_cfg;
    sc.scenario = *o.scenario;
    TrainConfig tc = o.train;
    tc.seed = sc.seed;
    ojson cfg = train_config_json(tc);
    cfg["scenario"] = to_string(sc.scenario);
    cfg["benign"] = sc.benign_vertex_count;
    cfg["cluster"] = sc.attack_cluster_size;
    cfg["isolated"] = sc.isolated_anomaly_count;
    cfg["edge_density"] = sc.edge_density;
    cfg["k"] = o.detect.k;
    cfg["density_threshold"] = o.detect.density_threshold;
    run.set_config(cfg, sc.seed);
    const Scenario s = gen_scenario(sc);
    const AblationResult r = run_ablation(s.graph, s.labels, tc, o.detect);
    ojson doc;
    doc["with_postprocess"] = metrics_to_json(r.with_postprocess);
    doc["without_postprocess"] = metrics_to_json(r.without_postprocess);
    doc["f1_delta"] = r.f1_delta;
    emit_metrics(run, o, {{"with locality", r.with_postprocess}, {"without locality", r.without_postprocess}}, doc);
    run.finish(c.manifest);
    return;
  }
  if (o.predictions.empty() || o.labels.empty())
    throw ConfigError("eval needs --predictions and --labels, or --scenario");
  run.set_config({{"predictions", o.predictions}, {"labels", o.labels}});
  const auto preds = predictions_from_jsonl(run.read(o.predictions));
  const LabelSet labels = LabelSet::from_jsonl(run.read(o.labels));
  std::set<std::string> pre, post;
  for (const auto& p : preds) {
    if (p.anomalous_pre) pre.insert(p.id);
    if (p.anomalous_post) post.insert(p.id);
  }
  const Metrics with = compute_metrics(post, labels);
  const Metrics without = compute_metrics(pre, labels);
  ojson doc = metrics_to_json(with);
  doc["without_postprocess"] = metrics_to_json(without);
  emit_metrics(run, o, {{"with locality", with}, {"without locality", without}}, doc);
  run.finish(c.manifest);
}

// ---- plan ----

struct PlanOpts {
  std::string catalog, task, out, execute, generator_cmd;
  DecomposerStrategy::Kind decomposer = DecomposerStrategy::Kind::RuleBased;
  CostParams params;
  int depth = 5;
};

void cmd_plan(const PlanOpts& o, const Common& c) {
  Run run("plan");
  const bool external = o.decomposer == DecomposerStrategy::Kind::ExternalGenerator;
  run.set_config({{"catalog", o.catalog},
                  {"task", o.task},
                  {"decomposer", external ? "external" : "rule"},
                  {"generator_cmd", o.generator_cmd},
                  {"alpha", o.params.alpha},
                  {"beta", {o.params.beta_user, o.params.beta_kernel, o.params.beta_hw}},
                  {"gamma", {o.params.gamma_user, o.params.gamma_kernel, o.params.gamma_hw}},
                  {"complexity", o.params.complexity == ComplexityModel::Log2 ? "log2" : "linear"},
                  {"depth", o.depth},
                  {"execute", o.execute}});
  o.params.validate();
  const auto catalog = parse_catalog(run.read(o.catalog));
  const TaskSpec task = parse_task(run.read(o.task));
  DecomposerStrategy strategy;
  strategy.kind = o.decomposer;
  std::unique_ptr<CommandGenerator> gen;
  if (external) {
    if (o.generator_cmd.empty()) throw ConfigError("--decomposer external needs --generator-cmd");
    gen = std::make_unique<CommandGenerator>(o.generator_cmd);
    strategy.generator = gen.get();
  }
  const auto solutions = plan(task, catalog, o.params, strategy, o.depth);
  ojson doc = plan_to_json(task, solutions);
  if (!o.execute.empty()) {
    const auto& d = solutions.front().decomposition;
    auto streams = nlohmann::json::parse(run.read(o.execute));
    std::map<std::string, CollectedOutput> outputs;
    for (const auto* group : {&d.subtasks, &d.new_needs})
      for (const auto& t : *group)
        if (streams.contains(t.name)) {
          auto out = output_from_json(streams[t.name], t.attributes);
          out.subtask = t.name;
          outputs.emplace(t.name, std::move(out));
        }
    doc["result"] = output_to_json(execute_plan(d, outputs));
  }
  const std::string text = doc.dump(2) + "\n";
  if (o.out.empty())
    std::cout << text;
  else
    run.write(o.out, text);
  run.finish(c.manifest);
}

// ---- extract ----

struct ExtractOpts {
  std::string report, out, lexicon, generator_cmd;
  std::string backend = "mock";
};

void cmd_extract(const ExtractOpts& o, const Common& c) {
  Run run("extract");
  run.set_config({{"report", o.report}, {"backend", o.backend}, {"lexicon", o.lexicon}, {"generator_cmd", o.generator_cmd}});
  const std::string report = run.read(o.report);
  Lexicon lex = o.lexicon.empty() ? Lexicon::defaults() : Lexicon::from_json(nlohmann::json::parse(run.read(o.lexicon)));
  AttackEffectModel model;
  if (o.backend == "external") {
    if (o.generator_cmd.empty()) throw ConfigError("--backend external needs --generator-cmd");
    CommandGenerator gen(o.generator_cmd);
    ExternalBackend backend(gen, lex.vocabulary);
    model = extract_model(report, backend);
  } else {
    MockBackend backend(std::move(lex));
    model = extract_model(report, backend);
  }
  const std::string text = model_to_json(model).dump(2) + "\n";
  if (o.out.empty())
    std::cout << text;
  else
    run.write(o.out, text);
  run.finish(c.manifest);
}

// ---- gen ----

struct GenOpts {
  ScenarioConfig cfg;
  std::string out, labels_out, snapshot;
};

void add_scenario_flags(CLI::App* sub, ScenarioConfig& s) {
  sub->add_option("--benign", s.benign_vertex_count, "Benign vertices (including isolated outliers)")
      ->envname("PROVMON_BENIGN")
      ->capture_default_str();
  sub->add_option("--cluster", s.attack_cluster_size, "Attack cluster size")
      ->envname("PROVMON_CLUSTER")
      ->capture_default_str();
  sub->add_option("--isolated", s.isolated_anomaly_count, "Benign-labeled outliers")
      ->envname("PROVMON_ISOLATED")
      ->capture_default_str();
  sub->add_option("--edge-density", s.edge_density, "Mean actions per background process")
      ->envname("PROVMON_EDGE_DENSITY")
      ->capture_default_str();
}

void cmd_gen(const GenOpts& o, const Common& c) {
  Run run("gen");
  const auto& s = o.cfg;
  run.set_config({{"scenario", to_string(s.scenario)},
                  {"benign", s.benign_vertex_count},
                  {"cluster", s.attack_cluster_size},
                  {"isolated", s.isolated_anomaly_count},
                  {"edge_density", s.edge_density},
                  {"seed", s.seed}},
                 s.seed);
  const Scenario sc = gen_scenario(s);
  run.write(o.out, serialize_events(sc.graph));
  if (!o.labels_out.empty()) run.write(o.labels_out, sc.labels.to_jsonl());
  if (!o.snapshot.empty()) run.write(o.snapshot, serialize_snapshot(sc.graph));
  std::cout << "vertices " << sc.graph.vertex_count() << " edges " << sc.graph.edge_count() << " anomalous "
            << sc.labels.anomalous_count() << "\n";
  run.finish(c.manifest);
}

// Config-file entries yield to PROVMON_* environment variables, so the
// order is flags > environment > file > defaults.
class EnvFirstConfig : public CLI::ConfigTOML {
 public:
  std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
    auto items = CLI::ConfigTOML::from_config(in);
    std::erase_if(items, [](const CLI::ConfigItem& it) {
      std::string env = "PROVMON_" + it.name;
      for (auto& ch : env) ch = ch == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
      return std::getenv(env.c_str()) != nullptr;
    });
    return items;
  }
};

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::Input: return 2;
    case ErrorKind::Config: return 3;
    case ErrorKind::Internal: return 1;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Provenance monitoring toolkit: graph ingestion, anomaly detection, monitoring planning"};
  app.set_config("--config", "", "TOML/INI file with option defaults (sections per subcommand)");
  app.config_formatter(std::make_shared<EnvFirstConfig>());
  app.require_subcommand(1);
  Common common;

  IngestOpts ingest;
  auto* s_ingest = app.add_subcommand("ingest", "Build a graph snapshot from an event stream");
  s_ingest->add_option("--input", ingest.input, "Event stream (JSON lines)")->required()->envname("PROVMON_INPUT");
  s_ingest->add_option("--out", ingest.out, "Snapshot path")->required()->envname("PROVMON_OUT");
  s_ingest->add_flag("--extend-registry", ingest.extend, "Admit unknown edge types")
      ->envname("PROVMON_EXTEND_REGISTRY");
  add_common(s_ingest, common);

  TrainOpts train;
  auto* s_train = app.add_subcommand("train", "Train the type classifier on a benign graph");
  s_train->add_option("--graph", train.graph, "Snapshot or event stream")->required()->envname("PROVMON_GRAPH");
  s_train->add_option("--labels", train.labels, "Labels; anomalous vertices are excluded")->envname("PROVMON_LABELS");
  s_train->add_option("--out", train.out, "Model path")->required()->envname("PROVMON_OUT");
  s_train
      ->add_option_function<std::string>(
          "--scorer", [&](const std::string& s) { train.scorer = *parse_scorer_kind(s); }, "Per-vertex prior")
      ->check(CLI::IsMember({"edge_rarity", "zero"}))
      ->envname("PROVMON_SCORER");
  add_train_flags(s_train, train.cfg);
  add_common(s_train, common);

  DetectOpts det;
  auto* s_detect = app.add_subcommand("detect", "Flag vertices whose predicted type differs from their kind");
  s_detect->add_option("--graph", det.graph, "Snapshot or event stream")->required()->envname("PROVMON_GRAPH");
  s_detect->add_option("--model", det.model, "Model path")->required()->envname("PROVMON_MODEL");
  s_detect->add_option("--out", det.out, "Predictions (JSON lines)")->required()->envname("PROVMON_OUT");
  add_detect_flags(s_detect, det.cfg);
  add_common(s_detect, common);

  EvalOpts ev;
  auto* s_eval = app.add_subcommand("eval", "Score predictions against labels, or run a scenario ablation");
  s_eval->add_option("--predictions", ev.predictions, "Predictions from detect")->envname("PROVMON_PREDICTIONS");
  s_eval->add_option("--labels", ev.labels, "Ground-truth labels")->envname("PROVMON_LABELS");
  s_eval
      ->add_option_function<std::string>(
          "--scenario", [&](const std::string& s) { ev.scenario = parse_scenario_kind(s); },
          "Generate, train and evaluate a synthetic scenario")
      ->check(kScenarioNames)
      ->envname("PROVMON_SCENARIO");
  s_eval->add_option("--out", ev.out, "Metrics JSON path")->envname("PROVMON_OUT");
  s_eval->add_flag("--table", ev.table, "Print an aligned table");
  s_eval->add_option("--seed", ev.scenario_cfg.seed, "Scenario and training seed")
      ->envname("PROVMON_SEED")
      ->capture_default_str();
  s_eval->add_option("--epochs", ev.train.epochs, "Training epochs")->envname("PROVMON_EPOCHS")->capture_default_str();
  add_scenario_flags(s_eval, ev.scenario_cfg);
  add_detect_flags(s_eval, ev.detect);
  add_common(s_eval, common);

  PlanOpts pl;
  auto* s_plan = app.add_subcommand("plan", "Decompose a monitoring task and rank deployments by cost");
  s_plan->add_option("--catalog", pl.catalog, "Capability catalog")->required()->envname("PROVMON_CATALOG");
  s_plan->add_option("--task", pl.task, "Monitoring task")->required()->envname("PROVMON_TASK");
  s_plan
      ->add_option_function<std::string>(
          "--decomposer",
          [&](const std::string& s) {
            pl.decomposer =
                s == "external" ? DecomposerStrategy::Kind::ExternalGenerator : DecomposerStrategy::Kind::RuleBased;
          },
          "Decomposition strategy")
      ->check(CLI::IsMember({"rule", "external"}))
      ->envname("PROVMON_DECOMPOSER");
  s_plan->add_option("--generator-cmd", pl.generator_cmd, "Command answering prompts on stdin")
      ->envname("PROVMON_GENERATOR_CMD");
  s_plan->add_option("--alpha", pl.params.alpha, "Deployment cost weight")->envname("PROVMON_ALPHA")->capture_default_str();
  s_plan
      ->add_option_function<std::string>(
          "--complexity",
          [&](const std::string& s) {
            pl.params.complexity = s == "log2" ? ComplexityModel::Log2 : ComplexityModel::Linear;
          },
          "Integration complexity model")
      ->check(CLI::IsMember({"linear", "log2"}))
      ->envname("PROVMON_COMPLEXITY");
  s_plan->add_option("--depth", pl.depth, "Recursion depth limit")->envname("PROVMON_DEPTH")->capture_default_str();
  s_plan->add_option("--execute", pl.execute, "JSON object of subtask outputs to run the best plan on")
      ->envname("PROVMON_EXECUTE");
  s_plan->add_option("--out", pl.out, "Plan JSON path (default stdout)")->envname("PROVMON_OUT");
  add_common(s_plan, common);

  ExtractOpts ex;
  auto* s_extract = app.add_subcommand("extract", "Build an attack-effect model from a report");
  s_extract->add_option("--report", ex.report, "Report text")->required()->envname("PROVMON_REPORT");
  s_extract->add_option("--backend", ex.backend, "mock or external")
      ->check(CLI::IsMember({"mock", "external"}))
      ->envname("PROVMON_BACKEND")
      ->capture_default_str();
  s_extract->add_option("--lexicon", ex.lexicon, "Lexicon JSON for the mock backend")->envname("PROVMON_LEXICON");
  s_extract->add_option("--generator-cmd", ex.generator_cmd, "Command answering prompts on stdin")
      ->envname("PROVMON_GENERATOR_CMD");
  s_extract->add_option("--out", ex.out, "Model JSON path (default stdout)")->envname("PROVMON_OUT");
  add_common(s_extract, common);

  GenOpts gen;
  auto* s_gen = app.add_subcommand("gen", "Generate a labeled synthetic scenario");
  s_gen
      ->add_option_function<std::string>(
          "--scenario", [&](const std::string& s) { gen.cfg.scenario = *parse_scenario_kind(s); },
          "Scenario template")
      ->check(kScenarioNames)
      ->envname("PROVMON_SCENARIO");
  s_gen->add_option("--seed", gen.cfg.seed, "Random seed")->envname("PROVMON_SEED")->capture_default_str();
  add_scenario_flags(s_gen, gen.cfg);
  s_gen->add_option("--out", gen.out, "Event stream path")->required()->envname("PROVMON_OUT");
  s_gen->add_option("--labels-out", gen.labels_out, "Labels path")->envname("PROVMON_LABELS_OUT");
  s_gen->add_option("--snapshot", gen.snapshot, "Also write a graph snapshot")->envname("PROVMON_SNAPSHOT");
  add_common(s_gen, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 3;
  }

  try {
    if (s_ingest->parsed()) cmd_ingest(ingest, common);
    if (s_train->parsed()) cmd_train(train, common);
    if (s_detect->parsed()) cmd_detect(det, common);
    if (s_eval->parsed()) cmd_eval(ev, common);
    if (s_plan->parsed()) cmd_plan(pl, common);
    if (s_extract->parsed()) cmd_extract(ex, common);
    if (s_gen->parsed()) cmd_gen(gen, common);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: malformed JSON: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
