#include "provmon/planner.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "provmon/error.hpp"

namespace provmon {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Cost model

void CostParams::validate() const {
  if (!(beta_hw < beta_kernel && beta_kernel < beta_user))
    throw ConfigError("cost params: require beta_hw < beta_kernel < beta_user");
  if (!(0.0 < gamma_user && gamma_user < gamma_kernel && gamma_kernel < gamma_hw))
    throw ConfigError("cost params: require 0 < gamma_user < gamma_kernel < gamma_hw");
  if (!(alpha >= 0.0)) throw ConfigError("cost params: alpha must be >= 0");
}

double CostParams::beta(ImplClass c) const {
  switch (c) {
    case ImplClass::Existing: return alpha;
    case ImplClass::NewUser: return beta_user;
    case ImplClass::NewKernel: return beta_kernel;
    case ImplClass::NewHardware: return beta_hw;
  }
  return alpha;
}

double CostParams::gamma(ImplClass c) const {
  switch (c) {
    case ImplClass::Existing: return 0.0;
    case ImplClass::NewUser: return gamma_user;
    case ImplClass::NewKernel: return gamma_kernel;
    case ImplClass::NewHardware: return gamma_hw;
  }
  return 0.0;
}

double cost_deploy(const Assignment& a, const CostParams& params) { return params.beta(a.impl_class) * a.overhead; }

double cost_dev(const Assignment& a, const CostParams& params) { return params.gamma(a.impl_class); }

double complexity_cost(std::size_t n, const CostParams& params) {
  if (n == 0) return 0.0;
  if (params.complexity == ComplexityModel::Log2) return std::log2(static_cast<double>(n)) + 1.0;
  return static_cast<double>(n);
}

double cost_total(const DecompositionResult& d, const CostParams& params) {
  const std::size_t n = d.subtasks.size() + d.new_needs.size();
  if (d.assignments.size() != n)
    throw PreconditionError("cost_total: " + std::to_string(d.assignments.size()) + " assignments for " +
                            std::to_string(n) + " subtasks");
  double total = 0.0;
  for (const auto& a : d.assignments) total += cost_deploy(a, params) + cost_dev(a, params);
  return total + complexity_cost(n, params);
}

Assignment assign_subtask(const TaskSpec& subtask, std::span<const CapabilityTriple> catalog,
                          const CostParams& params) {
  for (const auto& c : catalog)
    if (matches(subtask, c)) return Assignment{subtask.name, c.name, c.impl_class, c.overhead};
  Assignment best{subtask.name, "new:" + subtask.name, ImplClass::NewUser, subtask.overhead_for(ImplClass::NewUser)};
  double best_cost = cost_deploy(best, params) + cost_dev(best, params);
  for (auto impl : {ImplClass::NewKernel, ImplClass::NewHardware}) {
    Assignment a{subtask.name, best.binding, impl, subtask.overhead_for(impl)};
    double c = cost_deploy(a, params) + cost_dev(a, params);
    if (c < best_cost) {
      best = a;
      best_cost = c;
    }
  }
  return best;
}

std::vector<Solution> rank_solutions(std::span<const DecompositionResult> candidates, const CostParams& params) {
  if (candidates.empty()) throw ArgumentError("rank_solutions: no candidate solutions");
  std::vector<Solution> out;
  out.reserve(candidates.size());
  for (const auto& d : candidates) out.push_back(Solution{d, cost_total(d, params)});
  std::stable_sort(out.begin(), out.end(), [](const Solution& a, const Solution& b) { return a.score < b.score; });
  return out;
}

// ---------------------------------------------------------------------------
// Subtask generation

namespace {

bool is_name_list(const TaskSpec& t) {
  return t.attributes.size() == 1 && t.attributes.begin()->dtype == DType::Str;
}

std::optional<std::string> first_str_attribute(const TaskSpec& t) {
  for (const auto& a : t.attributes)
    if (a.dtype == DType::Str) return a.name;
  return std::nullopt;
}

template <typename T>
std::set<T> intersect(const std::set<T>& a, const std::set<T>& b) {
  std::set<T> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::inserter(out, out.end()));
  return out;
}

template <typename T>
std::size_t count_in(const std::set<T>& xs, const std::set<T>& pool) {
  std::size_t n = 0;
  for (const auto& x : xs) n += pool.count(x);
  return n;
}

// Stream pieces are unioned; each single-Str-attribute piece then filters
// the union by name matching against the first Str attribute.
IntegrationExpr synthesize_integration(const std::vector<TaskSpec>& pieces) {
  std::vector<const TaskSpec*> streams, names;
  for (const auto& p : pieces) (is_name_list(p) ? names : streams).push_back(&p);

  std::optional<std::string> text_field;
  for (const auto* s : streams)
    if ((text_field = first_str_attribute(*s))) break;
  if (streams.empty() || !text_field) {
    streams.clear();
    names.clear();
    for (const auto& p : pieces) streams.push_back(&p);
  }

  IntegrationExpr expr = IntegrationExpr::leaf(streams.front()->name);
  for (std::size_t i = 1; i < streams.size(); ++i)
    expr = IntegrationExpr::apply(Op::Union, {std::move(expr), IntegrationExpr::leaf(streams[i]->name)});
  for (const auto* n : names) {
    expr = IntegrationExpr::apply(Op::NameJoin, {std::move(expr), IntegrationExpr::leaf(n->name)},
                                  {{"text_field", *text_field}, {"name_field", n->attributes.begin()->name}});
  }
  return expr;
}

SubtaskProposal identity(const TaskSpec& task) { return {{task}, IntegrationExpr::leaf(task.name)}; }

}  // namespace

SubtaskProposal rule_based_subtasks(const TaskSpec& task, std::span<const CapabilityTriple> catalog) {
  auto unc_v = task.entities;
  auto unc_o = task.attributes;
  auto unc_t = task.events;
  std::vector<TaskSpec> pieces;

  for (;;) {
    const CapabilityTriple* best = nullptr;
    std::size_t best_gain = 0;
    for (const auto& c : catalog) {
      auto v = intersect(task.entities, c.entities);
      auto t = intersect(task.events, c.events);
      if (v.empty() || t.empty()) continue;
      auto o = intersect(task.attributes, c.attributes);
      std::size_t gain = count_in(v, unc_v) + count_in(o, unc_o) + count_in(t, unc_t);
      if (gain > best_gain) {
        best_gain = gain;
        best = &c;
      }
    }
    if (!best) break;
    TaskSpec p;
    p.name = task.name + "." + best->name;
    p.entities = intersect(task.entities, best->entities);
    p.attributes = intersect(task.attributes, best->attributes);
    p.events = intersect(task.events, best->events);
    p.overhead = task.overhead;
    p.impl_overhead = task.impl_overhead;
    for (const auto& x : p.entities) unc_v.erase(x);
    for (const auto& x : p.attributes) unc_o.erase(x);
    for (const auto& x : p.events) unc_t.erase(x);
    pieces.push_back(std::move(p));
  }
  if (pieces.empty()) return identity(task);

  if (!unc_v.empty() || !unc_o.empty() || !unc_t.empty()) {
    TaskSpec r;
    r.name = task.name + ".residual";
    r.entities = unc_v.empty() ? task.entities : unc_v;
    r.attributes = unc_o;
    r.events = unc_t.empty() ? task.events : unc_t;
    r.overhead = task.overhead;
    r.impl_overhead = task.impl_overhead;
    // No element was split off: the task is atomic for this catalog.
    if (r.same_triple(task)) return identity(task);
    pieces.push_back(std::move(r));
  }
  return {pieces, synthesize_integration(pieces)};
}

std::string decomposition_prompt(const TaskSpec& task, std::span<const CapabilityTriple> catalog) {
  std::ostringstream p;
  p << "You decompose security monitoring tasks into subtasks that existing collectors can serve.\n";
  p << "Available collector capabilities (entities, attributes with dtypes, events):\n";
  for (const auto& c : catalog) p << "- " << capability_to_json(c).dump() << "\n";
  p << "Task to decompose:\n" << task_to_json(task).dump() << "\n";
  p << "Requirements: the union of the subtasks must cover every target entity, every attribute "
       "(name and dtype) and every event of the task, and each subtask must be fully served by one "
       "listed collector.\n";
  p << "Integration operators: and, or, not, in, subset, union, intersect, match, concat, split, "
       "contains, gt, lt, eq, sum, avg, name_join.\n";
  p << "Reply with JSON only: {\"subtasks\": [{\"name\", \"entities\", \"attributes\": [{\"name\", "
       "\"dtype\"}], \"events\"}], \"integration\": {\"op\", \"args\" | \"ref\", \"params\"}}\n";
  return p.str();
}

std::optional<SubtaskProposal> parse_generated_decomposition(const std::string& reply, const TaskSpec& task,
                                                             std::span<const CapabilityTriple> catalog,
                                                             std::string* why) {
  auto reject = [&](std::string reason) -> std::optional<SubtaskProposal> {
    if (why) *why = std::move(reason);
    return std::nullopt;
  };
  json doc = json::parse(reply, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) return reject("reply is not a JSON object");
  if (!doc.contains("subtasks") || !doc["subtasks"].is_array() || doc["subtasks"].empty())
    return reject("missing non-empty 'subtasks' array");
  if (!doc.contains("integration")) return reject("missing 'integration'");

  SubtaskProposal prop;
  std::set<std::string> names;
  try {
    for (const auto& s : doc["subtasks"]) {
      auto t = task_from_json(s);
      t.overhead = task.overhead;
      t.impl_overhead = task.impl_overhead;
      if (!names.insert(t.name).second) return reject("duplicate subtask name '" + t.name + "'");
      prop.subtasks.push_back(std::move(t));
    }
    prop.compose = expr_from_json(doc["integration"]);
  } catch (const Error& ex) {
    return reject(ex.what());
  }
  for (const auto& r : prop.compose.refs())
    if (!names.count(r)) return reject("integration references unknown subtask '" + r + "'");

  std::set<std::string> cov_v, cov_t;
  std::set<AttributeSpec> cov_o;
  for (const auto& t : prop.subtasks) {
    if (!mu(t, catalog)) return reject("subtask '" + t.name + "' is not served by any collector");
    cov_v.insert(t.entities.begin(), t.entities.end());
    cov_o.insert(t.attributes.begin(), t.attributes.end());
    cov_t.insert(t.events.begin(), t.events.end());
  }
  if (!std::includes(cov_v.begin(), cov_v.end(), task.entities.begin(), task.entities.end()))
    return reject("subtasks do not cover the task entities");
  if (!std::includes(cov_o.begin(), cov_o.end(), task.attributes.begin(), task.attributes.end()))
    return reject("subtasks do not cover the task attributes");
  if (!std::includes(cov_t.begin(), cov_t.end(), task.events.begin(), task.events.end()))
    return reject("subtasks do not cover the task events");
  return prop;
}

SubtaskProposal generate_subtasks(const TaskSpec& task, std::span<const CapabilityTriple> catalog,
                                  const DecomposerStrategy& strategy) {
  if (mu(task, catalog)) return identity(task);
  if (strategy.kind == DecomposerStrategy::Kind::ExternalGenerator) {
    if (!strategy.generator) throw ConfigError("external decomposer selected without a generator");
    if (strategy.max_attempts < 1) throw ConfigError("max_attempts must be >= 1");
    std::string prompt = decomposition_prompt(task, catalog);
    for (int attempt = 0; attempt < strategy.max_attempts; ++attempt) {
      std::string why;
      if (auto prop = parse_generated_decomposition(strategy.generator->complete(prompt), task, catalog, &why))
        return *prop;
      prompt += "\nThe previous reply was rejected: " + why + ". Please correct it.\n";
    }
  }
  return rule_based_subtasks(task, catalog);
}

// ---------------------------------------------------------------------------
// Recursive decomposition

namespace {

void bind_leaves(IntegrationExpr& e, const std::string& subtask, const std::string& binding) {
  if (e.op == Op::Ref && e.ref == subtask) e.binding = binding;
  for (auto& c : e.children) bind_leaves(c, subtask, binding);
}

void decompose_into(const TaskSpec& task, std::span<const CapabilityTriple> catalog,
                    const DecomposerStrategy& strategy, int depth, int depth_limit, DecompositionResult& out) {
  auto prop = generate_subtasks(task, catalog, strategy);
  const bool no_progress = prop.subtasks.size() == 1 && prop.subtasks.front().name == task.name;
  IntegrationExpr compose = std::move(prop.compose);

  for (const auto& t : prop.subtasks) {
    if (mu(t, catalog)) {
      out.subtasks.push_back(t);
      compose = generate_integration_logic(t, compose, catalog);
      continue;
    }
    if (!no_progress && depth + 1 < depth_limit) {
      DecompositionResult sub;
      decompose_into(t, catalog, strategy, depth + 1, depth_limit, sub);
      if (!sub.subtasks.empty()) {
        out.subtasks.insert(out.subtasks.end(), sub.subtasks.begin(), sub.subtasks.end());
        out.new_needs.insert(out.new_needs.end(), sub.new_needs.begin(), sub.new_needs.end());
        for (auto& [k, v] : sub.integration) out.integration.insert_or_assign(k, std::move(v));
        continue;
      }
    }
    out.new_needs.push_back(t);
    compose = generate_integration_logic(t, compose, std::nullopt);
  }
  out.integration.insert_or_assign(task.name, std::move(compose));
}

}  // namespace

IntegrationExpr generate_integration_logic(const TaskSpec& subtask, const IntegrationExpr& compose,
                                           std::optional<std::span<const CapabilityTriple>> catalog) {
  std::string binding;
  if (catalog) {
    auto it = std::find_if(catalog->begin(), catalog->end(), [&](const auto& c) { return matches(subtask, c); });
    if (it == catalog->end()) throw BindingError("no capability serves subtask \"" + subtask.name + "\"");
    binding = it->name;
  } else {
    binding = "new:" + subtask.name;
  }
  IntegrationExpr out = compose;
  bind_leaves(out, subtask.name, binding);
  return out;
}

DecompositionResult decompose_task(const TaskSpec& task, std::span<const CapabilityTriple> catalog,
                                   const DecomposerStrategy& strategy, int depth_limit, const CostParams& params) {
  if (depth_limit < 1) throw ArgumentError("depth_limit must be >= 1");
  validate(task);
  DecompositionResult d;
  d.root = task.name;
  decompose_into(task, catalog, strategy, 0, depth_limit, d);
  for (const auto& t : d.subtasks) d.assignments.push_back(assign_subtask(t, catalog, params));
  for (const auto& t : d.new_needs) {
    // N entries are new collectors even when a later catalog entry would match.
    auto a = assign_subtask(t, {}, params);
    d.assignments.push_back(a);
  }
  return d;
}

namespace {

bool same_decomposition(const DecompositionResult& a, const DecompositionResult& b) {
  auto triples_equal = [](const std::vector<TaskSpec>& x, const std::vector<TaskSpec>& y) {
    return x.size() == y.size() &&
           std::equal(x.begin(), x.end(), y.begin(), [](const auto& p, const auto& q) { return p.same_triple(q); });
  };
  return triples_equal(a.subtasks, b.subtasks) && triples_equal(a.new_needs, b.new_needs);
}

}  // namespace

std::vector<Solution> plan(const TaskSpec& task, std::span<const CapabilityTriple> catalog,
                           const CostParams& params, const DecomposerStrategy& strategy, int depth_limit) {
  params.validate();
  std::vector<DecompositionResult> candidates;
  candidates.push_back(decompose_task(task, catalog, DecomposerStrategy{}, depth_limit, params));
  if (strategy.kind == DecomposerStrategy::Kind::ExternalGenerator) {
    auto ext = decompose_task(task, catalog, strategy, depth_limit, params);
    if (!same_decomposition(ext, candidates.front())) candidates.push_back(std::move(ext));
  }
  return rank_solutions(candidates, params);
}

// ---------------------------------------------------------------------------
// Execution

CollectedOutput execute_plan(const DecompositionResult& d, const std::map<std::string, CollectedOutput>& outputs) {
  std::vector<std::string> missing;
  for (const auto* group : {&d.subtasks, &d.new_needs})
    for (const auto& t : *group)
      if (!outputs.count(t.name)) missing.push_back(t.name);
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw ReferenceError("missing output stream for: " + list);
  }
  auto root = d.integration.find(d.root);
  if (root == d.integration.end()) throw ReferenceError("plan has no integration for root \"" + d.root + "\"");

  std::set<std::string> active;
  StreamResolver resolve = [&](const std::string& name) -> CollectedOutput {
    if (auto it = outputs.find(name); it != outputs.end()) return it->second;
    auto p = d.integration.find(name);
    if (p == d.integration.end()) throw ReferenceError("missing output stream \"" + name + "\"");
    if (!active.insert(name).second) throw ReferenceError("cyclic integration through \"" + name + "\"");
    auto out = eval_integration(p->second, resolve);
    active.erase(name);
    return out;
  };
  active.insert(d.root);
  return eval_integration(root->second, resolve);
}

ojson plan_to_json(const TaskSpec& task, std::span<const Solution> solutions) {
  ojson doc;
  doc["task"] = task_to_json(task);
  ojson sols = ojson::array();
  for (const auto& s : solutions) {
    const auto& d = s.decomposition;
    ojson j;
    j["score"] = s.score;
    auto entry = [&](const TaskSpec& t, const Assignment& a) {
      ojson e = task_to_json(t);
      e["assignment"] = a.binding;
      e["impl_class"] = to_string(a.impl_class);
      e["overhead"] = a.overhead;
      return e;
    };
    ojson subs = ojson::array(), news = ojson::array();
    std::size_t k = 0;
    for (const auto& t : d.subtasks) subs.push_back(entry(t, d.assignments.at(k++)));
    for (const auto& t : d.new_needs) news.push_back(entry(t, d.assignments.at(k++)));
    j["subtasks"] = std::move(subs);
    j["new_needs"] = std::move(news);
    j["root"] = d.root;
    ojson integ = ojson::object();
    for (const auto& [name, e] : d.integration) integ[name] = expr_to_json(e);
    j["integration"] = std::move(integ);
    sols.push_back(std::move(j));
  }
  doc["solutions"] = std::move(sols);
  return doc;
}

}  // namespace provmon
