#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "provmon/capmodel.hpp"
#include "provmon/textgen.hpp"

namespace provmon {

enum class ComplexityModel { Linear, Log2 };

struct CostParams {
  double alpha = 0.2;
  double beta_user = 0.7;
  double beta_kernel = 0.5;
  double beta_hw = 0.3;
  double gamma_user = 10.0;
  double gamma_kernel = 25.0;
  double gamma_hw = 50.0;
  // Linear: C_complex = n. Log2: log2(n) + 1 (0 for n = 0).
  ComplexityModel complexity = ComplexityModel::Linear;

  // Throws ConfigError unless beta_hw < beta_kernel < beta_user and
  // 0 < gamma_user < gamma_kernel < gamma_hw.
  void validate() const;
  double beta(ImplClass c) const;
  double gamma(ImplClass c) const;
};

// How a subtask is served: an existing capability or a new collector.
struct Assignment {
  std::string subtask;
  std::string binding;  // capability name, or "new:<subtask>"
  ImplClass impl_class = ImplClass::Existing;
  double overhead = 0.1;
};

struct DecompositionResult {
  std::string root;
  std::vector<TaskSpec> subtasks;   // S: served by the catalog
  std::vector<TaskSpec> new_needs;  // N: require a new collector
  // P: per decomposed task, the expression combining its children. Leaves
  // name subtasks in S or N, or another key of this map.
  std::map<std::string, IntegrationExpr> integration;
  std::vector<Assignment> assignments;  // one per element of S then N
};

struct Solution {
  DecompositionResult decomposition;
  double score = 0.0;
};

struct DecomposerStrategy {
  enum class Kind { RuleBased, ExternalGenerator };
  Kind kind = Kind::RuleBased;
  int max_attempts = 3;
  TextGenerator* generator = nullptr;  // required for ExternalGenerator
};

struct SubtaskProposal {
  std::vector<TaskSpec> subtasks;
  IntegrationExpr compose;
};

SubtaskProposal generate_subtasks(const TaskSpec& task, std::span<const CapabilityTriple> catalog,
                                  const DecomposerStrategy& strategy);

// Rule-based decomposition only; exposed for tests and the fallback path.
SubtaskProposal rule_based_subtasks(const TaskSpec& task, std::span<const CapabilityTriple> catalog);

// Prompt sent to the external generator and the validator for its reply.
std::string decomposition_prompt(const TaskSpec& task, std::span<const CapabilityTriple> catalog);
// Returns the proposal or a description of why the reply was rejected.
std::optional<SubtaskProposal> parse_generated_decomposition(const std::string& reply, const TaskSpec& task,
                                                             std::span<const CapabilityTriple> catalog,
                                                             std::string* why = nullptr);

DecompositionResult decompose_task(const TaskSpec& task, std::span<const CapabilityTriple> catalog,
                                   const DecomposerStrategy& strategy = {}, int depth_limit = 5,
                                   const CostParams& params = {});

// With a catalog, binds every leaf naming `subtask` to the first matching
// capability (BindingError if none). Without one, binds to "new:<name>".
IntegrationExpr generate_integration_logic(const TaskSpec& subtask, const IntegrationExpr& compose,
                                           std::optional<std::span<const CapabilityTriple>> catalog);

// Assignment for a subtask: first matching capability, or a new collector of
// the implementation class with the lowest deploy+dev cost.
Assignment assign_subtask(const TaskSpec& subtask, std::span<const CapabilityTriple> catalog,
                          const CostParams& params);

double cost_deploy(const Assignment& a, const CostParams& params);
double cost_dev(const Assignment& a, const CostParams& params);
double complexity_cost(std::size_t n, const CostParams& params);
// Throws PreconditionError when assignments do not cover S and N.
double cost_total(const DecompositionResult& d, const CostParams& params);

// Ascending by score; ties keep input order. Throws ArgumentError if empty.
std::vector<Solution> rank_solutions(std::span<const DecompositionResult> candidates, const CostParams& params);

// Candidate set: the rule-based decomposition plus, for the external
// strategy, its validated decomposition when it differs. Ranked.
std::vector<Solution> plan(const TaskSpec& task, std::span<const CapabilityTriple> catalog,
                           const CostParams& params, const DecomposerStrategy& strategy = {},
                           int depth_limit = 5);

// Evaluates P from the root. `outputs` must hold a stream for every subtask
// in S and N; a missing one throws ReferenceError.
CollectedOutput execute_plan(const DecompositionResult& d, const std::map<std::string, CollectedOutput>& outputs);

nlohmann::ordered_json plan_to_json(const TaskSpec& task, std::span<const Solution> solutions);

}  // namespace provmon
