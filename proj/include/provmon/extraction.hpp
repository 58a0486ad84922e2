#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "provmon/textgen.hpp"

namespace provmon {

struct AttackStep {
  std::string actor;
  std::string action;
  std::string target;
  std::size_t span_begin = 0;  // character range of the source sentence
  std::size_t span_end = 0;
  bool operator==(const AttackStep&) const = default;
};

struct AttackEffect {
  std::string label;
  bool operator==(const AttackEffect&) const = default;
};

inline constexpr std::string_view kUnknownEffect = "Unknown";

struct StepEffect {
  AttackStep step;
  AttackEffect effect;
};

struct MonitoringItem {
  std::string name;
  std::string description;
  std::vector<std::size_t> derived_from;  // indices into AttackEffectModel::steps
};

struct AttackEffectModel {
  std::vector<StepEffect> steps;
  std::vector<MonitoringItem> items;
};

// Rule tables for the deterministic backend.
struct Lexicon {
  struct VerbRule {
    std::string phrase;  // lowercase, matched on word boundaries
    std::string action;
  };
  struct TargetRule {
    std::string keyword;  // lowercase substring of the target
    std::string effect;
  };
  struct ItemRule {
    std::string effect;
    std::string name;
    std::string description;
  };
  std::vector<VerbRule> verbs;                             // longest phrase wins
  std::vector<std::pair<std::string, std::string>> effects;  // action -> effect
  std::vector<TargetRule> target_overrides;                // checked before `effects`
  std::vector<ItemRule> items;
  std::vector<std::string> vocabulary;  // admissible effect labels

  static Lexicon defaults();
  static Lexicon from_json(const nlohmann::json& j);
  nlohmann::ordered_json to_json() const;
};

class ExtractionBackend {
 public:
  virtual ~ExtractionBackend() = default;
  virtual std::vector<AttackStep> extract_steps(std::string_view report) = 0;
  virtual std::vector<StepEffect> identify_effects(const std::vector<AttackStep>& steps) = 0;
  virtual std::vector<MonitoringItem> generate_items(const std::vector<StepEffect>& pairs) = 0;
};

// Subject-verb-object templates over the lexicon. Stateless.
class MockBackend final : public ExtractionBackend {
 public:
  explicit MockBackend(Lexicon lexicon = Lexicon::defaults()) : lex_(std::move(lexicon)) {}
  std::vector<AttackStep> extract_steps(std::string_view report) override;
  std::vector<StepEffect> identify_effects(const std::vector<AttackStep>& steps) override;
  std::vector<MonitoringItem> generate_items(const std::vector<StepEffect>& pairs) override;
  const Lexicon& lexicon() const noexcept { return lex_; }

 private:
  Lexicon lex_;
};

// Sends one prompt per step and validates each reply against the output
// schema; retries up to `max_attempts` times, then throws ExtractionError.
class ExternalBackend final : public ExtractionBackend {
 public:
  ExternalBackend(TextGenerator& gen, std::vector<std::string> vocabulary, int max_attempts = 3)
      : gen_(gen), vocabulary_(std::move(vocabulary)), max_attempts_(max_attempts) {}
  std::vector<AttackStep> extract_steps(std::string_view report) override;
  std::vector<StepEffect> identify_effects(const std::vector<AttackStep>& steps) override;
  std::vector<MonitoringItem> generate_items(const std::vector<StepEffect>& pairs) override;

 private:
  TextGenerator& gen_;
  std::vector<std::string> vocabulary_;
  int max_attempts_;
};

// Schema checks shared by the external backend and its tests. Each returns
// the list of offending field paths (empty when valid).
std::vector<std::string> validate_steps_reply(const nlohmann::json& j);
std::vector<std::string> validate_effects_reply(const nlohmann::json& j, std::size_t expected,
                                                const std::vector<std::string>& vocabulary);
std::vector<std::string> validate_items_reply(const nlohmann::json& j, std::size_t pair_count);

std::vector<AttackStep> extract_steps(std::string_view report, ExtractionBackend& backend);
std::vector<StepEffect> identify_effects(const std::vector<AttackStep>& steps, ExtractionBackend& backend);
std::vector<MonitoringItem> generate_items(const std::vector<StepEffect>& pairs, ExtractionBackend& backend);

// Runs the three steps in order.
AttackEffectModel extract_model(std::string_view report, ExtractionBackend& backend);

// {steps:[{actor,action,target}], effects:[...], items:[{name,description,derived_from}]}
nlohmann::ordered_json model_to_json(const AttackEffectModel& m);

}  // namespace provmon
