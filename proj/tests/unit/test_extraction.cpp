#include <fstream>
#include <sstream>

#include "doctest.h"
#include "provmon/error.hpp"
#include "provmon/extraction.hpp"

using namespace provmon;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string report() { return slurp(std::string(PROVMON_DATA_DIR) + "/fig3_report.txt"); }

}  // namespace

TEST_SUITE("extraction") {
  TEST_CASE("report fixture yields the two steps") {
    MockBackend mock;
    const auto steps = extract_steps(report(), mock);
    REQUIRE(steps.size() == 2);
    CHECK(steps[0].actor == "threat actors");
    CHECK(steps[0].action == "Network Request");
    CHECK(steps[0].target == "Victim 2’s production environment");
    CHECK(steps[1].actor == "threat actors");
    CHECK(steps[1].action == "Tool Execution");
    CHECK(steps[1].target == "PowerShell");
    const auto text = report();
    CHECK(text.substr(steps[1].span_begin, steps[1].span_end - steps[1].span_begin) ==
          "The threat actors executed PowerShell.");
  }

  TEST_CASE("effects and items for the fixture") {
    MockBackend mock;
    const auto m = extract_model(report(), mock);
    REQUIRE(m.steps.size() == 2);
    CHECK(m.steps[0].effect.label == "Network Request");
    CHECK(m.steps[1].effect.label == "Program Execution");
    REQUIRE(m.items.size() == 2);
    CHECK(m.items[0].name == "Network connection monitoring");
    CHECK(m.items[1].name == "Process creation monitoring");
    CHECK(m.items[1].derived_from == std::vector<std::size_t>{1});
    const auto j = model_to_json(m);
    CHECK(j["effects"][1] == "Program Execution");
  }

  TEST_CASE("longest verb phrase wins and overrides apply first") {
    MockBackend mock;
    const auto steps = extract_steps("The operator escalated privileges to root.", mock);
    REQUIRE(steps.size() == 1);
    CHECK(steps[0].action == "Privilege Escalation");
    CHECK(steps[0].target == "root");
    const auto env = identify_effects(extract_steps("Attackers modified LD_PRELOAD.", mock), mock);
    CHECK(env[0].effect.label == "Environment Variable Modification");
  }

  TEST_CASE("unknown actions map to the unknown effect") {
    Lexicon lex = Lexicon::defaults();
    lex.verbs.push_back({"teleported", "Teleport"});
    MockBackend mock(lex);
    const auto m = extract_model("The actor teleported the payload.", mock);
    CHECK(m.steps[0].effect.label == kUnknownEffect);
    CHECK(m.items[0].name == "manual review");
  }

  TEST_CASE("preconditions") {
    MockBackend mock;
    CHECK_THROWS_AS(extract_steps("  \n", mock), PreconditionError);
    CHECK_THROWS_AS(identify_effects({}, mock), PreconditionError);
    CHECK_THROWS_AS(generate_items({}, mock), PreconditionError);
    CHECK_THROWS_AS(extract_model("Nothing happened here.", mock), ExtractionError);
  }

  TEST_CASE("shipped lexicon matches the defaults") {
    const auto shipped = nlohmann::json::parse(slurp(std::string(PROVMON_DATA_DIR) + "/extraction_lexicon.json"));
    CHECK(nlohmann::json::parse(Lexicon::defaults().to_json().dump()) == shipped);
    const auto lex = Lexicon::from_json(shipped);
    CHECK(lex.verbs.size() == Lexicon::defaults().verbs.size());
    auto broken = shipped;
    broken["effects"][0]["effect"] = "Teleportation";
    CHECK_THROWS_AS(Lexicon::from_json(broken), ConfigError);
  }

  TEST_CASE("external backend validates replies and retries") {
    const std::vector<std::string> vocab = Lexicon::defaults().vocabulary;
    ScriptedGenerator gen({
        "garbage",
        R"({"steps":[{"actor":"threat actors","action":"executed","target":"PowerShell"}]})",
        R"({"effects":["Teleportation"]})",
        R"({"effects":["Program Execution"]})",
        R"({"items":[{"name":"Process creation monitoring","description":"d","derived_from":[0]}]})",
    });
    ExternalBackend ext(gen, vocab);
    const auto m = extract_model("The threat actors executed PowerShell.", ext);
    CHECK(gen.prompts().size() == 5);
    CHECK(gen.prompts()[1].find("invalid") != std::string::npos);
    CHECK(m.steps[0].effect.label == "Program Execution");
    CHECK(m.items[0].name == "Process creation monitoring");
  }

  TEST_CASE("external backend gives up after max attempts") {
    ScriptedGenerator gen({R"({"steps":[{"actor":"","action":"x","target":"y"}]})"});
    ExternalBackend ext(gen, Lexicon::defaults().vocabulary, 3);
    try {
      extract_steps("The actor ran a tool.", ext);
      FAIL("expected ExtractionError");
    } catch (const ExtractionError& e) {
      CHECK(std::string(e.what()).find("steps[0].actor") != std::string::npos);
    }
    CHECK(gen.prompts().size() == 3);
  }

  TEST_CASE("reply validators name offending fields") {
    CHECK(validate_steps_reply(nlohmann::json::parse(R"({"steps":[]})")) == std::vector<std::string>{"steps"});
    CHECK(validate_effects_reply(nlohmann::json::parse(R"({"effects":["A","B"]})"), 1, {"A"}) ==
          std::vector<std::string>{"effects"});
    CHECK(validate_effects_reply(nlohmann::json::parse(R"({"effects":["Unknown"]})"), 1, {"A"}).empty());
    const auto bad = validate_items_reply(
        nlohmann::json::parse(R"({"items":[{"name":"x","description":"d","derived_from":[0]}]})"), 2);
    REQUIRE(bad.size() == 1);
    CHECK(bad[0].find("step 1") != std::string::npos);
  }
}
