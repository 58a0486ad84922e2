#include "provmon/extraction.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "provmon/error.hpp"

namespace provmon {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::string_view trim(std::string_view s) {
  const char* ws = " \t\r\n";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

std::string_view strip_determiner(std::string_view s) {
  for (std::string_view det : {"the ", "a ", "an "}) {
    if (s.size() > det.size() && lower(s.substr(0, det.size())) == det) return trim(s.substr(det.size()));
  }
  return s;
}

struct Sentence {
  std::size_t begin;
  std::size_t end;
};

// Ends at '.', '!' or '?' followed by whitespace or end of text, or at a
// newline. Dots inside tokens (IP addresses, file names) do not split.
std::vector<Sentence> split_sentences(std::string_view text) {
  std::vector<Sentence> out;
  std::size_t start = 0;
  auto flush = [&](std::size_t end) {
    auto piece = text.substr(start, end - start);
    auto lead = piece.find_first_not_of(" \t\r\n");
    if (lead != std::string_view::npos) {
      auto tail = piece.find_last_not_of(" \t\r\n");
      out.push_back({start + lead, start + tail + 1});
    }
    start = end;
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (c == '\n') {
      flush(i);
      start = i + 1;
    } else if ((c == '.' || c == '!' || c == '?') &&
               (i + 1 == text.size() || std::isspace(static_cast<unsigned char>(text[i + 1])))) {
      flush(i + 1);
    }
  }
  if (start < text.size()) flush(text.size());
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Mock backend

std::vector<AttackStep> MockBackend::extract_steps(std::string_view report) {
  std::vector<AttackStep> steps;
  for (const auto& s : split_sentences(report)) {
    std::string_view sentence = report.substr(s.begin, s.end - s.begin);
    const std::string low = lower(sentence);

    const Lexicon::VerbRule* best = nullptr;
    std::size_t best_pos = std::string::npos;
    for (const auto& rule : lex_.verbs) {
      for (auto pos = low.find(rule.phrase); pos != std::string::npos; pos = low.find(rule.phrase, pos + 1)) {
        auto end = pos + rule.phrase.size();
        bool bounded = (pos == 0 || !is_word_char(low[pos - 1])) && (end == low.size() || !is_word_char(low[end]));
        if (!bounded) continue;
        if (!best || rule.phrase.size() > best->phrase.size() ||
            (rule.phrase.size() == best->phrase.size() && pos < best_pos)) {
          best = &rule;
          best_pos = pos;
        }
        break;
      }
    }
    if (!best) continue;

    std::string_view actor = sentence.substr(0, best_pos);
    for (std::string_view cut : {", using ", " using ", " with ", ","}) {
      auto p = lower(actor).find(cut);
      if (p != std::string::npos) actor = actor.substr(0, p);
    }
    actor = strip_determiner(trim(actor));

    std::string_view target = sentence.substr(best_pos + best->phrase.size());
    target = trim(target);
    while (!target.empty() && std::string_view(".!?;:").find(target.back()) != std::string_view::npos)
      target.remove_suffix(1);
    target = strip_determiner(trim(target));

    if (actor.empty() || target.empty()) continue;
    steps.push_back(AttackStep{std::string(actor), best->action, std::string(target), s.begin, s.end});
  }
  return steps;
}

std::vector<StepEffect> MockBackend::identify_effects(const std::vector<AttackStep>& steps) {
  std::vector<StepEffect> out;
  out.reserve(steps.size());
  for (const auto& st : steps) {
    std::string label(kUnknownEffect);
    const auto tgt = lower(st.target);
    auto ov = std::find_if(lex_.target_overrides.begin(), lex_.target_overrides.end(),
                           [&](const auto& r) { return tgt.find(r.keyword) != std::string::npos; });
    if (ov != lex_.target_overrides.end()) {
      label = ov->effect;
    } else {
      auto it = std::find_if(lex_.effects.begin(), lex_.effects.end(),
                             [&](const auto& p) { return p.first == st.action; });
      if (it != lex_.effects.end()) label = it->second;
    }
    out.push_back(StepEffect{st, AttackEffect{label}});
  }
  return out;
}

std::vector<MonitoringItem> MockBackend::generate_items(const std::vector<StepEffect>& pairs) {
  std::vector<MonitoringItem> items;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& label = pairs[i].effect.label;
    auto rule = std::find_if(lex_.items.begin(), lex_.items.end(), [&](const auto& r) { return r.effect == label; });
    std::string name = rule != lex_.items.end() ? rule->name : "manual review";
    std::string desc = rule != lex_.items.end() ? rule->description : "No monitoring rule for effect " + label + ".";
    auto existing = std::find_if(items.begin(), items.end(), [&](const auto& m) { return m.name == name; });
    if (existing != items.end()) {
      existing->derived_from.push_back(i);
    } else {
      items.push_back(MonitoringItem{name, desc, {i}});
    }
  }
  return items;
}

// ---------------------------------------------------------------------------
// Reply schemas

std::vector<std::string> validate_steps_reply(const json& j) {
  std::vector<std::string> bad;
  if (!j.is_object() || !j.contains("steps") || !j["steps"].is_array()) return {"steps"};
  if (j["steps"].empty()) return {"steps"};
  for (std::size_t i = 0; i < j["steps"].size(); ++i) {
    const auto& s = j["steps"][i];
    for (const char* f : {"actor", "action", "target"}) {
      if (!s.is_object() || !s.contains(f) || !s[f].is_string() || trim(s[f].get<std::string>()).empty())
        bad.push_back("steps[" + std::to_string(i) + "]." + f);
    }
  }
  return bad;
}

std::vector<std::string> validate_effects_reply(const json& j, std::size_t expected,
                                                const std::vector<std::string>& vocabulary) {
  if (!j.is_object() || !j.contains("effects") || !j["effects"].is_array() || j["effects"].size() != expected)
    return {"effects"};
  std::vector<std::string> bad;
  for (std::size_t i = 0; i < expected; ++i) {
    const auto& e = j["effects"][i];
    bool ok = e.is_string() && (e.get<std::string>() == kUnknownEffect ||
                                std::find(vocabulary.begin(), vocabulary.end(), e.get<std::string>()) != vocabulary.end());
    if (!ok) bad.push_back("effects[" + std::to_string(i) + "]");
  }
  return bad;
}

std::vector<std::string> validate_items_reply(const json& j, std::size_t pair_count) {
  if (!j.is_object() || !j.contains("items") || !j["items"].is_array() || j["items"].empty()) return {"items"};
  std::vector<std::string> bad;
  std::vector<bool> covered(pair_count, false);
  for (std::size_t i = 0; i < j["items"].size(); ++i) {
    const auto& it = j["items"][i];
    const std::string p = "items[" + std::to_string(i) + "]";
    if (!it.is_object()) {
      bad.push_back(p);
      continue;
    }
    if (!it.contains("name") || !it["name"].is_string() || trim(it["name"].get<std::string>()).empty())
      bad.push_back(p + ".name");
    if (!it.contains("description") || !it["description"].is_string()) bad.push_back(p + ".description");
    if (!it.contains("derived_from") || !it["derived_from"].is_array() || it["derived_from"].empty()) {
      bad.push_back(p + ".derived_from");
      continue;
    }
    for (const auto& d : it["derived_from"]) {
      if (!d.is_number_unsigned() || d.get<std::size_t>() >= pair_count) {
        bad.push_back(p + ".derived_from");
        break;
      }
      covered[d.get<std::size_t>()] = true;
    }
  }
  for (std::size_t k = 0; k < pair_count; ++k)
    if (!covered[k]) bad.push_back("items (step " + std::to_string(k) + " has no item)");
  return bad;
}

// ---------------------------------------------------------------------------
// External backend

namespace {

template <typename Validate>
json ask_validated(TextGenerator& gen, const std::string& prompt, int attempts, const char* stage,
                   Validate&& validate) {
  std::vector<std::string> bad;
  std::string p = prompt;
  for (int a = 0; a < attempts; ++a) {
    json reply = json::parse(gen.complete(p), nullptr, false);
    if (reply.is_discarded()) {
      bad = {"<reply is not JSON>"};
    } else {
      bad = validate(reply);
      if (bad.empty()) return reply;
    }
    std::string list;
    for (const auto& b : bad) list += (list.empty() ? "" : ", ") + b;
    p = prompt + "\nYour previous reply was invalid at: " + list + ". Reply again with valid JSON only.\n";
  }
  std::string list;
  for (const auto& b : bad) list += (list.empty() ? "" : ", ") + b;
  throw ExtractionError(std::string(stage) + ": backend reply rejected after " + std::to_string(attempts) +
                        " attempts; offending fields: " + list);
}

}  // namespace

std::vector<AttackStep> ExternalBackend::extract_steps(std::string_view report) {
  std::string prompt =
      "Step 1 of 3: read the attack report below. Identify each subject-verb-object relation that "
      "describes one attack step and express it as a triple (actor, action, target), in the order the "
      "steps occur. Explain your reasoning briefly, then reply with JSON only: "
      "{\"steps\": [{\"actor\": str, \"action\": str, \"target\": str}]}\n\nReport:\n" +
      std::string(report) + "\n";
  json reply = ask_validated(gen_, prompt, max_attempts_, "extract_steps",
                             [](const json& j) { return validate_steps_reply(j); });
  std::vector<AttackStep> steps;
  for (const auto& s : reply["steps"])
    steps.push_back(AttackStep{s["actor"], s["action"], s["target"], 0, report.size()});
  return steps;
}

std::vector<StepEffect> ExternalBackend::identify_effects(const std::vector<AttackStep>& steps) {
  std::ostringstream p;
  p << "Step 2 of 3: for each (action, target) pair decide the effect it has on the system. Use one label "
       "from this vocabulary, or \"Unknown\": ";
  for (std::size_t i = 0; i < vocabulary_.size(); ++i) p << (i ? ", " : "") << '"' << vocabulary_[i] << '"';
  p << ".\nPairs:\n";
  for (std::size_t i = 0; i < steps.size(); ++i)
    p << i << ": (" << steps[i].action << ", " << steps[i].target << ")\n";
  p << "Reply with JSON only: {\"effects\": [label per pair, same order]}\n";
  json reply = ask_validated(gen_, p.str(), max_attempts_, "identify_effects", [&](const json& j) {
    return validate_effects_reply(j, steps.size(), vocabulary_);
  });
  std::vector<StepEffect> out;
  for (std::size_t i = 0; i < steps.size(); ++i)
    out.push_back(StepEffect{steps[i], AttackEffect{reply["effects"][i].get<std::string>()}});
  return out;
}

std::vector<MonitoringItem> ExternalBackend::generate_items(const std::vector<StepEffect>& pairs) {
  std::ostringstream p;
  p << "Step 3 of 3: for each (action, target, effect) below name the monitoring item a collector must "
       "provide to observe it.\n";
  for (std::size_t i = 0; i < pairs.size(); ++i)
    p << i << ": (" << pairs[i].step.action << ", " << pairs[i].step.target << ", " << pairs[i].effect.label
      << ")\n";
  p << "Reply with JSON only: {\"items\": [{\"name\": str, \"description\": str, \"derived_from\": [indices]}]}\n";
  json reply = ask_validated(gen_, p.str(), max_attempts_, "generate_items",
                             [&](const json& j) { return validate_items_reply(j, pairs.size()); });
  std::vector<MonitoringItem> items;
  for (const auto& it : reply["items"]) {
    auto name = it["name"].get<std::string>();
    auto existing = std::find_if(items.begin(), items.end(), [&](const auto& m) { return m.name == name; });
    auto from = it["derived_from"].get<std::vector<std::size_t>>();
    if (existing != items.end()) {
      existing->derived_from.insert(existing->derived_from.end(), from.begin(), from.end());
    } else {
      items.push_back(MonitoringItem{name, it["description"], from});
    }
  }
  return items;
}

// ---------------------------------------------------------------------------
// Pipeline

std::vector<AttackStep> extract_steps(std::string_view report, ExtractionBackend& backend) {
  if (trim(report).empty()) throw PreconditionError("extract_steps: report is empty");
  return backend.extract_steps(report);
}

std::vector<StepEffect> identify_effects(const std::vector<AttackStep>& steps, ExtractionBackend& backend) {
  if (steps.empty()) throw PreconditionError("identify_effects: no attack steps");
  auto out = backend.identify_effects(steps);
  if (out.size() != steps.size()) throw ExtractionError("identify_effects: one effect per step required");
  return out;
}

std::vector<MonitoringItem> generate_items(const std::vector<StepEffect>& pairs, ExtractionBackend& backend) {
  if (pairs.empty()) throw PreconditionError("generate_items: no step/effect pairs");
  return backend.generate_items(pairs);
}

AttackEffectModel extract_model(std::string_view report, ExtractionBackend& backend) {
  auto steps = extract_steps(report, backend);
  if (steps.empty()) throw ExtractionError("no attack steps recognized in report");
  AttackEffectModel m;
  m.steps = identify_effects(steps, backend);
  m.items = generate_items(m.steps, backend);
  return m;
}

ojson model_to_json(const AttackEffectModel& m) {
  ojson j;
  ojson steps = ojson::array(), effects = ojson::array(), items = ojson::array();
  for (const auto& se : m.steps) {
    steps.push_back({{"actor", se.step.actor}, {"action", se.step.action}, {"target", se.step.target}});
    effects.push_back(se.effect.label);
  }
  for (const auto& it : m.items)
    items.push_back({{"name", it.name}, {"description", it.description}, {"derived_from", it.derived_from}});
  j["steps"] = std::move(steps);
  j["effects"] = std::move(effects);
  j["items"] = std::move(items);
  return j;
}

}  // namespace provmon
