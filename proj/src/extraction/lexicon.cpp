#include <algorithm>

#include "provmon/error.hpp"
#include "provmon/extraction.hpp"

namespace provmon {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

Lexicon Lexicon::defaults() {
  Lexicon l;
  l.verbs = {
      {"gained initial access to", "Network Request"},
      {"gained access to", "Network Request"},
      {"connected to", "Network Request"},
      {"beaconed to", "Network Request"},
      {"scanned", "Network Request"},
      {"exfiltrated", "Data Exfiltration"},
      {"downloaded", "File Download"},
      {"executed", "Tool Execution"},
      {"ran", "Tool Execution"},
      {"launched", "Tool Execution"},
      {"invoked", "Tool Execution"},
      {"used", "Tool Execution"},
      {"wrote", "File Write"},
      {"modified", "File Write"},
      {"dropped", "File Write"},
      {"created", "File Write"},
      {"encrypted", "File Write"},
      {"deleted", "File Deletion"},
      {"removed", "File Deletion"},
      {"escalated privileges to", "Privilege Escalation"},
      {"escalated privileges", "Privilege Escalation"},
      {"elevated privileges", "Privilege Escalation"},
      {"set the environment variable", "Environment Modification"},
      {"modified the environment variable", "Environment Modification"},
      {"exported", "Environment Modification"},
  };
  l.effects = {
      {"Network Request", "Network Request"},
      {"Data Exfiltration", "Network Request"},
      {"File Download", "File Modification"},
      {"Tool Execution", "Program Execution"},
      {"File Write", "File Modification"},
      {"File Deletion", "File Modification"},
      {"Privilege Escalation", "Privilege Escalation"},
      {"Environment Modification", "Environment Variable Modification"},
  };
  l.target_overrides = {
      {"ld_preload", "Environment Variable Modification"},
      {"powershell", "Program Execution"},
      {"cmd.exe", "Program Execution"},
  };
  l.items = {
      {"Program Execution", "Process creation monitoring",
       "Record process creation with executable path, command line and parent process."},
      {"File Modification", "File modification monitoring",
       "Record writes, creations and deletions of files with the acting process."},
      {"Network Request", "Network connection monitoring",
       "Record outbound and inbound connections with endpoints and the owning process."},
      {"Privilege Escalation", "Privilege change monitoring",
       "Record user and group identity changes of processes."},
      {"Environment Variable Modification", "Environment variable modification monitoring",
       "Record shell commands that set or export environment variables."},
      {std::string(kUnknownEffect), "manual review",
       "The step could not be mapped to a known effect; an analyst should review it."},
  };
  l.vocabulary = {"Program Execution", "File Modification", "Network Request", "Privilege Escalation",
                  "Environment Variable Modification"};
  return l;
}

Lexicon Lexicon::from_json(const json& j) {
  try {
    Lexicon l;
    for (const auto& v : j.at("verbs")) l.verbs.push_back({v.at("phrase"), v.at("action")});
    for (const auto& e : j.at("effects")) l.effects.emplace_back(e.at("action"), e.at("effect"));
    for (const auto& t : j.value("target_overrides", json::array()))
      l.target_overrides.push_back({t.at("keyword"), t.at("effect")});
    for (const auto& i : j.at("items")) l.items.push_back({i.at("effect"), i.at("name"), i.at("description")});
    l.vocabulary = j.at("vocabulary").get<std::vector<std::string>>();
    auto known = [&](const std::string& e) {
      return e == kUnknownEffect || std::find(l.vocabulary.begin(), l.vocabulary.end(), e) != l.vocabulary.end();
    };
    for (const auto& [a, e] : l.effects)
      if (!known(e)) throw ConfigError("lexicon: effect \"" + e + "\" not in vocabulary");
    for (const auto& t : l.target_overrides)
      if (!known(t.effect)) throw ConfigError("lexicon: effect \"" + t.effect + "\" not in vocabulary");
    for (const auto& v : l.verbs)
      if (v.phrase.empty() || v.action.empty()) throw ConfigError("lexicon: empty verb rule");
    return l;
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("lexicon: ") + ex.what());
  }
}

ojson Lexicon::to_json() const {
  ojson j;
  ojson v = ojson::array(), e = ojson::array(), t = ojson::array(), it = ojson::array();
  for (const auto& r : verbs) v.push_back({{"phrase", r.phrase}, {"action", r.action}});
  for (const auto& [a, x] : effects) e.push_back({{"action", a}, {"effect", x}});
  for (const auto& r : target_overrides) t.push_back({{"keyword", r.keyword}, {"effect", r.effect}});
  for (const auto& r : items) it.push_back({{"effect", r.effect}, {"name", r.name}, {"description", r.description}});
  j["verbs"] = std::move(v);
  j["effects"] = std::move(e);
  j["target_overrides"] = std::move(t);
  j["items"] = std::move(it);
  j["vocabulary"] = vocabulary;
  return j;
}

}  // namespace provmon
