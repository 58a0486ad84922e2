#include "provmon/capmodel.hpp"

#include <algorithm>
#include <array>
#include <sstream>

#include "provmon/error.hpp"

namespace provmon {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {
constexpr std::array<std::string_view, 8> kDTypeNames = {"Int", "Real", "Bool",     "Str",
                                                         "List", "Set", "KeyValue", "TimeSeries"};
constexpr std::array<std::string_view, 4> kImplNames = {"existing", "user", "kernel", "hardware"};
}  // namespace

std::string_view to_string(DType t) { return kDTypeNames.at(static_cast<std::size_t>(t)); }

std::optional<DType> parse_dtype(std::string_view s) {
  for (std::size_t i = 0; i < kDTypeNames.size(); ++i)
    if (kDTypeNames[i] == s) return static_cast<DType>(i);
  return std::nullopt;
}

std::string_view to_string(ImplClass c) { return kImplNames.at(static_cast<std::size_t>(c)); }

std::optional<ImplClass> parse_impl_class(std::string_view s) {
  for (std::size_t i = 0; i < kImplNames.size(); ++i)
    if (kImplNames[i] == s) return static_cast<ImplClass>(i);
  return std::nullopt;
}

double TaskSpec::overhead_for(ImplClass c) const {
  auto it = impl_overhead.find(c);
  return it == impl_overhead.end() ? overhead : it->second;
}

void validate(const CapabilityTriple& c) {
  if (c.entities.empty()) throw ConfigError("capability \"" + c.name + "\": entities must be non-empty");
  if (c.events.empty()) throw ConfigError("capability \"" + c.name + "\": events must be non-empty");
  if (!(c.overhead >= 0.0 && c.overhead <= 1.0))
    throw ConfigError("capability \"" + c.name + "\": overhead must lie in [0,1]");
}

void validate(const TaskSpec& t) {
  if (t.entities.empty()) throw ConfigError("task \"" + t.name + "\": entities must be non-empty");
  if (t.events.empty()) throw ConfigError("task \"" + t.name + "\": events must be non-empty");
  if (!(t.overhead >= 0.0 && t.overhead <= 1.0))
    throw ConfigError("task \"" + t.name + "\": overhead must lie in [0,1]");
  for (const auto& [impl, o] : t.impl_overhead)
    if (!(o >= 0.0 && o <= 1.0)) throw ConfigError("task \"" + t.name + "\": impl overhead must lie in [0,1]");
}

bool matches(const TaskSpec& task, const CapabilityTriple& cap) {
  return std::includes(cap.entities.begin(), cap.entities.end(), task.entities.begin(), task.entities.end()) &&
         std::includes(cap.attributes.begin(), cap.attributes.end(), task.attributes.begin(),
                       task.attributes.end()) &&
         std::includes(cap.events.begin(), cap.events.end(), task.events.begin(), task.events.end());
}

int mu(const TaskSpec& task, std::span<const CapabilityTriple> catalog) {
  return std::any_of(catalog.begin(), catalog.end(), [&](const auto& c) { return matches(task, c); }) ? 1 : 0;
}

// ---------------------------------------------------------------------------
// Values

ojson value_to_json(const Value& v) {
  return std::visit(
      [](const auto& x) -> ojson {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, TimeSeriesValue>) {
          ojson arr = ojson::array();
          for (const auto& [t, y] : x) arr.push_back(ojson::array({t, y}));
          return arr;
        } else {
          return ojson(x);
        }
      },
      v);
}

Value value_from_json(const json& j, DType dtype) {
  try {
    switch (dtype) {
      case DType::Int:
        if (!j.is_number_integer()) break;
        return j.get<std::int64_t>();
      case DType::Real:
        if (!j.is_number()) break;
        return j.get<double>();
      case DType::Bool:
        if (!j.is_boolean()) break;
        return j.get<bool>();
      case DType::Str:
        if (!j.is_string()) break;
        return j.get<std::string>();
      case DType::List:
        return j.get<ListValue>();
      case DType::Set:
        return j.get<SetValue>();
      case DType::KeyValue:
        return j.get<KeyValueValue>();
      case DType::TimeSeries: {
        TimeSeriesValue ts;
        for (const auto& p : j) ts.emplace_back(p.at(0).get<std::int64_t>(), p.at(1).get<double>());
        return ts;
      }
    }
  } catch (const json::exception&) {
  }
  throw TypeError("value " + j.dump() + " is not of dtype " + std::string(to_string(dtype)));
}

void validate_output(const CollectedOutput& out, const std::set<AttributeSpec>& schema) {
  for (std::size_t i = 0; i < out.records.size(); ++i) {
    const auto& rec = out.records[i];
    for (const auto& a : schema) {
      auto it = rec.find(a.name);
      if (it == rec.end())
        throw TypeError(out.subtask + " record " + std::to_string(i) + ": missing attribute '" + a.name + "'");
      if (dtype_of(it->second) != a.dtype)
        throw TypeError(out.subtask + " record " + std::to_string(i) + ": attribute '" + a.name + "' is " +
                        std::string(to_string(dtype_of(it->second))) + ", declared " +
                        std::string(to_string(a.dtype)));
    }
    if (rec.size() != schema.size()) {
      for (const auto& [k, v] : rec) {
        bool declared = std::any_of(schema.begin(), schema.end(), [&](const auto& a) { return a.name == k; });
        if (!declared)
          throw TypeError(out.subtask + " record " + std::to_string(i) + ": undeclared attribute '" + k + "'");
      }
    }
  }
}

ojson output_to_json(const CollectedOutput& out) {
  ojson j;
  j["subtask"] = out.subtask;
  ojson recs = ojson::array();
  for (const auto& r : out.records) {
    ojson o = ojson::object();
    for (const auto& [k, v] : r) o[k] = value_to_json(v);
    recs.push_back(std::move(o));
  }
  j["records"] = std::move(recs);
  return j;
}

CollectedOutput output_from_json(const json& j, const std::set<AttributeSpec>& schema) {
  CollectedOutput out;
  out.subtask = j.value("subtask", "");
  for (const auto& r : j.at("records")) {
    Record rec;
    for (const auto& [k, v] : r.items()) {
      auto it = std::find_if(schema.begin(), schema.end(), [&](const auto& a) { return a.name == k; });
      if (it == schema.end()) throw TypeError(out.subtask + ": undeclared attribute '" + k + "'");
      rec.emplace(k, value_from_json(v, it->dtype));
    }
    out.records.push_back(std::move(rec));
  }
  validate_output(out, schema);
  return out;
}

// ---------------------------------------------------------------------------
// Catalog and task documents

namespace {

std::set<std::string> string_set(const json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + " must be an array of strings");
  std::set<std::string> s;
  for (const auto& x : j) {
    if (!x.is_string()) throw ConfigError(where + " must be an array of strings");
    if (!s.insert(x.get<std::string>()).second)
      throw ConfigError(where + ": duplicate entry \"" + x.get<std::string>() + "\"");
  }
  return s;
}

std::set<AttributeSpec> attribute_set(const json& j, const std::string& where) {
  std::set<AttributeSpec> s;
  if (j.is_null()) return s;
  if (!j.is_array()) throw ConfigError(where + " must be an array");
  for (const auto& a : j) {
    if (!a.is_object() || !a.contains("name") || !a.contains("dtype"))
      throw ConfigError(where + ": each attribute needs name and dtype");
    auto dt = parse_dtype(a.at("dtype").get<std::string>());
    if (!dt) throw ConfigError(where + ": unknown dtype \"" + a.at("dtype").get<std::string>() + "\"");
    if (!s.insert(AttributeSpec{a.at("name").get<std::string>(), *dt}).second)
      throw ConfigError(where + ": duplicate attribute \"" + a.at("name").get<std::string>() + "\"");
  }
  return s;
}

ojson attrs_json(const std::set<AttributeSpec>& attrs) {
  ojson arr = ojson::array();
  for (const auto& a : attrs) arr.push_back(ojson{{"name", a.name}, {"dtype", to_string(a.dtype)}});
  return arr;
}

}  // namespace

CapabilityTriple capability_from_json(const json& j) {
  try {
    CapabilityTriple c;
    c.name = j.at("name").get<std::string>();
    const std::string where = "capability \"" + c.name + "\"";
    c.entities = string_set(j.at("entities"), where + " entities");
    c.attributes = attribute_set(j.value("attributes", json()), where + " attributes");
    c.events = string_set(j.at("events"), where + " events");
    auto impl = j.value("impl_class", std::string("existing"));
    auto ic = parse_impl_class(impl);
    if (!ic) throw ConfigError(where + ": unknown impl_class \"" + impl + "\"");
    c.impl_class = *ic;
    c.overhead = j.value("overhead", 0.1);
    validate(c);
    return c;
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("capability: ") + ex.what());
  }
}

TaskSpec task_from_json(const json& j) {
  try {
    TaskSpec t;
    t.name = j.at("name").get<std::string>();
    const std::string where = "task \"" + t.name + "\"";
    t.entities = string_set(j.at("entities"), where + " entities");
    t.attributes = attribute_set(j.value("attributes", json()), where + " attributes");
    t.events = string_set(j.at("events"), where + " events");
    t.overhead = j.value("overhead", 0.1);
    if (auto it = j.find("impl_overhead"); it != j.end()) {
      for (const auto& [k, v] : it->items()) {
        auto ic = parse_impl_class(k);
        if (!ic || *ic == ImplClass::Existing) throw ConfigError(where + ": bad impl_overhead key \"" + k + "\"");
        t.impl_overhead[*ic] = v.get<double>();
      }
    }
    validate(t);
    return t;
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("task: ") + ex.what());
  }
}

ojson capability_to_json(const CapabilityTriple& c) {
  ojson j;
  j["name"] = c.name;
  j["entities"] = c.entities;
  j["attributes"] = attrs_json(c.attributes);
  j["events"] = c.events;
  j["impl_class"] = to_string(c.impl_class);
  j["overhead"] = c.overhead;
  return j;
}

ojson task_to_json(const TaskSpec& t) {
  ojson j;
  j["name"] = t.name;
  j["entities"] = t.entities;
  j["attributes"] = attrs_json(t.attributes);
  j["events"] = t.events;
  return j;
}

std::vector<CapabilityTriple> parse_catalog(std::string_view text) {
  std::vector<CapabilityTriple> out;
  auto from_array = [&](const json& arr) {
    for (const auto& c : arr) out.push_back(capability_from_json(c));
  };
  json doc = json::parse(text, nullptr, false);
  if (!doc.is_discarded()) {
    if (doc.is_array()) {
      from_array(doc);
    } else if (doc.is_object() && doc.contains("catalog")) {
      from_array(doc.at("catalog"));
    } else if (doc.is_object()) {
      out.push_back(capability_from_json(doc));
    } else {
      throw ConfigError("catalog must be an array or an object with a \"catalog\" array");
    }
  } else {
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
      ++n;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      json j = json::parse(line, nullptr, false);
      if (j.is_discarded()) throw ConfigError("catalog line " + std::to_string(n) + ": malformed JSON");
      out.push_back(capability_from_json(j));
    }
  }
  std::set<std::string> names;
  for (const auto& c : out)
    if (!names.insert(c.name).second) throw ConfigError("catalog: duplicate capability \"" + c.name + "\"");
  return out;
}

TaskSpec parse_task(std::string_view text) {
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded()) throw ConfigError("task: malformed JSON");
  if (doc.is_object() && doc.contains("task")) return task_from_json(doc.at("task"));
  return task_from_json(doc);
}

}  // namespace provmon
