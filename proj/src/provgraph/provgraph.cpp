#include "provmon/provgraph.hpp"

#include <algorithm>
#include <istream>
#include <queue>

#include "json.hpp"
#include "provmon/error.hpp"

namespace provmon {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

std::string_view to_string(EntityKind kind) {
  switch (kind) {
    case EntityKind::Process: return "process";
    case EntityKind::File: return "file";
    case EntityKind::Socket: return "socket";
  }
  return "process";
}

std::optional<EntityKind> parse_entity_kind(std::string_view s) {
  if (s == "process") return EntityKind::Process;
  if (s == "file") return EntityKind::File;
  if (s == "socket") return EntityKind::Socket;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// EdgeTypeRegistry

EdgeTypeRegistry::EdgeTypeRegistry(std::span<const std::string> names) {
  for (const auto& n : names) {
    if (find(n)) throw ConfigError("duplicate edge type in registry: " + n);
    add(n);
  }
}

const std::vector<std::string>& EdgeTypeRegistry::seed_names() {
  static const std::vector<std::string> kSeed = {
      "read",     "write",    "open",     "close",       "creat",   "unlink",
      "link",     "linkat",   "unlinkat", "rmdir",       "mkdir",   "fork",
      "clone",    "execute",  "kill",     "pipe",        "fcntl",   "socket",
      "connect",  "sendto",   "recvfrom", "sendmsg",     "sendmmsg", "recvmsg",
      "recvmmsg", "getpeername", "dup",   "dup2",        "mq_open", "envvar_set"};
  return kSeed;
}

EdgeTypeRegistry EdgeTypeRegistry::with_defaults() { return EdgeTypeRegistry(seed_names()); }

EdgeTypeId EdgeTypeRegistry::add(std::string_view name) {
  if (auto id = find(name)) return *id;
  auto id = static_cast<EdgeTypeId>(names_.size());
  names_.emplace_back(name);
  index_.emplace(std::string(name), id);
  return id;
}

std::optional<EdgeTypeId> EdgeTypeRegistry::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

// ---------------------------------------------------------------------------
// Event parsing

namespace {

Entity parse_entity(const json& j, const std::string& field) {
  if (!j.is_object()) throw ParseError("field '" + field + "' must be an object");
  Entity e;
  auto str_field = [&](const char* key) -> std::string {
    auto it = j.find(key);
    if (it == j.end()) throw ParseError("missing field '" + field + "." + key + "'");
    if (!it->is_string()) throw ParseError("field '" + field + "." + key + "' must be a string");
    return it->get<std::string>();
  };
  e.id = str_field("id");
  if (e.id.empty()) throw ParseError("field '" + field + ".id' must be non-empty");
  std::string kind = str_field("kind");
  auto k = parse_entity_kind(kind);
  if (!k) throw ParseError("field '" + field + ".kind' has unknown kind \"" + kind + "\"");
  e.kind = *k;
  e.name = str_field("name");
  if (auto it = j.find("attrs"); it != j.end()) {
    if (!it->is_object()) throw ParseError("field '" + field + ".attrs' must be an object");
    for (const auto& [key, val] : it->items()) {
      if (val.is_string())
        e.attrs[key] = val.get<std::string>();
      else
        e.attrs[key] = val.dump();
    }
  }
  return e;
}

ojson entity_json(const Entity& e) {
  ojson j;
  j["id"] = e.id;
  j["kind"] = to_string(e.kind);
  j["name"] = e.name;
  if (!e.attrs.empty()) {
    ojson a = ojson::object();
    for (const auto& [k, v] : e.attrs) a[k] = v;
    j["attrs"] = std::move(a);
  }
  return j;
}

}  // namespace

Event parse_event_line(std::string_view line, EdgeTypeRegistry& registry, const ParseOptions& opts) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& ex) {
    throw ParseError(std::string("malformed JSON: ") + ex.what());
  }
  if (!j.is_object()) throw ParseError("record must be a JSON object");

  Event ev;
  auto ts = j.find("ts");
  if (ts == j.end()) throw ParseError("missing field 'ts'");
  if (!ts->is_number_integer()) throw ParseError("field 'ts' must be an integer");
  ev.ts = ts->get<std::int64_t>();
  if (ev.ts < 0) throw ParseError("field 'ts' must be >= 0");

  auto type = j.find("type");
  if (type == j.end()) throw ParseError("missing field 'type'");
  if (!type->is_string()) throw ParseError("field 'type' must be a string");
  const auto tname = type->get<std::string>();
  if (auto id = registry.find(tname)) {
    ev.etype = *id;
  } else if (opts.extend_registry && !tname.empty()) {
    ev.etype = registry.add(tname);
  } else {
    throw ParseError("field 'type': unknown edge type \"" + tname + "\"");
  }

  auto src = j.find("src");
  if (src == j.end()) throw ParseError("missing field 'src'");
  ev.src = parse_entity(*src, "src");
  auto dst = j.find("dst");
  if (dst == j.end()) throw ParseError("missing field 'dst'");
  ev.dst = parse_entity(*dst, "dst");
  return ev;
}

std::string format_event_line(const Event& e, const EdgeTypeRegistry& registry) {
  ojson j;
  j["ts"] = e.ts;
  j["type"] = registry.name(e.etype);
  j["src"] = entity_json(e.src);
  j["dst"] = entity_json(e.dst);
  return j.dump();
}

// ---------------------------------------------------------------------------
// ProvenanceGraph

VertexIndex ProvenanceGraph::add_entity(const Entity& e) {
  if (auto it = index_.find(e.id); it != index_.end()) {
    const auto& existing = vertices_[it->second];
    if (existing.kind != e.kind)
      throw IntegrityError("entity \"" + e.id + "\" seen as " + std::string(to_string(existing.kind)) +
                           " and as " + std::string(to_string(e.kind)));
    return it->second;
  }
  auto v = static_cast<VertexIndex>(vertices_.size());
  vertices_.push_back(e);
  index_.emplace(e.id, v);
  out_.emplace_back();
  in_.emplace_back();
  return v;
}

void ProvenanceGraph::add_event(const Event& e) {
  if (e.etype >= registry_.size()) throw ParseError("edge type index outside registry");
  if (e.ts < 0) throw ParseError("field 'ts' must be >= 0");
  // Validate both kinds before mutating anything.
  for (const Entity* ent : {&e.src, &e.dst}) {
    if (auto it = index_.find(ent->id); it != index_.end() && vertices_[it->second].kind != ent->kind)
      throw IntegrityError("entity \"" + ent->id + "\" seen as " +
                           std::string(to_string(vertices_[it->second].kind)) + " and as " +
                           std::string(to_string(ent->kind)));
  }
  if (e.src.id == e.dst.id && e.src.kind != e.dst.kind)
    throw IntegrityError("entity \"" + e.src.id + "\" has two kinds in one event");
  VertexIndex s = add_entity(e.src);
  VertexIndex d = add_entity(e.dst);
  auto idx = static_cast<std::uint32_t>(edges_.size());
  edges_.push_back(Edge{s, d, e.etype, e.ts});
  out_[s].push_back(idx);
  in_[d].push_back(idx);
}

std::optional<VertexIndex> ProvenanceGraph::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

VertexIndex ProvenanceGraph::index_of(std::string_view id) const {
  auto v = find(id);
  if (!v) throw LookupError("unknown vertex \"" + std::string(id) + "\"");
  return *v;
}

std::vector<VertexIndex> ProvenanceGraph::undirected_neighbors(VertexIndex v) const {
  std::vector<VertexIndex> out;
  out.reserve(out_.at(v).size() + in_.at(v).size());
  for (auto e : out_[v]) out.push_back(edges_[e].dst);
  for (auto e : in_[v]) out.push_back(edges_[e].src);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  std::erase(out, v);
  return out;
}

std::vector<VertexIndex> ProvenanceGraph::neighbors_k(VertexIndex v, int k) const {
  if (v >= vertices_.size()) throw LookupError("vertex index out of range");
  if (k < 1) throw ArgumentError("k must be >= 1");
  std::vector<int> depth(vertices_.size(), -1);
  std::vector<VertexIndex> frontier{v}, found;
  depth[v] = 0;
  for (int hop = 1; hop <= k && !frontier.empty(); ++hop) {
    std::vector<VertexIndex> next;
    for (auto u : frontier) {
      auto visit = [&](VertexIndex w) {
        if (depth[w] < 0) {
          depth[w] = hop;
          next.push_back(w);
          found.push_back(w);
        }
      };
      for (auto e : out_[u]) visit(edges_[e].dst);
      for (auto e : in_[u]) visit(edges_[e].src);
    }
    frontier = std::move(next);
  }
  std::sort(found.begin(), found.end());
  return found;
}

std::vector<std::string> ProvenanceGraph::neighbors_k(std::string_view id, int k) const {
  auto idx = neighbors_k(index_of(id), k);
  std::vector<std::string> ids;
  ids.reserve(idx.size());
  for (auto u : idx) ids.push_back(vertices_[u].id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::vector<std::int64_t> ProvenanceGraph::degree_by_type(VertexIndex v, Direction dir) const {
  if (v >= vertices_.size()) throw LookupError("vertex index out of range");
  std::vector<std::int64_t> counts(registry_.size(), 0);
  const auto& list = dir == Direction::In ? in_[v] : out_[v];
  for (auto e : list) ++counts[edges_[e].etype];
  return counts;
}

std::vector<std::int64_t> ProvenanceGraph::degree_by_type(std::string_view id, Direction dir) const {
  return degree_by_type(index_of(id), dir);
}

ProvenanceGraph ProvenanceGraph::induced(std::span<const VertexIndex> keep) const {
  std::vector<std::int64_t> remap(vertices_.size(), -1);
  std::vector<VertexIndex> sorted(keep.begin(), keep.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  ProvenanceGraph sub(registry_);
  for (auto v : sorted) remap[v] = sub.add_entity(vertices_.at(v));
  for (const auto& e : edges_) {
    if (remap[e.src] < 0 || remap[e.dst] < 0) continue;
    auto s = static_cast<VertexIndex>(remap[e.src]);
    auto d = static_cast<VertexIndex>(remap[e.dst]);
    auto idx = static_cast<std::uint32_t>(sub.edges_.size());
    sub.edges_.push_back(Edge{s, d, e.etype, e.ts});
    sub.out_[s].push_back(idx);
    sub.in_[d].push_back(idx);
  }
  return sub;
}

// ---------------------------------------------------------------------------
// Streams and snapshots

ProvenanceGraph read_event_stream(std::istream& in, const ParseOptions& opts, EdgeTypeRegistry registry) {
  ProvenanceGraph g(std::move(registry));
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      g.add_event(parse_event_line(line, g.registry(), opts));
    } catch (const ParseError& ex) {
      throw ParseError("line " + std::to_string(lineno) + ": " + ex.what());
    } catch (const IntegrityError& ex) {
      throw IntegrityError("line " + std::to_string(lineno) + ": " + ex.what());
    }
  }
  return g;
}

std::string serialize_snapshot(const ProvenanceGraph& g) {
  ojson doc;
  doc["format"] = "provmon-graph";
  doc["version"] = 1;
  doc["registry"] = g.registry().names();
  ojson verts = ojson::array();
  for (const auto& v : g.vertices()) verts.push_back(entity_json(v));
  doc["vertices"] = std::move(verts);
  ojson edges = ojson::array();
  for (const auto& e : g.edges()) edges.push_back(ojson::array({e.src, e.dst, e.etype, e.ts}));
  doc["edges"] = std::move(edges);
  return doc.dump() + "\n";
}

ProvenanceGraph deserialize_snapshot(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& ex) {
    throw ParseError(std::string("graph snapshot: malformed JSON: ") + ex.what());
  }
  try {
    if (doc.value("format", "") != "provmon-graph") throw ParseError("graph snapshot: wrong format tag");
    if (doc.at("version").get<int>() != 1) throw ParseError("graph snapshot: unsupported version");
    auto names = doc.at("registry").get<std::vector<std::string>>();
    ProvenanceGraph g{EdgeTypeRegistry(names)};
    for (const auto& v : doc.at("vertices")) {
      auto e = parse_entity(v, "vertices[]");
      if (g.find(e.id)) throw IntegrityError("graph snapshot: duplicate vertex id " + e.id);
      g.add_entity(e);
    }
    for (const auto& e : doc.at("edges")) {
      auto s = e.at(0).get<VertexIndex>();
      auto d = e.at(1).get<VertexIndex>();
      auto t = e.at(2).get<EdgeTypeId>();
      if (s >= g.vertex_count() || d >= g.vertex_count() || t >= g.registry().size())
        throw ParseError("graph snapshot: edge references out of range");
      Event ev{e.at(3).get<std::int64_t>(), t, g.vertex(s), g.vertex(d)};
      g.add_event(ev);
    }
    return g;
  } catch (const json::exception& ex) {
    throw ParseError(std::string("graph snapshot: ") + ex.what());
  }
}

std::string serialize_events(const ProvenanceGraph& g) {
  std::string out;
  for (const auto& e : g.edges()) {
    Event ev{e.ts, e.etype, g.vertex(e.src), g.vertex(e.dst)};
    out += format_event_line(ev, g.registry());
    out += '\n';
  }
  return out;
}

}  // namespace provmon
