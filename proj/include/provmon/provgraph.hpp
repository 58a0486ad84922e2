#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace provmon {

enum class EntityKind : std::uint8_t { Process = 0, File = 1, Socket = 2 };

std::string_view to_string(EntityKind kind);
std::optional<EntityKind> parse_entity_kind(std::string_view s);

struct Entity {
  std::string id;
  EntityKind kind = EntityKind::Process;
  std::string name;
  std::map<std::string, std::string> attrs;
};

using EdgeTypeId = std::uint32_t;

// Append-only name <-> dense index table of edge (event) types. Feature
// dimensions derive from its size, so entries are never removed.
class EdgeTypeRegistry {
 public:
  EdgeTypeRegistry() = default;
  explicit EdgeTypeRegistry(std::span<const std::string> names);

  // System-call events from the auditd column of the event taxonomy, in
  // table order, followed by the envvar_set extension.
  static EdgeTypeRegistry with_defaults();
  static const std::vector<std::string>& seed_names();

  // Returns the existing index when already present.
  EdgeTypeId add(std::string_view name);
  std::optional<EdgeTypeId> find(std::string_view name) const;
  const std::string& name(EdgeTypeId id) const { return names_.at(id); }
  std::size_t size() const noexcept { return names_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }

  bool operator==(const EdgeTypeRegistry& other) const { return names_ == other.names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, EdgeTypeId> index_;
};

struct Event {
  std::int64_t ts = 0;
  EdgeTypeId etype = 0;
  Entity src;
  Entity dst;
};

struct ParseOptions {
  // Admit edge-type names missing from the registry by appending them.
  bool extend_registry = false;
};

// Parses one JSON-lines record. Throws ParseError naming the offending field.
Event parse_event_line(std::string_view line, EdgeTypeRegistry& registry,
                       const ParseOptions& opts = {});

// Inverse of parse_event_line; attrs are emitted only when non-empty.
std::string format_event_line(const Event& e, const EdgeTypeRegistry& registry);

using VertexIndex = std::uint32_t;

struct Edge {
  VertexIndex src = 0;
  VertexIndex dst = 0;
  EdgeTypeId etype = 0;
  std::int64_t ts = 0;
};

enum class Direction { In, Out };

class ProvenanceGraph {
 public:
  ProvenanceGraph() : registry_(EdgeTypeRegistry::with_defaults()) {}
  explicit ProvenanceGraph(EdgeTypeRegistry registry) : registry_(std::move(registry)) {}

  // Creates endpoints on first sight and appends a parallel edge for
  // duplicates. Throws IntegrityError when an id reappears with a different
  // kind, ParseError when etype is outside the registry or ts < 0.
  void add_event(const Event& e);

  // Inserts or returns an existing vertex; same kind rule as add_event.
  VertexIndex add_entity(const Entity& e);

  std::size_t vertex_count() const noexcept { return vertices_.size(); }
  std::size_t edge_count() const noexcept { return edges_.size(); }
  const std::vector<Entity>& vertices() const noexcept { return vertices_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  const Entity& vertex(VertexIndex v) const { return vertices_.at(v); }
  const EdgeTypeRegistry& registry() const noexcept { return registry_; }
  EdgeTypeRegistry& registry() noexcept { return registry_; }

  std::optional<VertexIndex> find(std::string_view id) const;
  // Throws LookupError for unknown ids.
  VertexIndex index_of(std::string_view id) const;

  // Edge indices; order is insertion order.
  const std::vector<std::uint32_t>& out_edges(VertexIndex v) const { return out_.at(v); }
  const std::vector<std::uint32_t>& in_edges(VertexIndex v) const { return in_.at(v); }

  // Distinct vertices adjacent to v ignoring direction, excluding v, sorted.
  std::vector<VertexIndex> undirected_neighbors(VertexIndex v) const;

  // All vertices within k undirected hops of v, excluding v itself.
  std::vector<VertexIndex> neighbors_k(VertexIndex v, int k) const;
  std::vector<std::string> neighbors_k(std::string_view id, int k) const;

  // Per-edge-type counts of edges entering (In) or leaving (Out) v.
  std::vector<std::int64_t> degree_by_type(VertexIndex v, Direction dir) const;
  std::vector<std::int64_t> degree_by_type(std::string_view id, Direction dir) const;

  // Subgraph induced on the given vertex ids (edges with both ends kept).
  ProvenanceGraph induced(std::span<const VertexIndex> keep) const;

 private:
  EdgeTypeRegistry registry_;
  std::vector<Entity> vertices_;
  std::unordered_map<std::string, VertexIndex> index_;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::uint32_t>> out_;
  std::vector<std::vector<std::uint32_t>> in_;
};

// Reads a JSON-lines event stream. Throws ParseError with a 1-based line
// number prefix ("line N: ...") on the first bad record. Blank lines skip.
ProvenanceGraph read_event_stream(std::istream& in, const ParseOptions& opts = {},
                                  EdgeTypeRegistry registry = EdgeTypeRegistry::with_defaults());

// Snapshot: one JSON document with registry, vertices and edge list.
std::string serialize_snapshot(const ProvenanceGraph& g);
ProvenanceGraph deserialize_snapshot(std::string_view doc);

// Events in edge order, one JSON object per line.
std::string serialize_events(const ProvenanceGraph& g);

}  // namespace provmon
