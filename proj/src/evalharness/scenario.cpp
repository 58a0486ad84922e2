#include <algorithm>
#include <array>
#include <cmath>

#include "provmon/error.hpp"
#include "provmon/evalharness.hpp"
#include "provmon/rng.hpp"

namespace provmon {

std::string_view to_string(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::Generic: return "generic";
    case ScenarioKind::Log4jEnv: return "log4j_env";
    case ScenarioKind::OpenSmtpd: return "opensmtpd";
  }
  return "?";
}

std::optional<ScenarioKind> parse_scenario_kind(std::string_view s) {
  if (s == "generic") return ScenarioKind::Generic;
  if (s == "log4j_env") return ScenarioKind::Log4jEnv;
  if (s == "opensmtpd") return ScenarioKind::OpenSmtpd;
  return std::nullopt;
}

void ScenarioConfig::validate() const {
  if (benign_vertex_count < 3) throw ConfigError("benign_vertex_count must be at least 3");
  if (attack_cluster_size >= benign_vertex_count)
    throw ConfigError("attack_cluster_size must be smaller than benign_vertex_count");
  if (isolated_anomaly_count > benign_vertex_count / 4)
    throw ConfigError("isolated_anomaly_count may be at most a quarter of the benign vertices");
  if (!(edge_density > 0)) throw ConfigError("edge_density must be positive");
}

// Generation outline. Every vertex has a behavior role (the kind whose edge
// pattern it shows) and an actual kind. Background vertices behave like
// their kind; isolated outliers and attack-cluster members behave like a
// different kind. Edges are drawn from the roles:
//   process -> process: fork/clone (parent to child), envvar_set
//   process -> file:    read, write, open, close, execute
//   process -> socket:  connect, sendto, recvfrom
// The cluster is wired densely among its own members with a handful of
// bridge edges into low-degree background vertices.
namespace {

class Builder {
 public:
  Builder(Rng& rng) : rng_(rng), g_(EdgeTypeRegistry::with_defaults()) {}

  VertexIndex vertex(EntityKind actual, EntityKind role, std::string name) {
    static constexpr std::array<const char*, 3> prefix = {"proc-", "file-", "sock-"};
    Entity e;
    e.id = prefix[static_cast<int>(actual)] + std::to_string(g_.vertex_count());
    e.kind = actual;
    e.name = std::move(name);
    roles_.push_back(role);
    return g_.add_entity(e);
  }

  void edge(VertexIndex src, VertexIndex dst, std::string_view type) {
    Event ev;
    ev.ts = ++ts_;
    ev.etype = *g_.registry().find(type);
    ev.src = g_.vertex(src);
    ev.dst = g_.vertex(dst);
    g_.add_event(ev);
  }

  // An edge type fitting the role of the target.
  std::string_view edge_type_for(EntityKind target_role) {
    static constexpr std::array<const char*, 5> file_ops = {"read", "write", "open", "close", "read"};
    static constexpr std::array<const char*, 3> sock_ops = {"connect", "sendto", "recvfrom"};
    switch (target_role) {
      case EntityKind::File:
        return rng_.bernoulli(0.05) ? "execute" : file_ops[rng_.below(file_ops.size())];
      case EntityKind::Socket:
        return sock_ops[rng_.below(sock_ops.size())];
      case EntityKind::Process:
        return rng_.bernoulli(0.3) ? "clone" : "fork";
    }
    return "read";
  }

  EntityKind role(VertexIndex v) const { return roles_[v]; }
  ProvenanceGraph& graph() { return g_; }

 private:
  Rng& rng_;
  ProvenanceGraph g_;
  std::vector<EntityKind> roles_;
  std::int64_t ts_ = 0;
};

EntityKind other_kind(EntityKind k, Rng& rng) {
  const int shift = 1 + static_cast<int>(rng.below(2));
  return static_cast<EntityKind>((static_cast<int>(k) + shift) % 3);
}

const char* const kProcNames[] = {"/usr/bin/bash", "/usr/sbin/sshd", "/usr/bin/python3", "/usr/sbin/cron",
                                  "/usr/bin/java", "/usr/sbin/nginx", "/usr/bin/vim", "/usr/bin/git"};
const char* const kFileNames[] = {"/etc/passwd", "/var/log/syslog", "/tmp/cache", "/home/user/notes.txt",
                                  "/usr/lib/libc.so.6", "/etc/hosts", "/var/lib/db", "/opt/app/config.yml"};

std::string name_for(EntityKind role, std::size_t i) {
  switch (role) {
    case EntityKind::Process: return kProcNames[i % std::size(kProcNames)];
    case EntityKind::File: return std::string(kFileNames[i % std::size(kFileNames)]) + "." + std::to_string(i);
    case EntityKind::Socket: return "10.0." + std::to_string(i / 250 % 250) + "." + std::to_string(i % 250) + ":443";
  }
  return "";
}

}  // namespace

Scenario gen_scenario(const ScenarioConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  Builder b(rng);
  const std::size_t n = cfg.benign_vertex_count;

  // Background roles: a quarter processes, 15% sockets, the rest files.
  const std::size_t procs = std::max<std::size_t>(1, n / 4);
  const std::size_t socks = std::max<std::size_t>(1, n * 15 / 100);
  std::vector<EntityKind> roles(n, EntityKind::File);
  for (std::size_t i = 0; i < procs; ++i) roles[i] = EntityKind::Process;
  for (std::size_t i = procs; i < procs + socks && i < n; ++i) roles[i] = EntityKind::Socket;
  rng.shuffle(roles);

  // Isolated outliers keep their role but get a different actual kind.
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(order);
  std::vector<char> outlier(n, 0);
  for (std::size_t i = 0; i < cfg.isolated_anomaly_count; ++i) outlier[order[i]] = 1;

  Scenario sc;
  std::vector<VertexIndex> by_role[3];
  for (std::size_t i = 0; i < n; ++i) {
    const EntityKind actual = outlier[i] ? other_kind(roles[i], rng) : roles[i];
    auto v = b.vertex(actual, roles[i], name_for(roles[i], i));
    by_role[static_cast<int>(roles[i])].push_back(v);
    if (outlier[i]) sc.isolated.push_back(b.graph().vertex(v).id);
  }
  auto& bp = by_role[0];
  auto& bf = by_role[1];
  auto& bs = by_role[2];

  // Process tree, then per-process activity.
  for (std::size_t i = 1; i < bp.size(); ++i)
    b.edge(bp[rng.below(i)], bp[i], b.edge_type_for(EntityKind::Process));
  std::vector<std::size_t> in_degree(b.graph().vertex_count(), 0);
  const auto max_actions = static_cast<std::uint64_t>(std::max(1.0, std::round(2 * cfg.edge_density)));
  for (auto p : bp) {
    const auto actions = 1 + rng.below(max_actions);
    for (std::uint64_t a = 0; a < actions; ++a) {
      const bool to_socket = !bs.empty() && (bf.empty() || rng.bernoulli(0.3));
      const auto& pool = to_socket ? bs : bf;
      if (pool.empty()) continue;
      const auto t = pool[rng.below(pool.size())];
      b.edge(p, t, b.edge_type_for(b.role(t)));
      ++in_degree[t];
    }
    if (cfg.scenario == ScenarioKind::Log4jEnv && bp.size() > 1 && rng.bernoulli(0.1)) {
      const auto child = bp[rng.below(bp.size())];
      if (child != p) b.edge(p, child, "envvar_set");
    }
  }
  for (const auto* pool : {&bf, &bs})
    for (auto t : *pool)
      if (in_degree[t] == 0) {
        b.edge(bp[rng.below(bp.size())], t, b.edge_type_for(b.role(t)));
        ++in_degree[t];
      }

  // Attack cluster: roughly half act as processes and drive the rest.
  const std::size_t m = cfg.attack_cluster_size;
  std::vector<VertexIndex> cluster;
  std::vector<VertexIndex> actors, targets;
  for (std::size_t i = 0; i < m; ++i) {
    EntityKind role = i % 2 == 0 ? EntityKind::Process : (i % 4 == 1 ? EntityKind::File : EntityKind::Socket);
    if (m == 1) role = EntityKind::Process;
    const EntityKind actual = other_kind(role, rng);
    auto v = b.vertex(actual, role, name_for(role, n + i));
    cluster.push_back(v);
    (role == EntityKind::Process ? actors : targets).push_back(v);
  }
  auto link = [&](VertexIndex s, VertexIndex t) { b.edge(s, t, b.edge_type_for(b.role(t))); };
  if (!actors.empty()) {
    for (std::size_t i = 1; i < actors.size(); ++i) link(actors[rng.below(i)], actors[i]);
    // Every target is touched by at least two actors (or twice by the only one).
    for (auto t : targets)
      for (int r = 0; r < 2; ++r) link(actors[rng.below(actors.size())], t);
    for (auto s : actors)
      for (auto t : cluster)
        if (s != t && rng.bernoulli(0.15)) link(s, t);
    if (actors.size() == 1 && targets.empty()) {
      // A lone member still gets two edges, to itself as a process.
      link(actors[0], actors[0]);
      link(actors[0], actors[0]);
    }
  }
  switch (cfg.scenario) {
    case ScenarioKind::Log4jEnv:
      // Environment tampering among the attacker's processes, then a reverse
      // shell: the shell connects out and relays data over the socket.
      for (std::size_t i = 0; i + 1 < actors.size() && i < 6; ++i) b.edge(actors[i], actors[i + 1], "envvar_set");
      for (auto t : targets)
        if (b.role(t) == EntityKind::Socket && actors.size() >= 2) {
          b.edge(actors[0], t, "connect");
          b.edge(actors[1], t, "sendto");
          b.edge(actors[1], t, "recvfrom");
          break;
        }
      break;
    case ScenarioKind::OpenSmtpd:
      // The mail daemon fetches a script over the network, writes it and runs it.
      for (auto s : targets)
        if (b.role(s) == EntityKind::Socket && actors.size() >= 2)
          for (auto f : targets)
            if (b.role(f) == EntityKind::File) {
              b.edge(actors[0], s, "recvfrom");
              b.edge(actors[0], f, "write");
              b.edge(actors[0], actors[1], "fork");
              b.edge(actors[1], f, "execute");
              goto chain_done;
            }
    chain_done:
      break;
    case ScenarioKind::Generic:
      break;
  }
  // A few bridges into low-degree background vertices.
  const std::size_t bridges = m == 0 ? 0 : std::max<std::size_t>(1, m / 8);
  for (std::size_t i = 0; i < bridges && !actors.empty(); ++i) {
    const auto& pool = rng.bernoulli(0.5) || bs.empty() ? bf : bs;
    if (pool.empty()) continue;
    VertexIndex best = pool[rng.below(pool.size())];
    for (int tries = 0; tries < 4; ++tries) {
      auto c = pool[rng.below(pool.size())];
      if (b.graph().in_edges(c).size() + b.graph().out_edges(c).size() <
          b.graph().in_edges(best).size() + b.graph().out_edges(best).size())
        best = c;
    }
    link(actors[rng.below(actors.size())], best);
  }

  sc.graph = std::move(b.graph());
  for (const auto& e : sc.graph.vertices()) sc.labels.labels[e.id] = Label::Benign;
  for (auto v : cluster) {
    sc.cluster.push_back(sc.graph.vertex(v).id);
    sc.labels.labels[sc.graph.vertex(v).id] = Label::Anomalous;
  }
  return sc;
}

}  // namespace provmon
