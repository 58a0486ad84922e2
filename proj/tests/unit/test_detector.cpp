#include <cmath>
#include <set>

#include "doctest.h"
#include "oracles.hpp"
#include "provmon/detector.hpp"
#include "provmon/error.hpp"

using namespace provmon;

namespace {

Entity ent(const std::string& id, EntityKind k) { return Entity{id, k, id, {}}; }

void add(ProvenanceGraph& g, const std::string& s, EntityKind sk, const std::string& d, EntityKind dk,
         const std::string& type, std::int64_t ts = 1) {
  Event e;
  e.ts = ts;
  e.etype = g.registry().add(type);
  e.src = ent(s, sk);
  e.dst = ent(d, dk);
  g.add_event(e);
}

// Processes only execute and read files; files are only acted upon.
ProvenanceGraph toy_graph() {
  ProvenanceGraph g;
  for (int p = 0; p < 20; ++p) {
    const auto pid = "p" + std::to_string(p);
    add(g, pid, EntityKind::Process, "f" + std::to_string(p), EntityKind::File, "execute");
    add(g, pid, EntityKind::Process, "f" + std::to_string(20 + p), EntityKind::File, "read");
    add(g, pid, EntityKind::Process, "f" + std::to_string(20 + (p + 1) % 20), EntityKind::File, "read");
  }
  return g;
}

// Star of `leaves` around "c"; leaves have no other edges.
ProvenanceGraph star(int leaves) {
  ProvenanceGraph g;
  g.add_entity(ent("c", EntityKind::Process));
  for (int i = 0; i < leaves; ++i) add(g, "c", EntityKind::Process, "l" + std::to_string(i), EntityKind::File, "read");
  return g;
}

ProvenanceGraph random_graph(std::uint64_t seed, int vertices, int edges) {
  Rng rng(seed);
  ProvenanceGraph g;
  const auto& names = EdgeTypeRegistry::seed_names();
  for (int v = 0; v < vertices; ++v) g.add_entity(ent("v" + std::to_string(v), static_cast<EntityKind>(v % 3)));
  for (int e = 0; e < edges; ++e) {
    auto s = rng.below(vertices), d = rng.below(vertices);
    add(g, "v" + std::to_string(s), static_cast<EntityKind>(s % 3), "v" + std::to_string(d),
        static_cast<EntityKind>(d % 3), names[rng.below(names.size())], e);
  }
  return g;
}

}  // namespace

TEST_SUITE("features") {
  TEST_CASE("raw layout counts in-types, out-types and the score") {
    ProvenanceGraph g(EdgeTypeRegistry(std::vector<std::string>{"read", "write"}));
    add(g, "a", EntityKind::Process, "v", EntityKind::File, "read");
    add(g, "b", EntityKind::Process, "v", EntityKind::File, "read");
    add(g, "c", EntityKind::Process, "v", EntityKind::File, "write");
    add(g, "v", EntityKind::File, "d", EntityKind::File, "write");
    CHECK(embed_vertex(g, "v", AnomalyScorer::zero()) == FeatureVector{2, 1, 0, 1, 0});
  }

  TEST_CASE("isolated vertex embeds to zeros, unknown vertex is a lookup error") {
    ProvenanceGraph g;
    g.add_entity(ent("lonely", EntityKind::Socket));
    auto s = AnomalyScorer::edge_rarity();
    s.fit(g);
    auto h = embed_vertex(g, "lonely", s);
    CHECK(h.size() == 2 * g.registry().size() + 1);
    CHECK(std::all_of(h.begin(), h.end(), [](double x) { return x == 0.0; }));
    CHECK_THROWS_AS(embed_vertex(g, "ghost", s), LookupError);
  }

  TEST_CASE("edge rarity uses the rarest incident type") {
    ProvenanceGraph g;
    for (int i = 0; i < 99; ++i)
      add(g, "p" + std::to_string(i), EntityKind::Process, "f" + std::to_string(i), EntityKind::File, "read");
    add(g, "x", EntityKind::Process, "y", EntityKind::File, "unlink");
    auto s = AnomalyScorer::edge_rarity();
    s.fit(g);
    CHECK(s.score(g, g.index_of("x")) == doctest::Approx(0.99).epsilon(1e-12));
    CHECK(s.score(g, g.index_of("p0")) == doctest::Approx(1.0 - 99.0 / 100.0));
    // Brute force: rarest incident type count over |E|.
    for (VertexIndex v = 0; v < g.vertex_count(); ++v) {
      std::int64_t rarest = 1 << 30;
      for (const auto& e : g.edges())
        if (e.src == v || e.dst == v) {
          std::int64_t cnt = 0;
          for (const auto& f : g.edges()) cnt += f.etype == e.etype;
          rarest = std::min(rarest, cnt);
        }
      CHECK(s.score(g, v) == doctest::Approx(1.0 - rarest / 100.0));
    }
  }

  TEST_CASE("custom scorer output is clamped") {
    ProvenanceGraph g = star(2);
    auto s = AnomalyScorer::custom([](const ProvenanceGraph&, VertexIndex v) { return v == 0 ? 7.0 : -3.0; });
    CHECK(s.score(g, 0) == 1.0);
    CHECK(s.score(g, 1) == 0.0);
  }

  TEST_CASE("raw counts match brute-force edge-list counting") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      auto g = random_graph(seed, 25, 80);
      const auto x = raw_features(g, AnomalyScorer::zero());
      const std::size_t r = g.registry().size();
      for (VertexIndex v = 0; v < g.vertex_count(); ++v)
        for (std::size_t t = 0; t < r; ++t) {
          double in = 0, out = 0;
          for (const auto& e : g.edges()) {
            in += e.dst == v && e.etype == t;
            out += e.src == v && e.etype == t;
          }
          CHECK(x(v, t) == in);
          CHECK(x(v, r + t) == out);
        }
    }
  }

  TEST_CASE("normalizer applies log1p then standardizes with a floor") {
    Matrix raw(3, 3);
    raw.data = {0, 5, 0.5, 3, 5, 0.5, 7, 5, 0.2};
    auto n = FeatureNormalizer::fit(raw, 2);
    auto x = n.apply(raw);
    for (std::size_t j = 0; j < 3; ++j) {
      double mean = 0;
      for (std::size_t i = 0; i < 3; ++i) mean += x(i, j);
      CHECK(std::abs(mean / 3) < 1e-9);  // constant column is scaled by 1/1e-6
    }
    CHECK(n.stddev[1] == 1e-6);  // constant column
    const double l0 = std::log1p(0.0), l1 = std::log1p(3.0), l2 = std::log1p(7.0);
    const double mu = (l0 + l1 + l2) / 3;
    const double sd = std::sqrt(((l0 - mu) * (l0 - mu) + (l1 - mu) * (l1 - mu) + (l2 - mu) * (l2 - mu)) / 3);
    CHECK(x(2, 0) == doctest::Approx((l2 - mu) / sd));
    CHECK_THROWS_AS(n.apply(Matrix(1, 4)), ConfigError);
  }
}

TEST_SUITE("forward") {
  TEST_CASE("single vertex with identity weights yields ELU of the input") {
    GatModel m = GatModel::init(3, 1, 3, 3, 0);
    m.w1.fill(0);
    m.w2.fill(0);
    for (int i = 0; i < 3; ++i) m.w1(i, i) = m.w2(i, i) = 1;
    m.a1_src.fill(0);
    m.a1_dst.fill(0);
    m.a2_src.fill(0);
    m.a2_dst.fill(0);
    Matrix x(1, 3);
    x.data = {0.5, -1.0, 2.0};
    const auto g = AttentionGraph::from_adjacency({{}});
    Matrix out = gat_forward(m, g, x);
    CHECK(out(0, 0) == doctest::Approx(0.5));
    CHECK(out(0, 1) == doctest::Approx(std::expm1(-1.0)));
    CHECK(out(0, 2) == doctest::Approx(2.0));
    CHECK(attention_coefficients(m, g, x, 1, 0) == std::vector<double>{1.0});
  }

  TEST_CASE("sparse forward matches the dense evaluation") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      auto inst = oracle::random_instance(seed, 10, 1 + seed % 3, 4);
      const auto g = AttentionGraph::from_adjacency(inst.lists);
      const Matrix sparse = gat_forward(inst.model, g, inst.x);
      const auto dense = oracle::dense_forward(inst.model, inst.adj, inst.x);
      REQUIRE(sparse.rows == dense.logits.rows);
      for (std::size_t i = 0; i < sparse.size(); ++i)
        CHECK(std::abs(sparse.data[i] - dense.logits.data[i]) <= 1e-9);
    }
  }

  TEST_CASE("attention rows sum to one in both layers and modes") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      auto inst = oracle::random_instance(seed, 12, 2, 4);
      const auto g = AttentionGraph::from_adjacency(inst.lists);
      for (bool training : {false, true}) {
        Rng rng(seed);
        ForwardOptions o;
        o.training = training;
        o.dropout = 0.5;
        o.rng = &rng;
        ForwardCache c;
        gat_forward(inst.model, g, inst.x, o, &c);
        for (const auto* caches : {&c.att1, &c.att2})
          for (const auto& head : *caches)
            for (std::size_t i = 0; i < g.vertex_count(); ++i) {
              double s = 0;
              for (auto p = g.row_ptr[i]; p < g.row_ptr[i + 1]; ++p) s += head.alpha[p];
              CHECK(std::abs(s - 1.0) <= 1e-6);
            }
      }
    }
  }

  TEST_CASE("dropout only applies in training mode") {
    auto inst = oracle::random_instance(4, 8, 2, 4);
    const auto g = AttentionGraph::from_adjacency(inst.lists);
    Rng rng(1);
    ForwardOptions eval;
    eval.dropout = 0.5;
    eval.rng = &rng;
    CHECK(gat_forward(inst.model, g, inst.x, eval) == gat_forward(inst.model, g, inst.x));
    ForwardOptions train = eval;
    train.training = true;
    CHECK_FALSE(gat_forward(inst.model, g, inst.x, train) == gat_forward(inst.model, g, inst.x));
    train.rng = nullptr;
    CHECK_THROWS_AS(gat_forward(inst.model, g, inst.x, train), ConfigError);
  }

  TEST_CASE("shape mismatch is a configuration error") {
    auto inst = oracle::random_instance(1, 5, 2, 4);
    const auto g = AttentionGraph::from_adjacency(inst.lists);
    CHECK_THROWS_AS(gat_forward(inst.model, g, Matrix(inst.x.rows, 4)), ConfigError);
    inst.model.w2 = Matrix(3, 3);
    CHECK_THROWS_AS(gat_forward(inst.model, g, inst.x), ConfigError);
  }

  TEST_CASE("serial and parallel forward and backward agree bit for bit") {
    auto inst = oracle::random_instance(9, 10, 3, 5);
    const auto g = AttentionGraph::from_adjacency(inst.lists);
    ForwardOptions s, p;
    s.policy = ExecPolicy::Serial;
    ForwardCache cs, cp;
    const Matrix ls = gat_forward(inst.model, g, inst.x, s, &cs);
    const Matrix lp = gat_forward(inst.model, g, inst.x, p, &cp);
    CHECK(ls == lp);
    std::vector<std::uint32_t> rows(inst.x.rows);
    for (std::uint32_t i = 0; i < rows.size(); ++i) rows[i] = i;
    Matrix d;
    cross_entropy(ls, inst.labels, rows, &d);
    CHECK(gat_backward(inst.model, g, cs, d, ExecPolicy::Serial) == gat_backward(inst.model, g, cp, d));
  }
}

TEST_SUITE("gradients") {
  TEST_CASE("analytic gradients match central differences") {
    for (std::uint64_t seed = 100; seed < 105; ++seed) {
      auto inst = oracle::random_instance(seed, 6, 2, 4);
      const auto r = oracle::check_gradients(inst);
      CHECK(r.checked > 0);
      CHECK(r.worst <= 1e-4);
    }
  }

  TEST_CASE("cross entropy gradient is softmax minus one-hot over the batch") {
    Matrix logits(2, 3);
    logits.data = {1, 2, 3, 0, 0, 0};
    std::vector<int> labels{2, 0};
    std::vector<std::uint32_t> rows{0};
    Matrix g;
    const double loss = cross_entropy(logits, labels, rows, &g);
    const double z = std::exp(1) + std::exp(2) + std::exp(3);
    CHECK(loss == doctest::Approx(std::log(z) - 3));
    CHECK(g(0, 2) == doctest::Approx(std::exp(3) / z - 1));
    CHECK(g(1, 0) == 0.0);  // outside the batch
  }
}

TEST_SUITE("training") {
  // Multinomial logistic regression on the same normalized features; shows
  // the classes are separable from the features alone.
  double logistic_regression_accuracy(const Matrix& x, const std::vector<int>& y, int classes) {
    Matrix w(x.cols + 1, classes);
    for (int it = 0; it < 500; ++it) {
      Matrix grad(w.rows, w.cols);
      for (std::size_t i = 0; i < x.rows; ++i) {
        std::vector<double> z(classes, 0.0);
        for (int c = 0; c < classes; ++c) {
          z[c] = w(x.cols, c);
          for (std::size_t d = 0; d < x.cols; ++d) z[c] += x(i, d) * w(d, c);
        }
        double mx = *std::max_element(z.begin(), z.end()), s = 0;
        for (auto& v : z) s += v = std::exp(v - mx);
        for (int c = 0; c < classes; ++c) {
          const double g = z[c] / s - (c == y[i]);
          for (std::size_t d = 0; d < x.cols; ++d) grad(d, c) += g * x(i, d);
          grad(x.cols, c) += g;
        }
      }
      for (std::size_t k = 0; k < w.size(); ++k) w.data[k] -= 0.1 * grad.data[k] / x.rows;
    }
    int correct = 0;
    for (std::size_t i = 0; i < x.rows; ++i) {
      int best = 0;
      double bz = -1e300;
      for (int c = 0; c < classes; ++c) {
        double z = w(x.cols, c);
        for (std::size_t d = 0; d < x.cols; ++d) z += x(i, d) * w(d, c);
        if (z > bz) bz = z, best = c;
      }
      correct += best == y[i];
    }
    return static_cast<double>(correct) / x.rows;
  }

  TEST_CASE("separable toy graph is learned") {
    const auto g = toy_graph();
    TrainConfig cfg;
    cfg.seed = 5;
    const auto model = train_detector(g, cfg);
    const auto labels = kind_labels(g, model.classes);
    const Matrix x = model.normalizer.apply(raw_features(g, AnomalyScorer::edge_rarity()));
    REQUIRE(logistic_regression_accuracy(x, labels, 3) >= 0.95);
    const auto pred = predict_type(model.gat, attention_graph(g), x);
    int correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) correct += pred.predicted[i] == labels[i];
    CHECK(static_cast<double>(correct) / labels.size() >= 0.95);

    // Anomaly rate on the consistent graph stays low.
    const auto preds = detect(model, g);
    const auto flagged = std::count_if(preds.begin(), preds.end(), [](const auto& p) { return p.anomalous_pre; });
    CHECK(static_cast<double>(flagged) <= 0.05 * preds.size());
  }

  TEST_CASE("zero epochs returns the seeded initialization") {
    const auto g = toy_graph();
    TrainConfig cfg;
    cfg.epochs = 0;
    cfg.seed = 11;
    cfg.heads = 2;
    cfg.hidden_dim = 4;
    const auto m = train_detector(g, cfg);
    CHECK(m.gat == GatModel::init(2 * g.registry().size() + 1, 2, 4, 3, 11));
  }

  TEST_CASE("same seed gives identical parameters, different seed does not") {
    const auto g = toy_graph();
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.heads = 2;
    cfg.hidden_dim = 8;
    cfg.seed = 1;
    const auto a = train_detector(g, cfg), b = train_detector(g, cfg);
    CHECK(serialize_model(a) == serialize_model(b));
    cfg.seed = 2;
    CHECK_FALSE(train_detector(g, cfg).gat == a.gat);
    cfg.policy = ExecPolicy::Serial;
    cfg.seed = 1;
    CHECK(train_detector(g, cfg).gat == a.gat);
  }

  TEST_CASE("a single class cannot be trained") {
    ProvenanceGraph g;
    add(g, "p1", EntityKind::Process, "p2", EntityKind::Process, "fork");
    CHECK_THROWS_AS(train_detector(g, TrainConfig{}), TrainingError);
  }

  TEST_CASE("invalid configurations are rejected") {
    TrainConfig cfg;
    cfg.dropout = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.heads = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
}

TEST_SUITE("prediction") {
  TEST_CASE("softmax and argmax with lowest-index ties") {
    Matrix logits(3, 3);
    logits.data = {0, 0, 0, 10, 0, 0, -1, 4, 4};
    const auto r = predict_from_logits(logits);
    CHECK(r.probabilities(0, 0) == doctest::Approx(1.0 / 3));
    CHECK(r.predicted == std::vector<int>{0, 0, 1});
    CHECK(r.probabilities(1, 0) > 0.999);
    for (std::size_t i = 0; i < 3; ++i) {
      double s = 0;
      for (std::size_t c = 0; c < 3; ++c) s += r.probabilities(i, c);
      CHECK(std::abs(s - 1.0) <= 1e-9);
    }
  }

  TEST_CASE("anomaly means type mismatch") {
    CHECK_FALSE(is_anomalous(0, 0));
    CHECK(is_anomalous(1, 0));
  }
}

TEST_SUITE("locality") {
  TEST_CASE("benign density arithmetic") {
    auto g = star(5);
    std::set<std::string> flagged{"c", "l0"};
    CHECK(benign_density(g, "c", flagged) == doctest::Approx(0.8));
    flagged = {"c", "l0", "l1", "l2", "l3", "l4"};
    CHECK(benign_density(g, "c", flagged) == 0.0);
    g.add_entity(ent("alone", EntityKind::File));
    CHECK(benign_density(g, "alone", {"alone"}) == 0.0);
    CHECK_THROWS_AS(benign_density(g, "ghost", {}), LookupError);
  }

  TEST_CASE("post-processing thresholds strictly") {
    auto g = star(10);
    CHECK(postprocess(g, std::set<std::string>{"c"}).empty());  // density 1.0
    auto g5 = star(5);
    CHECK(postprocess(g5, std::set<std::string>{"c", "l0"}) == std::set<std::string>{"c", "l0"});  // exactly 0.8
    CHECK_THROWS_AS(postprocess(g5, std::set<std::string>{"c"}, 0.0), ConfigError);
    CHECK_THROWS_AS(postprocess(g5, std::set<std::string>{"c"}, 1.5), ConfigError);
  }

  TEST_CASE("flagged clique stays flagged") {
    ProvenanceGraph g;
    for (int i = 0; i < 6; ++i)
      for (int j = i + 1; j < 6; ++j)
        add(g, "a" + std::to_string(i), EntityKind::Process, "a" + std::to_string(j), EntityKind::Process, "fork");
    add(g, "a0", EntityKind::Process, "b", EntityKind::File, "read");
    std::set<std::string> flagged;
    for (int i = 0; i < 6; ++i) flagged.insert("a" + std::to_string(i));
    CHECK(postprocess(g, flagged) == flagged);
  }

  TEST_CASE("densities use the original flagged set") {
    // Path x - y - z with k = 1: unflagging x incrementally would change
    // the density seen by y.
    ProvenanceGraph g;
    add(g, "x", EntityKind::Process, "y", EntityKind::Process, "fork");
    add(g, "y", EntityKind::Process, "z", EntityKind::Process, "fork");
    add(g, "x", EntityKind::Process, "w", EntityKind::File, "read");
    add(g, "x", EntityKind::Process, "u", EntityKind::File, "read");
    add(g, "x", EntityKind::Process, "t", EntityKind::File, "read");
    add(g, "x", EntityKind::Process, "s", EntityKind::File, "read");
    add(g, "x", EntityKind::Process, "r", EntityKind::File, "read");
    const std::set<std::string> flagged{"x", "y"};
    // x: 5 of 6 neighbors benign (0.833) -> unflagged. y: neighbors x, z -> 0.5 -> kept.
    CHECK(postprocess(g, flagged, 0.8, 1) == std::set<std::string>{"y"});
  }

  TEST_CASE("post-processing only removes flags") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      auto g = random_graph(seed, 40, 60);
      Rng rng(seed);
      std::vector<char> flagged(g.vertex_count());
      for (auto& f : flagged) f = rng.bernoulli(0.3);
      const auto out = postprocess(g, flagged, 0.5, 2);
      const auto serial = postprocess(g, flagged, 0.5, 2, ExecPolicy::Serial);
      CHECK(out == serial);
      for (std::size_t v = 0; v < flagged.size(); ++v) CHECK((!out[v] || flagged[v]));
    }
  }
}

TEST_SUITE("model files") {
  TEST_CASE("snapshot round trip and registry binding") {
    const auto g = toy_graph();
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.heads = 2;
    cfg.hidden_dim = 4;
    const auto m = train_detector(g, cfg);
    const auto doc = serialize_model(m);
    const auto back = deserialize_model(doc);
    CHECK(serialize_model(back) == doc);
    CHECK(back.gat == m.gat);
    const auto a = detect(m, g), b = detect(back, g);
    CHECK(predictions_to_jsonl(a) == predictions_to_jsonl(b));

    ProvenanceGraph other(EdgeTypeRegistry(std::vector<std::string>{"read"}));
    add(other, "p", EntityKind::Process, "f", EntityKind::File, "read");
    CHECK_THROWS_AS(detect(m, other), ConfigError);

    auto j = nlohmann::json::parse(doc);
    j["matrices"]["w2"]["rows"] = 3;
    CHECK_THROWS_AS(deserialize_model(j.dump()), ConfigError);
    CHECK_THROWS_AS(deserialize_model("{\"format\":\"other\"}"), ConfigError);
  }

  TEST_CASE("prediction documents round trip") {
    std::vector<VertexPrediction> p(2);
    p[0] = {"a", "file", "process", true, false, 0.9};
    p[1] = {"b", "file", "file", false, false, std::nullopt};
    const auto text = predictions_to_jsonl(p);
    CHECK(text.find("\"benign_density\":null") != std::string::npos);
    const auto back = predictions_from_jsonl(text);
    REQUIRE(back.size() == 2);
    CHECK(back[0].benign_density == 0.9);
    CHECK_FALSE(back[1].benign_density.has_value());
    CHECK(predictions_to_jsonl(back) == text);
  }
}
