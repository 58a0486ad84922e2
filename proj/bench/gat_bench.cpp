// Serial reference kernels against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include "provmon/detector.hpp"
#include "provmon/evalharness.hpp"
#include "provmon/rng.hpp"

namespace {

using namespace provmon;

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(r, c);
  for (auto& v : m.data) v = rng.uniform(-1, 1);
  return m;
}

struct Workload {
  AttentionGraph graph;
  Matrix x;
  GatModel model;
};

const Workload& workload() {
  static const Workload w = [] {
    ScenarioConfig sc;
    sc.benign_vertex_count = 4000;
    sc.attack_cluster_size = 60;
    sc.seed = 1;
    const auto scn = gen_scenario(sc);
    const auto raw = raw_features(scn.graph, AnomalyScorer::edge_rarity());
    const auto x = FeatureNormalizer::fit(raw, 2 * scn.graph.registry().size()).apply(raw);
    return Workload{attention_graph(scn.graph), x, GatModel::init(x.cols, 8, 16, 3, 1)};
  }();
  return w;
}

template <void (*Mul)(const Matrix&, const Matrix&, Matrix&)>
void BM_matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_matrix(n, n, 1), b = random_matrix(n, n, 2);
  Matrix c;
  for (auto _ : state) {
    Mul(a, b, c);
    benchmark::DoNotOptimize(c.data.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}

template <ExecPolicy P>
void BM_forward(benchmark::State& state) {
  const auto& w = workload();
  ForwardOptions opts;
  opts.policy = P;
  for (auto _ : state) {
    auto logits = gat_forward(w.model, w.graph, w.x, opts, nullptr);
    benchmark::DoNotOptimize(logits.data.data());
  }
  state.counters["vertices"] = static_cast<double>(w.graph.vertex_count());
}

template <ExecPolicy P>
void BM_forward_backward(benchmark::State& state) {
  const auto& w = workload();
  ForwardOptions opts;
  opts.policy = P;
  std::vector<int> labels(w.x.rows, 0);
  std::vector<std::uint32_t> rows(w.x.rows);
  for (std::uint32_t i = 0; i < rows.size(); ++i) rows[i] = i;
  for (auto _ : state) {
    ForwardCache cache;
    auto logits = gat_forward(w.model, w.graph, w.x, opts, &cache);
    Matrix dlogits;
    cross_entropy(logits, labels, rows, &dlogits);
    auto grads = gat_backward(w.model, w.graph, cache, dlogits, P);
    benchmark::DoNotOptimize(grads.data());
  }
}

}  // namespace

BENCHMARK(BM_matmul<provmon::kernels::serial::matmul>)->Name("matmul/serial")->Arg(128)->Arg(256);
BENCHMARK(BM_matmul<provmon::kernels::omp::matmul>)->Name("matmul/omp")->Arg(128)->Arg(256);
BENCHMARK(BM_forward<provmon::ExecPolicy::Serial>)->Name("gat_forward/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_forward<provmon::ExecPolicy::Parallel>)->Name("gat_forward/omp")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_forward_backward<provmon::ExecPolicy::Serial>)
    ->Name("gat_train_step/serial")
    ->Unit(benchmark::kMillisecond);
BENCHMARK(BM_forward_backward<provmon::ExecPolicy::Parallel>)
    ->Name("gat_train_step/omp")
    ->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
