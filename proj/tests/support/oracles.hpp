#pragma once

// Independent reference computations used by unit and acceptance tests.
// None of these call the library's kernels.

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "provmon/detector.hpp"
#include "provmon/rng.hpp"

namespace oracle {

using provmon::GatModel;
using provmon::Matrix;

// Dense evaluation of the two-layer attention network from its definition:
// per head, e_ij = leaky(a_src . W x_i + a_dst . W x_j) over j in N(i) (self
// included), alpha = softmax_j(e_ij), outputs concatenated after layer one,
// ELU, and averaged over heads after layer two.
struct DenseResult {
  Matrix logits;
  std::vector<std::vector<std::vector<double>>> alpha1;  // [head][i][j], 0 off-neighborhood
  std::vector<std::vector<std::vector<double>>> alpha2;
};

inline DenseResult dense_forward(const GatModel& m, const std::vector<std::vector<bool>>& adj, const Matrix& x) {
  const std::size_t n = x.rows, H = m.heads, F = m.hidden_dim, C = m.class_count;
  auto layer = [&](const Matrix& in, const Matrix& w, const Matrix& as, const Matrix& ad, std::size_t width,
                   std::vector<std::vector<std::vector<double>>>& alpha_out) {
    std::vector<Matrix> outs;
    alpha_out.assign(H, std::vector<std::vector<double>>(n, std::vector<double>(n, 0.0)));
    for (std::size_t h = 0; h < H; ++h) {
      Matrix z(n, width);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t f = 0; f < width; ++f) {
          double s = 0;
          for (std::size_t d = 0; d < in.cols; ++d) s += in(i, d) * w(d, h * width + f);
          z(i, f) = s;
        }
      Matrix out(n, width);
      for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> e(n, 0.0);
        double denom = 0;
        for (std::size_t j = 0; j < n; ++j) {
          if (!adj[i][j]) continue;
          double score = 0;
          for (std::size_t f = 0; f < width; ++f) score += as(h, f) * z(i, f) + ad(h, f) * z(j, f);
          score = score > 0 ? score : m.slope * score;
          e[j] = std::exp(score);
          denom += e[j];
        }
        for (std::size_t j = 0; j < n; ++j) {
          if (!adj[i][j]) continue;
          const double a = e[j] / denom;
          alpha_out[h][i][j] = a;
          for (std::size_t f = 0; f < width; ++f) out(i, f) += a * z(j, f);
        }
      }
      outs.push_back(std::move(out));
    }
    return outs;
  };
  DenseResult r;
  auto l1 = layer(x, m.w1, m.a1_src, m.a1_dst, F, r.alpha1);
  Matrix hidden(n, H * F);
  for (std::size_t h = 0; h < H; ++h)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t f = 0; f < F; ++f) {
        const double v = l1[h](i, f);
        hidden(i, h * F + f) = v > 0 ? v : std::exp(v) - 1.0;
      }
  auto l2 = layer(hidden, m.w2, m.a2_src, m.a2_dst, C, r.alpha2);
  r.logits = Matrix(n, C);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < C; ++c) {
      double s = 0;
      for (std::size_t h = 0; h < H; ++h) s += l2[h](i, c);
      r.logits(i, c) = s / static_cast<double>(H);
    }
  return r;
}

// Random symmetric neighborhood structure with self loops.
struct RandomInstance {
  std::vector<std::vector<bool>> adj;
  std::vector<std::vector<std::uint32_t>> lists;
  Matrix x;
  std::vector<int> labels;
  GatModel model;
};

inline RandomInstance random_instance(std::uint64_t seed, std::size_t max_vertices, std::size_t heads,
                                      std::size_t hidden, std::size_t classes = 3, std::size_t input_dim = 5) {
  provmon::Rng rng(seed * 7919 + 11);
  RandomInstance inst;
  const std::size_t n = 1 + rng.below(max_vertices);
  inst.adj.assign(n, std::vector<bool>(n, false));
  inst.lists.assign(n, {});
  for (std::size_t i = 0; i < n; ++i) inst.adj[i][i] = true;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (rng.bernoulli(0.4)) {
        inst.adj[i][j] = inst.adj[j][i] = true;
        inst.lists[i].push_back(static_cast<std::uint32_t>(j));
      }
  inst.x = Matrix(n, input_dim);
  for (auto& v : inst.x.data) v = rng.uniform(-1.5, 1.5);
  inst.labels.resize(n);
  for (auto& l : inst.labels) l = static_cast<int>(rng.below(classes));
  inst.model = GatModel::init(input_dim, heads, hidden, classes, seed);
  // Larger attention vectors so the scores are not all near zero.
  for (auto* p : {&inst.model.a1_src, &inst.model.a1_dst, &inst.model.a2_src, &inst.model.a2_dst})
    for (auto& v : p->data) v = rng.uniform(-1.0, 1.0);
  return inst;
}

// Mean cross-entropy over all rows, computed from scratch.
inline double loss(const Matrix& logits, const std::vector<int>& labels) {
  double total = 0;
  for (std::size_t i = 0; i < logits.rows; ++i) {
    double s = 0;
    for (std::size_t c = 0; c < logits.cols; ++c) s += std::exp(logits(i, c));
    total += std::log(s) - logits(i, labels[i]);
  }
  return total / static_cast<double>(logits.rows);
}

struct GradCheck {
  double worst = 0;  // largest relative error seen
  std::size_t checked = 0;
};

// Central differences on every parameter against the analytic gradient.
// Relative error = |a - n| / max(|a|, |n|, floor).
inline GradCheck check_gradients(RandomInstance& inst, double step = 1e-5, double floor = 1e-6) {
  using namespace provmon;
  const auto g = AttentionGraph::from_adjacency(inst.lists);
  std::vector<std::uint32_t> rows(inst.x.rows);
  for (std::uint32_t i = 0; i < rows.size(); ++i) rows[i] = i;
  ForwardCache cache;
  ForwardOptions opts;
  opts.policy = ExecPolicy::Serial;
  Matrix logits = gat_forward(inst.model, g, inst.x, opts, &cache);
  Matrix dlogits;
  cross_entropy(logits, inst.labels, rows, &dlogits);
  const auto grads = gat_backward(inst.model, g, cache, dlogits, ExecPolicy::Serial);

  auto objective = [&] { return loss(dense_forward(inst.model, inst.adj, inst.x).logits, inst.labels); };
  GradCheck out;
  auto params = inst.model.parameters();
  for (std::size_t p = 0; p < params.size(); ++p)
    for (std::size_t k = 0; k < params[p]->data.size(); ++k) {
      double& theta = params[p]->data[k];
      const double saved = theta;
      theta = saved + step;
      const double up = objective();
      theta = saved - step;
      const double down = objective();
      theta = saved;
      const double numeric = (up - down) / (2 * step);
      const double analytic = grads[p].data[k];
      const double err = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
      out.worst = std::max(out.worst, err);
      ++out.checked;
    }
  return out;
}

}  // namespace oracle
