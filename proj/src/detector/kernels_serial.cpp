#include <algorithm>
#include <cmath>

#include "provmon/error.hpp"
#include "provmon/kernels.hpp"

namespace provmon {

AttentionGraph AttentionGraph::from_adjacency(const std::vector<std::vector<std::uint32_t>>& adj) {
  const std::size_t n = adj.size();
  std::vector<std::vector<std::uint32_t>> rows(n);
  for (std::size_t i = 0; i < n; ++i) {
    rows[i].push_back(static_cast<std::uint32_t>(i));
    for (auto j : adj[i]) {
      if (j >= n) throw Error("attention graph: neighbor out of range");
      rows[i].push_back(j);
      rows[j].push_back(static_cast<std::uint32_t>(i));
    }
  }
  AttentionGraph g;
  g.row_ptr.assign(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) {
    auto& r = rows[i];
    std::sort(r.begin(), r.end());
    r.erase(std::unique(r.begin(), r.end()), r.end());
    g.row_ptr[i + 1] = g.row_ptr[i] + static_cast<std::uint32_t>(r.size());
  }
  g.col.reserve(g.row_ptr[n]);
  for (const auto& r : rows) g.col.insert(g.col.end(), r.begin(), r.end());
  g.rev.resize(g.col.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (auto p = g.row_ptr[i]; p < g.row_ptr[i + 1]; ++p) {
      const auto j = g.col[p];
      auto first = g.col.begin() + g.row_ptr[j], last = g.col.begin() + g.row_ptr[j + 1];
      auto it = std::lower_bound(first, last, static_cast<std::uint32_t>(i));
      g.rev[p] = static_cast<std::uint32_t>(it - g.col.begin());
    }
  }
  return g;
}

namespace kernels::serial {

void matmul(const Matrix& a, const Matrix& b, Matrix& c) {
  c = Matrix(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < b.cols; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols; ++k) acc += a(i, k) * b(k, j);
      c(i, j) = acc;
    }
}

void matmul_tn(const Matrix& a, const Matrix& b, Matrix& c) {
  c = Matrix(a.cols, b.cols);
  for (std::size_t i = 0; i < a.cols; ++i)
    for (std::size_t j = 0; j < b.cols; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.rows; ++k) acc += a(k, i) * b(k, j);
      c(i, j) = acc;
    }
}

void matmul_nt(const Matrix& a, const Matrix& b, Matrix& c) {
  c = Matrix(a.rows, b.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < b.rows; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols; ++k) acc += a(i, k) * b(j, k);
      c(i, j) = acc;
    }
}

namespace {

double project(const Matrix& z, std::size_t i, HeadView h, std::span<const double> a) {
  double acc = 0.0;
  for (std::size_t f = 0; f < h.width; ++f) acc += z(i, h.offset + f) * a[f];
  return acc;
}

}  // namespace

void attention_forward(const AttentionGraph& g, const Matrix& z, HeadView head, std::span<const double> a_src,
                       std::span<const double> a_dst, double slope, std::span<const double> drop_scale,
                       AttentionCache& cache, Matrix& out) {
  const std::size_t n = g.vertex_count();
  std::vector<double> s(n), t(n);
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = project(z, i, head, a_src);
    t[i] = project(z, i, head, a_dst);
  }
  cache.pre.resize(g.nnz());
  cache.alpha.resize(g.nnz());
  cache.alpha_eff.resize(g.nnz());
  for (std::size_t i = 0; i < n; ++i) {
    const auto lo = g.row_ptr[i], hi = g.row_ptr[i + 1];
    double mx = -INFINITY;
    for (auto p = lo; p < hi; ++p) {
      cache.pre[p] = s[i] + t[g.col[p]];
      const double e = cache.pre[p] > 0 ? cache.pre[p] : slope * cache.pre[p];
      cache.alpha[p] = e;
      mx = std::max(mx, e);
    }
    double sum = 0.0;
    for (auto p = lo; p < hi; ++p) {
      cache.alpha[p] = std::exp(cache.alpha[p] - mx);
      sum += cache.alpha[p];
    }
    for (auto p = lo; p < hi; ++p) {
      cache.alpha[p] /= sum;
      cache.alpha_eff[p] = drop_scale.empty() ? cache.alpha[p] : cache.alpha[p] * drop_scale[p];
    }
    for (std::size_t f = 0; f < head.width; ++f) {
      double acc = 0.0;
      for (auto p = lo; p < hi; ++p) acc += cache.alpha_eff[p] * z(g.col[p], head.offset + f);
      out(i, head.offset + f) = acc;
    }
  }
}

void attention_backward(const AttentionGraph& g, const Matrix& z, HeadView head, std::span<const double> a_src,
                        std::span<const double> a_dst, double slope, std::span<const double> drop_scale,
                        const AttentionCache& cache, const Matrix& dout, Matrix& dz, std::span<double> da_src,
                        std::span<double> da_dst) {
  const std::size_t n = g.vertex_count();
  std::vector<double> du(g.nnz()), ds(n), dt(n);
  std::vector<double> dalpha;
  for (std::size_t i = 0; i < n; ++i) {
    const auto lo = g.row_ptr[i], hi = g.row_ptr[i + 1];
    dalpha.assign(hi - lo, 0.0);
    double dot = 0.0;
    for (auto p = lo; p < hi; ++p) {
      double acc = 0.0;
      for (std::size_t f = 0; f < head.width; ++f) acc += dout(i, head.offset + f) * z(g.col[p], head.offset + f);
      dalpha[p - lo] = drop_scale.empty() ? acc : acc * drop_scale[p];
      dot += cache.alpha[p] * dalpha[p - lo];
    }
    double row = 0.0;
    for (auto p = lo; p < hi; ++p) {
      const double de = cache.alpha[p] * (dalpha[p - lo] - dot);
      du[p] = cache.pre[p] > 0 ? de : slope * de;
      row += du[p];
    }
    ds[i] = row;
  }
  for (std::size_t j = 0; j < n; ++j) {
    const auto lo = g.row_ptr[j], hi = g.row_ptr[j + 1];
    double acc = 0.0;
    for (auto q = lo; q < hi; ++q) acc += du[g.rev[q]];
    dt[j] = acc;
    for (std::size_t f = 0; f < head.width; ++f) {
      double v = 0.0;
      for (auto q = lo; q < hi; ++q) v += cache.alpha_eff[g.rev[q]] * dout(g.col[q], head.offset + f);
      dz(j, head.offset + f) += v + ds[j] * a_src[f] + dt[j] * a_dst[f];
    }
  }
  for (std::size_t f = 0; f < head.width; ++f) {
    double gs = 0.0, gt = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      gs += ds[i] * z(i, head.offset + f);
      gt += dt[i] * z(i, head.offset + f);
    }
    da_src[f] += gs;
    da_dst[f] += gt;
  }
}

}  // namespace kernels::serial
}  // namespace provmon
