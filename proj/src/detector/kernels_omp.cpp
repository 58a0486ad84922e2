#include <algorithm>
#include <cmath>

#include "provmon/kernels.hpp"

namespace provmon::kernels::omp {

namespace {

using Index = std::ptrdiff_t;

double project(const Matrix& z, std::size_t i, HeadView h, std::span<const double> a) {
  double acc = 0.0;
  for (std::size_t f = 0; f < h.width; ++f) acc += z(i, h.offset + f) * a[f];
  return acc;
}

}  // namespace

// Row-blocked i-k-j loops: each c(i, j) still accumulates k in ascending
// order starting from zero, matching the reference.
void matmul(const Matrix& a, const Matrix& b, Matrix& c) {
  c = Matrix(a.rows, b.cols);
  const Index n = static_cast<Index>(a.rows);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < n; ++i) {
    double* ci = c.data.data() + i * c.cols;
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = a(i, k);
      const double* bk = b.data.data() + k * b.cols;
      for (std::size_t j = 0; j < b.cols; ++j) ci[j] += aik * bk[j];
    }
  }
}

void matmul_tn(const Matrix& a, const Matrix& b, Matrix& c) {
  c = Matrix(a.cols, b.cols);
  const Index m = static_cast<Index>(a.cols);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < m; ++i) {
    double* ci = c.data.data() + i * c.cols;
    for (std::size_t k = 0; k < a.rows; ++k) {
      const double aki = a(k, i);
      const double* bk = b.data.data() + k * b.cols;
      for (std::size_t j = 0; j < b.cols; ++j) ci[j] += aki * bk[j];
    }
  }
}

void matmul_nt(const Matrix& a, const Matrix& b, Matrix& c) {
  c = Matrix(a.rows, b.rows);
  const Index n = static_cast<Index>(a.rows);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < n; ++i)
    for (std::size_t j = 0; j < b.rows; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols; ++k) acc += a(i, k) * b(j, k);
      c(i, j) = acc;
    }
}

void attention_forward(const AttentionGraph& g, const Matrix& z, HeadView head, std::span<const double> a_src,
                       std::span<const double> a_dst, double slope, std::span<const double> drop_scale,
                       AttentionCache& cache, Matrix& out) {
  const Index n = static_cast<Index>(g.vertex_count());
  std::vector<double> s(n), t(n);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < n; ++i) {
    s[i] = project(z, i, head, a_src);
    t[i] = project(z, i, head, a_dst);
  }
  cache.pre.resize(g.nnz());
  cache.alpha.resize(g.nnz());
  cache.alpha_eff.resize(g.nnz());
#pragma omp parallel for schedule(dynamic, 64)
  for (Index i = 0; i < n; ++i) {
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
  const Index n = static_cast<Index>(g.vertex_count());
  std::vector<double> du(g.nnz()), ds(n), dt(n);
#pragma omp parallel
  {
    std::vector<double> dalpha;
#pragma omp for schedule(dynamic, 64)
    for (Index i = 0; i < n; ++i) {
      const auto lo = g.row_ptr[i], hi = g.row_ptr[i + 1];
      dalpha.assign(hi - lo, 0.0);
      double dot = 0.0;
      for (auto p = lo; p < hi; ++p) {
        double acc = 0.0;
        for (std::size_t f = 0; f < head.width; ++f)
          acc += dout(i, head.offset + f) * z(g.col[p], head.offset + f);
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
  }
#pragma omp parallel for schedule(dynamic, 64)
  for (Index j = 0; j < n; ++j) {
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
  const Index width = static_cast<Index>(head.width);
#pragma omp parallel for schedule(static)
  for (Index f = 0; f < width; ++f) {
    double gs = 0.0, gt = 0.0;
    for (Index i = 0; i < n; ++i) {
      gs += ds[i] * z(i, head.offset + f);
      gt += dt[i] * z(i, head.offset + f);
    }
    da_src[f] += gs;
    da_dst[f] += gt;
  }
}

}  // namespace provmon::kernels::omp
