#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "provmon/matrix.hpp"

namespace provmon {

// Neighborhood structure for attention: row i lists the sorted neighbor
// set of vertex i including i itself. The relation is symmetric, and
// rev[p] is the position of the mirrored entry (j, i) for entry p = (i, j).
struct AttentionGraph {
  std::vector<std::uint32_t> row_ptr;
  std::vector<std::uint32_t> col;
  std::vector<std::uint32_t> rev;

  std::size_t vertex_count() const { return row_ptr.empty() ? 0 : row_ptr.size() - 1; }
  std::size_t nnz() const { return col.size(); }

  // Builds from undirected adjacency lists (self entries are added).
  static AttentionGraph from_adjacency(const std::vector<std::vector<std::uint32_t>>& adj);
};

// One attention head operating on a column block [offset, offset + width)
// of the transformed features Z and of the output.
struct HeadView {
  std::size_t offset = 0;
  std::size_t width = 0;
};

// Per-head attention state kept for the backward pass.
struct AttentionCache {
  std::vector<double> pre;        // s_i + t_j before the leaky rectifier
  std::vector<double> alpha;      // normalized coefficients
  std::vector<double> alpha_eff;  // alpha times the dropout scale
};

// Two implementations with identical signatures. The OpenMP variants split
// work over output rows or columns only and keep each output element's
// summation order, so both produce bit-identical results.
namespace kernels::serial {
// C = A * B
void matmul(const Matrix& a, const Matrix& b, Matrix& c);
// C = A^T * B
void matmul_tn(const Matrix& a, const Matrix& b, Matrix& c);
// C = A * B^T
void matmul_nt(const Matrix& a, const Matrix& b, Matrix& c);
// Writes out's head block: out_i = sum_j alpha_eff_ij z_j. An empty
// drop_scale means no attention dropout.
void attention_forward(const AttentionGraph& g, const Matrix& z, HeadView head, std::span<const double> a_src,
                       std::span<const double> a_dst, double slope, std::span<const double> drop_scale,
                       AttentionCache& cache, Matrix& out);
// Accumulates into dz's head block and into da_src, da_dst.
void attention_backward(const AttentionGraph& g, const Matrix& z, HeadView head, std::span<const double> a_src,
                        std::span<const double> a_dst, double slope, std::span<const double> drop_scale,
                        const AttentionCache& cache, const Matrix& dout, Matrix& dz, std::span<double> da_src,
                        std::span<double> da_dst);
}  // namespace kernels::serial

namespace kernels::omp {
// C = A * B
void matmul(const Matrix& a, const Matrix& b, Matrix& c);
// C = A^T * B
void matmul_tn(const Matrix& a, const Matrix& b, Matrix& c);
// C = A * B^T
void matmul_nt(const Matrix& a, const Matrix& b, Matrix& c);
// Writes out's head block: out_i = sum_j alpha_eff_ij z_j. An empty
// drop_scale means no attention dropout.
void attention_forward(const AttentionGraph& g, const Matrix& z, HeadView head, std::span<const double> a_src,
                       std::span<const double> a_dst, double slope, std::span<const double> drop_scale,
                       AttentionCache& cache, Matrix& out);
// Accumulates into dz's head block and into da_src, da_dst.
void attention_backward(const AttentionGraph& g, const Matrix& z, HeadView head, std::span<const double> a_src,
                        std::span<const double> a_dst, double slope, std::span<const double> drop_scale,
                        const AttentionCache& cache, const Matrix& dout, Matrix& dz, std::span<double> da_src,
                        std::span<double> da_dst);
}  // namespace kernels::omp

enum class ExecPolicy { Serial, Parallel };

}  // namespace provmon
