#include <algorithm>
#include <cmath>

#include "provmon/detector.hpp"
#include "provmon/error.hpp"

namespace provmon {

namespace {

struct Ops {
  decltype(&kernels::serial::matmul) matmul;
  decltype(&kernels::serial::matmul_tn) matmul_tn;
  decltype(&kernels::serial::matmul_nt) matmul_nt;
  decltype(&kernels::serial::attention_forward) forward;
  decltype(&kernels::serial::attention_backward) backward;
};

Ops ops_for(ExecPolicy p) {
  if (p == ExecPolicy::Serial)
    return {kernels::serial::matmul, kernels::serial::matmul_tn, kernels::serial::matmul_nt,
            kernels::serial::attention_forward, kernels::serial::attention_backward};
  return {kernels::omp::matmul, kernels::omp::matmul_tn, kernels::omp::matmul_nt, kernels::omp::attention_forward,
          kernels::omp::attention_backward};
}

void glorot(Matrix& m, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& v : m.data) v = rng.uniform(-limit, limit);
}

// Inverted dropout scales: 0 with probability p, else 1 / (1 - p).
std::vector<double> dropout_scales(std::size_t n, double p, Rng& rng) {
  std::vector<double> s(n);
  const double keep = 1.0 - p;
  for (auto& v : s) v = rng.bernoulli(keep) ? 1.0 / keep : 0.0;
  return s;
}

double elu(double x) { return x > 0 ? x : std::expm1(x); }
double elu_grad(double x) { return x > 0 ? 1.0 : std::exp(x); }

}  // namespace

GatModel GatModel::init(std::size_t input_dim, std::size_t heads, std::size_t hidden_dim, std::size_t class_count,
                        std::uint64_t seed) {
  if (input_dim == 0 || heads == 0 || hidden_dim == 0 || class_count == 0)
    throw ConfigError("model dimensions must be positive");
  GatModel m;
  m.input_dim = input_dim;
  m.heads = heads;
  m.hidden_dim = hidden_dim;
  m.class_count = class_count;
  m.w1 = Matrix(input_dim, heads * hidden_dim);
  m.a1_src = Matrix(heads, hidden_dim);
  m.a1_dst = Matrix(heads, hidden_dim);
  m.w2 = Matrix(heads * hidden_dim, heads * class_count);
  m.a2_src = Matrix(heads, class_count);
  m.a2_dst = Matrix(heads, class_count);
  Rng rng(seed);
  glorot(m.w1, input_dim, hidden_dim, rng);
  glorot(m.a1_src, 2 * hidden_dim, 1, rng);
  glorot(m.a1_dst, 2 * hidden_dim, 1, rng);
  glorot(m.w2, heads * hidden_dim, class_count, rng);
  glorot(m.a2_src, 2 * class_count, 1, rng);
  glorot(m.a2_dst, 2 * class_count, 1, rng);
  return m;
}

std::vector<Matrix*> GatModel::parameters() { return {&w1, &a1_src, &a1_dst, &w2, &a2_src, &a2_dst}; }
std::vector<const Matrix*> GatModel::parameters() const { return {&w1, &a1_src, &a1_dst, &w2, &a2_src, &a2_dst}; }

void GatModel::check_shapes() const {
  auto expect = [](const Matrix& m, std::size_t r, std::size_t c, const char* name) {
    if (m.rows != r || m.cols != c || m.data.size() != r * c)
      throw ConfigError(std::string("model matrix ") + name + " has shape " + std::to_string(m.rows) + "x" +
                        std::to_string(m.cols) + ", expected " + std::to_string(r) + "x" + std::to_string(c));
  };
  expect(w1, input_dim, heads * hidden_dim, "w1");
  expect(a1_src, heads, hidden_dim, "a1_src");
  expect(a1_dst, heads, hidden_dim, "a1_dst");
  expect(w2, heads * hidden_dim, heads * class_count, "w2");
  expect(a2_src, heads, class_count, "a2_src");
  expect(a2_dst, heads, class_count, "a2_dst");
}

Matrix gat_forward(const GatModel& m, const AttentionGraph& g, const Matrix& x, const ForwardOptions& opts,
                   ForwardCache* cache) {
  m.check_shapes();
  if (x.cols != m.input_dim)
    throw ConfigError("feature width " + std::to_string(x.cols) + " does not match model input " +
                      std::to_string(m.input_dim));
  if (x.rows != g.vertex_count()) throw ConfigError("feature rows do not match graph vertices");
  const bool drop = opts.training && opts.dropout > 0.0;
  if (drop && opts.rng == nullptr) throw ConfigError("dropout requires a random generator");
  const Ops ops = ops_for(opts.policy);
  const std::size_t n = x.rows, H = m.heads, F = m.hidden_dim, C = m.class_count;

  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;

  c.x_in = x;
  if (drop) {
    auto s = dropout_scales(x.size(), opts.dropout, *opts.rng);
    for (std::size_t i = 0; i < s.size(); ++i) c.x_in.data[i] *= s[i];
  }
  ops.matmul(c.x_in, m.w1, c.z1);
  c.att1.assign(H, {});
  c.att1_drop.assign(H, {});
  c.h1 = Matrix(n, H * F);
  for (std::size_t h = 0; h < H; ++h) {
    if (drop) c.att1_drop[h] = dropout_scales(g.nnz(), opts.dropout, *opts.rng);
    ops.forward(g, c.z1, {h * F, F}, m.a1_src.row(h), m.a1_dst.row(h), m.slope, c.att1_drop[h], c.att1[h], c.h1);
  }

  c.e1_in = Matrix(n, H * F);
  for (std::size_t i = 0; i < c.h1.size(); ++i) c.e1_in.data[i] = elu(c.h1.data[i]);
  c.drop_e1 = Matrix();
  if (drop) {
    auto s = dropout_scales(c.e1_in.size(), opts.dropout, *opts.rng);
    c.drop_e1 = Matrix(n, H * F);
    c.drop_e1.data = std::move(s);
    for (std::size_t i = 0; i < c.e1_in.size(); ++i) c.e1_in.data[i] *= c.drop_e1.data[i];
  }
  ops.matmul(c.e1_in, m.w2, c.z2);
  c.att2.assign(H, {});
  c.att2_drop.assign(H, {});
  Matrix out2(n, H * C);
  for (std::size_t h = 0; h < H; ++h) {
    if (drop) c.att2_drop[h] = dropout_scales(g.nnz(), opts.dropout, *opts.rng);
    ops.forward(g, c.z2, {h * C, C}, m.a2_src.row(h), m.a2_dst.row(h), m.slope, c.att2_drop[h], c.att2[h], out2);
  }

  Matrix logits(n, C);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < C; ++k) {
      double acc = 0.0;
      for (std::size_t h = 0; h < H; ++h) acc += out2(i, h * C + k);
      logits(i, k) = acc / static_cast<double>(H);
    }
  return logits;
}

std::vector<Matrix> gat_backward(const GatModel& m, const AttentionGraph& g, const ForwardCache& c,
                                 const Matrix& dlogits, ExecPolicy policy) {
  const Ops ops = ops_for(policy);
  const std::size_t n = dlogits.rows, H = m.heads, F = m.hidden_dim, C = m.class_count;

  Matrix dout2(n, H * C);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t h = 0; h < H; ++h)
      for (std::size_t k = 0; k < C; ++k) dout2(i, h * C + k) = dlogits(i, k) / static_cast<double>(H);

  Matrix dz2(n, H * C);
  Matrix da2_src(H, C), da2_dst(H, C);
  for (std::size_t h = 0; h < H; ++h)
    ops.backward(g, c.z2, {h * C, C}, m.a2_src.row(h), m.a2_dst.row(h), m.slope, c.att2_drop[h], c.att2[h], dout2,
                 dz2, da2_src.row(h), da2_dst.row(h));
  Matrix dw2, de1;
  ops.matmul_tn(c.e1_in, dz2, dw2);
  ops.matmul_nt(dz2, m.w2, de1);

  Matrix& dh1 = de1;
  for (std::size_t i = 0; i < dh1.size(); ++i) {
    if (!c.drop_e1.data.empty()) dh1.data[i] *= c.drop_e1.data[i];
    dh1.data[i] *= elu_grad(c.h1.data[i]);
  }

  Matrix dz1(n, H * F);
  Matrix da1_src(H, F), da1_dst(H, F);
  for (std::size_t h = 0; h < H; ++h)
    ops.backward(g, c.z1, {h * F, F}, m.a1_src.row(h), m.a1_dst.row(h), m.slope, c.att1_drop[h], c.att1[h], dh1,
                 dz1, da1_src.row(h), da1_dst.row(h));
  Matrix dw1;
  ops.matmul_tn(c.x_in, dz1, dw1);

  std::vector<Matrix> grads;
  grads.push_back(std::move(dw1));
  grads.push_back(std::move(da1_src));
  grads.push_back(std::move(da1_dst));
  grads.push_back(std::move(dw2));
  grads.push_back(std::move(da2_src));
  grads.push_back(std::move(da2_dst));
  return grads;
}

double cross_entropy(const Matrix& logits, std::span<const int> labels, std::span<const std::uint32_t> rows,
                     Matrix* grad) {
  if (grad) *grad = Matrix(logits.rows, logits.cols);
  if (rows.empty()) return 0.0;
  const double inv = 1.0 / static_cast<double>(rows.size());
  double loss = 0.0;
  for (auto i : rows) {
    auto z = logits.row(i);
    const double mx = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - mx);
    const double lse = mx + std::log(sum);
    loss += lse - z[labels[i]];
    if (grad)
      for (std::size_t k = 0; k < z.size(); ++k)
        (*grad)(i, k) = (std::exp(z[k] - lse) - (static_cast<int>(k) == labels[i] ? 1.0 : 0.0)) * inv;
  }
  return loss * inv;
}

std::vector<double> attention_coefficients(const GatModel& m, const AttentionGraph& g, const Matrix& x, int layer,
                                           std::size_t head) {
  if (head >= m.heads || (layer != 1 && layer != 2)) throw ArgumentError("no such attention head");
  ForwardCache c;
  gat_forward(m, g, x, {}, &c);
  return layer == 1 ? c.att1[head].alpha : c.att2[head].alpha;
}

PredictResult predict_from_logits(const Matrix& logits) {
  PredictResult r;
  r.probabilities = Matrix(logits.rows, logits.cols);
  r.predicted.resize(logits.rows);
  for (std::size_t i = 0; i < logits.rows; ++i) {
    auto z = logits.row(i);
    auto p = r.probabilities.row(i);
    const double mx = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (std::size_t k = 0; k < z.size(); ++k) sum += p[k] = std::exp(z[k] - mx);
    for (auto& v : p) v /= sum;
    r.predicted[i] = static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
  }
  return r;
}

PredictResult predict_type(const GatModel& m, const AttentionGraph& g, const Matrix& features, ExecPolicy policy) {
  ForwardOptions opts;
  opts.policy = policy;
  return predict_from_logits(gat_forward(m, g, features, opts));
}

}  // namespace provmon
