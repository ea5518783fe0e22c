#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "kw/error.hpp"
#include "kw/ops.hpp"
#include "kw/partition.hpp"
#include "kw/rng.hpp"
#include "kw/tensor.hpp"

// Per-layer attention: a squeeze-excitation style module (GAP -> FC -> ReLU
// -> FC) produces m rows of q logits, and each row is normalized by the
// contrasting-driven attention function
//
//   alpha_j = tau * beta_j + (1 - tau) * z_j / sum_p |z_p|
//
// where beta is a constant binary warmup assignment and tau decays linearly
// from 1 to 0 over the warmup. Unlike softmax, the L1 normalization keeps
// sign information, so attentions can be negative. Softmax / sigmoid /
// relu-normalized variants are available as selectable alternatives.

namespace kw {

enum class AttnFunc { kCaf, kSoftmax, kSigmoid, kReluNorm };

enum class BetaStrategy { kOneToOne, kAllToOne, kKToOne, kOneToMany };

struct BetaSpec {
  BetaStrategy strategy{BetaStrategy::kOneToOne};
  int param{1};  // k for k_to_one, r for one_to_many; ignored otherwise
};

// Constant binary assignment matrix for one layer: m rows (mixtures) by q
// columns (cells, plus the trailing e_z column when the budget is below 1).
struct BetaAssignment {
  int m{0};
  int q{0};
  std::vector<uint8_t> mat;  // row-major m x q
  BetaSpec spec;

  uint8_t at(int i, int j) const { return mat[static_cast<size_t>(i) * q + j]; }
  const uint8_t* row(int i) const { return mat.data() + static_cast<size_t>(i) * q; }
};

// Linear warmup: tau = 1 at step 0, 0 from warmup_steps on.
struct TemperatureSchedule {
  long long warmup_steps{1};
};

inline double temperature(long long step, const TemperatureSchedule& schedule) {
  if (schedule.warmup_steps < 1) {
    throw ConfigError("temperature: warmup_steps must be positive, got " +
                      std::to_string(schedule.warmup_steps));
  }
  if (step < 0) throw ConfigError("temperature: negative step");
  if (step >= schedule.warmup_steps) return 0.0;
  return 1.0 - static_cast<double>(step) / static_cast<double>(schedule.warmup_steps);
}

// Hidden width of the squeeze FC: c reduced by 16, floored at 16 so tiny
// layers keep a usable bottleneck. This width is part of the parameter
// accounting convention.
inline int attention_hidden_width(int c) {
  return std::max((c + 15) / 16, 16);
}

template <typename T>
struct AttentionParams {
  std::string layer_id;
  int c{0};       // input channels seen by GAP
  int hidden{0};  // attention_hidden_width(c)
  int m{0};       // mixtures of the owning layer
  int q{0};       // logits per mixture row
  Mat<T> w1;            // hidden x c
  std::vector<T> b1;    // hidden
  Mat<T> w2;            // (m*q) x hidden
  std::vector<T> b2;    // m*q

  long long weight_count() const {
    return static_cast<long long>(w1.size()) + static_cast<long long>(b1.size()) +
           static_cast<long long>(w2.size()) + static_cast<long long>(b2.size());
  }
};

// Initializes one layer's attention module: gaussian first FC, zero-initialized
// second FC so pre-warmup logits are exactly zero and the warmup assignment
// dominates at step 0.
template <typename T>
AttentionParams<T> init_attention(const std::string& layer_id, int c, int m, int q,
                                  uint64_t seed) {
  if (c < 1 || m < 1 || q < 1) {
    throw ShapeError("attention '" + layer_id + "': c/m/q must be positive (" +
                     std::to_string(c) + "," + std::to_string(m) + "," +
                     std::to_string(q) + ")");
  }
  AttentionParams<T> p;
  p.layer_id = layer_id;
  p.c = c;
  p.hidden = attention_hidden_width(c);
  p.m = m;
  p.q = q;
  p.w1 = Mat<T>(p.hidden, c);
  p.b1.assign(p.hidden, T(0));
  p.w2 = Mat<T>(m * q, p.hidden);
  p.b2.assign(static_cast<size_t>(m) * q, T(0));
  Rng rng(Rng::mix(seed, "attention:" + layer_id));
  const double std_dev = std::sqrt(2.0 / static_cast<double>(c));
  for (auto& v : p.w1.a) v = static_cast<T>(std_dev * rng.next_gaussian());
  return p;
}

// One row of the chosen attention function: alpha = tau*beta + (1-tau)*f(z).
// For the contrasting function f(z) = z / sum|z|; a zero denominator is
// defined to give 0 (the exact limit the zero-initialized logits start from).
template <typename T>
void attention_apply(AttnFunc fn, const T* z, int q, double tau, const uint8_t* beta_row,
                     T* alpha) {
  const T t = static_cast<T>(tau);
  const T one_minus_t = static_cast<T>(1.0 - tau);
  switch (fn) {
    case AttnFunc::kCaf: {
      T denom = T(0);
      for (int j = 0; j < q; ++j) denom += std::abs(z[j]);
      for (int j = 0; j < q; ++j) {
        const T second = denom == T(0) ? T(0) : z[j] / denom;
        alpha[j] = t * static_cast<T>(beta_row[j]) + one_minus_t * second;
      }
      return;
    }
    case AttnFunc::kSoftmax: {
      T zmax = z[0];
      for (int j = 1; j < q; ++j) zmax = std::max(zmax, z[j]);
      T denom = T(0);
      for (int j = 0; j < q; ++j) denom += std::exp(z[j] - zmax);
      for (int j = 0; j < q; ++j) {
        alpha[j] = t * static_cast<T>(beta_row[j]) + one_minus_t * (std::exp(z[j] - zmax) / denom);
      }
      return;
    }
    case AttnFunc::kSigmoid: {
      for (int j = 0; j < q; ++j) {
        const T s = T(1) / (T(1) + std::exp(-z[j]));
        alpha[j] = t * static_cast<T>(beta_row[j]) + one_minus_t * s;
      }
      return;
    }
    case AttnFunc::kReluNorm: {
      T denom = T(0);
      for (int j = 0; j < q; ++j) denom += std::abs(z[j]);
      for (int j = 0; j < q; ++j) {
        const T r = z[j] > T(0) ? z[j] : T(0);
        const T second = denom == T(0) ? T(0) : r / denom;
        alpha[j] = t * static_cast<T>(beta_row[j]) + one_minus_t * second;
      }
      return;
    }
  }
  throw ConfigError("attention_apply: unknown attention function");
}

// Contrasting-driven attention on one row (convenience entry point).
template <typename T>
void caf(const T* z, int q, double tau, const uint8_t* beta_row, T* alpha) {
  attention_apply(AttnFunc::kCaf, z, q, tau, beta_row, alpha);
}

namespace detail {

template <typename T>
T sign_of(T v) {
  if (v > T(0)) return T(1);
  if (v < T(0)) return T(-1);
  return T(0);  // subgradient at the kink
}

}  // namespace detail

// Adjoint of attention_apply with respect to the logits. The beta term is
// constant in z, so everything scales by (1 - tau).
template <typename T>
void attention_apply_backward(AttnFunc fn, const T* grad_alpha, const T* z, int q,
                              double tau, T* grad_z) {
  const T one_minus_t = static_cast<T>(1.0 - tau);
  switch (fn) {
    case AttnFunc::kCaf: {
      // alpha_j = (1-tau) * z_j / S with S = sum|z|:
      // d alpha_j / d z_k = (1-tau) * (delta_jk / S - z_j * sign(z_k) / S^2)
      T denom = T(0);
      for (int j = 0; j < q; ++j) denom += std::abs(z[j]);
      if (denom == T(0)) {
        for (int j = 0; j < q; ++j) grad_z[j] = T(0);
        return;
      }
      T dot = T(0);  // sum_j grad_alpha_j * z_j
      for (int j = 0; j < q; ++j) dot += grad_alpha[j] * z[j];
      for (int j = 0; j < q; ++j) {
        grad_z[j] = one_minus_t *
                    (grad_alpha[j] / denom - dot * detail::sign_of(z[j]) / (denom * denom));
      }
      return;
    }
    case AttnFunc::kSoftmax: {
      T zmax = z[0];
      for (int j = 1; j < q; ++j) zmax = std::max(zmax, z[j]);
      T denom = T(0);
      for (int j = 0; j < q; ++j) denom += std::exp(z[j] - zmax);
      T dot = T(0);
      std::vector<T> s(static_cast<size_t>(q));
      for (int j = 0; j < q; ++j) {
        s[j] = std::exp(z[j] - zmax) / denom;
        dot += grad_alpha[j] * s[j];
      }
      for (int j = 0; j < q; ++j) {
        grad_z[j] = one_minus_t * s[j] * (grad_alpha[j] - dot);
      }
      return;
    }
    case AttnFunc::kSigmoid: {
      for (int j = 0; j < q; ++j) {
        const T s = T(1) / (T(1) + std::exp(-z[j]));
        grad_z[j] = one_minus_t * grad_alpha[j] * s * (T(1) - s);
      }
      return;
    }
    case AttnFunc::kReluNorm: {
      // alpha_j = (1-tau) * max(z_j, 0) / S with S = sum|z|.
      T denom = T(0);
      for (int j = 0; j < q; ++j) denom += std::abs(z[j]);
      if (denom == T(0)) {
        for (int j = 0; j < q; ++j) grad_z[j] = T(0);
        return;
      }
      T dot = T(0);  // sum_j grad_alpha_j * max(z_j, 0)
      for (int j = 0; j < q; ++j) dot += grad_alpha[j] * (z[j] > T(0) ? z[j] : T(0));
      for (int j = 0; j < q; ++j) {
        const T direct = z[j] > T(0) ? grad_alpha[j] / denom : T(0);
        grad_z[j] = one_minus_t * (direct - dot * detail::sign_of(z[j]) / (denom * denom));
      }
      return;
    }
  }
  throw ConfigError("attention_apply_backward: unknown attention function");
}

template <typename T>
void caf_backward(const T* grad_alpha, const T* z, int q, double tau, T* grad_z) {
  attention_apply_backward(AttnFunc::kCaf, grad_alpha, z, q, tau, grad_z);
}

// Builds the warmup assignment matrices for every member layer of a plan.
//
// one_to_one at b >= 1: group-wide mixture i owns cell i (no repetition;
//   cells beyond m_t stay unassigned). At b < 1 the first n group-wide
//   mixtures own distinct cells and every remaining mixture is assigned the
//   trailing e_z column.
// all_to_one: every real-cell entry is 1.
// k_to_one(k): mixture i owns cells i*k .. i*k+k-1 (requires k*m_t <= n).
// one_to_many(r): mixture i owns cell i/r (requires ceil(m_t/r) <= n).
std::vector<BetaAssignment> init_beta(const PartitionPlan& plan, const BetaSpec& spec);

// Cache of attention intermediates for one layer over one batch.
template <typename T>
struct AttentionCache {
  Mat<T> pooled;  // batch x c
  Mat<T> h1;      // batch x hidden (pre-ReLU)
  Mat<T> a1;      // batch x hidden (post-ReLU)
  Mat<T> z;       // batch x (m*q) logits
};

// Full module forward: GAP -> FC -> ReLU -> FC -> reshape to m rows of q
// logits -> attention function row by row. Returns one alpha matrix per
// batch element, packed as a (batch) x (m*q) matrix.
template <typename T>
Mat<T> attention_forward(const Tensor4<T>& x, const AttentionParams<T>& p, double tau,
                         const BetaAssignment& beta, AttnFunc fn,
                         AttentionCache<T>* cache = nullptr) {
  if (x.c != p.c) {
    throw ShapeError("attention '" + p.layer_id + "': input " + x.shape_str() +
                     " does not provide " + std::to_string(p.c) + " channels");
  }
  if (beta.m != p.m || beta.q != p.q) {
    throw ShapeError("attention '" + p.layer_id + "': assignment " + std::to_string(beta.m) +
                     "x" + std::to_string(beta.q) + " does not match module " +
                     std::to_string(p.m) + "x" + std::to_string(p.q));
  }
  AttentionCache<T> local;
  AttentionCache<T>& cc = cache ? *cache : local;
  cc.pooled = global_avg_pool(x);
  cc.h1 = fc_forward(cc.pooled, p.w1, p.b1);
  cc.a1 = relu(cc.h1);
  cc.z = fc_forward(cc.a1, p.w2, p.b2);

  Mat<T> alpha(x.n, p.m * p.q);
  for (int e = 0; e < x.n; ++e) {
    const T* zrow = cc.z.row(e);
    T* arow = alpha.row(e);
    for (int i = 0; i < p.m; ++i) {
      attention_apply(fn, zrow + static_cast<size_t>(i) * p.q, p.q, tau, beta.row(i),
                      arow + static_cast<size_t>(i) * p.q);
    }
  }
  return alpha;
}

template <typename T>
struct AttentionGrads {
  Mat<T> w1;
  std::vector<T> b1;
  Mat<T> w2;
  std::vector<T> b2;
};

template <typename T>
AttentionGrads<T> make_attention_grads(const AttentionParams<T>& p) {
  AttentionGrads<T> g;
  g.w1 = Mat<T>(p.w1.rows, p.w1.cols);
  g.b1.assign(p.b1.size(), T(0));
  g.w2 = Mat<T>(p.w2.rows, p.w2.cols);
  g.b2.assign(p.b2.size(), T(0));
  return g;
}

// Adjoint of attention_forward. Accumulates parameter gradients into `acc`
// and returns the gradient w.r.t. the layer input x (the attention path's
// contribution; the caller adds it to the convolution path's input gradient).
template <typename T>
Tensor4<T> attention_backward(const Mat<T>& grad_alpha, const AttentionParams<T>& p,
                              double tau, AttnFunc fn, const AttentionCache<T>& cache,
                              int x_h, int x_w, AttentionGrads<T>& acc) {
  const int batch = cache.pooled.rows;
  if (grad_alpha.rows != batch || grad_alpha.cols != p.m * p.q) {
    throw ShapeError("attention_backward '" + p.layer_id + "': grad " +
                     grad_alpha.shape_str() + " does not match batch " +
                     std::to_string(batch) + " x " + std::to_string(p.m * p.q));
  }
  Mat<T> grad_z(batch, p.m * p.q);
  for (int e = 0; e < batch; ++e) {
    const T* garow = grad_alpha.row(e);
    const T* zrow = cache.z.row(e);
    T* gzrow = grad_z.row(e);
    for (int i = 0; i < p.m; ++i) {
      const size_t off = static_cast<size_t>(i) * p.q;
      attention_apply_backward(fn, garow + off, zrow + off, p.q, tau, gzrow + off);
    }
  }
  FcGrads<T> g2 = fc_backward(grad_z, cache.a1, p.w2);
  Mat<T> grad_h1 = relu_backward(g2.input, cache.h1);
  FcGrads<T> g1 = fc_backward(grad_h1, cache.pooled, p.w1);

  emap(acc.w2) += emap(g2.weights);
  for (size_t i = 0; i < acc.b2.size(); ++i) acc.b2[i] += g2.bias[i];
  emap(acc.w1) += emap(g1.weights);
  for (size_t i = 0; i < acc.b1.size(); ++i) acc.b1[i] += g1.bias[i];

  return global_avg_pool_backward(g1.input, x_h, x_w);
}

}  // namespace kw
