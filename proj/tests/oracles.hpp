#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "kw/assembler.hpp"
#include "kw/partition.hpp"
#include "kw/rng.hpp"
#include "kw/tensor.hpp"
#include "kw/warehouse.hpp"

// Slow, obviously-correct reference implementations. Every fast path in the
// library is validated against these; where the two disagree, the oracle
// wins. Nothing here is shared with the library under test.

namespace oracle {

// Plain six-loop cross-correlation, no bias. Out-of-bounds taps read zero.
template <typename T>
kw::Tensor4<T> naive_conv2d(const kw::Tensor4<T>& input, const kw::Tensor4<T>& kernel,
                            int stride, int pad) {
  const int k = kernel.h;
  const int oh = (input.h + 2 * pad - k) / stride + 1;
  const int ow = (input.w + 2 * pad - k) / stride + 1;
  kw::Tensor4<T> out(input.n, kernel.n, oh, ow);
  for (int e = 0; e < input.n; ++e) {
    for (int f = 0; f < kernel.n; ++f) {
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          T acc = T(0);
          for (int c = 0; c < input.c; ++c) {
            for (int ky = 0; ky < k; ++ky) {
              for (int kx = 0; kx < k; ++kx) {
                const int iy = oy * stride - pad + ky;
                const int ix = ox * stride - pad + kx;
                if (iy < 0 || iy >= input.h || ix < 0 || ix >= input.w) continue;
                acc += input.at(e, c, iy, ix) * kernel.at(f, c, ky, kx);
              }
            }
          }
          out.at(e, f, oy, ox) = acc;
        }
      }
    }
  }
  return out;
}

// Per-channel mean, scalar loops only.
template <typename T>
kw::Mat<T> naive_gap(const kw::Tensor4<T>& input) {
  kw::Mat<T> out(input.n, input.c);
  for (int e = 0; e < input.n; ++e) {
    for (int c = 0; c < input.c; ++c) {
      T acc = T(0);
      for (int y = 0; y < input.h; ++y) {
        for (int x = 0; x < input.w; ++x) acc += input.at(e, c, y, x);
      }
      out.at(e, c) = acc / static_cast<T>(input.h * input.w);
    }
  }
  return out;
}

// Y = X * W^T + b, scalar loops only.
template <typename T>
kw::Mat<T> naive_fc(const kw::Mat<T>& x, const kw::Mat<T>& w, const std::vector<T>& b) {
  kw::Mat<T> y(x.rows, w.rows);
  for (int r = 0; r < x.rows; ++r) {
    for (int o = 0; o < w.rows; ++o) {
      T acc = b[static_cast<size_t>(o)];
      for (int i = 0; i < x.cols; ++i) acc += x.at(r, i) * w.at(o, i);
      y.at(r, o) = acc;
    }
  }
  return y;
}

// One attention row: tau * beta_j + (1 - tau) * z_j / sum_p |z_p|, with the
// second term defined as zero when the denominator vanishes.
template <typename T>
std::vector<T> caf_row(const std::vector<T>& z, double tau, const std::vector<uint8_t>& beta) {
  T denom = T(0);
  for (const T v : z) denom += std::abs(v);
  std::vector<T> alpha(z.size(), T(0));
  for (size_t j = 0; j < z.size(); ++j) {
    const T second = denom == T(0) ? T(0) : z[j] / denom;
    alpha[j] = static_cast<T>(tau) * static_cast<T>(beta[j]) +
               static_cast<T>(1.0 - tau) * second;
  }
  return alpha;
}

// Kernel assembly by direct definition: every cell-sized block of the layer
// kernel is the alpha-weighted sum of the warehouse cells, one scalar at a
// time. The zero cell contributes nothing by construction.
template <typename T>
kw::Tensor4<T> naive_assemble(const kw::Warehouse<T>& wh, const kw::PartitionPlan& plan,
                              const kw::KernelSpec& spec, const kw::Mat<T>& alpha) {
  const std::vector<kw::CellBlock> blocks = kw::tile_cells(spec, plan.cell);
  kw::Tensor4<T> kernel(spec.f, spec.c, spec.k, spec.k);
  for (size_t i = 0; i < blocks.size(); ++i) {
    const kw::CellBlock& blk = blocks[i];
    for (long long j = 1; j <= wh.n; ++j) {
      const T a = alpha.at(static_cast<int>(i), static_cast<int>(j - 1));
      std::span<const T> cell = kw::cell_view(wh, j);
      size_t idx = 0;
      for (int fe = 0; fe < plan.cell.f_e; ++fe) {
        for (int ce = 0; ce < plan.cell.c_e; ++ce) {
          for (int ye = 0; ye < plan.cell.k_e; ++ye) {
            for (int xe = 0; xe < plan.cell.k_e; ++xe) {
              kernel.at(blk.f0 + fe, blk.c0 + ce, blk.y0 + ye, blk.x0 + xe) += a * cell[idx++];
            }
          }
        }
      }
    }
  }
  return kernel;
}

// Relative error with a floored denominator, the form every tolerance in the
// test tree is stated in.
inline double rel_err(double a, double b, double floor_val) {
  const double denom = std::max({std::abs(a), std::abs(b), floor_val});
  return std::abs(a - b) / denom;
}

// Central difference d(loss)/d(param) for one scalar reachable by reference.
template <typename T>
double central_diff(T& param, const std::function<double()>& loss, double eps) {
  const T saved = param;
  param = saved + static_cast<T>(eps);
  const double up = loss();
  param = saved - static_cast<T>(eps);
  const double down = loss();
  param = saved;
  return (up - down) / (2.0 * eps);
}

template <typename T>
kw::Tensor4<T> random_tensor(int n, int c, int h, int w, kw::Rng& rng, double scale = 1.0) {
  kw::Tensor4<T> t(n, c, h, w);
  for (auto& v : t.data) v = static_cast<T>(scale * rng.next_gaussian());
  return t;
}

template <typename T>
kw::Mat<T> random_mat(int rows, int cols, kw::Rng& rng, double scale = 1.0) {
  kw::Mat<T> m(rows, cols);
  for (auto& v : m.a) v = static_cast<T>(scale * rng.next_gaussian());
  return m;
}

template <typename T>
std::vector<T> random_vec(size_t len, kw::Rng& rng, double scale = 1.0) {
  std::vector<T> v(len);
  for (auto& x : v) x = static_cast<T>(scale * rng.next_gaussian());
  return v;
}

}  // namespace oracle
