#pragma once

#include <Eigen/Core>
#include <cmath>
#include <utility>
#include <vector>

#include "kw/error.hpp"
#include "kw/tensor.hpp"

// Dense numeric kernels shared by the whole library.
//
// Convolution is cross-correlation without bias. The fast path is
// im2col + matrix multiply (Eigen, single-threaded and therefore
// run-to-run deterministic); the naive six-loop reference lives in the
// test tree and is authoritative for correctness.

namespace kw {

template <typename T>
using ERowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
Eigen::Map<ERowMat<T>> emap(Mat<T>& m) {
  return Eigen::Map<ERowMat<T>>(m.a.data(), m.rows, m.cols);
}

template <typename T>
Eigen::Map<const ERowMat<T>> emap(const Mat<T>& m) {
  return Eigen::Map<const ERowMat<T>>(m.a.data(), m.rows, m.cols);
}

namespace detail {

// Unfolds one batch element into a (c*k*k) x (oh*ow) patch matrix.
// Row index runs over (channel, kernel row, kernel col); column index over
// output positions in row-major order. Out-of-bounds taps read as zero.
template <typename T>
void im2col(const Tensor4<T>& input, int elem, int k, int stride, int pad,
            int oh, int ow, std::vector<T>& col) {
  const int c = input.c;
  const size_t npos = static_cast<size_t>(oh) * ow;
  col.assign(static_cast<size_t>(c) * k * k * npos, T(0));
  for (int ci = 0; ci < c; ++ci) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const size_t row = ((static_cast<size_t>(ci) * k + ky) * k + kx);
        T* dst = col.data() + row * npos;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= input.h) continue;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix < 0 || ix >= input.w) continue;
            dst[static_cast<size_t>(oy) * ow + ox] = input.at(elem, ci, iy, ix);
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-adds patch-matrix gradients back to the image.
template <typename T>
void col2im_add(const std::vector<T>& col, int elem, int k, int stride, int pad,
                int oh, int ow, Tensor4<T>& grad_input) {
  const int c = grad_input.c;
  const size_t npos = static_cast<size_t>(oh) * ow;
  for (int ci = 0; ci < c; ++ci) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const size_t row = ((static_cast<size_t>(ci) * k + ky) * k + kx);
        const T* src = col.data() + row * npos;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= grad_input.h) continue;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix < 0 || ix >= grad_input.w) continue;
            grad_input.at(elem, ci, iy, ix) += src[static_cast<size_t>(oy) * ow + ox];
          }
        }
      }
    }
  }
}

template <typename T>
void check_conv_args(const Tensor4<T>& input, const Tensor4<T>& kernel, int stride, int pad) {
  if (kernel.h != kernel.w) {
    throw ShapeError("conv2d: kernel " + kernel.shape_str() + " is not spatially square");
  }
  if (input.c != kernel.c) {
    throw ShapeError("conv2d: input " + input.shape_str() + " and kernel " +
                     kernel.shape_str() + " disagree on channel count");
  }
  if (stride < 1) throw ShapeError("conv2d: stride must be >= 1");
  if (pad < 0) throw ShapeError("conv2d: pad must be >= 0");
  const int k = kernel.h;
  if (input.h + 2 * pad < k || input.w + 2 * pad < k) {
    throw ShapeError("conv2d: input " + input.shape_str() + " smaller than kernel " +
                     kernel.shape_str() + " (stride " + std::to_string(stride) +
                     ", pad " + std::to_string(pad) + ")");
  }
}

}  // namespace detail

inline int conv_out_extent(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

// Cross-correlation of input (n,c,h,w) with kernel (f,c,k,k); no bias term.
template <typename T>
Tensor4<T> conv2d_forward(const Tensor4<T>& input, const Tensor4<T>& kernel,
                          int stride, int pad) {
  detail::check_conv_args(input, kernel, stride, pad);
  const int k = kernel.h;
  const int f = kernel.n;
  const int oh = conv_out_extent(input.h, k, stride, pad);
  const int ow = conv_out_extent(input.w, k, stride, pad);
  Tensor4<T> out(input.n, f, oh, ow);

  const long long ckk = static_cast<long long>(input.c) * k * k;
  const long long npos = static_cast<long long>(oh) * ow;
  Eigen::Map<const ERowMat<T>> km(kernel.data.data(), f, ckk);

  std::vector<T> col;
  for (int e = 0; e < input.n; ++e) {
    detail::im2col(input, e, k, stride, pad, oh, ow, col);
    Eigen::Map<const ERowMat<T>> cm(col.data(), ckk, npos);
    Eigen::Map<ERowMat<T>> om(out.ptr(e), f, npos);
    om.noalias() = km * cm;
  }
  return out;
}

// Exact adjoints of conv2d_forward: gradients w.r.t. the input and the kernel.
template <typename T>
std::pair<Tensor4<T>, Tensor4<T>> conv2d_backward(const Tensor4<T>& grad_out,
                                                  const Tensor4<T>& input,
                                                  const Tensor4<T>& kernel,
                                                  int stride, int pad) {
  detail::check_conv_args(input, kernel, stride, pad);
  const int k = kernel.h;
  const int f = kernel.n;
  const int oh = conv_out_extent(input.h, k, stride, pad);
  const int ow = conv_out_extent(input.w, k, stride, pad);
  if (grad_out.n != input.n || grad_out.c != f || grad_out.h != oh || grad_out.w != ow) {
    throw ShapeError("conv2d_backward: grad " + grad_out.shape_str() +
                     " does not match forward output (" + std::to_string(input.n) + "," +
                     std::to_string(f) + "," + std::to_string(oh) + "," +
                     std::to_string(ow) + ")");
  }

  Tensor4<T> grad_input(input.n, input.c, input.h, input.w);
  Tensor4<T> grad_kernel(f, kernel.c, k, k);

  const long long ckk = static_cast<long long>(input.c) * k * k;
  const long long npos = static_cast<long long>(oh) * ow;
  Eigen::Map<const ERowMat<T>> km(kernel.data.data(), f, ckk);
  Eigen::Map<ERowMat<T>> gkm(grad_kernel.data.data(), f, ckk);

  std::vector<T> col;
  std::vector<T> gcol(static_cast<size_t>(ckk) * npos);
  for (int e = 0; e < input.n; ++e) {
    Eigen::Map<const ERowMat<T>> gom(grad_out.ptr(e), f, npos);
    // Kernel gradient accumulates over batch elements in a fixed order.
    detail::im2col(input, e, k, stride, pad, oh, ow, col);
    Eigen::Map<const ERowMat<T>> cm(col.data(), ckk, npos);
    gkm.noalias() += gom * cm.transpose();
    // Input gradient via the transposed kernel, then fold back to image space.
    Eigen::Map<ERowMat<T>> gcm(gcol.data(), ckk, npos);
    gcm.noalias() = km.transpose() * gom;
    detail::col2im_add(gcol, e, k, stride, pad, oh, ow, grad_input);
  }
  return {std::move(grad_input), std::move(grad_kernel)};
}

// Per-channel mean over all spatial positions; output is (batch x channels).
template <typename T>
Mat<T> global_avg_pool(const Tensor4<T>& input) {
  if (input.h < 1 || input.w < 1) {
    throw ShapeError("global_avg_pool: empty spatial extent in " + input.shape_str());
  }
  Mat<T> out(input.n, input.c);
  const T inv = T(1) / static_cast<T>(input.plane());
  for (int e = 0; e < input.n; ++e) {
    for (int ci = 0; ci < input.c; ++ci) {
      T acc = T(0);
      for (int y = 0; y < input.h; ++y) {
        for (int x = 0; x < input.w; ++x) acc += input.at(e, ci, y, x);
      }
      out.at(e, ci) = acc * inv;
    }
  }
  return out;
}

template <typename T>
Tensor4<T> global_avg_pool_backward(const Mat<T>& grad_pooled, int h, int w) {
  Tensor4<T> grad(grad_pooled.rows, grad_pooled.cols, h, w);
  const T inv = T(1) / static_cast<T>(static_cast<size_t>(h) * w);
  for (int e = 0; e < grad.n; ++e) {
    for (int ci = 0; ci < grad.c; ++ci) {
      const T g = grad_pooled.at(e, ci) * inv;
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) grad.at(e, ci, y, x) = g;
      }
    }
  }
  return grad;
}

// Fully connected layer: Y = X * W^T + b with X (batch x in), W (out x in).
template <typename T>
Mat<T> fc_forward(const Mat<T>& x, const Mat<T>& weights, const std::vector<T>& bias) {
  if (x.cols != weights.cols) {
    throw ShapeError("fc: input " + x.shape_str() + " and weights " +
                     weights.shape_str() + " disagree on width");
  }
  if (static_cast<int>(bias.size()) != weights.rows) {
    throw ShapeError("fc: bias length " + std::to_string(bias.size()) +
                     " does not match weights " + weights.shape_str());
  }
  Mat<T> y(x.rows, weights.rows);
  emap(y).noalias() = emap(x) * emap(weights).transpose();
  Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> bm(bias.data(), bias.size());
  emap(y).rowwise() += bm;
  return y;
}

// Single-vector convenience overload.
template <typename T>
std::vector<T> fc_forward(const std::vector<T>& x, const Mat<T>& weights,
                          const std::vector<T>& bias) {
  Mat<T> xm(1, static_cast<int>(x.size()));
  xm.a = x;
  Mat<T> y = fc_forward(xm, weights, bias);
  return y.a;
}

template <typename T>
struct FcGrads {
  Mat<T> input;    // batch x in
  Mat<T> weights;  // out x in
  std::vector<T> bias;
};

template <typename T>
FcGrads<T> fc_backward(const Mat<T>& grad_y, const Mat<T>& x, const Mat<T>& weights) {
  if (grad_y.rows != x.rows || grad_y.cols != weights.rows) {
    throw ShapeError("fc_backward: grad " + grad_y.shape_str() + " does not match x " +
                     x.shape_str() + " / weights " + weights.shape_str());
  }
  FcGrads<T> g;
  g.input = Mat<T>(x.rows, x.cols);
  g.weights = Mat<T>(weights.rows, weights.cols);
  g.bias.assign(weights.rows, T(0));
  emap(g.input).noalias() = emap(grad_y) * emap(weights);
  emap(g.weights).noalias() = emap(grad_y).transpose() * emap(x);
  Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> bm(g.bias.data(), g.bias.size());
  bm = emap(grad_y).colwise().sum();
  return g;
}

// Elementwise max(x, 0); backward masks on the stored pre-activation
// (subgradient 0 at exactly zero).
template <typename T>
Mat<T> relu(const Mat<T>& x) {
  Mat<T> y = x;
  for (auto& v : y.a) v = v > T(0) ? v : T(0);
  return y;
}

template <typename T>
Tensor4<T> relu(const Tensor4<T>& x) {
  Tensor4<T> y = x;
  for (auto& v : y.data) v = v > T(0) ? v : T(0);
  return y;
}

template <typename T>
Mat<T> relu_backward(const Mat<T>& grad_y, const Mat<T>& pre) {
  if (!grad_y.same_shape(pre)) {
    throw ShapeError("relu_backward: grad " + grad_y.shape_str() + " vs pre " + pre.shape_str());
  }
  Mat<T> g = grad_y;
  for (size_t i = 0; i < g.a.size(); ++i) {
    if (!(pre.a[i] > T(0))) g.a[i] = T(0);
  }
  return g;
}

template <typename T>
Tensor4<T> relu_backward(const Tensor4<T>& grad_y, const Tensor4<T>& pre) {
  if (!grad_y.same_shape(pre)) {
    throw ShapeError("relu_backward: grad " + grad_y.shape_str() + " vs pre " + pre.shape_str());
  }
  Tensor4<T> g = grad_y;
  for (size_t i = 0; i < g.data.size(); ++i) {
    if (!(pre.data[i] > T(0))) g.data[i] = T(0);
  }
  return g;
}

template <typename T>
struct CeResult {
  T loss;       // mean over the batch
  Mat<T> grad;  // d(mean loss)/d(logits), batch factor folded in
};

// Numerically stable fused softmax + cross entropy.
template <typename T>
CeResult<T> cross_entropy(const Mat<T>& logits, const std::vector<int>& labels) {
  if (static_cast<int>(labels.size()) != logits.rows) {
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(logits.rows) + " logit rows");
  }
  CeResult<T> r;
  r.grad = Mat<T>(logits.rows, logits.cols);
  const T inv_batch = T(1) / static_cast<T>(logits.rows);
  T total = T(0);
  for (int e = 0; e < logits.rows; ++e) {
    const int label = labels[e];
    if (label < 0 || label >= logits.cols) {
      throw IndexError("cross_entropy: label " + std::to_string(label) +
                       " out of range for " + std::to_string(logits.cols) + " classes");
    }
    const T* z = logits.row(e);
    T zmax = z[0];
    for (int j = 1; j < logits.cols; ++j) zmax = std::max(zmax, z[j]);
    T sum = T(0);
    for (int j = 0; j < logits.cols; ++j) sum += std::exp(z[j] - zmax);
    const T lse = zmax + std::log(sum);
    total += lse - z[label];
    T* g = r.grad.row(e);
    for (int j = 0; j < logits.cols; ++j) {
      g[j] = std::exp(z[j] - zmax) / sum * inv_batch;
    }
    g[label] -= inv_batch;
  }
  r.loss = total * inv_batch;
  return r;
}

// Plain training-mode batch normalization: per-channel statistics over
// (batch, rows, cols), affine transform, no running statistics.
inline constexpr double kBnEpsilon = 1e-5;

template <typename T>
struct BnCache {
  std::vector<T> mean;     // per channel
  std::vector<T> inv_std;  // per channel, 1/sqrt(var + eps)
};

template <typename T>
Tensor4<T> batchnorm_forward(const Tensor4<T>& x, const std::vector<T>& gamma,
                             const std::vector<T>& beta, BnCache<T>& cache) {
  if (static_cast<int>(gamma.size()) != x.c || static_cast<int>(beta.size()) != x.c) {
    throw ShapeError("batchnorm: affine of size " + std::to_string(gamma.size()) +
                     " for " + std::to_string(x.c) + " channels");
  }
  const size_t count = static_cast<size_t>(x.n) * x.plane();
  if (count == 0) throw ShapeError("batchnorm: empty input " + x.shape_str());
  cache.mean.assign(x.c, T(0));
  cache.inv_std.assign(x.c, T(0));
  Tensor4<T> y(x.n, x.c, x.h, x.w);
  const T inv_count = T(1) / static_cast<T>(count);
  for (int ci = 0; ci < x.c; ++ci) {
    T mean = T(0);
    for (int e = 0; e < x.n; ++e) {
      for (int yy = 0; yy < x.h; ++yy) {
        for (int xx = 0; xx < x.w; ++xx) mean += x.at(e, ci, yy, xx);
      }
    }
    mean *= inv_count;
    T var = T(0);
    for (int e = 0; e < x.n; ++e) {
      for (int yy = 0; yy < x.h; ++yy) {
        for (int xx = 0; xx < x.w; ++xx) {
          const T d = x.at(e, ci, yy, xx) - mean;
          var += d * d;
        }
      }
    }
    var *= inv_count;
    const T inv_std = T(1) / std::sqrt(var + static_cast<T>(kBnEpsilon));
    cache.mean[ci] = mean;
    cache.inv_std[ci] = inv_std;
    for (int e = 0; e < x.n; ++e) {
      for (int yy = 0; yy < x.h; ++yy) {
        for (int xx = 0; xx < x.w; ++xx) {
          y.at(e, ci, yy, xx) = gamma[ci] * (x.at(e, ci, yy, xx) - mean) * inv_std + beta[ci];
        }
      }
    }
  }
  return y;
}

template <typename T>
struct BnGrads {
  Tensor4<T> input;
  std::vector<T> gamma;
  std::vector<T> beta;
};

template <typename T>
BnGrads<T> batchnorm_backward(const Tensor4<T>& grad_y, const Tensor4<T>& x,
                              const std::vector<T>& gamma, const BnCache<T>& cache) {
  if (!grad_y.same_shape(x)) {
    throw ShapeError("batchnorm_backward: grad " + grad_y.shape_str() + " vs input " +
                     x.shape_str());
  }
  BnGrads<T> g;
  g.input = Tensor4<T>(x.n, x.c, x.h, x.w);
  g.gamma.assign(x.c, T(0));
  g.beta.assign(x.c, T(0));
  const size_t count = static_cast<size_t>(x.n) * x.plane();
  const T inv_count = T(1) / static_cast<T>(count);
  for (int ci = 0; ci < x.c; ++ci) {
    const T mean = cache.mean[ci];
    const T inv_std = cache.inv_std[ci];
    // Channel-wise sums of g and g*x_hat; batch statistics couple the batch.
    T sum_g = T(0), sum_gx = T(0);
    for (int e = 0; e < x.n; ++e) {
      for (int yy = 0; yy < x.h; ++yy) {
        for (int xx = 0; xx < x.w; ++xx) {
          const T gy = grad_y.at(e, ci, yy, xx);
          const T xhat = (x.at(e, ci, yy, xx) - mean) * inv_std;
          sum_g += gy;
          sum_gx += gy * xhat;
        }
      }
    }
    g.beta[ci] = sum_g;
    g.gamma[ci] = sum_gx;
    const T scale = gamma[ci] * inv_std;
    for (int e = 0; e < x.n; ++e) {
      for (int yy = 0; yy < x.h; ++yy) {
        for (int xx = 0; xx < x.w; ++xx) {
          const T gy = grad_y.at(e, ci, yy, xx);
          const T xhat = (x.at(e, ci, yy, xx) - mean) * inv_std;
          g.input.at(e, ci, yy, xx) =
              scale * (gy - sum_g * inv_count - xhat * sum_gx * inv_count);
        }
      }
    }
  }
  return g;
}

}  // namespace kw
