#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "kw/error.hpp"

namespace kw {

// Dense rank-4 tensor, row-major over (batch, channel, row, col).
// The scalar type is a template parameter: float for training speed,
// double for gradient-check mode. Layout is fixed, so two tensors with
// equal dims and data compare element-exact.
template <typename T>
struct Tensor4 {
  int n{0}, c{0}, h{0}, w{0};
  std::vector<T> data;

  Tensor4() = default;
  Tensor4(int n_, int c_, int h_, int w_)
      : n(n_), c(c_), h(h_), w(w_), data(checked_size(n_, c_, h_, w_), T(0)) {}

  size_t size() const { return data.size(); }
  size_t plane() const { return static_cast<size_t>(h) * w; }          // one channel
  size_t volume() const { return static_cast<size_t>(c) * h * w; }     // one batch element

  T& at(int i, int j, int y, int x) { return data[index(i, j, y, x)]; }
  const T& at(int i, int j, int y, int x) const { return data[index(i, j, y, x)]; }

  T* ptr(int i = 0) { return data.data() + static_cast<size_t>(i) * volume(); }
  const T* ptr(int i = 0) const { return data.data() + static_cast<size_t>(i) * volume(); }

  std::string shape_str() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," +
           std::to_string(h) + "," + std::to_string(w) + ")";
  }

  bool same_shape(const Tensor4& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }

 private:
  static size_t checked_size(int n_, int c_, int h_, int w_) {
    if (n_ < 0 || c_ < 0 || h_ < 0 || w_ < 0) {
      throw ShapeError("tensor: negative dimension (" + std::to_string(n_) + "," +
                       std::to_string(c_) + "," + std::to_string(h_) + "," +
                       std::to_string(w_) + ")");
    }
    return static_cast<size_t>(n_) * c_ * h_ * w_;
  }

  size_t index(int i, int j, int y, int x) const {
    return ((static_cast<size_t>(i) * c + j) * h + y) * w + x;
  }
};

// Copies batch element i into a standalone 1-element tensor.
template <typename T>
Tensor4<T> slice_batch(const Tensor4<T>& t, int i) {
  if (i < 0 || i >= t.n) {
    throw IndexError("slice_batch: index " + std::to_string(i) + " out of range for " + t.shape_str());
  }
  Tensor4<T> out(1, t.c, t.h, t.w);
  const T* src = t.ptr(i);
  std::copy(src, src + t.volume(), out.data.begin());
  return out;
}

// Copies a 1-element tensor into batch slot i of dst.
template <typename T>
void paste_batch(Tensor4<T>& dst, int i, const Tensor4<T>& src) {
  if (src.n != 1 || src.c != dst.c || src.h != dst.h || src.w != dst.w) {
    throw ShapeError("paste_batch: slice " + src.shape_str() + " does not fit " + dst.shape_str());
  }
  std::copy(src.data.begin(), src.data.end(), dst.data.begin() + static_cast<size_t>(i) * dst.volume());
}

// Dense row-major matrix used for pooled features, FC weights, logits,
// and per-layer attention matrices.
template <typename T>
struct Mat {
  int rows{0}, cols{0};
  std::vector<T> a;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), a(checked_size(r, c), T(0)) {}

  T& at(int r, int c) { return a[static_cast<size_t>(r) * cols + c]; }
  const T& at(int r, int c) const { return a[static_cast<size_t>(r) * cols + c]; }
  T* row(int r) { return a.data() + static_cast<size_t>(r) * cols; }
  const T* row(int r) const { return a.data() + static_cast<size_t>(r) * cols; }
  size_t size() const { return a.size(); }

  std::string shape_str() const {
    return "(" + std::to_string(rows) + "x" + std::to_string(cols) + ")";
  }

  bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }

 private:
  static size_t checked_size(int r, int c) {
    if (r < 0 || c < 0) {
      throw ShapeError("matrix: negative dimension (" + std::to_string(r) + "x" +
                       std::to_string(c) + ")");
    }
    return static_cast<size_t>(r) * c;
  }
};

}  // namespace kw
