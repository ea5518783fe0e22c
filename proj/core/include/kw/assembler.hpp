#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

#include "kw/error.hpp"
#include "kw/ops.hpp"
#include "kw/partition.hpp"
#include "kw/tensor.hpp"
#include "kw/warehouse.hpp"

// Kernel assembly: a layer's static kernel is replaced by m mixtures, each a
// linear combination of the group's shared cells, w_i = sum_j alpha_ij e_j.
// The mixtures are tiled back into the full kernel shape along output
// channels, input channels, then spatial offsets. Assembly and its adjoint
// are single GEMMs against the contiguous cell storage.

namespace kw {

template <typename T>
struct AssembledKernel {
  Tensor4<T> kernel;              // f x c x k x k
  uint64_t warehouse_version{0};  // version of the warehouse the cells came from
};

namespace detail {

template <typename T>
using EStrideMap =
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>, 0,
               Eigen::OuterStride<>>;

// Copies one mixture row (cell-shaped fragment, f_e outermost) into its block
// of the kernel tensor.
template <typename T>
void scatter_block(const T* mixed, const CellShape& cell, const CellBlock& blk,
                   Tensor4<T>& kernel) {
  size_t src = 0;
  for (int df = 0; df < cell.f_e; ++df) {
    for (int dc = 0; dc < cell.c_e; ++dc) {
      T* dst = kernel.ptr(blk.f0 + df) +
               (static_cast<size_t>(blk.c0 + dc) * kernel.h + blk.y0) * kernel.w + blk.x0;
      for (int dy = 0; dy < cell.k_e; ++dy) {
        for (int dx = 0; dx < cell.k_e; ++dx) dst[dx] = mixed[src++];
        dst += kernel.w;
      }
    }
  }
}

// Inverse of scatter_block: gathers a kernel-gradient block into a row.
template <typename T>
void gather_block(const Tensor4<T>& grad_kernel, const CellShape& cell, const CellBlock& blk,
                  T* row) {
  size_t dst = 0;
  for (int df = 0; df < cell.f_e; ++df) {
    for (int dc = 0; dc < cell.c_e; ++dc) {
      const T* src = grad_kernel.ptr(blk.f0 + df) +
                     (static_cast<size_t>(blk.c0 + dc) * grad_kernel.h + blk.y0) * grad_kernel.w +
                     blk.x0;
      for (int dy = 0; dy < cell.k_e; ++dy) {
        for (int dx = 0; dx < cell.k_e; ++dx) row[dst++] = src[dx];
        src += grad_kernel.w;
      }
    }
  }
}

}  // namespace detail

// Assembles one layer's kernel for one batch element. `alpha` is the layer's
// m x q attention matrix in row-major order; when the plan carries a zero
// cell the trailing column multiplies an all-zero cell and contributes
// nothing, so only the n real columns enter the combination.
template <typename T>
AssembledKernel<T> assemble(const Warehouse<T>& wh, const PartitionPlan& plan,
                            const KernelSpec& spec, const T* alpha) {
  const size_t li = plan.layer_index(spec.layer_id);
  const int m = plan.per_layer_m[li];
  const int q = plan.q();
  const long long vol = plan.cell.volume();

  const std::vector<CellBlock> blocks = tile_cells(spec, plan.cell);
  if (static_cast<int>(blocks.size()) != m) {
    throw PlanError("assemble '" + spec.layer_id + "': tiling produced " +
                    std::to_string(blocks.size()) + " blocks but plan says m = " +
                    std::to_string(m));
  }

  // Mixed (m x vol) = alpha_real (m x n) * Cells (n x vol).
  detail::EStrideMap<T> a_real(alpha, m, plan.n, Eigen::OuterStride<>(q));
  Eigen::Map<const ERowMat<T>> cells(wh.cells.data(), plan.n, vol);
  ERowMat<T> mixed = a_real * cells;

  AssembledKernel<T> out;
  out.kernel = Tensor4<T>(spec.f, spec.c, spec.k, spec.k);
  out.warehouse_version = wh.version;
  for (int i = 0; i < m; ++i) {
    detail::scatter_block(mixed.data() + static_cast<size_t>(i) * vol, plan.cell, blocks[i],
                          out.kernel);
  }
  return out;
}

template <typename T>
AssembledKernel<T> assemble(const Warehouse<T>& wh, const PartitionPlan& plan,
                            const KernelSpec& spec, const Mat<T>& alpha) {
  const size_t li = plan.layer_index(spec.layer_id);
  if (alpha.rows != plan.per_layer_m[li] || alpha.cols != plan.q()) {
    throw ShapeError("assemble '" + spec.layer_id + "': alpha " + alpha.shape_str() +
                     " does not match m x q = " + std::to_string(plan.per_layer_m[li]) + "x" +
                     std::to_string(plan.q()));
  }
  return assemble(wh, plan, spec, alpha.a.data());
}

// Adjoint of assemble for one batch element. Writes the gradient w.r.t. the
// layer's alpha matrix (m x q row-major; any zero-cell column gets exactly 0
// because that cell is identically zero) and accumulates the gradient w.r.t.
// the shared cells into `grad_cells` (n x volume, the warehouse layout).
template <typename T>
void assemble_backward(const Tensor4<T>& grad_kernel, const Warehouse<T>& wh,
                       const PartitionPlan& plan, const KernelSpec& spec, const T* alpha,
                       T* grad_alpha, T* grad_cells) {
  const size_t li = plan.layer_index(spec.layer_id);
  const int m = plan.per_layer_m[li];
  const int q = plan.q();
  const long long vol = plan.cell.volume();
  if (grad_kernel.n != spec.f || grad_kernel.c != spec.c || grad_kernel.h != spec.k ||
      grad_kernel.w != spec.k) {
    throw ShapeError("assemble_backward '" + spec.layer_id + "': kernel grad " +
                     grad_kernel.shape_str() + " does not match " + spec.shape_str());
  }

  const std::vector<CellBlock> blocks = tile_cells(spec, plan.cell);
  ERowMat<T> gb(m, vol);
  for (int i = 0; i < m; ++i) {
    detail::gather_block(grad_kernel, plan.cell, blocks[i], gb.data() + static_cast<size_t>(i) * vol);
  }

  Eigen::Map<const ERowMat<T>> cells(wh.cells.data(), plan.n, vol);
  // grad_alpha_real (m x n) = Gb * Cells^T
  ERowMat<T> ga = gb * cells.transpose();
  for (int i = 0; i < m; ++i) {
    T* dst = grad_alpha + static_cast<size_t>(i) * q;
    const T* src = ga.data() + static_cast<size_t>(i) * plan.n;
    for (int j = 0; j < plan.n; ++j) dst[j] = src[j];
    if (plan.zero_cell_enabled) dst[q - 1] = T(0);
  }

  // grad_cells (n x vol) += alpha_real^T * Gb
  detail::EStrideMap<T> a_real(alpha, m, plan.n, Eigen::OuterStride<>(q));
  Eigen::Map<ERowMat<T>> gc(grad_cells, plan.n, vol);
  gc.noalias() += a_real.transpose() * gb;
}

// Degenerate dynamic convolution: a private bank of n full-size kernels per
// layer, combined with a single attention row (m = 1). Equivalent to a
// one-layer group whose cell is the whole kernel and whose budget is n.
template <typename T>
struct DyConvBank {
  std::string layer_id;
  KernelSpec spec;
  int n{0};
  std::vector<T> kernels;  // n x (f*c*k*k), kernel layout per row
  uint64_t version{0};
};

template <typename T>
DyConvBank<T> construct_dyconv_bank(const KernelSpec& spec, int n, uint64_t seed) {
  if (n < 1) throw PlanError("dyconv bank '" + spec.layer_id + "': n must be >= 1");
  DyConvBank<T> bank;
  bank.layer_id = spec.layer_id;
  bank.spec = spec;
  bank.n = n;
  bank.kernels.assign(static_cast<size_t>(n) * spec.volume(), T(0));
  Rng rng(Rng::mix(seed, "dyconv:" + spec.layer_id));
  const double fan_in = static_cast<double>(spec.c) * spec.k * spec.k;
  const double std_dev = std::sqrt(2.0 / fan_in);
  for (auto& v : bank.kernels) v = static_cast<T>(std_dev * rng.next_gaussian());
  return bank;
}

// W = sum_i alpha[i] * W_i for one batch element; alpha has length n.
template <typename T>
AssembledKernel<T> dyconv_assemble(const DyConvBank<T>& bank, const T* alpha) {
  const long long vol = bank.spec.volume();
  Eigen::Map<const ERowMat<T>> kernels(bank.kernels.data(), bank.n, vol);
  detail::EStrideMap<T> a(alpha, 1, bank.n, Eigen::OuterStride<>(bank.n));
  ERowMat<T> mixed = a * kernels;

  AssembledKernel<T> out;
  out.kernel = Tensor4<T>(bank.spec.f, bank.spec.c, bank.spec.k, bank.spec.k);
  out.warehouse_version = bank.version;
  std::copy(mixed.data(), mixed.data() + vol, out.kernel.data.begin());
  return out;
}

// Adjoint of dyconv_assemble; accumulates into grad_kernels (n x volume).
template <typename T>
void dyconv_assemble_backward(const Tensor4<T>& grad_kernel, const DyConvBank<T>& bank,
                              const T* alpha, T* grad_alpha, T* grad_kernels) {
  const long long vol = bank.spec.volume();
  if (static_cast<long long>(grad_kernel.data.size()) != vol) {
    throw ShapeError("dyconv_assemble_backward '" + bank.layer_id + "': kernel grad " +
                     grad_kernel.shape_str() + " does not match " + bank.spec.shape_str());
  }
  Eigen::Map<const ERowMat<T>> kernels(bank.kernels.data(), bank.n, vol);
  Eigen::Map<const ERowMat<T>> gk(grad_kernel.data.data(), 1, vol);
  ERowMat<T> ga = gk * kernels.transpose();  // 1 x n
  std::copy(ga.data(), ga.data() + bank.n, grad_alpha);

  detail::EStrideMap<T> a(alpha, 1, bank.n, Eigen::OuterStride<>(bank.n));
  Eigen::Map<ERowMat<T>> gks(grad_kernels, bank.n, vol);
  gks.noalias() += a.transpose() * gk;
}

}  // namespace kw
