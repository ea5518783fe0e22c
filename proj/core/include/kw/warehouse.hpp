#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "kw/error.hpp"
#include "kw/partition.hpp"
#include "kw/rng.hpp"

namespace kw {

// The learnable kernel cells of one sharing group. Cell storage is one
// contiguous row-major block of n cells x cell volume, which is the order
// cells serialize in and the matrix the assembler multiplies against.
//
// When the budget is below 1 the group also carries the constant zero cell
// e_z: it participates in attention normalization and in the one-to-one
// warmup assignment, but it is never assembled into kernels, never updated,
// and contributes zero parameters.
template <typename T>
struct Warehouse {
  std::string group_id;
  CellShape cell;
  long long n{0};
  bool zero_cell_enabled{false};
  std::vector<T> cells;      // n * cell.volume(), cell j at offset j * volume
  std::vector<T> zero_cell;  // materialized e_z view (all zeros) when enabled

  // Bumped by the optimizer whenever cells change; lets backward detect a
  // warehouse that was updated between forward and backward.
  uint64_t version{0};

  long long cell_volume() const { return cell.volume(); }

  T* cell_data(long long j) { return cells.data() + j * cell_volume(); }
  const T* cell_data(long long j) const { return cells.data() + j * cell_volume(); }
};

enum class InitScheme {
  kHeGaussian,  // zero-mean gaussian, per-cell std derived from the assigned layer's fan-in
  kZero,
};

// Builds and initializes the warehouse for a plan. Gaussian cells use
// std = sqrt(2 / fan_in) with fan_in = k*k*c of the layer whose warmup
// assignment owns that cell, so that at temperature 1 the network behaves
// like a conventionally initialized ConvNet. Cells beyond the group's
// mixture count (budgets above 1) fall back to the group's largest fan-in.
template <typename T>
Warehouse<T> construct_warehouse(const PartitionPlan& plan, InitScheme init, uint64_t seed) {
  Warehouse<T> wh;
  wh.group_id = plan.group_id;
  wh.cell = plan.cell;
  wh.n = plan.n;
  wh.zero_cell_enabled = plan.zero_cell_enabled;
  const long long volume = plan.cell.volume();
  wh.cells.assign(static_cast<size_t>(plan.n) * volume, T(0));
  if (wh.zero_cell_enabled) {
    wh.zero_cell.assign(static_cast<size_t>(volume), T(0));
  }
  if (init == InitScheme::kZero) return wh;

  // fan_in per cell: cells are owned by group-wide mixtures in order, and
  // mixture index maps to a member layer through the per-layer m prefix sums.
  long long largest_fan_in = 0;
  for (const KernelSpec& s : plan.members) {
    largest_fan_in = std::max(largest_fan_in, 1ll * s.k * s.k * s.c);
  }
  std::vector<long long> mixture_fan_in;
  mixture_fan_in.reserve(static_cast<size_t>(plan.m_t));
  for (size_t li = 0; li < plan.members.size(); ++li) {
    const KernelSpec& s = plan.members[li];
    const long long fan_in = 1ll * s.k * s.k * s.c;
    for (int i = 0; i < plan.per_layer_m[li]; ++i) mixture_fan_in.push_back(fan_in);
  }

  Rng rng(Rng::mix(seed, "warehouse:" + plan.group_id));
  for (long long j = 0; j < plan.n; ++j) {
    const long long fan_in = j < plan.m_t ? mixture_fan_in[static_cast<size_t>(j)]
                                          : largest_fan_in;
    const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
    T* cell = wh.cell_data(j);
    for (long long e = 0; e < volume; ++e) {
      cell[e] = static_cast<T>(std_dev * rng.next_gaussian());
    }
  }
  return wh;
}

// Read access to cell j using 1-based indexing (j in 1..n); j = n+1 addresses
// the zero cell when it is enabled.
template <typename T>
std::span<const T> cell_view(const Warehouse<T>& wh, long long j) {
  const size_t volume = static_cast<size_t>(wh.cell_volume());
  if (j >= 1 && j <= wh.n) {
    return std::span<const T>(wh.cell_data(j - 1), volume);
  }
  if (j == wh.n + 1 && wh.zero_cell_enabled) {
    return std::span<const T>(wh.zero_cell.data(), volume);
  }
  throw IndexError("warehouse " + wh.group_id + ": cell index " + std::to_string(j) +
                   " out of range (n = " + std::to_string(wh.n) +
                   (wh.zero_cell_enabled ? ", zero cell at n+1)" : ")"));
}

}  // namespace kw
