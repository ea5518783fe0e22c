#pragma once

#include <string>
#include <utility>
#include <vector>

#include "kw/rational.hpp"

namespace kw {

// One convolutional layer's static-kernel dimensions plus stride/pad plumbing.
// The kernel tensor is (f, c, k, k): f filters over c input channels with a
// square k x k spatial extent.
struct KernelSpec {
  std::string layer_id;
  int k{1};
  int c{1};
  int f{1};
  int stride{1};
  int pad{0};

  long long volume() const { return 1ll * k * k * c * f; }
  std::string shape_str() const;
};

// Uniform cell dimensions shared by every layer of one warehouse group;
// each dimension must divide the corresponding layer dimension.
struct CellShape {
  int k_e{1};
  int c_e{1};
  int f_e{1};

  long long volume() const { return 1ll * k_e * k_e * c_e * f_e; }
  std::string str() const;
  bool operator==(const CellShape&) const = default;
};

// Optional per-dimension divisors applied to the common dimension divisors,
// used to shrink cells below the gcd (e.g. halving c and f for b < 1).
struct ScaleDivisors {
  int spatial{1};
  int c{1};
  int f{1};
};

// The origin of one cell-sized block inside a kernel tensor (f, c, k, k).
struct CellBlock {
  int f0{0};
  int c0{0};
  int y0{0};
  int x0{0};
};

// A warehouse-sharing group: member layers in order, the common cell shape,
// per-layer cell counts m, the group total m_t, the exact budget b, and the
// warehouse cell count n = b * m_t.
struct PartitionPlan {
  std::string group_id;
  std::vector<KernelSpec> members;   // layer order preserved
  CellShape cell;
  std::vector<int> per_layer_m;      // aligned with members
  long long m_t{0};
  Rational b{1};
  long long n{0};
  bool zero_cell_enabled{false};     // true iff b < 1

  // Attention columns per mixture row: the real cells plus the e_z slot
  // when the zero cell is enabled.
  int q() const { return static_cast<int>(n) + (zero_cell_enabled ? 1 : 0); }

  int layer_index(const std::string& layer_id) const;  // throws PlanError if absent

  // Group-wide index of the first mixture belonging to member `idx`:
  // mixtures are numbered across the group in (layer order, tiling order).
  long long mixture_offset(int idx) const;
};

// Greatest common divisor of each kernel dimension across the group, divided
// by the per-dimension scale divisors. Throws PlanError when a divisor does
// not divide the gcd.
CellShape compute_cdd(const std::vector<KernelSpec>& specs, const ScaleDivisors& divisors = {});

// Builds the full plan for one group. Throws PlanError when b * m_t is not a
// positive integer; the message suggests the nearest valid budget.
PartitionPlan plan_partition(const std::string& group_id, const std::vector<KernelSpec>& group,
                             const Rational& b, const ScaleDivisors& divisors = {});

// An ordered group of layers produced by stage reassignment.
struct LayerGroup {
  std::string group_id;
  std::vector<KernelSpec> members;
};

// Splits an ordered layer list into explicit sharing groups. `grouping` maps
// layer_id -> group_id; an empty group_id marks the layer as excluded (it is
// dropped from the result). Every layer must appear in the map. Groups are
// emitted in order of first appearance.
std::vector<LayerGroup> reassign_stages(
    const std::vector<KernelSpec>& layers,
    const std::vector<std::pair<std::string, std::string>>& grouping);

// Enumerates the m disjoint cell-sized blocks covering the kernel volume.
// Tiling order is fixed: output-channel blocks outermost, then input-channel
// blocks, then spatial rows, then spatial columns — kernel cell j of a layer
// always means the same coordinates, which checkpoints and assignments rely on.
std::vector<CellBlock> tile_cells(const KernelSpec& spec, const CellShape& cell);

}  // namespace kw
