#include "kw/partition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "kw/error.hpp"

namespace kw {

std::string KernelSpec::shape_str() const {
  return std::to_string(k) + "x" + std::to_string(k) + "x" + std::to_string(c) + "x" +
         std::to_string(f);
}

std::string CellShape::str() const {
  return std::to_string(k_e) + "x" + std::to_string(k_e) + "x" + std::to_string(c_e) + "x" +
         std::to_string(f_e);
}

int PartitionPlan::layer_index(const std::string& layer_id) const {
  for (size_t i = 0; i < members.size(); ++i) {
    if (members[i].layer_id == layer_id) return static_cast<int>(i);
  }
  throw PlanError("plan " + group_id + ": layer '" + layer_id + "' is not a member");
}

long long PartitionPlan::mixture_offset(int idx) const {
  if (idx < 0 || idx >= static_cast<int>(members.size())) {
    throw IndexError("plan " + group_id + ": member index " + std::to_string(idx) +
                     " out of range");
  }
  long long offset = 0;
  for (int i = 0; i < idx; ++i) offset += per_layer_m[i];
  return offset;
}

namespace {

void check_spec(const KernelSpec& s) {
  if (s.k < 1 || s.c < 1 || s.f < 1) {
    throw PlanError("layer '" + s.layer_id + "': kernel dimensions " + s.shape_str() +
                    " must be positive");
  }
}

int divide_gcd(int gcd_value, int divisor, const char* dim_name) {
  if (divisor < 1) {
    throw PlanError(std::string("scale divisor for ") + dim_name + " must be >= 1, got " +
                    std::to_string(divisor));
  }
  if (gcd_value % divisor != 0) {
    throw PlanError(std::string("scale divisor ") + std::to_string(divisor) + " for " +
                    dim_name + " does not divide the common divisor " +
                    std::to_string(gcd_value));
  }
  return gcd_value / divisor;
}

}  // namespace

CellShape compute_cdd(const std::vector<KernelSpec>& specs, const ScaleDivisors& divisors) {
  if (specs.empty()) {
    throw PlanError("compute_cdd: empty layer group");
  }
  int gk = 0, gc = 0, gf = 0;
  for (const KernelSpec& s : specs) {
    check_spec(s);
    gk = std::gcd(gk, s.k);
    gc = std::gcd(gc, s.c);
    gf = std::gcd(gf, s.f);
  }
  CellShape cell;
  cell.k_e = divide_gcd(gk, divisors.spatial, "the spatial extent");
  cell.c_e = divide_gcd(gc, divisors.c, "input channels");
  cell.f_e = divide_gcd(gf, divisors.f, "output channels");
  return cell;
}

PartitionPlan plan_partition(const std::string& group_id, const std::vector<KernelSpec>& group,
                             const Rational& b, const ScaleDivisors& divisors) {
  if (group.empty()) {
    throw PlanError("plan " + group_id + ": empty layer group");
  }
  if (b.num <= 0) {
    throw PlanError("plan " + group_id + ": budget must be positive, got " + b.str());
  }
  PartitionPlan plan;
  plan.group_id = group_id;
  plan.members = group;
  plan.cell = compute_cdd(group, divisors);
  plan.b = b;

  const long long cell_volume = plan.cell.volume();
  plan.per_layer_m.reserve(group.size());
  plan.m_t = 0;
  for (const KernelSpec& s : group) {
    // Each dimension of the cell divides the layer's dimension, so the
    // volume ratio is an exact integer.
    const long long m = s.volume() / cell_volume;
    plan.per_layer_m.push_back(static_cast<int>(m));
    plan.m_t += m;
  }

  if (!b.divides_exactly(plan.m_t)) {
    // Suggest the closest achievable budget for this group.
    const double exact = static_cast<double>(b.num) * static_cast<double>(plan.m_t) /
                         static_cast<double>(b.den);
    long long nearest_n = std::llround(exact);
    if (nearest_n < 1) nearest_n = 1;
    const Rational hint(nearest_n, plan.m_t);
    throw PlanError("plan " + group_id + ": budget " + b.str() + " gives a non-integral cell count n = " +
                    b.str() + " * " + std::to_string(plan.m_t) + "; nearest valid budget is " +
                    hint.str() + " (n = " + std::to_string(nearest_n) + ")");
  }
  plan.n = b.times_exact(plan.m_t, "plan " + group_id);
  if (plan.n < 1) {
    throw PlanError("plan " + group_id + ": budget " + b.str() + " yields n = " +
                    std::to_string(plan.n) + "; at least one cell is required");
  }
  plan.zero_cell_enabled = b < Rational(1);
  return plan;
}

std::vector<LayerGroup> reassign_stages(
    const std::vector<KernelSpec>& layers,
    const std::vector<std::pair<std::string, std::string>>& grouping) {
  std::set<std::string> seen_ids;
  for (const KernelSpec& s : layers) {
    if (!seen_ids.insert(s.layer_id).second) {
      throw PlanError("reassign_stages: duplicate layer id '" + s.layer_id + "'");
    }
  }
  // The map itself must be unambiguous.
  std::set<std::string> mapped;
  for (const auto& [layer_id, group_id] : grouping) {
    if (!mapped.insert(layer_id).second) {
      throw PlanError("reassign_stages: layer '" + layer_id + "' is mapped twice");
    }
  }

  std::vector<LayerGroup> groups;
  auto group_of = [&](const std::string& group_id) -> LayerGroup& {
    for (LayerGroup& g : groups) {
      if (g.group_id == group_id) return g;
    }
    groups.push_back(LayerGroup{group_id, {}});
    return groups.back();
  };

  for (const KernelSpec& s : layers) {
    auto it = std::find_if(grouping.begin(), grouping.end(),
                           [&](const auto& kv) { return kv.first == s.layer_id; });
    if (it == grouping.end()) {
      throw PlanError("reassign_stages: layer '" + s.layer_id +
                      "' is neither grouped nor marked excluded");
    }
    if (it->second.empty()) continue;  // explicitly excluded
    group_of(it->second).members.push_back(s);
  }
  return groups;
}

std::vector<CellBlock> tile_cells(const KernelSpec& spec, const CellShape& cell) {
  check_spec(spec);
  if (spec.k % cell.k_e != 0 || spec.c % cell.c_e != 0 || spec.f % cell.f_e != 0) {
    throw PlanError("tile_cells: cell " + cell.str() + " does not divide layer '" +
                    spec.layer_id + "' " + spec.shape_str());
  }
  std::vector<CellBlock> blocks;
  blocks.reserve(static_cast<size_t>(spec.volume() / cell.volume()));
  for (int f0 = 0; f0 < spec.f; f0 += cell.f_e) {
    for (int c0 = 0; c0 < spec.c; c0 += cell.c_e) {
      for (int y0 = 0; y0 < spec.k; y0 += cell.k_e) {
        for (int x0 = 0; x0 < spec.k; x0 += cell.k_e) {
          blocks.push_back(CellBlock{f0, c0, y0, x0});
        }
      }
    }
  }
  return blocks;
}

}  // namespace kw
