#pragma once

#include <string>
#include <vector>

#include "kw/manifest.hpp"
#include "kw/partition.hpp"

// Parameter accounting works from the manifest alone, so budgets can be
// compared without instantiating a model. The attention bucket includes the
// constant warmup assignment matrices (m x q per dynamic layer): they ship
// with the model, so honest comparisons against a static baseline must pay
// for them.

namespace kw {

struct ParamBreakdown {
  long long warehouse_cells{0};     // shared cells plus private dyconv banks
  long long attention_modules{0};   // w1 + b1 + w2 + b2 + warmup assignment
  long long plain_layers{0};        // static kernels plus every BN affine pair
  long long classifier{0};
  long long total{0};
};

ParamBreakdown count_params(const Manifest& m);

// Re-derives the per-group invariant n = b * m_t from the plans (exact
// rational arithmetic) and returns the common budget; throws PlanError if any
// group violates it or disagrees with the configured value.
Rational verify_budget(const std::vector<PartitionPlan>& plans, const Rational& b);

// Partition plans for every group of a manifest, in manifest group order.
std::vector<PartitionPlan> plan_manifest(const Manifest& m);

// Same architecture with every convolution bound to a plain static kernel.
Manifest to_plain_baseline(const Manifest& m);

// "11.69M" style rendering for reports.
std::string format_millions(long long params);

// 100 * (value - baseline) / baseline.
double percent_delta(long long value, long long baseline);

}  // namespace kw
