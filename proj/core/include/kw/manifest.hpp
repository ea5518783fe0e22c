#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "kw/attention.hpp"
#include "kw/partition.hpp"
#include "kw/rational.hpp"

// The manifest is the declarative model description: input shape, the
// ordered convolution layers with their bindings (plain static kernel,
// warehouse-backed dynamic kernel, or a private dynamic bank), the sharing
// groups with their cell scale divisors, and the global parameter budget.
// Validation resolves per-layer input channels and activation extents by
// propagating shapes through the layer graph.

namespace kw {

enum class Binding { kPlain, kWarehouse, kDyConv };

std::string to_string(Binding b);
std::string to_string(AttnFunc f);
std::string to_string(BetaStrategy s);
Binding binding_from_string(const std::string& s);
AttnFunc attn_func_from_string(const std::string& s);
BetaStrategy beta_strategy_from_string(const std::string& s);

struct InputShape {
  int c{0};
  int h{0};
  int w{0};
};

struct LayerDef {
  std::string id;
  Binding binding{Binding::kPlain};
  int k{0};
  int f{0};
  int stride{1};
  int pad{0};
  std::string group;     // warehouse binding only
  int dyconv_n{0};       // dyconv binding only
  bool bn{true};
  bool relu{true};
  std::string input;     // "input" or an earlier layer id
  std::string add_from;  // optional earlier layer id, added after BN before ReLU
};

struct GroupDef {
  std::string id;
  ScaleDivisors divisors;
};

struct Manifest {
  InputShape input;
  int num_classes{0};
  std::vector<LayerDef> layers;
  std::vector<GroupDef> groups;
  Rational budget{1, 1};
  BetaSpec beta;
  AttnFunc attn{AttnFunc::kCaf};
};

struct ResolvedLayer {
  LayerDef def;
  KernelSpec spec;  // input channel count filled in from the graph
  int in_h{0}, in_w{0};
  int out_h{0}, out_w{0};
};

struct ResolvedModel {
  std::vector<ResolvedLayer> layers;
  // Groups in manifest order, members in layer order.
  std::vector<std::pair<GroupDef, std::vector<KernelSpec>>> groups;
  int feat_c{0};  // channels entering the classifier head
  int feat_h{0};
  int feat_w{0};
};

// Checks the manifest (ConfigError on structural problems, ShapeError when
// propagation fails) and returns the resolved per-layer shapes and the
// group member lists.
ResolvedModel validate(const Manifest& m);

// Canonical serialized form of the topology-determining sections (model +
// warehouse): every field explicit, keys sorted, no whitespace. Two
// manifests describe the same topology iff their canonical forms match.
std::string canonical_manifest(const Manifest& m);

// FNV-1a (64-bit) over the canonical form; stored in checkpoints so a saved
// parameter blob is only ever loaded into a matching topology.
uint64_t fnv1a64(const std::string& bytes);
uint64_t topology_hash(const Manifest& m);

}  // namespace kw
