#pragma once

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "kw/error.hpp"
#include "kw/assembler.hpp"
#include "kw/attention.hpp"
#include "kw/manifest.hpp"
#include "kw/ops.hpp"
#include "kw/partition.hpp"
#include "kw/rng.hpp"
#include "kw/tensor.hpp"
#include "kw/warehouse.hpp"

// The executable model: an ordered list of convolution layers (each plain,
// warehouse-backed, or privately dynamic), shared warehouses, and a
// GAP + linear classifier head. Dynamic layers assemble a separate kernel per
// batch element from that element's attention output.

namespace kw {

template <typename T>
struct LayerState {
  ResolvedLayer rl;
  int group_index{-1};       // warehouse binding: index into plans/warehouses
  int index_in_group{-1};    // warehouse binding: member position within the group
  Tensor4<T> plain_kernel;   // plain binding
  DyConvBank<T> bank;        // dyconv binding
  AttentionParams<T> attn;   // dynamic bindings
  BetaAssignment beta;       // dynamic bindings
  std::vector<T> gamma;      // BN scale, size f (empty when bn disabled)
  std::vector<T> bn_beta;    // BN shift

  bool dynamic() const { return rl.def.binding != Binding::kPlain; }
};

template <typename T>
struct ModelGraph {
  Manifest manifest;
  ResolvedModel resolved;
  std::vector<PartitionPlan> plans;      // per group, manifest group order
  std::vector<Warehouse<T>> warehouses;  // parallel to plans
  std::vector<LayerState<T>> layers;
  Mat<T> fc_w;        // classes x feat_c
  std::vector<T> fc_b;
  uint64_t topo_hash{0};
  std::unordered_map<std::string, int> layer_index;  // id -> position
};

template <typename T>
ModelGraph<T> build_model(const Manifest& manifest, uint64_t seed) {
  ModelGraph<T> g;
  g.manifest = manifest;
  g.resolved = validate(manifest);
  g.topo_hash = topology_hash(manifest);

  std::unordered_map<std::string, int> group_index;
  for (size_t gi = 0; gi < g.resolved.groups.size(); ++gi) {
    const auto& [def, members] = g.resolved.groups[gi];
    PartitionPlan plan = plan_partition(def.id, members, manifest.budget, def.divisors);
    g.warehouses.push_back(
        construct_warehouse<T>(plan, InitScheme::kHeGaussian, seed));
    group_index[def.id] = static_cast<int>(gi);
    g.plans.push_back(std::move(plan));
  }
  // Warmup assignments per group, handed out to member layers below.
  std::vector<std::vector<BetaAssignment>> group_betas;
  for (const auto& plan : g.plans) group_betas.push_back(init_beta(plan, manifest.beta));

  std::vector<int> group_cursor(g.plans.size(), 0);
  for (const auto& rl : g.resolved.layers) {
    LayerState<T> ls;
    ls.rl = rl;
    switch (rl.def.binding) {
      case Binding::kPlain: {
        ls.plain_kernel = Tensor4<T>(rl.spec.f, rl.spec.c, rl.spec.k, rl.spec.k);
        Rng rng(Rng::mix(seed, "plain:" + rl.def.id));
        const double std_dev =
            std::sqrt(2.0 / (static_cast<double>(rl.spec.c) * rl.spec.k * rl.spec.k));
        for (auto& v : ls.plain_kernel.data) v = static_cast<T>(std_dev * rng.next_gaussian());
        break;
      }
      case Binding::kWarehouse: {
        ls.group_index = group_index.at(rl.def.group);
        ls.index_in_group = group_cursor[ls.group_index]++;
        const PartitionPlan& plan = g.plans[ls.group_index];
        const int m = plan.per_layer_m[ls.index_in_group];
        ls.attn = init_attention<T>(rl.def.id, rl.spec.c, m, plan.q(), seed);
        ls.beta = group_betas[ls.group_index][ls.index_in_group];
        break;
      }
      case Binding::kDyConv: {
        ls.bank = construct_dyconv_bank<T>(rl.spec, rl.def.dyconv_n, seed);
        ls.attn = init_attention<T>(rl.def.id, rl.spec.c, 1, rl.def.dyconv_n, seed);
        ls.beta.m = 1;
        ls.beta.q = rl.def.dyconv_n;
        ls.beta.mat.assign(static_cast<size_t>(rl.def.dyconv_n), 0);
        ls.beta.mat[0] = 1;
        break;
      }
    }
    if (rl.def.bn) {
      ls.gamma.assign(static_cast<size_t>(rl.spec.f), T(1));
      ls.bn_beta.assign(static_cast<size_t>(rl.spec.f), T(0));
    }
    g.layer_index[rl.def.id] = static_cast<int>(g.layers.size());
    g.layers.push_back(std::move(ls));
  }

  g.fc_w = Mat<T>(manifest.num_classes, g.resolved.feat_c);
  g.fc_b.assign(static_cast<size_t>(manifest.num_classes), T(0));
  Rng rng(Rng::mix(seed, "classifier"));
  const double std_dev = std::sqrt(2.0 / static_cast<double>(g.resolved.feat_c));
  for (auto& v : g.fc_w.a) v = static_cast<T>(std_dev * rng.next_gaussian());
  return g;
}

// ---------------------------------------------------------------------------
// Forward / backward

template <typename T>
struct LayerTape {
  Tensor4<T> input;       // activation entering the layer
  Mat<T> alpha;           // batch x (m*q), dynamic bindings
  AttentionCache<T> attn_cache;
  std::vector<AssembledKernel<T>> kernels;  // per batch element, dynamic bindings
  Tensor4<T> conv_out;    // pre-BN
  BnCache<T> bn_cache;
  Tensor4<T> pre_relu;    // post-BN, post-residual
  Tensor4<T> out;         // published activation
};

template <typename T>
struct ForwardTape {
  Tensor4<T> input;
  std::vector<LayerTape<T>> layers;
  Mat<T> pooled;
  Mat<T> logits;
  double tau{0.0};
};

template <typename T>
Mat<T> model_forward(const ModelGraph<T>& g, const Tensor4<T>& x, double tau,
                     ForwardTape<T>* tape_out = nullptr) {
  ForwardTape<T> local;
  ForwardTape<T>& tape = tape_out ? *tape_out : local;
  tape.input = x;
  tape.tau = tau;
  tape.layers.assign(g.layers.size(), LayerTape<T>{});

  for (size_t li = 0; li < g.layers.size(); ++li) {
    const LayerState<T>& ls = g.layers[li];
    LayerTape<T>& lt = tape.layers[li];
    const Tensor4<T>& src = ls.rl.def.input == "input"
                                ? tape.input
                                : tape.layers[g.layer_index.at(ls.rl.def.input)].out;
    lt.input = src;

    if (ls.dynamic()) {
      lt.alpha = attention_forward(src, ls.attn, tau, ls.beta, g.manifest.attn, &lt.attn_cache);
      lt.conv_out = Tensor4<T>(src.n, ls.rl.spec.f, ls.rl.out_h, ls.rl.out_w);
      lt.kernels.reserve(src.n);
      for (int e = 0; e < src.n; ++e) {
        AssembledKernel<T> kern =
            ls.rl.def.binding == Binding::kWarehouse
                ? assemble(g.warehouses[ls.group_index], g.plans[ls.group_index], ls.rl.spec,
                           lt.alpha.row(e))
                : dyconv_assemble(ls.bank, lt.alpha.row(e));
        Tensor4<T> xe = slice_batch(src, e);
        Tensor4<T> oe = conv2d_forward(xe, kern.kernel, ls.rl.spec.stride, ls.rl.spec.pad);
        paste_batch(lt.conv_out, e, oe);
        lt.kernels.push_back(std::move(kern));
      }
    } else {
      lt.conv_out = conv2d_forward(src, ls.plain_kernel, ls.rl.spec.stride, ls.rl.spec.pad);
    }

    if (ls.rl.def.bn) {
      lt.pre_relu = batchnorm_forward(lt.conv_out, ls.gamma, ls.bn_beta, lt.bn_cache);
    } else {
      lt.pre_relu = lt.conv_out;
    }
    if (!ls.rl.def.add_from.empty()) {
      const Tensor4<T>& res = tape.layers[g.layer_index.at(ls.rl.def.add_from)].out;
      if (!lt.pre_relu.same_shape(res)) {
        throw ShapeError("layer '" + ls.rl.def.id + "': residual shape mismatch " +
                         lt.pre_relu.shape_str() + " vs " + res.shape_str());
      }
      for (size_t i = 0; i < lt.pre_relu.data.size(); ++i) lt.pre_relu.data[i] += res.data[i];
    }
    lt.out = ls.rl.def.relu ? relu(lt.pre_relu) : lt.pre_relu;
  }

  tape.pooled = global_avg_pool(tape.layers.back().out);
  tape.logits = fc_forward(tape.pooled, g.fc_w, g.fc_b);
  return tape.logits;
}

template <typename T>
struct ModelGrads {
  struct LayerG {
    AttentionGrads<T> attn;
    Tensor4<T> plain_kernel;
    std::vector<T> bank;
    std::vector<T> gamma, bn_beta;
  };
  std::vector<std::vector<T>> warehouse_cells;  // per group, n x cell volume
  std::vector<LayerG> layers;
  Mat<T> fc_w;
  std::vector<T> fc_b;
};

template <typename T>
ModelGrads<T> make_model_grads(const ModelGraph<T>& g) {
  ModelGrads<T> mg;
  for (const auto& wh : g.warehouses) mg.warehouse_cells.emplace_back(wh.cells.size(), T(0));
  mg.layers.resize(g.layers.size());
  for (size_t li = 0; li < g.layers.size(); ++li) {
    const LayerState<T>& ls = g.layers[li];
    auto& lg = mg.layers[li];
    if (ls.dynamic()) lg.attn = make_attention_grads(ls.attn);
    if (ls.rl.def.binding == Binding::kPlain) {
      lg.plain_kernel = Tensor4<T>(ls.rl.spec.f, ls.rl.spec.c, ls.rl.spec.k, ls.rl.spec.k);
    }
    if (ls.rl.def.binding == Binding::kDyConv) lg.bank.assign(ls.bank.kernels.size(), T(0));
    lg.gamma.assign(ls.gamma.size(), T(0));
    lg.bn_beta.assign(ls.bn_beta.size(), T(0));
  }
  mg.fc_w = Mat<T>(g.fc_w.rows, g.fc_w.cols);
  mg.fc_b.assign(g.fc_b.size(), T(0));
  return mg;
}

// Backpropagates from d(loss)/d(logits). Parameter gradients are accumulated
// into a fresh ModelGrads; activations gradients flow through residual edges
// and the attention path of each dynamic layer.
template <typename T>
ModelGrads<T> model_backward(const ModelGraph<T>& g, const ForwardTape<T>& tape,
                             const Mat<T>& grad_logits) {
  ModelGrads<T> mg = make_model_grads(g);

  FcGrads<T> fcg = fc_backward(grad_logits, tape.pooled, g.fc_w);
  mg.fc_w = std::move(fcg.weights);
  mg.fc_b = std::move(fcg.bias);

  std::vector<Tensor4<T>> grad_act(g.layers.size());
  auto accum = [](Tensor4<T>& dst, const Tensor4<T>& add) {
    if (dst.data.empty()) {
      dst = add;
      return;
    }
    for (size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += add.data[i];
  };

  const LayerTape<T>& last = tape.layers.back();
  grad_act.back() = global_avg_pool_backward(fcg.input, last.out.h, last.out.w);

  Tensor4<T> grad_input;  // gradient w.r.t. the model input (discarded)
  for (size_t li = g.layers.size(); li-- > 0;) {
    const LayerState<T>& ls = g.layers[li];
    const LayerTape<T>& lt = tape.layers[li];
    auto& lg = mg.layers[li];
    Tensor4<T>& gout = grad_act[li];
    if (gout.data.empty()) gout = Tensor4<T>(lt.out.n, lt.out.c, lt.out.h, lt.out.w);

    Tensor4<T> g_pre = ls.rl.def.relu ? relu_backward(gout, lt.pre_relu) : std::move(gout);
    if (!ls.rl.def.add_from.empty()) {
      accum(grad_act[g.layer_index.at(ls.rl.def.add_from)], g_pre);
    }
    Tensor4<T> g_conv;
    if (ls.rl.def.bn) {
      BnGrads<T> bg = batchnorm_backward(g_pre, lt.conv_out, ls.gamma, lt.bn_cache);
      g_conv = std::move(bg.input);
      lg.gamma = std::move(bg.gamma);
      lg.bn_beta = std::move(bg.beta);
    } else {
      g_conv = std::move(g_pre);
    }

    Tensor4<T> g_in;
    if (ls.dynamic()) {
      const int batch = lt.input.n;
      Mat<T> grad_alpha(batch, ls.attn.m * ls.attn.q);
      g_in = Tensor4<T>(lt.input.n, lt.input.c, lt.input.h, lt.input.w);
      for (int e = 0; e < batch; ++e) {
        Tensor4<T> xe = slice_batch(lt.input, e);
        Tensor4<T> ge = slice_batch(g_conv, e);
        auto [gx, gk] = conv2d_backward(ge, xe, lt.kernels[e].kernel, ls.rl.spec.stride,
                                        ls.rl.spec.pad);
        paste_batch(g_in, e, gx);
        if (ls.rl.def.binding == Binding::kWarehouse) {
          assemble_backward(gk, g.warehouses[ls.group_index], g.plans[ls.group_index],
                            ls.rl.spec, lt.alpha.row(e), grad_alpha.row(e),
                            mg.warehouse_cells[ls.group_index].data());
        } else {
          dyconv_assemble_backward(gk, ls.bank, lt.alpha.row(e), grad_alpha.row(e),
                                   lg.bank.data());
        }
      }
      Tensor4<T> g_attn = attention_backward(grad_alpha, ls.attn, tape.tau, g.manifest.attn,
                                             lt.attn_cache, lt.input.h, lt.input.w, lg.attn);
      for (size_t i = 0; i < g_in.data.size(); ++i) g_in.data[i] += g_attn.data[i];
    } else {
      auto [gx, gk] =
          conv2d_backward(g_conv, lt.input, ls.plain_kernel, ls.rl.spec.stride, ls.rl.spec.pad);
      lg.plain_kernel = std::move(gk);
      g_in = std::move(gx);
    }

    if (ls.rl.def.input == "input") {
      accum(grad_input, g_in);
    } else {
      accum(grad_act[g.layer_index.at(ls.rl.def.input)], g_in);
    }
  }
  return mg;
}

// ---------------------------------------------------------------------------
// Canonical parameter traversal
//
// Single source of truth for the order in which scalars appear in
// checkpoints, the optimizer state, and gradient checks:
//   1. warehouse cells, group by group
//   2. attention modules (w1, b1, w2, b2) for every dynamic layer, in order
//   3. plain kernels / private banks, in order
//   4. BN gamma then beta, in order
//   5. classifier weight, bias

template <typename T>
struct ParamSlice {
  T* data;
  size_t size;
  bool decay;  // participates in weight decay
  std::string tag;
};

template <typename T>
std::vector<ParamSlice<T>> param_slices(ModelGraph<T>& g) {
  std::vector<ParamSlice<T>> out;
  for (size_t gi = 0; gi < g.warehouses.size(); ++gi) {
    auto& wh = g.warehouses[gi];
    out.push_back({wh.cells.data(), wh.cells.size(), true, "warehouse:" + wh.group_id + "/cells"});
  }
  for (auto& ls : g.layers) {
    if (!ls.dynamic()) continue;
    const std::string p = "layer:" + ls.rl.def.id + "/attn.";
    out.push_back({ls.attn.w1.a.data(), ls.attn.w1.a.size(), true, p + "w1"});
    out.push_back({ls.attn.b1.data(), ls.attn.b1.size(), false, p + "b1"});
    out.push_back({ls.attn.w2.a.data(), ls.attn.w2.a.size(), true, p + "w2"});
    out.push_back({ls.attn.b2.data(), ls.attn.b2.size(), false, p + "b2"});
  }
  for (auto& ls : g.layers) {
    if (ls.rl.def.binding == Binding::kPlain) {
      out.push_back({ls.plain_kernel.data.data(), ls.plain_kernel.data.size(), true,
                     "layer:" + ls.rl.def.id + "/kernel"});
    } else if (ls.rl.def.binding == Binding::kDyConv) {
      out.push_back({ls.bank.kernels.data(), ls.bank.kernels.size(), true,
                     "layer:" + ls.rl.def.id + "/bank"});
    }
  }
  for (auto& ls : g.layers) {
    if (ls.gamma.empty()) continue;
    out.push_back({ls.gamma.data(), ls.gamma.size(), false, "layer:" + ls.rl.def.id + "/bn.gamma"});
    out.push_back(
        {ls.bn_beta.data(), ls.bn_beta.size(), false, "layer:" + ls.rl.def.id + "/bn.beta"});
  }
  out.push_back({g.fc_w.a.data(), g.fc_w.a.size(), true, "classifier/w"});
  out.push_back({g.fc_b.data(), g.fc_b.size(), false, "classifier/b"});
  return out;
}

// Gradient slices in the identical order; tags repeat the parameter tags so
// tests can assert the two traversals stay aligned.
template <typename T>
std::vector<ParamSlice<T>> grad_slices(ModelGrads<T>& mg, const ModelGraph<T>& g) {
  std::vector<ParamSlice<T>> out;
  for (size_t gi = 0; gi < g.warehouses.size(); ++gi) {
    auto& cells = mg.warehouse_cells[gi];
    out.push_back(
        {cells.data(), cells.size(), true, "warehouse:" + g.warehouses[gi].group_id + "/cells"});
  }
  for (size_t li = 0; li < g.layers.size(); ++li) {
    const auto& ls = g.layers[li];
    if (!ls.dynamic()) continue;
    auto& ag = mg.layers[li].attn;
    const std::string p = "layer:" + ls.rl.def.id + "/attn.";
    out.push_back({ag.w1.a.data(), ag.w1.a.size(), true, p + "w1"});
    out.push_back({ag.b1.data(), ag.b1.size(), false, p + "b1"});
    out.push_back({ag.w2.a.data(), ag.w2.a.size(), true, p + "w2"});
    out.push_back({ag.b2.data(), ag.b2.size(), false, p + "b2"});
  }
  for (size_t li = 0; li < g.layers.size(); ++li) {
    const auto& ls = g.layers[li];
    if (ls.rl.def.binding == Binding::kPlain) {
      auto& pk = mg.layers[li].plain_kernel;
      out.push_back({pk.data.data(), pk.data.size(), true, "layer:" + ls.rl.def.id + "/kernel"});
    } else if (ls.rl.def.binding == Binding::kDyConv) {
      auto& bk = mg.layers[li].bank;
      out.push_back({bk.data(), bk.size(), true, "layer:" + ls.rl.def.id + "/bank"});
    }
  }
  for (size_t li = 0; li < g.layers.size(); ++li) {
    const auto& ls = g.layers[li];
    if (ls.gamma.empty()) continue;
    auto& lg = mg.layers[li];
    out.push_back({lg.gamma.data(), lg.gamma.size(), false, "layer:" + ls.rl.def.id + "/bn.gamma"});
    out.push_back(
        {lg.bn_beta.data(), lg.bn_beta.size(), false, "layer:" + ls.rl.def.id + "/bn.beta"});
  }
  out.push_back({mg.fc_w.a.data(), mg.fc_w.a.size(), true, "classifier/w"});
  out.push_back({mg.fc_b.data(), mg.fc_b.size(), false, "classifier/b"});
  return out;
}

template <typename T>
long long learnable_param_count(ModelGraph<T>& g) {
  long long total = 0;
  for (const auto& s : param_slices(g)) total += static_cast<long long>(s.size);
  return total;
}

// Perturbs every parameter so finite differences probe a generic point: the
// shipped init zero-fills the second attention FC, which puts the contrasting
// normalization exactly on its |z| kink.
template <typename T>
void randomize_for_gradcheck(ModelGraph<T>& g, uint64_t seed) {
  Rng rng(Rng::mix(seed, "gradcheck"));
  for (auto& s : param_slices(g)) {
    for (size_t i = 0; i < s.size; ++i) s.data[i] += static_cast<T>(0.2 * rng.next_gaussian());
  }
}

}  // namespace kw
