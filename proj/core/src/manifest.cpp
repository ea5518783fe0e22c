#include "kw/manifest.hpp"

#include <set>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "kw/ops.hpp"

namespace kw {

std::string to_string(Binding b) {
  switch (b) {
    case Binding::kPlain: return "plain";
    case Binding::kWarehouse: return "warehouse";
    case Binding::kDyConv: return "dyconv";
  }
  return "?";
}

std::string to_string(AttnFunc f) {
  switch (f) {
    case AttnFunc::kCaf: return "caf";
    case AttnFunc::kSoftmax: return "softmax";
    case AttnFunc::kSigmoid: return "sigmoid";
    case AttnFunc::kReluNorm: return "relu_norm";
  }
  return "?";
}

std::string to_string(BetaStrategy s) {
  switch (s) {
    case BetaStrategy::kOneToOne: return "one_to_one";
    case BetaStrategy::kAllToOne: return "all_to_one";
    case BetaStrategy::kKToOne: return "k_to_one";
    case BetaStrategy::kOneToMany: return "one_to_many";
  }
  return "?";
}

Binding binding_from_string(const std::string& s) {
  if (s == "plain") return Binding::kPlain;
  if (s == "warehouse") return Binding::kWarehouse;
  if (s == "dyconv") return Binding::kDyConv;
  throw ConfigError("unknown binding '" + s + "' (expected plain|warehouse|dyconv)");
}

AttnFunc attn_func_from_string(const std::string& s) {
  if (s == "caf") return AttnFunc::kCaf;
  if (s == "softmax") return AttnFunc::kSoftmax;
  if (s == "sigmoid") return AttnFunc::kSigmoid;
  if (s == "relu_norm") return AttnFunc::kReluNorm;
  throw ConfigError("unknown attention function '" + s +
                    "' (expected caf|softmax|sigmoid|relu_norm)");
}

BetaStrategy beta_strategy_from_string(const std::string& s) {
  if (s == "one_to_one") return BetaStrategy::kOneToOne;
  if (s == "all_to_one") return BetaStrategy::kAllToOne;
  if (s == "k_to_one") return BetaStrategy::kKToOne;
  if (s == "one_to_many") return BetaStrategy::kOneToMany;
  throw ConfigError("unknown warmup assignment strategy '" + s +
                    "' (expected one_to_one|all_to_one|k_to_one|one_to_many)");
}

ResolvedModel validate(const Manifest& m) {
  if (m.input.c < 1 || m.input.h < 1 || m.input.w < 1) {
    throw ConfigError("manifest: input shape must be positive, got " +
                      std::to_string(m.input.c) + "x" + std::to_string(m.input.h) + "x" +
                      std::to_string(m.input.w));
  }
  if (m.num_classes < 2) {
    throw ConfigError("manifest: need at least 2 classes, got " +
                      std::to_string(m.num_classes));
  }
  if (m.layers.empty()) throw ConfigError("manifest: no layers");

  std::set<std::string> group_ids;
  for (const auto& g : m.groups) {
    if (g.id.empty()) throw ConfigError("manifest: empty group id");
    if (!group_ids.insert(g.id).second) {
      throw ConfigError("manifest: duplicate group id '" + g.id + "'");
    }
    if (g.divisors.spatial < 1 || g.divisors.c < 1 || g.divisors.f < 1) {
      throw ConfigError("manifest group '" + g.id + "': divisors must be >= 1");
    }
  }

  struct Out {
    int c, h, w;
  };
  std::unordered_map<std::string, Out> outputs;  // by layer id, as layers resolve

  ResolvedModel r;
  r.layers.reserve(m.layers.size());
  std::set<std::string> seen_ids;
  for (const auto& def : m.layers) {
    if (def.id.empty() || def.id == "input") {
      throw ConfigError("manifest: layer id '" + def.id + "' is reserved or empty");
    }
    if (!seen_ids.insert(def.id).second) {
      throw ConfigError("manifest: duplicate layer id '" + def.id + "'");
    }
    if (def.k < 1 || def.f < 1 || def.stride < 1 || def.pad < 0) {
      throw ConfigError("manifest layer '" + def.id + "': bad k/f/stride/pad");
    }
    if (def.binding == Binding::kWarehouse) {
      if (def.group.empty()) {
        throw ConfigError("manifest layer '" + def.id + "': warehouse binding needs a group");
      }
      if (!group_ids.count(def.group)) {
        throw ConfigError("manifest layer '" + def.id + "': unknown group '" + def.group + "'");
      }
    } else if (!def.group.empty()) {
      throw ConfigError("manifest layer '" + def.id + "': group set on " +
                        to_string(def.binding) + " binding");
    }
    if (def.binding == Binding::kDyConv) {
      if (def.dyconv_n < 1) {
        throw ConfigError("manifest layer '" + def.id + "': dyconv binding needs n >= 1");
      }
    } else if (def.dyconv_n != 0) {
      throw ConfigError("manifest layer '" + def.id + "': n set on " + to_string(def.binding) +
                        " binding");
    }

    Out src;
    if (def.input == "input") {
      src = {m.input.c, m.input.h, m.input.w};
    } else if (auto it = outputs.find(def.input); it != outputs.end()) {
      src = it->second;
    } else {
      throw ConfigError("manifest layer '" + def.id + "': input '" + def.input +
                        "' is not the model input or an earlier layer");
    }

    ResolvedLayer rl;
    rl.def = def;
    rl.spec = KernelSpec{def.id, def.k, src.c, def.f, def.stride, def.pad};
    rl.in_h = src.h;
    rl.in_w = src.w;
    rl.out_h = conv_out_extent(src.h, def.k, def.stride, def.pad);
    rl.out_w = conv_out_extent(src.w, def.k, def.stride, def.pad);
    if (rl.out_h < 1 || rl.out_w < 1) {
      throw ShapeError("manifest layer '" + def.id + "': kernel " + std::to_string(def.k) +
                       " (stride " + std::to_string(def.stride) + ", pad " +
                       std::to_string(def.pad) + ") collapses a " + std::to_string(src.h) +
                       "x" + std::to_string(src.w) + " input");
    }

    if (!def.add_from.empty()) {
      auto it = outputs.find(def.add_from);
      if (it == outputs.end()) {
        throw ConfigError("manifest layer '" + def.id + "': add_from '" + def.add_from +
                          "' is not an earlier layer");
      }
      const Out& a = it->second;
      if (a.c != def.f || a.h != rl.out_h || a.w != rl.out_w)
        throw ShapeError("manifest layer '" + def.id + "': residual source '" + def.add_from +
                         "' is " + std::to_string(a.c) + "x" + std::to_string(a.h) + "x" +
                         std::to_string(a.w) + " but this layer produces " +
                         std::to_string(def.f) + "x" + std::to_string(rl.out_h) + "x" +
                         std::to_string(rl.out_w));
    }

    outputs[def.id] = {def.f, rl.out_h, rl.out_w};
    r.layers.push_back(std::move(rl));
  }

  for (const auto& g : m.groups) {
    std::vector<KernelSpec> members;
    for (const auto& rl : r.layers) {
      if (rl.def.binding == Binding::kWarehouse && rl.def.group == g.id) {
        members.push_back(rl.spec);
      }
    }
    if (members.empty()) {
      throw ConfigError("manifest group '" + g.id + "': no member layers");
    }
    r.groups.emplace_back(g, std::move(members));
  }

  const Out& last = outputs.at(m.layers.back().id);
  r.feat_c = last.c;
  r.feat_h = last.h;
  r.feat_w = last.w;
  return r;
}

namespace {

nlohmann::json manifest_json(const Manifest& m) {
  nlohmann::json model;
  model["input"] = {{"c", m.input.c}, {"h", m.input.h}, {"w", m.input.w}};
  model["classes"] = m.num_classes;
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : m.layers) {
    nlohmann::json jl;
    jl["id"] = l.id;
    jl["binding"] = to_string(l.binding);
    jl["k"] = l.k;
    jl["f"] = l.f;
    jl["stride"] = l.stride;
    jl["pad"] = l.pad;
    jl["group"] = l.group;
    jl["n"] = l.dyconv_n;
    jl["bn"] = l.bn;
    jl["relu"] = l.relu;
    jl["input"] = l.input;
    jl["add_from"] = l.add_from;
    layers.push_back(std::move(jl));
  }
  model["layers"] = std::move(layers);

  nlohmann::json wh;
  wh["budget"] = m.budget.str();
  nlohmann::json groups = nlohmann::json::array();
  for (const auto& g : m.groups) {
    groups.push_back({{"id", g.id},
                      {"divisors",
                       {{"spatial", g.divisors.spatial}, {"c", g.divisors.c}, {"f", g.divisors.f}}}});
  }
  wh["groups"] = std::move(groups);
  wh["beta"] = {{"strategy", to_string(m.beta.strategy)}, {"param", m.beta.param}};
  wh["attention"] = to_string(m.attn);

  return nlohmann::json{{"model", std::move(model)}, {"warehouse", std::move(wh)}};
}

}  // namespace

std::string canonical_manifest(const Manifest& m) {
  // nlohmann objects keep keys sorted, so dump() is already canonical.
  return manifest_json(m).dump();
}

uint64_t fnv1a64(const std::string& bytes) {
  uint64_t h = 14695981039346656037ULL;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 1099511628211ULL;
  }
  return h;
}

uint64_t topology_hash(const Manifest& m) { return fnv1a64(canonical_manifest(m)); }

}  // namespace kw
