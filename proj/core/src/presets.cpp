#include "kw/presets.hpp"

#include "kw/accounting.hpp"

namespace kw {

namespace {

LayerDef conv(std::string id, Binding binding, std::string group, int k, int f, int stride,
              int pad, std::string input, std::string add_from = "", bool relu = true) {
  LayerDef l;
  l.id = std::move(id);
  l.binding = binding;
  l.group = std::move(group);
  l.k = k;
  l.f = f;
  l.stride = stride;
  l.pad = pad;
  l.input = std::move(input);
  l.add_from = std::move(add_from);
  l.relu = relu;
  return l;
}

}  // namespace

Manifest resnet18_preset(const Rational& b) {
  Manifest m;
  m.input = {3, 224, 224};
  m.num_classes = 1000;
  m.budget = b;

  const bool sub = b < Rational{1, 1};
  const int cd = sub ? 2 : 1;  // channel cell divisors for sub-unit budgets
  m.groups = {
      {"g1", {1, cd, cd}},
      {"g2", {1, cd, cd}},
      {"g3", {1, cd, cd}},
      {"g4", {3, cd, cd}},  // all-3x3 group: divide the kernel extent as well
  };

  auto& L = m.layers;
  L.push_back(conv("conv1", Binding::kPlain, "", 7, 64, 2, 3, "input"));
  // stage 1 (64 channels)
  L.push_back(conv("s1b1c1", Binding::kWarehouse, "g1", 3, 64, 1, 1, "conv1"));
  L.push_back(conv("s1b1c2", Binding::kWarehouse, "g1", 3, 64, 1, 1, "s1b1c1", "conv1"));
  L.push_back(conv("s1b2c1", Binding::kWarehouse, "g1", 3, 64, 1, 1, "s1b1c2"));
  L.push_back(conv("s1b2c2", Binding::kWarehouse, "g1", 3, 64, 1, 1, "s1b2c1", "s1b1c2"));
  // stage 2 (128 channels); the entry conv and downsample still see 64
  // channels, so they belong to group 1
  L.push_back(conv("s2b1ds", Binding::kWarehouse, "g1", 1, 128, 2, 0, "s1b2c2", "", false));
  L.push_back(conv("s2b1c1", Binding::kWarehouse, "g1", 3, 128, 2, 1, "s1b2c2"));
  L.push_back(conv("s2b1c2", Binding::kWarehouse, "g2", 3, 128, 1, 1, "s2b1c1", "s2b1ds"));
  L.push_back(conv("s2b2c1", Binding::kWarehouse, "g2", 3, 128, 1, 1, "s2b1c2"));
  L.push_back(conv("s2b2c2", Binding::kWarehouse, "g2", 3, 128, 1, 1, "s2b2c1", "s2b1c2"));
  // stage 3 (256 channels)
  L.push_back(conv("s3b1ds", Binding::kWarehouse, "g2", 1, 256, 2, 0, "s2b2c2", "", false));
  L.push_back(conv("s3b1c1", Binding::kWarehouse, "g2", 3, 256, 2, 1, "s2b2c2"));
  L.push_back(conv("s3b1c2", Binding::kWarehouse, "g3", 3, 256, 1, 1, "s3b1c1", "s3b1ds"));
  L.push_back(conv("s3b2c1", Binding::kWarehouse, "g3", 3, 256, 1, 1, "s3b1c2"));
  L.push_back(conv("s3b2c2", Binding::kWarehouse, "g3", 3, 256, 1, 1, "s3b2c1", "s3b1c2"));
  // stage 4 (512 channels)
  L.push_back(conv("s4b1ds", Binding::kWarehouse, "g3", 1, 512, 2, 0, "s3b2c2", "", false));
  L.push_back(conv("s4b1c1", Binding::kWarehouse, "g3", 3, 512, 2, 1, "s3b2c2"));
  L.push_back(conv("s4b1c2", Binding::kWarehouse, "g4", 3, 512, 1, 1, "s4b1c1", "s4b1ds"));
  L.push_back(conv("s4b2c1", Binding::kWarehouse, "g4", 3, 512, 1, 1, "s4b1c2"));
  L.push_back(conv("s4b2c2", Binding::kWarehouse, "g4", 3, 512, 1, 1, "s4b2c1", "s4b1c2"));
  return m;
}

Manifest resnet18_baseline() { return to_plain_baseline(resnet18_preset(Rational{1, 1})); }

Manifest toy_preset(const Rational& b) {
  Manifest m;
  m.input = {3, 16, 16};
  m.num_classes = 10;
  m.budget = b;
  const bool sub = b < Rational{1, 1};
  const int cd = sub ? 2 : 1;
  m.groups = {{"g1", {3, cd, cd}}};
  m.layers = {
      conv("stem", Binding::kPlain, "", 3, 16, 1, 1, "input"),
      conv("kw1", Binding::kWarehouse, "g1", 3, 16, 1, 1, "stem"),
      conv("kw2", Binding::kWarehouse, "g1", 3, 16, 2, 1, "kw1"),
      conv("kw3", Binding::kWarehouse, "g1", 3, 16, 1, 1, "kw2", "kw2"),
  };
  return m;
}

Manifest toy2_preset(const Rational& b) {
  Manifest m;
  m.input = {2, 6, 6};
  m.num_classes = 3;
  m.budget = b;
  const bool sub = b < Rational{1, 1};
  const int cd = sub ? 2 : 1;
  m.groups = {{"g1", {1, cd, cd}}};
  m.layers = {
      conv("kwA", Binding::kWarehouse, "g1", 3, 4, 1, 1, "input"),
      conv("kwB", Binding::kWarehouse, "g1", 3, 4, 1, 1, "kwA", "kwA"),
  };
  return m;
}

Manifest preset_manifest(const std::string& name, const Rational& b) {
  if (name == "resnet18") return resnet18_preset(b);
  if (name == "resnet18-baseline") return resnet18_baseline();
  if (name == "toy") return toy_preset(b);
  if (name == "toy2") return toy2_preset(b);
  throw ConfigError("unknown preset '" + name +
                    "' (expected resnet18|resnet18-baseline|toy|toy2)");
}

}  // namespace kw
