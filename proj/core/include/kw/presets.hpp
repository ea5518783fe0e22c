#pragma once

#include <string>

#include "kw/manifest.hpp"

// Built-in manifests. The resnet18 preset is the reference 18-layer residual
// network with its 19 grouped convolutions split across four sharing groups
// (the stem stays plain); it exists for planning and parameter accounting.
// The toy presets are small enough to train and finite-difference on a desk.

namespace kw {

// Warehouse-bound residual-18 at the given budget. Groups 1-3 each cover one
// stage's remaining convolutions plus the next stage's entry convolution and
// its downsample; group 4 covers the last stage and divides its 3x3 kernels
// spatially. Budgets below 1 halve the cell channel extents.
Manifest resnet18_preset(const Rational& b);

// Same architecture with every convolution plain (the accounting baseline).
Manifest resnet18_baseline();

// Stem + three shared 3x3 layers on 3x16x16 inputs, 10 classes.
Manifest toy_preset(const Rational& b);

// Two shared layers with unequal kernel shapes on 2x6x6 inputs, 3 classes;
// small enough for exhaustive finite differences.
Manifest toy2_preset(const Rational& b);

// Lookup by CLI name: resnet18 | resnet18-baseline | toy | toy2.
Manifest preset_manifest(const std::string& name, const Rational& b);

}  // namespace kw
