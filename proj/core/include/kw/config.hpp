#pragma once

#include <string>

#include "kw/data.hpp"
#include "kw/manifest.hpp"
#include "kw/train.hpp"

// JSON run configuration with four sections:
//   model     input shape, classes, ordered layer list   (required)
//   warehouse budget, groups, warmup assignment, attention function
//   train     epochs, batch size, optimizer, warmup epochs, seed
//   data      synthetic set sizes, noise, seed
// Synthetic samples always take their shape and class count from the model
// section, so the two can never disagree. Unknown keys are rejected.

namespace kw {

struct RunConfig {
  Manifest manifest;
  TrainConfig train;
  SynthConfig data;
};

RunConfig parse_config(const std::string& json_text);
RunConfig load_config_file(const std::string& path);

}  // namespace kw
