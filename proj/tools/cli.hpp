#pragma once

#include <string>

#include "kw/config.hpp"

// Command implementations behind the `kw` binary. Each cmd_* returns a
// process exit code; the binary maps thrown errors to exit codes in one
// place (0 ok, 2 config, 3 plan, 4 topology, 1 anything else).

namespace kw::cli {

// Where the run configuration comes from: a JSON file or a named preset.
// --budget overrides the budget from either source.
struct SourceOptions {
  std::string config_path;
  std::string preset;
  std::string budget;
};

RunConfig resolve_config(const SourceOptions& src);

struct PlanOptions {
  SourceOptions src;
  bool json{false};
};

struct TrainOptions {
  SourceOptions src;
  std::string save_path;  // checkpoint to write after training (optional)
  int epochs_override{-1};
  bool quiet{false};
};

struct GradcheckOptions {
  SourceOptions src;
  double tau{0.5};
  int batch{4};
  int samples_per_slice{25};
  double eps{1e-5};
  double threshold{1e-4};
  double denom_floor{1e-3};
  uint64_t seed{42};
};

struct AttnDumpOptions {
  SourceOptions src;
  std::string checkpoint;  // optional: fresh initialization when empty
  std::string out_dir{"."};
  double tau{-1.0};  // <0: derive from the config's training schedule
  int items{0};      // 0: the whole test split
};

int cmd_plan(const PlanOptions& opt);
int cmd_train(const TrainOptions& opt);
int cmd_gradcheck(const GradcheckOptions& opt);
int cmd_attn_dump(const AttnDumpOptions& opt);

}  // namespace kw::cli
