#include <cstdio>
#include <exception>

#include "CLI11.hpp"

#include "cli.hpp"
#include "kw/error.hpp"

namespace {

template <typename Fn>
int run_guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const kw::ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const kw::PlanError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const kw::TopologyError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

void add_source_options(CLI::App* sub, kw::cli::SourceOptions& src) {
  sub->add_option("--config", src.config_path, "JSON run configuration file");
  sub->add_option("--preset", src.preset,
                  "built-in manifest: resnet18|resnet18-baseline|toy|toy2");
  sub->add_option("--budget", src.budget, "parameter budget as a rational, e.g. 1, 2, 1/2");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kernel warehouse: dynamic convolutions over shared kernel cells"};
  app.require_subcommand(1);

  kw::cli::PlanOptions plan_opt;
  CLI::App* plan = app.add_subcommand("plan", "partition kernels, report warehouse sizes and "
                                              "parameter counts");
  add_source_options(plan, plan_opt.src);
  plan->add_flag("--json", plan_opt.json, "machine-readable output");

  kw::cli::TrainOptions train_opt;
  CLI::App* train = app.add_subcommand("train", "train on synthetic data");
  add_source_options(train, train_opt.src);
  train->add_option("--save", train_opt.save_path, "write a checkpoint after training");
  train->add_option("--epochs", train_opt.epochs_override, "override configured epoch count");
  train->add_flag("--quiet", train_opt.quiet, "suppress per-epoch lines");

  kw::cli::GradcheckOptions gc_opt;
  CLI::App* gc = app.add_subcommand("gradcheck", "compare backprop against finite differences");
  add_source_options(gc, gc_opt.src);
  gc->add_option("--tau", gc_opt.tau, "temperature to check at");
  gc->add_option("--batch", gc_opt.batch, "batch size");
  gc->add_option("--samples", gc_opt.samples_per_slice, "scalars checked per parameter slice");
  gc->add_option("--eps", gc_opt.eps, "finite difference step");
  gc->add_option("--threshold", gc_opt.threshold, "relative error threshold");
  gc->add_option("--seed", gc_opt.seed, "randomization seed");

  kw::cli::AttnDumpOptions ad_opt;
  CLI::App* ad = app.add_subcommand("attn-dump", "write mean attention per mixture as CSV");
  add_source_options(ad, ad_opt.src);
  ad->add_option("--ckpt", ad_opt.checkpoint, "checkpoint to load (fresh init when omitted)");
  ad->add_option("--out", ad_opt.out_dir, "output directory");
  ad->add_option("--tau", ad_opt.tau, "temperature (default: end of configured schedule)");
  ad->add_option("--items", ad_opt.items, "number of test items (default: all)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (plan->parsed()) return run_guarded([&] { return kw::cli::cmd_plan(plan_opt); });
  if (train->parsed()) return run_guarded([&] { return kw::cli::cmd_train(train_opt); });
  if (gc->parsed()) return run_guarded([&] { return kw::cli::cmd_gradcheck(gc_opt); });
  if (ad->parsed()) return run_guarded([&] { return kw::cli::cmd_attn_dump(ad_opt); });
  return 2;
}
