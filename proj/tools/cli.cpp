#include "cli.hpp"

#include <cstdio>
#include <filesystem>

#include <nlohmann/json.hpp>

#include "kw/accounting.hpp"
#include "kw/checkpoint.hpp"
#include "kw/csv.hpp"
#include "kw/presets.hpp"

namespace kw::cli {

RunConfig resolve_config(const SourceOptions& src) {
  if (src.config_path.empty() == src.preset.empty()) {
    throw ConfigError("provide exactly one of --config <file> or --preset <name>");
  }
  RunConfig rc;
  if (!src.config_path.empty()) {
    rc = load_config_file(src.config_path);
    if (!src.budget.empty()) rc.manifest.budget = parse_rational(src.budget);
  } else {
    const Rational b = src.budget.empty() ? Rational{1, 1} : parse_rational(src.budget);
    rc.manifest = preset_manifest(src.preset, b);
    rc.data.classes = rc.manifest.num_classes;
    rc.data.c = rc.manifest.input.c;
    rc.data.h = rc.manifest.input.h;
    rc.data.w = rc.manifest.input.w;
  }
  return rc;
}

int cmd_plan(const PlanOptions& opt) {
  RunConfig rc = resolve_config(opt.src);
  const Manifest& m = rc.manifest;
  std::vector<PartitionPlan> plans = plan_manifest(m);
  if (!plans.empty()) verify_budget(plans, m.budget);
  ParamBreakdown params = count_params(m);
  ParamBreakdown baseline = count_params(to_plain_baseline(m));
  const double delta = percent_delta(params.total, baseline.total);

  if (opt.json) {
    nlohmann::json out;
    out["budget"] = m.budget.str();
    nlohmann::json jgroups = nlohmann::json::array();
    for (const auto& plan : plans) {
      nlohmann::json jg;
      jg["id"] = plan.group_id;
      jg["cell"] = plan.cell.str();
      jg["m_t"] = plan.m_t;
      jg["n"] = plan.n;
      jg["b"] = plan.b.str();
      jg["zero_cell"] = plan.zero_cell_enabled;
      nlohmann::json jm = nlohmann::json::array();
      for (size_t i = 0; i < plan.members.size(); ++i) {
        jm.push_back({{"layer", plan.members[i].layer_id}, {"m", plan.per_layer_m[i]}});
      }
      jg["members"] = std::move(jm);
      jgroups.push_back(std::move(jg));
    }
    out["groups"] = std::move(jgroups);
    out["params"] = {{"warehouse_cells", params.warehouse_cells},
                     {"attention_modules", params.attention_modules},
                     {"plain_layers", params.plain_layers},
                     {"classifier", params.classifier},
                     {"total", params.total}};
    out["baseline_total"] = baseline.total;
    out["delta_percent"] = delta;
    std::printf("%s\n", out.dump(2).c_str());
    return 0;
  }

  std::printf("budget b = %s\n", m.budget.str().c_str());
  for (const auto& plan : plans) {
    std::printf("group %s: cell %s, m_t=%lld, n=%lld, zero cell: %s\n", plan.group_id.c_str(),
                plan.cell.str().c_str(), plan.m_t, plan.n,
                plan.zero_cell_enabled ? "yes" : "no");
    for (size_t i = 0; i < plan.members.size(); ++i) {
      std::printf("  %-8s %s  m=%d\n", plan.members[i].layer_id.c_str(),
                  plan.members[i].shape_str().c_str(), plan.per_layer_m[i]);
    }
  }
  if (plans.empty()) std::printf("no warehouse groups\n");
  std::printf("parameters:\n");
  std::printf("  warehouse cells    %12lld\n", params.warehouse_cells);
  std::printf("  attention modules  %12lld\n", params.attention_modules);
  std::printf("  plain layers       %12lld\n", params.plain_layers);
  std::printf("  classifier         %12lld\n", params.classifier);
  std::printf("  total              %12lld  (%s)\n", params.total,
              format_millions(params.total).c_str());
  std::printf("baseline (all plain) %10lld  (%s)\n", baseline.total,
              format_millions(baseline.total).c_str());
  std::printf("delta %+.3f%%\n", delta);
  return 0;
}

int cmd_train(const TrainOptions& opt) {
  RunConfig rc = resolve_config(opt.src);
  if (opt.epochs_override >= 0) rc.train.epochs = opt.epochs_override;

  ModelGraph<double> graph = build_model<double>(rc.manifest, rc.train.seed);
  SynthData<double> data = gen_synthetic<double>(rc.data);

  EpochCallback log;
  if (!opt.quiet) {
    log = [](const EpochMetrics& em) {
      std::printf("epoch %3d  loss %.4f  train_acc %.4f  test_acc %.4f  tau %.3f  lr %.5f\n",
                  em.epoch, em.mean_loss, em.train_acc, em.test_acc, em.tau, em.lr);
      std::fflush(stdout);
    };
  }
  std::vector<EpochMetrics> history = train(graph, data, rc.train, log);

  const long long warmup_steps =
      static_cast<long long>(rc.train.warmup_epochs) *
      ((data.train.size() + rc.train.batch_size - 1) / rc.train.batch_size);
  const long long total_steps =
      static_cast<long long>(rc.train.epochs) *
      ((data.train.size() + rc.train.batch_size - 1) / rc.train.batch_size);
  EvalResult<double> final_eval =
      evaluate(graph, data.test, tau_at(total_steps, warmup_steps), rc.train.batch_size);
  std::printf("final test accuracy %.4f (loss %.4f)\n", final_eval.accuracy, final_eval.loss);

  if (!opt.save_path.empty()) {
    save_checkpoint(opt.save_path, graph);
    std::printf("saved checkpoint to %s\n", opt.save_path.c_str());
  }
  return 0;
}

int cmd_gradcheck(const GradcheckOptions& opt) {
  RunConfig rc = resolve_config(opt.src);
  ModelGraph<double> graph = build_model<double>(rc.manifest, rc.train.seed);
  randomize_for_gradcheck(graph, opt.seed);

  SynthConfig dc = rc.data;
  dc.train_size = std::max(opt.batch, dc.classes);
  dc.test_size = 1;
  SynthData<double> data = gen_synthetic<double>(dc);
  std::vector<int> order(static_cast<size_t>(opt.batch));
  std::iota(order.begin(), order.end(), 0);
  Tensor4<double> xb = gather_batch(data.train.x, order, 0, opt.batch);
  std::vector<int> yb(data.train.y.begin(), data.train.y.begin() + opt.batch);

  GradcheckResult res = gradcheck(graph, xb, yb, opt.tau, opt.samples_per_slice, opt.eps,
                                  opt.threshold, opt.denom_floor, opt.seed);
  std::printf("checked %lld scalars, max rel err %.3e (threshold %.1e, tau %.2f)\n", res.checked,
              res.max_rel_err, opt.threshold, opt.tau);
  for (const auto& f : res.failures) std::printf("  MISMATCH %s\n", f.c_str());
  if (!res.ok()) {
    std::fprintf(stderr, "gradcheck failed: %zu scalars disagree with finite differences\n",
                 res.failures.size());
    return 1;
  }
  std::printf("gradcheck ok\n");
  return 0;
}

int cmd_attn_dump(const AttnDumpOptions& opt) {
  RunConfig rc = resolve_config(opt.src);
  ModelGraph<double> graph = build_model<double>(rc.manifest, rc.train.seed);
  if (!opt.checkpoint.empty()) load_checkpoint(opt.checkpoint, graph);

  double tau = opt.tau;
  if (tau < 0.0) {
    // The checkpoint format stores no step counter: derive the operating
    // temperature from the configured schedule, as of the end of training.
    const long long steps_per_epoch =
        (rc.data.train_size + rc.train.batch_size - 1) / rc.train.batch_size;
    tau = tau_at(static_cast<long long>(rc.train.epochs) * steps_per_epoch,
                 static_cast<long long>(rc.train.warmup_epochs) * steps_per_epoch);
  }

  SynthData<double> data = gen_synthetic<double>(rc.data);
  Tensor4<double> items = data.test.x;
  if (opt.items > 0 && opt.items < items.n) {
    Tensor4<double> subset(opt.items, items.c, items.h, items.w);
    for (int i = 0; i < opt.items; ++i) {
      Tensor4<double> one = slice_batch(items, i);
      paste_batch(subset, i, one);
    }
    items = std::move(subset);
  }
  std::vector<AttentionStats> stats = collect_attention_stats(graph, items, tau);
  std::printf("tau %.4f over %d items\n", tau, items.n);

  std::filesystem::create_directories(opt.out_dir);
  // One CSV per sharing group (member layers stacked in manifest order) and
  // one per private dynamic layer.
  for (size_t gi = 0; gi < graph.plans.size(); ++gi) {
    const PartitionPlan& plan = graph.plans[gi];
    std::vector<AttentionStats> rows;
    for (const auto& st : stats) {
      if (st.group_id == plan.group_id) rows.push_back(st);
    }
    const std::string path = opt.out_dir + "/attn_" + plan.group_id + ".csv";
    write_text_file(path, attention_stats_csv(rows, plan.n, plan.zero_cell_enabled));
    std::printf("wrote %s\n", path.c_str());
  }
  for (const auto& st : stats) {
    if (!st.group_id.empty()) continue;  // grouped layers already written
    const std::string path = opt.out_dir + "/attn_" + st.layer_id + ".csv";
    write_text_file(path, attention_stats_csv({st}, st.q, false));
    std::printf("wrote %s\n", path.c_str());
  }
  return 0;
}

}  // namespace kw::cli
