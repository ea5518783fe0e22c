#include "kw/accounting.hpp"

#include <cstdio>

#include "kw/attention.hpp"

namespace kw {

std::vector<PartitionPlan> plan_manifest(const Manifest& m) {
  ResolvedModel r = validate(m);
  std::vector<PartitionPlan> plans;
  plans.reserve(r.groups.size());
  for (const auto& [def, members] : r.groups) {
    plans.push_back(plan_partition(def.id, members, m.budget, def.divisors));
  }
  return plans;
}

ParamBreakdown count_params(const Manifest& m) {
  ResolvedModel r = validate(m);
  ParamBreakdown out;

  std::vector<PartitionPlan> plans;
  for (const auto& [def, members] : r.groups) {
    PartitionPlan plan = plan_partition(def.id, members, m.budget, def.divisors);
    out.warehouse_cells += static_cast<long long>(plan.n) * plan.cell.volume();
    plans.push_back(std::move(plan));
  }

  for (const auto& rl : r.layers) {
    switch (rl.def.binding) {
      case Binding::kPlain:
        out.plain_layers += rl.spec.volume();
        break;
      case Binding::kWarehouse: {
        const PartitionPlan* plan = nullptr;
        for (const auto& p : plans) {
          if (p.group_id == rl.def.group) plan = &p;
        }
        if (!plan) {
          throw PlanError("count_params: layer '" + rl.def.id + "' references group '" +
                          rl.def.group + "' with no plan");
        }
        const size_t li = plan->layer_index(rl.def.id);
        const long long mm = plan->per_layer_m[li];
        const long long q = plan->q();
        const long long h = attention_hidden_width(rl.spec.c);
        // w1 + b1 + w2 + b2 + warmup assignment
        out.attention_modules +=
            static_cast<long long>(rl.spec.c) * h + h + (h + 2) * mm * q;
        break;
      }
      case Binding::kDyConv: {
        out.warehouse_cells += static_cast<long long>(rl.def.dyconv_n) * rl.spec.volume();
        const long long q = rl.def.dyconv_n;
        const long long h = attention_hidden_width(rl.spec.c);
        out.attention_modules += static_cast<long long>(rl.spec.c) * h + h + (h + 2) * q;
        break;
      }
    }
    if (rl.def.bn) out.plain_layers += 2LL * rl.spec.f;
  }

  out.classifier = static_cast<long long>(r.feat_c) * m.num_classes + m.num_classes;
  out.total = out.warehouse_cells + out.attention_modules + out.plain_layers + out.classifier;
  return out;
}

Rational verify_budget(const std::vector<PartitionPlan>& plans, const Rational& b) {
  for (const auto& plan : plans) {
    if (!(plan.b == b)) {
      throw PlanError("verify_budget group '" + plan.group_id + "': plan budget " +
                      plan.b.str() + " does not match requested " + b.str());
    }
    const long long expected = b.times_exact(plan.m_t, "verify_budget n = b*m_t");
    if (expected != plan.n) {
      throw PlanError("verify_budget group '" + plan.group_id + "': n = " +
                      std::to_string(plan.n) + " but b*m_t = " + b.str() + "*" +
                      std::to_string(plan.m_t) + " = " + std::to_string(expected));
    }
  }
  return b;
}

Manifest to_plain_baseline(const Manifest& m) {
  Manifest out = m;
  for (auto& l : out.layers) {
    l.binding = Binding::kPlain;
    l.group.clear();
    l.dyconv_n = 0;
  }
  out.groups.clear();
  return out;
}

std::string format_millions(long long params) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2fM", static_cast<double>(params) / 1e6);
  return buf;
}

double percent_delta(long long value, long long baseline) {
  return 100.0 * static_cast<double>(value - baseline) / static_cast<double>(baseline);
}

}  // namespace kw
