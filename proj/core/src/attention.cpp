#include "kw/attention.hpp"

#include <string>

namespace kw {

namespace {

const char* strategy_name(BetaStrategy s) {
  switch (s) {
    case BetaStrategy::kOneToOne: return "one_to_one";
    case BetaStrategy::kAllToOne: return "all_to_one";
    case BetaStrategy::kKToOne: return "k_to_one";
    case BetaStrategy::kOneToMany: return "one_to_many";
  }
  return "?";
}

}  // namespace

std::vector<BetaAssignment> init_beta(const PartitionPlan& plan, const BetaSpec& spec) {
  const int n = plan.n;
  const int m_t = plan.m_t;
  const int q = plan.q();

  // Feasibility is a property of the whole group, checked up front so the
  // error names the group rather than an arbitrary member layer.
  switch (spec.strategy) {
    case BetaStrategy::kOneToOne:
    case BetaStrategy::kAllToOne:
      break;
    case BetaStrategy::kKToOne: {
      if (spec.param < 1) {
        throw PlanError("init_beta group '" + plan.group_id + "': k_to_one needs k >= 1, got " +
                        std::to_string(spec.param));
      }
      if (static_cast<long long>(spec.param) * m_t > n) {
        throw PlanError("init_beta group '" + plan.group_id + "': k_to_one(k=" +
                        std::to_string(spec.param) + ") needs k*m_t <= n but " +
                        std::to_string(spec.param) + "*" + std::to_string(m_t) + " > " +
                        std::to_string(n));
      }
      break;
    }
    case BetaStrategy::kOneToMany: {
      if (spec.param < 1) {
        throw PlanError("init_beta group '" + plan.group_id + "': one_to_many needs r >= 1, got " +
                        std::to_string(spec.param));
      }
      const int needed = (m_t + spec.param - 1) / spec.param;
      if (needed > n) {
        throw PlanError("init_beta group '" + plan.group_id + "': one_to_many(r=" +
                        std::to_string(spec.param) + ") needs ceil(m_t/r) <= n but ceil(" +
                        std::to_string(m_t) + "/" + std::to_string(spec.param) + ") = " +
                        std::to_string(needed) + " > " + std::to_string(n));
      }
      break;
    }
  }

  std::vector<BetaAssignment> out;
  out.reserve(plan.members.size());
  for (size_t li = 0; li < plan.members.size(); ++li) {
    const int m = plan.per_layer_m[li];
    const int offset = plan.mixture_offset(li);  // group-wide index of this layer's first mixture
    BetaAssignment a;
    a.m = m;
    a.q = q;
    a.spec = spec;
    a.mat.assign(static_cast<size_t>(m) * q, 0);
    auto set = [&](int i, int j) { a.mat[static_cast<size_t>(i) * q + j] = 1; };

    switch (spec.strategy) {
      case BetaStrategy::kOneToOne: {
        for (int i = 0; i < m; ++i) {
          const int g = offset + i;  // group-wide mixture index
          if (g < n) {
            set(i, g);
          } else if (plan.zero_cell_enabled) {
            set(i, q - 1);  // e_z column
          }
          // b >= 1 leaves mixtures beyond n unassigned, which cannot happen:
          // m_t <= n when b >= 1.
        }
        break;
      }
      case BetaStrategy::kAllToOne: {
        for (int i = 0; i < m; ++i) {
          for (int j = 0; j < n; ++j) set(i, j);  // e_z column stays 0
        }
        break;
      }
      case BetaStrategy::kKToOne: {
        for (int i = 0; i < m; ++i) {
          const int g = offset + i;
          for (int j = g * spec.param; j < (g + 1) * spec.param; ++j) set(i, j);
        }
        break;
      }
      case BetaStrategy::kOneToMany: {
        for (int i = 0; i < m; ++i) {
          const int g = offset + i;
          set(i, g / spec.param);
        }
        break;
      }
      default:
        throw PlanError(std::string("init_beta: unknown strategy ") +
                        strategy_name(spec.strategy));
    }
    out.push_back(std::move(a));
  }
  return out;
}

}  // namespace kw
