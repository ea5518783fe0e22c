#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "kw/error.hpp"
#include "kw/data.hpp"
#include "kw/model.hpp"

// Training: plain SGD with momentum and per-step cosine learning rate decay.
// Weight decay applies only to slices flagged for it (kernels, cells, FC
// weights); biases and BN affines are exempt. Batch norm always uses batch
// statistics, so evaluation is deterministic in the dataset order.

namespace kw {

struct OptimConfig {
  double lr{0.05};
  double momentum{0.9};
  double weight_decay{1e-4};
};

struct TrainConfig {
  int epochs{30};
  int batch_size{32};
  int warmup_epochs{10};  // temperature reaches 0 after this many epochs
  OptimConfig optim;
  uint64_t seed{7};  // shuffle order
};

struct EpochMetrics {
  int epoch{0};
  double mean_loss{0.0};
  double train_acc{0.0};
  double test_acc{0.0};
  double tau{0.0};  // temperature after the epoch's last step
  double lr{0.0};   // learning rate of the epoch's last step
};

// Temperature for a given global step; warmup_steps <= 0 disables the warmup
// entirely (tau identically 0).
inline double tau_at(long long step, long long warmup_steps) {
  if (warmup_steps <= 0) return 0.0;
  return temperature(std::min(step, warmup_steps), TemperatureSchedule{warmup_steps});
}

inline double cosine_lr(double base, long long step, long long total_steps) {
  if (total_steps <= 0) return base;
  const double pi = 4.0 * std::atan(1.0);
  const double t = static_cast<double>(std::min(step, total_steps)) /
                   static_cast<double>(total_steps);
  return 0.5 * base * (1.0 + std::cos(pi * t));
}

inline std::vector<int> shuffled_indices(int n, Rng& rng) {
  std::vector<int> idx(static_cast<size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = n - 1; i > 0; --i) {
    std::swap(idx[static_cast<size_t>(i)],
              idx[static_cast<size_t>(rng.next_below(static_cast<uint64_t>(i) + 1))]);
  }
  return idx;
}

template <typename T>
Tensor4<T> gather_batch(const Tensor4<T>& x, const std::vector<int>& order, int from, int count) {
  Tensor4<T> out(count, x.c, x.h, x.w);
  for (int i = 0; i < count; ++i) {
    Tensor4<T> one = slice_batch(x, order[static_cast<size_t>(from + i)]);
    paste_batch(out, i, one);
  }
  return out;
}

template <typename T>
struct SgdState {
  std::vector<std::vector<T>> velocity;  // parallel to param_slices(g)
};

template <typename T>
SgdState<T> make_sgd_state(ModelGraph<T>& g) {
  SgdState<T> s;
  for (const auto& slice : param_slices(g)) s.velocity.emplace_back(slice.size, T(0));
  return s;
}

// v = momentum*v + grad + wd*w ; w -= lr * v
template <typename T>
void sgd_step(ModelGraph<T>& g, ModelGrads<T>& grads, SgdState<T>& state,
              const OptimConfig& oc, double lr) {
  auto ps = param_slices(g);
  auto gs = grad_slices(grads, g);
  if (ps.size() != gs.size() || ps.size() != state.velocity.size()) {
    throw TrainError("sgd_step: parameter/gradient/velocity slice counts diverge");
  }
  for (size_t s = 0; s < ps.size(); ++s) {
    T* w = ps[s].data;
    const T* gr = gs[s].data;
    T* v = state.velocity[s].data();
    const T mu = static_cast<T>(oc.momentum);
    const T wd = ps[s].decay ? static_cast<T>(oc.weight_decay) : T(0);
    const T step = static_cast<T>(lr);
    for (size_t i = 0; i < ps[s].size; ++i) {
      v[i] = mu * v[i] + gr[i] + wd * w[i];
      w[i] -= step * v[i];
    }
  }
  // Assembled kernels cached from before this update are now stale.
  for (auto& wh : g.warehouses) ++wh.version;
  for (auto& ls : g.layers) {
    if (ls.rl.def.binding == Binding::kDyConv) ++ls.bank.version;
  }
}

template <typename T>
int argmax_row(const Mat<T>& m, int row) {
  const T* r = m.row(row);
  int best = 0;
  for (int j = 1; j < m.cols; ++j) {
    if (r[j] > r[best]) best = j;
  }
  return best;
}

template <typename T>
struct EvalResult {
  double loss{0.0};
  double accuracy{0.0};
};

template <typename T>
EvalResult<T> evaluate(const ModelGraph<T>& g, const Dataset<T>& data, double tau,
                       int batch_size) {
  EvalResult<T> r;
  std::vector<int> order(static_cast<size_t>(data.size()));
  std::iota(order.begin(), order.end(), 0);
  long long correct = 0;
  double loss_sum = 0.0;
  for (int from = 0; from < data.size(); from += batch_size) {
    const int count = std::min(batch_size, data.size() - from);
    Tensor4<T> xb = gather_batch(data.x, order, from, count);
    std::vector<int> yb(data.y.begin() + from, data.y.begin() + from + count);
    Mat<T> logits = model_forward(g, xb, tau);
    CeResult<T> ce = cross_entropy(logits, yb);
    loss_sum += static_cast<double>(ce.loss) * count;
    for (int i = 0; i < count; ++i) {
      if (argmax_row(logits, i) == yb[static_cast<size_t>(i)]) ++correct;
    }
  }
  r.loss = loss_sum / data.size();
  r.accuracy = static_cast<double>(correct) / data.size();
  return r;
}

namespace detail {

// Throws TrainError naming the first slice holding a non-finite gradient.
template <typename T>
void check_finite(ModelGrads<T>& grads, const ModelGraph<T>& g, long long step) {
  for (const auto& slice : grad_slices(grads, const_cast<ModelGraph<T>&>(g))) {
    T max_abs = T(0);
    bool bad = false;
    for (size_t i = 0; i < slice.size; ++i) {
      if (!std::isfinite(static_cast<double>(slice.data[i]))) bad = true;
      max_abs = std::max(max_abs, std::abs(slice.data[i]));
    }
    if (bad) {
      throw TrainError("training diverged at step " + std::to_string(step) +
                       ": non-finite gradient in " + slice.tag +
                       " (max |grad| = " + std::to_string(static_cast<double>(max_abs)) + ")");
    }
  }
}

}  // namespace detail

using EpochCallback = std::function<void(const EpochMetrics&)>;

// Runs the full loop; returns per-epoch metrics. Train accuracy comes from
// the epoch's own forward passes (the parameters drift across the epoch);
// test accuracy is a separate evaluation pass at the epoch boundary.
template <typename T>
std::vector<EpochMetrics> train(ModelGraph<T>& g, const SynthData<T>& data,
                                const TrainConfig& cfg, const EpochCallback& on_epoch = {}) {
  if (cfg.epochs < 0 || cfg.batch_size < 1) throw ConfigError("train: bad epochs/batch_size");
  const int n_train = data.train.size();
  const long long steps_per_epoch = (n_train + cfg.batch_size - 1) / cfg.batch_size;
  const long long total_steps = steps_per_epoch * cfg.epochs;
  const long long warmup_steps = steps_per_epoch * cfg.warmup_epochs;

  SgdState<T> state = make_sgd_state(g);
  std::vector<EpochMetrics> history;
  long long step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng(Rng::mix(cfg.seed, "shuffle:" + std::to_string(epoch)));
    std::vector<int> order = shuffled_indices(n_train, shuffle_rng);
    double loss_sum = 0.0;
    long long correct = 0;
    double lr = 0.0;
    for (int from = 0; from < n_train; from += cfg.batch_size, ++step) {
      const int count = std::min(cfg.batch_size, n_train - from);
      Tensor4<T> xb = gather_batch(data.train.x, order, from, count);
      std::vector<int> yb(static_cast<size_t>(count));
      for (int i = 0; i < count; ++i) yb[i] = data.train.y[order[from + i]];

      const double tau = tau_at(step, warmup_steps);
      lr = cosine_lr(cfg.optim.lr, step, total_steps);

      ForwardTape<T> tape;
      Mat<T> logits = model_forward(g, xb, tau, &tape);
      CeResult<T> ce = cross_entropy(logits, yb);
      if (!std::isfinite(static_cast<double>(ce.loss))) {
        throw TrainError("training diverged at step " + std::to_string(step) +
                         ": non-finite loss");
      }
      loss_sum += static_cast<double>(ce.loss) * count;
      for (int i = 0; i < count; ++i) {
        if (argmax_row(logits, i) == yb[static_cast<size_t>(i)]) ++correct;
      }

      ModelGrads<T> grads = model_backward(g, tape, ce.grad);
      detail::check_finite(grads, g, step);
      sgd_step(g, grads, state, cfg.optim, lr);
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.mean_loss = loss_sum / n_train;
    m.train_acc = static_cast<double>(correct) / n_train;
    m.tau = tau_at(step > 0 ? step - 1 : 0, warmup_steps);
    m.lr = lr;
    m.test_acc = evaluate(g, data.test, tau_at(step, warmup_steps), cfg.batch_size).accuracy;
    history.push_back(m);
    if (on_epoch) on_epoch(m);
  }
  return history;
}

// ---------------------------------------------------------------------------
// Finite-difference gradient verification

struct GradcheckResult {
  double max_rel_err{0.0};
  long long checked{0};
  std::vector<std::string> failures;

  bool ok() const { return failures.empty(); }
};

// Central differences on the mean cross-entropy (weight decay is an optimizer
// term, not part of the differentiated loss). Checks up to samples_per_slice
// randomly chosen scalars in every parameter slice. The relative error uses
// max(|analytic|, |fd|, denom_floor) as denominator.
template <typename T>
GradcheckResult gradcheck(ModelGraph<T>& g, const Tensor4<T>& x, const std::vector<int>& y,
                          double tau, int samples_per_slice, double eps, double rel_threshold,
                          double denom_floor, uint64_t seed) {
  ForwardTape<T> tape;
  Mat<T> logits = model_forward(g, x, tau, &tape);
  CeResult<T> ce = cross_entropy(logits, y);
  ModelGrads<T> grads = model_backward(g, tape, ce.grad);

  auto ps = param_slices(g);
  auto gs = grad_slices(grads, g);
  auto loss_at = [&]() {
    Mat<T> l = model_forward(g, x, tau);
    return static_cast<double>(cross_entropy(l, y).loss);
  };

  GradcheckResult res;
  Rng rng(Rng::mix(seed, "gradcheck:samples"));
  for (size_t s = 0; s < ps.size(); ++s) {
    const size_t n = ps[s].size;
    std::vector<size_t> picks;
    if (static_cast<long long>(n) <= samples_per_slice) {
      picks.resize(n);
      std::iota(picks.begin(), picks.end(), size_t{0});
    } else {
      std::set<size_t> chosen;
      while (static_cast<long long>(chosen.size()) < samples_per_slice) {
        chosen.insert(static_cast<size_t>(rng.next_below(n)));
      }
      picks.assign(chosen.begin(), chosen.end());
    }
    for (size_t i : picks) {
      T* w = ps[s].data + i;
      const T keep = *w;
      *w = keep + static_cast<T>(eps);
      const double up = loss_at();
      *w = keep - static_cast<T>(eps);
      const double down = loss_at();
      *w = keep;
      const double fd = (up - down) / (2.0 * eps);
      const double an = static_cast<double>(gs[s].data[i]);
      const double denom = std::max({std::abs(an), std::abs(fd), denom_floor});
      const double rel = std::abs(an - fd) / denom;
      res.max_rel_err = std::max(res.max_rel_err, rel);
      ++res.checked;
      if (rel > rel_threshold) {
        res.failures.push_back(ps[s].tag + "[" + std::to_string(i) + "]: analytic=" +
                               std::to_string(an) + " fd=" + std::to_string(fd) +
                               " rel=" + std::to_string(rel));
      }
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// Attention statistics

struct AttentionStats {
  std::string layer_id;
  std::string group_id;  // empty for private banks
  int m{0};
  int q{0};
  Mat<double> mean_alpha;  // m x q, averaged over items
};

// Mean attention per mixture over a set of items, forwarded one at a time
// (batch statistics then reduce over the single item's spatial extent).
template <typename T>
std::vector<AttentionStats> collect_attention_stats(const ModelGraph<T>& g,
                                                    const Tensor4<T>& items, double tau) {
  std::vector<AttentionStats> stats;
  std::vector<size_t> dyn_layers;
  for (size_t li = 0; li < g.layers.size(); ++li) {
    const LayerState<T>& ls = g.layers[li];
    if (!ls.dynamic()) continue;
    AttentionStats st;
    st.layer_id = ls.rl.def.id;
    st.group_id = ls.rl.def.group;
    st.m = ls.attn.m;
    st.q = ls.attn.q;
    st.mean_alpha = Mat<double>(st.m, st.q);
    stats.push_back(std::move(st));
    dyn_layers.push_back(li);
  }
  if (items.n == 0) throw ConfigError("collect_attention_stats: no items");

  for (int e = 0; e < items.n; ++e) {
    Tensor4<T> one = slice_batch(items, e);
    ForwardTape<T> tape;
    model_forward(g, one, tau, &tape);
    for (size_t d = 0; d < dyn_layers.size(); ++d) {
      const Mat<T>& alpha = tape.layers[dyn_layers[d]].alpha;
      for (size_t j = 0; j < alpha.a.size(); ++j) {
        stats[d].mean_alpha.a[j] += static_cast<double>(alpha.a[j]);
      }
    }
  }
  for (auto& st : stats) {
    for (auto& v : st.mean_alpha.a) v /= static_cast<double>(items.n);
  }
  return stats;
}

}  // namespace kw
