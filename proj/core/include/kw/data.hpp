#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "kw/error.hpp"
#include "kw/rng.hpp"
#include "kw/tensor.hpp"

// Synthetic classification data: one fixed low-frequency pattern per class
// (sum of a few cosines, zero mean, unit RMS), observed through per-pixel
// gaussian noise. Deterministic in the seed, balanced across classes, and
// separable enough that a small network reaches high accuracy quickly.

namespace kw {

struct SynthConfig {
  int classes{4};
  int c{3};
  int h{16};
  int w{16};
  int train_size{512};
  int test_size{256};
  double noise{0.25};
  uint64_t seed{11};
};

template <typename T>
struct Dataset {
  Tensor4<T> x;
  std::vector<int> y;

  int size() const { return x.n; }
};

template <typename T>
struct SynthData {
  Dataset<T> train;
  Dataset<T> test;
  Tensor4<T> templates;  // classes x c x h x w
};

namespace detail {

template <typename T>
Dataset<T> sample_split(const Tensor4<T>& templates, const SynthConfig& cfg, int count,
                        Rng& rng) {
  Dataset<T> d;
  d.x = Tensor4<T>(count, cfg.c, cfg.h, cfg.w);
  d.y.resize(static_cast<size_t>(count));
  const size_t plane = templates.volume();  // per-class pattern, c*h*w values
  for (int i = 0; i < count; ++i) {
    const int label = i % cfg.classes;
    d.y[i] = label;
    const T* tpl = templates.ptr(label);
    T* dst = d.x.ptr(i);
    for (size_t j = 0; j < plane; ++j) {
      dst[j] = tpl[j] + static_cast<T>(cfg.noise * rng.next_gaussian());
    }
  }
  return d;
}

}  // namespace detail

template <typename T>
SynthData<T> gen_synthetic(const SynthConfig& cfg) {
  if (cfg.classes < 2) throw ConfigError("gen_synthetic: need at least 2 classes");
  if (cfg.c < 1 || cfg.h < 1 || cfg.w < 1) throw ConfigError("gen_synthetic: bad sample shape");
  if (cfg.train_size < 1 || cfg.test_size < 1) throw ConfigError("gen_synthetic: empty split");
  if (cfg.noise < 0.0) throw ConfigError("gen_synthetic: negative noise");

  SynthData<T> out;
  out.templates = Tensor4<T>(cfg.classes, cfg.c, cfg.h, cfg.w);
  Rng trng(Rng::mix(cfg.seed, "templates"));
  const double two_pi = 8.0 * std::atan(1.0);
  const size_t plane = static_cast<size_t>(cfg.c) * cfg.h * cfg.w;
  for (int cls = 0; cls < cfg.classes; ++cls) {
    T* dst = out.templates.ptr(cls);
    // Low-frequency cosine mix per channel; the constant (u = v = 0) term is
    // skipped so each pattern is zero mean by construction.
    for (int ch = 0; ch < cfg.c; ++ch) {
      std::vector<double> amp, phase;
      std::vector<int> us, vs;
      for (int u = 0; u <= 2; ++u) {
        for (int v = 0; v <= 2; ++v) {
          if (u == 0 && v == 0) continue;
          us.push_back(u);
          vs.push_back(v);
          amp.push_back(trng.next_gaussian());
          phase.push_back(two_pi * trng.next_double());
        }
      }
      for (int y = 0; y < cfg.h; ++y) {
        for (int x = 0; x < cfg.w; ++x) {
          double val = 0.0;
          for (size_t t = 0; t < amp.size(); ++t) {
            val += amp[t] * std::cos(two_pi * (us[t] * static_cast<double>(y) / cfg.h +
                                               vs[t] * static_cast<double>(x) / cfg.w) +
                                     phase[t]);
          }
          dst[(static_cast<size_t>(ch) * cfg.h + y) * cfg.w + x] = static_cast<T>(val);
        }
      }
    }
    // Normalize the whole class pattern to zero mean, unit RMS.
    double mean = 0.0;
    for (size_t j = 0; j < plane; ++j) mean += dst[j];
    mean /= static_cast<double>(plane);
    double ss = 0.0;
    for (size_t j = 0; j < plane; ++j) {
      dst[j] -= static_cast<T>(mean);
      ss += static_cast<double>(dst[j]) * dst[j];
    }
    const double rms = std::sqrt(ss / static_cast<double>(plane));
    if (rms > 0.0) {
      for (size_t j = 0; j < plane; ++j) dst[j] = static_cast<T>(dst[j] / rms);
    }
  }

  Rng train_rng(Rng::mix(cfg.seed, "train"));
  Rng test_rng(Rng::mix(cfg.seed, "test"));
  out.train = detail::sample_split(out.templates, cfg, cfg.train_size, train_rng);
  out.test = detail::sample_split(out.templates, cfg, cfg.test_size, test_rng);
  return out;
}

}  // namespace kw
