#include "doctest.h"
#include "kw/data.hpp"

#include <cmath>
#include <vector>

using kw::gen_synthetic;
using kw::SynthConfig;

namespace {

SynthConfig small() {
  SynthConfig cfg;
  cfg.classes = 3;
  cfg.c = 2;
  cfg.h = 8;
  cfg.w = 8;
  cfg.train_size = 12;
  cfg.test_size = 6;
  cfg.noise = 0.25;
  cfg.seed = 17;
  return cfg;
}

}  // namespace

TEST_SUITE("data") {

TEST_CASE("generation is deterministic in the seed") {
  auto a = gen_synthetic<double>(small());
  auto b = gen_synthetic<double>(small());
  CHECK(a.train.x.data == b.train.x.data);
  CHECK(a.train.y == b.train.y);
  CHECK(a.test.x.data == b.test.x.data);
  CHECK(a.templates.data == b.templates.data);

  SynthConfig other = small();
  other.seed = 18;
  auto c = gen_synthetic<double>(other);
  CHECK(a.train.x.data != c.train.x.data);
}

TEST_CASE("labels are balanced and shapes follow the config") {
  const SynthConfig cfg = small();
  auto d = gen_synthetic<double>(cfg);
  CHECK(d.train.x.n == 12);
  CHECK(d.train.x.c == 2);
  CHECK(d.train.x.h == 8);
  CHECK(d.train.x.w == 8);
  CHECK(d.test.size() == 6);
  CHECK(d.templates.n == 3);

  std::vector<int> counts(3, 0);
  for (const int y : d.train.y) {
    REQUIRE(y >= 0);
    REQUIRE(y < 3);
    ++counts[static_cast<size_t>(y)];
  }
  for (const int c : counts) CHECK(c == 4);
}

TEST_CASE("zero noise reproduces the class template exactly") {
  SynthConfig cfg = small();
  cfg.noise = 0.0;
  auto d = gen_synthetic<double>(cfg);
  for (int i = 0; i < d.train.size(); ++i) {
    const int label = d.train.y[static_cast<size_t>(i)];
    const double* sample = d.train.x.ptr(i);
    const double* tpl = d.templates.ptr(label);
    const size_t plane = d.templates.volume();  // per-element volume c*h*w
    for (size_t j = 0; j < plane; ++j) CHECK(sample[j] == tpl[j]);
  }
}

TEST_CASE("templates are zero mean with unit RMS") {
  auto d = gen_synthetic<double>(small());
  const size_t plane = d.templates.volume();  // per-element volume c*h*w
  for (int cls = 0; cls < d.templates.n; ++cls) {
    const double* tpl = d.templates.ptr(cls);
    double mean = 0.0, ss = 0.0;
    for (size_t j = 0; j < plane; ++j) mean += tpl[j];
    mean /= static_cast<double>(plane);
    for (size_t j = 0; j < plane; ++j) ss += tpl[j] * tpl[j];
    const double rms = std::sqrt(ss / static_cast<double>(plane));
    CHECK(std::abs(mean) < 1e-9);
    CHECK(rms == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("bad configurations are rejected") {
  SynthConfig cfg = small();
  cfg.classes = 1;
  CHECK_THROWS_AS(gen_synthetic<double>(cfg), kw::ConfigError);
  cfg = small();
  cfg.h = 0;
  CHECK_THROWS_AS(gen_synthetic<double>(cfg), kw::ConfigError);
  cfg = small();
  cfg.train_size = 0;
  CHECK_THROWS_AS(gen_synthetic<double>(cfg), kw::ConfigError);
  cfg = small();
  cfg.noise = -0.1;
  CHECK_THROWS_AS(gen_synthetic<double>(cfg), kw::ConfigError);
}

}  // TEST_SUITE
