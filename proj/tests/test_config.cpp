#include "doctest.h"
#include "kw/config.hpp"

#include <string>

#include "kw/error.hpp"

using kw::ConfigError;
using kw::parse_config;
using kw::Rational;
using kw::RunConfig;

namespace {

// Minimal two-layer warehouse config every test below perturbs.
const char* kBaseConfig = R"json({
  "model": {
    "input": {"c": 2, "h": 6, "w": 6},
    "classes": 3,
    "layers": [
      {"id": "a", "binding": "warehouse", "group": "g1", "k": 3, "f": 4, "pad": 1},
      {"id": "b", "binding": "warehouse", "group": "g1", "k": 3, "f": 4, "pad": 1,
       "add_from": "a"}
    ]
  },
  "warehouse": {
    "budget": "1/2",
    "groups": [{"id": "g1", "divisors": {"c": 2, "f": 2}}],
    "beta": {"strategy": "one_to_one"},
    "attention": "caf"
  },
  "train": {"epochs": 4, "batch_size": 8, "warmup_epochs": 2, "lr": 0.1, "seed": 3},
  "data": {"train_size": 24, "test_size": 12, "noise": 0.1, "seed": 9}
})json";

}  // namespace

TEST_SUITE("config") {

TEST_CASE("a full config parses into manifest, train, and data sections") {
  RunConfig rc = parse_config(kBaseConfig);

  CHECK(rc.manifest.input.c == 2);
  CHECK(rc.manifest.num_classes == 3);
  REQUIRE(rc.manifest.layers.size() == 2);
  CHECK(rc.manifest.layers[0].binding == kw::Binding::kWarehouse);
  CHECK(rc.manifest.layers[0].group == "g1");
  CHECK(rc.manifest.layers[1].add_from == "a");
  CHECK(rc.manifest.budget == Rational(1, 2));
  REQUIRE(rc.manifest.groups.size() == 1);
  CHECK(rc.manifest.groups[0].divisors.c == 2);
  CHECK(rc.manifest.groups[0].divisors.f == 2);
  CHECK(rc.manifest.groups[0].divisors.spatial == 1);
  CHECK(rc.manifest.beta.strategy == kw::BetaStrategy::kOneToOne);
  CHECK(rc.manifest.attn == kw::AttnFunc::kCaf);

  CHECK(rc.train.epochs == 4);
  CHECK(rc.train.batch_size == 8);
  CHECK(rc.train.warmup_epochs == 2);
  CHECK(rc.train.optim.lr == 0.1);
  CHECK(rc.train.optim.momentum == 0.9);  // untouched default
  CHECK(rc.train.seed == 3);

  CHECK(rc.data.train_size == 24);
  CHECK(rc.data.test_size == 12);
  CHECK(rc.data.noise == 0.1);
  CHECK(rc.data.seed == 9);

  // The parsed manifest is immediately valid.
  kw::validate(rc.manifest);
}

TEST_CASE("data always mirrors the model's shape and class count") {
  RunConfig rc = parse_config(kBaseConfig);
  CHECK(rc.data.classes == 3);
  CHECK(rc.data.c == 2);
  CHECK(rc.data.h == 6);
  CHECK(rc.data.w == 6);
}

TEST_CASE("layer input defaults to the previous layer, first layer to the image") {
  RunConfig rc = parse_config(kBaseConfig);
  CHECK(rc.manifest.layers[0].input == "input");
  CHECK(rc.manifest.layers[1].input == "a");
}

TEST_CASE("optional sections fall back to defaults") {
  RunConfig rc = parse_config(R"({
    "model": {"input": {"c": 1, "h": 4, "w": 4}, "classes": 2,
              "layers": [{"id": "a", "k": 3, "f": 2, "pad": 1}]}
  })");
  CHECK(rc.manifest.budget == Rational{1});
  CHECK(rc.manifest.layers[0].binding == kw::Binding::kPlain);
  CHECK(rc.manifest.layers[0].stride == 1);
  CHECK(rc.manifest.layers[0].bn);
  CHECK(rc.manifest.layers[0].relu);
  CHECK(rc.train.epochs == 30);
  CHECK(rc.train.batch_size == 32);
  CHECK(rc.train.optim.weight_decay == 1e-4);
  CHECK(rc.data.train_size == 512);
  CHECK(rc.data.classes == 2);
}

TEST_CASE("budget accepts a rational string or a bare integer") {
  RunConfig rc = parse_config(R"({
    "model": {"input": {"c": 1, "h": 4, "w": 4}, "classes": 2,
              "layers": [{"id": "a", "k": 1, "f": 2}]},
    "warehouse": {"budget": 4}
  })");
  CHECK(rc.manifest.budget == Rational{4});

  rc = parse_config(R"({
    "model": {"input": {"c": 1, "h": 4, "w": 4}, "classes": 2,
              "layers": [{"id": "a", "k": 1, "f": 2}]},
    "warehouse": {"budget": "2/4"}
  })");
  CHECK(rc.manifest.budget == Rational(1, 2));

  CHECK_THROWS_AS(parse_config(R"({
    "model": {"input": {"c": 1, "h": 4, "w": 4}, "classes": 2,
              "layers": [{"id": "a", "k": 1, "f": 2}]},
    "warehouse": {"budget": 0.5}
  })"),
                  ConfigError);  // floats are ambiguous; require "1/2"
}

TEST_CASE("unknown keys are rejected at every level") {
  CHECK_THROWS_WITH_AS(parse_config(R"({"bogus": 1})"),
                       doctest::Contains("unknown key 'bogus'"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config(R"({
    "model": {"input": {"c": 1, "h": 4, "w": 4}, "classes": 2, "extra": true,
              "layers": [{"id": "a", "k": 1, "f": 2}]}
  })"),
                       doctest::Contains("unknown key 'extra'"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config(R"({
    "model": {"input": {"c": 1, "h": 4, "w": 4}, "classes": 2,
              "layers": [{"id": "a", "k": 1, "f": 2, "kernel": 3}]}
  })"),
                       doctest::Contains("unknown key 'kernel'"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config(R"({
    "model": {"input": {"c": 1, "h": 4, "w": 4}, "classes": 2,
              "layers": [{"id": "a", "k": 1, "f": 2}]},
    "train": {"learning_rate": 0.1}
  })"),
                       doctest::Contains("unknown key 'learning_rate'"), ConfigError);
}

TEST_CASE("malformed documents raise ConfigError, never json exceptions") {
  CHECK_THROWS_AS(parse_config("not json at all"), ConfigError);
  CHECK_THROWS_AS(parse_config("[1, 2, 3]"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"model": 7})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"model": {"input": {"c": 1, "h": 4, "w": 4},
    "classes": 2, "layers": []}})"),
                  ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"model": {"input": {"c": 1, "h": 4, "w": 4},
    "classes": 2, "layers": [{"id": "a", "k": "three", "f": 2}]}})"),
                  ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"model": {"input": {"c": 1, "h": 4, "w": 4},
    "classes": 2, "layers": [{"k": 1, "f": 2}]}})"),
                  ConfigError);  // missing id
}

TEST_CASE("train bounds are enforced") {
  const std::string head = R"({
    "model": {"input": {"c": 1, "h": 4, "w": 4}, "classes": 2,
              "layers": [{"id": "a", "k": 1, "f": 2}]},
    "train": )";
  CHECK_THROWS_AS(parse_config(head + R"({"epochs": -1}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(head + R"({"batch_size": 0}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(head + R"({"warmup_epochs": -2}})"), ConfigError);
}

TEST_CASE("load_config_file reports missing files") {
  CHECK_THROWS_AS(kw::load_config_file("/nonexistent/kw.json"), ConfigError);
}

}  // TEST_SUITE
