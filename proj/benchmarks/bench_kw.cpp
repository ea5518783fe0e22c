// Micro benchmarks for the hot paths: convolution, kernel assembly, the
// attention module, and a full optimizer step on the toy preset.

#include <benchmark/benchmark.h>

#include <vector>

#include "kw/model.hpp"
#include "kw/ops.hpp"
#include "kw/presets.hpp"
#include "kw/rng.hpp"
#include "kw/train.hpp"

namespace {

kw::Tensor4<double> gaussian_tensor(int n, int c, int h, int w, kw::Rng& rng) {
  kw::Tensor4<double> t(n, c, h, w);
  for (auto& v : t.data) v = rng.next_gaussian();
  return t;
}

}  // namespace

static void BM_Conv2dForward(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  const int f = static_cast<int>(state.range(1));
  const int hw = static_cast<int>(state.range(2));
  kw::Rng rng(1);
  kw::Tensor4<double> x = gaussian_tensor(8, c, hw, hw, rng);
  kw::Tensor4<double> k = gaussian_tensor(f, c, 3, 3, rng);
  for (auto _ : state) {
    kw::Tensor4<double> y = kw::conv2d_forward(x, k, 1, 1);
    benchmark::DoNotOptimize(y.data.data());
  }
}
BENCHMARK(BM_Conv2dForward)
    ->Args({16, 16, 16})
    ->Args({64, 64, 28})
    ->Unit(benchmark::kMicrosecond);

static void BM_AssembleToyLayer(benchmark::State& state) {
  auto g = kw::build_model<double>(kw::toy_preset(kw::Rational{1}), 3);
  const auto& ls = g.layers[1];  // first shared layer
  std::vector<double> alpha(ls.beta.mat.begin(), ls.beta.mat.end());
  for (auto _ : state) {
    kw::AssembledKernel<double> ak =
        kw::assemble(g.warehouses[ls.group_index], g.plans[ls.group_index], ls.rl.spec,
                     alpha.data());
    benchmark::DoNotOptimize(ak.kernel.data.data());
  }
}
BENCHMARK(BM_AssembleToyLayer)->Unit(benchmark::kMicrosecond);

static void BM_AttentionForwardToy(benchmark::State& state) {
  auto g = kw::build_model<double>(kw::toy_preset(kw::Rational{1}), 3);
  const auto& ls = g.layers[1];
  kw::Rng rng(5);
  kw::Tensor4<double> x = gaussian_tensor(8, ls.attn.c, 16, 16, rng);
  for (auto _ : state) {
    kw::Mat<double> a = kw::attention_forward(x, ls.attn, 0.5, ls.beta, kw::AttnFunc::kCaf);
    benchmark::DoNotOptimize(a.a.data());
  }
}
BENCHMARK(BM_AttentionForwardToy)->Unit(benchmark::kMicrosecond);

static void BM_ModelForwardToy(benchmark::State& state) {
  auto g = kw::build_model<double>(kw::toy_preset(kw::Rational{1}), 3);
  kw::Rng rng(7);
  kw::Tensor4<double> x = gaussian_tensor(8, 3, 16, 16, rng);
  for (auto _ : state) {
    kw::Mat<double> logits = kw::model_forward(g, x, 0.5);
    benchmark::DoNotOptimize(logits.a.data());
  }
}
BENCHMARK(BM_ModelForwardToy)->Unit(benchmark::kMillisecond);

static void BM_TrainStepToy(benchmark::State& state) {
  auto g = kw::build_model<double>(kw::toy_preset(kw::Rational{1}), 3);
  kw::Rng rng(9);
  kw::Tensor4<double> x = gaussian_tensor(32, 3, 16, 16, rng);
  std::vector<int> y(32);
  for (int i = 0; i < 32; ++i) y[static_cast<size_t>(i)] = i % 10;
  kw::SgdState<double> opt = kw::make_sgd_state(g);
  const kw::OptimConfig oc;
  for (auto _ : state) {
    kw::ForwardTape<double> tape;
    kw::Mat<double> logits = kw::model_forward(g, x, 0.5, &tape);
    kw::CeResult<double> ce = kw::cross_entropy(logits, y);
    kw::ModelGrads<double> grads = kw::model_backward(g, tape, ce.grad);
    kw::sgd_step(g, grads, opt, oc, 0.05);
    benchmark::DoNotOptimize(g.fc_b.data());
  }
}
BENCHMARK(BM_TrainStepToy)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
