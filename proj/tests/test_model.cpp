#include "doctest.h"
#include "kw/model.hpp"

#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "kw/accounting.hpp"
#include "kw/presets.hpp"
#include "kw/train.hpp"
#include "oracles.hpp"

using kw::build_model;
using kw::Manifest;
using kw::Mat;
using kw::ModelGraph;
using kw::model_backward;
using kw::model_forward;
using kw::Rational;
using kw::Rng;
using kw::Tensor4;

namespace {

// Single dynamic layer whose kernel equals one warehouse cell; the private
// bank twin below must behave identically once the shared cells are copied in.
Manifest single_layer_manifest(bool dyconv, int n_kernels) {
  Manifest m;
  m.input = {3, 6, 6};
  m.num_classes = 3;
  m.budget = Rational(n_kernels, 1);
  kw::LayerDef l;
  l.id = "dz";
  l.k = 3;
  l.f = 4;
  l.stride = 1;
  l.pad = 1;
  l.input = "input";
  if (dyconv) {
    l.binding = kw::Binding::kDyConv;
    l.dyconv_n = n_kernels;
  } else {
    l.binding = kw::Binding::kWarehouse;
    l.group = "gd";
    m.groups = {{"gd", {1, 1, 1}}};
  }
  m.layers = {l};
  return m;
}

template <typename T>
double max_abs_diff(const Mat<T>& a, const Mat<T>& b) {
  REQUIRE(a.same_shape(b));
  double worst = 0.0;
  for (size_t i = 0; i < a.a.size(); ++i) {
    worst = std::max(worst, std::abs(static_cast<double>(a.a[i]) - static_cast<double>(b.a[i])));
  }
  return worst;
}

// Batch norm by the plain definition: biased batch variance over (n, h, w).
template <typename T>
Tensor4<T> oracle_batchnorm(const Tensor4<T>& x, const std::vector<T>& gamma,
                            const std::vector<T>& beta) {
  Tensor4<T> y(x.n, x.c, x.h, x.w);
  const double count = static_cast<double>(x.n) * x.h * x.w;
  for (int c = 0; c < x.c; ++c) {
    double mean = 0.0;
    for (int e = 0; e < x.n; ++e) {
      for (int yy = 0; yy < x.h; ++yy) {
        for (int xx = 0; xx < x.w; ++xx) mean += static_cast<double>(x.at(e, c, yy, xx));
      }
    }
    mean /= count;
    double var = 0.0;
    for (int e = 0; e < x.n; ++e) {
      for (int yy = 0; yy < x.h; ++yy) {
        for (int xx = 0; xx < x.w; ++xx) {
          const double d = static_cast<double>(x.at(e, c, yy, xx)) - mean;
          var += d * d;
        }
      }
    }
    var /= count;
    const double inv_std = 1.0 / std::sqrt(var + kw::kBnEpsilon);
    for (int e = 0; e < x.n; ++e) {
      for (int yy = 0; yy < x.h; ++yy) {
        for (int xx = 0; xx < x.w; ++xx) {
          y.at(e, c, yy, xx) = static_cast<T>(
              static_cast<double>(gamma[c]) * (static_cast<double>(x.at(e, c, yy, xx)) - mean) *
                  inv_std +
              static_cast<double>(beta[c]));
        }
      }
    }
  }
  return y;
}

// One dynamic layer recomputed purely from reference pieces.
template <typename T>
Tensor4<T> oracle_dynamic_layer(const ModelGraph<T>& g, size_t li, const Tensor4<T>& src,
                                double tau) {
  const kw::LayerState<T>& ls = g.layers[li];
  const kw::AttentionParams<T>& ap = ls.attn;

  Mat<T> pooled = oracle::naive_gap(src);
  Mat<T> h1 = oracle::naive_fc(pooled, ap.w1, ap.b1);
  Mat<T> a1(h1.rows, h1.cols);
  for (size_t i = 0; i < h1.a.size(); ++i) a1.a[i] = h1.a[i] > T(0) ? h1.a[i] : T(0);
  Mat<T> z = oracle::naive_fc(a1, ap.w2, ap.b2);

  const kw::Warehouse<T>& wh = g.warehouses[ls.group_index];
  const kw::PartitionPlan& plan = g.plans[ls.group_index];
  Tensor4<T> out(src.n, ls.rl.spec.f, ls.rl.out_h, ls.rl.out_w);
  for (int e = 0; e < src.n; ++e) {
    Mat<T> alpha(ap.m, ap.q);
    for (int i = 0; i < ap.m; ++i) {
      std::vector<T> zrow(z.row(e) + static_cast<size_t>(i) * ap.q,
                          z.row(e) + static_cast<size_t>(i + 1) * ap.q);
      std::vector<uint8_t> brow(ls.beta.row(i), ls.beta.row(i) + ap.q);
      std::vector<T> arow = oracle::caf_row(zrow, tau, brow);
      for (int j = 0; j < ap.q; ++j) alpha.at(i, j) = arow[j];
    }
    Tensor4<T> kern = oracle::naive_assemble(wh, plan, ls.rl.spec, alpha);
    Tensor4<T> xe = kw::slice_batch(src, e);
    Tensor4<T> oe = oracle::naive_conv2d(xe, kern, ls.rl.spec.stride, ls.rl.spec.pad);
    kw::paste_batch(out, e, oe);
  }
  return out;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("parameter and gradient slices traverse in the same canonical order") {
  auto g = build_model<double>(kw::toy2_preset(Rational{1}), 5);
  auto mg = kw::make_model_grads(g);
  auto ps = kw::param_slices(g);
  auto gs = kw::grad_slices(mg, g);

  const std::vector<std::string> expected = {
      "warehouse:g1/cells",
      "layer:kwA/attn.w1", "layer:kwA/attn.b1", "layer:kwA/attn.w2", "layer:kwA/attn.b2",
      "layer:kwB/attn.w1", "layer:kwB/attn.b1", "layer:kwB/attn.w2", "layer:kwB/attn.b2",
      "layer:kwA/bn.gamma", "layer:kwA/bn.beta", "layer:kwB/bn.gamma", "layer:kwB/bn.beta",
      "classifier/w", "classifier/b",
  };
  REQUIRE(ps.size() == expected.size());
  REQUIRE(gs.size() == expected.size());
  for (size_t i = 0; i < ps.size(); ++i) {
    CHECK(ps[i].tag == expected[i]);
    CHECK(gs[i].tag == expected[i]);
    CHECK(ps[i].size == gs[i].size);
    CHECK(ps[i].decay == gs[i].decay);
    CHECK(ps[i].size > 0);
  }

  // Weight matrices decay; biases and BN affines do not.
  CHECK(ps[0].decay);        // cells
  CHECK(ps[1].decay);        // attn.w1
  CHECK_FALSE(ps[2].decay);  // attn.b1
  CHECK(ps[3].decay);        // attn.w2
  CHECK_FALSE(ps[4].decay);  // attn.b2
  CHECK_FALSE(ps[9].decay);  // bn.gamma
  CHECK(ps[13].decay);       // classifier/w
  CHECK_FALSE(ps[14].decay);
}

TEST_CASE("learnable count equals the accounting total minus warmup assignment entries") {
  struct Case {
    Manifest manifest;
  };
  const Manifest manifests[] = {
      kw::toy2_preset(Rational{1}),
      kw::toy_preset(Rational{1}),
      kw::toy_preset(Rational(1, 2)),
  };
  for (const Manifest& m : manifests) {
    auto g = build_model<double>(m, 3);
    long long beta_entries = 0;
    for (const auto& ls : g.layers) {
      if (ls.dynamic()) beta_entries += static_cast<long long>(ls.attn.m) * ls.attn.q;
    }
    CHECK(kw::learnable_param_count(g) + beta_entries == kw::count_params(m).total);
  }
  auto g2 = build_model<double>(kw::toy2_preset(Rational{1}), 3);
  CHECK(kw::learnable_param_count(g2) == 528);
  CHECK(kw::count_params(kw::toy2_preset(Rational{1})).total == 537);
}

TEST_CASE("fresh build produces exactly tau * beta attentions at any temperature") {
  auto g = build_model<double>(kw::toy2_preset(Rational{1}), 11);
  Rng rng(21);
  Tensor4<double> x = oracle::random_tensor<double>(2, 2, 6, 6, rng);
  kw::ForwardTape<double> tape;
  model_forward(g, x, 0.7, &tape);
  for (size_t li = 0; li < g.layers.size(); ++li) {
    const auto& ls = g.layers[li];
    if (!ls.dynamic()) continue;
    const Mat<double>& alpha = tape.layers[li].alpha;
    for (int e = 0; e < alpha.rows; ++e) {
      for (int j = 0; j < alpha.cols; ++j) {
        const double expect = 0.7 * static_cast<double>(ls.beta.mat[static_cast<size_t>(j)]);
        CHECK(alpha.at(e, j) == expect);  // logits are exactly zero at init
      }
    }
  }
}

TEST_CASE("tau=1 forward matches a plain network carrying the assembled warmup kernels") {
  for (const Rational b : {Rational{1}, Rational(1, 2)}) {
    CAPTURE(b.str());
    const uint64_t seed = 41;
    auto g = build_model<double>(kw::toy_preset(b), seed);
    auto plain = build_model<double>(kw::to_plain_baseline(kw::toy_preset(b)), seed);

    for (const auto& ls : g.layers) {
      if (!ls.dynamic()) continue;
      std::vector<double> alpha(ls.beta.mat.begin(), ls.beta.mat.end());
      kw::AssembledKernel<double> ak = kw::assemble(
          g.warehouses[ls.group_index], g.plans[ls.group_index], ls.rl.spec, alpha.data());
      plain.layers[plain.layer_index.at(ls.rl.def.id)].plain_kernel = std::move(ak.kernel);
    }

    Rng rng(97);
    for (int trial = 0; trial < 3; ++trial) {
      Tensor4<double> x = oracle::random_tensor<double>(2, 3, 16, 16, rng);
      Mat<double> got = model_forward(g, x, 1.0);
      Mat<double> want = model_forward(plain, x, 0.0);
      REQUIRE(got.same_shape(want));
      for (size_t i = 0; i < got.a.size(); ++i) CHECK(got.a[i] == want.a[i]);
    }
  }
}

TEST_CASE("a one-mixture warehouse layer degenerates to a private kernel bank") {
  const int n_kernels = 4;
  const uint64_t seed = 13;
  auto gw = build_model<float>(single_layer_manifest(false, n_kernels), seed);
  auto gd = build_model<float>(single_layer_manifest(true, n_kernels), seed);

  REQUIRE(gw.plans.size() == 1);
  CHECK(gw.plans[0].m_t == 1);
  CHECK(gw.plans[0].n == n_kernels);
  REQUIRE(gd.layers[0].bank.kernels.size() == gw.warehouses[0].cells.size());

  // Same layer id, so the attention modules and classifier initialize
  // identically; share the remaining state explicitly.
  kw::randomize_for_gradcheck(gw, 7);
  gd.layers[0].attn = gw.layers[0].attn;
  gd.layers[0].gamma = gw.layers[0].gamma;
  gd.layers[0].bn_beta = gw.layers[0].bn_beta;
  gd.fc_w = gw.fc_w;
  gd.fc_b = gw.fc_b;
  gd.layers[0].bank.kernels = gw.warehouses[0].cells;

  Rng rng(29);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor4<float> x = oracle::random_tensor<float>(2, 3, 6, 6, rng);
    for (const double tau : {0.0, 0.5}) {
      Mat<float> a = model_forward(gw, x, tau);
      Mat<float> b = model_forward(gd, x, tau);
      CHECK(max_abs_diff(a, b) < 1e-6);
    }
  }
}

TEST_CASE("forward pass matches the reference composition at mid-warmup") {
  auto g = build_model<double>(kw::toy2_preset(Rational{1}), 23);
  kw::randomize_for_gradcheck(g, 31);
  Rng rng(37);
  Tensor4<double> x = oracle::random_tensor<double>(3, 2, 6, 6, rng);
  const double tau = 0.5;

  Mat<double> got = model_forward(g, x, tau);

  // kwA: dynamic conv -> BN -> ReLU.
  Tensor4<double> convA = oracle_dynamic_layer(g, 0, x, tau);
  Tensor4<double> bnA = oracle_batchnorm(convA, g.layers[0].gamma, g.layers[0].bn_beta);
  Tensor4<double> outA = bnA;
  for (auto& v : outA.data) v = v > 0.0 ? v : 0.0;

  // kwB: dynamic conv -> BN -> residual from kwA -> ReLU.
  Tensor4<double> convB = oracle_dynamic_layer(g, 1, outA, tau);
  Tensor4<double> bnB = oracle_batchnorm(convB, g.layers[1].gamma, g.layers[1].bn_beta);
  for (size_t i = 0; i < bnB.data.size(); ++i) bnB.data[i] += outA.data[i];
  for (auto& v : bnB.data) v = v > 0.0 ? v : 0.0;

  Mat<double> pooled = oracle::naive_gap(bnB);
  Mat<double> want = oracle::naive_fc(pooled, g.fc_w, g.fc_b);

  REQUIRE(got.same_shape(want));
  for (size_t i = 0; i < got.a.size(); ++i) {
    CHECK(oracle::rel_err(got.a[i], want.a[i], 1e-9) < 1e-9);
  }
}

TEST_CASE("analytic gradients agree with finite differences on the full model") {
  for (const Rational b : {Rational{1}, Rational(1, 2)}) {
    CAPTURE(b.str());
    auto g = build_model<double>(kw::toy2_preset(b), 43);
    kw::randomize_for_gradcheck(g, 47);
    Rng rng(53);
    Tensor4<double> x = oracle::random_tensor<double>(4, 2, 6, 6, rng);
    const std::vector<int> y = {0, 1, 2, 0};
    kw::GradcheckResult res = kw::gradcheck(g, x, y, 0.5, 6, 1e-5, 1e-4, 1e-6, 59);
    CAPTURE(res.max_rel_err);
    for (const auto& f : res.failures) CAPTURE(f);
    CHECK(res.ok());
    CHECK(res.checked > 50);
  }
}

TEST_CASE("gradients flow everywhere a parameter can influence the loss") {
  auto g = build_model<double>(kw::toy2_preset(Rational{1}), 61);
  kw::randomize_for_gradcheck(g, 67);
  Rng rng(71);
  Tensor4<double> x = oracle::random_tensor<double>(3, 2, 6, 6, rng);
  kw::ForwardTape<double> tape;
  Mat<double> logits = model_forward(g, x, 0.5, &tape);
  kw::CeResult<double> ce = kw::cross_entropy(logits, {0, 1, 2});
  auto mg = model_backward(g, tape, ce.grad);

  auto gs = kw::grad_slices(mg, g);
  for (const auto& s : gs) {
    CAPTURE(s.tag);
    double norm = 0.0;
    for (size_t i = 0; i < s.size; ++i) norm += std::abs(static_cast<double>(s.data[i]));
    CHECK(norm > 0.0);
  }
}

}  // TEST_SUITE
