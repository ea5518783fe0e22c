#include "doctest.h"
#include "kw/csv.hpp"

#include <algorithm>
#include <string>
#include <vector>

#include "kw/presets.hpp"
#include "oracles.hpp"

using kw::AttentionStats;
using kw::attention_stats_csv;
using kw::csv_number;

TEST_SUITE("csv") {

TEST_CASE("csv_number renders with nine significant digits") {
  CHECK(csv_number(0.0) == "0");
  CHECK(csv_number(1.0) == "1");
  CHECK(csv_number(-0.25) == "-0.25");
  CHECK(csv_number(1.0 / 3.0) == "0.333333333");
  CHECK(csv_number(123456789.0) == "123456789");
  CHECK(csv_number(1e-12) == "1e-12");
}

TEST_CASE("header enumerates cells and appends e_z only when present") {
  AttentionStats st;
  st.layer_id = "a";
  st.m = 1;
  st.q = 3;
  st.mean_alpha = kw::Mat<double>(1, 3);
  st.mean_alpha.a = {0.5, -0.25, 0.25};
  CHECK(attention_stats_csv({st}, 3, false) == "1,2,3\n0.5,-0.25,0.25\n");

  st.q = 4;
  st.mean_alpha = kw::Mat<double>(1, 4);
  st.mean_alpha.a = {0.5, -0.25, 0.25, 0.0};
  CHECK(attention_stats_csv({st}, 3, true) == "1,2,3,e_z\n0.5,-0.25,0.25,0\n");
}

TEST_CASE("rows stack member layers in order, mixtures within layer") {
  AttentionStats a;
  a.layer_id = "a";
  a.m = 2;
  a.q = 2;
  a.mean_alpha = kw::Mat<double>(2, 2);
  a.mean_alpha.a = {1.0, 2.0, 3.0, 4.0};
  AttentionStats b = a;
  b.layer_id = "b";
  b.m = 1;
  b.mean_alpha = kw::Mat<double>(1, 2);
  b.mean_alpha.a = {5.0, 6.0};
  CHECK(attention_stats_csv({a, b}, 2, false) == "1,2\n1,2\n3,4\n5,6\n");
}

TEST_CASE("column count mismatches are rejected") {
  AttentionStats st;
  st.layer_id = "a";
  st.m = 1;
  st.q = 3;
  st.mean_alpha = kw::Mat<double>(1, 3);
  CHECK_THROWS_AS(attention_stats_csv({st}, 4, false), kw::Error);
  CHECK_THROWS_AS(attention_stats_csv({st}, 3, true), kw::Error);
}

TEST_CASE("stats from identical runs serialize byte-identically") {
  auto make_csv = [] {
    auto g = kw::build_model<double>(kw::toy2_preset(kw::Rational{1}), 5);
    kw::randomize_for_gradcheck(g, 7);
    kw::Rng rng(9);
    auto items = oracle::random_tensor<double>(4, 2, 6, 6, rng);
    auto stats = kw::collect_attention_stats(g, items, 0.25);
    return attention_stats_csv(stats, static_cast<int>(g.plans[0].n),
                               g.plans[0].zero_cell_enabled);
  };
  const std::string first = make_csv();
  const std::string second = make_csv();
  CHECK(first == second);
  CHECK(first.find('\r') == std::string::npos);  // LF only
  CHECK(first.substr(0, 6) == "1,2,3\n");
  // 1 + 2 mixture rows after the header.
  CHECK(std::count(first.begin(), first.end(), '\n') == 4);
}

}  // TEST_SUITE
