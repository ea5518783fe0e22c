#include "doctest.h"
#include "kw/partition.hpp"

#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "kw/error.hpp"

using kw::CellBlock;
using kw::CellShape;
using kw::compute_cdd;
using kw::KernelSpec;
using kw::PartitionPlan;
using kw::plan_partition;
using kw::PlanError;
using kw::Rational;
using kw::reassign_stages;
using kw::ScaleDivisors;
using kw::tile_cells;

namespace {

KernelSpec spec(std::string id, int k, int c, int f) {
  KernelSpec s;
  s.layer_id = std::move(id);
  s.k = k;
  s.c = c;
  s.f = f;
  return s;
}

// The first reassigned ResNet18 stage: four 3x3x64x64 convs, the next
// stage's entry 3x3x64x128 conv, and its 1x1x64x128 downsample.
std::vector<KernelSpec> resnet18_stage1() {
  return {spec("a", 3, 64, 64),  spec("b", 3, 64, 64), spec("c", 3, 64, 64),
          spec("d", 3, 64, 64),  spec("ds", 1, 64, 128), spec("e", 3, 64, 128)};
}

}  // namespace

TEST_SUITE("partition") {

TEST_CASE("compute_cdd takes the per-dimension gcd across the group") {
  CHECK(compute_cdd(resnet18_stage1()) == CellShape{1, 64, 64});
  CHECK(compute_cdd({spec("x", 3, 8, 8)}) == CellShape{3, 8, 8});
  CHECK(compute_cdd({spec("x", 3, 4, 8), spec("y", 3, 4, 4)}, ScaleDivisors{1, 2, 2}) ==
        CellShape{3, 2, 2});
}

TEST_CASE("compute_cdd rejects divisors that do not divide the gcd") {
  CHECK_THROWS_AS(compute_cdd({spec("x", 3, 4, 4)}, ScaleDivisors{2, 1, 1}), PlanError);
  CHECK_THROWS_AS(compute_cdd({spec("x", 3, 4, 4)}, ScaleDivisors{1, 3, 1}), PlanError);
}

TEST_CASE("plan for the first ResNet18 stage reproduces the published counts") {
  PartitionPlan p1 = plan_partition("g1", resnet18_stage1(), Rational{1});
  CHECK(p1.cell == CellShape{1, 64, 64});
  CHECK(p1.per_layer_m == std::vector<int>{9, 9, 9, 9, 2, 18});
  CHECK(p1.m_t == 56);
  CHECK(p1.n == 56);
  CHECK_FALSE(p1.zero_cell_enabled);
  CHECK(p1.q() == 56);

  PartitionPlan p4 = plan_partition("g1", resnet18_stage1(), Rational{4});
  CHECK(p4.m_t == 56);
  CHECK(p4.n == 224);

  PartitionPlan ph = plan_partition("g1", resnet18_stage1(), Rational(1, 2),
                                    ScaleDivisors{1, 2, 2});
  CHECK(ph.cell == CellShape{1, 32, 32});
  CHECK(ph.m_t == 224);
  CHECK(ph.n == 112);
  CHECK(ph.zero_cell_enabled);
  CHECK(ph.q() == 113);
}

TEST_CASE("budget identity holds exactly in rational arithmetic") {
  for (const auto& [num, den] : {std::pair{1ll, 4ll}, {1ll, 2ll}, {1ll, 1ll}, {2ll, 1ll}, {4ll, 1ll}}) {
    const Rational b(num, den);
    ScaleDivisors div = b < Rational{1} ? ScaleDivisors{1, 2, 2} : ScaleDivisors{};
    PartitionPlan p = plan_partition("g1", resnet18_stage1(), b, div);
    CHECK(Rational(p.n, p.m_t) == b);
    CHECK(p.zero_cell_enabled == (b < Rational{1}));
  }
}

TEST_CASE("non-integral n is rejected with the nearest valid budget named") {
  // Single 3x3x8x8 layer: m_t = 1, so b = 1/2 gives n = 1/2.
  CHECK_THROWS_AS(plan_partition("g", {spec("x", 3, 8, 8)}, Rational(1, 2)), PlanError);
  try {
    plan_partition("g", {spec("x", 3, 8, 8)}, Rational(1, 2));
  } catch (const PlanError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("g") != std::string::npos);
    CHECK(msg.find("1/2") != std::string::npos);
  }
}

TEST_CASE("per-layer m is the volume ratio and mixture offsets accumulate") {
  PartitionPlan p = plan_partition("g1", resnet18_stage1(), Rational{1});
  CHECK(p.layer_index("ds") == 4);
  CHECK_THROWS_AS(p.layer_index("nope"), PlanError);
  CHECK(p.mixture_offset(0) == 0);
  CHECK(p.mixture_offset(1) == 9);
  CHECK(p.mixture_offset(4) == 36);
  CHECK(p.mixture_offset(5) == 38);
}

TEST_CASE("degenerate plan: single layer, cell equals the kernel") {
  PartitionPlan p = plan_partition("solo", {spec("x", 3, 8, 8)}, Rational{1});
  CHECK(p.cell == CellShape{3, 8, 8});
  CHECK(p.per_layer_m == std::vector<int>{1});
  CHECK(p.m_t == 1);
  CHECK(p.n == 1);
}

TEST_CASE("tile_cells enumerates disjoint covering blocks in fixed order") {
  KernelSpec s = spec("x", 3, 64, 64);
  CellShape cell{1, 64, 64};
  std::vector<CellBlock> blocks = tile_cells(s, cell);
  REQUIRE(blocks.size() == 9);
  // Spatial row-major order with f and c fixed (single block each).
  for (int i = 0; i < 9; ++i) {
    CHECK(blocks[i].f0 == 0);
    CHECK(blocks[i].c0 == 0);
    CHECK(blocks[i].y0 == i / 3);
    CHECK(blocks[i].x0 == i % 3);
  }

  // Output-channel blocks come before input-channel blocks.
  KernelSpec s2 = spec("y", 1, 4, 4);
  std::vector<CellBlock> b2 = tile_cells(s2, CellShape{1, 2, 2});
  REQUIRE(b2.size() == 4);
  CHECK(std::tuple(b2[0].f0, b2[0].c0) == std::tuple(0, 0));
  CHECK(std::tuple(b2[1].f0, b2[1].c0) == std::tuple(0, 2));
  CHECK(std::tuple(b2[2].f0, b2[2].c0) == std::tuple(2, 0));
  CHECK(std::tuple(b2[3].f0, b2[3].c0) == std::tuple(2, 2));

  // Cell equal to the kernel is a single block at the origin.
  std::vector<CellBlock> b3 = tile_cells(s, CellShape{3, 64, 64});
  REQUIRE(b3.size() == 1);

  // Disjoint cover: every coordinate hit exactly once.
  std::set<std::tuple<int, int, int, int>> seen;
  for (const CellBlock& blk : tile_cells(s2, CellShape{1, 2, 2})) {
    for (int fe = 0; fe < 2; ++fe) {
      for (int ce = 0; ce < 2; ++ce) {
        CHECK(seen.insert({blk.f0 + fe, blk.c0 + ce, blk.y0, blk.x0}).second);
      }
    }
  }
  CHECK(seen.size() == 16);

  CHECK_THROWS_AS(tile_cells(s, CellShape{2, 64, 64}), PlanError);
}

TEST_CASE("reassign_stages splits layers by the explicit grouping map") {
  std::vector<KernelSpec> layers = {spec("conv1", 7, 3, 64), spec("a", 3, 64, 64),
                                    spec("b", 3, 64, 64), spec("c", 3, 64, 128)};
  auto groups = reassign_stages(layers, {{"conv1", ""},  // excluded
                                         {"a", "g1"},
                                         {"b", "g1"},
                                         {"c", "g2"}});
  REQUIRE(groups.size() == 2);
  CHECK(groups[0].group_id == "g1");
  CHECK(groups[0].members.size() == 2);
  CHECK(groups[1].group_id == "g2");
  CHECK(groups[1].members.size() == 1);

  // Each layer its own group preserves order; l = 1 everywhere.
  auto solo = reassign_stages(layers, {{"conv1", "c0"}, {"a", "c1"}, {"b", "c2"}, {"c", "c3"}});
  REQUIRE(solo.size() == 4);
  for (const auto& g : solo) CHECK(g.members.size() == 1);

  // Unmapped layers are an error.
  CHECK_THROWS_AS(reassign_stages(layers, {{"conv1", "g"}}), PlanError);
}

}  // TEST_SUITE
