#include <set>

#include "doctest.h"
#include "json.hpp"
#include "slip/errors.hpp"
#include "slip/scm.hpp"

using namespace slip;

namespace {

SpoofCueMap ones_where(const ScmShape& shape, const Region& r) {
  SpoofCueMap m{shape, std::vector<double>(shape.size(), 0.0)};
  for (std::size_t c = 0; c < shape.channels; ++c)
    for (std::size_t y = r.row_begin; y < r.row_end; ++y)
      for (std::size_t x = r.col_begin; x < r.col_end; ++x) m.data[(c * shape.height + y) * shape.width + x] = 1.0;
  return m;
}

bool support_inside(const SpoofCueMap& m, const Region& r) {
  for (std::size_t c = 0; c < m.shape.channels; ++c)
    for (std::size_t y = 0; y < m.shape.height; ++y)
      for (std::size_t x = 0; x < m.shape.width; ++x)
        if (m.at(c, y, x) != 0.0 && !r.contains(y, x)) return false;
  return true;
}

}  // namespace

TEST_SUITE("scm") {
  TEST_CASE("zero map") {
    const auto m = zero_scm({1, 2, 2});
    CHECK(m.data == std::vector<double>{0, 0, 0, 0});
    CHECK(m.is_zero());
    CHECK_THROWS_AS(zero_scm({0, 2, 2}), ArgumentError);
  }

  TEST_CASE("whole position fills the map for any size") {
    Rng rng(1);
    for (double f : {0.1, 0.5, 1.0}) {
      const auto m = pseudo_scm({Position::whole, f}, {1, 4, 4}, rng);
      CHECK(m.data == std::vector<double>(16, 1.0));
    }
  }

  TEST_CASE("upper square of side two anchored at column one") {
    const ScmShape shape{1, 4, 4};
    bool seen_anchor_one = false;
    for (std::uint64_t seed = 0; seed < 64; ++seed) {
      Rng rng(seed);
      const auto m = pseudo_scm({Position::upper, 0.5}, shape, rng);
      std::size_t first_col = 4;
      for (std::size_t x = 0; x < 4; ++x) {
        if (m.at(0, 0, x) == 1.0) {
          first_col = x;
          break;
        }
      }
      REQUIRE(first_col <= 2);
      CHECK(m.data == ones_where(shape, {0, 2, first_col, first_col + 2}).data);
      if (first_col == 1) {
        seen_anchor_one = true;
        CHECK(m.data == std::vector<double>{0, 1, 1, 0, 0, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0});
      }
    }
    CHECK(seen_anchor_one);
  }

  TEST_CASE("same seed gives the same map") {
    Rng a(9), b(9);
    CHECK(pseudo_scm({Position::lower_right, 0.3}, {2, 16, 16}, a).data ==
          pseudo_scm({Position::lower_right, 0.3}, {2, 16, 16}, b).data);
  }

  TEST_CASE("full-size masks over all positions tile the map") {
    for (std::size_t side : {16u, 32u}) {
      const ScmShape shape{1, side, side};
      std::vector<double> un(shape.size(), 0.0);
      Rng rng(0);
      for (Position p : kAllPositions) {
        const auto m = pseudo_scm({p, 1.0}, shape, rng);
        CHECK(m.data == ones_where(shape, position_region(p, side, side)).data);
        for (std::size_t k = 0; k < un.size(); ++k) un[k] = std::max(un[k], m.data[k]);
      }
      CHECK(un == std::vector<double>(shape.size(), 1.0));
    }
  }

  TEST_CASE("sampled masks are binary, channel-identical and stay inside their region") {
    const ScmShape shape{3, 16, 16};
    const ScmConfig cfg;
    Rng rng(42);
    for (int trial = 0; trial < 500; ++trial) {
      const Position p = kAllPositions[rng.index(kAllPositions.size())];
      const auto m = scm_for_prompt(make_spoof_prompt("fake", p, "mask"), shape, rng, cfg);
      CHECK(m.is_binary());
      CHECK_FALSE(m.is_zero());
      CHECK(support_inside(m, position_region(p, 16, 16)));
      for (std::size_t y = 0; y < 16; ++y)
        for (std::size_t x = 0; x < 16; ++x) {
          CHECK(m.at(1, y, x) == m.at(0, y, x));
          CHECK(m.at(2, y, x) == m.at(0, y, x));
        }
    }
  }

  TEST_CASE("prompt families map to the expected targets") {
    Rng rng(0);
    const ScmShape shape{1, 16, 16};
    CHECK(scm_for_prompt(make_live_prompt("real"), shape, rng).is_zero());
    const auto center = scm_for_prompt(make_spoof_prompt("fake", Position::center, "paper"), shape, rng);
    CHECK_FALSE(center.is_zero());
    CHECK(support_inside(center, position_region(Position::center, 16, 16)));
    const auto hybrid = build_hybrid(make_live_prompt("real"), make_spoof_prompt("fake", Position::left, "photo"));
    CHECK(support_inside(scm_for_prompt(hybrid, shape, rng), position_region(Position::left, 16, 16)));
    CHECK_THROWS_AS(scm_for_prompt(make_content_prompt("face"), shape, rng), ArgumentError);
  }

  TEST_CASE("oversized squares are clipped rather than rejected") {
    Rng rng(2);
    const auto m = pseudo_scm({Position::upper_left, 1.0}, {1, 5, 7}, rng);
    CHECK(support_inside(m, position_region(Position::upper_left, 5, 7)));
    CHECK_THROWS_AS(pseudo_scm({Position::upper, 1.5}, {1, 4, 4}, rng), ArgumentError);
    CHECK_THROWS_AS(pseudo_scm({Position::upper, 0.0}, {1, 4, 4}, rng), ArgumentError);
  }

  TEST_CASE("size fraction bounds are validated") {
    CHECK_THROWS_AS((ScmConfig{0.8, 0.2}.validate()), ConfigError);
    CHECK_THROWS_AS((ScmConfig{0.0, 0.5}.validate()), ConfigError);
    CHECK_NOTHROW((ScmConfig{0.5, 0.5}.validate()));
  }

  TEST_CASE("supervision record serializes the mask row-major") {
    Rng rng(0);
    const Prompt p = make_spoof_prompt("fake", Position::whole, "mask");
    const auto m = scm_for_prompt(p, {1, 2, 3}, rng);
    const auto j = nlohmann::json::parse(supervision_record(p, m));
    CHECK(j["prompt_text"] == p.text);
    CHECK(j["shape"] == nlohmann::json::array({1, 2, 3}));
    CHECK(j["mask"] == "111111");
    SpoofCueMap soft{{1, 1, 1}, {0.5}};
    CHECK_THROWS_AS(supervision_record(p, soft), ArgumentError);
  }
}
