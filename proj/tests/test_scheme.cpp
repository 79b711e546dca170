// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include <json.hpp>

#include <alloclab/json_config.hpp>
#include <alloclab/rng.hpp>
#include <alloclab/sampler.hpp>
#include <alloclab/scheme.hpp>

#include "oracle_helpers.hpp"

using namespace alloclab;

namespace {

constexpr std::uint64_t kSeed = 0x5C4E4Eull;

PowerSeriesFamily mix_family() {
  return PowerSeriesFamily::from_coefficients("mix", {1.0, 2.0, 3.0, 1.0});
}

}  // namespace

TEST_CASE("scheme fitting", "[scheme]") {
  SECTION("fitted parameters hit the per-box density exactly") {
    const SchemeConfig cfg(
        {{PowerSeriesFamily::poisson(), 15, {}},
         {PowerSeriesFamily::geometric(), 20, {}},
         {PowerSeriesFamily::binomial(3), 10, {}}},
        10);
    CHECK(cfg.num_colours() == 3);
    CHECK(cfg.alpha(0) == 1.5);
    CHECK(cfg.theta(0) == 1.5);
    CHECK(cfg.theta(1) == Catch::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(cfg.theta(2) == Catch::Approx(0.5).epsilon(1e-15));
  }

  SECTION("overrides are honoured and validated") {
    const SchemeConfig cfg({{PowerSeriesFamily::geometric(), 20, 0.25}}, 10);
    CHECK(cfg.theta(0) == 0.25);
    CHECK_THROWS_AS(
        SchemeConfig({{PowerSeriesFamily::geometric(), 20, 1.5}}, 10),
        DomainError);
  }

  SECTION("empty colours get an interior placeholder parameter") {
    const SchemeConfig cfg({{PowerSeriesFamily::geometric(), 0, {}},
                            {PowerSeriesFamily::poisson(), 0, {}}},
                           5);
    CHECK(cfg.theta(0) > 0.0);
    CHECK(cfg.theta(0) < 1.0);
    CHECK(cfg.theta(1) > 0.0);
  }

  SECTION("validation") {
    CHECK_THROWS_AS(SchemeConfig({}, 10), ValidationError);
    CHECK_THROWS_AS(SchemeConfig({{PowerSeriesFamily::poisson(), 5, {}}}, 0),
                    ValidationError);
    CHECK_THROWS_AS(SchemeConfig({{PowerSeriesFamily::poisson(), -1, {}}}, 4),
                    ValidationError);
    // density 3 balls per box is unattainable for a 2-trial family
    CHECK_THROWS_AS(SchemeConfig({{PowerSeriesFamily::binomial(2), 30, {}}}, 10),
                    RangeError);
    const SchemeConfig one({{PowerSeriesFamily::poisson(), 3, {}}}, 4);
    CHECK_THROWS_AS(one.family(1), ValidationError);
    CHECK_THROWS_AS(one.balls(-1), ValidationError);
  }
}

TEST_CASE("allocation sampling", "[scheme]") {
  SECTION("row sums are exact on every path") {
    // poisson and geometric ride the direct path; the custom family is small
    // enough for a table here, and gets forced onto rejection below.
    const SchemeConfig cfg({{PowerSeriesFamily::poisson(), 7, {}},
                            {PowerSeriesFamily::geometric(), 5, {}},
                            {mix_family(), 6, {}}},
                           4);
    const AllocationSampler sampler(cfg);
    CHECK(sampler.path(0) == AllocationSampler::Path::direct);
    CHECK(sampler.path(1) == AllocationSampler::Path::direct);
    CHECK(sampler.path(2) == AllocationSampler::Path::table);

    SchemeSamplerOptions tiny;
    tiny.table_cell_cap = 1.0;
    const AllocationSampler forced(cfg, tiny);
    CHECK(forced.path(2) == AllocationSampler::Path::rejection);

    Rng rng(kSeed);
    for (int rep = 0; rep < 100; ++rep) {
      for (const auto* s : {&sampler, &forced}) {
        const auto m = (*s)(rng);
        CHECK(m.row_sum(0) == 7);
        CHECK(m.row_sum(1) == 5);
        CHECK(m.row_sum(2) == 6);
        std::int64_t cols = 0;
        for (std::int64_t b = 0; b < 4; ++b) cols += m.column_total(b);
        CHECK(cols == 18);
      }
    }
  }

  SECTION("colours are independent", "[statistical]") {
    // K = 2 over 2 boxes: the joint law of (first colour row, second colour
    // row) must factor into the product of the exact single-colour laws.
    const SchemeConfig cfg({{PowerSeriesFamily::poisson(), 2, {}},
                            {PowerSeriesFamily::geometric(), 2, {}}},
                           2);
    const auto law0 = enumerate_conditional_law(cfg.family(0), 2, 2);
    const auto law1 = enumerate_conditional_law(cfg.family(1), 2, 2);
    const AllocationSampler sampler(cfg);
    Rng rng(derive_seed(kSeed, 1, 0));

    const std::int64_t draws = 100'000;
    std::vector<double> joint(law0.states.size() * law1.states.size(), 0.0);
    for (std::int64_t i = 0; i < draws; ++i) {
      const auto m = sampler(rng);
      const auto i0 = law0.index_of({m.at(0, 0), m.at(0, 1)});
      const auto i1 = law1.index_of({m.at(1, 0), m.at(1, 1)});
      REQUIRE(i0 >= 0);
      REQUIRE(i1 >= 0);
      joint[static_cast<std::size_t>(i0) * law1.states.size() +
            static_cast<std::size_t>(i1)] += 1.0;
    }
    std::vector<double> product(joint.size());
    for (std::size_t a = 0; a < law0.states.size(); ++a) {
      for (std::size_t b = 0; b < law1.states.size(); ++b) {
        joint[a * law1.states.size() + b] /= static_cast<double>(draws);
        product[a * law1.states.size() + b] = law0.probs[a] * law1.probs[b];
      }
    }
    CHECK(oracle::tv_distance(joint, product) < 0.02);
  }
}

TEST_CASE("occupancy counting", "[scheme]") {
  AllocationMatrix m;
  m.num_colours = 2;
  m.boxes = 4;
  // colour 0: 1 0 2 0 ; colour 1: 0 0 1 3
  m.counts = {1, 0, 2, 0, 0, 0, 1, 3};

  SECTION("vector targets") {
    CHECK(count_occupancy_vector(m, {0, 0}) == 1);  // box 1
    CHECK(count_occupancy_vector(m, {1, 0}) == 1);  // box 0
    CHECK(count_occupancy_vector(m, {2, 1}) == 1);  // box 2
    CHECK(count_occupancy_vector(m, {0, 3}) == 1);  // box 3
    CHECK(count_occupancy_vector(m, {5, 5}) == 0);
    CHECK_THROWS_AS(count_occupancy_vector(m, {0}), ValidationError);
  }

  SECTION("total targets") {
    CHECK(count_occupancy_total(m, 0) == 1);   // box 1
    CHECK(count_occupancy_total(m, 1) == 1);   // box 0
    CHECK(count_occupancy_total(m, 3) == 2);   // boxes 2 and 3
    CHECK(count_occupancy_total(m, 2) == 0);
  }

  SECTION("dispatch through the target type") {
    CHECK(count_occupancy(m, OccupancyTarget::vector_target({0, 0})) == 1);
    CHECK(count_occupancy(m, OccupancyTarget::total_target(3)) == 2);
    CHECK(OccupancyTarget::vector_target({1, 0, 2}).to_string() == "1;0;2");
    CHECK(OccupancyTarget::total_target(4).to_string() == "total:4");
  }

  SECTION("vector counts partition the boxes") {
    const SchemeConfig cfg({{PowerSeriesFamily::poisson(), 6, {}}}, 5);
    Rng rng(derive_seed(kSeed, 2, 0));
    const AllocationSampler sampler(cfg);
    for (int rep = 0; rep < 50; ++rep) {
      const auto mm = sampler(rng);
      std::int64_t acc = 0;
      for (std::int64_t s = 0; s <= 6; ++s) {
        acc += count_occupancy_vector(mm, {s});
      }
      CHECK(acc == 5);
    }
  }
}

TEST_CASE("scheme JSON round-trips", "[scheme]") {
  SECTION("built-in families serialize to their names") {
    CHECK(family_to_json(PowerSeriesFamily::poisson()) == "poisson");
    CHECK(family_to_json(PowerSeriesFamily::binomial(3)) ==
          nlohmann::json("binomial(3)"));
  }

  SECTION("coefficient families serialize to objects") {
    const auto j = family_to_json(mix_family());
    REQUIRE(j.is_object());
    const auto back = family_from_json(j);
    CHECK(back.name() == "mix");
    CHECK(back.coeff(2) == 3.0);
    CHECK(back.support_bound().value() == 3);
  }

  SECTION("callback families are not serializable") {
    const auto cb = PowerSeriesFamily::from_log_coefficients(
        "cb", [](std::int64_t) { return 0.0; }, 1.0);
    CHECK_THROWS_AS(family_to_json(cb), ValidationError);
  }

  SECTION("scheme round-trip preserves colours, boxes and overrides") {
    const std::vector<ColourSpec> colours = {
        {PowerSeriesFamily::poisson(), 15, {}},
        {PowerSeriesFamily::geometric(), 20, 0.25}};
    const auto j = scheme_to_json(colours, 10);
    CHECK(j["N"] == 10);
    CHECK(j["colours"][0]["theta"].is_null());
    CHECK(j["colours"][1]["theta"] == 0.25);
    const auto back = scheme_from_json(j);
    CHECK(back.boxes == 10);
    REQUIRE(back.colours.size() == 2);
    CHECK(back.colours[0].balls == 15);
    CHECK_FALSE(back.colours[0].theta.has_value());
    CHECK(back.colours[1].theta.value() == 0.25);
  }

  SECTION("family spec strings") {
    CHECK(parse_family_spec("poisson").kind() ==
          PowerSeriesFamily::Kind::poisson);
    CHECK(parse_family_spec("binomial(5)").support_bound().value() == 5);
    CHECK(parse_family_spec("binomial:5").support_bound().value() == 5);
    CHECK_THROWS_AS(parse_family_spec("zeta"), ValidationError);
    CHECK_THROWS_AS(parse_family_spec("binomial(0)"), ValidationError);
    CHECK_THROWS_AS(parse_family_spec("binomial(x)"), ValidationError);
  }

  SECTION("malformed scheme documents") {
    CHECK_THROWS_AS(scheme_from_json(nlohmann::json::parse("{}")),
                    ValidationError);
    CHECK_THROWS_AS(
        scheme_from_json(nlohmann::json::parse(R"({"colours":[],"N":4})")),
        ValidationError);
  }
}
