#include <catch2/catch_amalgamated.hpp>

#include "pfilter/model.hpp"
#include "pfilter/montecarlo.hpp"
#include "support.hpp"

using namespace pfilter;

TEST_CASE("dotfrac three-valued construction") {
  CHECK(dotfrac(0.0, 0.0).is_zero());
  CHECK(dotfrac(0.0, 0.0).numeric() == 0.0);
  CHECK(dotfrac(0.0, 5.0).is_zero());
  CHECK(dotfrac(3.0, 4.0).is_value());
  CHECK(dotfrac(3.0, 4.0).numeric() == 0.75);
  CHECK(dotfrac(2.0, 0.0).is_undefined());
  CHECK_THROWS_AS(dotfrac(2.0, 0.0).numeric(), std::domain_error);
  CHECK_THROWS_AS(dotfrac(-1.0, 1.0), std::domain_error);
}

TEST_CASE("dotfraction algebra holds on random rationals") {
  RngStream rng(11);
  CHECK(testing::dotfrac_property_violations(rng, 20000) == 0);
}

TEST_CASE("validate flags the spec's example violations") {
  Problem problem;
  problem.pvalues = {0.1, 0.2, 0.3, 0.4};
  problem.layers.push_back(make_layer({{0, 1}, {2, 3}}, 0.1));

  SECTION("well-formed problem passes") {
    CHECK(validate(problem).empty());
  }

  SECTION("weight normalization violation is reported") {
    problem.layers[0].prior_weights = {2.0, 2.0};
    const auto bad = validate(problem);
    REQUIRE_FALSE(bad.empty());
    CHECK(bad.front().find("weight normalization") != std::string::npos);
  }

  SECTION("group index out of range is reported with coordinates") {
    problem.layers[0].groups[1] = {2, 4};
    const auto bad = validate(problem);
    REQUIRE_FALSE(bad.empty());
    CHECK(bad.front().find("layers[0].groups[1]") != std::string::npos);
    CHECK(bad.front().find("out of range") != std::string::npos);
  }

  SECTION("adaptive layer with lambda = 1 is a configuration error") {
    problem.layers[0].adaptive = true;
    problem.layers[0].lambda = 1.0;
    CHECK_FALSE(validate(problem).empty());
  }

  SECTION("p-values outside [0,1] are rejected") {
    problem.pvalues[2] = 1.5;
    CHECK_FALSE(validate(problem).empty());
  }
}

TEST_CASE("normalize_prior_weights enforces sum u*w = G exactly") {
  Layer layer = make_layer({{0}, {1}, {2}}, 0.1);
  layer.prior_weights = {0.3, 1.1, 2.0};
  layer.penalty_weights = {1.4, 0.6, 1.0};
  normalize_prior_weights(layer);
  double uw = 0.0;
  for (int g = 0; g < 3; ++g) uw += layer.prior_weights[g] * layer.penalty_weights[g];
  CHECK(uw == Catch::Approx(3.0).epsilon(1e-14));
}

TEST_CASE("leftover sets") {
  Layer complete = make_layer({{0, 1}, {2, 3}}, 0.1);
  CHECK(leftover(complete, 4).empty());

  Layer partial = make_layer({{0, 1}}, 0.1);
  CHECK(leftover(partial, 4) == std::vector<int>{2, 3});

  Layer overlapping = make_layer({{0, 1}, {1, 2}}, 0.1);
  CHECK(leftover(overlapping, 3).empty());
}

TEST_CASE("group membership") {
  Layer layer = make_layer({{0, 1}, {1, 2}}, 0.1);
  CHECK(group_membership(layer, 1) == std::vector<int>{0, 1});
  CHECK(group_membership(layer, 0) == std::vector<int>{0});

  Layer partial = make_layer({{0, 1}}, 0.1);
  CHECK(group_membership(partial, 3).empty());
}

TEST_CASE("membership is empty exactly on the leftover set") {
  RngStream rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const Problem problem = random_problem(rng);
    for (const auto& layer : problem.layers) {
      const auto left = leftover(layer, problem.n());
      for (int i = 0; i < problem.n(); ++i) {
        const bool in_left = std::find(left.begin(), left.end(), i) != left.end();
        CHECK(group_membership(layer, i).empty() == in_left);
      }
    }
  }
}

TEST_CASE("validate accepts everything the random generator builds") {
  RngStream rng(23);
  for (int trial = 0; trial < 1000; ++trial) {
    const Problem problem = random_problem(rng);
    const auto bad = validate(problem);
    if (!bad.empty()) {
      for (const auto& msg : bad) UNSCOPED_INFO(msg);
    }
    REQUIRE(bad.empty());
  }
}
