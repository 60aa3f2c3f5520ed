#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "pfilter/combine.hpp"
#include "pfilter/montecarlo.hpp"

using namespace pfilter;

TEST_CASE("simes") {
  CHECK(simes({0.5}) == 0.5);
  CHECK(simes({0.01, 0.02, 0.3, 0.5}) == Catch::Approx(0.04).epsilon(1e-12));
  CHECK(simes({1.0, 1.0, 1.0}) == 1.0);
  CHECK_THROWS_AS(simes({}), std::invalid_argument);
}

TEST_CASE("weighted_simes") {
  CHECK(weighted_simes({0.02, 0.5}, {1.0, 1.0}) == Catch::Approx(0.04).epsilon(1e-12));
  CHECK(weighted_simes({0.02, 0.5}, {2.0, 1.0}) == Catch::Approx(0.02).epsilon(1e-12));
  CHECK(weighted_simes({1.0}, {1.0}) == 1.0);
  CHECK_THROWS_AS(weighted_simes({0.5}, {0.5, 0.5}), std::invalid_argument);
  CHECK_THROWS_AS(weighted_simes({0.5, 0.5}, {1.0, 0.0}), std::invalid_argument);
}

TEST_CASE("reshaped_weighted_simes") {
  const std::vector<double> p{0.01, 0.02, 0.3, 0.5};
  const std::vector<double> w{1.0, 1.0, 1.0, 1.0};
  CHECK(reshaped_weighted_simes(p, w, ReshapeSpec::identity()) ==
        Catch::Approx(0.04).epsilon(1e-12));
  // with beta_BY the harmonic factor H = 25/12 scales the Simes value
  CHECK(reshaped_weighted_simes(p, w, ReshapeSpec::by(4)) ==
        Catch::Approx(1.0 / 12.0).epsilon(1e-12));
  CHECK(reshaped_weighted_simes({1.0}, {1.0}, ReshapeSpec::by(1)) == 1.0);
  // a measure living entirely above m makes every beta(k) vanish
  CHECK_THROWS_AS(reshaped_weighted_simes({0.5}, {1.0},
                                          ReshapeSpec::discrete({{5.0, 1.0}})),
                  std::invalid_argument);
}

TEST_CASE("fisher matches the closed-form even-df tails") {
  CHECK(fisher({0.5}) == Catch::Approx(0.5).epsilon(1e-10));
  CHECK(fisher({1.0, 1.0}) == 1.0);
  // df = 4: survival = exp(-s/2) (1 + s/2) at s = -4 ln 0.1
  const double s = -4.0 * std::log(0.1);
  const double expected = std::exp(-s / 2.0) * (1.0 + s / 2.0);
  CHECK(fisher({0.1, 0.1}) == Catch::Approx(expected).epsilon(1e-10));
  CHECK(expected == Catch::Approx(0.0560517).epsilon(1e-5));
  CHECK(fisher({0.0, 0.5}) == 0.0);
}

TEST_CASE("stouffer") {
  CHECK(stouffer({0.5, 0.5}) == Catch::Approx(0.5).epsilon(1e-10));
  CHECK(stouffer({0.5}) == Catch::Approx(0.5).epsilon(1e-10));
  const double z = normal_quantile(0.025);
  const double expected = normal_cdf(2.0 * z / std::sqrt(2.0));
  CHECK(stouffer({0.025, 0.025}) == Catch::Approx(expected).epsilon(1e-10));
  CHECK(expected == Catch::Approx(0.00279).epsilon(1e-2));
  CHECK(stouffer({0.0, 0.5}) == 0.0);
  CHECK(stouffer({1.0, 0.5}) == 1.0);
}

TEST_CASE("bonferroni, ruschendorf, ruger") {
  CHECK(bonferroni({0.01, 0.2, 0.3}) == Catch::Approx(0.03).epsilon(1e-12));
  CHECK(bonferroni({0.5}) == 0.5);
  CHECK(bonferroni({0.9, 0.9}) == 1.0);

  CHECK(ruschendorf({0.1, 0.2}) == Catch::Approx(0.3).epsilon(1e-12));
  CHECK(ruschendorf({0.0}) == 0.0);
  CHECK(ruschendorf({0.9, 0.9}) == 1.0);

  CHECK(ruger({0.01, 0.2, 0.9}, 2) == Catch::Approx(0.3).epsilon(1e-12));
  CHECK(ruger({0.01, 0.2, 0.9}, 1) == bonferroni({0.01, 0.2, 0.9}));
  CHECK(ruger({0.5}, 1) == 0.5);
  CHECK_THROWS_AS(ruger({0.5}, 2), std::invalid_argument);
}

TEST_CASE("group_pvalues") {
  Problem problem;
  problem.pvalues = {0.01, 0.9, 0.9, 0.9};

  SECTION("finest partition returns the base p-values for the Simes family") {
    problem.layers.push_back(make_finest_layer(4, 0.1));
    CHECK(group_pvalues(problem, 0) == problem.pvalues);
  }

  SECTION("per-group Simes") {
    problem.layers.push_back(make_layer({{0, 1}, {2, 3}}, 0.1));
    const auto gp = group_pvalues(problem, 0);
    CHECK(gp[0] == Catch::Approx(0.02).epsilon(1e-12));
    CHECK(gp[1] == Catch::Approx(0.9).epsilon(1e-12));
  }

  SECTION("external passthrough") {
    problem.layers.push_back(
        make_layer({{0, 1}, {2, 3}}, 0.1, CombinerSpec::external({0.3, 0.7})));
    CHECK(group_pvalues(problem, 0) == std::vector<double>{0.3, 0.7});
  }
}

TEST_CASE("combiner outputs are p-values, permutation-invariant, and the Simes family is monotone") {
  RngStream rng(301);
  using Fn = double (*)(const std::vector<double>&);
  const Fn combiners[] = {simes, fisher, stouffer, bonferroni, ruschendorf};
  for (int it = 0; it < 10000; ++it) {
    const int m = 1 + static_cast<int>(rng.below(6));
    std::vector<double> p(m);
    for (auto& v : p) v = rng.uniform();

    std::vector<double> shuffled = p;
    for (int i = m - 1; i > 0; --i)
      std::swap(shuffled[i], shuffled[rng.below(i + 1)]);

    for (const auto& fn : combiners) {
      const double value = fn(p);
      REQUIRE(value >= 0.0);
      REQUIRE(value <= 1.0);
      REQUIRE(fn(shuffled) == value);
    }

    // monotonicity of the Simes family under a pointwise decrease
    std::vector<double> lowered = p;
    lowered[rng.below(m)] *= rng.uniform();
    REQUIRE(simes(lowered) <= simes(p));
    std::vector<double> w(m);
    for (auto& v : w) v = rng.uniform(0.5, 2.0);
    REQUIRE(weighted_simes(lowered, w) <= weighted_simes(p, w));
    const auto spec = ReshapeSpec::by(m);
    REQUIRE(reshaped_weighted_simes(lowered, w, spec) <=
            reshaped_weighted_simes(p, w, spec));
  }
}

TEST_CASE("weighted_simes with unit weights equals simes exactly") {
  RngStream rng(302);
  for (int it = 0; it < 2000; ++it) {
    const int m = 1 + static_cast<int>(rng.below(8));
    std::vector<double> p(m);
    for (auto& v : p) v = rng.uniform();
    const std::vector<double> unit(m, 1.0);
    REQUIRE(weighted_simes(p, unit) == simes(p));
    REQUIRE(reshaped_weighted_simes(p, unit, ReshapeSpec::identity()) ==
            weighted_simes(p, unit));
  }
}

TEST_CASE("simes of independent uniforms is uniform (KS)") {
  const double ks = simes_uniformity_ks(10, {}, 100000, 5150);
  CHECK(ks < 0.01);
}

TEST_CASE("BY-reshaped Simes is stochastically super-uniform") {
  const auto model = all_null_model(10, SimModel::Dep::Independent, 0.0, 1, 77);
  const auto dom = simes_dominance(model, {}, true, ReshapeSpec::by(10), 40000);
  CHECK(dom.pass);
}
