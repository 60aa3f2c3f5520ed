#include <catch2/catch_amalgamated.hpp>

#include "pfilter/adapt.hpp"
#include "pfilter/model.hpp"
#include "pfilter/stats.hpp"

using namespace pfilter;

namespace {

Layer adaptive_layer(int G, double lambda) {
  std::vector<std::vector<int>> groups;
  for (int g = 0; g < G; ++g) groups.push_back({g});
  Layer layer = make_layer(std::move(groups), 0.1);
  layer.adaptive = true;
  layer.lambda = lambda;
  return layer;
}

}  // namespace

TEST_CASE("pi_hat") {
  SECTION("non-adaptive layers return 1 exactly") {
    Layer layer = make_layer({{0}, {1}}, 0.1);
    CHECK(pi_hat(layer, {0.9, 0.9}) == 1.0);
  }

  SECTION("unit weights reduce to the Storey form") {
    const Layer layer = adaptive_layer(4, 0.5);
    CHECK(pi_hat(layer, {0.01, 0.02, 0.3, 0.6}) == Catch::Approx(1.0).epsilon(1e-14));
    CHECK(pi_hat(layer, {0.6, 0.7, 0.8, 0.9}) == Catch::Approx(2.5).epsilon(1e-14));
  }

  SECTION("ties at lambda do not count as exceedances") {
    const Layer layer = adaptive_layer(2, 0.5);
    CHECK(pi_hat(layer, {0.5, 0.5}) == Catch::Approx(1.0).epsilon(1e-14));
  }

  SECTION("lambda = 1 with adaptivity is rejected") {
    Layer layer = adaptive_layer(2, 0.5);
    layer.lambda = 1.0;
    CHECK_THROWS_AS(pi_hat(layer, {0.5, 0.5}), std::invalid_argument);
  }
}

TEST_CASE("pi_hat_loo") {
  const Layer layer = adaptive_layer(4, 0.5);
  const std::vector<double> gp{0.01, 0.02, 0.3, 0.6};

  CHECK(pi_hat_loo(layer, gp, 3) == Catch::Approx(0.5).epsilon(1e-14));
  // dropping a non-exceeding group changes nothing
  CHECK(pi_hat_loo(layer, gp, 0) == pi_hat(layer, gp));

  Layer plain = make_layer({{0}, {1}}, 0.1);
  CHECK(pi_hat_loo(plain, {0.9, 0.9}, 0) == 1.0);
}

TEST_CASE("pi_hat properties on random inputs") {
  RngStream rng(404);
  for (int it = 0; it < 5000; ++it) {
    const int G = 1 + static_cast<int>(rng.below(8));
    Layer layer = adaptive_layer(G, rng.uniform(0.2, 0.8));
    for (int g = 0; g < G; ++g) {
      layer.prior_weights[g] = rng.uniform(0.4, 2.0);
      layer.penalty_weights[g] = rng.uniform(0.4, 2.0);
    }
    normalize_prior_weights(layer);
    std::vector<double> gp(G);
    for (auto& v : gp) v = rng.uniform();

    const double value = pi_hat(layer, gp);

    // positivity floor from the |u.w|_inf term
    REQUIRE(value >= layer.max_norm() / (G * (1.0 - layer.lambda)) - 1e-12);
    REQUIRE(value > 0.0);

    // nondecreasing under a componentwise increase
    std::vector<double> raised = gp;
    for (auto& v : raised) v = std::min(1.0, v + rng.uniform(0.0, 0.5));
    REQUIRE(pi_hat(layer, raised) >= value - 1e-12);

    // leave-one-out never exceeds the full estimator
    for (int g = 0; g < G; ++g) REQUIRE(pi_hat_loo(layer, gp, g) <= value + 1e-12);
  }
}
