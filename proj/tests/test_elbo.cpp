#include <doctest.h>

#include <cmath>

#include "parrot/elbo.hpp"

using namespace parrot;

namespace {

// Two latents, two outcomes; z=0 strongly predicts y=0.
DiscreteModel tiny_model() {
  DiscreteModel m;
  m.prior = {{0.6, 0.4}};
  m.likelihood = {{{0.9, 0.1}, {0.3, 0.7}}};
  return m;
}

}  // namespace

TEST_CASE("model validation") {
  DiscreteModel m = tiny_model();
  m.validate();
  m.prior[0][0] = 0.7;  // row no longer sums to 1
  CHECK_THROWS_AS(m.validate(), InvalidDistribution);
}

TEST_CASE("log marginal by exact summation") {
  const DiscreteModel m = tiny_model();
  // P(y=0|x) = 0.6*0.9 + 0.4*0.3 = 0.66
  CHECK(log_marginal(m, 0, 0) == doctest::Approx(std::log(0.66)).epsilon(1e-12));
  CHECK(log_marginal(m, 0, 1) == doctest::Approx(std::log(0.34)).epsilon(1e-12));
}

TEST_CASE("elbo equals log marginal when q is the true posterior") {
  const DiscreteModel m = tiny_model();
  VariationalPosterior q;
  q.table = {{true_posterior(m, 0, 0), true_posterior(m, 0, 1)}};
  for (std::size_t y = 0; y < 2; ++y) {
    CHECK(elbo(m, q, 0, y) == doctest::Approx(log_marginal(m, 0, y)).epsilon(1e-12));
  }
}

TEST_CASE("bound and tightness identities over random models") {
  Rng rng(404);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t nz = static_cast<std::size_t>(rng.uniform_int(2, 5));
    const DiscreteModel m = random_model(rng, 1, 2, nz);
    const VariationalPosterior q = random_posterior(rng, m);
    for (std::size_t y = 0; y < 2; ++y) {
      const double lm = log_marginal(m, 0, y);
      const double bound = elbo(m, q, 0, y);
      CHECK(bound <= lm + 1e-9);
      const double gap = lm - bound;
      const double kl = kl_divergence(q.row(0, y), true_posterior(m, 0, y));
      CHECK(std::abs(gap - kl) <= 1e-9);
    }
  }
}

TEST_CASE("kl divergence support rule and zero convention") {
  CHECK(kl_divergence({0.5, 0.5}, {0.5, 0.5}) == doctest::Approx(0.0));
  CHECK(kl_divergence({1.0, 0.0}, {0.5, 0.5}) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(std::isinf(kl_divergence({0.5, 0.5}, {1.0, 0.0})));
}

TEST_CASE("consistency indicator with tie as failure") {
  DiscreteModel m;
  m.prior = {{0.5, 0.5}};
  m.likelihood = {{{0.8, 0.2}, {0.5, 0.5}}};  // z=1 ties exactly
  CHECK(consistency_indicator(m, 0, 0, 0) == 1);
  CHECK(consistency_indicator(m, 0, 1, 0) == 0);
  CHECK(consistency_indicator(m, 0, 0, 1) == 0);  // tie counts as failure
  CHECK(consistency_indicator(m, 0, 1, 1) == 0);
}

TEST_CASE("filtered term1 never falls below unfiltered term1 for binary outcomes") {
  Rng rng(7011);
  int compared = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t nz = static_cast<std::size_t>(rng.uniform_int(2, 5));
    const DiscreteModel m = random_model(rng, 1, 2, nz);
    const VariationalPosterior q = random_posterior(rng, m);
    for (std::size_t y = 0; y < 2; ++y) {
      bool any_pass = false;
      for (std::size_t z = 0; z < nz; ++z)
        if (consistency_indicator(m, 0, y, z) == 1) any_pass = true;
      if (!any_pass) {
        CHECK_THROWS_AS(filtered_term1(m, q, 0, y), EmptySupport);
        continue;
      }
      CHECK(filtered_term1(m, q, 0, y) >= term1(m, q, 0, y) - 1e-12);
      ++compared;
    }
  }
  CHECK(compared > 100);
}

TEST_CASE("seeded check run is deterministic and within tolerance") {
  const ElboCheckReport a = run_elbo_check(50, 42);
  const ElboCheckReport b = run_elbo_check(50, 42);
  CHECK(a.models == 50);
  CHECK(a.max_bound_violation == b.max_bound_violation);
  CHECK(a.max_tightness_residual == b.max_tightness_residual);
  CHECK(a.max_bound_violation <= 1e-9);
  CHECK(a.max_tightness_residual <= 1e-9);
}
