#pragma once

#include <stdexcept>
#include <vector>

#include "parrot/util.hpp"

namespace parrot {

struct InvalidDistribution : std::runtime_error {
  explicit InvalidDistribution(const std::string& what) : std::runtime_error(what) {}
};

struct EmptySupport : std::runtime_error {
  EmptySupport() : std::runtime_error("no latent survives the consistency filter") {}
};

// Finite joint model over (x, y, z): prior tables P(z|x) and likelihood
// tables P(y|x,z). Rows must sum to 1.
struct DiscreteModel {
  // prior[x][z]
  std::vector<std::vector<double>> prior;
  // likelihood[x][z][y]
  std::vector<std::vector<std::vector<double>>> likelihood;

  std::size_t num_x() const { return prior.size(); }
  std::size_t num_z() const { return prior.empty() ? 0 : prior[0].size(); }
  std::size_t num_y() const {
    return likelihood.empty() || likelihood[0].empty() ? 0 : likelihood[0][0].size();
  }

  void validate(double tol = 1e-12) const;
};

// Variational posterior q(z|x,y): table[x][y][z].
struct VariationalPosterior {
  std::vector<std::vector<std::vector<double>>> table;

  const std::vector<double>& row(std::size_t x, std::size_t y) const { return table[x][y]; }
  void validate(double tol = 1e-12) const;
};

// Exact log P(y|x) by summation over z.
double log_marginal(const DiscreteModel& m, std::size_t x, std::size_t y);

// Exact posterior P(z|x,y), normalized.
std::vector<double> true_posterior(const DiscreteModel& m, std::size_t x, std::size_t y);

// Term 1 - Term 2 with the 0*log(0)=0 convention; may be -inf when q puts
// mass on a zero-likelihood latent.
double elbo(const DiscreteModel& m, const VariationalPosterior& q, std::size_t x, std::size_t y);

// KL(q(.|x,y) || p) for an arbitrary reference row p over z; +inf when q's
// support exceeds p's.
double kl_divergence(const std::vector<double>& q, const std::vector<double>& p);

// 1 iff argmax_y' P(y'|x,z) == y, ties counting as failure.
int consistency_indicator(const DiscreteModel& m, std::size_t x, std::size_t y, std::size_t z);

// Expectation of log P(y|x,z) under q renormalized to the latents that pass
// the consistency indicator.
double filtered_term1(const DiscreteModel& m, const VariationalPosterior& q, std::size_t x,
                      std::size_t y);

// Unrestricted Term 1 for comparison.
double term1(const DiscreteModel& m, const VariationalPosterior& q, std::size_t x, std::size_t y);

// Flat-Dirichlet random instances for the numerical suite.
DiscreteModel random_model(Rng& rng, std::size_t nx, std::size_t ny, std::size_t nz);
VariationalPosterior random_posterior(Rng& rng, const DiscreteModel& m);

struct ElboCheckReport {
  std::size_t models = 0;
  double max_bound_violation = 0.0;   // max over all (x,y) of elbo - log_marginal
  double max_tightness_residual = 0.0;  // max |gap - KL(q || posterior)|
};

// Runs the bound and tightness identities over `n` random models.
ElboCheckReport run_elbo_check(std::size_t n, std::uint64_t seed);

}  // namespace parrot
