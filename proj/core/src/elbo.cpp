#include "parrot/elbo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace parrot {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_row(const std::vector<double>& row, double tol, const char* what) {
  double sum = 0.0;
  for (double p : row) {
    if (p < 0.0) throw InvalidDistribution(std::string(what) + ": negative entry");
    sum += p;
  }
  if (std::abs(sum - 1.0) > tol) {
    throw InvalidDistribution(std::string(what) + ": row sums to " + std::to_string(sum));
  }
}

}  // namespace

void DiscreteModel::validate(double tol) const {
  if (prior.empty() || likelihood.size() != prior.size()) {
    throw InvalidDistribution("model: shape mismatch between prior and likelihood");
  }
  for (std::size_t x = 0; x < prior.size(); ++x) {
    check_row(prior[x], tol, "prior");
    if (likelihood[x].size() != prior[x].size()) {
      throw InvalidDistribution("model: likelihood z-dimension mismatch");
    }
    for (const auto& row : likelihood[x]) check_row(row, tol, "likelihood");
  }
}

void VariationalPosterior::validate(double tol) const {
  for (const auto& per_x : table) {
    for (const auto& row : per_x) check_row(row, tol, "posterior");
  }
}

double log_marginal(const DiscreteModel& m, std::size_t x, std::size_t y) {
  double p = 0.0;
  for (std::size_t z = 0; z < m.num_z(); ++z) {
    p += m.prior[x][z] * m.likelihood[x][z][y];
  }
  return std::log(p);
}

std::vector<double> true_posterior(const DiscreteModel& m, std::size_t x, std::size_t y) {
  std::vector<double> post(m.num_z());
  double norm = 0.0;
  for (std::size_t z = 0; z < m.num_z(); ++z) {
    post[z] = m.prior[x][z] * m.likelihood[x][z][y];
    norm += post[z];
  }
  if (norm <= 0.0) throw InvalidDistribution("true_posterior: zero marginal");
  for (double& p : post) p /= norm;
  return post;
}

double kl_divergence(const std::vector<double>& q, const std::vector<double>& p) {
  double kl = 0.0;
  for (std::size_t z = 0; z < q.size(); ++z) {
    if (q[z] == 0.0) continue;  // 0*log(0) = 0
    if (p[z] == 0.0) return kInf;
    kl += q[z] * std::log(q[z] / p[z]);
  }
  return kl;
}

double term1(const DiscreteModel& m, const VariationalPosterior& q, std::size_t x, std::size_t y) {
  double t = 0.0;
  for (std::size_t z = 0; z < m.num_z(); ++z) {
    const double w = q.row(x, y)[z];
    if (w == 0.0) continue;
    const double lik = m.likelihood[x][z][y];
    if (lik == 0.0) return -kInf;
    t += w * std::log(lik);
  }
  return t;
}

double elbo(const DiscreteModel& m, const VariationalPosterior& q, std::size_t x, std::size_t y) {
  m.validate();
  q.validate();
  return term1(m, q, x, y) - kl_divergence(q.row(x, y), m.prior[x]);
}

int consistency_indicator(const DiscreteModel& m, std::size_t x, std::size_t y, std::size_t z) {
  const auto& row = m.likelihood[x][z];
  const double best = *std::max_element(row.begin(), row.end());
  // Ties fail: z must decisively explain y.
  std::size_t argmax_count = 0;
  for (double p : row) {
    if (p == best) ++argmax_count;
  }
  return (argmax_count == 1 && row[y] == best) ? 1 : 0;
}

double filtered_term1(const DiscreteModel& m, const VariationalPosterior& q, std::size_t x,
                      std::size_t y) {
  double mass = 0.0, t = 0.0;
  bool any = false;
  for (std::size_t z = 0; z < m.num_z(); ++z) {
    if (consistency_indicator(m, x, y, z) != 1) continue;
    any = true;
    const double w = q.row(x, y)[z];
    if (w == 0.0) continue;
    mass += w;
    t += w * std::log(m.likelihood[x][z][y]);
  }
  if (!any || mass == 0.0) throw EmptySupport();
  return t / mass;
}

namespace {

std::vector<double> dirichlet_row(Rng& rng, std::size_t n) {
  std::vector<double> row(n);
  double sum = 0.0;
  for (double& v : row) {
    v = rng.exponential();
    sum += v;
  }
  for (double& v : row) v /= sum;
  return row;
}

}  // namespace

DiscreteModel random_model(Rng& rng, std::size_t nx, std::size_t ny, std::size_t nz) {
  DiscreteModel m;
  m.prior.resize(nx);
  m.likelihood.resize(nx);
  for (std::size_t x = 0; x < nx; ++x) {
    m.prior[x] = dirichlet_row(rng, nz);
    m.likelihood[x].resize(nz);
    for (std::size_t z = 0; z < nz; ++z) m.likelihood[x][z] = dirichlet_row(rng, ny);
  }
  return m;
}

VariationalPosterior random_posterior(Rng& rng, const DiscreteModel& m) {
  VariationalPosterior q;
  q.table.resize(m.num_x());
  for (std::size_t x = 0; x < m.num_x(); ++x) {
    q.table[x].resize(m.num_y());
    for (std::size_t y = 0; y < m.num_y(); ++y) q.table[x][y] = dirichlet_row(rng, m.num_z());
  }
  return q;
}

ElboCheckReport run_elbo_check(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  ElboCheckReport report;
  report.models = n;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t nz = 2 + static_cast<std::size_t>(rng.uniform_int(0, 3));
    const DiscreteModel m = random_model(rng, /*nx=*/1, /*ny=*/2, nz);
    const VariationalPosterior q = random_posterior(rng, m);
    for (std::size_t y = 0; y < m.num_y(); ++y) {
      const double bound = elbo(m, q, 0, y);
      const double logm = log_marginal(m, 0, y);
      const double gap = logm - bound;
      const double kl = kl_divergence(q.row(0, y), true_posterior(m, 0, y));
      report.max_bound_violation = std::max(report.max_bound_violation, bound - logm);
      report.max_tightness_residual = std::max(report.max_tightness_residual, std::abs(gap - kl));
    }
  }
  return report;
}

}  // namespace parrot
