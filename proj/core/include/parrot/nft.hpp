#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "parrot/reward.hpp"
#include "parrot/util.hpp"

namespace parrot {

struct DivergedLoss : std::runtime_error {
  explicit DivergedLoss(std::size_t iter)
      : std::runtime_error("loss became non-finite at iteration " + std::to_string(iter)) {}
};

// alpha(0)=1, sigma(0)=0: clean data at t=0, pure noise at t=1.
struct NoiseSchedule {
  std::function<double(double)> alpha, sigma, dalpha, dsigma;

  static NoiseSchedule rectified_flow() {
    return {[](double t) { return 1.0 - t; }, [](double t) { return t; },
            [](double) { return -1.0; }, [](double) { return 1.0; }};
  }
};

// x_t = alpha(t) x0 + sigma(t) eps; target v = alpha'(t) x0 + sigma'(t) eps.
std::pair<Eigen::Vector2d, Eigen::Vector2d> noisify(const Eigen::Vector2d& x0, double t,
                                                    const Eigen::Vector2d& eps,
                                                    const NoiseSchedule& schedule);

// v+ = (1-beta) v_old + beta v_theta; v- = (1+beta) v_old - beta v_theta.
std::pair<Eigen::Vector2d, Eigen::Vector2d> implicit_velocities(const Eigen::Vector2d& v_old,
                                                                const Eigen::Vector2d& v_theta,
                                                                double beta);

// r |v+ - v|^2 + (1-r) |v- - v|^2.
double nft_loss(double r_norm, const Eigen::Vector2d& v_plus, const Eigen::Vector2d& v_minus,
                const Eigen::Vector2d& v_target);

// theta_old <- eta * theta_old + (1 - eta) * theta, elementwise.
Eigen::VectorXd ema_update(const Eigen::VectorXd& theta_old, const Eigen::VectorXd& theta,
                           double eta);

// Small MLP velocity-field regressor v(x, cond, t) -> R^2 with two tanh
// hidden layers. Parameters live in a flat vector so EMA shadows, checkpoints
// and finite differences all see the same layout.
class VelocityNet {
 public:
  VelocityNet(int n_cond, int hidden, Rng& init_rng);

  Eigen::Vector2d forward(const Eigen::Vector2d& x, int cond, double t) const;

  // Adds d(loss)/d(params) for one sample into `grad`, given dL/d(output).
  void accumulate_grad(const Eigen::Vector2d& x, int cond, double t,
                       const Eigen::Vector2d& dL_dout, Eigen::VectorXd& grad) const;

  const Eigen::VectorXd& params() const { return params_; }
  void set_params(const Eigen::VectorXd& p);
  int param_count() const { return static_cast<int>(params_.size()); }
  int n_cond() const { return n_cond_; }
  int hidden() const { return hidden_; }

 private:
  Eigen::VectorXd input_vec(const Eigen::Vector2d& x, int cond, double t) const;

  int n_cond_;
  int hidden_;
  int input_dim_;
  Eigen::VectorXd params_;
};

class AdamOptimizer {
 public:
  AdamOptimizer(int n, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  Eigen::VectorXd m_, v_;
};

using RewardFn = std::function<double(const Eigen::Vector2d& x0, int cond)>;
using BaseSampler = std::function<Eigen::Vector2d(Rng& rng, int cond)>;

struct NftConfig {
  int group_size = 16;      // K
  double beta = 1e-4;       // guidance strength
  std::vector<double> ema;  // per-iteration schedule; last value repeats
  double learning_rate = 1e-3;
  int iterations = 500;
  int n_cond = 1;
  double noise_level = 0.7;  // upper bound for the re-noising timestep
  int sample_steps = 15;     // Euler steps when sampling from the EMA policy
  int hidden = 64;
  std::uint64_t seed = 0;

  double ema_at(int iter) const {
    if (ema.empty()) return 0.9;
    const std::size_t i = std::min(static_cast<std::size_t>(iter), ema.size() - 1);
    return ema[i];
  }
};

struct IterationMetrics {
  int iter = 0;
  double mean_reward = 0.0;
  double reward_std = 0.0;
  double loss = 0.0;
  bool group_skipped = false;
};

// Deterministic Euler integration of the velocity field from t=1 to t=0.
Eigen::Vector2d sample_euler(const VelocityNet& net, int cond, const Eigen::Vector2d& noise,
                             int steps);

// Plain flow matching on the base distribution; leaves the net fit so that
// sampling from its EMA shadow is meaningful.
void pretrain_flow_matching(VelocityNet& net, const BaseSampler& base, int steps, int batch,
                            double lr, Rng& rng, const NoiseSchedule& schedule);

struct TrainResult {
  Eigen::VectorXd theta;
  Eigen::VectorXd theta_old;
  std::vector<IterationMetrics> metrics;
};

// The group-normalized contrastive flow-matching loop: sample K generations
// per condition from the EMA policy, score, normalize, filter, take one
// gradient step on the re-noisified batch, then soft-update the EMA shadow.
TrainResult train_nft(const NftConfig& cfg, const RewardFn& reward, VelocityNet& net,
                      const NoiseSchedule& schedule = NoiseSchedule::rectified_flow(),
                      const RewardOptions& reward_opts = {});

// Toy task: symmetric two-Gaussian base distribution and a negative-distance
// reward toward one mode.
BaseSampler two_gaussian_sampler(double separation = 2.0, double stddev = 0.5);
RewardFn distance_reward(const Eigen::Vector2d& target);

void save_checkpoint(const std::string& path, const VelocityNet& net);
void load_checkpoint(const std::string& path, VelocityNet& net);

}  // namespace parrot
