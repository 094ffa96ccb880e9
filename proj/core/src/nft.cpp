#include "parrot/nft.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace parrot {

std::pair<Eigen::Vector2d, Eigen::Vector2d> noisify(const Eigen::Vector2d& x0, double t,
                                                    const Eigen::Vector2d& eps,
                                                    const NoiseSchedule& schedule) {
  const Eigen::Vector2d xt = schedule.alpha(t) * x0 + schedule.sigma(t) * eps;
  const Eigen::Vector2d v = schedule.dalpha(t) * x0 + schedule.dsigma(t) * eps;
  return {xt, v};
}

std::pair<Eigen::Vector2d, Eigen::Vector2d> implicit_velocities(const Eigen::Vector2d& v_old,
                                                                const Eigen::Vector2d& v_theta,
                                                                double beta) {
  const Eigen::Vector2d plus = (1.0 - beta) * v_old + beta * v_theta;
  const Eigen::Vector2d minus = (1.0 + beta) * v_old - beta * v_theta;
  return {plus, minus};
}

double nft_loss(double r_norm, const Eigen::Vector2d& v_plus, const Eigen::Vector2d& v_minus,
                const Eigen::Vector2d& v_target) {
  return r_norm * (v_plus - v_target).squaredNorm() +
         (1.0 - r_norm) * (v_minus - v_target).squaredNorm();
}

Eigen::VectorXd ema_update(const Eigen::VectorXd& theta_old, const Eigen::VectorXd& theta,
                           double eta) {
  return eta * theta_old + (1.0 - eta) * theta;
}

namespace {

// Flat layout: W1 (h x in, row-major), b1, W2 (h x h), b2, W3 (2 x h), b3.
struct Layout {
  int in, h;
  int w1() const { return 0; }
  int b1() const { return h * in; }
  int w2() const { return b1() + h; }
  int b2() const { return w2() + h * h; }
  int w3() const { return b2() + h; }
  int b3() const { return w3() + 2 * h; }
  int total() const { return b3() + 2; }
};

using CMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using MMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

}  // namespace

VelocityNet::VelocityNet(int n_cond, int hidden, Rng& init_rng)
    : n_cond_(n_cond), hidden_(hidden), input_dim_(3 + n_cond) {
  const Layout lay{input_dim_, hidden_};
  params_.resize(lay.total());
  // He-style scale on the weight blocks, zero biases.
  const double s1 = std::sqrt(2.0 / input_dim_);
  const double s2 = std::sqrt(2.0 / hidden_);
  for (int i = 0; i < lay.b1(); ++i) params_[i] = s1 * init_rng.gaussian();
  for (int i = lay.b1(); i < lay.w2(); ++i) params_[i] = 0.0;
  for (int i = lay.w2(); i < lay.b2(); ++i) params_[i] = s2 * init_rng.gaussian();
  for (int i = lay.b2(); i < lay.w3(); ++i) params_[i] = 0.0;
  for (int i = lay.w3(); i < lay.b3(); ++i) params_[i] = s2 * init_rng.gaussian();
  for (int i = lay.b3(); i < lay.total(); ++i) params_[i] = 0.0;
}

void VelocityNet::set_params(const Eigen::VectorXd& p) {
  if (p.size() != params_.size()) throw std::invalid_argument("parameter vector size mismatch");
  params_ = p;
}

Eigen::VectorXd VelocityNet::input_vec(const Eigen::Vector2d& x, int cond, double t) const {
  Eigen::VectorXd u = Eigen::VectorXd::Zero(input_dim_);
  u[0] = x[0];
  u[1] = x[1];
  u[2] = t;
  if (cond < 0 || cond >= n_cond_) throw std::invalid_argument("condition id out of range");
  u[3 + cond] = 1.0;
  return u;
}

Eigen::Vector2d VelocityNet::forward(const Eigen::Vector2d& x, int cond, double t) const {
  const Layout lay{input_dim_, hidden_};
  const Eigen::VectorXd u = input_vec(x, cond, t);
  CMap w1(params_.data() + lay.w1(), hidden_, input_dim_);
  CMap w2(params_.data() + lay.w2(), hidden_, hidden_);
  CMap w3(params_.data() + lay.w3(), 2, hidden_);
  const auto b1 = params_.segment(lay.b1(), hidden_);
  const auto b2 = params_.segment(lay.b2(), hidden_);
  const auto b3 = params_.segment(lay.b3(), 2);
  const Eigen::VectorXd a1 = (w1 * u + b1).array().tanh();
  const Eigen::VectorXd a2 = (w2 * a1 + b2).array().tanh();
  return w3 * a2 + b3;
}

void VelocityNet::accumulate_grad(const Eigen::Vector2d& x, int cond, double t,
                                  const Eigen::Vector2d& dL_dout, Eigen::VectorXd& grad) const {
  const Layout lay{input_dim_, hidden_};
  if (grad.size() != params_.size()) {
    grad = Eigen::VectorXd::Zero(params_.size());
  }
  const Eigen::VectorXd u = input_vec(x, cond, t);
  CMap w1(params_.data() + lay.w1(), hidden_, input_dim_);
  CMap w2(params_.data() + lay.w2(), hidden_, hidden_);
  CMap w3(params_.data() + lay.w3(), 2, hidden_);
  const auto b1 = params_.segment(lay.b1(), hidden_);
  const auto b2 = params_.segment(lay.b2(), hidden_);

  const Eigen::VectorXd a1 = (w1 * u + b1).array().tanh();
  const Eigen::VectorXd a2 = (w2 * a1 + b2).array().tanh();

  const Eigen::Vector2d g = dL_dout;
  MMap gw3(grad.data() + lay.w3(), 2, hidden_);
  gw3 += g * a2.transpose();
  grad.segment(lay.b3(), 2) += g;

  const Eigen::VectorXd dz2 =
      (w3.transpose() * g).cwiseProduct((1.0 - a2.array().square()).matrix());
  MMap gw2(grad.data() + lay.w2(), hidden_, hidden_);
  gw2 += dz2 * a1.transpose();
  grad.segment(lay.b2(), hidden_) += dz2;

  const Eigen::VectorXd dz1 =
      (w2.transpose() * dz2).cwiseProduct((1.0 - a1.array().square()).matrix());
  MMap gw1(grad.data() + lay.w1(), hidden_, input_dim_);
  gw1 += dz1 * u.transpose();
  grad.segment(lay.b1(), hidden_) += dz1;
}

AdamOptimizer::AdamOptimizer(int n, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(Eigen::VectorXd::Zero(n)),
      v_(Eigen::VectorXd::Zero(n)) {}

void AdamOptimizer::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseProduct(grad);
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  params -= (lr_ / bc1) * m_.cwiseQuotient(((v_ / bc2).cwiseSqrt().array() + eps_).matrix());
}

Eigen::Vector2d sample_euler(const VelocityNet& net, int cond, const Eigen::Vector2d& noise,
                             int steps) {
  Eigen::Vector2d x = noise;
  const double dt = 1.0 / steps;
  for (int s = 0; s < steps; ++s) {
    const double t = 1.0 - s * dt;
    x -= dt * net.forward(x, cond, t);
  }
  return x;
}

void pretrain_flow_matching(VelocityNet& net, const BaseSampler& base, int steps, int batch,
                            double lr, Rng& rng, const NoiseSchedule& schedule) {
  AdamOptimizer opt(net.param_count(), lr);
  Eigen::VectorXd params = net.params();
  Eigen::VectorXd grad(net.param_count());
  for (int s = 0; s < steps; ++s) {
    grad.setZero();
    for (int b = 0; b < batch; ++b) {
      const int cond = static_cast<int>(rng.uniform_int(0, net.n_cond() - 1));
      const Eigen::Vector2d x0 = base(rng, cond);
      const double t = rng.uniform();
      const Eigen::Vector2d eps(rng.gaussian(), rng.gaussian());
      const auto [xt, v_target] = noisify(x0, t, eps, schedule);
      const Eigen::Vector2d pred = net.forward(xt, cond, t);
      const Eigen::Vector2d dl = 2.0 * (pred - v_target) / batch;
      net.accumulate_grad(xt, cond, t, dl, grad);
    }
    opt.step(params, grad);
    net.set_params(params);
  }
}

BaseSampler two_gaussian_sampler(double separation, double stddev) {
  return [=](Rng& rng, int /*cond*/) {
    const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
    return Eigen::Vector2d(sign * separation + stddev * rng.gaussian(),
                           stddev * rng.gaussian());
  };
}

RewardFn distance_reward(const Eigen::Vector2d& target) {
  return [=](const Eigen::Vector2d& x0, int /*cond*/) { return -(x0 - target).norm(); };
}

TrainResult train_nft(const NftConfig& cfg, const RewardFn& reward, VelocityNet& net,
                      const NoiseSchedule& schedule, const RewardOptions& reward_opts) {
  if (cfg.group_size < 2) throw GroupTooSmall(static_cast<std::size_t>(cfg.group_size));
  Rng rng(cfg.seed);

  VelocityNet old_net = net;  // reference/sampling policy v_old <- v_theta
  Eigen::VectorXd theta = net.params();
  Eigen::VectorXd theta_old = theta;
  AdamOptimizer opt(net.param_count(), cfg.learning_rate);
  Eigen::VectorXd grad(net.param_count());

  TrainResult result;
  result.metrics.reserve(static_cast<std::size_t>(cfg.iterations));

  for (int iter = 0; iter < cfg.iterations; ++iter) {
    IterationMetrics metrics;
    metrics.iter = iter;
    grad.setZero();
    double loss_sum = 0.0;
    int loss_count = 0;
    double reward_sum = 0.0, reward_sq = 0.0;
    int reward_count = 0;

    for (int cond = 0; cond < cfg.n_cond; ++cond) {
      std::vector<Eigen::Vector2d> samples;
      std::vector<double> raw;
      samples.reserve(static_cast<std::size_t>(cfg.group_size));
      for (int k = 0; k < cfg.group_size; ++k) {
        const Eigen::Vector2d noise(rng.gaussian(), rng.gaussian());
        const Eigen::Vector2d x0 = sample_euler(old_net, cond, noise, cfg.sample_steps);
        samples.push_back(x0);
        raw.push_back(reward(x0, cond));
      }
      for (double r : raw) {
        reward_sum += r;
        reward_sq += r * r;
        ++reward_count;
      }

      const std::vector<double> normalized = normalize_group(raw, reward_opts);
      const FilterDecision decision = quality_filter(normalized, reward_opts);
      if (!decision.keep) {
        metrics.group_skipped = true;
        continue;
      }

      for (int k = 0; k < cfg.group_size; ++k) {
        const double t = rng.uniform(0.0, cfg.noise_level);
        const Eigen::Vector2d eps(rng.gaussian(), rng.gaussian());
        const auto [xt, v_target] = noisify(samples[static_cast<std::size_t>(k)], t, eps, schedule);
        // v_old is the frozen reference; no gradient flows through it.
        const Eigen::Vector2d v_old = old_net.forward(xt, cond, t);
        const Eigen::Vector2d v_theta = net.forward(xt, cond, t);
        const auto [v_plus, v_minus] = implicit_velocities(v_old, v_theta, cfg.beta);
        const double r = normalized[static_cast<std::size_t>(k)];
        loss_sum += nft_loss(r, v_plus, v_minus, v_target);
        ++loss_count;
        const Eigen::Vector2d dl_dvtheta =
            2.0 * cfg.beta * (r * (v_plus - v_target) - (1.0 - r) * (v_minus - v_target));
        net.accumulate_grad(xt, cond, t, dl_dvtheta, grad);
      }
    }

    if (loss_count > 0) {
      grad /= loss_count;
      opt.step(theta, grad);
      net.set_params(theta);
      metrics.loss = loss_sum / loss_count;
    }
    if (!std::isfinite(metrics.loss)) throw DivergedLoss(static_cast<std::size_t>(iter));

    const double mean = reward_sum / reward_count;
    metrics.mean_reward = mean;
    metrics.reward_std = std::sqrt(std::max(0.0, reward_sq / reward_count - mean * mean));

    theta_old = ema_update(theta_old, theta, cfg.ema_at(iter));
    old_net.set_params(theta_old);

    result.metrics.push_back(metrics);
  }

  result.theta = theta;
  result.theta_old = theta_old;
  return result;
}

void save_checkpoint(const std::string& path, const VelocityNet& net) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  out << "PARROT-NFT v1\n" << net.hidden() << " " << net.n_cond() << " " << net.param_count()
      << "\n";
  out.precision(17);
  for (int i = 0; i < net.param_count(); ++i) out << net.params()[i] << "\n";
  if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

void load_checkpoint(const std::string& path, VelocityNet& net) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  std::string magic, version;
  in >> magic >> version;
  if (magic != "PARROT-NFT" || version != "v1") {
    throw std::runtime_error("unrecognized checkpoint header in " + path);
  }
  int hidden = 0, n_cond = 0, count = 0;
  in >> hidden >> n_cond >> count;
  if (hidden != net.hidden() || n_cond != net.n_cond() || count != net.param_count()) {
    throw std::runtime_error("checkpoint shape mismatch in " + path);
  }
  Eigen::VectorXd p(count);
  for (int i = 0; i < count; ++i) {
    if (!(in >> p[i])) throw std::runtime_error("truncated checkpoint: " + path);
  }
  net.set_params(p);
}

}  // namespace parrot
