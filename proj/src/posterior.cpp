#include "branchinfer/inference/posterior.hpp"

#include <cmath>
#include <stdexcept>

#include "branchinfer/inference/fd_gradient.hpp"
#include "branchinfer/parallel.hpp"

namespace branchinfer::inference {

namespace {

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

double episode_loss(const dynamics::BranchChain& chain, const dynamics::SimParams& params,
                    const io::Episode& episode) {
  return trajectory_loss(chain.rollout(params, episode.profile), episode.trajectory);
}

}  // namespace

double trajectory_loss(const dynamics::Trajectory& sim, const dynamics::Trajectory& gt) {
  if (sim.diverged) return kDivergencePenalty;
  if (sim.samples() != gt.samples()) {
    throw std::invalid_argument("simulated and ground-truth trajectories differ in length");
  }
  double pos_sq = 0.0, vel_sq = 0.0;
  for (std::size_t i = 0; i < sim.samples(); ++i) {
    const double px = sim.pos[i].x - gt.pos[i].x;
    const double pz = sim.pos[i].z - gt.pos[i].z;
    const double vx = sim.vel[i].x - gt.vel[i].x;
    const double vz = sim.vel[i].z - gt.vel[i].z;
    pos_sq += px * px + pz * pz;
    vel_sq += vx * vx + vz * vz;
  }
  const double l = std::sqrt(pos_sq) + std::sqrt(vel_sq);
  return std::isfinite(l) ? l : kDivergencePenalty;
}

double loss(const dynamics::SimParams& params, const geometry::TreeModel& model,
            std::span<const io::Episode> episodes, dynamics::SimOptions options) {
  if (episodes.empty()) throw std::invalid_argument("loss needs at least one episode");
  if (params.joints() != model.chain_length()) {
    throw std::invalid_argument("theta dimension must be 2R");
  }
  double total = 0.0;
  for (const auto& ep : episodes) {
    const dynamics::BranchChain chain(model, ep.profile.grasp_fraction, options);
    total += episode_loss(chain, params, ep);
  }
  return total;
}

double loss_normalizer(std::span<const io::Episode> episodes, const InferenceConfig& config) {
  if (!config.normalize_loss) return 1.0;
  double g = 0.0;
  for (const auto& ep : episodes) g += static_cast<double>(ep.profile.samples());
  return g;
}

Eigen::VectorXd to_search_space(const Eigen::VectorXd& theta) {
  if ((theta.array() <= 0.0).any()) throw std::invalid_argument("gains must be positive");
  return theta.array().log10().matrix();
}

Eigen::VectorXd to_raw_space(const Eigen::VectorXd& u) {
  return u.unaryExpr([](double x) { return std::pow(10.0, x); });
}

Eigen::MatrixXd to_raw_space(const Eigen::MatrixXd& particles) {
  return particles.unaryExpr([](double x) { return std::pow(10.0, x); });
}

double log_posterior(const dynamics::SimParams& params, const geometry::TreeModel& model,
                     std::span<const io::Episode> episodes, const priors::Prior* prior,
                     const InferenceConfig& config, dynamics::SimOptions options) {
  const double l = loss(params, model, episodes, options);
  double value = -l / (loss_normalizer(episodes, config) * config.kT);
  if (prior) {
    const auto theta = params.theta();
    const Eigen::VectorXd raw = Eigen::Map<const Eigen::VectorXd>(
        theta.data(), static_cast<Eigen::Index>(theta.size()));
    value += prior->evaluate(to_search_space(raw)).value;
  }
  return value;
}

FunctionTarget::FunctionTarget(std::size_t dim, LogDensityFn log_density, GradientFn gradient,
                               double fd_epsilon)
    : dim_(dim),
      log_density_(std::move(log_density)),
      gradient_(std::move(gradient)),
      fd_epsilon_(fd_epsilon) {}

Eigen::VectorXd loss_or_energy(const DensityBatch& batch) {
  return batch.loss.size() ? batch.loss : Eigen::VectorXd(-batch.log_density);
}

DensityBatch FunctionTarget::values(const Eigen::MatrixXd& points) const {
  DensityBatch out;
  out.log_density.resize(points.rows());
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    out.log_density[i] = log_density_(points.row(i).transpose());
  }
  return out;
}

DensityBatch FunctionTarget::evaluate(const Eigen::MatrixXd& points) const {
  DensityBatch out = values(points);
  out.gradient.resize(points.rows(), points.cols());
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const Eigen::VectorXd p = points.row(i).transpose();
    if (gradient_) {
      out.gradient.row(i) = gradient_(p).transpose();
    } else {
      const auto fd = fd_gradient(log_density_, p, fd_epsilon_);
      out.gradient.row(i) = fd.gradient.transpose();
      out.warnings += fd.failed;
    }
  }
  return out;
}

SimulationPosterior::SimulationPosterior(geometry::TreeModel model,
                                         std::vector<io::Episode> episodes,
                                         std::optional<priors::Prior> prior,
                                         InferenceConfig config, dynamics::SimOptions options)
    : model_(std::move(model)),
      episodes_(std::move(episodes)),
      prior_(std::move(prior)),
      config_(config) {
  if (episodes_.empty()) throw std::invalid_argument("posterior needs at least one episode");
  if (!(config_.kT > 0.0)) throw std::invalid_argument("kT must be positive");
  for (const auto& ep : episodes_) {
    if (ep.profile.samples() != ep.trajectory.samples()) {
      throw std::invalid_argument("episode force and trajectory lengths differ");
    }
    chains_.emplace_back(model_, ep.profile.grasp_fraction, options);
  }
  if (prior_) {
    prior_->box.validate();
    if (prior_->box.dim() != dim()) throw std::invalid_argument("prior box dimension must be 2R");
  }
  normalizer_ = loss_normalizer(episodes_, config_);
}

double SimulationPosterior::likelihood_term(double l) const {
  return -l / (normalizer_ * config_.kT);
}

double SimulationPosterior::loss_at(const Eigen::VectorXd& u) const {
  const auto params = dynamics::SimParams::from_theta(to_std(to_raw_space(u)));
  double total = 0.0;
  for (std::size_t e = 0; e < episodes_.size(); ++e) {
    total += episode_loss(chains_[e], params, episodes_[e]);
  }
  return total;
}

std::vector<double> SimulationPosterior::losses(const std::vector<Eigen::VectorXd>& points) const {
  std::vector<double> out(points.size());
  parallel_for(points.size(), [&](std::size_t i) { out[i] = loss_at(points[i]); });
  return out;
}

DensityBatch SimulationPosterior::values(const Eigen::MatrixXd& points) const {
  std::vector<Eigen::VectorXd> rows;
  for (Eigen::Index i = 0; i < points.rows(); ++i) rows.push_back(points.row(i).transpose());
  const auto l = losses(rows);
  DensityBatch out;
  out.log_density.resize(points.rows());
  out.loss.resize(points.rows());
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    out.loss[i] = l[k];
    out.log_density[i] = likelihood_term(l[k]);
    if (prior_) out.log_density[i] += prior_->evaluate(rows[k]).value;
  }
  return out;
}

DensityBatch SimulationPosterior::evaluate(const Eigen::MatrixXd& points) const {
  const auto n = static_cast<std::size_t>(points.rows());
  const auto dim = static_cast<std::size_t>(points.cols());
  const std::size_t per = 2 * dim + 1;

  // All FD probes of all particles form one batch of rollouts.
  std::vector<Eigen::VectorXd> probes;
  probes.reserve(n * per);
  for (std::size_t i = 0; i < n; ++i) {
    auto p = fd_probes(points.row(static_cast<Eigen::Index>(i)).transpose(), config_.fd_epsilon);
    for (auto& q : p) probes.push_back(std::move(q));
  }
  const auto l = losses(probes);

  DensityBatch out;
  out.log_density.resize(static_cast<Eigen::Index>(n));
  out.loss.resize(static_cast<Eigen::Index>(n));
  out.gradient.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  std::vector<double> values(per);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (std::size_t p = 0; p < per; ++p) values[p] = likelihood_term(l[i * per + p]);
    const Eigen::VectorXd u = points.row(r).transpose();
    const auto fd = fd_from_values(u, config_.fd_epsilon, values);
    out.warnings += fd.failed;
    out.loss[r] = l[i * per];
    out.log_density[r] = values[0];
    Eigen::VectorXd grad = fd.gradient;
    if (prior_) {
      const auto lp = prior_->evaluate(u);
      out.log_density[r] += lp.value;
      grad += lp.gradient;
    }
    out.gradient.row(r) = grad.transpose();
  }
  return out;
}

}  // namespace branchinfer::inference
