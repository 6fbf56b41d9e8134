#include "branchinfer/inference/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <stdexcept>

namespace branchinfer::inference {

namespace {

void check_target(const Target& target, const SearchBounds& init) {
  if (static_cast<std::size_t>(init.lower.size()) != target.dim() ||
      init.upper.size() != init.lower.size()) {
    throw std::invalid_argument("initialization bounds do not match the target dimension");
  }
}

IterationDiagnostics summarize(std::size_t iteration, const DensityBatch& batch) {
  const Eigen::VectorXd score = loss_or_energy(batch);
  IterationDiagnostics d;
  d.iteration = iteration;
  d.mean_loss = score.mean();
  d.min_loss = score.minCoeff();
  return d;
}

Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd out(rows, cols);
  for (Eigen::Index i = 0; i < out.size(); ++i) out.data()[i] = normal(rng);
  return out;
}

// Pulls divergent rows back into the box; returns the affected row indices.
std::vector<Eigen::Index> clamp_rows(Eigen::MatrixXd& theta, const ClampRegion& clamp) {
  std::vector<Eigen::Index> hit;
  if (clamp.bounds.lower.size() == 0) return hit;
  const auto& lo = clamp.bounds.lower;
  const auto& hi = clamp.bounds.upper;
  for (Eigen::Index i = 0; i < theta.rows(); ++i) {
    bool out = false;
    for (Eigen::Index d = 0; d < theta.cols(); ++d) {
      const double v = theta(i, d);
      if (!std::isfinite(v) || v < lo[d] - clamp.margin || v > hi[d] + clamp.margin) out = true;
    }
    if (!out) continue;
    hit.push_back(i);
    for (Eigen::Index d = 0; d < theta.cols(); ++d) {
      const double v = theta(i, d);
      theta(i, d) = std::isfinite(v) ? std::clamp(v, lo[d], hi[d]) : 0.5 * (lo[d] + hi[d]);
    }
  }
  return hit;
}

void warn_clamped(const char* name, std::size_t iteration, std::size_t count) {
  if (count == 0) return;
  std::cerr << "warning: " << name << " iteration " << iteration << ": clamped " << count
            << " divergent chain(s) to the box\n";
}

void retain(std::vector<Eigen::VectorXd>& kept, const Eigen::MatrixXd& theta, std::size_t it,
            const InferenceConfig& config) {
  if (it < config.burn_in || (it - config.burn_in) % config.thin != 0) return;
  for (Eigen::Index i = 0; i < theta.rows(); ++i) kept.push_back(theta.row(i).transpose());
}

Eigen::MatrixXd stack(const std::vector<Eigen::VectorXd>& rows, Eigen::Index dim) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), dim);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  }
  return out;
}

}  // namespace

SampleSet run_mcmh(const Target& target, const SearchBounds& init, const InferenceConfig& config,
                   const IterationCallback& on_iteration) {
  config.validate();
  check_target(target, init);
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Eigen::MatrixXd theta = uniform_particles(init, config.n_particles, config.seed).particles;
  DensityBatch current = target.values(theta);
  std::vector<Eigen::VectorXd> kept;
  std::size_t accepted = 0, proposed = 0;
  SampleSet out;

  for (std::size_t it = 0; it < config.iterations; ++it) {
    const Eigen::MatrixXd proposal =
        theta + config.mcmh_proposal_scale * gaussian(theta.rows(), theta.cols(), rng);
    const DensityBatch cand = target.values(proposal);
    for (Eigen::Index i = 0; i < theta.rows(); ++i) {
      ++proposed;
      const double delta = cand.log_density[i] - current.log_density[i];
      if (std::isfinite(cand.log_density[i]) && unit(rng) < std::exp(std::min(delta, 0.0))) {
        ++accepted;
        theta.row(i) = proposal.row(i);
        current.log_density[i] = cand.log_density[i];
        if (current.loss.size()) current.loss[i] = cand.loss[i];
      }
    }
    out.diagnostics.push_back(summarize(it, current));
    if (on_iteration) on_iteration(out.diagnostics.back());
    retain(kept, theta, it, config);
  }

  out.samples = stack(kept, theta.cols());
  out.final_states = theta;
  out.acceptance_rate = proposed ? static_cast<double>(accepted) / proposed : 0.0;
  return out;
}

SampleSet run_sgld(const Target& target, const SearchBounds& init, const ClampRegion& clamp,
                   const InferenceConfig& config, const IterationCallback& on_iteration) {
  config.validate();
  check_target(target, init);
  std::mt19937_64 rng(config.seed);
  const double eps = config.step_size;

  Eigen::MatrixXd theta = uniform_particles(init, config.n_particles, config.seed).particles;
  std::vector<Eigen::VectorXd> kept;
  SampleSet out;

  for (std::size_t it = 0; it < config.iterations; ++it) {
    const DensityBatch eval = target.evaluate(theta);
    Eigen::MatrixXd grad = eval.gradient;
    grad = grad.unaryExpr([](double g) { return std::isfinite(g) ? g : 0.0; });
    theta += 0.5 * eps * grad + std::sqrt(eps) * gaussian(theta.rows(), theta.cols(), rng);
    const auto hit = clamp_rows(theta, clamp);
    out.clamped += hit.size();
    warn_clamped("sgld", it, hit.size());
    out.diagnostics.push_back(summarize(it, eval));
    if (on_iteration) on_iteration(out.diagnostics.back());
    retain(kept, theta, it, config);
  }

  out.samples = stack(kept, theta.cols());
  out.final_states = theta;
  return out;
}

void sghmc_step(const Target& target, SghmcState& state, const InferenceConfig& config,
                std::mt19937_64& rng) {
  const double eps = config.step_size;
  const double c = config.sghmc_friction;
  state.momentum += 0.5 * eps * state.grad;
  state.theta += eps * state.momentum;
  const DensityBatch eval = target.evaluate(state.theta);
  state.grad = eval.gradient.unaryExpr([](double g) { return std::isfinite(g) ? g : 0.0; });
  state.log_density = eval.log_density;
  state.loss = loss_or_energy(eval);
  state.momentum += 0.5 * eps * state.grad;
  state.momentum *= (1.0 - eps * c);
  if (config.sghmc_noise && c > 0.0) {
    state.momentum +=
        std::sqrt(2.0 * c * eps) * gaussian(state.momentum.rows(), state.momentum.cols(), rng);
  }
}

SampleSet run_sghmc(const Target& target, const SearchBounds& init, const ClampRegion& clamp,
                    const InferenceConfig& config, const IterationCallback& on_iteration) {
  config.validate();
  check_target(target, init);
  std::mt19937_64 rng(config.seed);

  SghmcState state;
  state.theta = uniform_particles(init, config.n_particles, config.seed).particles;
  state.momentum = gaussian(state.theta.rows(), state.theta.cols(), rng);
  const DensityBatch first = target.evaluate(state.theta);
  state.grad = first.gradient.unaryExpr([](double g) { return std::isfinite(g) ? g : 0.0; });
  state.log_density = first.log_density;
  state.loss = loss_or_energy(first);

  std::vector<Eigen::VectorXd> kept;
  SampleSet out;
  for (std::size_t it = 0; it < config.iterations; ++it) {
    sghmc_step(target, state, config, rng);
    const auto hit = clamp_rows(state.theta, clamp);
    for (auto i : hit) state.momentum.row(i).setZero();
    if (!hit.empty()) {
      // Refresh gradients at the clamped positions.
      const DensityBatch eval = target.evaluate(state.theta);
      state.grad = eval.gradient.unaryExpr([](double g) { return std::isfinite(g) ? g : 0.0; });
    }
    out.clamped += hit.size();
    warn_clamped("sghmc", it, hit.size());

    IterationDiagnostics d;
    d.iteration = it;
    d.mean_loss = state.loss.mean();
    d.min_loss = state.loss.minCoeff();
    out.diagnostics.push_back(d);
    if (on_iteration) on_iteration(d);
    retain(kept, state.theta, it, config);
  }

  out.samples = stack(kept, state.theta.cols());
  out.final_states = state.theta;
  return out;
}

double hamiltonian(const Target& target, const Eigen::VectorXd& theta, const Eigen::VectorXd& r) {
  const Eigen::MatrixXd p = theta.transpose();
  return -target.log_density(p)[0] + 0.5 * r.squaredNorm();
}

}  // namespace branchinfer::inference
