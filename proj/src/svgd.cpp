#include "branchinfer/inference/svgd.hpp"

#include <cmath>
#include <iostream>
#include <random>
#include <stdexcept>

namespace branchinfer::inference {

ParticleSet uniform_particles(const SearchBounds& bounds, std::size_t n, std::uint64_t seed) {
  if (bounds.lower.size() != bounds.upper.size() || bounds.lower.size() == 0) {
    throw std::invalid_argument("search bounds must be non-empty and of equal length");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ParticleSet set;
  set.particles.resize(static_cast<Eigen::Index>(n), bounds.lower.size());
  for (Eigen::Index i = 0; i < set.particles.rows(); ++i) {
    for (Eigen::Index d = 0; d < set.particles.cols(); ++d) {
      set.particles(i, d) = bounds.lower[d] + unit(rng) * (bounds.upper[d] - bounds.lower[d]);
    }
  }
  return set;
}

Eigen::MatrixXd stein_direction(const Eigen::MatrixXd& particles,
                                const Eigen::MatrixXd& log_density_gradient,
                                const RbfKernel& kernel, bool repulsion) {
  const double n = static_cast<double>(particles.rows());
  Eigen::MatrixXd phi = kernel.matrix.transpose() * log_density_gradient;
  if (repulsion) phi += kernel.repulsion(particles);
  return phi / n;
}

IterationDiagnostics svgd_step(ParticleSet& set, const Target& target, Optimizer& optimizer,
                               const InferenceConfig& config) {
  if (set.particles.rows() < 1 || static_cast<std::size_t>(set.particles.cols()) != target.dim()) {
    throw std::invalid_argument("particle set does not match the target dimension");
  }
  const DensityBatch eval = target.evaluate(set.particles);
  const RbfKernel kernel = rbf_kernel(set.particles);
  Eigen::MatrixXd phi = stein_direction(set.particles, eval.gradient, kernel, config.svgd_repulsion);

  std::size_t zeroed = 0;
  for (Eigen::Index i = 0; i < phi.size(); ++i) {
    if (!std::isfinite(phi.data()[i])) {
      phi.data()[i] = 0.0;
      ++zeroed;
    }
  }
  if (zeroed > 0) {
    std::cerr << "warning: svgd iteration " << set.iteration << ": zeroed " << zeroed
              << " non-finite drift components\n";
  }

  optimizer.step(set.particles, -phi);
  IterationDiagnostics diag;
  diag.iteration = set.iteration;
  const Eigen::VectorXd score = loss_or_energy(eval);
  diag.mean_loss = score.mean();
  diag.min_loss = score.minCoeff();
  diag.bandwidth = std::sqrt(kernel.bandwidth_sq);
  ++set.iteration;
  return diag;
}

SvgdResult run_svgd(const Target& target, const SearchBounds& init, const InferenceConfig& config,
                    const IterationCallback& on_iteration) {
  config.validate();
  SvgdResult result;
  result.particles = uniform_particles(init, config.n_particles, config.seed);
  Optimizer optimizer(config.optimizer);
  result.diagnostics.reserve(config.iterations);
  for (std::size_t it = 0; it < config.iterations; ++it) {
    result.diagnostics.push_back(svgd_step(result.particles, target, optimizer, config));
    if (on_iteration) on_iteration(result.diagnostics.back());
  }
  return result;
}

SearchBounds search_bounds(const priors::SmoothBox& box) { return {box.lower, box.upper}; }

}  // namespace branchinfer::inference
