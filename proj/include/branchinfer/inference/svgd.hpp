#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include "branchinfer/inference/config.hpp"
#include "branchinfer/inference/kernel.hpp"
#include "branchinfer/inference/optimizer.hpp"
#include "branchinfer/inference/posterior.hpp"
#include "branchinfer/inference/target.hpp"

namespace branchinfer::inference {

struct ParticleSet {
  Eigen::MatrixXd particles;  // one particle per row
  std::size_t iteration = 0;

  std::size_t size() const { return static_cast<std::size_t>(particles.rows()); }
};

struct IterationDiagnostics {
  std::size_t iteration = 0;
  double mean_loss = 0.0;
  double min_loss = 0.0;
  double bandwidth = 0.0;
};

// Search-space rectangle used for initialization and clamping.
struct SearchBounds {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};

ParticleSet uniform_particles(const SearchBounds& bounds, std::size_t n, std::uint64_t seed);

// Stein direction phi(theta_i) = (1/n) sum_j [k(theta_j, theta_i) grad log p(theta_j)
// + grad_{theta_j} k(theta_j, theta_i)], one row per particle.
Eigen::MatrixXd stein_direction(const Eigen::MatrixXd& particles,
                                const Eigen::MatrixXd& log_density_gradient,
                                const RbfKernel& kernel, bool repulsion = true);

// Evaluates the target, moves particles along phi through the optimizer
// (which minimizes -phi) and increments the iteration counter.
IterationDiagnostics svgd_step(ParticleSet& set, const Target& target, Optimizer& optimizer,
                               const InferenceConfig& config);

struct SvgdResult {
  ParticleSet particles;
  std::vector<IterationDiagnostics> diagnostics;
};

using IterationCallback = std::function<void(const IterationDiagnostics&)>;

SvgdResult run_svgd(const Target& target, const SearchBounds& init, const InferenceConfig& config,
                    const IterationCallback& on_iteration = {});

// Sampling bounds for a simulation posterior: the prior box in search space.
SearchBounds search_bounds(const priors::SmoothBox& box);

}  // namespace branchinfer::inference
