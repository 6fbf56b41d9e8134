#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <random>
#include <vector>

#include "branchinfer/inference/config.hpp"
#include "branchinfer/inference/svgd.hpp"
#include "branchinfer/inference/target.hpp"

namespace branchinfer::inference {

struct SampleSet {
  // Retained samples from all chains (after burn-in and thinning), one per row.
  Eigen::MatrixXd samples;
  // Last state of every chain.
  Eigen::MatrixXd final_states;
  std::vector<IterationDiagnostics> diagnostics;
  double acceptance_rate = 1.0;
  std::size_t clamped = 0;
};

// Clamp region: points outside [lower - margin, upper + margin] (or non-finite)
// are pulled back into [lower, upper].
struct ClampRegion {
  SearchBounds bounds;
  double margin = 0.0;
};

// Gaussian random-walk Metropolis-Hastings, n_particles independent chains.
SampleSet run_mcmh(const Target& target, const SearchBounds& init, const InferenceConfig& config,
                   const IterationCallback& on_iteration = {});

// theta <- theta + (eps/2) grad log p + sqrt(eps) N(0, I).
SampleSet run_sgld(const Target& target, const SearchBounds& init, const ClampRegion& clamp,
                   const InferenceConfig& config, const IterationCallback& on_iteration = {});

// Leapfrog with friction C and injected noise N(0, 2 C eps) on the momentum,
// unit mass.
SampleSet run_sghmc(const Target& target, const SearchBounds& init, const ClampRegion& clamp,
                    const InferenceConfig& config, const IterationCallback& on_iteration = {});

struct SghmcState {
  Eigen::MatrixXd theta;
  Eigen::MatrixXd momentum;
  Eigen::MatrixXd grad;  // grad log p at theta
  Eigen::VectorXd log_density;
  Eigen::VectorXd loss;
};

// One leapfrog step per chain followed by the friction/noise update.
void sghmc_step(const Target& target, SghmcState& state, const InferenceConfig& config,
                std::mt19937_64& rng);

// Hamiltonian used by the SGHMC integrator: -log p(theta) + |r|^2 / 2.
double hamiltonian(const Target& target, const Eigen::VectorXd& theta, const Eigen::VectorXd& r);

}  // namespace branchinfer::inference
