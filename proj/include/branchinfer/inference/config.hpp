#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace branchinfer::inference {

enum class OptimizerKind { kAdam, kSgd };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdam;
  double learning_rate = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double momentum = 0.0;  // SGD only
};

struct InferenceConfig {
  // Boltzmann temperature (k and T folded together), in normalized-loss units.
  double kT = 1.0;
  bool normalize_loss = true;  // divide the loss by total sample count g * episodes
  std::size_t iterations = 300;
  std::size_t n_particles = 64;
  double fd_epsilon = 1e-2;
  OptimizerConfig optimizer;
  std::uint64_t seed = 1;

  bool svgd_repulsion = true;

  // Monte Carlo baselines.
  double step_size = 1e-4;           // SGLD / SGHMC epsilon
  double sghmc_friction = 1.0;       // C
  bool sghmc_noise = true;
  double mcmh_proposal_scale = 0.05;
  std::size_t burn_in = 0;           // iterations discarded per chain
  std::size_t thin = 1;

  void validate() const;
};

OptimizerKind parse_optimizer_kind(const std::string& name);

}  // namespace branchinfer::inference
