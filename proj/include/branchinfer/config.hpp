#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "branchinfer/dynamics.hpp"
#include "branchinfer/geometry.hpp"
#include "branchinfer/inference/config.hpp"
#include "branchinfer/priors.hpp"

namespace branchinfer {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Ramp up over `ramp` seconds to the amplitude, hold, release instantly, settle.
struct ForceSchedule {
  std::vector<double> amplitudes{10.0};  // cycled over episodes, train first
  double ramp = 1.0;
  double hold = 2.0;
  double settle = 2.0;
  double dt_obs = 0.02;

  std::size_t samples() const;
};

struct PriorSettings {
  // Raw units; a pair of entries is repeated for every joint.
  std::vector<double> box_lower{10.0, 0.1};
  std::vector<double> box_upper{1000.0, 30.0};
  double sigma = 0.05;  // in log10 units
  bool constraints = true;
  double eta = 10.0;
  priors::InequalityMode mode = priors::InequalityMode::kRamp;
  priors::PriorTrainConfig train;
};

struct ExperimentConfig {
  geometry::TreeSpec tree{.trunk_length = 1.0, .trunk_radius = 0.02};
  std::vector<double> theta_gt{120.0, 3.0};
  ForceSchedule force;
  std::size_t train_episodes = 3;
  std::size_t test_episodes = 3;

  double noise_sigma = 0.0;      // force noise, relative to the episode's peak force
  bool position_noise = false;   // also perturb recorded positions (same relative sigma)

  double train_fraction = 1.0;
  double test_fraction = 1.0;
  std::vector<double> grasp_test_fractions{0.25, 0.75, 1.0};
  std::vector<double> noise_sigmas{0.0, 0.05, 0.1, 0.2};

  std::vector<std::string> algorithms{"mcmh", "sgld", "sghmc", "svgd", "nnsvgd"};
  std::vector<std::string> sweep_algorithms{"nnsvgd"};

  inference::InferenceConfig inference;
  double sgld_step_size = 1e-4;
  double sghmc_step_size = 1e-3;

  PriorSettings prior;
  dynamics::SimOptions sim;
  double band_level = 0.95;

  std::filesystem::path output_dir = "out";
  std::uint64_t seed = 1;

  std::size_t joints() const;
  // Box expanded to 2R entries, in raw units.
  std::vector<double> box_lower() const;
  std::vector<double> box_upper() const;
  void validate() const;
};

inline const std::vector<std::string>& known_algorithms() {
  static const std::vector<std::string> names{"mcmh", "sgld", "sghmc", "svgd", "nnsvgd"};
  return names;
}

// Flat "key = value" text; '#' starts a comment; lists are comma separated.
// Unknown keys and malformed values raise ConfigError.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

// Every effective setting, in the same format parse_config accepts.
std::string to_text(const ExperimentConfig& config);

}  // namespace branchinfer
