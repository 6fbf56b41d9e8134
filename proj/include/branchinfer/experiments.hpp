#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "branchinfer/config.hpp"
#include "branchinfer/evaluation.hpp"
#include "branchinfer/inference/svgd.hpp"
#include "branchinfer/priors.hpp"
#include "branchinfer/trajectory_io.hpp"

namespace branchinfer::experiments {

// Ground-truth parameters produce a diverging rollout.
class GroundTruthError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void set_verbose(bool verbose);

dynamics::ForceProfile scheduled_profile(const ForceSchedule& schedule, double amplitude,
                                         double grasp_fraction);

struct EpisodeGroup {
  std::string split;  // "train", "test" or "test_<k>"
  double grasp_fraction = 1.0;
  std::vector<io::Episode> episodes;
  std::vector<dynamics::ForceProfile> clean_profiles;
};

struct GroundTruthSet {
  EpisodeGroup train;
  std::vector<EpisodeGroup> test;
};

// Rolls out the force schedule with theta_gt; train episodes come first, then
// one test group per fraction (defaults to test_fraction, split "test").
GroundTruthSet generate_ground_truth(const ExperimentConfig& config, std::uint64_t seed,
                                     const std::vector<double>& test_fractions = {});

// Writes episodes/<split>_<i>.csv, episodes/index.csv and manifest.txt under dir.
void write_ground_truth(const GroundTruthSet& set, const std::filesystem::path& dir);

// Loads one split listed in dir/episodes/index.csv; appends files read to `read`.
std::vector<io::Episode> read_episodes(const std::filesystem::path& dir, const std::string& split,
                                       std::vector<std::string>* read = nullptr);

// Config handed to the inference stage: theta_gt removed.
ExperimentConfig strip_ground_truth(const ExperimentConfig& config);

// Smooth box (log10 space) plus, when requested and the chain has R >= 2,
// parent/child inequality nets on the Kp pairs and the Kd pairs.
priors::Prior build_prior(const ExperimentConfig& config, bool constraints);

// Trained net for a 2D log10 box; cached in-process.
const priors::TrainedPriorNet& prior_net_for(const priors::SmoothBox& pair_box,
                                            const PriorSettings& settings);

struct InferenceOutcome {
  std::string algorithm;
  bool ok = false;
  std::string error;
  Eigen::MatrixXd particles;  // raw units, one row per particle
  std::vector<inference::IterationDiagnostics> diagnostics;
  std::size_t clamped = 0;
  double acceptance_rate = 1.0;
  // Fraction of particles with child > parent on each constrained pair.
  std::vector<double> violations;
};

InferenceOutcome run_inference(const std::string& algorithm, const ExperimentConfig& stripped,
                               const std::vector<io::Episode>& train);

struct PredictionReport {
  double test_rmse = 0.0;        // posterior-mean prediction vs ground truth
  double peak_deflection = 0.0;  // max |pos| over the test ground truth
  double rmse_rel = 0.0;
  evaluation::CoverageReport coverage;
  std::vector<evaluation::TrajectoryBand> bands;
  std::vector<std::vector<double>> gt_z;
  std::size_t diverged = 0;
};

PredictionReport evaluate_predictions(const ExperimentConfig& config,
                                      const Eigen::MatrixXd& particles,
                                      const std::vector<io::Episode>& test);

struct AlgorithmSummary {
  std::string algorithm;
  bool ok = false;
  std::string error;
  double test_rmse = 0.0;
  double rmse_rel = 0.0;
  double pct_outside = 0.0;
  double mean_width = 0.0;
  double max_violation = 0.0;
  std::size_t clamped = 0;
  Eigen::MatrixXd particles;
};

struct Sim2SimReport {
  std::vector<AlgorithmSummary> rows;
  double peak_deflection = 0.0;

  const AlgorithmSummary& at(const std::string& algorithm) const;
};

Sim2SimReport run_sim2sim(const ExperimentConfig& config,
                          const std::vector<std::string>& algorithms,
                          const std::filesystem::path& out);

struct SweepRow {
  double value = 0.0;  // sigma or grasp fraction
  AlgorithmSummary summary;
};

std::vector<SweepRow> run_noise_sweep(const ExperimentConfig& config,
                                      const std::filesystem::path& out);
std::vector<SweepRow> run_grasp_sweep(const ExperimentConfig& config,
                                      const std::filesystem::path& out);

struct PriorTrainingRow {
  std::string name;
  double rmse = 0.0;
  double threshold = 0.0;
};

std::vector<PriorTrainingRow> run_train_prior(const ExperimentConfig& config,
                                              const std::filesystem::path& out);

// URDF plus a per-link table; returns the largest area-preservation residual
// |sum r_child^2 - r_parent^2| in m^2.
double run_gen_tree(const ExperimentConfig& config, const std::filesystem::path& out);

}  // namespace branchinfer::experiments
