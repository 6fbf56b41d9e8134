#pragma once

#include <Eigen/Core>
#include <optional>
#include <span>
#include <vector>

#include "branchinfer/dynamics.hpp"
#include "branchinfer/geometry.hpp"
#include "branchinfer/inference/config.hpp"
#include "branchinfer/inference/target.hpp"
#include "branchinfer/priors.hpp"
#include "branchinfer/trajectory_io.hpp"

namespace branchinfer::inference {

// Loss charged for a diverged rollout.
inline constexpr double kDivergencePenalty = 1e6;

// |pos_sim - pos_gt|_2 + |vel_sim - vel_gt|_2 over the stacked (x, z) samples.
double trajectory_loss(const dynamics::Trajectory& sim, const dynamics::Trajectory& gt);

// Sum of trajectory_loss over episodes, each rolled out with `params` under the
// episode's force profile.
double loss(const dynamics::SimParams& params, const geometry::TreeModel& model,
            std::span<const io::Episode> episodes, dynamics::SimOptions options = {});

// Total sample count g summed over episodes.
double loss_normalizer(std::span<const io::Episode> episodes, const InferenceConfig& config);

// Particles search over u = log10(theta); the prior is defined on u.
Eigen::VectorXd to_search_space(const Eigen::VectorXd& theta);
Eigen::VectorXd to_raw_space(const Eigen::VectorXd& u);
Eigen::MatrixXd to_raw_space(const Eigen::MatrixXd& particles);

// -loss(theta) / (normalizer * kT) + log prior(log10 theta), unnormalized.
double log_posterior(const dynamics::SimParams& params, const geometry::TreeModel& model,
                     std::span<const io::Episode> episodes, const priors::Prior* prior,
                     const InferenceConfig& config, dynamics::SimOptions options = {});

// Posterior over u = log10(theta). The likelihood gradient comes from central
// finite differences on batched rollouts; the prior gradient is analytic.
class SimulationPosterior final : public Target {
 public:
  SimulationPosterior(geometry::TreeModel model, std::vector<io::Episode> episodes,
                      std::optional<priors::Prior> prior, InferenceConfig config,
                      dynamics::SimOptions options = {});

  std::size_t dim() const override { return 2 * model_.chain_length(); }
  DensityBatch values(const Eigen::MatrixXd& points) const override;
  DensityBatch evaluate(const Eigen::MatrixXd& points) const override;

  double loss_at(const Eigen::VectorXd& u) const;
  double normalizer() const { return normalizer_; }
  const std::optional<priors::Prior>& prior() const { return prior_; }
  const InferenceConfig& config() const { return config_; }

 private:
  double likelihood_term(double loss) const;
  std::vector<double> losses(const std::vector<Eigen::VectorXd>& points) const;

  geometry::TreeModel model_;
  std::vector<io::Episode> episodes_;
  std::vector<dynamics::BranchChain> chains_;
  std::optional<priors::Prior> prior_;
  InferenceConfig config_;
  double normalizer_;
};

}  // namespace branchinfer::inference
