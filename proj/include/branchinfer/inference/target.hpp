#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <functional>

namespace branchinfer::inference {

// Log density and gradient at a batch of points (one per row).
struct DensityBatch {
  Eigen::VectorXd log_density;
  Eigen::MatrixXd gradient;
  // Trajectory loss per point when the target has one; empty otherwise.
  Eigen::VectorXd loss;
  std::size_t warnings = 0;
};

// An unnormalized log density over the search space.
class Target {
 public:
  virtual ~Target() = default;
  virtual std::size_t dim() const = 0;
  // Log density (and loss, if any) without gradients.
  virtual DensityBatch values(const Eigen::MatrixXd& points) const = 0;
  virtual DensityBatch evaluate(const Eigen::MatrixXd& points) const = 0;

  Eigen::VectorXd log_density(const Eigen::MatrixXd& points) const {
    return values(points).log_density;
  }
};

// Loss when the batch carries one, otherwise the negative log density.
Eigen::VectorXd loss_or_energy(const DensityBatch& batch);

// Analytic target from closures; the gradient closure is optional (central
// finite differences otherwise).
class FunctionTarget final : public Target {
 public:
  using LogDensityFn = std::function<double(const Eigen::VectorXd&)>;
  using GradientFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

  FunctionTarget(std::size_t dim, LogDensityFn log_density, GradientFn gradient = {},
                 double fd_epsilon = 1e-5);

  std::size_t dim() const override { return dim_; }
  DensityBatch values(const Eigen::MatrixXd& points) const override;
  DensityBatch evaluate(const Eigen::MatrixXd& points) const override;

 private:
  std::size_t dim_;
  LogDensityFn log_density_;
  GradientFn gradient_;
  double fd_epsilon_;
};

}  // namespace branchinfer::inference
