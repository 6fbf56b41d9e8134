#pragma once

#include <Eigen/Core>

namespace branchinfer::inference {

// RBF kernel k(a, b) = exp(-|a - b|^2 / (2 sigma^2)) over particle rows with
// the median-heuristic bandwidth sigma^2 = med^2 / (2 log(n + 1)).
struct RbfKernel {
  Eigen::MatrixXd matrix;
  double bandwidth_sq = 1.0;
  bool floored = false;

  // Gradient of k(theta_j, theta_i) with respect to its first argument.
  Eigen::VectorXd grad_first(const Eigen::MatrixXd& particles, Eigen::Index j,
                             Eigen::Index i) const;
  // sum_j grad_first(j, i), one row per particle i.
  Eigen::MatrixXd repulsion(const Eigen::MatrixXd& particles) const;
};

inline constexpr double kBandwidthFloor = 1e-8;

double median_pairwise_distance(const Eigen::MatrixXd& particles);

RbfKernel rbf_kernel(const Eigen::MatrixXd& particles);

}  // namespace branchinfer::inference
