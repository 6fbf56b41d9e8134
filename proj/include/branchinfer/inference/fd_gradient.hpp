#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace branchinfer::inference {

using Vector = Eigen::VectorXd;

struct FdGradient {
  Vector gradient;
  // Dimensions that fell back to one-sided differences.
  std::size_t one_sided = 0;
  // Dimensions with no finite probe on either side (gradient set to zero).
  std::size_t failed = 0;

  bool warning() const { return failed > 0; }
};

// Per-dimension step h_i = fd_epsilon * max(|theta_i|, 1).
double fd_step(double theta_i, double fd_epsilon);

// Probe points in evaluation order: theta, theta + h_0 e_0, theta - h_0 e_0,
// theta + h_1 e_1, ... (2N + 1 points).
std::vector<Vector> fd_probes(const Vector& theta, double fd_epsilon);

// Central differences from values at fd_probes(theta); one-sided where a side
// is non-finite.
FdGradient fd_from_values(const Vector& theta, double fd_epsilon, std::span<const double> values);

FdGradient fd_gradient(const std::function<double(const Vector&)>& f, const Vector& theta,
                       double fd_epsilon);

}  // namespace branchinfer::inference
