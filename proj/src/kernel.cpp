#include "branchinfer/inference/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace branchinfer::inference {

double median_pairwise_distance(const Eigen::MatrixXd& particles) {
  const auto n = particles.rows();
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      d.push_back((particles.row(i) - particles.row(j)).norm());
    }
  }
  if (d.empty()) return 0.0;
  const auto mid = d.size() / 2;
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid), d.end());
  if (d.size() % 2 == 1) return d[mid];
  const double upper = d[mid];
  const double lower = *std::max_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

RbfKernel rbf_kernel(const Eigen::MatrixXd& particles) {
  const auto n = particles.rows();
  RbfKernel k;
  const double med = median_pairwise_distance(particles);
  k.bandwidth_sq = med * med / (2.0 * std::log(static_cast<double>(n) + 1.0));
  if (!(k.bandwidth_sq >= kBandwidthFloor)) {
    k.bandwidth_sq = kBandwidthFloor;
    k.floored = true;
  }
  k.matrix.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    k.matrix(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v =
          std::exp(-(particles.row(i) - particles.row(j)).squaredNorm() / (2.0 * k.bandwidth_sq));
      k.matrix(i, j) = v;
      k.matrix(j, i) = v;
    }
  }
  return k;
}

Eigen::VectorXd RbfKernel::grad_first(const Eigen::MatrixXd& particles, Eigen::Index j,
                                      Eigen::Index i) const {
  return (matrix(j, i) / bandwidth_sq) * (particles.row(i) - particles.row(j)).transpose();
}

Eigen::MatrixXd RbfKernel::repulsion(const Eigen::MatrixXd& particles) const {
  // sum_j k_ji (theta_i - theta_j) / sigma^2
  const Eigen::VectorXd row_sums = matrix.rowwise().sum();
  return (row_sums.asDiagonal() * particles - matrix * particles) / bandwidth_sq;
}

}  // namespace branchinfer::inference
