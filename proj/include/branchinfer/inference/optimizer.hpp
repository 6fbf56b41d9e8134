#pragma once

#include <Eigen/Core>
#include <cstddef>

#include "branchinfer/inference/config.hpp"

namespace branchinfer::inference {

// Minimizing first-order optimizer over a matrix of parameters (one particle
// per row). Moment estimates are kept per entry.
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig config) : config_(config) {}

  void step(Eigen::MatrixXd& params, const Eigen::MatrixXd& grad);
  std::size_t steps() const { return t_; }
  const OptimizerConfig& config() const { return config_; }

 private:
  OptimizerConfig config_;
  Eigen::MatrixXd m_;
  Eigen::MatrixXd v_;
  std::size_t t_ = 0;
};

}  // namespace branchinfer::inference
