#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace branchinfer::priors {

using Vector = Eigen::VectorXd;

class PriorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LogPrior {
  double value = 0.0;
  Vector gradient;
};

// Uniform prior over [lower, upper] with a quadratic log-penalty outside:
// log p = -d(theta, B)^2 / sqrt(2 sigma^2).
struct SmoothBox {
  Vector lower;
  Vector upper;
  double sigma = 0.05;

  std::size_t dim() const { return static_cast<std::size_t>(lower.size()); }
  void validate() const;
  SmoothBox slice(std::size_t i, std::size_t j) const;
  bool contains(const Vector& theta, double margin = 0.0) const;
};

LogPrior smooth_box_log_prior(const Vector& theta, const SmoothBox& box);

enum class InequalityMode { kStep, kRamp };

InequalityMode parse_inequality_mode(const std::string& name);
std::string to_string(InequalityMode mode);

// Label of the belief theta1 >= theta2 (parent >= child): 0 when it holds,
// otherwise -eta (step) or -eta * (theta2 - theta1) (ramp).
double inequality_label(double theta1, double theta2, double eta, InequalityMode mode);

// One-hidden-layer regressor y(x) = w0 + sum_k w_k s(b_k + sum_d W_kd u_d), with
// u_d = (x_d - input_offset_d) * input_scale_d and s the logistic sigmoid.
class PriorNet {
 public:
  PriorNet() = default;
  PriorNet(Eigen::MatrixXd hidden, Vector output, Vector input_offset, Vector input_scale);

  std::size_t inputs() const { return static_cast<std::size_t>(input_offset_.size()); }
  std::size_t hidden_units() const { return static_cast<std::size_t>(hidden_.rows()); }

  double predict(const Vector& x) const;
  double predict(const Vector& x, Vector& gradient) const;

  // k x (N + 1); column 0 holds the biases.
  const Eigen::MatrixXd& hidden_weights() const { return hidden_; }
  // k + 1; entry 0 is w0.
  const Vector& output_weights() const { return output_; }
  const Vector& input_offset() const { return input_offset_; }
  const Vector& input_scale() const { return input_scale_; }

  // Flat text: "priornet 1", "dims <N> <k>", "activation sigmoid",
  // "offset ...", "scale ...", k "hidden ..." rows of N + 1, "output ..." k + 1.
  std::string serialize() const;
  static PriorNet deserialize(const std::string& text);

 private:
  Eigen::MatrixXd hidden_;
  Vector output_;
  Vector input_offset_;
  Vector input_scale_;
};

struct PriorTrainConfig {
  std::size_t hidden_units = 32;
  std::size_t grid_points_per_dim = 31;
  std::size_t random_points = 1000;
  std::size_t epochs = 4000;
  double learning_rate = 0.02;
  std::uint64_t seed = 7;
  // Defaults to 2% of eta * box width (ramp) or 10% of eta (step).
  std::optional<double> rmse_threshold;
};

struct TrainedPriorNet {
  PriorNet net;
  double rmse = 0.0;
};

// Fits a PriorNet to inequality_label over a 2D box (dimension 0 = parent,
// dimension 1 = child). Throws PriorError when the RMSE threshold is missed.
TrainedPriorNet train_prior_net(const SmoothBox& pair_box, double eta, InequalityMode mode,
                                const PriorTrainConfig& config = {});

// Learnt pairwise constraint: net evaluated on (theta[parent], theta[child]).
struct PairConstraint {
  PriorNet net;
  std::size_t parent_index = 0;
  std::size_t child_index = 0;
};

// Smooth-box term plus the sum of constraint nets.
LogPrior nn_log_prior(const Vector& theta, const SmoothBox& box,
                      std::span<const PairConstraint> constraints);

struct Prior {
  SmoothBox box;
  std::vector<PairConstraint> constraints;

  LogPrior evaluate(const Vector& theta) const {
    return nn_log_prior(theta, box, constraints);
  }
};

}  // namespace branchinfer::priors
