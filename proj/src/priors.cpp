#include "branchinfer/priors.hpp"

#include <cmath>

namespace branchinfer::priors {

void SmoothBox::validate() const {
  if (lower.size() != upper.size() || lower.size() == 0) {
    throw PriorError("box bounds must be non-empty and of equal length");
  }
  for (Eigen::Index i = 0; i < lower.size(); ++i) {
    if (!(lower[i] < upper[i])) throw PriorError("box requires lower < upper element-wise");
  }
  if (!(sigma > 0.0)) throw PriorError("box sigma must be positive");
}

SmoothBox SmoothBox::slice(std::size_t i, std::size_t j) const {
  SmoothBox out;
  out.lower = Vector{{lower[static_cast<Eigen::Index>(i)], lower[static_cast<Eigen::Index>(j)]}};
  out.upper = Vector{{upper[static_cast<Eigen::Index>(i)], upper[static_cast<Eigen::Index>(j)]}};
  out.sigma = sigma;
  return out;
}

bool SmoothBox::contains(const Vector& theta, double margin) const {
  return ((theta.array() >= lower.array() - margin) && (theta.array() <= upper.array() + margin))
      .all();
}

LogPrior smooth_box_log_prior(const Vector& theta, const SmoothBox& box) {
  if (theta.size() != box.lower.size()) throw PriorError("theta and box dimensions differ");
  const double denom = std::sqrt(2.0 * box.sigma * box.sigma);
  LogPrior out{0.0, Vector::Zero(theta.size())};
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    double d = 0.0;
    double dd = 0.0;  // d(distance)/d(theta_i)
    if (theta[i] > box.upper[i]) {
      d = theta[i] - box.upper[i];
      dd = 1.0;
    } else if (theta[i] < box.lower[i]) {
      d = box.lower[i] - theta[i];
      dd = -1.0;
    }
    out.value -= d * d / denom;
    out.gradient[i] = -2.0 * d * dd / denom;
  }
  return out;
}

InequalityMode parse_inequality_mode(const std::string& name) {
  if (name == "ramp") return InequalityMode::kRamp;
  if (name == "step") return InequalityMode::kStep;
  throw PriorError("unknown inequality mode '" + name + "' (expected ramp or step)");
}

std::string to_string(InequalityMode mode) {
  return mode == InequalityMode::kRamp ? "ramp" : "step";
}

double inequality_label(double theta1, double theta2, double eta, InequalityMode mode) {
  if (theta1 >= theta2) return 0.0;
  return mode == InequalityMode::kStep ? -eta : -eta * (theta2 - theta1);
}

LogPrior nn_log_prior(const Vector& theta, const SmoothBox& box,
                      std::span<const PairConstraint> constraints) {
  LogPrior out = smooth_box_log_prior(theta, box);
  Vector pair(2), g(2);
  for (const auto& c : constraints) {
    const auto p = static_cast<Eigen::Index>(c.parent_index);
    const auto q = static_cast<Eigen::Index>(c.child_index);
    if (p >= theta.size() || q >= theta.size() || p == q) {
      throw PriorError("constraint indices do not address theta");
    }
    pair << theta[p], theta[q];
    out.value += c.net.predict(pair, g);
    out.gradient[p] += g[0];
    out.gradient[q] += g[1];
  }
  return out;
}

}  // namespace branchinfer::priors
