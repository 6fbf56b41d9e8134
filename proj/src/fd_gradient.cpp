#include "branchinfer/inference/fd_gradient.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace branchinfer::inference {

double fd_step(double theta_i, double fd_epsilon) {
  return fd_epsilon * std::max(std::abs(theta_i), 1.0);
}

std::vector<Vector> fd_probes(const Vector& theta, double fd_epsilon) {
  std::vector<Vector> probes;
  probes.reserve(2 * static_cast<std::size_t>(theta.size()) + 1);
  probes.push_back(theta);
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const double h = fd_step(theta[i], fd_epsilon);
    Vector plus = theta, minus = theta;
    plus[i] += h;
    minus[i] -= h;
    probes.push_back(std::move(plus));
    probes.push_back(std::move(minus));
  }
  return probes;
}

FdGradient fd_from_values(const Vector& theta, double fd_epsilon,
                          std::span<const double> values) {
  const auto n = theta.size();
  if (values.size() != 2 * static_cast<std::size_t>(n) + 1) {
    throw std::invalid_argument("fd_from_values: expected 2N + 1 probe values");
  }
  FdGradient out{Vector::Zero(n)};
  const double center = values[0];
  for (Eigen::Index i = 0; i < n; ++i) {
    // Use the realized step so rounding in theta +/- h does not bias the quotient.
    const double h = fd_step(theta[i], fd_epsilon);
    const double hp = (theta[i] + h) - theta[i];
    const double hm = theta[i] - (theta[i] - h);
    const double fp = values[1 + 2 * static_cast<std::size_t>(i)];
    const double fm = values[2 + 2 * static_cast<std::size_t>(i)];
    const bool ok_p = std::isfinite(fp);
    const bool ok_m = std::isfinite(fm);
    const bool ok_c = std::isfinite(center);
    if (ok_p && ok_m) {
      out.gradient[i] = (fp - fm) / (hp + hm);
    } else if (ok_p && ok_c) {
      out.gradient[i] = (fp - center) / hp;
      ++out.one_sided;
    } else if (ok_m && ok_c) {
      out.gradient[i] = (center - fm) / hm;
      ++out.one_sided;
    } else {
      ++out.failed;
    }
  }
  return out;
}

FdGradient fd_gradient(const std::function<double(const Vector&)>& f, const Vector& theta,
                       double fd_epsilon) {
  const auto probes = fd_probes(theta, fd_epsilon);
  std::vector<double> values(probes.size());
  for (std::size_t p = 0; p < probes.size(); ++p) values[p] = f(probes[p]);
  return fd_from_values(theta, fd_epsilon, values);
}

}  // namespace branchinfer::inference
