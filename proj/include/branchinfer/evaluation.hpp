#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

namespace branchinfer::evaluation {

class EvaluationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr double kBandwidthFloor = 1e-9;

// 1D Gaussian KDE with Scott's bandwidth h = std(ddof=1) * n^(-1/5).
class Kde {
 public:
  explicit Kde(std::vector<double> samples);

  double bandwidth() const { return bandwidth_; }
  bool floored() const { return floored_; }
  double density(double x) const;
  double cdf(double x) const;
  // Inverse CDF (safeguarded Newton); p is clamped to [1e-12, 1 - 1e-12].
  double quantile(double p) const;

 private:
  std::vector<double> samples_;
  double bandwidth_ = 0.0;
  bool floored_ = false;
};

std::vector<double> kde_1d(const std::vector<double>& samples, const std::vector<double>& points);

struct TrajectoryBand {
  std::vector<double> times;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<double> median;

  std::size_t size() const { return times.size(); }
};

// predicted: one trajectory sample per row, one timestep per column.
TrajectoryBand trajectory_band(const Eigen::MatrixXd& predicted, const std::vector<double>& times,
                               double level = 0.95);

struct CoverageReport {
  double pct_outside = 0.0;
  double mean_width = 0.0;
  std::size_t points = 0;
  std::vector<double> per_episode_outside;
  std::vector<double> per_episode_width;
};

CoverageReport coverage(const TrajectoryBand& band, const std::vector<double>& gt);

// Point-weighted combination of per-episode reports.
CoverageReport combine(const std::vector<CoverageReport>& reports);

double rmse(const std::vector<double>& a, const std::vector<double>& b);

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

std::vector<Fold> kfold_splits(std::size_t episodes, std::size_t k, std::uint64_t seed);

}  // namespace branchinfer::evaluation
