#include "branchinfer/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numbers>
#include <numeric>
#include <random>

namespace branchinfer::evaluation {

Kde::Kde(std::vector<double> samples) : samples_(std::move(samples)) {
  const auto n = samples_.size();
  if (n < 2) throw EvaluationError("KDE needs at least two samples");
  for (double s : samples_) {
    if (!std::isfinite(s)) throw EvaluationError("KDE samples must be finite");
  }
  const double mean = std::accumulate(samples_.begin(), samples_.end(), 0.0) / n;
  double ss = 0.0;
  for (double s : samples_) ss += (s - mean) * (s - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  bandwidth_ = sd * std::pow(static_cast<double>(n), -0.2);
  if (!(bandwidth_ >= kBandwidthFloor)) {
    bandwidth_ = kBandwidthFloor;
    floored_ = true;
  }
  std::sort(samples_.begin(), samples_.end());
}

double Kde::density(double x) const {
  const double norm = 1.0 / (std::sqrt(2.0 * std::numbers::pi) * bandwidth_);
  double sum = 0.0;
  for (double s : samples_) {
    const double z = (x - s) / bandwidth_;
    sum += std::exp(-0.5 * z * z);
  }
  return norm * sum / static_cast<double>(samples_.size());
}

double Kde::cdf(double x) const {
  double sum = 0.0;
  for (double s : samples_) sum += 0.5 * std::erfc(-(x - s) / (bandwidth_ * std::numbers::sqrt2));
  return sum / static_cast<double>(samples_.size());
}

double Kde::quantile(double p) const {
  p = std::clamp(p, 1e-12, 1.0 - 1e-12);
  double lo = samples_.front() - 10.0 * bandwidth_;
  double hi = samples_.back() + 10.0 * bandwidth_;
  while (cdf(lo) > p) lo -= 10.0 * bandwidth_;
  while (cdf(hi) < p) hi += 10.0 * bandwidth_;
  // Newton on the CDF, falling back to bisection when a step leaves the bracket.
  double x = 0.5 * (lo + hi);
  for (int i = 0; i < 200; ++i) {
    const double f = cdf(x) - p;
    if (f < 0.0) {
      lo = x;
    } else {
      hi = x;
    }
    const double d = density(x);
    double next = d > 0.0 ? x - f / d : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= 1e-12 * bandwidth_ || hi - lo <= 1e-12 * bandwidth_) return next;
    x = next;
  }
  return x;
}

std::vector<double> kde_1d(const std::vector<double>& samples, const std::vector<double>& points) {
  const Kde kde(samples);
  if (kde.floored()) std::cerr << "warning: zero-spread KDE samples; bandwidth floored\n";
  std::vector<double> out;
  out.reserve(points.size());
  for (double x : points) out.push_back(kde.density(x));
  return out;
}

TrajectoryBand trajectory_band(const Eigen::MatrixXd& predicted, const std::vector<double>& times,
                               double level) {
  if (predicted.rows() < 8) throw EvaluationError("trajectory band needs at least 8 samples");
  if (static_cast<std::size_t>(predicted.cols()) != times.size()) {
    throw EvaluationError("trajectory length and time axis differ");
  }
  if (!(level > 0.0 && level <= 1.0)) throw EvaluationError("band level must lie in (0, 1]");
  const double tail = 0.5 * (1.0 - level);
  TrajectoryBand band;
  band.times = times;
  std::vector<double> column(static_cast<std::size_t>(predicted.rows()));
  for (Eigen::Index t = 0; t < predicted.cols(); ++t) {
    for (Eigen::Index i = 0; i < predicted.rows(); ++i) {
      column[static_cast<std::size_t>(i)] = predicted(i, t);
    }
    const auto [mn, mx] = std::minmax_element(column.begin(), column.end());
    if (*mn == *mx) {
      // Identical samples: zero-width band.
      band.lower.push_back(*mn);
      band.median.push_back(*mn);
      band.upper.push_back(*mn);
      continue;
    }
    const Kde kde(column);
    band.lower.push_back(kde.quantile(tail));
    band.median.push_back(kde.quantile(0.5));
    band.upper.push_back(kde.quantile(1.0 - tail));
  }
  return band;
}

CoverageReport coverage(const TrajectoryBand& band, const std::vector<double>& gt) {
  if (gt.size() != band.size() || band.lower.size() != band.size() ||
      band.upper.size() != band.size()) {
    throw EvaluationError("coverage: band and ground truth lengths differ");
  }
  if (gt.empty()) throw EvaluationError("coverage: empty trajectory");
  std::size_t outside = 0;
  double width = 0.0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt[i] < band.lower[i] || gt[i] > band.upper[i]) ++outside;
    width += band.upper[i] - band.lower[i];
  }
  CoverageReport r;
  r.points = gt.size();
  r.pct_outside = static_cast<double>(outside) / static_cast<double>(gt.size());
  r.mean_width = width / static_cast<double>(gt.size());
  r.per_episode_outside = {r.pct_outside};
  r.per_episode_width = {r.mean_width};
  return r;
}

CoverageReport combine(const std::vector<CoverageReport>& reports) {
  CoverageReport out;
  double outside = 0.0, width = 0.0;
  for (const auto& r : reports) {
    outside += r.pct_outside * static_cast<double>(r.points);
    width += r.mean_width * static_cast<double>(r.points);
    out.points += r.points;
    out.per_episode_outside.insert(out.per_episode_outside.end(), r.per_episode_outside.begin(),
                                   r.per_episode_outside.end());
    out.per_episode_width.insert(out.per_episode_width.end(), r.per_episode_width.begin(),
                                 r.per_episode_width.end());
  }
  if (out.points == 0) throw EvaluationError("combine: no coverage points");
  out.pct_outside = outside / static_cast<double>(out.points);
  out.mean_width = width / static_cast<double>(out.points);
  return out;
}

double rmse(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.empty()) throw EvaluationError("rmse: length mismatch");
  double sq = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sq += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(sq / static_cast<double>(a.size()));
}

std::vector<Fold> kfold_splits(std::size_t episodes, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw EvaluationError("kfold: k must be >= 2");
  if (k > episodes) throw EvaluationError("kfold: k exceeds the episode count");
  std::vector<std::size_t> order(episodes);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  // Fisher-Yates with an explicit draw keeps the permutation library-independent.
  for (std::size_t i = episodes; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
  std::vector<Fold> folds(k);
  const std::size_t base = episodes / k, extra = episodes % k;
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = base + (f < extra ? 1 : 0);
    folds[f].test.assign(order.begin() + pos, order.begin() + pos + size);
    std::sort(folds[f].test.begin(), folds[f].test.end());
    pos += size;
  }
  for (std::size_t f = 0; f < k; ++f) {
    for (std::size_t g = 0; g < k; ++g) {
      if (g != f) folds[f].train.insert(folds[f].train.end(), folds[g].test.begin(), folds[g].test.end());
    }
    std::sort(folds[f].train.begin(), folds[f].train.end());
  }
  return folds;
}

}  // namespace branchinfer::evaluation
