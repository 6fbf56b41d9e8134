#include <cmath>
#include <random>
#include <sstream>

#include "branchinfer/priors.hpp"
#include "branchinfer/trajectory_io.hpp"

namespace branchinfer::priors {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

void expect_token(std::istringstream& ss, const std::string& token) {
  std::string got;
  if (!(ss >> got) || got != token) {
    throw PriorError("priornet: expected '" + token + "', got '" + got + "'");
  }
}

Vector read_values(std::istringstream& ss, const std::string& tag, std::size_t count) {
  expect_token(ss, tag);
  Vector v(static_cast<Eigen::Index>(count));
  for (std::size_t i = 0; i < count; ++i) {
    if (!(ss >> v[static_cast<Eigen::Index>(i)])) throw PriorError("priornet: truncated " + tag);
  }
  return v;
}

}  // namespace

PriorNet::PriorNet(Eigen::MatrixXd hidden, Vector output, Vector input_offset, Vector input_scale)
    : hidden_(std::move(hidden)),
      output_(std::move(output)),
      input_offset_(std::move(input_offset)),
      input_scale_(std::move(input_scale)) {
  if (hidden_.rows() < 1 || hidden_.cols() != input_offset_.size() + 1 ||
      output_.size() != hidden_.rows() + 1 || input_scale_.size() != input_offset_.size()) {
    throw PriorError("priornet: inconsistent weight shapes");
  }
  if (!hidden_.allFinite() || !output_.allFinite() || !input_offset_.allFinite() ||
      !input_scale_.allFinite()) {
    throw PriorError("priornet: non-finite weights");
  }
}

double PriorNet::predict(const Vector& x) const {
  const Vector u = (x - input_offset_).cwiseProduct(input_scale_);
  double y = output_[0];
  for (Eigen::Index k = 0; k < hidden_.rows(); ++k) {
    const double z = hidden_(k, 0) + hidden_.row(k).tail(u.size()).dot(u);
    y += output_[k + 1] * sigmoid(z);
  }
  return y;
}

double PriorNet::predict(const Vector& x, Vector& gradient) const {
  const Vector u = (x - input_offset_).cwiseProduct(input_scale_);
  double y = output_[0];
  Vector du = Vector::Zero(u.size());
  for (Eigen::Index k = 0; k < hidden_.rows(); ++k) {
    const auto w = hidden_.row(k).tail(u.size());
    const double s = sigmoid(hidden_(k, 0) + w.dot(u));
    y += output_[k + 1] * s;
    du += (output_[k + 1] * s * (1.0 - s)) * w.transpose();
  }
  gradient = du.cwiseProduct(input_scale_);
  return y;
}

std::string PriorNet::serialize() const {
  std::ostringstream os;
  const auto n = inputs();
  const auto k = hidden_units();
  os << "priornet 1\n";
  os << "dims " << n << ' ' << k << '\n';
  os << "activation sigmoid\n";
  auto row = [&](const char* tag, auto&& values) {
    os << tag;
    for (Eigen::Index i = 0; i < values.size(); ++i) os << ' ' << io::format_double(values[i]);
    os << '\n';
  };
  row("offset", input_offset_);
  row("scale", input_scale_);
  for (std::size_t r = 0; r < k; ++r) {
    row("hidden", Vector(hidden_.row(static_cast<Eigen::Index>(r)).transpose()));
  }
  row("output", output_);
  return os.str();
}

PriorNet PriorNet::deserialize(const std::string& text) {
  std::istringstream ss(text);
  expect_token(ss, "priornet");
  int version = 0;
  if (!(ss >> version) || version != 1) throw PriorError("priornet: unsupported version");
  expect_token(ss, "dims");
  std::size_t n = 0, k = 0;
  if (!(ss >> n >> k) || n == 0 || k == 0) throw PriorError("priornet: bad dims");
  expect_token(ss, "activation");
  expect_token(ss, "sigmoid");
  Vector offset = read_values(ss, "offset", n);
  Vector scale = read_values(ss, "scale", n);
  Eigen::MatrixXd hidden(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(n + 1));
  for (std::size_t r = 0; r < k; ++r) {
    hidden.row(static_cast<Eigen::Index>(r)) = read_values(ss, "hidden", n + 1).transpose();
  }
  Vector output = read_values(ss, "output", k + 1);
  return PriorNet(std::move(hidden), std::move(output), std::move(offset), std::move(scale));
}

TrainedPriorNet train_prior_net(const SmoothBox& pair_box, double eta, InequalityMode mode,
                                const PriorTrainConfig& config) {
  pair_box.validate();
  if (pair_box.dim() != 2) throw PriorError("inequality prior nets take exactly two inputs");
  if (!(eta > 0.0)) throw PriorError("eta must be positive");
  if (config.hidden_units < 1) throw PriorError("hidden_units must be >= 1");

  const Vector& lo = pair_box.lower;
  const Vector& hi = pair_box.upper;
  const double width = (hi - lo).maxCoeff();
  const double label_scale = mode == InequalityMode::kRamp ? eta * width : eta;
  const double threshold = config.rmse_threshold.value_or(
      mode == InequalityMode::kRamp ? 0.02 * eta * width : 0.10 * eta);

  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // Dense grid plus uniform random points over the box.
  const std::size_t g = std::max<std::size_t>(config.grid_points_per_dim, 2);
  const std::size_t m = g * g + config.random_points;
  Eigen::MatrixXd x(static_cast<Eigen::Index>(m), 2);
  std::size_t row = 0;
  for (std::size_t i = 0; i < g; ++i) {
    for (std::size_t j = 0; j < g; ++j, ++row) {
      const double a = static_cast<double>(i) / static_cast<double>(g - 1);
      const double b = static_cast<double>(j) / static_cast<double>(g - 1);
      x(static_cast<Eigen::Index>(row), 0) = lo[0] + a * (hi[0] - lo[0]);
      x(static_cast<Eigen::Index>(row), 1) = lo[1] + b * (hi[1] - lo[1]);
    }
  }
  for (; row < m; ++row) {
    x(static_cast<Eigen::Index>(row), 0) = lo[0] + unit(rng) * (hi[0] - lo[0]);
    x(static_cast<Eigen::Index>(row), 1) = lo[1] + unit(rng) * (hi[1] - lo[1]);
  }

  const Vector offset = 0.5 * (lo + hi);
  const Vector scale = (2.0 / (hi - lo).array()).matrix();
  const auto rows = static_cast<Eigen::Index>(m);
  Eigen::MatrixXd design(rows, 3);  // [1, u1, u2]
  Vector target(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    design(r, 0) = 1.0;
    design(r, 1) = (x(r, 0) - offset[0]) * scale[0];
    design(r, 2) = (x(r, 1) - offset[1]) * scale[1];
    target[r] = inequality_label(x(r, 0), x(r, 1), eta, mode) / label_scale;
  }

  const auto k = static_cast<Eigen::Index>(config.hidden_units);
  std::uniform_real_distribution<double> init(-4.0, 4.0);
  Eigen::MatrixXd w(k, 3);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = init(rng);
  Vector v = Vector::Zero(k);
  double v0 = target.mean();

  // Full-batch Adam on mean squared error.
  const double b1 = 0.9, b2 = 0.999, adam_eps = 1e-8;
  Eigen::MatrixXd mw = Eigen::MatrixXd::Zero(k, 3), sw = mw;
  Vector mv = Vector::Zero(k), sv = mv;
  double mv0 = 0.0, sv0 = 0.0;
  Eigen::MatrixXd act(rows, k);
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    act.noalias() = design * w.transpose();
    act = act.unaryExpr([](double z) { return sigmoid(z); });
    const Vector resid = (act * v).array() + v0 - target.array();
    const Vector gp = (2.0 / static_cast<double>(rows)) * resid;

    const Vector gv = act.transpose() * gp;
    const double gv0 = gp.sum();
    const Eigen::MatrixXd dz =
        (gp * v.transpose()).cwiseProduct(act.cwiseProduct((1.0 - act.array()).matrix()));
    const Eigen::MatrixXd gw = dz.transpose() * design;

    const double c1 = 1.0 - std::pow(b1, static_cast<double>(epoch));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(epoch));
    const double lr = config.learning_rate;
    mw = b1 * mw + (1 - b1) * gw;
    sw = b2 * sw + (1 - b2) * gw.cwiseProduct(gw);
    w.array() -= lr * (mw.array() / c1) / ((sw.array() / c2).sqrt() + adam_eps);
    mv = b1 * mv + (1 - b1) * gv;
    sv = b2 * sv + (1 - b2) * gv.cwiseProduct(gv);
    v.array() -= lr * (mv.array() / c1) / ((sv.array() / c2).sqrt() + adam_eps);
    mv0 = b1 * mv0 + (1 - b1) * gv0;
    sv0 = b2 * sv0 + (1 - b2) * gv0 * gv0;
    v0 -= lr * (mv0 / c1) / (std::sqrt(sv0 / c2) + adam_eps);
  }

  Vector output(k + 1);
  output[0] = v0 * label_scale;
  output.tail(k) = v * label_scale;
  PriorNet net(w, output, offset, scale);

  double sq = 0.0;
  Vector pt(2);
  for (Eigen::Index r = 0; r < rows; ++r) {
    pt << x(r, 0), x(r, 1);
    const double e = net.predict(pt) - target[r] * label_scale;
    sq += e * e;
  }
  const double rmse = std::sqrt(sq / static_cast<double>(rows));
  if (!(rmse <= threshold)) {
    std::ostringstream msg;
    msg << "prior net training RMSE " << rmse << " exceeds threshold " << threshold
        << "; increase hidden_units or epochs";
    throw PriorError(msg.str());
  }
  return {std::move(net), rmse};
}

}  // namespace branchinfer::priors
