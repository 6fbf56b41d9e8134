#include "branchinfer/inference/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace branchinfer::inference {

void InferenceConfig::validate() const {
  if (!(kT > 0.0)) throw std::invalid_argument("kT must be positive");
  if (iterations < 1) throw std::invalid_argument("iterations must be >= 1");
  if (n_particles < 1) throw std::invalid_argument("n_particles must be >= 1");
  if (!(fd_epsilon > 0.0 && fd_epsilon < 0.1)) {
    throw std::invalid_argument("fd_epsilon must lie in (0, 0.1)");
  }
  if (!(optimizer.learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (optimizer.beta1 < 0.0 || optimizer.beta1 >= 1.0 || optimizer.beta2 < 0.0 ||
      optimizer.beta2 >= 1.0) {
    throw std::invalid_argument("Adam betas must lie in [0, 1)");
  }
  if (!(step_size > 0.0)) throw std::invalid_argument("step_size must be positive");
  if (sghmc_friction < 0.0) throw std::invalid_argument("sghmc_friction must be >= 0");
  if (mcmh_proposal_scale < 0.0) throw std::invalid_argument("mcmh_proposal_scale must be >= 0");
  if (thin < 1) throw std::invalid_argument("thin must be >= 1");
  if (burn_in >= iterations) throw std::invalid_argument("burn_in must be < iterations");
}

OptimizerKind parse_optimizer_kind(const std::string& name) {
  if (name == "adam") return OptimizerKind::kAdam;
  if (name == "sgd") return OptimizerKind::kSgd;
  throw std::invalid_argument("unknown optimizer '" + name + "' (expected adam or sgd)");
}

void Optimizer::step(Eigen::MatrixXd& params, const Eigen::MatrixXd& grad) {
  if (m_.rows() != params.rows() || m_.cols() != params.cols()) {
    m_ = Eigen::MatrixXd::Zero(params.rows(), params.cols());
    v_ = m_;
    t_ = 0;
  }
  ++t_;
  const double lr = config_.learning_rate;
  if (config_.kind == OptimizerKind::kSgd) {
    if (config_.momentum == 0.0) {
      params -= lr * grad;
    } else {
      m_ = config_.momentum * m_ + grad;
      params -= lr * m_;
    }
    return;
  }
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  m_ = b1 * m_ + (1.0 - b1) * grad;
  v_ = b2 * v_ + (1.0 - b2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  params.array() -= lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + config_.epsilon);
}

}  // namespace branchinfer::inference
