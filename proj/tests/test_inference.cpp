#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <random>

#include "branchinfer/dynamics.hpp"
#include "branchinfer/inference/fd_gradient.hpp"
#include "branchinfer/inference/kernel.hpp"
#include "branchinfer/inference/optimizer.hpp"
#include "branchinfer/inference/posterior.hpp"
#include "branchinfer/inference/samplers.hpp"
#include "branchinfer/inference/svgd.hpp"

using namespace branchinfer;
using namespace branchinfer::inference;

namespace {

Eigen::MatrixXd random_particles(Eigen::Index n, Eigen::Index d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd p(n, d);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = normal(rng);
  return p;
}

SearchBounds square(double lo, double hi, Eigen::Index d = 2) {
  return {Eigen::VectorXd::Constant(d, lo), Eigen::VectorXd::Constant(d, hi)};
}

// Gaussian log density with mean mu and covariance cov, analytic gradient.
FunctionTarget gaussian_target(const Eigen::Vector2d& mu, const Eigen::Matrix2d& cov) {
  const Eigen::Matrix2d prec = cov.inverse();
  return FunctionTarget(
      2, [=](const Eigen::VectorXd& x) { return -0.5 * (x - mu).dot(prec * (x - mu)); },
      [=](const Eigen::VectorXd& x) -> Eigen::VectorXd { return -prec * (x - mu); });
}

Eigen::Matrix2d sample_cov(const Eigen::MatrixXd& s) {
  const Eigen::MatrixXd c = s.rowwise() - s.colwise().mean();
  return c.transpose() * c / static_cast<double>(s.rows() - 1);
}

double mean_pairwise(const Eigen::MatrixXd& p) {
  double sum = 0.0;
  int count = 0;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < p.rows(); ++j, ++count) sum += (p.row(i) - p.row(j)).norm();
  }
  return sum / count;
}

geometry::TreeModel single_link() {
  return geometry::make_chain({geometry::BranchLink{1.0, 0.02, 900.0, 0.0, std::nullopt}});
}

std::vector<io::Episode> episodes_at(const dynamics::SimParams& gt, std::size_t samples) {
  std::vector<io::Episode> out;
  for (double amp : {6.0, 10.0}) {
    io::Episode e;
    for (std::size_t i = 0; i < samples; ++i) {
      e.profile.forces.push_back(i < samples / 2 ? amp * (i + 1) / (samples / 2.0) : 0.0);
    }
    e.trajectory = dynamics::rollout(single_link(), gt, e.profile);
    out.push_back(e);
  }
  return out;
}

}  // namespace

TEST(FdGradient, QuadraticIsExact) {
  const Eigen::VectorXd theta{{0.3, -2.0, 5.0}};
  const auto r =
      fd_gradient([](const Eigen::VectorXd& x) { return x.squaredNorm(); }, theta, 1e-3);
  for (Eigen::Index d = 0; d < theta.size(); ++d) {
    EXPECT_NEAR(r.gradient[d], 2 * theta[d], 1e-6 * std::abs(2 * theta[d]));
  }
  EXPECT_FALSE(r.warning());
}

TEST(FdGradient, ConstantGivesZero) {
  const auto r = fd_gradient([](const Eigen::VectorXd&) { return 4.2; },
                             Eigen::VectorXd::Constant(4, 1.5), 1e-2);
  EXPECT_EQ(r.gradient.norm(), 0.0);
}

TEST(FdGradient, OneSidedAndFailedFallbacks) {
  // Non-finite above x0 = 1: one-sided backward difference in dimension 0.
  auto f = [](const Eigen::VectorXd& x) { return x[0] > 1.0 ? NAN : 3.0 * x[0] + x[1]; };
  const auto r = fd_gradient(f, Eigen::VectorXd{{1.0, 0.0}}, 1e-3);
  EXPECT_EQ(r.one_sided, 1u);
  EXPECT_NEAR(r.gradient[0], 3.0, 1e-9);
  EXPECT_NEAR(r.gradient[1], 1.0, 1e-9);
  auto g = [](const Eigen::VectorXd& x) { return x[0] == 1.0 ? x[1] : INFINITY; };
  const auto s = fd_gradient(g, Eigen::VectorXd{{1.0, 0.0}}, 1e-3);
  EXPECT_EQ(s.failed, 1u);
  EXPECT_TRUE(s.warning());
  EXPECT_EQ(s.gradient[0], 0.0);
}

TEST(FdGradient, ProbeOrderAndStep) {
  const auto probes = fd_probes(Eigen::VectorXd{{2.0, 0.5}}, 0.01);
  ASSERT_EQ(probes.size(), 5u);
  EXPECT_EQ(probes[1][0], 2.0 + 0.02);
  EXPECT_EQ(probes[2][0], 2.0 - 0.02);
  EXPECT_EQ(probes[3][1], 0.5 + 0.01);
  EXPECT_EQ(fd_step(-3.0, 0.01), 0.03);
}

TEST(Kernel, IdenticalParticlesGiveOnes) {
  const Eigen::MatrixXd p = Eigen::MatrixXd::Constant(2, 3, 0.7);
  const auto k = rbf_kernel(p);
  EXPECT_TRUE(k.floored);
  EXPECT_EQ(k.matrix, Eigen::MatrixXd::Ones(2, 2));
  EXPECT_EQ(k.repulsion(p).norm(), 0.0);
}

TEST(Kernel, MedianHeuristicBandwidth) {
  Eigen::MatrixXd p(3, 1);
  p << 0.0, 1.0, 3.0;  // distances 1, 2, 3
  const auto k = rbf_kernel(p);
  EXPECT_EQ(median_pairwise_distance(p), 2.0);
  EXPECT_NEAR(k.bandwidth_sq, 4.0 / (2 * std::log(4.0)), 1e-15);
  EXPECT_NEAR(k.matrix(0, 2), std::exp(-9.0 / (2 * k.bandwidth_sq)), 1e-15);
}

TEST(KernelProperty, SymmetricPositiveUnitDiagonal) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto p = random_particles(15, 3, seed);
    const auto k = rbf_kernel(p);
    EXPECT_LT((k.matrix - k.matrix.transpose()).norm(), 1e-15);
    for (Eigen::Index i = 0; i < 15; ++i) EXPECT_EQ(k.matrix(i, i), 1.0);
    EXPECT_GT(k.matrix.minCoeff(), 0.0);
    EXPECT_LE(k.matrix.maxCoeff(), 1.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(k.matrix);
    EXPECT_GT(eig.eigenvalues().minCoeff(), -1e-12);
  }
}

TEST(Kernel, GradientMatchesFiniteDifference) {
  const auto p = random_particles(6, 3, 8);
  const auto k = rbf_kernel(p);
  auto kval = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return std::exp(-(a - b).squaredNorm() / (2 * k.bandwidth_sq));
  };
  for (Eigen::Index j = 0; j < 6; ++j) {
    for (Eigen::Index i = 0; i < 6; ++i) {
      const Eigen::VectorXd g = k.grad_first(p, j, i);
      for (Eigen::Index d = 0; d < 3; ++d) {
        Eigen::VectorXd a = p.row(j).transpose(), b = a;
        a[d] += 1e-6;
        b[d] -= 1e-6;
        const Eigen::VectorXd t = p.row(i).transpose();
        // With j == i both arguments move; the gradient is w.r.t. the first only.
        const double fd = (kval(a, t) - kval(b, t)) / 2e-6;
        EXPECT_NEAR(g[d], fd, 1e-6);
      }
    }
  }
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(6, 3);
  for (Eigen::Index i = 0; i < 6; ++i) {
    for (Eigen::Index j = 0; j < 6; ++j) sum.row(i) += k.grad_first(p, j, i).transpose();
  }
  EXPECT_LT((sum - k.repulsion(p)).norm(), 1e-12);
}

TEST(Optimizer, SgdAndAdamFirstStep) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(1, 2);
  const Eigen::MatrixXd g{{2.0, -0.001}};
  Optimizer sgd({OptimizerKind::kSgd, 0.1});
  sgd.step(x, g);
  EXPECT_NEAR(x(0, 0), -0.2, 1e-15);
  EXPECT_NEAR(x(0, 1), 1e-4, 1e-15);
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(1, 2);
  Optimizer adam({OptimizerKind::kAdam, 0.05});
  adam.step(y, g);
  // Bias-corrected first step has magnitude lr regardless of gradient scale.
  EXPECT_NEAR(y(0, 0), -0.05, 1e-6);
  EXPECT_NEAR(y(0, 1), 0.05, 1e-4);
  EXPECT_EQ(adam.steps(), 1u);
}

TEST(Loss, ConstantOffsetGivesCSqrtG) {
  const auto traj = dynamics::rollout(single_link(), {{120.0}, {3.0}}, [] {
    dynamics::ForceProfile p;
    p.forces.assign(100, 5.0);
    return p;
  }());
  auto shifted = traj;
  for (auto& p : shifted.pos) p.z += 0.01;
  EXPECT_NEAR(trajectory_loss(shifted, traj), 0.01 * std::sqrt(100.0), 1e-12);
  EXPECT_EQ(trajectory_loss(traj, traj), 0.0);
}

TEST(Loss, ZeroAtGroundTruthAndNonNegative) {
  const dynamics::SimParams gt{{120.0}, {3.0}};
  const auto eps = episodes_at(gt, 80);
  EXPECT_EQ(loss(gt, single_link(), eps), 0.0);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> kp(20.0, 900.0), kd(0.2, 20.0);
  for (int t = 0; t < 20; ++t) EXPECT_GE(loss({{kp(rng)}, {kd(rng)}}, single_link(), eps), 0.0);
  // Unstable parameters diverge and pay the penalty.
  EXPECT_GE(loss({{0.5}, {0.01}}, single_link(), eps), kDivergencePenalty);
}

TEST(LogPosterior, InsideBoxWithoutNetsIsScaledLoss) {
  const dynamics::SimParams gt{{120.0}, {3.0}}, q{{200.0}, {5.0}};
  const auto eps = episodes_at(gt, 80);
  InferenceConfig cfg;
  cfg.kT = 0.01;
  priors::Prior prior;
  prior.box.lower = Eigen::VectorXd{{1.0, -1.0}};
  prior.box.upper = Eigen::VectorXd{{3.0, 1.5}};
  const double l = loss(q, single_link(), eps);
  EXPECT_DOUBLE_EQ(log_posterior(q, single_link(), eps, &prior, cfg),
                   -l / (loss_normalizer(eps, cfg) * cfg.kT));
  EXPECT_EQ(loss_normalizer(eps, cfg), 160.0);
}

TEST(LogPosterior, LargeTemperatureFlattensLikelihood) {
  const auto eps = episodes_at({{120.0}, {3.0}}, 80);
  InferenceConfig cfg;
  double prev = INFINITY;
  for (double kt : {1.0, 1e3, 1e6}) {
    cfg.kT = kt;
    const double diff = std::abs(log_posterior({{50.0}, {1.0}}, single_link(), eps, nullptr, cfg) -
                                 log_posterior({{500.0}, {9.0}}, single_link(), eps, nullptr, cfg));
    EXPECT_LT(diff, prev);
    prev = diff;
  }
  EXPECT_LT(prev, 1e-6);
}

TEST(SimulationPosterior, SearchSpaceRoundTrip) {
  const Eigen::VectorXd theta{{120.0, 3.0}};
  EXPECT_NEAR((to_raw_space(to_search_space(theta)) - theta).norm(), 0.0, 1e-12);
}

TEST(SvgdStructure, SingleParticleIsPlainGradientAscent) {
  const dynamics::SimParams gt{{120.0}, {3.0}};
  const auto eps = episodes_at(gt, 60);
  InferenceConfig cfg;
  cfg.kT = 0.5;
  cfg.svgd_repulsion = false;
  cfg.optimizer = {OptimizerKind::kSgd, 1e-3};
  const SimulationPosterior target(single_link(), eps, std::nullopt, cfg);

  ParticleSet set;
  set.particles = Eigen::MatrixXd{{2.3, 0.7}};
  const Eigen::VectorXd u = set.particles.row(0).transpose();
  Optimizer opt(cfg.optimizer);
  svgd_step(set, target, opt, cfg);

  const double norm = loss_normalizer(eps, cfg);
  auto f = [&](const Eigen::VectorXd& x) {
    const Eigen::VectorXd raw = to_raw_space(x);
    const auto params = dynamics::SimParams::from_theta(std::span(raw.data(), raw.size()));
    return -loss(params, single_link(), eps) / (norm * cfg.kT);
  };
  const Eigen::VectorXd expect = u + 1e-3 * fd_gradient(f, u, cfg.fd_epsilon).gradient;
  EXPECT_EQ(set.particles.row(0).transpose(), expect);
  EXPECT_EQ(set.iteration, 1u);
}

TEST(Svgd, FlatTargetSpreadsParticles) {
  const FunctionTarget flat(
      2, [](const Eigen::VectorXd&) { return 0.0; },
      [](const Eigen::VectorXd& x) -> Eigen::VectorXd { return Eigen::VectorXd::Zero(x.size()); });
  InferenceConfig cfg;
  cfg.n_particles = 20;
  ParticleSet set = uniform_particles(square(-0.1, 0.1), 20, 3);
  Optimizer opt(cfg.optimizer);
  double prev = mean_pairwise(set.particles);
  for (int i = 0; i < 10; ++i) {
    svgd_step(set, flat, opt, cfg);
    const double d = mean_pairwise(set.particles);
    EXPECT_GE(d, prev);
    prev = d;
  }
}

TEST(Svgd, RecoversGaussianMoments) {
  const Eigen::Vector2d mu(1.0, -1.0);
  Eigen::Matrix2d cov;
  cov << 1.0, 0.5, 0.5, 2.0;
  const auto target = gaussian_target(mu, cov);
  InferenceConfig cfg;
  cfg.n_particles = 200;
  cfg.iterations = 2000;
  cfg.optimizer = {OptimizerKind::kSgd, 0.1};
  const auto res = run_svgd(target, square(-4.0, 4.0), cfg);
  const auto& p = res.particles.particles;
  const Eigen::Vector2d mean = p.colwise().mean().transpose();
  const Eigen::Matrix2d sc = sample_cov(p);
  EXPECT_LT(std::abs(mean[0] - mu[0]), 0.1 * std::sqrt(cov(0, 0)));
  EXPECT_LT(std::abs(mean[1] - mu[1]), 0.1 * std::sqrt(cov(1, 1)));
  EXPECT_LT((sc - cov).cwiseAbs().maxCoeff(), 0.15 * cov.cwiseAbs().maxCoeff());
  EXPECT_NEAR(sc(0, 0), cov(0, 0), 0.15 * cov(0, 0));
  EXPECT_NEAR(sc(1, 1), cov(1, 1), 0.15 * cov(1, 1));
}

TEST(Svgd, BimodalTargetOccupiesBothModes) {
  const FunctionTarget target(
      1, [](const Eigen::VectorXd& x) { return -std::pow(x[0] * x[0] - 1.0, 2) / 0.1; },
      [](const Eigen::VectorXd& x) -> Eigen::VectorXd {
        return Eigen::VectorXd::Constant(1, -4.0 * x[0] * (x[0] * x[0] - 1.0) / 0.1);
      });
  InferenceConfig cfg;
  cfg.n_particles = 50;
  cfg.iterations = 500;
  const auto res = run_svgd(target, square(-2.0, 2.0, 1), cfg);
  const auto& p = res.particles.particles;
  const double left = static_cast<double>((p.array() < 0.0).count()) / 50.0;
  EXPECT_GE(left, 0.2);
  EXPECT_GE(1.0 - left, 0.2);
}

TEST(Svgd, SeededRunsAreIdenticalAndOffsetInvariant) {
  Eigen::Matrix2d cov;
  cov << 1.0, 0.0, 0.0, 1.0;
  const auto target = gaussian_target({0.0, 0.0}, cov);
  const FunctionTarget shifted(
      2, [&](const Eigen::VectorXd& x) { return target.log_density(x.transpose())[0] + 5.0; },
      [](const Eigen::VectorXd& x) -> Eigen::VectorXd { return -x; });
  InferenceConfig cfg;
  cfg.n_particles = 16;
  cfg.iterations = 50;
  const auto a = run_svgd(target, square(-2, 2), cfg);
  const auto b = run_svgd(target, square(-2, 2), cfg);
  const auto c = run_svgd(shifted, square(-2, 2), cfg);
  EXPECT_EQ(a.particles.particles, b.particles.particles);
  EXPECT_EQ(a.particles.particles, c.particles.particles);
}

TEST(Mcmh, ZeroProposalScaleNeverMoves) {
  Eigen::Matrix2d cov = Eigen::Matrix2d::Identity();
  const auto target = gaussian_target({0.0, 0.0}, cov);
  InferenceConfig cfg;
  cfg.n_particles = 4;
  cfg.iterations = 100;
  cfg.mcmh_proposal_scale = 0.0;
  const auto res = run_mcmh(target, square(-1, 1), cfg);
  const auto init = uniform_particles(square(-1, 1), 4, cfg.seed).particles;
  EXPECT_EQ(res.final_states, init);
  EXPECT_EQ(res.samples.rows(), 400);
  for (Eigen::Index i = 0; i < res.samples.rows(); ++i) {
    EXPECT_EQ(res.samples.row(i), init.row(i % 4));
  }
}

TEST(Mcmh, EqualDensityProposalsAlwaysAccepted) {
  const FunctionTarget flat(2, [](const Eigen::VectorXd&) { return -1.0; });
  InferenceConfig cfg;
  cfg.n_particles = 8;
  cfg.iterations = 200;
  cfg.mcmh_proposal_scale = 0.3;
  EXPECT_EQ(run_mcmh(flat, square(-1, 1), cfg).acceptance_rate, 1.0);
}

TEST(Mcmh, GaussianCovariance) {
  Eigen::Matrix2d cov;
  cov << 1.0, 0.6, 0.6, 1.5;
  const auto target = gaussian_target({0.5, 0.0}, cov);
  InferenceConfig cfg;
  cfg.n_particles = 10;
  cfg.iterations = 10000;
  cfg.burn_in = 500;
  cfg.mcmh_proposal_scale = 1.2;
  const auto res = run_mcmh(target, square(-2, 2), cfg);
  const Eigen::Matrix2d sc = sample_cov(res.samples);
  EXPECT_LT((sc - cov).cwiseAbs().maxCoeff(), 0.2 * cov.cwiseAbs().maxCoeff());
  EXPECT_NEAR(sc(0, 0), cov(0, 0), 0.2 * cov(0, 0));
  EXPECT_NEAR(sc(1, 1), cov(1, 1), 0.2 * cov(1, 1));
  EXPECT_GT(res.acceptance_rate, 0.2);
  EXPECT_LT(res.acceptance_rate, 0.8);
}

TEST(Sgld, StationaryVariance) {
  const double var = 0.5;
  const FunctionTarget target(
      1, [=](const Eigen::VectorXd& x) { return -0.5 * x[0] * x[0] / var; },
      [=](const Eigen::VectorXd& x) -> Eigen::VectorXd { return -x / var; });
  InferenceConfig cfg;
  cfg.n_particles = 50;
  cfg.iterations = 4000;
  cfg.burn_in = 500;
  cfg.step_size = 0.01;
  const auto res = run_sgld(target, square(-1, 1, 1), {}, cfg);
  const double m = res.samples.mean();
  const double v = (res.samples.array() - m).square().sum() / (res.samples.rows() - 1);
  EXPECT_NEAR(v, var, 0.2 * var);
  EXPECT_NEAR(m, 0.0, 0.1);
}

TEST(Sgld, StepNormScalesWithSqrtEpsilon) {
  const FunctionTarget flat(2, [](const Eigen::VectorXd&) { return 0.0; },
                            [](const Eigen::VectorXd&) -> Eigen::VectorXd {
                              return Eigen::VectorXd::Zero(2);
                            });
  InferenceConfig cfg;
  cfg.n_particles = 500;
  cfg.iterations = 1;
  const auto init = uniform_particles(square(-1, 1), 500, cfg.seed).particles;
  auto mean_step = [&](double eps) {
    cfg.step_size = eps;
    const auto res = run_sgld(flat, square(-1, 1), {}, cfg);
    return (res.final_states - init).rowwise().norm().mean();
  };
  const double small = mean_step(1e-6), large = mean_step(4e-6);
  EXPECT_NEAR(large / small, 2.0, 1e-6);
  EXPECT_LT(small, 2e-3);
}

TEST(Sgld, ClampsDivergentChains) {
  const FunctionTarget steep(1, [](const Eigen::VectorXd& x) { return 1e6 * x[0]; },
                             [](const Eigen::VectorXd&) -> Eigen::VectorXd {
                               return Eigen::VectorXd::Constant(1, 1e6);
                             });
  InferenceConfig cfg;
  cfg.n_particles = 4;
  cfg.iterations = 3;
  cfg.step_size = 1e-3;
  const ClampRegion clamp{square(-1, 1, 1), 0.1};
  const auto res = run_sgld(steep, square(-1, 1, 1), clamp, cfg);
  EXPECT_EQ(res.clamped, 12u);
  EXPECT_LE(res.final_states.maxCoeff(), 1.0);
}

TEST(Sghmc, NoiselessFrictionlessConservesHamiltonian) {
  const auto target = gaussian_target({0.0, 0.0}, Eigen::Matrix2d::Identity());
  InferenceConfig cfg;
  cfg.step_size = 0.1;
  cfg.sghmc_friction = 0.0;
  cfg.sghmc_noise = false;
  std::mt19937_64 rng(1);
  SghmcState s;
  s.theta = Eigen::MatrixXd{{1.0, -0.5}};
  s.momentum = Eigen::MatrixXd{{0.3, 0.8}};
  s.grad = target.evaluate(s.theta).gradient;
  const double h0 = hamiltonian(target, s.theta.row(0).transpose(), s.momentum.row(0).transpose());
  for (int i = 0; i < 100; ++i) {
    sghmc_step(target, s, cfg, rng);
    const double h =
        hamiltonian(target, s.theta.row(0).transpose(), s.momentum.row(0).transpose());
    EXPECT_NEAR(h, h0, 0.01 * h0);
  }
}

TEST(Sghmc, SamplesGaussianWithFriction) {
  const auto target = gaussian_target({0.0, 0.0}, Eigen::Matrix2d::Identity());
  InferenceConfig cfg;
  cfg.n_particles = 20;
  cfg.iterations = 3000;
  cfg.burn_in = 300;
  cfg.step_size = 0.05;
  cfg.sghmc_friction = 1.0;
  const auto res = run_sghmc(target, square(-1, 1), {}, cfg);
  const Eigen::Matrix2d sc = sample_cov(res.samples);
  EXPECT_NEAR(sc(0, 0), 1.0, 0.2);
  EXPECT_NEAR(sc(1, 1), 1.0, 0.2);
  EXPECT_NEAR(sc(0, 1), 0.0, 0.15);
}
