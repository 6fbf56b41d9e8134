// Acceptance run: one PASS/FAIL line per criterion, measured values alongside.
#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "branchinfer/config.hpp"
#include "branchinfer/dynamics.hpp"
#include "branchinfer/evaluation.hpp"
#include "branchinfer/experiments.hpp"
#include "branchinfer/geometry.hpp"
#include "branchinfer/inference/fd_gradient.hpp"
#include "branchinfer/inference/kernel.hpp"
#include "branchinfer/inference/optimizer.hpp"
#include "branchinfer/inference/posterior.hpp"
#include "branchinfer/inference/svgd.hpp"
#include "branchinfer/priors.hpp"
#include "branchinfer/trajectory_io.hpp"

namespace fs = std::filesystem;
namespace bi = branchinfer;
namespace ex = branchinfer::experiments;

namespace {

fs::path g_out = BI_ACCEPT_OUT;
int g_failures = 0;

std::string fmt(double v, int precision = 4) {
  std::ostringstream ss;
  ss.precision(precision);
  ss << v;
  return ss.str();
}

void verdict(const std::string& id, bool pass, const std::string& detail) {
  std::cout << "criterion " << id << ": " << (pass ? "PASS" : "FAIL") << "  " << detail
            << std::endl;
  if (!pass) ++g_failures;
}

bi::ExperimentConfig load(const std::string& name) {
  return bi::load_config(fs::path(BI_CONFIG_DIR) / name);
}

fs::path fresh(const std::string& name) {
  const fs::path p = g_out / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------- 1

void criterion_1() {
  auto cfg = load("single_branch.cfg");
  cfg.inference.n_particles = 64;
  cfg.inference.iterations = 300;
  const auto t0 = std::chrono::steady_clock::now();
  const auto rep = ex::run_sim2sim(cfg, {"nnsvgd"}, fresh("c1"));
  const double elapsed = seconds_since(t0);
  const auto& r = rep.at("nnsvgd");
  const bool pass = r.ok && r.rmse_rel < 0.05 && elapsed < 120.0;
  verdict("1", pass,
          "test RMSE " + fmt(100 * r.rmse_rel) + "% of peak " + fmt(rep.peak_deflection) +
              " m (< 5%), runtime " + fmt(elapsed, 3) + " s (< 120 s, n=64, 300 iterations)" +
              (r.ok ? "" : " error: " + r.error));
}

// ------------------------------------------------------------ 2 and 4

void criteria_2_and_4() {
  const auto cfg = load("two_branch.cfg");
  const auto rep = ex::run_sim2sim(cfg, cfg.algorithms, fresh("c2_c4"));

  const auto& nn = rep.at("nnsvgd");
  verdict("2", nn.ok && nn.rmse_rel < 0.10 && nn.max_violation <= 0.05,
          "R=2 NNSVGD test RMSE " + fmt(100 * nn.rmse_rel) + "% of peak (< 10%), worst " +
              "constraint violation " + fmt(100 * nn.max_violation) + "% of particles (<= 5%)");

  const auto& mcmh = rep.at("mcmh");
  std::string detail = "R=2 test RMSE/peak:";
  bool pass = mcmh.ok;
  for (const auto& row : rep.rows) {
    detail += " " + row.algorithm + "=" + (row.ok ? fmt(100 * row.rmse_rel) + "%" : "failed");
  }
  for (const char* alg : {"sgld", "sghmc", "svgd", "nnsvgd"}) {
    const auto& r = rep.at(alg);
    const bool ok = r.ok && mcmh.ok && r.test_rmse <= 1.1 * mcmh.test_rmse;
    if (!ok) detail += "; " + std::string(alg) + " > 1.1 x mcmh";
    pass = pass && ok;
  }
  const auto& svgd = rep.at("svgd");
  const bool nn_vs_svgd = nn.ok && svgd.ok && nn.test_rmse <= 1.1 * svgd.test_rmse;
  if (!nn_vs_svgd) detail += "; nnsvgd > 1.1 x svgd";
  verdict("4", pass && nn_vs_svgd, detail);
}

// ---------------------------------------------------------------- 3

void criterion_3() {
  auto cfg = load("single_branch.cfg");
  cfg.noise_sigma = 0.05;
  const fs::path root = fresh("c3");
  double inside = 0.0, width = 0.0;
  int ok = 0;
  std::string per_seed;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    cfg.seed = seed;
    cfg.inference.seed = seed;
    const auto rep = ex::run_sim2sim(cfg, {"nnsvgd"}, root / ("seed_" + std::to_string(seed)));
    const auto& r = rep.at("nnsvgd");
    if (!r.ok) continue;
    ++ok;
    inside += 1.0 - r.pct_outside;
    width += r.mean_width;
    per_seed += " " + fmt(1.0 - r.pct_outside, 3);
  }
  inside = ok ? inside / ok : 0.0;
  width = ok ? width / ok : 0.0;
  verdict("3", ok == 10 && inside >= 0.90,
          "sigma=0.05, 10 seeds: mean fraction inside 95% band " + fmt(inside) +
              " (>= 0.90), mean width " + fmt(width) + " m; per seed:" + per_seed);
}

// ---------------------------------------------------------------- 5

void criterion_5() {
  auto cfg = load("single_branch.cfg");
  cfg.noise_sigmas = {0.0, 0.05, 0.1, 0.2};
  cfg.sweep_algorithms = {"nnsvgd"};
  const auto rows = ex::run_noise_sweep(cfg, fresh("c5"));
  bool pass = rows.size() == 4;
  std::string detail = "sigma:width/rmse";
  double best = INFINITY;
  for (const auto& r : rows) best = std::min(best, r.summary.test_rmse);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& s = rows[k].summary;
    pass = pass && s.ok;
    detail += " " + fmt(rows[k].value) + ":" + fmt(s.mean_width) + "/" + fmt(100 * s.rmse_rel) + "%";
    if (k > 0 && s.mean_width < 0.9 * rows[k - 1].summary.mean_width) {
      pass = false;
      detail += "(width drop)";
    }
  }
  const bool zero_best = !rows.empty() && rows[0].summary.test_rmse <= best;
  if (!zero_best) detail += "; sigma=0 not the minimal RMSE";
  verdict("5", pass && zero_best, detail);
}

// ---------------------------------------------------------------- 6

void criterion_6() {
  auto cfg = load("single_branch.cfg");
  cfg.train_fraction = 0.5;
  cfg.grasp_test_fractions = {0.25, 0.75, 1.0};
  cfg.sweep_algorithms = {"nnsvgd"};
  const auto rows = ex::run_grasp_sweep(cfg, fresh("c6"));
  bool pass = rows.size() == 3;
  std::string detail = "train 0.5L; test fraction:pct_outside";
  for (const auto& r : rows) {
    pass = pass && r.summary.ok && r.summary.pct_outside <= 0.25;
    detail += " " + fmt(r.value) + ":" + fmt(r.summary.pct_outside, 3);
  }
  verdict("6", pass, detail + " (each <= 0.25)");
}

// ---------------------------------------------------------------- 7

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

// Worst relative FD error over dimensions of f at x.
double fd_check(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                const Eigen::VectorXd& analytic, double h = 1e-6) {
  double worst = 0.0;
  for (Eigen::Index d = 0; d < x.size(); ++d) {
    Eigen::VectorXd p = x, m = x;
    p[d] += h;
    m[d] -= h;
    worst = std::max(worst, rel_err(analytic[d], (f(p) - f(m)) / (2 * h)));
  }
  return worst;
}

void criterion_7a() {
  std::mt19937_64 rng(71);
  std::uniform_real_distribution<double> u(0.5, 3.5);

  bi::priors::SmoothBox box;
  box.lower = Eigen::VectorXd::Constant(4, 1.0);
  box.upper = Eigen::VectorXd::Constant(4, 3.0);
  box.sigma = 0.05;
  double box_err = 0.0;
  for (int t = 0; t < 100; ++t) {
    Eigen::VectorXd x(4);
    for (auto& v : x) v = u(rng);
    const auto r = bi::priors::smooth_box_log_prior(x, box);
    box_err = std::max(box_err, fd_check([&](const Eigen::VectorXd& p) {
                         return bi::priors::smooth_box_log_prior(p, box).value;
                       }, x, r.gradient, 1e-7));
  }

  const auto pair_box = box.slice(0, 2);
  const auto& net = ex::prior_net_for(pair_box, bi::PriorSettings{}).net;
  double net_err = 0.0;
  for (int t = 0; t < 100; ++t) {
    const Eigen::VectorXd x{{u(rng), u(rng)}};
    Eigen::VectorXd g;
    net.predict(x, g);
    net_err = std::max(net_err, fd_check([&](const Eigen::VectorXd& p) { return net.predict(p); },
                                         x, g));
  }

  std::normal_distribution<double> normal(0.0, 1.0);
  double kernel_err = 0.0;
  for (int t = 0; t < 100; ++t) {
    Eigen::MatrixXd p(5, 3);
    for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = normal(rng);
    const auto k = bi::inference::rbf_kernel(p);
    const Eigen::VectorXd target = p.row(1).transpose();
    const Eigen::VectorXd x = p.row(0).transpose();
    auto f = [&](const Eigen::VectorXd& a) {
      return std::exp(-(a - target).squaredNorm() / (2 * k.bandwidth_sq));
    };
    kernel_err = std::max(kernel_err, fd_check(f, x, k.grad_first(p, 0, 1)));
  }
  const double worst = std::max({box_err, net_err, kernel_err});
  verdict("7a", worst < 1e-5,
          "max relative FD error: box " + fmt(box_err, 3) + ", prior net " + fmt(net_err, 3) +
              ", kernel " + fmt(kernel_err, 3) + " (< 1e-5, 100 points each)");
}

void criterion_7b() {
  bi::dynamics::SimOptions opts;
  opts.gravity = 0.0;
  const auto model =
      bi::geometry::make_chain({bi::geometry::BranchLink{1.0, 0.02, 900.0, 0.0, std::nullopt}});
  const bi::dynamics::BranchChain chain(model, 1.0, opts);
  const double kp = 120.0, kd = 0.4, dt = 1e-3;
  const double j = bi::geometry::joint_inertia(model.links[0]);
  const double decay = kd / (2 * j);
  const double omega = std::sqrt(kp / j - decay * decay);

  bi::dynamics::JointState s{{0.1}, {0.0}};
  std::vector<double> crossings, peaks, peak_t;
  double prev = s.psi[0], prev2 = prev;
  for (int i = 1; i <= 4000; ++i) {
    s = *chain.step({{kp}, {kd}}, s, 0.0, dt);
    const double cur = s.psi[0];
    if ((prev < 0.0) != (cur < 0.0)) crossings.push_back(dt * (i - 1 + prev / (prev - cur)));
    if (i >= 2 && prev > prev2 && prev >= cur && prev > 0.0) {
      const double off = 0.5 * (prev2 - cur) / (prev2 - 2 * prev + cur);
      peaks.push_back(prev - 0.25 * (prev2 - cur) * off);
      peak_t.push_back(dt * (i - 1 + off));
    }
    prev2 = prev;
    prev = cur;
  }
  const double period =
      2.0 * (crossings.back() - crossings.front()) / static_cast<double>(crossings.size() - 1);
  const double w = 2 * M_PI / period;
  const double d = std::log(peaks.front() / peaks.back()) / (peak_t.back() - peak_t.front());
  const double ew = std::abs(w - omega) / omega, ed = std::abs(d - decay) / decay;
  verdict("7b", ew < 0.01 && ed < 0.01,
          "frequency error " + fmt(100 * ew, 3) + "%, decay error " + fmt(100 * ed, 3) +
              "% (< 1%, dt = 1e-3)");
}

void criterion_7c() {
  const auto model =
      bi::geometry::make_chain({bi::geometry::BranchLink{1.0, 0.02, 900.0, 0.2, std::nullopt}});
  const bi::dynamics::BranchChain chain(model, 1.0);
  const bi::dynamics::SimParams p{{150.0}, {4.0}};
  auto s = bi::dynamics::JointState::zeros(1);
  for (int i = 0; i < 20000; ++i) s = *chain.step(p, s, 9.0, 1e-3);
  const double residual = std::abs(chain.joint_torques(s.psi, 9.0)[0] - p.kp[0] * s.psi[0]);
  verdict("7c", residual < 1e-3,
          "|T_ext - Kp psi_ss| = " + fmt(residual, 3) + " N m (< 1e-3), psi_ss " +
              fmt(s.psi[0]) + " rad");
}

void criterion_7d() {
  std::mt19937_64 rng(74);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> s(10000);
  for (auto& v : s) v = normal(rng);
  const bi::evaluation::Kde kde(s);
  double integral = 0.0;
  const double dx = 1e-3;
  for (double x = -8.0; x <= 8.0; x += dx) integral += kde.density(x) * dx;
  const double target = 1.0 / std::sqrt(2 * M_PI);
  const double err = std::abs(kde.density(0.0) - target) / target;
  verdict("7d", std::abs(integral - 1.0) < 1e-3 && err < 0.05,
          "integral " + fmt(integral, 8) + " (1 +/- 1e-3), density at 0 off by " +
              fmt(100 * err, 3) + "% (< 5%, n = 1e4)");
}

void criterion_7e() {
  const Eigen::Vector2d mu(1.0, -1.0);
  Eigen::Matrix2d cov;
  cov << 1.0, 0.5, 0.5, 2.0;
  const Eigen::Matrix2d prec = cov.inverse();
  const bi::inference::FunctionTarget target(
      2, [&](const Eigen::VectorXd& x) { return -0.5 * (x - mu).dot(prec * (x - mu)); },
      [&](const Eigen::VectorXd& x) -> Eigen::VectorXd { return -prec * (x - mu); });
  bi::inference::InferenceConfig cfg;
  cfg.n_particles = 200;
  cfg.iterations = 2000;
  cfg.optimizer = {bi::inference::OptimizerKind::kSgd, 0.1};
  const auto res = bi::inference::run_svgd(
      target, {Eigen::VectorXd::Constant(2, -4.0), Eigen::VectorXd::Constant(2, 4.0)}, cfg);
  const Eigen::MatrixXd& p = res.particles.particles;
  const Eigen::Vector2d mean = p.colwise().mean().transpose();
  const Eigen::MatrixXd c = p.rowwise() - p.colwise().mean();
  const Eigen::Matrix2d sc = c.transpose() * c / static_cast<double>(p.rows() - 1);
  double mean_err = 0.0, cov_err = 0.0;
  for (int d = 0; d < 2; ++d) {
    mean_err = std::max(mean_err, std::abs(mean[d] - mu[d]) / std::sqrt(cov(d, d)));
  }
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      cov_err = std::max(cov_err, std::abs(sc(a, b) - cov(a, b)) /
                                      std::sqrt(cov(a, a) * cov(b, b)));
    }
  }
  verdict("7e", mean_err < 0.1 && cov_err < 0.15,
          "mean error " + fmt(mean_err, 3) + " sigma (< 0.1), covariance error " +
              fmt(100 * cov_err, 3) + "% (< 15%, relative to sqrt(S_aa S_bb))");
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = bi::io::read_text(e.path());
  }
  return files;
}

void criterion_7f() {
  const fs::path root = fresh("c7f");
  const fs::path cfg = fs::path(BI_CONFIG_DIR) / "smoke.cfg";
  bool pass = true;
  std::string detail;
  for (const char* cmd : {"gen-tree", "sim2sim", "noise-sweep", "grasp-sweep", "train-prior"}) {
    const fs::path out = root / cmd;
    const std::string line = std::string(BI_CLI_PATH) + " -q " + cmd + " --config " +
                             cfg.string() + " --seed 5 --out " + out.string() + " > /dev/null 2>&1";
    const int first = std::system(line.c_str());
    const auto a = fs::exists(out) ? snapshot(out) : std::map<std::string, std::string>{};
    fs::remove_all(out);
    const int second = std::system(line.c_str());
    const auto b = fs::exists(out) ? snapshot(out) : std::map<std::string, std::string>{};
    const bool same = first == 0 && second == 0 && !a.empty() && a == b;
    detail += std::string(" ") + cmd + ":" + (same ? "identical" : "DIFFERENT") + "(" +
              std::to_string(a.size()) + " files)";
    pass = pass && same;
  }
  verdict("7f", pass, "two runs per command, seed 5:" + detail);
}

void criterion_7g() {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> levels(1, 6), kids(1, 4);
  std::uniform_real_distribution<double> radius(0.01, 0.3), angle(-1.3, 1.3), decay(0.3, 1.0);
  double worst = 0.0;
  int trees = 0;
  for (int t = 0; t < 500; ++t) {
    bi::geometry::TreeSpec s;
    s.trunk_radius = radius(rng);
    s.levels = static_cast<std::size_t>(levels(rng));
    s.children_per_level = static_cast<std::size_t>(kids(rng));
    s.fork_angles = {angle(rng), angle(rng)};
    s.length_decay = decay(rng);
    bi::geometry::TreeModel m;
    try {
      m = bi::geometry::generate_tree(s);
    } catch (const bi::geometry::GeometryError&) {
      continue;
    }
    ++trees;
    for (std::size_t i = 0; i < m.links.size(); ++i) {
      const auto kids_i = m.children_of(i);
      if (kids_i.empty()) continue;
      double area = 0.0;
      for (auto c : kids_i) area += m.links[c].radius * m.links[c].radius;
      worst = std::max(worst, std::abs(area - m.links[i].radius * m.links[i].radius));
    }
  }
  verdict("7g", worst < 1e-12 && trees > 100,
          "max |sum r_child^2 - r_parent^2| = " + fmt(worst, 3) + " m^2 over " +
              std::to_string(trees) + " random trees (< 1e-12)");
}

// ---------------------------------------------------------------- 8

void criterion_8() {
  auto cfg = load("single_branch.cfg");
  cfg.noise_sigma = 0.0;
  const auto train = ex::generate_ground_truth(cfg, 8).train.episodes;
  bi::inference::InferenceConfig icfg = cfg.inference;
  icfg.svgd_repulsion = false;
  icfg.optimizer = {bi::inference::OptimizerKind::kSgd, 1e-3};
  icfg.optimizer.momentum = 0.0;
  const auto model = bi::geometry::generate_tree(cfg.tree);
  const bi::inference::SimulationPosterior target(model, train, std::nullopt, icfg, cfg.sim);

  bi::inference::ParticleSet set;
  set.particles = Eigen::MatrixXd{{2.3, 0.7}};
  const Eigen::VectorXd u = set.particles.row(0).transpose();
  bi::inference::Optimizer opt(icfg.optimizer);
  bi::inference::svgd_step(set, target, opt, icfg);

  const double norm = bi::inference::loss_normalizer(train, icfg);
  auto objective = [&](const Eigen::VectorXd& x) {
    const Eigen::VectorXd raw = bi::inference::to_raw_space(x);
    const auto params = bi::dynamics::SimParams::from_theta(std::span(raw.data(), raw.size()));
    return -bi::inference::loss(params, model, train, cfg.sim) / (norm * icfg.kT);
  };
  const Eigen::VectorXd expect =
      u + 1e-3 * bi::inference::fd_gradient(objective, u, icfg.fd_epsilon).gradient;
  const double diff = (set.particles.row(0).transpose() - expect).cwiseAbs().maxCoeff();
  verdict("8", diff == 0.0,
          "n=1, no repulsion, no prior, SGD without momentum: max |svgd_step - FD ascent step| = " +
              fmt(diff, 3));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::vector<std::string> only;
  std::string out = g_out.string();
  bool verbose = false;
  app.add_option("--only", only, "run only these criteria (1..8, 7a..7g)");
  app.add_option("--out", out, "scratch directory for run bundles");
  app.add_flag("-v,--verbose", verbose, "show experiment progress");
  CLI11_PARSE(app, argc, argv);
  g_out = out;
  ex::set_verbose(verbose);

  const std::vector<std::pair<std::string, std::function<void()>>> all{
      {"1", criterion_1},   {"2", criteria_2_and_4}, {"3", criterion_3},   {"5", criterion_5},
      {"6", criterion_6},   {"7a", criterion_7a},    {"7b", criterion_7b}, {"7c", criterion_7c},
      {"7d", criterion_7d}, {"7e", criterion_7e},    {"7f", criterion_7f}, {"7g", criterion_7g},
      {"8", criterion_8}};
  const std::set<std::string> wanted(only.begin(), only.end());
  for (const auto& [id, fn] : all) {
    const bool selected = wanted.empty() || wanted.count(id) ||
                          (id == "2" && wanted.count("4")) ||
                          (id.size() == 2 && wanted.count("7"));
    if (!selected) continue;
    try {
      fn();
    } catch (const std::exception& e) {
      verdict(id == "2" ? "2/4" : id, false, std::string("exception: ") + e.what());
    }
  }
  std::cout << (g_failures == 0 ? "all criteria passed" : std::to_string(g_failures) + " failed")
            << std::endl;
  return g_failures == 0 ? 0 : 1;
}
