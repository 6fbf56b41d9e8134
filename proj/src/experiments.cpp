#include "branchinfer/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iostream>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <random>
#include <sstream>

#include "branchinfer/inference/samplers.hpp"
#include "branchinfer/svg_plot.hpp"

namespace branchinfer::experiments {

namespace fs = std::filesystem;
using inference::IterationDiagnostics;

namespace {

std::atomic<bool> g_verbose{true};

std::string pad3(std::size_t i) {
  std::string s = std::to_string(i);
  return std::string(s.size() < 3 ? 3 - s.size() : 0, '0') + s;
}

std::string label(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

std::vector<double> z_of(const dynamics::Trajectory& t) {
  std::vector<double> z;
  z.reserve(t.samples());
  for (const auto& p : t.pos) z.push_back(p.z);
  return z;
}

std::vector<double> times_of(const dynamics::Trajectory& t) {
  std::vector<double> out;
  for (std::size_t i = 0; i < t.samples(); ++i) out.push_back(static_cast<double>(i + 1) * t.dt_obs);
  return out;
}

Eigen::VectorXd log10_vec(const std::vector<double>& v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = std::log10(v[i]);
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> constraint_pairs(std::size_t joints) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t j = 1; j < joints; ++j) {
    pairs.emplace_back(2 * (j - 1), 2 * j);          // Kp parent, Kp child
    pairs.emplace_back(2 * (j - 1) + 1, 2 * j + 1);  // Kd parent, Kd child
  }
  return pairs;
}

void log_line(const std::string& s) {
  if (g_verbose) std::clog << s << '\n';
}

void write_particles(const fs::path& path, const Eigen::MatrixXd& particles) {
  std::vector<std::string> header;
  for (Eigen::Index j = 0; j < particles.cols() / 2; ++j) {
    header.push_back("kp_" + std::to_string(j + 1));
    header.push_back("kd_" + std::to_string(j + 1));
  }
  io::CsvWriter w(path, header);
  for (Eigen::Index i = 0; i < particles.rows(); ++i) {
    for (Eigen::Index d = 0; d < particles.cols(); ++d) w.cell(particles(i, d));
    w.end_row();
  }
  w.flush();
}

void write_diagnostics(const fs::path& path, const std::vector<IterationDiagnostics>& diags) {
  io::CsvWriter w(path, {"iter", "mean_loss", "min_loss", "bandwidth"});
  for (const auto& d : diags) {
    w.cell(d.iteration).cell(d.mean_loss).cell(d.min_loss).cell(d.bandwidth);
    w.end_row();
  }
  w.flush();
}

// 2D histogram of the first joint's (Kp, Kd) in log10 space over the box.
void write_hist2d(const fs::path& path, const Eigen::MatrixXd& particles,
                  const ExperimentConfig& config) {
  constexpr int bins = 20;
  const auto lo = config.box_lower(), hi = config.box_upper();
  const double a0 = std::log10(lo[0]), a1 = std::log10(hi[0]);
  const double b0 = std::log10(lo[1]), b1 = std::log10(hi[1]);
  std::vector<std::size_t> counts(bins * bins, 0);
  for (Eigen::Index i = 0; i < particles.rows(); ++i) {
    const double u = std::log10(particles(i, 0)), v = std::log10(particles(i, 1));
    const int x = std::clamp(static_cast<int>((u - a0) / (a1 - a0) * bins), 0, bins - 1);
    const int y = std::clamp(static_cast<int>((v - b0) / (b1 - b0) * bins), 0, bins - 1);
    ++counts[static_cast<std::size_t>(x * bins + y)];
  }
  io::CsvWriter w(path, {"log10_kp_lo", "log10_kp_hi", "log10_kd_lo", "log10_kd_hi", "count"});
  for (int x = 0; x < bins; ++x) {
    for (int y = 0; y < bins; ++y) {
      w.cell(a0 + (a1 - a0) * x / bins).cell(a0 + (a1 - a0) * (x + 1) / bins);
      w.cell(b0 + (b1 - b0) * y / bins).cell(b0 + (b1 - b0) * (y + 1) / bins);
      w.cell(counts[static_cast<std::size_t>(x * bins + y)]);
      w.end_row();
    }
  }
  w.flush();
}

void write_band(const fs::path& csv, const fs::path& svg, const evaluation::TrajectoryBand& band,
                const std::vector<double>& gt, const std::string& title) {
  io::CsvWriter w(csv, {"t", "lower", "median", "upper", "gt"});
  for (std::size_t i = 0; i < band.size(); ++i) {
    w.cell(band.times[i]).cell(band.lower[i]).cell(band.median[i]).cell(band.upper[i]).cell(gt[i]);
    w.end_row();
  }
  w.flush();
  io::write_text(svg, plot::band_svg(band, gt, title));
}

void write_manifest(const fs::path& path, const std::vector<std::string>& read,
                    const std::vector<std::string>& wrote) {
  std::string text;
  for (const auto& r : read) text += "read " + r + "\n";
  for (const auto& w : wrote) text += "wrote " + w + "\n";
  io::write_text(path, text);
}

double max_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end());
}

// Inference and evaluation for one algorithm; writes <out>/<algorithm>/.
AlgorithmSummary infer_and_score(const std::string& algorithm, const ExperimentConfig& config,
                                 const fs::path& gt_dir,
                                 const std::vector<std::string>& test_splits,
                                 const fs::path& out,
                                 std::vector<PredictionReport>* reports = nullptr) {
  AlgorithmSummary row;
  row.algorithm = algorithm;
  const fs::path dir = out / algorithm;
  fs::create_directories(dir);

  // Inference stage: train episode CSVs and the stripped config only.
  std::vector<std::string> read;
  const auto train = read_episodes(gt_dir, "train", &read);
  const ExperimentConfig stripped = strip_ground_truth(config);
  const InferenceOutcome outcome = run_inference(algorithm, stripped, train);
  std::vector<std::string> wrote;
  if (!outcome.ok) {
    row.error = outcome.error;
    io::write_text(dir / "error.txt", outcome.error + "\n");
    wrote.push_back("error.txt");
    write_manifest(dir / "manifest.txt", read, wrote);
    return row;
  }
  write_particles(dir / "particles.csv", outcome.particles);
  write_diagnostics(dir / "diagnostics.csv", outcome.diagnostics);
  write_hist2d(dir / "hist2d.csv", outcome.particles, config);
  wrote.insert(wrote.end(), {"particles.csv", "diagnostics.csv", "hist2d.csv"});
  write_manifest(dir / "manifest.txt", read, wrote);

  // Evaluation stage: particles plus the held-out episodes.
  std::vector<PredictionReport> local;
  try {
    for (std::size_t s = 0; s < test_splits.size(); ++s) {
      const auto test = read_episodes(gt_dir, test_splits[s]);
      PredictionReport rep = evaluate_predictions(config, outcome.particles, test);
      io::CsvWriter cov(dir / (test_splits[s] + "_coverage.csv"),
                        {"episode", "pct_outside", "mean_width"});
      for (std::size_t e = 0; e < rep.bands.size(); ++e) {
        const std::string stem = test_splits[s] + "_" + pad3(e);
        write_band(dir / ("band_" + stem + ".csv"), dir / ("band_" + stem + ".svg"), rep.bands[e],
                   rep.gt_z[e], algorithm + " " + stem);
        cov.cell(e).cell(rep.coverage.per_episode_outside[e]);
        cov.cell(rep.coverage.per_episode_width[e]).end_row();
      }
      cov.flush();
      local.push_back(std::move(rep));
    }
  } catch (const std::exception& e) {
    row.error = std::string("evaluation failed: ") + e.what();
    return row;
  }

  row.ok = true;
  row.test_rmse = local.front().test_rmse;
  row.rmse_rel = local.front().rmse_rel;
  row.pct_outside = local.front().coverage.pct_outside;
  row.mean_width = local.front().coverage.mean_width;
  row.max_violation = max_of(outcome.violations);
  row.clamped = outcome.clamped;
  row.particles = outcome.particles;
  if (reports) *reports = std::move(local);
  return row;
}

void write_summary_row(io::CsvWriter& w, const AlgorithmSummary& r) {
  w.cell(r.algorithm).cell(std::string(r.ok ? "ok" : "failed"));
  w.cell(r.test_rmse).cell(r.rmse_rel).cell(r.pct_outside).cell(r.mean_width);
  w.cell(r.max_violation).cell(r.clamped);
  w.cell(r.error.empty() ? std::string("") : "\"" + r.error + "\"");
  w.end_row();
}

const std::vector<std::string> kSummaryHeader{"algorithm", "status",        "test_rmse",
                                              "rmse_rel_peak", "pct_outside", "mean_width",
                                              "max_violation", "clamped",     "error"};

void require_ground_truth(const ExperimentConfig& config) {
  if (config.theta_gt.empty()) throw ConfigError("theta_gt is required for sim-to-sim runs");
  if (config.theta_gt.size() != 2 * config.joints()) throw ConfigError("theta_gt needs 2R entries");
}

}  // namespace

void set_verbose(bool verbose) { g_verbose = verbose; }

dynamics::ForceProfile scheduled_profile(const ForceSchedule& schedule, double amplitude,
                                         double grasp_fraction) {
  dynamics::ForceProfile p;
  p.dt_obs = schedule.dt_obs;
  p.grasp_fraction = grasp_fraction;
  const std::size_t g = schedule.samples();
  p.forces.reserve(g);
  const auto n_ramp = static_cast<std::size_t>(std::llround(schedule.ramp / schedule.dt_obs));
  const auto n_hold = static_cast<std::size_t>(std::llround(schedule.hold / schedule.dt_obs));
  for (std::size_t i = 0; i < g; ++i) {
    // Force i is held over the interval ending at t = (i + 1) dt_obs.
    double f = 0.0;
    if (i < n_ramp) {
      f = amplitude * static_cast<double>(i + 1) / static_cast<double>(n_ramp);
    } else if (i < n_ramp + n_hold) {
      f = amplitude;
    }
    p.forces.push_back(f);
  }
  return p;
}

GroundTruthSet generate_ground_truth(const ExperimentConfig& config, std::uint64_t seed,
                                     const std::vector<double>& test_fractions) {
  config.validate();
  require_ground_truth(config);
  const auto model = geometry::generate_tree(config.tree);
  const auto params = dynamics::SimParams::from_theta(config.theta_gt);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::size_t episode_index = 0;

  auto make_group = [&](const std::string& split, double fraction, std::size_t count) {
    EpisodeGroup group;
    group.split = split;
    group.grasp_fraction = fraction;
    const dynamics::BranchChain chain(model, fraction, config.sim);
    for (std::size_t e = 0; e < count; ++e, ++episode_index) {
      const double amp = config.force.amplitudes[episode_index % config.force.amplitudes.size()];
      const auto clean = scheduled_profile(config.force, amp, fraction);
      auto traj = chain.rollout(params, clean);
      if (traj.diverged) {
        throw GroundTruthError("ground-truth rollout diverged (theta_gt unstable) for " + split +
                               " episode " + std::to_string(e));
      }
      double peak_force = 0.0;
      for (double f : clean.forces) peak_force = std::max(peak_force, std::abs(f));
      double peak_pos = 0.0;
      for (const auto& p : traj.pos) peak_pos = std::max(peak_pos, std::hypot(p.x, p.z));
      io::Episode ep{clean, traj};
      for (auto& f : ep.profile.forces) f += config.noise_sigma * peak_force * normal(rng);
      if (config.position_noise) {
        for (auto& p : ep.trajectory.pos) {
          p.x += config.noise_sigma * peak_pos * normal(rng);
          p.z += config.noise_sigma * peak_pos * normal(rng);
        }
      }
      group.episodes.push_back(std::move(ep));
      group.clean_profiles.push_back(clean);
    }
    return group;
  };

  GroundTruthSet set;
  set.train = make_group("train", config.train_fraction, config.train_episodes);
  if (test_fractions.empty()) {
    set.test.push_back(make_group("test", config.test_fraction, config.test_episodes));
  } else {
    for (std::size_t k = 0; k < test_fractions.size(); ++k) {
      set.test.push_back(
          make_group("test_" + std::to_string(k), test_fractions[k], config.test_episodes));
    }
  }
  return set;
}

void write_ground_truth(const GroundTruthSet& set, const fs::path& dir) {
  fs::create_directories(dir / "episodes");
  std::vector<std::string> wrote;
  io::CsvWriter index(dir / "episodes" / "index.csv", {"episode", "split", "grasp_fraction", "file"});
  auto emit = [&](const EpisodeGroup& group) {
    for (std::size_t e = 0; e < group.episodes.size(); ++e) {
      const std::string file = "episodes/" + group.split + "_" + pad3(e) + ".csv";
      io::write_episode_csv(dir / file, group.episodes[e]);
      index.cell(e).cell(group.split).cell(group.grasp_fraction).cell(file);
      index.end_row();
      wrote.push_back(file);
    }
  };
  emit(set.train);
  for (const auto& g : set.test) emit(g);
  index.flush();
  wrote.push_back("episodes/index.csv");
  write_manifest(dir / "manifest.txt", {}, wrote);
}

std::vector<io::Episode> read_episodes(const fs::path& dir, const std::string& split,
                                       std::vector<std::string>* read) {
  const auto rows = io::read_csv(dir / "episodes" / "index.csv");
  if (rows.empty() || rows.front().size() != 4) throw io::IoError("malformed episode index");
  if (read) read->push_back((dir.filename() / "episodes" / "index.csv").generic_string());
  std::vector<io::Episode> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != 4) throw io::IoError("malformed episode index row");
    if (rows[r][1] != split) continue;
    const double fraction = std::stod(rows[r][2]);
    out.push_back(io::read_episode_csv(dir / rows[r][3], fraction));
    if (read) read->push_back((dir.filename() / rows[r][3]).generic_string());
  }
  if (out.empty()) throw io::IoError("no episodes for split '" + split + "'");
  return out;
}

ExperimentConfig strip_ground_truth(const ExperimentConfig& config) {
  ExperimentConfig out = config;
  out.theta_gt.clear();
  return out;
}

const priors::TrainedPriorNet& prior_net_for(const priors::SmoothBox& pair_box,
                                            const PriorSettings& settings) {
  static std::mutex mutex;
  static std::map<std::string, priors::TrainedPriorNet> cache;
  std::ostringstream key;
  key << io::format_double(pair_box.lower[0]) << ' ' << io::format_double(pair_box.lower[1])
      << ' ' << io::format_double(pair_box.upper[0]) << ' ' << io::format_double(pair_box.upper[1])
      << ' ' << io::format_double(settings.eta) << ' ' << priors::to_string(settings.mode) << ' '
      << settings.train.hidden_units << ' ' << settings.train.grid_points_per_dim << ' '
      << settings.train.random_points << ' ' << settings.train.epochs << ' '
      << io::format_double(settings.train.learning_rate) << ' ' << settings.train.seed << ' '
      << (settings.train.rmse_threshold ? io::format_double(*settings.train.rmse_threshold) : "auto");
  std::lock_guard lock(mutex);
  auto it = cache.find(key.str());
  if (it == cache.end()) {
    it = cache
             .emplace(key.str(),
                      priors::train_prior_net(pair_box, settings.eta, settings.mode, settings.train))
             .first;
  }
  return it->second;
}

priors::Prior build_prior(const ExperimentConfig& config, bool constraints) {
  priors::Prior prior;
  prior.box.lower = log10_vec(config.box_lower());
  prior.box.upper = log10_vec(config.box_upper());
  prior.box.sigma = config.prior.sigma;
  prior.box.validate();
  if (!constraints) return prior;
  for (const auto& [parent, child] : constraint_pairs(config.joints())) {
    const auto pair_box = prior.box.slice(parent, child);
    prior.constraints.push_back({prior_net_for(pair_box, config.prior).net, parent, child});
  }
  return prior;
}

InferenceOutcome run_inference(const std::string& algorithm, const ExperimentConfig& stripped,
                               const std::vector<io::Episode>& train) {
  if (!stripped.theta_gt.empty()) {
    throw std::logic_error("inference stage received ground-truth parameters");
  }
  InferenceOutcome out;
  out.algorithm = algorithm;
  try {
    const auto model = geometry::generate_tree(stripped.tree);
    const bool nn = algorithm == "nnsvgd" && stripped.prior.constraints;
    auto prior = build_prior(stripped, nn);
    inference::InferenceConfig icfg = stripped.inference;
    const inference::SimulationPosterior posterior(model, train, prior, icfg, stripped.sim);
    const auto bounds = inference::search_bounds(prior.box);
    const inference::ClampRegion clamp{bounds, 3.0 * prior.box.sigma};

    std::size_t every = std::max<std::size_t>(icfg.iterations / 5, 1);
    auto progress = [&](const IterationDiagnostics& d) {
      if ((d.iteration + 1) % every == 0) {
        std::ostringstream os;
        os << "[" << algorithm << "] iter " << d.iteration + 1 << "/" << icfg.iterations
           << " mean_loss " << d.mean_loss << " min_loss " << d.min_loss;
        log_line(os.str());
      }
    };

    Eigen::MatrixXd search;
    if (algorithm == "svgd" || algorithm == "nnsvgd") {
      auto result = inference::run_svgd(posterior, bounds, icfg, progress);
      search = result.particles.particles;
      out.diagnostics = std::move(result.diagnostics);
    } else if (algorithm == "mcmh") {
      auto result = inference::run_mcmh(posterior, bounds, icfg, progress);
      search = result.final_states;
      out.diagnostics = std::move(result.diagnostics);
      out.acceptance_rate = result.acceptance_rate;
    } else if (algorithm == "sgld") {
      icfg.step_size = stripped.sgld_step_size;
      auto result = inference::run_sgld(posterior, bounds, clamp, icfg, progress);
      search = result.final_states;
      out.diagnostics = std::move(result.diagnostics);
      out.clamped = result.clamped;
    } else if (algorithm == "sghmc") {
      icfg.step_size = stripped.sghmc_step_size;
      auto result = inference::run_sghmc(posterior, bounds, clamp, icfg, progress);
      search = result.final_states;
      out.diagnostics = std::move(result.diagnostics);
      out.clamped = result.clamped;
    } else {
      throw ConfigError("unknown algorithm '" + algorithm + "'");
    }
    if (!search.allFinite()) throw std::runtime_error("non-finite particles");
    out.particles = inference::to_raw_space(search);
    for (const auto& [parent, child] : constraint_pairs(stripped.joints())) {
      std::size_t bad = 0;
      for (Eigen::Index i = 0; i < search.rows(); ++i) {
        if (search(i, static_cast<Eigen::Index>(child)) >
            search(i, static_cast<Eigen::Index>(parent))) {
          ++bad;
        }
      }
      out.violations.push_back(static_cast<double>(bad) / static_cast<double>(search.rows()));
    }
    out.ok = true;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  return out;
}

PredictionReport evaluate_predictions(const ExperimentConfig& config,
                                      const Eigen::MatrixXd& particles,
                                      const std::vector<io::Episode>& test) {
  if (particles.rows() < 1) throw std::invalid_argument("no particles to evaluate");
  const auto model = geometry::generate_tree(config.tree);
  const Eigen::VectorXd mean = particles.colwise().mean().transpose();
  const auto mean_params =
      dynamics::SimParams::from_theta(std::vector<double>(mean.data(), mean.data() + mean.size()));
  std::vector<dynamics::SimParams> params;
  for (Eigen::Index i = 0; i < particles.rows(); ++i) {
    const Eigen::VectorXd row = particles.row(i).transpose();
    params.push_back(
        dynamics::SimParams::from_theta(std::vector<double>(row.data(), row.data() + row.size())));
  }

  PredictionReport rep;
  double sq = 0.0;
  std::size_t points = 0;
  std::vector<evaluation::CoverageReport> per_episode;
  for (const auto& ep : test) {
    const auto& gt = ep.trajectory;
    for (const auto& p : gt.pos) rep.peak_deflection = std::max(rep.peak_deflection, std::hypot(p.x, p.z));

    const auto pred = dynamics::rollout(model, mean_params, ep.profile, config.sim);
    if (pred.diverged) {
      sq = std::numeric_limits<double>::infinity();
    } else {
      for (std::size_t i = 0; i < gt.samples(); ++i) {
        const double dx = pred.pos[i].x - gt.pos[i].x, dz = pred.pos[i].z - gt.pos[i].z;
        sq += dx * dx + dz * dz;
      }
    }
    points += gt.samples();

    const auto trajs = dynamics::batch_rollout(model, params, ep.profile, config.sim);
    std::vector<const dynamics::Trajectory*> ok;
    for (const auto& t : trajs) {
      if (t.diverged) {
        ++rep.diverged;
      } else {
        ok.push_back(&t);
      }
    }
    Eigen::MatrixXd z(static_cast<Eigen::Index>(ok.size()), static_cast<Eigen::Index>(gt.samples()));
    for (std::size_t i = 0; i < ok.size(); ++i) {
      for (std::size_t t = 0; t < gt.samples(); ++t) {
        z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) = ok[i]->pos[t].z;
      }
    }
    auto band = evaluation::trajectory_band(z, times_of(gt), config.band_level);
    auto gz = z_of(gt);
    per_episode.push_back(evaluation::coverage(band, gz));
    rep.bands.push_back(std::move(band));
    rep.gt_z.push_back(std::move(gz));
  }
  rep.test_rmse = std::sqrt(sq / static_cast<double>(points));
  rep.rmse_rel = rep.peak_deflection > 0.0 ? rep.test_rmse / rep.peak_deflection : 0.0;
  rep.coverage = evaluation::combine(per_episode);
  return rep;
}

const AlgorithmSummary& Sim2SimReport::at(const std::string& algorithm) const {
  for (const auto& r : rows) {
    if (r.algorithm == algorithm) return r;
  }
  throw std::out_of_range("no result for algorithm '" + algorithm + "'");
}

Sim2SimReport run_sim2sim(const ExperimentConfig& config,
                          const std::vector<std::string>& algorithms, const fs::path& out) {
  config.validate();
  require_ground_truth(config);
  fs::create_directories(out);
  io::write_text(out / "config.txt", to_text(config));

  const fs::path gt_dir = out / "ground_truth";
  write_ground_truth(generate_ground_truth(config, config.seed), gt_dir);
  io::write_text(out / "inference_config.txt", to_text(strip_ground_truth(config)));

  Sim2SimReport report;
  for (const auto& a : algorithms) {
    log_line("[sim2sim] running " + a);
    report.rows.push_back(infer_and_score(a, config, gt_dir, {"test"}, out));
    if (!report.rows.back().ok) log_line("[sim2sim] " + a + " failed: " + report.rows.back().error);
  }
  for (const auto& ep : read_episodes(gt_dir, "test")) {
    for (const auto& p : ep.trajectory.pos) {
      report.peak_deflection = std::max(report.peak_deflection, std::hypot(p.x, p.z));
    }
  }

  io::CsvWriter w(out / "metrics.csv", kSummaryHeader);
  for (const auto& r : report.rows) write_summary_row(w, r);
  w.flush();

  std::vector<std::string> names;
  plot::BarSeries rmse{"test RMSE / peak", {}}, outside{"pct outside band", {}};
  for (const auto& r : report.rows) {
    names.push_back(r.algorithm);
    rmse.values.push_back(r.ok ? r.rmse_rel : 0.0);
    outside.values.push_back(r.ok ? r.pct_outside : 0.0);
  }
  if (!names.empty()) {
    io::write_text(out / "comparison.svg",
                   plot::bar_chart_svg(names, {rmse, outside}, "algorithm comparison", "fraction"));
  }
  return report;
}

std::vector<SweepRow> run_noise_sweep(const ExperimentConfig& config, const fs::path& out) {
  config.validate();
  if (config.noise_sigmas.size() < 2) throw ConfigError("noise sweep needs at least two sigmas");
  fs::create_directories(out);
  io::write_text(out / "config.txt", to_text(config));
  std::vector<SweepRow> rows;
  for (std::size_t k = 0; k < config.noise_sigmas.size(); ++k) {
    ExperimentConfig c = config;
    c.noise_sigma = config.noise_sigmas[k];
    log_line("[noise-sweep] sigma " + label(c.noise_sigma));
    const auto rep = run_sim2sim(c, config.sweep_algorithms, out / ("sigma_" + pad3(k)));
    for (const auto& r : rep.rows) rows.push_back({c.noise_sigma, r});
  }

  io::CsvWriter w(out / "noise_sweep.csv",
                  {"sigma", "algorithm", "status", "test_rmse", "rmse_rel_peak", "pct_outside",
                   "mean_width"});
  for (const auto& r : rows) {
    w.cell(r.value).cell(r.summary.algorithm).cell(std::string(r.summary.ok ? "ok" : "failed"));
    w.cell(r.summary.test_rmse).cell(r.summary.rmse_rel).cell(r.summary.pct_outside);
    w.cell(r.summary.mean_width).end_row();
  }
  w.flush();

  std::vector<std::string> cats;
  for (double s : config.noise_sigmas) cats.push_back("sigma " + label(s));
  std::vector<plot::BarSeries> outside, width;
  for (const auto& a : config.sweep_algorithms) {
    plot::BarSeries o{a, {}}, wd{a, {}};
    for (const auto& r : rows) {
      if (r.summary.algorithm != a) continue;
      o.values.push_back(r.summary.pct_outside);
      wd.values.push_back(r.summary.mean_width);
    }
    outside.push_back(o);
    width.push_back(wd);
  }
  io::write_text(out / "noise_pct_outside.svg",
                 plot::bar_chart_svg(cats, outside, "points outside the band vs noise", "fraction"));
  io::write_text(out / "noise_band_width.svg",
                 plot::bar_chart_svg(cats, width, "mean band width vs noise", "width [m]"));
  return rows;
}

std::vector<SweepRow> run_grasp_sweep(const ExperimentConfig& config, const fs::path& out) {
  config.validate();
  require_ground_truth(config);
  if (config.grasp_test_fractions.empty()) throw ConfigError("grasp.test_fractions is empty");
  fs::create_directories(out);
  io::write_text(out / "config.txt", to_text(config));

  const fs::path gt_dir = out / "ground_truth";
  write_ground_truth(generate_ground_truth(config, config.seed, config.grasp_test_fractions),
                     gt_dir);
  io::write_text(out / "inference_config.txt", to_text(strip_ground_truth(config)));

  std::vector<std::string> splits;
  for (std::size_t k = 0; k < config.grasp_test_fractions.size(); ++k) {
    splits.push_back("test_" + std::to_string(k));
  }

  std::vector<SweepRow> rows;
  for (const auto& a : config.sweep_algorithms) {
    log_line("[grasp-sweep] running " + a);
    std::vector<PredictionReport> reports;
    const auto base = infer_and_score(a, config, gt_dir, splits, out, &reports);
    for (std::size_t k = 0; k < config.grasp_test_fractions.size(); ++k) {
      AlgorithmSummary s = base;
      if (base.ok) {
        s.test_rmse = reports[k].test_rmse;
        s.rmse_rel = reports[k].rmse_rel;
        s.pct_outside = reports[k].coverage.pct_outside;
        s.mean_width = reports[k].coverage.mean_width;
      }
      rows.push_back({config.grasp_test_fractions[k], s});
    }
  }

  io::CsvWriter w(out / "grasp_sweep.csv",
                  {"train_fraction", "test_fraction", "algorithm", "status", "test_rmse",
                   "rmse_rel_peak", "pct_outside", "mean_width"});
  for (const auto& r : rows) {
    w.cell(config.train_fraction).cell(r.value).cell(r.summary.algorithm);
    w.cell(std::string(r.summary.ok ? "ok" : "failed"));
    w.cell(r.summary.test_rmse).cell(r.summary.rmse_rel).cell(r.summary.pct_outside);
    w.cell(r.summary.mean_width).end_row();
  }
  w.flush();
  return rows;
}

std::vector<PriorTrainingRow> run_train_prior(const ExperimentConfig& config,
                                              const fs::path& out) {
  config.validate();
  fs::create_directories(out);
  io::write_text(out / "config.txt", to_text(config));
  const auto prior = build_prior(config, false);
  std::vector<PriorTrainingRow> rows;
  const double width_kp = prior.box.upper[0] - prior.box.lower[0];
  const double width_kd = prior.box.upper[1] - prior.box.lower[1];
  const std::pair<const char*, std::pair<std::size_t, double>> nets[] = {
      {"kp", {0, width_kp}}, {"kd", {1, width_kd}}};
  for (const auto& [name, info] : nets) {
    // Parent and child of the same gain type share the box range.
    const auto box = prior.box.slice(info.first, info.first);
    log_line(std::string("[train-prior] training ") + name + " net");
    const auto& trained = prior_net_for(box, config.prior);
    io::write_text(out / (std::string("prior_") + name + ".priornet"), trained.net.serialize());
    const double threshold = config.prior.train.rmse_threshold.value_or(
        config.prior.mode == priors::InequalityMode::kRamp ? 0.02 * config.prior.eta * info.second
                                                           : 0.10 * config.prior.eta);
    rows.push_back({name, trained.rmse, threshold});

    io::CsvWriter grid(out / (std::string("prior_") + name + "_grid.csv"),
                       {"log10_parent", "log10_child", "label", "prediction"});
    constexpr int n = 41;
    Eigen::VectorXd x(2);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        x[0] = box.lower[0] + (box.upper[0] - box.lower[0]) * i / (n - 1);
        x[1] = box.lower[1] + (box.upper[1] - box.lower[1]) * j / (n - 1);
        grid.cell(x[0]).cell(x[1]);
        grid.cell(priors::inequality_label(x[0], x[1], config.prior.eta, config.prior.mode));
        grid.cell(trained.net.predict(x)).end_row();
      }
    }
    grid.flush();
  }
  io::CsvWriter w(out / "prior_training.csv", {"net", "rmse", "threshold"});
  for (const auto& r : rows) w.cell(r.name).cell(r.rmse).cell(r.threshold).end_row();
  w.flush();
  return rows;
}

double run_gen_tree(const ExperimentConfig& config, const fs::path& out) {
  config.validate();
  fs::create_directories(out);
  io::write_text(out / "config.txt", to_text(config));
  const auto model = geometry::generate_tree(config.tree);
  io::write_text(out / "tree.urdf", geometry::export_urdf(model, "tree"));

  double worst = 0.0;
  io::CsvWriter w(out / "tree_links.csv", {"index", "parent", "on_chain", "length", "radius",
                                          "fork_angle_deg", "mass", "area_residual_m2"});
  for (std::size_t i = 0; i < model.links.size(); ++i) {
    const auto& l = model.links[i];
    const auto kids = model.children_of(i);
    double residual = 0.0;
    if (!kids.empty()) {
      double area = 0.0;
      for (auto c : kids) area += model.links[c].radius * model.links[c].radius;
      residual = std::abs(area - l.radius * l.radius);
    }
    worst = std::max(worst, residual);
    const bool on_chain = std::find(model.chain_to_grasp.begin(), model.chain_to_grasp.end(), i) !=
                          model.chain_to_grasp.end();
    w.cell(i).cell(l.parent_index ? std::to_string(*l.parent_index) : std::string("-1"));
    w.cell(std::string(on_chain ? "1" : "0")).cell(l.length).cell(l.radius);
    w.cell(l.fork_angle * 180.0 / std::numbers::pi).cell(geometry::link_mass(l)).cell(residual);
    w.end_row();
  }
  w.flush();
  return worst;
}

}  // namespace branchinfer::experiments
