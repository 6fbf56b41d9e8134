#include <CLI11.hpp>

#include <iostream>
#include <optional>

#include "branchinfer/config.hpp"
#include "branchinfer/experiments.hpp"

namespace bi = branchinfer;
namespace ex = branchinfer::experiments;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitDivergence = 3;

struct CommonArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config, "key = value experiment config")->check(CLI::ExistingFile);
  cmd->add_option("--seed", args.seed, "override the config seed");
  cmd->add_option("--out", args.out, "output directory (overrides output_dir)");
}

bi::ExperimentConfig resolve(const CommonArgs& args) {
  bi::ExperimentConfig cfg = args.config.empty() ? bi::ExperimentConfig{} : bi::load_config(args.config);
  if (args.seed) {
    cfg.seed = *args.seed;
    cfg.inference.seed = *args.seed;
  }
  if (!args.out.empty()) cfg.output_dir = args.out;
  cfg.validate();
  return cfg;
}

void print_rows(const std::vector<ex::AlgorithmSummary>& rows) {
  for (const auto& r : rows) {
    if (r.ok) {
      std::cout << r.algorithm << ": test_rmse " << r.test_rmse << " (" << r.rmse_rel * 100
                << "% of peak), pct_outside " << r.pct_outside << ", mean_width " << r.mean_width
                << '\n';
    } else {
      std::cout << r.algorithm << ": FAILED " << r.error << '\n';
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tree-branch stiffness inference from force-deformation trajectories"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "suppress progress output");

  CommonArgs gen_args, sim_args, noise_args, grasp_args, prior_args;
  auto* gen = app.add_subcommand("gen-tree", "generate a tree and export URDF");
  auto* sim = app.add_subcommand("sim2sim", "ground truth + algorithm comparison");
  auto* noise = app.add_subcommand("noise-sweep", "sim2sim repeated over force-noise levels");
  auto* grasp = app.add_subcommand("grasp-sweep", "train at one grasp location, test at others");
  auto* prior = app.add_subcommand("train-prior", "train the inequality prior nets");
  add_common(gen, gen_args);
  add_common(sim, sim_args);
  add_common(noise, noise_args);
  add_common(grasp, grasp_args);
  add_common(prior, prior_args);

  CLI11_PARSE(app, argc, argv);
  ex::set_verbose(!quiet);

  try {
    if (*gen) {
      const auto cfg = resolve(gen_args);
      const double residual = ex::run_gen_tree(cfg, cfg.output_dir);
      std::cout << "wrote " << (cfg.output_dir / "tree.urdf").string()
                << "; max area-preservation residual " << residual << '\n';
    } else if (*sim) {
      const auto cfg = resolve(sim_args);
      const auto rep = ex::run_sim2sim(cfg, cfg.algorithms, cfg.output_dir);
      std::cout << "peak deflection " << rep.peak_deflection << " m\n";
      print_rows(rep.rows);
    } else if (*noise) {
      const auto cfg = resolve(noise_args);
      for (const auto& r : ex::run_noise_sweep(cfg, cfg.output_dir)) {
        std::cout << "sigma " << r.value << ' ';
        print_rows({r.summary});
      }
    } else if (*grasp) {
      const auto cfg = resolve(grasp_args);
      for (const auto& r : ex::run_grasp_sweep(cfg, cfg.output_dir)) {
        std::cout << "test fraction " << r.value << ' ';
        print_rows({r.summary});
      }
    } else if (*prior) {
      const auto cfg = resolve(prior_args);
      for (const auto& r : ex::run_train_prior(cfg, cfg.output_dir)) {
        std::cout << r.name << " net: rmse " << r.rmse << " (threshold " << r.threshold << ")\n";
      }
    }
  } catch (const bi::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ex::GroundTruthError& e) {
    std::cerr << "ground truth failure: " << e.what() << '\n';
    return kExitDivergence;
  } catch (const bi::priors::PriorError& e) {
    std::cerr << "prior error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
