#include "branchinfer/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <numbers>
#include <sstream>

#include "branchinfer/trajectory_io.hpp"

namespace branchinfer {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto s = trim(v);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(out)) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto s = trim(v);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

std::size_t to_size(const std::string& key, const std::string& v) {
  return static_cast<std::size_t>(to_u64(key, v));
}

bool to_bool(const std::string& key, const std::string& v) {
  const auto s = trim(v);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

std::vector<std::string> to_strings(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> to_doubles(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& s : to_strings(v)) out.push_back(to_double(key, s));
  return out;
}

std::string join(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + io::format_double(v[i]);
  return out;
}

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + v[i];
  return out;
}

std::string fmt(double v) { return io::format_double(v); }
std::string fmt(std::size_t v) { return std::to_string(v); }
std::string fmt_bool(bool v) { return v ? "true" : "false"; }

using Setter = std::function<void(ExperimentConfig&, const std::string& key, const std::string&)>;
using Getter = std::function<std::string(const ExperimentConfig&)>;

struct Field {
  std::string key;
  Setter set;
  Getter get;
};

#define BI_DOUBLE(name, member)                                                          \
  Field {                                                                                \
    name, [](ExperimentConfig& c, const std::string& k, const std::string& v) {          \
      c.member = to_double(k, v);                                                        \
    },                                                                                   \
        [](const ExperimentConfig& c) { return fmt(c.member); }                          \
  }
#define BI_SIZE(name, member)                                                            \
  Field {                                                                                \
    name, [](ExperimentConfig& c, const std::string& k, const std::string& v) {          \
      c.member = to_size(k, v);                                                          \
    },                                                                                   \
        [](const ExperimentConfig& c) { return fmt(c.member); }                          \
  }
#define BI_BOOL(name, member)                                                            \
  Field {                                                                                \
    name, [](ExperimentConfig& c, const std::string& k, const std::string& v) {          \
      c.member = to_bool(k, v);                                                          \
    },                                                                                   \
        [](const ExperimentConfig& c) { return fmt_bool(c.member); }                     \
  }
#define BI_DOUBLES(name, member)                                                         \
  Field {                                                                                \
    name, [](ExperimentConfig& c, const std::string& k, const std::string& v) {          \
      c.member = to_doubles(k, v);                                                       \
    },                                                                                   \
        [](const ExperimentConfig& c) { return join(c.member); }                         \
  }
#define BI_STRINGS(name, member)                                                         \
  Field {                                                                                \
    name, [](ExperimentConfig& c, const std::string&, const std::string& v) {            \
      c.member = to_strings(v);                                                          \
    },                                                                                   \
        [](const ExperimentConfig& c) { return join(c.member); }                         \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table{
      BI_DOUBLE("tree.trunk_length", tree.trunk_length),
      BI_DOUBLE("tree.trunk_radius", tree.trunk_radius),
      BI_SIZE("tree.levels", tree.levels),
      BI_SIZE("tree.children_per_level", tree.children_per_level),
      Field{"tree.fork_angles_deg",
            [](ExperimentConfig& c, const std::string& k, const std::string& v) {
              c.tree.fork_angles = to_doubles(k, v);
              for (auto& a : c.tree.fork_angles) a *= std::numbers::pi / 180.0;
            },
            [](const ExperimentConfig& c) {
              auto deg = c.tree.fork_angles;
              for (auto& a : deg) a *= 180.0 / std::numbers::pi;
              return join(deg);
            }},
      BI_DOUBLE("tree.density", tree.density),
      BI_DOUBLE("tree.length_decay", tree.length_decay),
      BI_SIZE("tree.grasp_child", tree.grasp_child),

      BI_DOUBLES("theta_gt", theta_gt),

      BI_DOUBLES("force.amplitudes", force.amplitudes),
      BI_DOUBLE("force.ramp", force.ramp),
      BI_DOUBLE("force.hold", force.hold),
      BI_DOUBLE("force.settle", force.settle),
      BI_DOUBLE("force.dt_obs", force.dt_obs),

      BI_SIZE("episodes.train", train_episodes),
      BI_SIZE("episodes.test", test_episodes),
      BI_DOUBLE("noise.sigma", noise_sigma),
      BI_BOOL("noise.positions", position_noise),

      BI_DOUBLE("grasp.train_fraction", train_fraction),
      BI_DOUBLE("grasp.test_fraction", test_fraction),
      BI_DOUBLES("grasp.test_fractions", grasp_test_fractions),
      BI_DOUBLES("noise_sweep.sigmas", noise_sigmas),

      BI_STRINGS("algorithms", algorithms),
      BI_STRINGS("sweep.algorithms", sweep_algorithms),

      BI_DOUBLE("inference.kT", inference.kT),
      BI_BOOL("inference.normalize_loss", inference.normalize_loss),
      BI_SIZE("inference.iterations", inference.iterations),
      BI_SIZE("inference.n_particles", inference.n_particles),
      BI_DOUBLE("inference.fd_epsilon", inference.fd_epsilon),
      Field{"inference.optimizer",
            [](ExperimentConfig& c, const std::string& k, const std::string& v) {
              try {
                c.inference.optimizer.kind = inference::parse_optimizer_kind(trim(v));
              } catch (const std::exception& e) {
                throw ConfigError(k + ": " + e.what());
              }
            },
            [](const ExperimentConfig& c) {
              return std::string(c.inference.optimizer.kind == inference::OptimizerKind::kAdam
                                     ? "adam"
                                     : "sgd");
            }},
      BI_DOUBLE("inference.learning_rate", inference.optimizer.learning_rate),
      BI_DOUBLE("inference.beta1", inference.optimizer.beta1),
      BI_DOUBLE("inference.beta2", inference.optimizer.beta2),
      BI_DOUBLE("inference.momentum", inference.optimizer.momentum),
      BI_BOOL("inference.repulsion", inference.svgd_repulsion),

      BI_DOUBLE("mcmh.proposal_scale", inference.mcmh_proposal_scale),
      BI_DOUBLE("sgld.step_size", sgld_step_size),
      BI_DOUBLE("sghmc.step_size", sghmc_step_size),
      BI_DOUBLE("sghmc.friction", inference.sghmc_friction),
      BI_SIZE("mc.burn_in", inference.burn_in),
      BI_SIZE("mc.thin", inference.thin),

      BI_DOUBLES("prior.box_lower", prior.box_lower),
      BI_DOUBLES("prior.box_upper", prior.box_upper),
      BI_DOUBLE("prior.sigma", prior.sigma),
      BI_BOOL("prior.constraints", prior.constraints),
      BI_DOUBLE("prior.eta", prior.eta),
      Field{"prior.mode",
            [](ExperimentConfig& c, const std::string& k, const std::string& v) {
              try {
                c.prior.mode = priors::parse_inequality_mode(trim(v));
              } catch (const std::exception& e) {
                throw ConfigError(k + ": " + e.what());
              }
            },
            [](const ExperimentConfig& c) { return priors::to_string(c.prior.mode); }},
      BI_SIZE("prior.hidden_units", prior.train.hidden_units),
      BI_SIZE("prior.epochs", prior.train.epochs),
      BI_DOUBLE("prior.learning_rate", prior.train.learning_rate),
      BI_SIZE("prior.grid_points", prior.train.grid_points_per_dim),
      BI_SIZE("prior.random_points", prior.train.random_points),
      Field{"prior.seed",
            [](ExperimentConfig& c, const std::string& k, const std::string& v) {
              c.prior.train.seed = to_u64(k, v);
            },
            [](const ExperimentConfig& c) { return std::to_string(c.prior.train.seed); }},
      Field{"prior.rmse_threshold",
            [](ExperimentConfig& c, const std::string& k, const std::string& v) {
              if (trim(v) == "auto") {
                c.prior.train.rmse_threshold.reset();
              } else {
                c.prior.train.rmse_threshold = to_double(k, v);
              }
            },
            [](const ExperimentConfig& c) {
              return c.prior.train.rmse_threshold ? fmt(*c.prior.train.rmse_threshold)
                                                  : std::string("auto");
            }},

      BI_DOUBLE("sim.dt", sim.dt),
      BI_DOUBLE("sim.gravity", sim.gravity),
      BI_DOUBLE("eval.level", band_level),

      Field{"output_dir",
            [](ExperimentConfig& c, const std::string&, const std::string& v) {
              c.output_dir = trim(v);
            },
            [](const ExperimentConfig& c) { return c.output_dir.string(); }},
      Field{"seed",
            [](ExperimentConfig& c, const std::string& k, const std::string& v) {
              c.seed = to_u64(k, v);
              c.inference.seed = c.seed;
            },
            [](const ExperimentConfig& c) { return std::to_string(c.seed); }},
  };
  return table;
}

#undef BI_DOUBLE
#undef BI_SIZE
#undef BI_BOOL
#undef BI_DOUBLES
#undef BI_STRINGS

std::vector<double> expand(const std::vector<double>& v, std::size_t joints) {
  if (v.size() == 2 * joints) return v;
  if (v.size() == 2) {
    std::vector<double> out;
    for (std::size_t j = 0; j < joints; ++j) out.insert(out.end(), v.begin(), v.end());
    return out;
  }
  throw ConfigError("prior box needs 2 or 2R entries");
}

void check_fraction(const std::string& name, double f) {
  if (!(f > 0.0 && f <= 1.0)) throw ConfigError(name + " must lie in (0, 1]");
}

}  // namespace

std::size_t ForceSchedule::samples() const {
  return static_cast<std::size_t>(std::llround((ramp + hold + settle) / dt_obs));
}

std::size_t ExperimentConfig::joints() const {
  // The chain follows one child per level.
  return tree.levels;
}

std::vector<double> ExperimentConfig::box_lower() const { return expand(prior.box_lower, joints()); }
std::vector<double> ExperimentConfig::box_upper() const { return expand(prior.box_upper, joints()); }

void ExperimentConfig::validate() const {
  try {
    geometry::validate(tree);
    inference.validate();
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  const std::size_t n = 2 * joints();
  for (double v : theta_gt) {
    if (!(v > 0.0)) throw ConfigError("theta_gt entries must be positive");
  }
  if (force.amplitudes.empty()) throw ConfigError("force.amplitudes must not be empty");
  if (!(force.dt_obs > 0.0) || force.ramp < 0.0 || force.hold < 0.0 || force.settle < 0.0) {
    throw ConfigError("force schedule durations must be non-negative and dt_obs positive");
  }
  if (force.samples() < 2) throw ConfigError("force schedule must span at least two samples");
  const double sub = force.dt_obs / sim.dt;
  if (!(sim.dt > 0.0) || std::abs(sub - std::round(sub)) > 1e-9 * sub) {
    throw ConfigError("force.dt_obs must be an integer multiple of sim.dt");
  }
  if (train_episodes < 1 || test_episodes < 1) throw ConfigError("episode counts must be >= 1");
  if (noise_sigma < 0.0) throw ConfigError("noise.sigma must be >= 0");
  check_fraction("grasp.train_fraction", train_fraction);
  check_fraction("grasp.test_fraction", test_fraction);
  for (double f : grasp_test_fractions) check_fraction("grasp.test_fractions", f);
  for (double s : noise_sigmas) {
    if (s < 0.0) throw ConfigError("noise_sweep.sigmas must be >= 0");
  }
  for (const auto* list : {&algorithms, &sweep_algorithms}) {
    for (const auto& a : *list) {
      if (std::find(known_algorithms().begin(), known_algorithms().end(), a) ==
          known_algorithms().end()) {
        throw ConfigError("unknown algorithm '" + a + "'");
      }
    }
  }
  const auto lo = box_lower(), hi = box_upper();
  for (std::size_t i = 0; i < n; ++i) {
    if (!(lo[i] > 0.0 && lo[i] < hi[i])) throw ConfigError("prior box needs 0 < lower < upper");
  }
  if (!(prior.sigma > 0.0)) throw ConfigError("prior.sigma must be positive");
  if (!(prior.eta > 0.0)) throw ConfigError("prior.eta must be positive");
  if (prior.train.hidden_units < 1 || prior.train.epochs < 1) {
    throw ConfigError("prior.hidden_units and prior.epochs must be >= 1");
  }
  if (!(sgld_step_size > 0.0) || !(sghmc_step_size > 0.0)) {
    throw ConfigError("sampler step sizes must be positive");
  }
  if (!(band_level > 0.0 && band_level <= 1.0)) throw ConfigError("eval.level must lie in (0, 1]");
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    const auto& table = fields();
    const auto it = std::find_if(table.begin(), table.end(),
                                 [&](const Field& f) { return f.key == key; });
    if (it == table.end()) {
      throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    it->set(cfg, key, value);
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = io::read_text(path);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return parse_config(text);
}

std::string to_text(const ExperimentConfig& config) {
  std::string out;
  for (const auto& f : fields()) out += f.key + " = " + f.get(config) + "\n";
  return out;
}

}  // namespace branchinfer
