#pragma once

// Experiment configuration: JSON in, validated struct out, plus a stable
// hash of the canonical form that every report carries.

#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "loglab/core/types.hpp"

namespace loglab {

enum class Experiment {
  regularity_growth,
  sharpness_poly,
  sharpness_divergence,
  mixing_bounds,
  lusin_verify,
  interpolation_sweep
};

inline const std::vector<std::pair<Experiment, std::string>>& experiment_names() {
  static const std::vector<std::pair<Experiment, std::string>> names = {
      {Experiment::regularity_growth, "regularity-growth"},
      {Experiment::sharpness_poly, "sharpness-poly"},
      {Experiment::sharpness_divergence, "sharpness-divergence"},
      {Experiment::mixing_bounds, "mixing-bounds"},
      {Experiment::lusin_verify, "lusin-verify"},
      {Experiment::interpolation_sweep, "interpolation-sweep"}};
  return names;
}

inline std::string to_string(Experiment e) {
  for (const auto& [k, v] : experiment_names())
    if (k == e) return v;
  return "unknown";
}

class ConfigError : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

inline Experiment parse_experiment(const std::string& s) {
  for (const auto& [k, v] : experiment_names())
    if (v == s) return k;
  throw ConfigError("unknown experiment '" + s + "'");
}

struct FieldSpec {
  std::string kind = "building-block";  // analytic-shear, building-block, patched, sampled
  double amplitude = 1.0;
  double switch_period = 1.0;
  double cutoff_width = 1.0 / 16.0;
  bool divergence_free = true;
  std::vector<std::string> components;  // sampled: two binary field files
};

struct ScheduleSpec {
  int N = 3;
  double p = 1.5;
};

struct ExperimentConfig {
  Experiment experiment = Experiment::regularity_growth;
  std::size_t n = 128;
  double p = 1.5;
  std::vector<double> gammas;  // empty: experiment default
  FieldSpec field;
  ScheduleSpec schedule;
  std::string initial = "checkerboard";  // checkerboard, sine-core, sine-cell, disk, constant, zero
  std::vector<double> times{0.0, 1.0, 2.0};
  std::uint64_t seed = 7;
  double ode_tol = 1e-8;
  std::size_t n_block = 128;
  std::size_t n_pairs = 20000;
  std::size_t quad_steps = 65;
  std::size_t shells = 64;
  std::size_t angles = 32;
  double kappa = 0.5;
  double eps_target = 0.1;
  std::size_t corpus_size = 8;
  nlohmann::json source;  // the validated document as given

  bool is_frozen() const { return field.amplitude == 0.0; }
};

namespace detail {

inline void check_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                       const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
}

template <class T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("config key '") + key + "' has the wrong type");
  }
}

inline void in_range(double v, double lo, double hi, const std::string& what) {
  if (!(v >= lo && v <= hi))
    throw ConfigError(what + " = " + std::to_string(v) + " outside [" + std::to_string(lo) + ", " +
                      std::to_string(hi) + "]");
}

}  // namespace detail

inline ExperimentConfig parse_config(const nlohmann::json& j) {
  using detail::get_or;
  using detail::in_range;
  detail::check_keys(j,
                     {"experiment", "n", "p", "gammas", "field", "schedule", "initial", "times", "seed",
                      "ode_tol", "n_block", "n_pairs", "quad_steps", "quadrature", "kappa",
                      "eps_target", "corpus_size", "note"},
                     "config");
  if (!j.contains("experiment")) throw ConfigError("config: 'experiment' is required");
  ExperimentConfig c;
  c.source = j;
  c.experiment = parse_experiment(j.at("experiment").get<std::string>());
  c.n = get_or<std::size_t>(j, "n", c.n);
  if (!is_power_of_two(c.n) || c.n < 16 || c.n > 4096)
    throw ConfigError("n must be a power of two in [16, 4096]");
  c.p = get_or<double>(j, "p", c.p);
  in_range(c.p, 0.1, 8.0, "p");
  c.gammas = get_or<std::vector<double>>(j, "gammas", {});
  for (double g : c.gammas)
    if (!(g < 1.0)) throw ConfigError("every gamma must be < 1");
  if (j.contains("field")) {
    const auto& f = j.at("field");
    detail::check_keys(f, {"kind", "amplitude", "switch_period", "cutoff_width", "divergence_free",
                           "components"},
                       "field");
    c.field.kind = get_or<std::string>(f, "kind", c.field.kind);
    static const std::set<std::string> kinds{"analytic-shear", "building-block", "patched", "sampled"};
    if (!kinds.count(c.field.kind)) throw ConfigError("unknown field kind '" + c.field.kind + "'");
    c.field.amplitude = get_or<double>(f, "amplitude", c.field.amplitude);
    in_range(c.field.amplitude, 0.0, 100.0, "field.amplitude");
    c.field.switch_period = get_or<double>(f, "switch_period", c.field.switch_period);
    in_range(c.field.switch_period, 1e-6, 1e6, "field.switch_period");
    c.field.cutoff_width = get_or<double>(f, "cutoff_width", c.field.cutoff_width);
    in_range(c.field.cutoff_width, 1e-3, 0.25, "field.cutoff_width");
    c.field.divergence_free = get_or<bool>(f, "divergence_free", true);
    c.field.components = get_or<std::vector<std::string>>(f, "components", {});
    if (c.field.kind == "sampled" && c.field.components.size() != 2)
      throw ConfigError("sampled field needs two component files");
  }
  if (j.contains("schedule")) {
    const auto& s = j.at("schedule");
    detail::check_keys(s, {"N", "p"}, "schedule");
    c.schedule.N = get_or<int>(s, "N", c.schedule.N);
    in_range(c.schedule.N, 1, 8, "schedule.N");
    c.schedule.p = get_or<double>(s, "p", c.p);
    in_range(c.schedule.p, 1.0, 8.0, "schedule.p");
  }
  c.initial = get_or<std::string>(j, "initial", c.initial);
  static const std::set<std::string> inits{"checkerboard", "sine-core", "sine-cell", "disk", "constant", "zero"};
  if (!inits.count(c.initial)) throw ConfigError("unknown initial datum '" + c.initial + "'");
  c.times = get_or<std::vector<double>>(j, "times", c.times);
  if (c.times.empty()) throw ConfigError("times must not be empty");
  for (std::size_t k = 0; k < c.times.size(); ++k) {
    in_range(c.times[k], 0.0, 1e3, "times[]");
    if (k > 0 && !(c.times[k] > c.times[k - 1])) throw ConfigError("times must be increasing");
  }
  c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
  c.ode_tol = get_or<double>(j, "ode_tol", c.ode_tol);
  in_range(c.ode_tol, 1e-14, 1e-3, "ode_tol");
  c.n_block = get_or<std::size_t>(j, "n_block", c.n_block);
  if (!is_power_of_two(c.n_block) || c.n_block > 2048)
    throw ConfigError("n_block must be a power of two up to 2048");
  c.n_pairs = get_or<std::size_t>(j, "n_pairs", c.n_pairs);
  in_range(static_cast<double>(c.n_pairs), 10, 1e7, "n_pairs");
  c.quad_steps = get_or<std::size_t>(j, "quad_steps", c.quad_steps);
  in_range(static_cast<double>(c.quad_steps), 2, 1e5, "quad_steps");
  if (j.contains("quadrature")) {
    const auto& q = j.at("quadrature");
    detail::check_keys(q, {"shells", "angles"}, "quadrature");
    c.shells = get_or<std::size_t>(q, "shells", c.shells);
    c.angles = get_or<std::size_t>(q, "angles", c.angles);
    in_range(static_cast<double>(c.shells), 1, 4096, "quadrature.shells");
    if (c.angles < 2 || c.angles % 2 != 0) throw ConfigError("quadrature.angles must be even");
  }
  c.kappa = get_or<double>(j, "kappa", c.kappa);
  if (!(c.kappa > 0.0 && c.kappa < 1.0)) throw ConfigError("kappa must lie in (0, 1)");
  c.eps_target = get_or<double>(j, "eps_target", c.eps_target);
  if (!(c.eps_target > 0.0 && c.eps_target < 1.0 / 3.0)) throw ConfigError("eps_target must lie in (0, 1/3)");
  c.corpus_size = get_or<std::size_t>(j, "corpus_size", c.corpus_size);
  in_range(static_cast<double>(c.corpus_size), 1, 256, "corpus_size");
  if (c.field.kind == "patched" || c.experiment == Experiment::sharpness_divergence)
    if (c.schedule.p < 1.0) throw ConfigError("schedule.p must be >= 1");
  if (!c.field.divergence_free &&
      (c.experiment != Experiment::interpolation_sweep))
    throw ConfigError("continuity-equation experiments need a divergence-free field");
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Hash of the canonical dump (keys sorted, no whitespace) as 16 hex digits.
inline std::string config_hash(const nlohmann::json& j) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << fnv1a(j.dump());
  return os.str();
}

inline std::string config_hash(const ExperimentConfig& c) { return config_hash(c.source); }

}  // namespace loglab
