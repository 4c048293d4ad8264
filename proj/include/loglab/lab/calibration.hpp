#pragma once

// The versioned calibration file: measured corpus values, the constants
// derived from them, the block decay fit, and every verdict threshold.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include <json.hpp>

#include "loglab/lab/config.hpp"

#ifndef LOGLAB_DEFAULT_CALIBRATION
#define LOGLAB_DEFAULT_CALIBRATION "data/calibration.json"
#endif

namespace loglab {

struct BlockDecayRecord {
  std::size_t n = 0;
  double c_hat = 0.0;
  double C = 0.0;
  double r2 = 0.0;
  double c_hat_stderr = 0.0;
  double t_window = 0.0;
  double rho0_l2 = 0.0;
  double amplitude = 1.0;
  double switch_period = 1.0;
  double cutoff_width = 1.0 / 16.0;
};

struct Calibration {
  int version = 1;
  double headroom = 1.25;
  std::string corpus;
  std::map<std::string, double> measured;
  std::map<std::string, double> constants;
  std::map<std::string, double> thresholds;
  BlockDecayRecord block_decay;

  double constant(const std::string& key) const {
    auto it = constants.find(key);
    if (it == constants.end()) throw ConfigError("calibration has no constant '" + key + "'");
    return it->second;
  }
  double threshold(const std::string& key) const {
    auto it = thresholds.find(key);
    if (it == thresholds.end()) throw ConfigError("calibration has no threshold '" + key + "'");
    return it->second;
  }
  bool has_constant(const std::string& key) const { return constants.count(key) > 0; }
};

/// "base[p=1.5]": keys for constants that depend on an order or weight.
inline std::string keyed(const std::string& base, const char* var, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s[%s=%g]", base.c_str(), var, v);
  return buf;
}

inline std::map<std::string, double> default_thresholds() {
  return {{"window_rel_tol", 0.1},        {"norm_drift_smooth", 0.01}, {"norm_drift_bv", 0.03},
          {"lusin_pass_smooth", 0.999},   {"lusin_pass_patched", 0.99}, {"slope_min_factor", 0.8},
          {"slope_max_factor", 1.3},      {"growth_ratio", 1.5},        {"plateau_tol", 0.1},
          {"prediction_factor", 3.0},     {"regression_tol", 0.2},      {"interpolation_lambda", 0.005},
          {"interpolation_delta", 0.5},   {"min_resolved_samples", 64.0}};
}

inline nlohmann::json to_json(const Calibration& c) {
  const auto& b = c.block_decay;
  return {{"version", c.version},
          {"headroom", c.headroom},
          {"corpus", c.corpus},
          {"measured", c.measured},
          {"constants", c.constants},
          {"thresholds", c.thresholds},
          {"block_decay",
           {{"n", b.n},
            {"c_hat", b.c_hat},
            {"C", b.C},
            {"r2", b.r2},
            {"c_hat_stderr", b.c_hat_stderr},
            {"t_window", b.t_window},
            {"rho0_l2", b.rho0_l2},
            {"amplitude", b.amplitude},
            {"switch_period", b.switch_period},
            {"cutoff_width", b.cutoff_width}}}};
}

inline Calibration calibration_from_json(const nlohmann::json& j) {
  Calibration c;
  try {
    c.version = j.at("version").get<int>();
    c.headroom = j.at("headroom").get<double>();
    c.corpus = j.at("corpus").get<std::string>();
    c.measured = j.at("measured").get<std::map<std::string, double>>();
    c.constants = j.at("constants").get<std::map<std::string, double>>();
    c.thresholds = j.at("thresholds").get<std::map<std::string, double>>();
    const auto& b = j.at("block_decay");
    c.block_decay = {b.at("n").get<std::size_t>(),       b.at("c_hat").get<double>(),
                     b.at("C").get<double>(),            b.at("r2").get<double>(),
                     b.at("c_hat_stderr").get<double>(), b.at("t_window").get<double>(),
                     b.at("rho0_l2").get<double>(),      b.at("amplitude").get<double>(),
                     b.at("switch_period").get<double>(), b.at("cutoff_width").get<double>()};
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed calibration file: ") + e.what());
  }
  require(c.version >= 1, "calibration: version must be positive");
  return c;
}

/// --calibration flag, else $LOGLAB_CALIBRATION, else the source-tree file.
inline std::string default_calibration_path() {
  if (const char* env = std::getenv("LOGLAB_CALIBRATION"); env && *env) return env;
  return LOGLAB_DEFAULT_CALIBRATION;
}

inline Calibration load_calibration(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open calibration file '" + path + "' (run `lab calibrate`)");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("calibration file '" + path + "' is not valid JSON: " + e.what());
  }
  return calibration_from_json(j);
}

inline void save_calibration(const Calibration& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write calibration file '" + path + "'");
  out << to_json(c).dump(2) << '\n';
}

/// Relative change of every measured value present in both files.
struct RegressionCheck {
  std::map<std::string, double> relative_change;
  double worst = 0.0;
  std::string worst_key;
  bool pass = true;
};

inline RegressionCheck regression_check(const std::map<std::string, double>& now,
                                        const Calibration& frozen, double tol) {
  RegressionCheck r;
  for (const auto& [k, v] : now) {
    auto it = frozen.measured.find(k);
    if (it == frozen.measured.end()) throw ConfigError("calibration has no measured value '" + k + "'");
    const double ref = it->second;
    const double rel = ref == 0.0 ? std::abs(v) : std::abs(v - ref) / std::abs(ref);
    r.relative_change[k] = rel;
    if (rel >= r.worst) {
      r.worst = rel;
      r.worst_key = k;
    }
  }
  r.pass = r.worst <= tol;
  return r;
}

}  // namespace loglab
