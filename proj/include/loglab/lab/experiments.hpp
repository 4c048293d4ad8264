#pragma once

// The six experiments. Each measure_* routine returns raw numbers and is
// shared with calibration; each run_* routine turns them into a report with
// verdicts against the calibration file.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "loglab/constructions/block_decay.hpp"
#include "loglab/constructions/patched.hpp"
#include "loglab/core/fit.hpp"
#include "loglab/flow/lusin.hpp"
#include "loglab/functionals/inequalities.hpp"
#include "loglab/functionals/log_sobolev.hpp"
#include "loglab/functionals/mixing_scale.hpp"
#include "loglab/lab/calibration.hpp"
#include "loglab/lab/corpus.hpp"
#include "loglab/lab/fields.hpp"
#include "loglab/lab/report.hpp"

namespace loglab {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

namespace detail {

inline std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline ExperimentReport new_report(const ExperimentConfig& cfg, const Calibration& cal) {
  ExperimentReport r;
  r.experiment = to_string(cfg.experiment);
  r.config_hash = config_hash(cfg);
  r.seed = cfg.seed;
  r.calibration_version = cal.version;
  return r;
}

inline LinearFit loglog_fit(const std::vector<double>& t, const std::vector<double>& y) {
  std::vector<double> lx, ly;
  for (std::size_t k = 0; k < t.size(); ++k) {
    lx.push_back(std::log(t[k]));
    ly.push_back(std::log(y[k]));
  }
  return fit_line(lx, ly);
}

/// Forward-difference gradient magnitude |D u| / dx; finite for BV data.
inline GridField difference_gradient(const GridField& f) {
  const std::size_t n = f.n();
  std::vector<double> v(n * n);
  const double inv = 1.0 / f.spacing();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      v[i * n + j] = inv * std::hypot(f((i + 1) % n, j) - f(i, j), f(i, (j + 1) % n) - f(i, j));
  return GridField(n, f.box(), std::move(v), f.origin());
}

}  // namespace detail

// ---------------------------------------------------------------- regularity

struct GrowthMeasurement {
  std::vector<double> times, lhs, budget, grad_integral, l2_drift;
  double bv = 0.0, l1 = 0.0;
  double max_ratio = 0.0;
};

/// LHS: log-Sobolev functional of order p of u_t. Budget:
/// (int_0^t ||grad b||_p)^p + |u0|_BV^p + ||u0||_1.
template <class B>
GrowthMeasurement measure_regularity_growth(const B& b, const InitialDatum& u, const std::vector<double>& times,
                                            double p, std::size_t n, double ode_tol) {
  GrowthMeasurement m;
  const GridField u0 = sample_initial(u, n, b.box(), b.origin());
  m.bv = bv_seminorm(u0);
  m.l1 = lp_norm(u0, 1.0);
  const auto fields = advect(b, u.value, n, times, ode_tol);
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double G = gradient_lp_integral(b, times[k], p, n);
    const double lhs = log_sobolev(fields[k], p).value;
    const double budget = std::pow(G, p) + std::pow(m.bv, p) + m.l1;
    m.times.push_back(times[k]);
    m.lhs.push_back(lhs);
    m.budget.push_back(budget);
    m.grad_integral.push_back(G);
    m.l2_drift.push_back(ce_diagnostics(u0, fields[k]).l2_drift);
    if (budget > 0.0) m.max_ratio = std::max(m.max_ratio, lhs / budget);
  }
  return m;
}

inline ExperimentReport run_regularity_growth(const ExperimentConfig& cfg, const Calibration& cal) {
  require(cfg.experiment == Experiment::regularity_growth, "run_regularity_growth: wrong experiment");
  auto r = detail::new_report(cfg, cal);
  const AnyField field = make_field(cfg);
  const InitialDatum u = make_initial(cfg.initial, field_box(field), field_origin(field), cfg.field.cutoff_width);
  const auto m = std::visit(
      [&](const auto& b) { return measure_regularity_growth(b, u, cfg.times, cfg.p, cfg.n, cfg.ode_tol); },
      field);
  const double drift_tol = cal.threshold(u.smooth ? "norm_drift_smooth" : "norm_drift_bv");
  const double worst_drift = *std::max_element(m.l2_drift.begin(), m.l2_drift.end());
  r.diagnostics["l2_drift_max"] = worst_drift;
  if (worst_drift > drift_tol)
    throw SolverError("regularity-growth: L^2 norm drifted by " + detail::fmt(worst_drift) +
                      " (limit " + detail::fmt(drift_tol) + ")");
  const std::string key = keyed("regularity", "p", cfg.p);
  const double C = cal.constant(key);
  r.constants[key] = C;
  r.columns = {{"t", "time", "output time"},
               {"lhs", "functional", "log-Sobolev functional of order p of u_t"},
               {"budget", "functional", "(int ||grad b||_p)^p + |u0|_BV^p + ||u0||_1"},
               {"grad_integral", "W^{1,p} norm x time", "int_0^t ||grad b_s||_p ds"},
               {"ratio", "1", "lhs / budget"},
               {"l2_drift", "1", "relative L^2 change of u_t against u0"}};
  bool ok = true;
  for (std::size_t k = 0; k < m.times.size(); ++k) {
    const double ratio = m.budget[k] > 0.0 ? m.lhs[k] / m.budget[k] : 0.0;
    r.rows.push_back({m.times[k], m.lhs[k], m.budget[k], m.grad_integral[k], ratio, m.l2_drift[k]});
    r.plot.push_back({m.times[k], m.lhs[k], kNaN, C * m.budget[k]});
    ok = ok && m.lhs[k] <= C * m.budget[k] * (1.0 + 1e-12);
  }
  r.diagnostics["bv_seminorm"] = m.bv;
  r.diagnostics["l1_norm"] = m.l1;
  r.diagnostics["max_ratio"] = m.max_ratio;
  r.add_verdict("lhs <= C budget", ok,
                "max lhs/budget " + detail::fmt(m.max_ratio) + " against C = " + detail::fmt(C));
  return r;
}

// ---------------------------------------------------------------- sharpness (single block)

struct PolyMeasurement {
  DecaySeries fine, coarse;
  std::size_t window = 0;
  std::vector<double> functional;    // order-p functional at every output time
  std::vector<std::size_t> fit_idx;  // positive times inside the resolved window
  LinearFit slope, increment_slope, predicted_slope;
  std::vector<double> predicted;     // ||u||^2 log(2 + ||u|| / (C e^{-c t}))^p at every time
  BlockDecay decay;
};

/// Growth of the order-p functional of the advected block datum. The
/// resolved window comes from the H^-1 series at n and n/2; the prediction
/// feeds the fitted decay of that window into the logarithmic interpolation
/// bound.
inline PolyMeasurement sharpness_poly_from(const DecaySeries& fine, const DecaySeries& coarse,
                                           const std::vector<GridField>& fields, double p, double rel_tol) {
  PolyMeasurement m;
  m.fine = fine;
  m.coarse = coarse;
  const auto& times = fine.times;
  m.window = resolved_count(m.fine, m.coarse, rel_tol);
  for (const auto& f : fields) m.functional.push_back(log_sobolev(f, p).value);
  for (std::size_t k = 0; k < m.window; ++k)
    if (times[k] > 0.0) m.fit_idx.push_back(k);
  if (m.fit_idx.size() < 3 || m.window < 3)
    throw ResolutionError("sharpness-poly: resolved window too short before the grid floor (" +
                          std::to_string(m.fit_idx.size()) + " positive times)");
  m.decay = fit_decay(m.fine, m.window);
  std::vector<double> t, F, inc, P;
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double l2 = m.fine.l2[k];
    const double h1 = m.decay.C * std::exp(-m.decay.c_hat * times[k]);
    m.predicted.push_back(l2 * l2 * std::pow(std::log(2.0 + l2 / h1), p));
  }
  for (std::size_t k : m.fit_idx) {
    t.push_back(times[k]);
    F.push_back(m.functional[k]);
    inc.push_back(std::max(m.functional[k] - m.functional[0], 1e-300));
    P.push_back(m.predicted[k]);
  }
  m.slope = detail::loglog_fit(t, F);
  m.increment_slope = detail::loglog_fit(t, inc);
  m.predicted_slope = detail::loglog_fit(t, P);
  return m;
}

inline PolyMeasurement measure_sharpness_poly(const BuildingBlock& bb, const std::vector<double>& times, double p,
                                              std::size_t n, double ode_tol, double rel_tol) {
  std::vector<GridField> fields;
  const DecaySeries fine = block_decay_series(bb, times, n, ode_tol, &fields);
  return sharpness_poly_from(fine, block_decay_series(bb, times, n / 2, ode_tol), fields, p, rel_tol);
}

inline ExperimentReport run_sharpness_poly(const ExperimentConfig& cfg, const Calibration& cal) {
  require(cfg.experiment == Experiment::sharpness_poly, "run_sharpness_poly: wrong experiment");
  if (cfg.field.kind != "building-block") throw ConfigError("sharpness-poly runs on the building-block field");
  if (cfg.initial != "sine-core" && cfg.initial != "sine-cell")
    throw ConfigError("sharpness-poly needs smooth initial data (sine-core or sine-cell)");
  auto r = detail::new_report(cfg, cal);
  const BuildingBlock bb =
      block_from(cfg.field, cfg.initial == "sine-core" ? InitialProfile::sine_core : InitialProfile::sine_cell);
  const auto m = measure_sharpness_poly(bb, cfg.times, cfg.p, cfg.n, cfg.ode_tol, cal.threshold("window_rel_tol"));
  const std::string zkey = keyed("log_interpolation", "gamma", 1.0 - cfg.p);
  const double Cz = cal.has_constant(zkey) ? cal.constant(zkey) : kNaN;
  if (std::isfinite(Cz)) r.constants[zkey] = Cz;
  r.columns = {{"t", "time", "output time"},
               {"functional", "functional", "log-Sobolev functional of order p of u_t"},
               {"hminus1", "norm", "||u_t||_{H^-1}, grid n"},
               {"hminus1_coarse", "norm", "||u_t||_{H^-1}, grid n/2"},
               {"predicted_lhs", "functional", "||u||^2 log(2 + ||u|| / fitted H^-1)^p"},
               {"resolved", "flag", "1 inside the resolved window"}};
  for (std::size_t k = 0; k < cfg.times.size(); ++k) {
    r.rows.push_back({cfg.times[k], m.functional[k], m.fine.hminus1[k], m.coarse.hminus1[k], m.predicted[k],
                      k < m.window ? 1.0 : 0.0});
    r.plot.push_back({cfg.times[k], m.functional[k], std::isfinite(Cz) ? m.predicted[k] / Cz : kNaN, kNaN});
  }
  r.fits.push_back({"growth_slope", m.slope.slope, m.slope.slope_stderr, m.slope.r2, m.slope.points});
  r.fits.push_back({"increment_slope", m.increment_slope.slope, m.increment_slope.slope_stderr,
                    m.increment_slope.r2, m.increment_slope.points});
  r.fits.push_back({"predicted_slope", m.predicted_slope.slope, m.predicted_slope.slope_stderr,
                    m.predicted_slope.r2, m.predicted_slope.points});
  r.fits.push_back({"c_hat", m.decay.c_hat, m.decay.c_hat_stderr, m.decay.r2, m.decay.window});
  r.diagnostics["window_samples"] = static_cast<double>(m.window);
  r.diagnostics["t_window"] = m.decay.t_window;
  const double lo = cal.threshold("slope_min_factor") * cfg.p;
  const bool frozen = cfg.is_frozen();
  r.add_verdict("slope >= " + detail::fmt(cal.threshold("slope_min_factor")) + " p", m.slope.slope >= lo,
                frozen ? "frozen field: no mixing, growth not expected"
                       : "fitted slope " + detail::fmt(m.slope.slope) + ", needs " + detail::fmt(lo) +
                             "; predicted " + detail::fmt(m.predicted_slope.slope),
                !frozen);
  if (std::isfinite(Cz) && !frozen) {
    bool ok = true;
    for (std::size_t k : m.fit_idx) ok = ok && m.functional[k] >= m.predicted[k] / Cz;
    r.add_verdict("functional >= predicted lower bound", ok,
                  "interpolation lower bound with calibrated constant " + detail::fmt(Cz));
  }
  return r;
}

// ---------------------------------------------------------------- divergence dichotomy

struct DivergenceMeasurement {
  std::vector<double> gammas;
  std::vector<BlockDiagonal> measured;  // per gamma
  std::vector<SeriesTerms> predicted;   // per gamma
  std::vector<double> rescaled_times;
};

inline DivergenceMeasurement measure_sharpness_divergence(const ScheduleN& s, const BuildingBlock& bb,
                                                          const std::vector<double>& gammas, double t,
                                                          std::size_t n_block, double ode_tol, double c_hat,
                                                          std::size_t shells, std::size_t angles) {
  if (n_block < 64)
    throw ResolutionError("sharpness-divergence: n_block = " + std::to_string(n_block) +
                          " puts fewer than 64 samples across each block");
  DivergenceMeasurement m;
  m.gammas = gammas;
  std::vector<GridField> evolved;
  for (int k = 1; k <= s.N; ++k) {
    m.rescaled_times.push_back(t / s.tau_n(k));
    evolved.push_back(evolve_block(bb, m.rescaled_times.back(), n_block, ode_tol));
  }
  for (double g : gammas) {
    m.measured.push_back(block_diagonal_functional(s, bb, g, t, n_block, ode_tol, shells, angles, &evolved));
    m.predicted.push_back(divergence_series_terms(s, g, t, c_hat, bb.rho0_l2()));
  }
  return m;
}

inline ExperimentReport run_sharpness_divergence(const ExperimentConfig& cfg, const Calibration& cal) {
  require(cfg.experiment == Experiment::sharpness_divergence, "run_sharpness_divergence: wrong experiment");
  auto r = detail::new_report(cfg, cal);
  const double p = cfg.schedule.p;
  const ScheduleN s = make_schedule(cfg.schedule.N, p);
  const BuildingBlock bb = block_from(cfg.field);
  std::vector<double> gammas = cfg.gammas;
  if (gammas.empty()) gammas = {1.0 - p - 0.3, 0.0};
  const double t = cfg.times.back();
  const double c_hat = cal.block_decay.c_hat;
  r.constants["block_c_hat"] = c_hat;
  const auto m = measure_sharpness_divergence(s, bb, gammas, t, cfg.n_block, cfg.ode_tol, c_hat, cfg.shells,
                                              cfg.angles);
  r.columns = {{"N", "count", "truncation level"},
               {"gamma", "1", "log weight exponent"},
               {"partial_sum", "functional", "gamma-weighted functional of the N-block truncation"},
               {"predicted", "functional", "partial sum of the lower-bound series"},
               {"ratio", "1", "partial_sum(N) / partial_sum(N-1)"},
               {"rescaled_time", "block time", "t / tau_N"}};
  const double growth = cal.threshold("growth_ratio"), plateau = cal.threshold("plateau_tol"),
               factor = cal.threshold("prediction_factor");
  for (std::size_t gi = 0; gi < gammas.size(); ++gi) {
    const double g = gammas[gi];
    const auto& S = m.measured[gi].partial_sums;
    const auto& P = m.predicted[gi].partial_sums;
    bool grow_ok = true, flat_ok = true, pred_ok = true;
    std::size_t compared = 0;
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    std::string ratios;
    for (std::size_t k = 0; k < S.size(); ++k) {
      const double ratio = k > 0 ? S[k] / S[k - 1] : kNaN;
      r.rows.push_back({static_cast<double>(k + 1), g, S[k], P[k], ratio, m.rescaled_times[k]});
      if (gi == 0) r.plot.push_back({static_cast<double>(k + 1), S[k], P[k] > 0 ? P[k] / factor : kNaN,
                                     P[k] > 0 ? P[k] * factor : kNaN});
      if (k > 0) ratios += (ratios.empty() ? "" : ", ") + detail::fmt(ratio);
      if (k >= 2) {
        grow_ok = grow_ok && ratio >= growth;
        flat_ok = flat_ok && std::abs(ratio - 1.0) <= plateau;
      }
      if (k > 0) grow_ok = grow_ok && S[k] > S[k - 1];
      if (P[k] > 0.0) {
        ++compared;
        lo = std::min(lo, S[k] / P[k]);
        hi = std::max(hi, S[k] / P[k]);
        pred_ok = pred_ok && S[k] <= factor * P[k] && S[k] >= P[k] / factor;
      }
    }
    const bool below = g < 1.0 - p;
    const std::string tag = "gamma=" + detail::fmt(g);
    if (below)
      r.add_verdict(tag + " grows geometrically", grow_ok && S.size() >= 3,
                    "successive ratios " + ratios + "; need >= " + detail::fmt(growth) + " beyond N=2",
                    S.size() >= 3);
    else
      r.add_verdict(tag + " plateaus", flat_ok && S.size() >= 3,
                    "successive ratios " + ratios + "; need within " + detail::fmt(plateau) + " of 1 beyond N=2",
                    S.size() >= 3);
    if (below)
      r.add_verdict(tag + " matches series prediction", pred_ok && compared > 0,
                    compared > 0 ? "measured/predicted in [" + detail::fmt(lo) + ", " + detail::fmt(hi) + "] over " +
                                       std::to_string(compared) + " sums, needs factor " + detail::fmt(factor)
                                 : "predicted partial sums are not positive at these N");
    r.diagnostics["C_bar[" + tag + "]"] = m.predicted[gi].C_bar;
  }
  if (gammas.size() >= 2 && !m.measured[0].partial_sums.empty())
    r.diagnostics["N1_baseline_ratio"] = m.measured[0].partial_sums[0] / m.measured[1].partial_sums[0];
  return r;
}

// ---------------------------------------------------------------- mixing bounds

struct MixingMeasurement {
  std::vector<double> times, hminus1, hminus1_coarse, eps, grad_integral;
  std::size_t window = 0;      // leading samples resolved in H^-1
  std::size_t eps_window = 0;  // leading samples with eps above the grid floor
  double B = 0.0;              // sup_t ||grad b_t||_p
  double eps_floor = 0.0;
  double eps0 = 0.0;           // initial scale; box/3 when unmixed at every probe
};

template <class B>
MixingMeasurement measure_mixing(const B& b, const InitialDatum& u, const std::vector<double>& times, double p,
                                 std::size_t n, double kappa, double ode_tol, double rel_tol) {
  MixingMeasurement m;
  m.times = times;
  const auto fine = advect(b, u.value, n, times, ode_tol);
  const auto coarse = advect(b, u.value, n / 2, times, ode_tol);
  const double unmixed = b.box() / 3.0;
  m.eps_floor = b.box() / static_cast<double>(n);
  bool resolved = true, above = true;
  for (std::size_t k = 0; k < times.size(); ++k) {
    m.hminus1.push_back(sobolev_neg_norm(to_spectrum(fine[k]), 1.0));
    m.hminus1_coarse.push_back(sobolev_neg_norm(to_spectrum(coarse[k]), 1.0));
    resolved = resolved && std::abs(m.hminus1[k] - m.hminus1_coarse[k]) <= rel_tol * m.hminus1[k];
    if (resolved) ++m.window;
    const auto e = geometric_mixing_scale(fine[k], kappa);
    m.eps.push_back(e ? *e : unmixed);
    above = above && m.eps.back() > m.eps_floor * (1.0 + 1e-12);
    if (above && resolved) ++m.eps_window;
    m.grad_integral.push_back(gradient_lp_integral(b, times[k], p, n));
  }
  m.eps0 = m.eps.front();
  m.B = gradient_lp_sup(b, times.back(), p, n);
  return m;
}

struct MixingConstants {
  double c = 0.0;        // rate per unit B t
  double C = 0.0;        // offset
  double geometric = 0.0;
  std::optional<double> bressan;
  double t_star = kNaN;
};

/// Constants that make each envelope touch the data: H^-1 from a line fit of
/// log(H/H0) over the resolved window, the geometric rate from the worst
/// sample, the Bressan constant from the first time eps reaches eps_target.
inline MixingConstants mixing_constants(const MixingMeasurement& m, double eps_target) {
  MixingConstants c;
  const double h0 = m.hminus1.front();
  if (m.B > 0.0 && m.window >= 2) {
    std::vector<double> t(m.times.begin(), m.times.begin() + static_cast<long>(m.window)), y;
    for (std::size_t k = 0; k < m.window; ++k) y.push_back(std::log(m.hminus1[k] / h0));
    c.c = std::max(0.0, -fit_line(t, y).slope / m.B);
  }
  for (std::size_t k = 0; k < m.window; ++k)
    c.C = std::max(c.C, -std::log(m.hminus1[k] / h0) - c.c * m.B * m.times[k]);
  for (std::size_t k = 0; k < m.eps_window; ++k)
    if (m.times[k] > 0.0 && m.B > 0.0)
      c.geometric = std::max(c.geometric, std::log(m.eps0 / m.eps[k]) / (m.B * m.times[k]));
  for (std::size_t k = 0; k < m.eps_window; ++k)
    if (m.eps[k] <= eps_target) {
      c.t_star = m.times[k];
      c.bressan = m.grad_integral[k] / std::abs(std::log(eps_target));
      break;
    }
  return c;
}

inline ExperimentReport run_mixing_bounds(const ExperimentConfig& cfg, const Calibration& cal) {
  require(cfg.experiment == Experiment::mixing_bounds, "run_mixing_bounds: wrong experiment");
  auto r = detail::new_report(cfg, cal);
  const AnyField field = make_field(cfg);
  const InitialDatum u = make_initial(cfg.initial, field_box(field), field_origin(field), cfg.field.cutoff_width);
  if (!u.bv) throw ConfigError("mixing-bounds needs initial data with values in {-1, 0, 1}");
  const auto m = std::visit(
      [&](const auto& b) {
        return measure_mixing(b, u, cfg.times, cfg.p, cfg.n, cfg.kappa, cfg.ode_tol, cal.threshold("window_rel_tol"));
      },
      field);
  const std::string kc = keyed("mixing_rate", "p", cfg.p), kC = keyed("mixing_offset", "p", cfg.p),
                    kg = keyed("mixing_geometric", "p", cfg.p), kb = keyed("bressan", "p", cfg.p);
  const double c = cal.constant(kc), C = cal.constant(kC), G = cal.constant(kg), Bc = cal.constant(kb);
  r.constants = {{kc, c}, {kC, C}, {kg, G}, {kb, Bc}};
  r.columns = {{"t", "time", "output time"},
               {"hminus1", "norm", "||u_t||_{H^-1}, grid n"},
               {"hminus1_coarse", "norm", "||u_t||_{H^-1}, grid n/2"},
               {"eps", "length", "geometric mixing scale at level kappa"},
               {"grad_integral", "W^{1,p} norm x time", "int_0^t ||grad b_s||_p ds"},
               {"hminus1_envelope", "norm", "H0 exp(-c B t - C)"},
               {"eps_envelope", "length", "eps0 exp(-C B t)"}};
  const double h0 = m.hminus1.front();
  bool h_ok = true, e_ok = true;
  for (std::size_t k = 0; k < m.times.size(); ++k) {
    const double henv = h0 * std::exp(-c * m.B * m.times[k] - C);
    const double eenv = m.eps0 * std::exp(-G * m.B * m.times[k]);
    r.rows.push_back({m.times[k], m.hminus1[k], m.hminus1_coarse[k], m.eps[k], m.grad_integral[k], henv, eenv});
    r.plot.push_back({m.times[k], m.hminus1[k], henv, kNaN});
    if (k < m.window) h_ok = h_ok && m.hminus1[k] >= henv * (1.0 - 1e-12);
    if (k < m.eps_window && m.times[k] > 0.0) e_ok = e_ok && m.eps[k] >= eenv * (1.0 - 1e-12);
  }
  r.diagnostics["B"] = m.B;
  r.diagnostics["window_samples"] = static_cast<double>(m.window);
  r.diagnostics["eps_window_samples"] = static_cast<double>(m.eps_window);
  r.diagnostics["eps_floor"] = m.eps_floor;
  if (m.eps_window < m.window) r.note = "mixing scale reached the grid floor; geometric window truncated";
  const auto fitted = mixing_constants(m, cfg.eps_target);
  if (m.window >= 3 && m.B > 0.0) {
    std::vector<double> t(m.times.begin(), m.times.begin() + static_cast<long>(m.window)), y;
    for (std::size_t k = 0; k < m.window; ++k) y.push_back(std::log(m.hminus1[k]));
    const auto f = fit_line(t, y);
    r.fits.push_back({"hminus1_rate", -f.slope, f.slope_stderr, f.r2, f.points});
  }
  std::vector<double> te, ye;
  for (std::size_t k = 0; k < m.eps_window; ++k) {
    te.push_back(m.times[k]);
    ye.push_back(std::log(m.eps[k]));
  }
  if (te.size() >= 3 && te.front() != te.back()) {
    const auto f = fit_line(te, ye);
    r.fits.push_back({"eps_rate", -f.slope, f.slope_stderr, f.r2, f.points});
  }
  r.add_verdict("H^-1 envelope", h_ok,
                "log(H/H0) >= -c B t - C over " + std::to_string(m.window) + " resolved samples, B = " +
                    detail::fmt(m.B));
  r.add_verdict("geometric envelope", e_ok,
                "log(eps/eps0) >= -C B t over " + std::to_string(m.eps_window) + " samples");
  if (fitted.bressan) {
    r.diagnostics["t_star"] = fitted.t_star;
    r.diagnostics["bressan_measured"] = *fitted.bressan;
    r.add_verdict("Bressan cost", *fitted.bressan >= Bc,
                  "int_0^t* ||grad b||_p / |log eps_target| = " + detail::fmt(*fitted.bressan) + " at t* = " +
                      detail::fmt(fitted.t_star) + ", needs " + detail::fmt(Bc));
  } else {
    r.add_verdict("Bressan cost", true, "eps never reached the target inside the window", false);
  }
  return r;
}

// ---------------------------------------------------------------- Lusin-Lipschitz

struct LusinMeasurement {
  double pass_flow = 0.0;      // two-sided flow-map bound
  double min_scale = 0.0;      // multiplier on g needed for the target rate
  double pass_solution = 0.0;  // |u_t(x) - u_t(y)| <= |x - y| exp(gt(x) + gt(y))
  double gtilde_p = 0.0;       // ||gt||_p on the closure grid
  double budget = 0.0;         // int ||grad b||_p + |u0|_BV
  double grad_integral = 0.0;
  double bv = 0.0;
  bool key_precondition = true;
  double key_ratio = 0.0;
  std::string key_detail;
  std::size_t seeds = 0;
};

namespace detail {

// Pairs of seeds: half uniform, half lattice neighbours.
inline double lagrangian_pass_rate(const std::vector<double>& values, const std::vector<Vec2>& pos,
                                   const std::vector<double>& gt, double box, std::size_t side,
                                   std::size_t n_pairs, std::uint64_t seed) {
  const std::size_t m = values.size();
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, m - 1);
  std::uniform_int_distribution<long> near(-4, 4);
  std::size_t pass = 0, total = 0;
  for (std::size_t k = 0; k < n_pairs; ++k) {
    const std::size_t a = pick(rng);
    std::size_t c;
    if (k % 2 == 1) {
      const long s = static_cast<long>(side), i = static_cast<long>(a / side), j = static_cast<long>(a % side);
      c = static_cast<std::size_t>(((i + near(rng)) % s + s) % s) * side +
          static_cast<std::size_t>(((j + near(rng)) % s + s) % s);
    } else {
      c = pick(rng);
    }
    if (c == a) continue;
    ++total;
    const double d = periodic_distance(pos[a], pos[c], box);
    if (std::abs(values[a] - values[c]) <= d * std::exp(gt[a] + gt[c]) + 1e-12) ++pass;
  }
  return total ? static_cast<double>(pass) / static_cast<double>(total) : 1.0;
}

}  // namespace detail

/// Builds g_t along forward trajectories of an n_seed lattice and
/// gt = 2 g + 2 log max(C_d M|D u0|, 1) at the Lagrangian points; then
/// rebuilds gt on an Eulerian grid (nodes traced back to time 0) and hands
/// (u_t, gt) to the key-lemma check.
template <class B>
LusinMeasurement measure_lusin(const B& b, const InitialDatum& u, double t, double p, std::size_t n_seed,
                               std::size_t n_grid, std::size_t n_closure, double Cd, std::size_t n_pairs,
                               std::size_t quad_steps, double ode_tol, std::uint64_t seed) {
  LusinMeasurement m;
  const double L = b.box();
  const Vec2 o = b.origin();
  auto seeds = lattice_seeds(n_seed, L, o);
  m.seeds = seeds.size();
  const FlowMap flow = trace(b, seeds, 0.0, t, ode_tol, quad_steps);
  const LusinWitness w = lusin_witness(b, flow, quad_steps, Cd, n_grid, ode_tol);
  const auto rep = check_lusin_bilipschitz(flow, w, n_pairs, seed, 0.999);
  m.pass_flow = rep.pass_rate;
  m.min_scale = rep.min_scale;

  const GridField u0 = sample_initial(u, n_seed, L, o);
  const GridField M = maximal_function(detail::difference_gradient(u0));
  std::vector<double> gt(seeds.size()), vals(seeds.size());
  for (std::size_t k = 0; k < seeds.size(); ++k) {
    vals[k] = u0.values()[k];
    gt[k] = 2.0 * w.g_values[k] + 2.0 * std::log(std::max(Cd * M.values()[k], 1.0));
  }
  m.pass_solution = detail::lagrangian_pass_rate(vals, flow.positions, gt, L, n_seed, n_pairs, seed + 1);

  // Eulerian closure grid.
  const BilinearSampler G(GridField(n_seed, L, w.g_values, o)), MS(M);
  const auto back = trace(b, lattice_seeds(n_closure, L, o), t, 0.0, ode_tol);
  std::vector<double> ut(back.positions.size()), gg(back.positions.size());
  for (std::size_t k = 0; k < ut.size(); ++k) {
    const Vec2 y = back.positions[k];
    ut[k] = u.value(y);
    gg[k] = 2.0 * G(y) + 2.0 * std::log(std::max(Cd * MS(y), 1.0));
  }
  const GridField uf(n_closure, L, std::move(ut), o), gf(n_closure, L, std::move(gg), o);
  m.gtilde_p = lp_norm(gf, p);
  m.grad_integral = gradient_lp_integral(b, t, p, n_grid);
  m.bv = bv_seminorm(sample_initial(u, n_closure, L, o));
  m.budget = m.grad_integral + m.bv;
  try {
    const auto kl = check_key_lemma(uf, gf, std::max(p, 1.0), seed);
    m.key_ratio = kl.ratio;
    m.key_detail = "lhs " + detail::fmt(kl.lhs) + ", ||gt||_p^p " + detail::fmt(kl.g_norm_pp) + ", ||u||_1 " +
                   detail::fmt(kl.f_l1);
  } catch (const PreconditionError& e) {
    m.key_precondition = false;
    m.key_detail = e.what();
  }
  return m;
}

inline ExperimentReport run_lusin_verify(const ExperimentConfig& cfg, const Calibration& cal) {
  require(cfg.experiment == Experiment::lusin_verify, "run_lusin_verify: wrong experiment");
  auto r = detail::new_report(cfg, cal);
  const AnyField field = make_field(cfg);
  const InitialDatum u = make_initial(cfg.initial, field_box(field), field_origin(field), cfg.field.cutoff_width);
  const double Cd = cal.constant("lusin_Cd");
  const std::string kg = keyed("lusin_gtilde", "p", cfg.p), kk = keyed("key_lemma", "p", std::max(cfg.p, 1.0));
  const double Cg = cal.constant(kg), Ck = cal.constant(kk);
  r.constants = {{"lusin_Cd", Cd}, {kg, Cg}, {kk, Ck}};
  const double t = cfg.times.back();
  const bool patched = cfg.field.kind == "patched";
  const std::size_t n_seed = std::min<std::size_t>(cfg.n, 256);
  const std::size_t n_grid = std::min<std::size_t>(cfg.n, 1024);
  const std::size_t n_closure = std::min<std::size_t>(cfg.n, 256);
  if (patched) require_composite_resolution(std::get<PatchedVelocity>(field).schedule(), cfg.n);
  const auto m = std::visit(
      [&](const auto& b) {
        return measure_lusin(b, u, t, cfg.p, n_seed, n_grid, n_closure, Cd, cfg.n_pairs, cfg.quad_steps,
                             cfg.ode_tol, cfg.seed);
      },
      field);
  const double target = cal.threshold(patched || !u.smooth ? "lusin_pass_patched" : "lusin_pass_smooth");
  r.columns = {{"t", "time", "evaluation time"},
               {"pass_flow", "fraction", "pairs within exp(+-(g(x)+g(y)))"},
               {"pass_solution", "fraction", "pairs with |u_t(x)-u_t(y)| <= |x-y| exp(gt(x)+gt(y))"},
               {"gtilde_p", "norm", "||gt||_p"},
               {"budget", "W^{1,p} norm x time", "int ||grad b||_p + |u0|_BV"},
               {"key_ratio", "1", "capped functional / (||gt||_p^p + ||u_t||_1)"}};
  r.rows.push_back({t, m.pass_flow, m.pass_solution, m.gtilde_p, m.budget, m.key_ratio});
  r.plot.push_back({t, m.gtilde_p, kNaN, Cg * m.budget});
  r.diagnostics["min_scale"] = m.min_scale;
  r.diagnostics["seeds"] = static_cast<double>(m.seeds);
  r.diagnostics["grad_integral"] = m.grad_integral;
  r.diagnostics["bv_seminorm"] = m.bv;
  r.add_verdict("flow-map pair bound", m.pass_flow >= target,
                "pass rate " + detail::fmt(m.pass_flow) + ", needs " + detail::fmt(target));
  r.add_verdict("solution pair bound", m.pass_solution >= target,
                "pass rate " + detail::fmt(m.pass_solution) + ", needs " + detail::fmt(target));
  r.add_verdict("||gt||_p <= C budget", m.gtilde_p <= Cg * m.budget * (1.0 + 1e-12) || m.budget == 0.0,
                detail::fmt(m.gtilde_p) + " against " + detail::fmt(Cg * m.budget));
  r.add_verdict("key lemma", m.key_precondition && m.key_ratio <= Ck,
                (m.key_precondition ? "ratio " + detail::fmt(m.key_ratio) + " against C = " + detail::fmt(Ck) + "; "
                                    : std::string("pair precondition failed: ")) +
                    m.key_detail);
  return r;
}

// ---------------------------------------------------------------- interpolation sweep

struct InterpolationMeasurement {
  std::vector<std::string> names;
  std::vector<std::vector<double>> interp;      // [field][gamma] constant, NaN when vacuous
  std::vector<std::vector<double>> log_interp;  // [field][gamma] ratio, NaN when vacuous
  std::map<std::string, double> worst;          // keyed constants
};

inline InterpolationMeasurement measure_interpolation(const std::vector<CorpusField>& corpus,
                                                      const std::vector<double>& gammas, double lambda,
                                                      double delta, std::size_t shells, std::size_t angles) {
  InterpolationMeasurement m;
  for (double g : gammas) {
    m.worst[keyed("interpolation", "gamma", g)] = 0.0;
    m.worst[keyed("log_interpolation", "gamma", g)] = 0.0;
  }
  for (const auto& c : corpus) {
    m.names.push_back(c.name);
    std::vector<double> a, b;
    for (double g : gammas) {
      const auto ri = check_interpolation(c.f, g, lambda, delta, shells, angles);
      const auto rl = check_log_interpolation(c.f, g, shells, angles);
      a.push_back(ri.l2_sq > 0.0 ? ri.constant : kNaN);
      b.push_back(rl.l2 > 0.0 ? rl.ratio : kNaN);
      if (std::isfinite(a.back()))
        m.worst[keyed("interpolation", "gamma", g)] = std::max(m.worst[keyed("interpolation", "gamma", g)], a.back());
      if (std::isfinite(b.back()))
        m.worst[keyed("log_interpolation", "gamma", g)] =
            std::max(m.worst[keyed("log_interpolation", "gamma", g)], b.back());
    }
    m.interp.push_back(a);
    m.log_interp.push_back(b);
  }
  return m;
}

inline ExperimentReport run_interpolation_sweep(const ExperimentConfig& cfg, const Calibration& cal) {
  require(cfg.experiment == Experiment::interpolation_sweep, "run_interpolation_sweep: wrong experiment");
  auto r = detail::new_report(cfg, cal);
  std::vector<double> gammas = cfg.gammas;
  if (gammas.empty()) gammas = {0.0, -0.5, -1.0};
  const auto corpus = field_corpus(cfg.corpus_size, cfg.seed, cfg.n);
  const auto m = measure_interpolation(corpus, gammas, cal.threshold("interpolation_lambda"),
                                       cal.threshold("interpolation_delta"), cfg.shells, cfg.angles);
  r.columns = {{"field", "index", "corpus member"}};
  for (double g : gammas) {
    r.columns.push_back({"interp[gamma=" + detail::fmt(g) + "]", "1", "||f||^2 / interpolation right side"});
    r.columns.push_back({"log_interp[gamma=" + detail::fmt(g) + "]", "1", "log-form interpolation left / right"});
  }
  for (std::size_t k = 0; k < corpus.size(); ++k) {
    std::vector<double> row{static_cast<double>(k)};
    for (std::size_t gi = 0; gi < gammas.size(); ++gi) {
      row.push_back(m.interp[k][gi]);
      row.push_back(m.log_interp[k][gi]);
    }
    r.rows.push_back(row);
  }
  for (const auto& [key, worst] : m.worst) {
    const double C = cal.constant(key);
    r.constants[key] = C;
    r.diagnostics["worst " + key] = worst;
    r.add_verdict(key + " holds on corpus", worst <= C,
                  "worst ratio " + detail::fmt(worst) + " against C = " + detail::fmt(C));
  }
  for (std::size_t k = 0; k < corpus.size(); ++k)
    r.plot.push_back({static_cast<double>(k), m.log_interp[k][0], kNaN,
                      cal.constant(keyed("log_interpolation", "gamma", gammas[0]))});
  r.note = "corpus: " + std::to_string(corpus.size()) + " fields (band-limited, single mode, zero, evolved block)";
  return r;
}

// ---------------------------------------------------------------- dispatch

/// Runs one experiment. A resolution failure yields a report with the guard
/// flag set (exit code 3) instead of an exception.
inline ExperimentReport run_experiment(const ExperimentConfig& cfg, const Calibration& cal) {
  try {
    switch (cfg.experiment) {
      case Experiment::regularity_growth: return run_regularity_growth(cfg, cal);
      case Experiment::sharpness_poly: return run_sharpness_poly(cfg, cal);
      case Experiment::sharpness_divergence: return run_sharpness_divergence(cfg, cal);
      case Experiment::mixing_bounds: return run_mixing_bounds(cfg, cal);
      case Experiment::lusin_verify: return run_lusin_verify(cfg, cal);
      case Experiment::interpolation_sweep: return run_interpolation_sweep(cfg, cal);
    }
  } catch (const ResolutionError& e) {
    auto r = detail::new_report(cfg, cal);
    r.resolution_guard = true;
    r.note = e.what();
    return r;
  }
  throw PreconditionError("run_experiment: unknown experiment");
}

}  // namespace loglab
