#pragma once

// Measured exponential mixing of the building block: H^-1 norms of the
// advected datum at multiples of the flow period, compared between a grid and
// its half to find where the grid stops resolving the decay.

#include <cmath>
#include <vector>

#include "loglab/constructions/building_block.hpp"
#include "loglab/core/fit.hpp"
#include "loglab/flow/solve_ce.hpp"

namespace loglab {

struct DecaySeries {
  std::size_t n = 0;
  std::vector<double> times;
  std::vector<double> hminus1;
  std::vector<double> l2;
  std::vector<double> mean;  // quadrature mean of the samples; zero in exact arithmetic
};

/// 0, P, 2P, ... up to t_max, P = 2 T_sw. Sampling once per period keeps the
/// two shear phases from imprinting a staircase on the series.
inline std::vector<double> stroboscopic_times(const BuildingBlock& bb, double t_max) {
  require(t_max >= 0.0, "stroboscopic_times: t_max must be nonnegative");
  const double P = 2.0 * bb.switch_period;
  std::vector<double> t;
  for (double k = 0.0; k * P <= t_max * (1.0 + 1e-12); k += 1.0) t.push_back(k * P);
  return t;
}

/// Evolves rho0 on an n x n unit-cell grid and records the H^-1 norm at
/// each time. The norm ignores the zero mode: the samples carry a small
/// quadrature mean that the exact solution does not have.
inline DecaySeries block_decay_series(const BuildingBlock& bb, const std::vector<double>& times,
                                      std::size_t n, double ode_tol = 1e-8,
                                      std::vector<GridField>* keep = nullptr) {
  const BlockVelocity v(bb);
  const GridField like(n, 1.0, Vec2{-0.5, -0.5});
  auto fields = solve_ce_series(v, [&](Vec2 y) { return bb.rho0(y); }, like, times, ode_tol);
  DecaySeries s;
  s.n = n;
  s.times = times;
  for (const auto& u : fields) {
    s.hminus1.push_back(sobolev_neg_norm(to_spectrum(u), 1.0));
    s.l2.push_back(lp_norm(u, 2.0));
    s.mean.push_back(u.mean());
  }
  if (keep) *keep = std::move(fields);
  return s;
}

/// Number of leading samples before the fine and coarse runs part ways by
/// more than rel_tol (relative to the fine value).
inline std::size_t resolved_count(const DecaySeries& fine, const DecaySeries& coarse,
                                  double rel_tol = 0.1) {
  require(fine.times.size() <= coarse.times.size(), "resolved_count: coarse series too short");
  std::size_t k = 0;
  for (; k < fine.times.size(); ++k) {
    require(fine.times[k] == coarse.times[k], "resolved_count: series sampled at different times");
    if (std::abs(fine.hminus1[k] - coarse.hminus1[k]) > rel_tol * fine.hminus1[k]) break;
  }
  return k;
}

struct BlockDecay {
  double C = 0.0;      // prefactor, exp(intercept)
  double c_hat = 0.0;  // fitted rate, ||rho_t||_{H^-1} ~ C exp(-c_hat t)
  double r2 = 0.0;
  double c_hat_stderr = 0.0;
  std::size_t window = 0;  // samples used
  double t_window = 0.0;   // last fitted time
  DecaySeries fine;
  DecaySeries coarse;
};

/// Least-squares fit of log ||rho_t||_{H^-1} against t over the first
/// `window` samples.
inline BlockDecay fit_decay(const DecaySeries& s, std::size_t window) {
  require(window >= 3 && window <= s.times.size(),
          "fit_decay: decay floor reached immediately (grid too coarse)");
  std::vector<double> y;
  for (std::size_t k = 0; k < window; ++k) y.push_back(std::log(s.hminus1[k]));
  const LinearFit f =
      fit_line(std::span<const double>(s.times.data(), window), std::span<const double>(y));
  BlockDecay d;
  d.C = std::exp(f.intercept);
  d.c_hat = -f.slope;
  d.r2 = f.r2;
  d.c_hat_stderr = f.slope_stderr;
  d.window = window;
  d.t_window = s.times[window - 1];
  d.fine = s;
  return d;
}

/// Decay fit on the window where the n grid and the n/2 grid agree.
inline BlockDecay fit_block_decay(const DecaySeries& fine, const DecaySeries& coarse,
                                  double rel_tol = 0.1) {
  const std::size_t w = resolved_count(fine, coarse, rel_tol);
  if (w < 3)
    throw ResolutionError("measure_block_decay: decay floor reached immediately (grid too coarse)");
  BlockDecay d = fit_decay(fine, w);
  d.coarse = coarse;
  return d;
}

inline BlockDecay measure_block_decay(const BuildingBlock& bb, double t_max, std::size_t n,
                                      double ode_tol = 1e-8) {
  require(n >= 16, "measure_block_decay: grid too small");
  const auto times = stroboscopic_times(bb, t_max);
  return fit_block_decay(block_decay_series(bb, times, n, ode_tol),
                         block_decay_series(bb, times, n / 2, ode_tol));
}

}  // namespace loglab
