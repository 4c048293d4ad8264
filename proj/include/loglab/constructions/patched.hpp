#pragma once

// Superposition of rescaled building blocks on disjoint cubes: the field
// b = sum_n (lambda_n / tau_n) v(t / tau_n, (x - x_n) / lambda_n) and the
// solution u = sum_n gamma_n rho(t / tau_n, (x - x_n) / lambda_n).

#include <cmath>
#include <cstdint>
#include <vector>

#include "loglab/constructions/building_block.hpp"
#include "loglab/constructions/schedule.hpp"
#include "loglab/functionals/log_sobolev.hpp"

namespace loglab {

class PatchedVelocity {
 public:
  PatchedVelocity(ScheduleN s, const BuildingBlock& bb)
      : s_(std::move(s)), bb_(bb), v_(bb), T_(bb.switch_period) {
    validate_schedule(s_);
  }

  const ScheduleN& schedule() const { return s_; }
  const BlockVelocity& block() const { return v_; }
  const BuildingBlock& building_block() const { return bb_; }

  Vec2 velocity(double t, Vec2 x) const {
    Local l;
    if (!locate(x, l)) return {};
    const double s = t / l.tau;
    return (l.lambda / l.tau) * v_.eval(v_.phase(s), l.y, nullptr);
  }

  Mat2 gradient(double t, Vec2 x) const {
    Local l;
    if (!locate(x, l)) return {};
    Mat2 g;
    v_.eval(v_.phase(t / l.tau), l.y, &g);
    const double k = 1.0 / l.tau;
    return {k * g.a11, k * g.a12, k * g.a21, k * g.a22};
  }

  double stiffness(double t, Vec2 x) const {
    Local l;
    if (!locate(x, l)) return 0.0;
    return v_.stiffness(t / l.tau, l.y) / l.tau;
  }

  bool smooth_at(double t, Vec2 x) const {
    Local l;
    return !locate(x, l) || v_.smooth_at(t / l.tau, l.y);
  }

  bool divergence_free() const { return true; }
  double box() const { return s_.box; }
  Vec2 origin() const { return s_.origin; }

  /// Each block switches on its own clock tau_n T_sw; particles never leave
  /// the cell they start in, so the block at x sets the scale.
  double time_scale(Vec2 x) const {
    Local l;
    return locate(x, l) ? l.tau * T_ : kNoTimeScale;
  }

  /// Bit n-1 holds the phase of block n.
  std::uint64_t snapshot_key(double t) const {
    std::uint64_t key = 0;
    for (int n = 1; n <= s_.N; ++n)
      key |= static_cast<std::uint64_t>(v_.phase(t / s_.tau_n(n))) << (n - 1);
    return key;
  }

  void breakpoints(Vec2 x, double t0, double t1, std::vector<double>& out) const {
    Local l;
    if (!locate(x, l)) return;
    const double P = l.tau * T_;
    const double lo = std::min(t0, t1), hi = std::max(t0, t1);
    for (double k = std::floor(lo / P) + 1.0; k * P < hi; k += 1.0) out.push_back(k * P);
  }

 private:
  struct Local {
    Vec2 y;
    double lambda = 1.0, tau = 1.0;
  };

  bool locate(Vec2 x, Local& l) const {
    const Vec2 w{wrap(x.x, s_.origin.x, s_.box), wrap(x.y, s_.origin.y, s_.box)};
    const int n = s_.block_at(w);
    if (n == 0) return false;
    l.lambda = s_.lambda_n(n);
    l.tau = s_.tau_n(n);
    l.y = (w - s_.center(n)) / l.lambda;
    return true;
  }

  ScheduleN s_;
  BuildingBlock bb_;
  BlockVelocity v_;
  double T_;
};

inline PatchedVelocity patched_field(const ScheduleN& s, const BuildingBlock& bb) {
  return PatchedVelocity(s, bb);
}

/// ||b_t||_p^p and ||grad b_t||_p^p from the per-block norms and the scaling
/// exponents: sum_n (lambda_n/tau_n)^p lambda_n^d ||v||_p^p and
/// sum_n lambda_n^d tau_n^{-p} ||grad v||_p^p = sum_n ||grad v||_p^p / n^2.
inline BlockNorms patched_lp_norms(const ScheduleN& s, const BuildingBlock& bb, double t, double p,
                                   std::size_t n_block = 256) {
  const BlockVelocity v(bb);
  BlockNorms r;
  for (int n = 1; n <= s.N; ++n) {
    const double lam = s.lambda_n(n), tau = s.tau_n(n);
    const BlockNorms b = block_lp_norms(v, t / tau, p, n_block);
    const double vol = std::pow(lam, s.d);
    r.value_pp += std::pow(lam / tau, p) * vol * b.value_pp;
    r.gradient_pp += vol * std::pow(tau, -p) * b.gradient_pp;
  }
  return r;
}

/// Same norms by midpoint sums of the patched field on the composite grid.
inline BlockNorms sampled_lp_norms(const PatchedVelocity& b, double t, double p, std::size_t n) {
  const double h = b.box() / static_cast<double>(n);
  BlockNorms r;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const Vec2 x{b.origin().x + h * (static_cast<double>(i) + 0.5),
                   b.origin().y + h * (static_cast<double>(j) + 0.5)};
      if (b.schedule().block_at(x) == 0) continue;
      r.value_pp += std::pow(norm(b.velocity(t, x)), p);
      r.gradient_pp += std::pow(frobenius(b.gradient(t, x)), p);
    }
  r.value_pp *= h * h;
  r.gradient_pp *= h * h;
  return r;
}

/// Samples across the smallest cube on an n x n composite grid.
inline double samples_across_smallest_cube(const ScheduleN& s, std::size_t n) {
  return 3.0 * s.lambda_n(s.N) * static_cast<double>(n) / s.box;
}

inline void require_composite_resolution(const ScheduleN& s, std::size_t n) {
  const double k = samples_across_smallest_cube(s, n);
  if (k < 64.0)
    throw ResolutionError("composite grid n=" + std::to_string(n) + " puts " + std::to_string(k) +
                          " samples across cube " + std::to_string(s.N) + " (need 64)");
}

/// Y_t(x): x traced back to time 0 under the patched field. Inside the cell
/// of block n the trace runs in unit coordinates over s = t / tau_n; outside
/// every cell the field vanishes and Y_t(x) = x.
inline Vec2 patched_pullback(const ScheduleN& s, const BlockVelocity& v, double t, Vec2 x,
                             double ode_tol = 1e-8) {
  const Vec2 w{wrap(x.x, s.origin.x, s.box), wrap(x.y, s.origin.y, s.box)};
  const int k = s.block_at(w);
  if (k == 0) return x;
  const Vec2 y = (w - s.center(k)) / s.lambda_n(k);
  const std::vector<double> none;
  const Vec2 y0 = trace_particle(v, y, t / s.tau_n(k), 0.0, ode_tol, none, [](std::size_t, Vec2) {});
  return s.center(k) + s.lambda_n(k) * y0;
}

struct PatchedSolution {
  GridField total;
  std::vector<GridField> parts;  // one per block, same grid; empty unless requested
};

/// u_t on the composite grid. A node in the cell of block n is traced back
/// in unit coordinates to s = t / tau_n, which equals tracing the patched
/// field back to 0 in physical coordinates.
inline PatchedSolution patched_solution_parts(const ScheduleN& s, const BuildingBlock& bb, double t,
                                              std::size_t n, double ode_tol = 1e-8,
                                              bool keep_parts = false) {
  require(t >= 0.0, "patched_solution: t must be nonnegative");
  require_composite_resolution(s, n);
  const BlockVelocity v(bb);
  const GridField like(n, s.box, s.origin);
  std::vector<double> total(n * n, 0.0);
  std::vector<std::vector<double>> parts;
  if (keep_parts) parts.assign(static_cast<std::size_t>(s.N), std::vector<double>(n * n, 0.0));
  const std::vector<double> none;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const Vec2 x = like.node(i, j);
      const int k = s.block_at(x);
      if (k == 0) continue;
      const Vec2 y = (x - s.center(k)) / s.lambda_n(k);
      const Vec2 y0 = trace_particle(v, y, t / s.tau_n(k), 0.0, ode_tol, none, [](std::size_t, Vec2) {});
      const double val = s.gamma_n(k) * bb.rho0(y0);
      total[i * n + j] = val;
      if (keep_parts) parts[static_cast<std::size_t>(k - 1)][i * n + j] = val;
    }
  PatchedSolution out{GridField(n, s.box, std::move(total), s.origin), {}};
  for (auto& p : parts) out.parts.emplace_back(n, s.box, std::move(p), s.origin);
  return out;
}

inline GridField patched_solution(const ScheduleN& s, const BuildingBlock& bb, double t, std::size_t n,
                                  double ode_tol = 1e-8) {
  return patched_solution_parts(s, bb, t, n, ode_tol).total;
}

/// Lower-bound terms of the divergent series at time t.
struct SeriesTerms {
  std::vector<double> terms;
  std::vector<double> partial_sums;
  double C_bar = 0.0;
  bool diverges = false;  // gamma + p - 1 < 0
};

/// gamma_n^2 lambda_n^d (C_bar t^{1-gamma} tau_n^{gamma-1} - 4 ||rho0||^2 |log lambda_n|^{1-gamma} / (1-gamma)),
/// with C_bar = 4 pi ||rho0||^2 c^{1-gamma} / (1-gamma): the weighted
/// integral of a datum mixed down to scale e^{-c s}, to leading order in s.
inline SeriesTerms divergence_series_terms(const ScheduleN& s, double gamma, double t, double c_hat,
                                           double rho0_l2) {
  require(gamma < 1.0, "divergence_series_terms: gamma must be < 1");
  SeriesTerms r;
  const double e = 1.0 - gamma;
  r.C_bar = 2.0 * kTwoPi * rho0_l2 * rho0_l2 * std::pow(c_hat, e) / e;
  r.diverges = gamma + s.p - 1.0 < 0.0;
  double acc = 0.0;
  for (int n = 1; n <= s.N; ++n) {
    const double g = s.gamma_n(n), lam = s.lambda_n(n);
    const double w = g * g * std::pow(lam, s.d);
    const double main = r.C_bar * std::pow(t, e) * std::pow(s.tau_n(n), -e);
    const double corr = 4.0 * rho0_l2 * rho0_l2 / e * std::pow(std::abs(std::log(lam)), e);
    r.terms.push_back(w * (main - corr));
    acc += r.terms.back();
    r.partial_sums.push_back(acc);
  }
  return r;
}

/// gamma-weighted integral of one rescaled block, in unit coordinates:
///   int_{|k| < 1/(3 lambda)} int |rho(y+k) - rho(y)|^2 / (|k|^2 |log(lambda |k|)|^gamma).
/// rho lives on the unit cell; it is zero-padded into a box of side 4 so
/// periodic shifts up to |k| = 3 see free space. Beyond that the supports
/// are disjoint and the increment is exactly 2 ||rho||^2, integrated in
/// closed form.
inline double scaled_block_functional(const GridField& rho, double gamma, double lambda,
                                      std::size_t shells = 64, std::size_t angles = 32) {
  require(gamma < 1.0, "scaled_block_functional: gamma must be < 1");
  require(lambda > 0.0 && lambda < 1.0, "scaled_block_functional: lambda must lie in (0, 1)");
  require(rho.box() == 1.0, "scaled_block_functional: expects a unit-cell field");
  const std::size_t n = rho.n(), m = 4 * n;
  std::vector<double> pad(m * m, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) pad[i * m + j] = rho(i, j);
  const GridField big(m, 4.0, std::move(pad), rho.origin());
  const IncrementEvaluator ev(big);
  const double r_far = 1.0 / (3.0 * lambda);
  const double r_num = std::min(r_far, 3.0);
  const auto q = HQuadrature::make(rho.spacing(), r_num, shells, angles);
  double total = delta_scaled_functional(ev, gamma, lambda, q);
  if (r_far > r_num) {
    const double e = 1.0 - gamma;
    const double u0 = std::abs(std::log(lambda * r_num)), u1 = std::abs(std::log(lambda * r_far));
    total += 2.0 * ev.l2_squared() * kTwoPi * (std::pow(u0, e) - std::pow(u1, e)) / e;
  }
  return total;
}

struct BlockDiagonal {
  std::vector<double> contributions;  // gamma_n^2 lambda_n^d times the unit-cell integral
  std::vector<double> partial_sums;
  std::vector<double> rescaled_times;
};

/// Functional of the truncated solution evaluated block by block on unit
/// cell grids of side n_block. Cross terms between blocks are dropped.
inline BlockDiagonal block_diagonal_functional(const ScheduleN& s, const BuildingBlock& bb,
                                               double gamma, double t, std::size_t n_block,
                                               double ode_tol = 1e-8, std::size_t shells = 64,
                                               std::size_t angles = 32,
                                               const std::vector<GridField>* evolved = nullptr) {
  require(n_block >= 64, "block_diagonal_functional: need 64 samples across each block");
  BlockDiagonal r;
  double acc = 0.0;
  for (int n = 1; n <= s.N; ++n) {
    const double sn = t / s.tau_n(n);
    r.rescaled_times.push_back(sn);
    const GridField rho = evolved ? evolved->at(static_cast<std::size_t>(n - 1))
                                  : evolve_block(bb, sn, n_block, ode_tol);
    const double g = s.gamma_n(n), lam = s.lambda_n(n);
    const double c = g * g * std::pow(lam, s.d) * scaled_block_functional(rho, gamma, lam, shells, angles);
    r.contributions.push_back(c);
    acc += c;
    r.partial_sums.push_back(acc);
  }
  return r;
}

}  // namespace loglab
