#pragma once

// Numerical verifiers for the interpolation inequalities, the key lemma and
// the disjoint-support lower bound. Each returns every term separately so the
// caller can calibrate the implicit constant.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "loglab/functionals/log_sobolev.hpp"

namespace loglab {

struct InterpolationReport {
  double l2_sq = 0.0;         // left side, ||f||_2^2
  double functional = 0.0;    // delta-scaled integral over B_{1/(5 delta)}
  double log_factor = 0.0;    // |log(delta lambda)|^{1-gamma}
  double hminus1 = 0.0;       // ||f||_{H^-1}
  double scaled_term = 0.0;   // functional / log_factor
  double spectral_term = 0.0; // |log lambda| ||f||^2 / log(2 + ||f|| / ||f||_{H^-1})
  double rhs = 0.0;
  double constant = 1.0;      // smallest C with lhs <= C rhs
};

/// Evaluates both sides of the interpolation inequality for mean-zero f.
inline InterpolationReport check_interpolation(const GridField& f, double gamma, double lambda,
                                               double delta, std::size_t shells = 64,
                                               std::size_t angles = 32) {
  require(gamma < 1.0, "check_interpolation: gamma must be < 1");
  require(lambda > 0.0 && lambda < 0.01, "check_interpolation: lambda must lie in (0, 1/100)");
  require(delta > 0.0 && delta <= 1.0, "check_interpolation: delta must lie in (0, 1]");
  InterpolationReport r;
  r.hminus1 = sobolev_neg_norm(f, 1.0);
  const IncrementEvaluator ev(f);
  r.l2_sq = ev.l2_squared();
  if (r.l2_sq == 0.0) return r;
  const auto q = HQuadrature::make(f.spacing(), std::min(1.0 / (5.0 * delta), 1.0 / 3.0), shells,
                                   angles);
  r.functional = delta_scaled_functional(ev, gamma, delta, q);
  r.log_factor = std::pow(std::abs(std::log(delta * lambda)), 1.0 - gamma);
  r.scaled_term = r.functional / r.log_factor;
  const double l2 = std::sqrt(r.l2_sq);
  r.spectral_term = std::abs(std::log(lambda)) * r.l2_sq / std::log(2.0 + l2 / r.hminus1);
  r.rhs = r.scaled_term + r.spectral_term;
  r.constant = r.l2_sq / r.rhs;
  return r;
}

/// The spectral bound sum |fhat|^2 / log(2 + |k|) <= 2 ||f||^2 / log(2 + ||f|| / ||f||_{H^-1}).
struct SpectralLogBound {
  double lhs = 0.0;
  double rhs = 0.0;
};

inline SpectralLogBound check_spectral_log_bound(const GridField& f) {
  const Spectrum s = to_spectrum(f);
  SpectralLogBound b;
  double l2 = 0.0;
  for (std::size_t k1 = 0; k1 < s.n; ++k1)
    for (std::size_t k2 = 0; k2 < s.n; ++k2) {
      const double c = std::norm(s.coeffs[k1 * s.n + k2]);
      b.lhs += c / std::log(2.0 + wavenumber(k1, k2, s.n, s.box));
      l2 += c;
    }
  const double area = s.box * s.box;
  b.lhs *= area;
  l2 *= area;
  if (l2 == 0.0) return b;
  const double h1 = sobolev_neg_norm(f, 1.0);
  b.rhs = 2.0 * l2 / std::log(2.0 + std::sqrt(l2) / h1);
  return b;
}

/// Both sides of the logarithmic interpolation bound
///   log(2 + ||f|| / ||f||_{H^-1})^{1-gamma} ||f||^2 <~ int_{B_{1/5}} ... log(1/|h|)^{-gamma}.
/// The left side carries ||f||^2 so both sides are quadratic in f.
struct LogInterpolationReport {
  double l2 = 0.0;
  double hminus1 = 0.0;
  double lhs = 0.0;
  double rhs = 0.0;
  double ratio = 0.0;  // lhs / rhs
};

inline LogInterpolationReport check_log_interpolation(const GridField& f, double gamma,
                                                      std::size_t shells = 64,
                                                      std::size_t angles = 32) {
  require(gamma < 1.0, "check_log_interpolation: gamma must be < 1");
  LogInterpolationReport r;
  r.hminus1 = sobolev_neg_norm(f, 1.0);
  const IncrementEvaluator ev(f);
  r.l2 = std::sqrt(ev.l2_squared());
  if (r.l2 == 0.0) return r;
  r.lhs = std::pow(std::log(2.0 + r.l2 / r.hminus1), 1.0 - gamma) * r.l2 * r.l2;
  r.rhs = log_weighted_functional(ev, gamma, HQuadrature::make(f.spacing(), 0.2, shells, angles));
  r.ratio = r.lhs / r.rhs;
  return r;
}

/// Sampled check of |f(x) - f(y)| <= |x - y| exp(g(x) + g(y)) on node pairs.
struct PairCheck {
  std::size_t pairs = 0;
  std::size_t violations = 0;
  double max_excess = 0.0;  // largest |f(x)-f(y)| - bound
};

inline PairCheck lusin_pair_check(const GridField& f, const GridField& g, std::size_t n_pairs,
                                  std::uint64_t seed, double tol = 1e-9) {
  require(f.same_grid(g), "lusin_pair_check: f and g must share a grid");
  const std::size_t n = f.n();
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> node(0, n - 1);
  std::uniform_int_distribution<int> near(-8, 8);
  PairCheck pc;
  pc.max_excess = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < n_pairs; ++k) {
    const std::size_t i = node(rng), j = node(rng);
    std::size_t i2, j2;
    if (k % 2 == 0) {
      i2 = node(rng);
      j2 = node(rng);
    } else {
      // Local pairs probe the small-|x - y| regime where jumps show up.
      i2 = static_cast<std::size_t>(static_cast<long>(i + n) + near(rng)) % n;
      j2 = static_cast<std::size_t>(static_cast<long>(j + n) + near(rng)) % n;
    }
    if (i == i2 && j == j2) continue;
    const double d = periodic_distance(f.node(i, j), f.node(i2, j2), f.box());
    const double bound = d * std::exp(g(i, j) + g(i2, j2));
    const double excess = std::abs(f(i, j) - f(i2, j2)) - bound;
    ++pc.pairs;
    pc.max_excess = std::max(pc.max_excess, excess);
    if (excess > tol) ++pc.violations;
  }
  return pc;
}

struct KeyLemmaReport {
  PairCheck pairs;
  double lhs = 0.0;       // capped order-p functional of f
  double g_norm_pp = 0.0; // ||g||_p^p
  double f_l1 = 0.0;
  double rhs = 0.0;
  double ratio = 0.0;
};

/// Evaluates the key lemma for a pair (f, g) after spot-checking the
/// exponential Lusin-Lipschitz precondition on 10^4 node pairs.
inline KeyLemmaReport check_key_lemma(const GridField& f, const GridField& g, double p,
                                      std::uint64_t seed = 1, std::size_t shells = 64,
                                      std::size_t angles = 32) {
  require(p >= 1.0, "check_key_lemma: p must be >= 1");
  KeyLemmaReport r;
  r.pairs = lusin_pair_check(f, g, 10000, seed);
  if (r.pairs.violations > 0)
    throw PreconditionError("check_key_lemma: Lusin-Lipschitz pair check failed on " +
                            std::to_string(r.pairs.violations) + " pairs (max excess " +
                            std::to_string(r.pairs.max_excess) + ")");
  r.lhs = capped_log_sobolev(f, p, HQuadrature::for_grid(f, 1.0 / 3.0, shells, angles));
  r.g_norm_pp = std::pow(lp_norm(g, p), p);
  r.f_l1 = lp_norm(f, 1.0);
  r.rhs = r.g_norm_pp + r.f_l1;
  r.ratio = r.rhs > 0.0 ? r.lhs / r.rhs : 0.0;
  return r;
}

/// Axis-aligned open box.
struct Box2 {
  Vec2 lo;
  Vec2 hi;

  bool overlaps(const Box2& o) const {
    return lo.x < o.hi.x && o.lo.x < hi.x && lo.y < o.hi.y && o.lo.y < hi.y;
  }
};

struct SubadditivityPart {
  GridField field;
  Box2 omega;     // open set containing the support with room to spare
  double margin;  // required distance between supp field and the complement of omega
};

struct SubadditivityReport {
  double lhs = 0.0;
  double rhs = 0.0;
  std::vector<double> part_functional;
  std::vector<double> part_correction;
  double slack = 0.0;  // lhs - rhs
  bool holds = true;
  bool lambda_hypothesis = true;  // every margin below 1/4
};

/// Verifies the disjoint-support lower bound
///   F(sum f_n) >= sum_n [F(f_n) - 4 ||f_n||^2 |log lambda_n|^{1-gamma} / (1-gamma)]
/// for F the gamma-weighted functional over B_{1/3}.
inline SubadditivityReport subadditivity_gap(const std::vector<SubadditivityPart>& parts,
                                             double gamma, double tol = 1e-8,
                                             std::size_t shells = 64, std::size_t angles = 32) {
  require(gamma < 1.0, "subadditivity_gap: gamma must be < 1");
  require(!parts.empty(), "subadditivity_gap: no parts");
  for (std::size_t a = 0; a < parts.size(); ++a) {
    const auto& pa = parts[a];
    require(pa.field.same_grid(parts.front().field), "subadditivity_gap: parts must share a grid");
    require(pa.margin > 0.0 && pa.margin < 1.0, "subadditivity_gap: margin must lie in (0, 1)");
    for (std::size_t b = a + 1; b < parts.size(); ++b)
      require(!pa.omega.overlaps(parts[b].omega), "subadditivity_gap: overlapping supports");
    const GridField& f = pa.field;
    const double eps = 1e-12;
    for (std::size_t i = 0; i < f.n(); ++i)
      for (std::size_t j = 0; j < f.n(); ++j) {
        if (f(i, j) == 0.0) continue;
        const Vec2 x = f.node(i, j);
        const bool inside = x.x - pa.margin > pa.omega.lo.x - eps &&
                            x.x + pa.margin < pa.omega.hi.x + eps &&
                            x.y - pa.margin > pa.omega.lo.y - eps &&
                            x.y + pa.margin < pa.omega.hi.y + eps;
        require(inside, "subadditivity_gap: support closer than the margin to the boundary");
      }
  }
  const GridField& first = parts.front().field;
  const auto q = HQuadrature::for_grid(first, 1.0 / 3.0, shells, angles);
  GridField sum(first.n(), first.box(), first.origin());
  SubadditivityReport r;
  for (const auto& pa : parts) {
    r.lambda_hypothesis = r.lambda_hypothesis && pa.margin < 0.25;
    sum += pa.field;
    const IncrementEvaluator ev(pa.field);
    const double fn = log_weighted_functional(ev, gamma, q);
    const double corr = 4.0 * ev.l2_squared() / (1.0 - gamma) *
                        std::pow(std::abs(std::log(pa.margin)), 1.0 - gamma);
    r.part_functional.push_back(fn);
    r.part_correction.push_back(corr);
    r.rhs += fn - corr;
  }
  r.lhs = log_weighted_functional(IncrementEvaluator(sum), gamma, q);
  r.slack = r.lhs - r.rhs;
  r.holds = r.lhs >= r.rhs - tol;
  return r;
}

}  // namespace loglab
