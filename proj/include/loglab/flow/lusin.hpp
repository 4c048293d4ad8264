#pragma once

// Maximal function, the Lusin-Lipschitz witness g_t and the statistical
// two-sided separation check, plus measure-preservation diagnostics.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <vector>

#include "loglab/core/ball_average.hpp"
#include "loglab/core/interpolate.hpp"
#include "loglab/flow/trace.hpp"

namespace loglab {

/// Discrete Hardy-Littlewood maximal function: the largest average of |f|
/// over balls of radius 0 (the point itself) and spacing * 2^k up to L/2.
inline GridField maximal_function(const GridField& f) {
  GridField a = f;
  a.transform([](double v) { return std::abs(v); });
  std::vector<double> m(a.values().begin(), a.values().end());
  BallAverager avg(f.n(), f.box(), dyadic_radii(f.n(), f.box()));
  avg.for_each(a, [&](std::size_t, std::span<const double> v) {
    for (std::size_t k = 0; k < m.size(); ++k) m[k] = std::max(m[k], v[k]);
  });
  return GridField(f.n(), f.box(), std::move(m), f.origin());
}

struct LusinWitness {
  std::vector<double> g_values;  // C_d * integral, per particle
  double t = 0.0;
  double constant_Cd = 1.0;
};

/// g_t(x) = C_d int_0^t M|grad b_s|(X_s(x)) ds by the trapezoid rule on the
/// flow's recorded sample times (re-traced with quad_steps nodes if the flow
/// carries a different sampling). M|grad b_s| is built on an n_grid lattice
/// and read off bilinearly; snapshots with equal keys are computed once.
template <VelocityField B>
LusinWitness lusin_witness(const B& b, const FlowMap& flow, std::size_t quad_steps,
                           double constant_Cd, std::size_t n_grid = 256,
                           double ode_tol = 1e-8) {
  require(flow.direction() == Direction::forward, "lusin_witness: flow must be forward");
  require(quad_steps >= 2, "lusin_witness: need at least two quadrature nodes");
  const FlowMap* fm = &flow;
  FlowMap retraced;
  if (flow.samples.size() != quad_steps) {
    retraced = trace(b, flow.origin, flow.t0, flow.t1, ode_tol, quad_steps);
    fm = &retraced;
  }
  LusinWitness w;
  w.t = flow.t1;
  w.constant_Cd = constant_Cd;
  w.g_values.assign(flow.origin.size(), 0.0);
  if (flow.t1 == flow.t0) return w;

  std::map<std::uint64_t, BilinearSampler> cache;
  const double dt = (fm->t1 - fm->t0) / static_cast<double>(quad_steps - 1);
  for (std::size_t k = 0; k < quad_steps; ++k) {
    const double s = fm->sample_times[k];
    // Evaluate inside the interval so a switch at an endpoint is attributed
    // to the phase active on it.
    const double s_eval = k == 0 ? s + 1e-9 * dt : (k + 1 == quad_steps ? s - 1e-9 * dt : s);
    const std::uint64_t key = b.snapshot_key(s_eval);
    auto it = cache.find(key);
    if (it == cache.end())
      it = cache.emplace(key, BilinearSampler(maximal_function(gradient_magnitude(b, s_eval, n_grid))))
               .first;
    const double wk = (k == 0 || k + 1 == quad_steps) ? 0.5 * dt : dt;
    const auto& pos = fm->samples[k];
    for (std::size_t i = 0; i < pos.size(); ++i) w.g_values[i] += wk * it->second(pos[i]);
  }
  for (double& g : w.g_values) g *= constant_Cd;
  return w;
}

struct LusinReport {
  std::size_t pairs = 0;
  double pass_rate = 0.0;
  double min_scale = 0.0;  // smallest multiplier on g giving >= `target` pass rate
  double target = 0.999;
};

/// Checks exp(-g(x)-g(y)) <= |X(x)-X(y)| / |x-y| <= exp(g(x)+g(y)) on random
/// particle pairs; half are uniform pairs and half are near neighbours.
inline LusinReport check_lusin_bilipschitz(const FlowMap& flow, const LusinWitness& w,
                                           std::size_t n_pairs, std::uint64_t seed = 7,
                                           double target = 0.999) {
  require(w.g_values.size() == flow.origin.size(), "check_lusin_bilipschitz: witness mismatch");
  const std::size_t m = flow.origin.size();
  require(m >= 2, "check_lusin_bilipschitz: need at least two particles");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, m - 1);
  std::uniform_int_distribution<long> near(-4, 4);
  const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(m))));
  const bool lattice = side * side == m;
  std::vector<double> needed;
  needed.reserve(n_pairs);
  std::size_t pass = 0;
  for (std::size_t k = 0; k < n_pairs; ++k) {
    const std::size_t a = pick(rng);
    std::size_t c;
    if (k % 2 == 1 && lattice) {
      const long i = static_cast<long>(a / side), j = static_cast<long>(a % side);
      const long s = static_cast<long>(side);
      c = static_cast<std::size_t>(((i + near(rng)) % s + s) % s) * side +
          static_cast<std::size_t>(((j + near(rng)) % s + s) % s);
    } else {
      c = pick(rng);
    }
    if (c == a) continue;
    const double d0 = periodic_distance(flow.origin[a], flow.origin[c], flow.box);
    const double d1 = periodic_distance(flow.positions[a], flow.positions[c], flow.box);
    if (d0 == 0.0) continue;
    const double lr = std::abs(std::log(std::max(d1, 1e-300) / d0));
    const double g = w.g_values[a] + w.g_values[c];
    if (lr <= g + 1e-12) ++pass;
    needed.push_back(g > 0.0 ? lr / g : (lr <= 1e-12 ? 0.0 : std::numeric_limits<double>::infinity()));
  }
  LusinReport r;
  r.pairs = needed.size();
  r.target = target;
  if (needed.empty()) return r;
  r.pass_rate = static_cast<double>(pass) / static_cast<double>(needed.size());
  std::sort(needed.begin(), needed.end());
  const auto idx = std::min(needed.size() - 1,
                            static_cast<std::size_t>(std::ceil(target * static_cast<double>(needed.size()))) - 1);
  r.min_scale = needed[idx];
  return r;
}

struct FlowDiagnostics {
  double compressibility_L = 1.0;  // largest bin density relative to uniform
  double min_density = 1.0;        // smallest bin density relative to uniform
  double lp_drift = 0.0;
  double mean_drift = 0.0;
};

/// Histogram of pushed-forward particles on bins x bins cells, normalized so
/// that a uniform cloud has density 1 in every bin.
inline FlowDiagnostics pushforward_density(const FlowMap& fm, std::size_t bins) {
  std::vector<std::size_t> count(bins * bins, 0);
  const double scale = static_cast<double>(bins) / fm.box;
  for (Vec2 p : fm.positions) {
    auto cell = [&](double v, double lo) {
      const auto c = static_cast<long>(std::floor((wrap(v, lo, fm.box) - lo) * scale));
      return static_cast<std::size_t>(std::clamp<long>(c, 0, static_cast<long>(bins) - 1));
    };
    ++count[cell(p.x, fm.lo.x) * bins + cell(p.y, fm.lo.y)];
  }
  const double expect = static_cast<double>(fm.positions.size()) / static_cast<double>(bins * bins);
  FlowDiagnostics d;
  d.compressibility_L = 0.0;
  d.min_density = std::numeric_limits<double>::infinity();
  for (std::size_t c : count) {
    d.compressibility_L = std::max(d.compressibility_L, static_cast<double>(c) / expect);
    d.min_density = std::min(d.min_density, static_cast<double>(c) / expect);
  }
  return d;
}

}  // namespace loglab
