#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "loglab/flow/velocity.hpp"

namespace loglab {

enum class Direction { forward, backward };

/// Particle ensemble transported from t0 to t1. `samples[k]` holds the
/// positions at `sample_times[k]` when the trace was asked to record them.
struct FlowMap {
  double t0 = 0.0;
  double t1 = 0.0;
  double box = 1.0;
  Vec2 lo{};
  std::vector<Vec2> origin;     // seeds
  std::vector<Vec2> positions;  // wrapped into the box
  std::vector<double> sample_times;
  std::vector<std::vector<Vec2>> samples;

  Direction direction() const { return t1 >= t0 ? Direction::forward : Direction::backward; }
};

/// Largest RK4 step for a field with local time scale T.
inline double rk4_step_bound(double ode_tol, double time_scale) {
  require(ode_tol > 0.0, "trace: ode_tol must be positive");
  return std::min(std::pow(ode_tol, 0.25), time_scale / 64.0);
}

namespace detail {

/// Steps are also capped at kJacobianStep / |grad b(x)| so that thin layers
/// with steep gradients stay inside the RK4 stability region.
inline constexpr double kJacobianStep = 0.5;

// Fields may supply a cheap upper bound for |grad b| through stiffness(t, x).
template <VelocityField B>
double stiffness(const B& b, double t, Vec2 x) {
  if constexpr (requires { { b.stiffness(t, x) } -> std::convertible_to<double>; })
    return b.stiffness(t, x);
  else
    return frobenius(b.gradient(t, x));
}

// Fields with thin layers (whose higher derivatives dwarf the gradient) say
// where a fixed step is accurate through smooth_at(t, x).
template <VelocityField B>
bool smooth_at(const B& b, double t, Vec2 x) {
  if constexpr (requires { { b.smooth_at(t, x) } -> std::convertible_to<bool>; })
    return b.smooth_at(t, x);
  else
    return true;
}

template <VelocityField B, class Clamp>
Vec2 rk4_step(const B& b, Vec2 x, double s, double h, const Clamp& clamp, bool* smooth = nullptr) {
  const Vec2 k1 = b.velocity(clamp(s), x);
  const Vec2 x2 = x + (0.5 * h) * k1;
  const Vec2 k2 = b.velocity(clamp(s + 0.5 * h), x2);
  const Vec2 x3 = x + (0.5 * h) * k2;
  const Vec2 k3 = b.velocity(clamp(s + 0.5 * h), x3);
  const Vec2 x4 = x + h * k3;
  const Vec2 k4 = b.velocity(clamp(s + h), x4);
  if (smooth)
    *smooth = smooth_at(b, clamp(s + 0.5 * h), x2) && smooth_at(b, clamp(s + 0.5 * h), x3) &&
              smooth_at(b, clamp(s + h), x4);
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

struct Dp45 {
  Vec2 x;     // fifth-order solution
  double err; // embedded error estimate
  Vec2 k7;    // velocity at the new point, the next step's first stage
};

/// One Dormand-Prince 5(4) step; k1 is the velocity at (s, x).
template <VelocityField B, class Clamp>
Dp45 dp45_step(const B& b, Vec2 x, double s, double h, Vec2 k1, const Clamp& clamp) {
  const Vec2 k2 = b.velocity(clamp(s + h / 5.0), x + (h / 5.0) * k1);
  const Vec2 k3 = b.velocity(clamp(s + 0.3 * h), x + h * ((3.0 / 40.0) * k1 + (9.0 / 40.0) * k2));
  const Vec2 k4 = b.velocity(clamp(s + 0.8 * h),
                             x + h * ((44.0 / 45.0) * k1 - (56.0 / 15.0) * k2 + (32.0 / 9.0) * k3));
  const Vec2 k5 = b.velocity(clamp(s + 8.0 / 9.0 * h),
                             x + h * ((19372.0 / 6561.0) * k1 - (25360.0 / 2187.0) * k2 +
                                      (64448.0 / 6561.0) * k3 - (212.0 / 729.0) * k4));
  const Vec2 k6 = b.velocity(clamp(s + h), x + h * ((9017.0 / 3168.0) * k1 - (355.0 / 33.0) * k2 +
                                                    (46732.0 / 5247.0) * k3 + (49.0 / 176.0) * k4 -
                                                    (5103.0 / 18656.0) * k5));
  const Vec2 y = x + h * ((35.0 / 384.0) * k1 + (500.0 / 1113.0) * k3 + (125.0 / 192.0) * k4 -
                          (2187.0 / 6784.0) * k5 + (11.0 / 84.0) * k6);
  const Vec2 k7 = b.velocity(clamp(s + h), y);
  const Vec2 e = h * ((71.0 / 57600.0) * k1 - (71.0 / 16695.0) * k3 + (71.0 / 1920.0) * k4 -
                      (17253.0 / 339200.0) * k5 + (22.0 / 525.0) * k6 - (1.0 / 40.0) * k7);
  return {y, norm(e), k7};
}

/// Integrates from time a to c. Where the field is smooth this is classical
/// RK4 with fixed step min(hmax, kJacobianStep / |grad b|). A step with any
/// stage in a layer is taken instead by an embedded Dormand-Prince pair with
/// local error <= ode_tol * h.
template <VelocityField B>
Vec2 rk4_segment(const B& b, Vec2 x, double a, double c, double hmax, double ode_tol) {
  const double len = c - a;
  if (len == 0.0) return x;
  const double dir = len > 0.0 ? 1.0 : -1.0;
  // Stage times are kept strictly inside [a, c] so that a field switching at
  // a or c is always evaluated in the phase that owns the segment.
  const double guard = 1e-12 * std::max(1.0, std::abs(len));
  const double lo = std::min(a, c) + guard, hi = std::max(a, c) - guard;
  auto clamp = [&](double s) { return std::clamp(s, lo, hi); };
  const double hmin = 1e-12 * std::abs(len);
  double s = a;
  double rem = std::abs(len);
  double h_layer = 0.0;  // step suggested by the last layer step
  while (rem > 0.0) {
    const double stiff = stiffness(b, clamp(s), x);
    const double hloc = stiff > 0.0 ? std::min(hmax, kJacobianStep / stiff) : hmax;
    if (smooth_at(b, clamp(s), x)) {
      // Split what is left evenly so the last step is never a sliver.
      const double steps = std::max(1.0, std::ceil(rem / hloc - 1e-9));
      const double h = rem / steps;
      bool smooth = true;
      const Vec2 y = rk4_step(b, x, s, dir * h, clamp, &smooth);
      if (smooth) {
        x = y;
        if (steps <= 1.0) break;
        s += dir * h;
        rem -= h;
        continue;
      }
    }
    // Layer: adaptive steps until the particle is back in the smooth part.
    Vec2 k1 = b.velocity(clamp(s), x);
    double h = std::min({rem, hmax, h_layer > 0.0 ? h_layer : hloc});
    while (rem > hmin) {
      const Dp45 st = dp45_step(b, x, s, dir * h, k1, clamp);
      const double target = ode_tol * h;
      const double fac = st.err > 0.0 ? 0.9 * std::pow(target / st.err, 0.2) : 5.0;
      if (st.err > target && h > hmin) {
        h *= std::clamp(fac, 0.1, 0.9);
        continue;
      }
      x = st.x;
      k1 = st.k7;
      rem -= h;
      s = rem > 0.0 ? s + dir * h : c;
      h_layer = std::min(hmax, h * std::clamp(fac, 0.2, 5.0));
      h = std::min(rem, h_layer);
      if (smooth_at(b, clamp(s), x)) break;
    }
    if (rem <= hmin) break;
  }
  return x;
}

}  // namespace detail

/// Integrates one particle from t0 to t1 (either order), splitting the path at
/// the field's switching times and at the requested record times. `record`
/// receives (index, position) for each record time in traversal order.
template <VelocityField B, class Record>
Vec2 trace_particle(const B& b, Vec2 x, double t0, double t1, double ode_tol,
                    const std::vector<double>& record_times, Record&& record) {
  std::vector<double> cuts;
  b.breakpoints(x, t0, t1, cuts);
  const double lo = std::min(t0, t1), hi = std::max(t0, t1);
  for (double s : record_times)
    if (s > lo && s < hi) cuts.push_back(s);
  const bool fwd = t1 >= t0;
  std::sort(cuts.begin(), cuts.end(), [fwd](double p, double q) { return fwd ? p < q : p > q; });
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  cuts.push_back(t1);

  const double hmax = rk4_step_bound(ode_tol, b.time_scale(x));
  std::size_t next_record = 0;
  auto emit = [&](double s) {
    while (next_record < record_times.size() && record_times[next_record] == s)
      record(next_record++, x);
  };
  emit(t0);
  double s = t0;
  for (double c : cuts) {
    x = detail::rk4_segment(b, x, s, c, hmax, ode_tol);
    if (!std::isfinite(x.x) || !std::isfinite(x.y))
      throw SolverError("trace: non-finite particle position");
    s = c;
    emit(s);
  }
  return x;
}

/// Transports seeds from t0 to t1 with fixed-step RK4. When `n_samples` > 1,
/// positions are also stored at n_samples equispaced times from t0 to t1.
template <VelocityField B>
FlowMap trace(const B& b, std::vector<Vec2> seeds, double t0, double t1, double ode_tol,
              std::size_t n_samples = 0) {
  FlowMap fm;
  fm.t0 = t0;
  fm.t1 = t1;
  fm.box = b.box();
  fm.lo = b.origin();
  if (n_samples == 1) n_samples = 2;
  for (std::size_t k = 0; k < n_samples; ++k)
    fm.sample_times.push_back(t0 + (t1 - t0) * static_cast<double>(k) /
                                       static_cast<double>(n_samples - 1));
  if (n_samples > 0) fm.sample_times.back() = t1;
  fm.samples.assign(n_samples, std::vector<Vec2>(seeds.size()));
  fm.positions.resize(seeds.size());
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const Vec2 end = trace_particle(b, seeds[i], t0, t1, ode_tol, fm.sample_times,
                                    [&](std::size_t k, Vec2 x) { fm.samples[k][i] = x; });
    fm.positions[i] = {wrap(end.x, fm.lo.x, fm.box), wrap(end.y, fm.lo.y, fm.box)};
  }
  fm.origin = std::move(seeds);
  return fm;
}

/// Grid nodes of an n x n lattice over the field's box, row-major.
inline std::vector<Vec2> lattice_seeds(std::size_t n, double box, Vec2 origin, double offset = 0.0) {
  std::vector<Vec2> s;
  s.reserve(n * n);
  const double h = box / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      s.push_back({origin.x + h * (static_cast<double>(i) + offset),
                   origin.y + h * (static_cast<double>(j) + offset)});
  return s;
}

/// Largest periodic distance between seeds and the result of tracing the
/// flow's end positions back to t0.
template <VelocityField B>
double round_trip_error(const B& b, const FlowMap& fm, double ode_tol) {
  const FlowMap back = trace(b, fm.positions, fm.t1, fm.t0, ode_tol);
  double err = 0.0;
  for (std::size_t i = 0; i < fm.origin.size(); ++i)
    err = std::max(err, periodic_distance(back.positions[i], fm.origin[i], fm.box));
  return err;
}

}  // namespace loglab
