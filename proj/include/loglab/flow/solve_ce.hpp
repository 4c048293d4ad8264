#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "loglab/core/interpolate.hpp"
#include "loglab/flow/trace.hpp"

namespace loglab {

/// Solution of the continuity equation at time t on the grid of `like`:
/// u_t(x) = u0(Y_t(x)), each node traced straight back to time 0.
/// `u0` is any callable Vec2 -> double (a sampler or an analytic datum).
template <VelocityField B, class Initial>
GridField solve_ce(const B& b, const Initial& u0, const GridField& like, double t, double ode_tol) {
  if (!b.divergence_free())
    throw PreconditionError("solve_ce: velocity field is not divergence-free");
  const std::size_t n = like.n();
  std::vector<double> out(n * n);
  const std::vector<double> none;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const Vec2 y = trace_particle(b, like.node(i, j), t, 0.0, ode_tol, none,
                                    [](std::size_t, Vec2) {});
      out[i * n + j] = u0(y);
    }
  return GridField(n, like.box(), std::move(out), like.origin());
}

template <class F>
concept PeriodicField = VelocityField<F> && requires(const F& b) {
  { b.period() } -> std::convertible_to<double>;
};

/// u_t for a list of times t >= 0 on the grid of `like`. For a time-periodic
/// field Y_{mP+r} = Y_P^m o Y_r, so each node is traced once per distinct
/// remainder r and the whole-period map is applied repeatedly; otherwise every
/// time is solved on its own.
template <VelocityField B, class Initial>
std::vector<GridField> solve_ce_series(const B& b, const Initial& u0, const GridField& like,
                                       const std::vector<double>& times, double ode_tol) {
  for (double t : times) require(t >= 0.0, "solve_ce_series: times must be nonnegative");
  std::vector<GridField> out;
  if constexpr (!PeriodicField<B>) {
    for (double t : times) out.push_back(solve_ce(b, u0, like, t, ode_tol));
    return out;
  } else {
    if (!b.divergence_free())
      throw PreconditionError("solve_ce: velocity field is not divergence-free");
    const double P = b.period();
    require(P > 0.0, "solve_ce_series: period must be positive");
    struct Item {
      std::size_t index;
      long m;
    };
    // remainder -> outputs sorted by number of whole periods
    std::vector<std::pair<double, std::vector<Item>>> groups;
    for (std::size_t k = 0; k < times.size(); ++k) {
      long m = static_cast<long>(std::floor(times[k] / P + 1e-12));
      const double r = std::max(0.0, times[k] - static_cast<double>(m) * P);
      auto g = std::find_if(groups.begin(), groups.end(),
                            [&](const auto& e) { return std::abs(e.first - r) <= 1e-12 * P; });
      if (g == groups.end()) g = groups.insert(groups.end(), {r, {}});
      g->second.push_back({k, m});
    }
    for (auto& g : groups)
      std::sort(g.second.begin(), g.second.end(), [](Item a, Item c) { return a.m < c.m; });

    const std::size_t n = like.n();
    std::vector<std::vector<double>> vals(times.size(), std::vector<double>(n * n));
    const std::vector<double> none;
    auto noop = [](std::size_t, Vec2) {};
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t node = i * n + j;
        for (const auto& [r, items] : groups) {
          Vec2 y = trace_particle(b, like.node(i, j), r, 0.0, ode_tol, none, noop);
          long done = 0;
          for (const Item& it : items) {
            for (; done < it.m; ++done) y = trace_particle(b, y, P, 0.0, ode_tol, none, noop);
            vals[it.index][node] = u0(y);
          }
        }
      }
    for (auto& v : vals) out.emplace_back(n, like.box(), std::move(v), like.origin());
    return out;
  }
}

enum class Reconstruction { bilinear, spectral };

/// Grid initial data: bilinear for rough data, spectral for smooth data.
template <VelocityField B>
GridField solve_ce(const B& b, const GridField& u0, double t, double ode_tol,
                   Reconstruction how = Reconstruction::bilinear) {
  if (how == Reconstruction::spectral) return solve_ce(b, SpectralSampler(u0), u0, t, ode_tol);
  return solve_ce(b, BilinearSampler(u0), u0, t, ode_tol);
}

/// Conservation diagnostics of u_t against u0.
struct CeDiagnostics {
  double l1_drift = 0.0;  // relative
  double l2_drift = 0.0;  // relative
  double mean_drift = 0.0;
};

inline CeDiagnostics ce_diagnostics(const GridField& u0, const GridField& ut) {
  CeDiagnostics d;
  auto rel = [](double a, double b) { return b == 0.0 ? std::abs(a) : std::abs(a - b) / b; };
  d.l1_drift = rel(lp_norm(ut, 1.0), lp_norm(u0, 1.0));
  d.l2_drift = rel(lp_norm(ut, 2.0), lp_norm(u0, 2.0));
  d.mean_drift = std::abs(ut.mean() - u0.mean());
  return d;
}

}  // namespace loglab
