#pragma once

// Velocity fields and initial data named in experiment configs.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <variant>

#include "loglab/constructions/patched.hpp"
#include "loglab/core/io.hpp"
#include "loglab/flow/velocity.hpp"
#include "loglab/lab/config.hpp"

namespace loglab {

using AnyField = std::variant<SteadyShear, BlockVelocity, PatchedVelocity, SampledField>;

inline BuildingBlock block_from(const FieldSpec& f, InitialProfile profile = InitialProfile::sine_core) {
  BuildingBlock bb;
  bb.amplitude = f.amplitude;
  bb.switch_period = f.switch_period;
  bb.cutoff_width = f.cutoff_width;
  bb.profile = profile;
  return bb;
}

inline GridField read_field_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open field file '" + path + "'");
  return read_binary_field(in);
}

/// The analytic shear lives on the unit cell [-1/2, 1/2)^2 like the block.
inline AnyField make_field(const ExperimentConfig& c) {
  const auto& f = c.field;
  if (f.kind == "analytic-shear") return SteadyShear{f.amplitude, 1.0, {-0.5, -0.5}};
  if (f.kind == "building-block") return BlockVelocity(block_from(f));
  if (f.kind == "patched") return PatchedVelocity(make_schedule(c.schedule.N, c.schedule.p), block_from(f));
  SampledField s(read_field_file(f.components.at(0)), read_field_file(f.components.at(1)));
  if (!s.divergence_free()) throw ConfigError("sampled field is not divergence-free");
  return s;
}

inline double field_box(const AnyField& b) {
  return std::visit([](const auto& f) { return f.box(); }, b);
}
inline Vec2 field_origin(const AnyField& b) {
  return std::visit([](const auto& f) { return f.origin(); }, b);
}

/// Initial datum as a function on the field's box. Profiles are laid out in
/// cell coordinates z = (x - origin) / box - 1/2 in [-1/2, 1/2)^2.
struct InitialDatum {
  std::string name;
  std::function<double(Vec2)> value;
  bool smooth = false;
  bool bv = true;  // takes values in {-1, 0, 1}
};

inline InitialDatum make_initial(const std::string& kind, double box, Vec2 origin,
                                 double cutoff_width = 1.0 / 16.0) {
  auto cell = [box, origin](Vec2 x) {
    return Vec2{wrap((x.x - origin.x) / box - 0.5, -0.5, 1.0), wrap((x.y - origin.y) / box - 0.5, -0.5, 1.0)};
  };
  InitialDatum d;
  d.name = kind;
  if (kind == "checkerboard") {
    d.value = [cell](Vec2 x) {
      const Vec2 z = cell(x);
      return (z.x >= 0.0 ? 1.0 : -1.0) * (z.y >= 0.0 ? 1.0 : -1.0);
    };
  } else if (kind == "disk") {
    d.value = [cell](Vec2 x) { return norm(cell(x)) < 0.25 ? 1.0 : 0.0; };
  } else if (kind == "constant") {
    d.value = [](Vec2) { return 1.0; };
    d.smooth = true;
  } else if (kind == "zero") {
    d.value = [](Vec2) { return 0.0; };
    d.smooth = true;
  } else if (kind == "sine-core" || kind == "sine-cell") {
    BuildingBlock bb;
    bb.cutoff_width = cutoff_width;
    bb.profile = kind == "sine-core" ? InitialProfile::sine_core : InitialProfile::sine_cell;
    d.value = [cell, bb](Vec2 x) { return bb.rho0(cell(x)); };
    d.smooth = true;
    d.bv = false;
  } else {
    throw ConfigError("unknown initial datum '" + kind + "'");
  }
  return d;
}

inline GridField sample_initial(const InitialDatum& d, std::size_t n, double box, Vec2 origin) {
  return GridField::sample(n, box, d.value, origin);
}

/// u_t = u0 o Y_t on the n x n grid over the field's box for each time.
template <class B, class Initial>
std::vector<GridField> advect(const B& b, const Initial& u0, std::size_t n,
                              const std::vector<double>& times, double ode_tol) {
  const GridField like(n, b.box(), b.origin());
  if constexpr (std::is_same_v<B, PatchedVelocity>) {
    require_composite_resolution(b.schedule(), n);
    std::vector<GridField> out;
    for (double t : times) {
      std::vector<double> v(n * n);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          v[i * n + j] = u0(patched_pullback(b.schedule(), b.block(), t, like.node(i, j), ode_tol));
      out.emplace_back(n, like.box(), std::move(v), like.origin());
    }
    return out;
  } else {
    return solve_ce_series(b, u0, like, times, ode_tol);
  }
}

/// ||grad b_t||_{L^p}. Blocks use midpoint sums of the analytic Jacobian;
/// the patched field uses the per-block closed form, which stays exact
/// where a composite grid would miss the small cubes.
template <class B>
double gradient_lp(const B& b, double t, double p, std::size_t n) {
  if constexpr (std::is_same_v<B, PatchedVelocity>) {
    return std::pow(patched_lp_norms(b.schedule(), b.building_block(), t, p, std::min<std::size_t>(n, 256)).gradient_pp, 1.0 / p);
  } else if constexpr (std::is_same_v<B, BlockVelocity>) {
    return std::pow(block_lp_norms(b, t, p, n).gradient_pp, 1.0 / p);
  } else {
    return lp_norm(gradient_magnitude(b, t, n), p);
  }
}

/// int_0^t ||grad b_s||_p ds by the midpoint rule on `steps_per_unit` cells
/// per unit time; snapshots with equal keys are evaluated once.
template <class B>
double gradient_lp_integral(const B& b, double t, double p, std::size_t n,
                            std::size_t steps_per_unit = 256) {
  if (t <= 0.0) return 0.0;
  const auto m = static_cast<std::size_t>(std::ceil(t * static_cast<double>(steps_per_unit)));
  const double dt = t / static_cast<double>(m);
  std::map<std::uint64_t, double> cache;
  double acc = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    const double s = (static_cast<double>(k) + 0.5) * dt;
    const auto key = b.snapshot_key(s);
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, gradient_lp(b, s, p, n)).first;
    acc += it->second * dt;
  }
  return acc;
}

/// sup over snapshots in [0, t] of ||grad b_s||_p.
template <class B>
double gradient_lp_sup(const B& b, double t, double p, std::size_t n, std::size_t steps_per_unit = 256) {
  const auto m = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(t * static_cast<double>(steps_per_unit))));
  std::map<std::uint64_t, double> cache;
  double best = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    const double s = (static_cast<double>(k) + 0.5) * std::max(t, 1e-12) / static_cast<double>(m);
    const auto key = b.snapshot_key(s);
    if (!cache.count(key)) cache[key] = gradient_lp(b, s, p, n);
    best = std::max(best, cache[key]);
  }
  return best;
}

}  // namespace loglab
