#pragma once

// Velocity fields on a periodic square. Every field exposes its value, its
// analytic Jacobian, the switching times a particle at x sees, and a key that
// identifies snapshots with identical spatial profile.

#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <vector>

#include "loglab/core/grid_field.hpp"
#include "loglab/core/interpolate.hpp"

namespace loglab {

template <class F>
concept VelocityField = requires(const F& b, double t, Vec2 x, std::vector<double>& out) {
  { b.velocity(t, x) } -> std::convertible_to<Vec2>;
  { b.gradient(t, x) } -> std::convertible_to<Mat2>;
  { b.divergence_free() } -> std::convertible_to<bool>;
  { b.box() } -> std::convertible_to<double>;
  { b.origin() } -> std::convertible_to<Vec2>;
  { b.time_scale(x) } -> std::convertible_to<double>;
  { b.snapshot_key(t) } -> std::convertible_to<std::uint64_t>;
  b.breakpoints(x, t, t, out);
};

inline constexpr double kNoTimeScale = std::numeric_limits<double>::infinity();

struct ZeroField {
  double side = 1.0;
  Vec2 lo{};

  Vec2 velocity(double, Vec2) const { return {}; }
  Mat2 gradient(double, Vec2) const { return {}; }
  bool divergence_free() const { return true; }
  double box() const { return side; }
  Vec2 origin() const { return lo; }
  double time_scale(Vec2) const { return kNoTimeScale; }
  std::uint64_t snapshot_key(double) const { return 0; }
  void breakpoints(Vec2, double, double, std::vector<double>&) const {}
};

/// b = (A sin(2 pi x2 / L), 0): x2 is invariant, x1 drifts linearly.
struct SteadyShear {
  double amplitude = 1.0;
  double side = 1.0;
  Vec2 lo{};

  Vec2 velocity(double, Vec2 x) const {
    return {amplitude * std::sin(kTwoPi * x.y / side), 0.0};
  }
  Mat2 gradient(double, Vec2 x) const {
    return {0.0, amplitude * kTwoPi / side * std::cos(kTwoPi * x.y / side), 0.0, 0.0};
  }
  bool divergence_free() const { return true; }
  double box() const { return side; }
  Vec2 origin() const { return lo; }
  double time_scale(Vec2) const { return kNoTimeScale; }
  std::uint64_t snapshot_key(double) const { return 0; }
  void breakpoints(Vec2, double, double, std::vector<double>&) const {}
};

/// Radial vortex b = omega(r) (-y, x) about a center, omega(r) = w0 exp(-r^2/s^2).
/// Any radial angular velocity gives a divergence-free field.
struct RadialVortex {
  double omega0 = 1.0;
  double sigma = 0.1;
  Vec2 center{0.5, 0.5};
  double side = 1.0;
  Vec2 lo{};

  Vec2 velocity(double, Vec2 x) const {
    const Vec2 d = rel(x);
    const double w = omega(d);
    return {-w * d.y, w * d.x};
  }
  Mat2 gradient(double, Vec2 x) const {
    const Vec2 d = rel(x);
    const double w = omega(d), s2 = sigma * sigma;
    return {2 * d.x * d.y * w / s2, -w + 2 * d.y * d.y * w / s2, w - 2 * d.x * d.x * w / s2,
            -2 * d.x * d.y * w / s2};
  }
  bool divergence_free() const { return true; }
  double box() const { return side; }
  Vec2 origin() const { return lo; }
  double time_scale(Vec2) const { return kNoTimeScale; }
  std::uint64_t snapshot_key(double) const { return 0; }
  void breakpoints(Vec2, double, double, std::vector<double>&) const {}

 private:
  Vec2 rel(Vec2 x) const {
    return {periodic_delta(x.x, center.x, side), periodic_delta(x.y, center.y, side)};
  }
  double omega(Vec2 d) const { return omega0 * std::exp(-(d.x * d.x + d.y * d.y) / (sigma * sigma)); }
};

/// Steady field given by grid samples, interpolated bilinearly; the Jacobian
/// comes from spectral derivatives of the samples.
class SampledField {
 public:
  SampledField(GridField b1, GridField b2)
      : b1_(b1), b2_(b2), d11_(spectral_derivative(b1, 0)), d12_(spectral_derivative(b1, 1)),
        d21_(spectral_derivative(b2, 0)), d22_(spectral_derivative(b2, 1)) {
    require(b1.same_grid(b2), "SampledField: components must share a grid");
    const GridField div = spectral_derivative(b1, 0) + spectral_derivative(b2, 1);
    const double scale = std::max(lp_norm(b1, 2.0) + lp_norm(b2, 2.0), 1e-300);
    div_free_ = lp_norm(div, 2.0) <= 1e-10 * scale;
  }

  Vec2 velocity(double, Vec2 x) const { return {b1_(x), b2_(x)}; }
  Mat2 gradient(double, Vec2 x) const { return {d11_(x), d12_(x), d21_(x), d22_(x)}; }
  bool divergence_free() const { return div_free_; }
  double box() const { return b1_.field().box(); }
  Vec2 origin() const { return b1_.field().origin(); }
  double time_scale(Vec2) const { return kNoTimeScale; }
  std::uint64_t snapshot_key(double) const { return 0; }
  void breakpoints(Vec2, double, double, std::vector<double>&) const {}

 private:
  BilinearSampler b1_, b2_;
  BilinearSampler d11_, d12_, d21_, d22_;
  bool div_free_ = false;
};

/// L^2 norm of the divergence of a sampled snapshot, from the analytic Jacobian.
template <VelocityField B>
double snapshot_divergence_l2(const B& b, double t, std::size_t n) {
  const auto div = GridField::sample(n, b.box(), [&](Vec2 x) { return b.gradient(t, x).trace(); },
                                     b.origin());
  return lp_norm(div, 2.0);
}

/// |grad b_t| (Frobenius) sampled on an n x n grid over the field's box.
template <VelocityField B>
GridField gradient_magnitude(const B& b, double t, std::size_t n) {
  return GridField::sample(n, b.box(), [&](Vec2 x) { return frobenius(b.gradient(t, x)); },
                           b.origin());
}

/// Component-wise samples of b_t.
template <VelocityField B>
std::pair<GridField, GridField> sample_velocity(const B& b, double t, std::size_t n) {
  return {GridField::sample(n, b.box(), [&](Vec2 x) { return b.velocity(t, x).x; }, b.origin()),
          GridField::sample(n, b.box(), [&](Vec2 x) { return b.velocity(t, x).y; }, b.origin())};
}

}  // namespace loglab
