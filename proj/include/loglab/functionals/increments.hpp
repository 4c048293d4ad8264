#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "loglab/core/grid_field.hpp"

namespace loglab {

/// Evaluates I(h) = int |f(x+h) - f(x)|^2 dx = L^2 sum |fhat|^2 |m(h) - 1|^2
/// for many h against one precomputed power spectrum.
///
/// Off the Nyquist lines |m - 1|^2 = 2 (1 - cos(a + b)) with per-axis phases
/// a, b. Writing 1 - cos(a + b) = A + B - A B + sin a sin b, where
/// A = 1 - cos a = 2 sin^2(a/2), makes the sum separable (one pass of row
/// sums per h) and keeps full relative precision as h -> 0. The Nyquist row
/// and column use the exact aliased multiplier.
class IncrementEvaluator {
 public:
  explicit IncrementEvaluator(const GridField& f)
      : n_(f.n()), box_(f.box()), spec_(to_spectrum(f)), power_(power_spectrum(spec_)) {}

  std::size_t n() const { return n_; }
  double box() const { return box_; }
  const Spectrum& spectrum() const { return spec_; }

  /// Squared L^2 norm, L^2 sum |fhat|^2.
  double l2_squared() const {
    double acc = 0.0;
    for (double p : power_) acc += p;
    return box_ * box_ * acc;
  }

  double operator()(Vec2 h) const {
    const std::size_t n = n_, nyq = n / 2;
    std::vector<double> ca(n), sa(n), cb(n), sb(n);
    axis(h.x, ca, sa);
    axis(h.y, cb, sb);

    double acc = 0.0;
    for (std::size_t k1 = 0; k1 < n; ++k1) {
      if (k1 == nyq) continue;
      const double* row = power_.data() + k1 * n;
      double r0 = 0.0, r1 = 0.0, rs = 0.0;
      for (std::size_t k2 = 0; k2 < n; ++k2) {
        if (k2 == nyq) continue;
        r0 += row[k2];
        r1 += row[k2] * cb[k2];
        rs += row[k2] * sb[k2];
      }
      acc += ca[k1] * r0 + r1 * (1.0 - ca[k1]) + sa[k1] * rs;
    }
    acc *= 2.0;

    // Nyquist row and column: exact symmetrized multiplier.
    const auto a1 = detail::axis_phases(n, box_, h.x);
    const auto a2 = detail::axis_phases(n, box_, h.y);
    auto exact = [&](std::size_t k1, std::size_t k2) {
      return power_[k1 * n + k2] * std::norm(detail::shift_multiplier(a1, a2, k1, k2) - 1.0);
    };
    for (std::size_t k2 = 0; k2 < n; ++k2) acc += exact(nyq, k2);
    for (std::size_t k1 = 0; k1 < n; ++k1)
      if (k1 != nyq) acc += exact(k1, nyq);

    return box_ * box_ * acc;
  }

 private:
  // A(k) = 1 - cos(phi_k) and sin(phi_k) for phi_k = 2 pi nu_k h / L.
  void axis(double h, std::vector<double>& one_minus_cos, std::vector<double>& sine) const {
    for (std::size_t k = 0; k < n_; ++k) {
      const double phi = kTwoPi * static_cast<double>(signed_frequency(k, n_)) * h / box_;
      const double s = std::sin(0.5 * phi);
      one_minus_cos[k] = 2.0 * s * s;
      sine[k] = std::sin(phi);
    }
  }

  std::size_t n_;
  double box_;
  Spectrum spec_;
  std::vector<double> power_;
};

/// int |f(x+h) - f(x)|^2 dx, computed spectrally.
inline double inner_sq_increment(const GridField& f, Vec2 h) {
  return IncrementEvaluator(f)(h);
}

/// Real-space increment integrals that need the translated samples
/// (nonlinear integrands such as the capped square or the absolute value).
template <class Pointwise>
double real_space_increment(const GridField& f, const Spectrum& s, Vec2 h, Pointwise&& phi) {
  const GridField g = shift(s, h, f.origin());
  auto a = f.values();
  auto b = g.values();
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) acc += phi(b[k] - a[k]);
  return acc * f.cell_area();
}

}  // namespace loglab
