#pragma once

// Periodic 2-D sampled scalar fields, their spectra, and single-function norms.
//
// Fourier normalization used throughout the library:
//
//   fhat(xi) = (1/n^2) sum_x f(x) exp(-2 pi i xi.x / L)
//
// so that Plancherel reads ||f||_{L^2}^2 = L^2 sum_xi |fhat(xi)|^2, and the
// physical wave vector of index xi is 2 pi xi / L.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "loglab/core/fft.hpp"
#include "loglab/core/types.hpp"

namespace loglab {

/// Scalar function sampled on a uniform periodic n x n grid over a square of
/// side `box`. Node (i, j) sits at origin + (i, j) * spacing; storage is
/// row-major with i (the x1 index) as the slow index.
class GridField {
 public:
  static constexpr int dim = 2;

  GridField(std::size_t n, double box, Vec2 origin = {})
      : GridField(n, box, std::vector<double>(n * n, 0.0), origin) {}

  GridField(std::size_t n, double box, std::vector<double> values, Vec2 origin = {})
      : n_(n), box_(box), origin_(origin), values_(std::move(values)) {
    require(is_power_of_two(n), "GridField: n must be a power of two");
    require(box > 0.0 && std::isfinite(box), "GridField: box side must be positive");
    require(values_.size() == n * n, "GridField: value count must be n^2");
    refresh();
  }

  /// Samples f(Vec2) at every node.
  template <class F>
  static GridField sample(std::size_t n, double box, F&& f, Vec2 origin = {}) {
    std::vector<double> v(n * n);
    const double h = box / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        v[i * n + j] = f(Vec2{origin.x + h * static_cast<double>(i),
                              origin.y + h * static_cast<double>(j)});
    return GridField(n, box, std::move(v), origin);
  }

  std::size_t n() const { return n_; }
  double box() const { return box_; }
  Vec2 origin() const { return origin_; }
  double spacing() const { return box_ / static_cast<double>(n_); }
  double cell_area() const { return spacing() * spacing(); }
  double mean() const { return mean_; }

  double operator()(std::size_t i, std::size_t j) const { return values_[i * n_ + j]; }
  Vec2 node(std::size_t i, std::size_t j) const {
    return {origin_.x + spacing() * static_cast<double>(i),
            origin_.y + spacing() * static_cast<double>(j)};
  }
  std::span<const double> values() const { return values_; }

  /// Applies v -> op(v) to every sample.
  template <class Op>
  void transform(Op op) {
    for (double& v : values_) v = op(v);
    refresh();
  }

  /// Replaces the samples; the size must stay n^2.
  void assign(std::vector<double> values) {
    require(values.size() == n_ * n_, "GridField: value count must be n^2");
    values_ = std::move(values);
    refresh();
  }

  bool same_grid(const GridField& o) const {
    return n_ == o.n_ && box_ == o.box_ && origin_ == o.origin_;
  }

  GridField& operator+=(const GridField& o) {
    require(same_grid(o), "GridField: grids differ");
    for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += o.values_[k];
    refresh();
    return *this;
  }
  GridField& operator-=(const GridField& o) {
    require(same_grid(o), "GridField: grids differ");
    for (std::size_t k = 0; k < values_.size(); ++k) values_[k] -= o.values_[k];
    refresh();
    return *this;
  }
  GridField& operator*=(double s) {
    transform([s](double v) { return s * v; });
    return *this;
  }
  friend GridField operator+(GridField a, const GridField& b) { return a += b; }
  friend GridField operator-(GridField a, const GridField& b) { return a -= b; }
  friend GridField operator*(double s, GridField a) { return a *= s; }

 private:
  void refresh() {
    for (double v : values_)
      if (!std::isfinite(v)) throw PreconditionError("GridField: non-finite sample");
    mean_ = std::accumulate(values_.begin(), values_.end(), 0.0) /
            static_cast<double>(values_.size());
  }

  std::size_t n_;
  double box_;
  Vec2 origin_;
  std::vector<double> values_;
  double mean_ = 0.0;
};

/// Fourier coefficients of a real GridField in DFT index order.
struct Spectrum {
  std::size_t n = 0;
  double box = 1.0;
  std::vector<Complex> coeffs;

  Complex at(long xi1, long xi2) const {
    const long nn = static_cast<long>(n);
    auto idx = [nn](long k) { return static_cast<std::size_t>(((k % nn) + nn) % nn); };
    return coeffs[idx(xi1) * n + idx(xi2)];
  }
};

inline Spectrum to_spectrum(const GridField& f) {
  const std::size_t n = f.n();
  Spectrum s{n, f.box(), std::vector<Complex>(n * n)};
  auto vals = f.values();
  std::transform(vals.begin(), vals.end(), s.coeffs.begin(),
                 [](double v) { return Complex(v, 0.0); });
  fft2d_forward(s.coeffs, n);
  const double scale = 1.0 / static_cast<double>(n * n);
  for (auto& c : s.coeffs) c *= scale;
  return s;
}

/// Inverse of to_spectrum; the imaginary part (zero for Hermitian input) is dropped.
inline GridField from_spectrum(const Spectrum& s, Vec2 origin = {}) {
  std::vector<Complex> buf = s.coeffs;
  fft2d_backward(buf, s.n);
  std::vector<double> v(buf.size());
  std::transform(buf.begin(), buf.end(), v.begin(), [](Complex c) { return c.real(); });
  return GridField(s.n, s.box, std::move(v), origin);
}

/// |fhat(xi)|^2 in DFT index order.
inline std::vector<double> power_spectrum(const Spectrum& s) {
  std::vector<double> p(s.coeffs.size());
  std::transform(s.coeffs.begin(), s.coeffs.end(), p.begin(),
                 [](Complex c) { return std::norm(c); });
  return p;
}

/// |2 pi xi / L| for DFT indices (k1, k2).
inline double wavenumber(std::size_t k1, std::size_t k2, std::size_t n, double box) {
  const double a = static_cast<double>(signed_frequency(k1, n));
  const double b = static_cast<double>(signed_frequency(k2, n));
  return kTwoPi * std::hypot(a, b) / box;
}

/// Riemann-sum L^p norm, p >= 1.
inline double lp_norm(const GridField& f, double p) {
  require(p >= 1.0, "lp_norm: p must be >= 1");
  double acc = 0.0;
  if (p == 1.0) {
    for (double v : f.values()) acc += std::abs(v);
    return acc * f.cell_area();
  }
  if (p == 2.0) {
    for (double v : f.values()) acc += v * v;
    return std::sqrt(acc * f.cell_area());
  }
  for (double v : f.values()) acc += std::pow(std::abs(v), p);
  return std::pow(acc * f.cell_area(), 1.0 / p);
}

inline double sup_norm(const GridField& f) {
  double m = 0.0;
  for (double v : f.values()) m = std::max(m, std::abs(v));
  return m;
}

/// Largest |mean| accepted by negative-order norms.
inline double mean_tolerance(const GridField& f) { return 1e-8 * lp_norm(f, 2.0); }

/// Homogeneous negative Sobolev norm (L^2 sum_{xi != 0} |fhat|^2 |2 pi xi/L|^{-2s})^{1/2}.
/// The field must have (numerically) zero mean.
inline double sobolev_neg_norm(const Spectrum& s, double order) {
  require(order > 0.0, "sobolev_neg_norm: order must be positive");
  const std::size_t n = s.n;
  double acc = 0.0;
  for (std::size_t k1 = 0; k1 < n; ++k1)
    for (std::size_t k2 = 0; k2 < n; ++k2) {
      if (k1 == 0 && k2 == 0) continue;
      const double k = wavenumber(k1, k2, n, s.box);
      acc += std::norm(s.coeffs[k1 * n + k2]) * std::pow(k, -2.0 * order);
    }
  return std::sqrt(s.box * s.box * acc);
}

inline double sobolev_neg_norm(const GridField& f, double order) {
  if (std::abs(f.mean()) > mean_tolerance(f))
    throw PreconditionError("sobolev_neg_norm: field mean " + std::to_string(f.mean()) +
                            " exceeds tolerance; negative norm undefined on the torus");
  return sobolev_neg_norm(to_spectrum(f), order);
}

/// Discrete total variation: sum over nodes of |forward-difference gradient| dx^2.
inline double bv_seminorm(const GridField& f) {
  const std::size_t n = f.n();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t ip = (i + 1) % n;
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t jp = (j + 1) % n;
      acc += std::hypot(f(ip, j) - f(i, j), f(i, jp) - f(i, j));
    }
  }
  return acc * f.spacing();
}

namespace detail {

// Per-axis phase factors exp(2 pi i nu h / L) for the signed and mirror frequency.
struct AxisPhases {
  std::vector<Complex> direct;
  std::vector<Complex> mirror;
};

inline AxisPhases axis_phases(std::size_t n, double box, double h) {
  AxisPhases a{std::vector<Complex>(n), std::vector<Complex>(n)};
  for (std::size_t k = 0; k < n; ++k) {
    const double phi = kTwoPi * static_cast<double>(signed_frequency(k, n)) * h / box;
    a.direct[k] = std::polar(1.0, phi);
    const double psi = kTwoPi * static_cast<double>(mirror_frequency(k, n)) * h / box;
    a.mirror[k] = std::polar(1.0, psi);
  }
  return a;
}

// Translation multiplier of index (k1, k2). Off the Nyquist lines this is the
// plain phase factor; on them it averages the two aliased frequencies so the
// translated field stays real.
inline Complex shift_multiplier(const AxisPhases& a1, const AxisPhases& a2, std::size_t k1,
                                std::size_t k2) {
  return 0.5 * (a1.direct[k1] * a2.direct[k2] + a1.mirror[k1] * a2.mirror[k2]);
}

}  // namespace detail

/// Band-limited translation g(x) = f(x + h) through the spectral phase factor.
inline GridField shift(const Spectrum& s, Vec2 h, Vec2 origin = {}) {
  const std::size_t n = s.n;
  const auto a1 = detail::axis_phases(n, s.box, h.x);
  const auto a2 = detail::axis_phases(n, s.box, h.y);
  Spectrum out{n, s.box, std::vector<Complex>(n * n)};
  for (std::size_t k1 = 0; k1 < n; ++k1)
    for (std::size_t k2 = 0; k2 < n; ++k2)
      out.coeffs[k1 * n + k2] = detail::shift_multiplier(a1, a2, k1, k2) * s.coeffs[k1 * n + k2];
  return from_spectrum(out, origin);
}

inline GridField shift(const GridField& f, Vec2 h) { return shift(to_spectrum(f), h, f.origin()); }

/// Spectral partial derivative along axis 0 (x1) or 1 (x2).
inline GridField spectral_derivative(const GridField& f, int axis) {
  Spectrum s = to_spectrum(f);
  const std::size_t n = s.n;
  for (std::size_t k1 = 0; k1 < n; ++k1)
    for (std::size_t k2 = 0; k2 < n; ++k2) {
      const std::size_t k = axis == 0 ? k1 : k2;
      // The Nyquist sine mode is invisible on the grid; its derivative is dropped.
      const double nu = k == n / 2 ? 0.0 : static_cast<double>(signed_frequency(k, n));
      s.coeffs[k1 * n + k2] *= Complex(0.0, kTwoPi * nu / s.box);
    }
  return from_spectrum(s, f.origin());
}

}  // namespace loglab
