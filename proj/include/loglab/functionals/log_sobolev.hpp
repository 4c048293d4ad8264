#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "loglab/functionals/increments.hpp"
#include "loglab/functionals/quadrature.hpp"

namespace loglab {

struct LogSobolevResult {
  double value = 0.0;
  double order_p = 0.0;
  HQuadrature quadrature;
  std::string truncation_note;
};

namespace detail {

inline void require_log_domain(const HQuadrature& q) {
  require(q.r_max < 1.0, "log functional: r_max must be < 1 so that log(1/|h|) > 0");
}

}  // namespace detail

/// int_{r_min<|h|<r_max} int |f(x+h)-f(x)|^2 dx K(|h|) / |h|^2 dh for an
/// arbitrary radial weight K.
template <class Weight>
double radial_increment_integral(const IncrementEvaluator& ev, const HQuadrature& q,
                                 Weight&& weight) {
  return integrate_even(q, ev, [&](double r) { return weight(r) / (r * r); });
}

/// The gamma-weighted functional int int |f(x+h)-f(x)|^2 / (|h|^2 log(1/|h|)^gamma).
/// Order p corresponds to gamma = 1 - p.
inline double log_weighted_functional(const IncrementEvaluator& ev, double gamma,
                                      const HQuadrature& q) {
  detail::require_log_domain(q);
  return radial_increment_integral(ev, q, [gamma](double r) {
    return std::pow(std::log(1.0 / r), -gamma);
  });
}

inline double log_weighted_functional(const GridField& f, double gamma, const HQuadrature& q) {
  return log_weighted_functional(IncrementEvaluator(f), gamma, q);
}

/// Variant with weight |log(delta |h|)|^{-gamma}; requires delta * r_max < 1.
inline double delta_scaled_functional(const IncrementEvaluator& ev, double gamma, double delta,
                                      const HQuadrature& q) {
  require(delta > 0.0 && delta * q.r_max < 1.0, "delta_scaled_functional: need delta r_max < 1");
  return radial_increment_integral(ev, q, [gamma, delta](double r) {
    return std::pow(std::abs(std::log(delta * r)), -gamma);
  });
}

/// Log-Sobolev functional of order p (uncapped increments).
inline LogSobolevResult log_sobolev(const GridField& f, double p, const HQuadrature& q) {
  require(p > 0.0, "log_sobolev: order p must be positive");
  detail::require_log_domain(q);
  require(q.r_min >= f.spacing() * (1.0 - 1e-12), "log_sobolev: r_min below grid spacing");
  LogSobolevResult res;
  res.value = log_weighted_functional(IncrementEvaluator(f), 1.0 - p, q);
  res.order_p = p;
  res.quadrature = q;
  res.truncation_note = q.truncation_note();
  return res;
}

inline LogSobolevResult log_sobolev(const GridField& f, double p) {
  return log_sobolev(f, p, HQuadrature::for_grid(f));
}

/// Physical frequency below which the Fourier-side functional switches from
/// the logarithmic weight to the quadratic one.
inline constexpr double kFourierThreshold = 10.0;

/// L^2 sum_{|k| >= 10} log(|k|)^p |fhat|^2 + L^2 sum_{|k| < 10} |k|^2 |fhat|^2,
/// k = 2 pi xi / L.
inline double log_sobolev_fourier(const Spectrum& s, double p) {
  require(p > 0.0, "log_sobolev_fourier: order p must be positive");
  double acc = 0.0;
  for (std::size_t k1 = 0; k1 < s.n; ++k1)
    for (std::size_t k2 = 0; k2 < s.n; ++k2) {
      const double k = wavenumber(k1, k2, s.n, s.box);
      const double w = k >= kFourierThreshold ? std::pow(std::log(k), p) : k * k;
      acc += w * std::norm(s.coeffs[k1 * s.n + k2]);
    }
  return s.box * s.box * acc;
}

inline double log_sobolev_fourier(const GridField& f, double p) {
  return log_sobolev_fourier(to_spectrum(f), p);
}

/// max over nodes of log(1/|h|)^p int min(1, |f(x+h)-f(x)|^2) dx.
inline double sup_log_increment(const GridField& f, double p, const HQuadrature& q) {
  detail::require_log_domain(q);
  const Spectrum s = to_spectrum(f);
  return sup_even(
      q,
      [&](Vec2 h) {
        return real_space_increment(f, s, h, [](double d) { return std::min(1.0, d * d); });
      },
      [p](double r) { return std::pow(std::log(1.0 / r), p); });
}

/// max over nodes of log(1/|h|)^p int |f(x+h)-f(x)| dx.
inline double sup_log_l1_increment(const GridField& f, double p, const HQuadrature& q) {
  detail::require_log_domain(q);
  const Spectrum s = to_spectrum(f);
  return sup_even(
      q, [&](Vec2 h) { return real_space_increment(f, s, h, [](double d) { return std::abs(d); }); },
      [p](double r) { return std::pow(std::log(1.0 / r), p); });
}

/// Order-p functional with the pointwise cap 1 ^ |f(x+h)-f(x)|^2.
inline double capped_log_sobolev(const GridField& f, double p, const HQuadrature& q) {
  detail::require_log_domain(q);
  const Spectrum s = to_spectrum(f);
  return integrate_even(
      q,
      [&](Vec2 h) {
        return real_space_increment(f, s, h, [](double d) { return std::min(1.0, d * d); });
      },
      [p](double r) { return std::pow(std::log(1.0 / r), p - 1.0) / (r * r); });
}

}  // namespace loglab
