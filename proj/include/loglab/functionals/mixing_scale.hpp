#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "loglab/core/ball_average.hpp"
#include "loglab/core/grid_field.hpp"

namespace loglab {

/// Probe radii spacing * 2^{k/4}, k = 0, 1, ..., up to box / 3.
inline std::vector<double> mixing_probe_radii(std::size_t n, double box) {
  std::vector<double> r;
  const double h = box / static_cast<double>(n);
  for (int k = 0;; ++k) {
    const double rad = h * std::pow(2.0, 0.25 * k);
    if (rad > box / 3.0 * (1 + 1e-12)) break;
    r.push_back(rad);
  }
  return r;
}

namespace detail {

inline double max_ball_average(const std::vector<Complex>& fh, std::size_t n, double box,
                               double radius) {
  const auto kernel = ball_kernel_spectrum(n, box, radius);
  std::vector<Complex> work(fh.size());
  for (std::size_t k = 0; k < work.size(); ++k) work[k] = fh[k] * kernel[k];
  fft2d_backward(work, n);
  double m = 0.0;
  for (const Complex& c : work) m = std::max(m, std::abs(c.real()));
  return m;
}

inline std::vector<Complex> forward(const GridField& f) {
  std::vector<Complex> fh(f.values().begin(), f.values().end());
  fft2d_forward(fh, f.n());
  return fh;
}

}  // namespace detail

/// Largest |ball average| of f over all nodes at radius r.
inline double max_ball_average(const GridField& f, double radius) {
  return detail::max_ball_average(detail::forward(f), f.n(), f.box(), radius);
}

/// Smallest probe radius eps with sup_x |avg_{B_eps(x)} f| < kappa, or
/// nullopt when f is unmixed at every probed scale. Requires |f| <= 1.
inline std::optional<double> geometric_mixing_scale(const GridField& f, double kappa) {
  require(kappa > 0.0 && kappa < 1.0, "geometric_mixing_scale: kappa must lie in (0,1)");
  require(sup_norm(f) <= 1.0 + 1e-12, "geometric_mixing_scale: rescale f to |f| <= 1 first");
  const auto fh = detail::forward(f);
  for (double r : mixing_probe_radii(f.n(), f.box()))
    if (detail::max_ball_average(fh, f.n(), f.box(), r) < kappa) return r;
  return std::nullopt;
}

}  // namespace loglab
