#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "loglab/core/fft.hpp"
#include "loglab/core/grid_field.hpp"

namespace loglab {

/// Number of lattice offsets inside the discrete ball of radius r, and the
/// offsets' indicator as an n x n periodic array.
inline std::vector<double> ball_indicator(std::size_t n, double box, double radius,
                                          std::size_t* count = nullptr) {
  const double h = box / static_cast<double>(n);
  const double r2 = radius * radius * (1.0 + 1e-12);
  std::vector<double> ind(n * n, 0.0);
  std::size_t c = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = h * static_cast<double>(signed_frequency(i, n));
    for (std::size_t j = 0; j < n; ++j) {
      const double b = h * static_cast<double>(signed_frequency(j, n));
      if (a * a + b * b <= r2) {
        ind[i * n + j] = 1.0;
        ++c;
      }
    }
  }
  if (count) *count = c;
  return ind;
}

/// Spectrum of the normalized ball indicator, scaled so that multiplying a
/// forward FFT by it and transforming back yields ball averages.
inline std::vector<Complex> ball_kernel_spectrum(std::size_t n, double box, double radius) {
  std::size_t count = 0;
  auto ind = ball_indicator(n, box, radius, &count);
  std::vector<Complex> k(ind.begin(), ind.end());
  fft2d_forward(k, n);
  const double scale = 1.0 / (static_cast<double>(count) * static_cast<double>(n * n));
  for (auto& c : k) c *= scale;
  return k;
}

/// Averages over discrete balls of fixed radii, evaluated at every node by
/// spectral (circular) convolution with the normalized ball indicator.
class BallAverager {
 public:
  BallAverager(std::size_t n, double box, std::vector<double> radii)
      : n_(n), box_(box), radii_(std::move(radii)) {
    kernels_.reserve(radii_.size());
    for (double r : radii_) kernels_.push_back(ball_kernel_spectrum(n_, box_, r));
  }

  const std::vector<double>& radii() const { return radii_; }
  std::size_t n() const { return n_; }
  double box() const { return box_; }

  /// Calls visit(radius_index, averages) for every radius, in order.
  template <class Visit>
  void for_each(const GridField& f, Visit&& visit) const {
    require(f.n() == n_ && f.box() == box_, "BallAverager: grid mismatch");
    std::vector<Complex> fh(f.values().begin(), f.values().end());
    fft2d_forward(fh, n_);
    std::vector<Complex> work(n_ * n_);
    std::vector<double> avg(n_ * n_);
    for (std::size_t r = 0; r < kernels_.size(); ++r) {
      for (std::size_t k = 0; k < work.size(); ++k) work[k] = fh[k] * kernels_[r][k];
      fft2d_backward(work, n_);
      std::transform(work.begin(), work.end(), avg.begin(), [](Complex c) { return c.real(); });
      visit(r, std::span<const double>(avg));
    }
  }

 private:
  std::size_t n_;
  double box_;
  std::vector<double> radii_;
  std::vector<std::vector<Complex>> kernels_;
};

/// Dyadic ladder spacing * 2^k, k = 0, 1, ..., capped at box / 2.
inline std::vector<double> dyadic_radii(std::size_t n, double box) {
  std::vector<double> r;
  for (double rad = box / static_cast<double>(n); rad <= 0.5 * box * (1 + 1e-12); rad *= 2.0)
    r.push_back(rad);
  return r;
}

}  // namespace loglab
