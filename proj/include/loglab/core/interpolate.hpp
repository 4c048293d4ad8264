#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "loglab/core/fft.hpp"
#include "loglab/core/grid_field.hpp"

namespace loglab {

/// Periodic bilinear interpolation of grid samples. Used for rough data,
/// where spectral reconstruction would ring.
class BilinearSampler {
 public:
  explicit BilinearSampler(GridField f) : f_(std::move(f)) {}

  double operator()(Vec2 x) const {
    const std::size_t n = f_.n();
    const double inv = 1.0 / f_.spacing();
    const double u = (x.x - f_.origin().x) * inv;
    const double v = (x.y - f_.origin().y) * inv;
    const double fu = std::floor(u), fv = std::floor(v);
    const double a = u - fu, b = v - fv;
    const long nn = static_cast<long>(n);
    const auto i0 = static_cast<std::size_t>(((static_cast<long>(fu) % nn) + nn) % nn);
    const auto j0 = static_cast<std::size_t>(((static_cast<long>(fv) % nn) + nn) % nn);
    const std::size_t i1 = (i0 + 1) % n, j1 = (j0 + 1) % n;
    return (1 - a) * (1 - b) * f_(i0, j0) + a * (1 - b) * f_(i1, j0) + (1 - a) * b * f_(i0, j1) +
           a * b * f_(i1, j1);
  }

  const GridField& field() const { return f_; }

 private:
  GridField f_;
};

/// Spectral reconstruction for smooth data: exact band-limited upsampling by
/// an integer factor, then periodic Catmull-Rom bicubic on the fine grid.
class SpectralSampler {
 public:
  explicit SpectralSampler(const GridField& f, std::size_t factor = 0)
      : n_(f.n()), origin_(f.origin()) {
    if (factor == 0) factor = std::max<std::size_t>(1, std::min<std::size_t>(4, 2048 / n_));
    fine_n_ = n_ * factor;
    fine_h_ = f.box() / static_cast<double>(fine_n_);
    const Spectrum s = to_spectrum(f);
    std::vector<Complex> big(fine_n_ * fine_n_, Complex{});
    const long fn = static_cast<long>(fine_n_);
    auto place = [fn](long nu) { return static_cast<std::size_t>(((nu % fn) + fn) % fn); };
    for (std::size_t k1 = 0; k1 < n_; ++k1)
      for (std::size_t k2 = 0; k2 < n_; ++k2) {
        const Complex c = s.coeffs[k1 * n_ + k2];
        const long a = signed_frequency(k1, n_), b = signed_frequency(k2, n_);
        const bool nyq1 = k1 == n_ / 2, nyq2 = k2 == n_ / 2;
        const double w = (nyq1 ? 0.5 : 1.0) * (nyq2 ? 0.5 : 1.0);
        for (long sa : {1L, -1L}) {
          if (sa < 0 && !nyq1) continue;
          for (long sb : {1L, -1L}) {
            if (sb < 0 && !nyq2) continue;
            big[place(sa * a) * fine_n_ + place(sb * b)] += w * c;
          }
        }
      }
    fft2d_backward(big, fine_n_);
    fine_.resize(big.size());
    for (std::size_t k = 0; k < big.size(); ++k) fine_[k] = big[k].real();
  }

  double operator()(Vec2 x) const {
    const double u = (x.x - origin_.x) / fine_h_;
    const double v = (x.y - origin_.y) / fine_h_;
    const double fu = std::floor(u), fv = std::floor(v);
    const double a = u - fu, b = v - fv;
    double wa[4], wb[4];
    weights(a, wa);
    weights(b, wb);
    const long nn = static_cast<long>(fine_n_);
    const long i0 = static_cast<long>(fu), j0 = static_cast<long>(fv);
    double acc = 0.0;
    for (int p = 0; p < 4; ++p) {
      const auto i = static_cast<std::size_t>((((i0 + p - 1) % nn) + nn) % nn);
      double row = 0.0;
      for (int q = 0; q < 4; ++q) {
        const auto j = static_cast<std::size_t>((((j0 + q - 1) % nn) + nn) % nn);
        row += wb[q] * fine_[i * fine_n_ + j];
      }
      acc += wa[p] * row;
    }
    return acc;
  }

 private:
  static void weights(double t, double* w) {
    const double t2 = t * t, t3 = t2 * t;
    w[0] = 0.5 * (-t3 + 2 * t2 - t);
    w[1] = 0.5 * (3 * t3 - 5 * t2 + 2);
    w[2] = 0.5 * (-3 * t3 + 4 * t2 + t);
    w[3] = 0.5 * (t3 - t2);
  }

  std::size_t n_;
  Vec2 origin_;
  std::size_t fine_n_ = 0;
  double fine_h_ = 0.0;
  std::vector<double> fine_;
};

}  // namespace loglab
