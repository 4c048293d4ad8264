#pragma once

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <utility>
#include <vector>

namespace loglab {

using Complex = std::complex<double>;

namespace detail {

// FFTW planning is not thread safe; execution with the new-array interface is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct PlanDeleter {
  void operator()(fftw_plan_s* p) const {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(p);
  }
};
using PlanHandle = std::unique_ptr<fftw_plan_s, PlanDeleter>;

struct PlanPair {
  PlanHandle forward;
  PlanHandle backward;
};

inline const PlanPair& plans_for(std::size_t n) {
  static std::map<std::size_t, PlanPair> cache;
  std::lock_guard lock(fftw_planner_mutex());
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  std::vector<Complex> scratch(n * n);
  auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
  const int ni = static_cast<int>(n);
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  PlanPair pair{PlanHandle(fftw_plan_dft_2d(ni, ni, buf, buf, FFTW_FORWARD, flags)),
                PlanHandle(fftw_plan_dft_2d(ni, ni, buf, buf, FFTW_BACKWARD, flags))};
  return cache.emplace(n, std::move(pair)).first->second;
}

}  // namespace detail

/// Unnormalized 2-D DFT over an n x n row-major array, in place.
/// forward: X[k] = sum_x x[j] e^{-2 pi i k.j / n}; backward uses e^{+...}.
inline void fft2d_forward(std::span<Complex> data, std::size_t n) {
  auto* p = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(detail::plans_for(n).forward.get(), p, p);
}

inline void fft2d_backward(std::span<Complex> data, std::size_t n) {
  auto* p = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(detail::plans_for(n).backward.get(), p, p);
}

/// Signed integer frequency of DFT index k; the Nyquist index n/2 maps to +n/2.
inline long signed_frequency(std::size_t k, std::size_t n) {
  return k <= n / 2 ? static_cast<long>(k) : static_cast<long>(k) - static_cast<long>(n);
}

/// Frequency the Hermitian partner of index k assigns to k: differs from
/// signed_frequency only at the Nyquist index, where it is -n/2.
inline long mirror_frequency(std::size_t k, std::size_t n) {
  return -signed_frequency((n - k) % n, n);
}

}  // namespace loglab
