#pragma once

// The frozen field corpus that calibration measures constants on and that
// regression runs re-measure.

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "loglab/constructions/block_decay.hpp"
#include "loglab/flow/lusin.hpp"
#include "loglab/functionals/inequalities.hpp"

namespace loglab {

/// Random real mean-zero field with spectrum on |xi_i| <= kmax and
/// coefficients decaying like (1 + |xi|)^-decay.
inline GridField random_band_limited(std::size_t n, double box, long kmax, std::uint64_t seed,
                                     double decay = 1.0, Vec2 origin = {}) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Spectrum s{n, box, std::vector<Complex>(n * n)};
  const long nn = static_cast<long>(n);
  auto idx = [nn](long k) { return static_cast<std::size_t>(((k % nn) + nn) % nn); };
  for (long a = 0; a <= kmax; ++a)
    for (long b = -kmax; b <= kmax; ++b) {
      if (a == 0 && b <= 0) continue;
      const double amp = std::pow(1.0 + std::hypot(a, b), -decay);
      const Complex c(amp * g(rng), amp * g(rng));
      s.coeffs[idx(a) * n + idx(b)] = c;
      s.coeffs[idx(-a) * n + idx(-b)] = std::conj(c);
    }
  return from_spectrum(s, origin);
}

struct CorpusField {
  std::string name;
  GridField f;
  bool smooth = true;
};

inline GridField without_mean(GridField f) {
  const double m = f.mean();
  f.transform([m](double v) { return v - m; });
  return f;
}

/// Random band-limited fields, a single mode, the zero field, and the block
/// datum advected to t = 4 and t = 8 (mean removed: the samples carry a
/// small quadrature mean).
inline std::vector<CorpusField> field_corpus(std::size_t count, std::uint64_t seed, std::size_t n = 128) {
  std::vector<CorpusField> c;
  for (std::size_t k = 0; k < count; ++k)
    c.push_back({"band-limited-" + std::to_string(k),
                 random_band_limited(n, 1.0, 2 + static_cast<long>(k % 7), seed + k, 1.0)});
  c.push_back({"single-mode",
               GridField::sample(n, 1.0, [](Vec2 x) { return std::cos(kTwoPi * 3.0 * x.x); })});
  c.push_back({"zero", GridField(n, 1.0)});
  const BuildingBlock bb;
  std::vector<GridField> evolved;
  block_decay_series(bb, {4.0, 8.0}, n, 1e-8, &evolved);
  c.push_back({"block-t4", without_mean(evolved[0]), false});
  c.push_back({"block-t8", without_mean(evolved[1]), false});
  return c;
}

/// |grad f| from spectral derivatives.
inline GridField gradient_norm_field(const GridField& f) {
  const GridField a = spectral_derivative(f, 0), b = spectral_derivative(f, 1);
  std::vector<double> v(f.n() * f.n());
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = std::hypot(a.values()[k], b.values()[k]);
  return GridField(f.n(), f.box(), std::move(v), f.origin());
}

/// g = log max(s M|grad f|, 1) with s doubled from 1 until the pair
/// precondition of the key lemma holds on the sampled pairs.
inline GridField maximal_witness(const GridField& f, std::uint64_t seed = 1) {
  const GridField m = maximal_function(gradient_norm_field(f));
  for (double s = 1.0; s < 1e9; s *= 2.0) {
    GridField g = m;
    g.transform([s](double v) { return std::log(std::max(s * v, 1.0)); });
    if (lusin_pair_check(f, g, 10000, seed).violations == 0) return g;
  }
  throw SolverError("maximal_witness: no admissible scale");
}

}  // namespace loglab
