#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include "loglab/core/grid_field.hpp"

namespace loglab {

/// Product rule for integrals over the annulus r_min <= |h| <= r_max in the
/// plane: midpoint nodes in log r times uniform angles. In u = log r the
/// area element is r^2 du dtheta, which keeps the weights smooth across the
/// decades the kernels live on.
struct HQuadrature {
  double r_min = 0.0;
  double r_max = 1.0 / 3.0;
  std::size_t n_shells = 64;
  std::size_t n_angles = 32;
  std::vector<double> radii;    // shell midpoints, increasing
  std::vector<double> weights;  // per node on shell s (same for every angle)

  static HQuadrature make(double r_min, double r_max, std::size_t shells = 64,
                          std::size_t angles = 32) {
    require(r_min > 0.0 && r_max > r_min, "HQuadrature: need 0 < r_min < r_max");
    require(shells > 0, "HQuadrature: need at least one shell");
    require(angles >= 2 && angles % 2 == 0, "HQuadrature: angle count must be even");
    HQuadrature q;
    q.r_min = r_min;
    q.r_max = r_max;
    q.n_shells = shells;
    q.n_angles = angles;
    const double du = std::log(r_max / r_min) / static_cast<double>(shells);
    const double dtheta = kTwoPi / static_cast<double>(angles);
    for (std::size_t s = 0; s < shells; ++s) {
      const double r = r_min * std::exp((static_cast<double>(s) + 0.5) * du);
      q.radii.push_back(r);
      q.weights.push_back(r * r * du * dtheta);
    }
    return q;
  }

  /// Default rule for a field: innermost shell at the grid spacing.
  static HQuadrature for_grid(const GridField& f, double r_max = 1.0 / 3.0,
                              std::size_t shells = 64, std::size_t angles = 32) {
    return make(f.spacing(), r_max, shells, angles);
  }

  std::size_t size() const { return n_shells * n_angles; }

  double angle(std::size_t a) const {
    return (static_cast<double>(a) + 0.5) * kTwoPi / static_cast<double>(n_angles);
  }

  Vec2 node(std::size_t shell, std::size_t a) const {
    const double th = angle(a);
    return {radii[shell] * std::cos(th), radii[shell] * std::sin(th)};
  }

  double total_weight() const {
    double acc = 0.0;
    for (double w : weights) acc += w;
    return acc * static_cast<double>(n_angles);
  }

  double annulus_area() const { return std::numbers::pi * (r_max * r_max - r_min * r_min); }

  std::string truncation_note() const {
    return "shifts with |h| < " + std::to_string(r_min) + " omitted (sub-grid); |h| > " +
           std::to_string(r_max) + " outside the domain";
  }
};

/// Accumulates sum_nodes weight * value(h) * kernel(|h|) for integrands that
/// are even in h: only the first half of the angles is visited and doubled.
/// Shells are summed in a fixed order so the result is reproducible.
template <class Value, class Kernel>
double integrate_even(const HQuadrature& q, Value&& value, Kernel&& kernel) {
  const std::size_t half = q.n_angles / 2;
  double total = 0.0;
  for (std::size_t s = 0; s < q.n_shells; ++s) {
    double shell = 0.0;
    for (std::size_t a = 0; a < half; ++a) shell += value(q.node(s, a));
    total += 2.0 * shell * q.weights[s] * kernel(q.radii[s]);
  }
  return total;
}

/// Largest value(h) * kernel(|h|) over the nodes, for even integrands.
template <class Value, class Kernel>
double sup_even(const HQuadrature& q, Value&& value, Kernel&& kernel) {
  const std::size_t half = q.n_angles / 2;
  double best = 0.0;
  for (std::size_t s = 0; s < q.n_shells; ++s) {
    const double k = kernel(q.radii[s]);
    for (std::size_t a = 0; a < half; ++a) best = std::max(best, value(q.node(s, a)) * k);
  }
  return best;
}

}  // namespace loglab
