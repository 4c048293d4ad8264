#pragma once

// Scales, amplitudes and time scales of the patched construction, and the
// placement of its cubes inside the unit disk.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "loglab/core/types.hpp"
#include "loglab/functionals/inequalities.hpp"

namespace loglab {

struct ScheduleN {
  int N = 0;
  double p = 1.0;
  int d = 2;
  std::vector<double> lambda;  // lambda_n = e^{-n}
  std::vector<double> gamma;   // gamma_n = 1/n^2
  std::vector<double> tau;     // tau_n = (n^2 e^{-dn})^{1/p}
  std::vector<Vec2> centers;
  double box = 2.0;            // composite periodic box [-1, 1)^2
  Vec2 origin{-1.0, -1.0};

  double lambda_n(int n) const { return lambda.at(static_cast<std::size_t>(n - 1)); }
  double gamma_n(int n) const { return gamma.at(static_cast<std::size_t>(n - 1)); }
  double tau_n(int n) const { return tau.at(static_cast<std::size_t>(n - 1)); }
  Vec2 center(int n) const { return centers.at(static_cast<std::size_t>(n - 1)); }

  /// Q_n: side 3 lambda_n about x_n.
  Box2 cube(int n) const {
    const double h = 1.5 * lambda_n(n);
    const Vec2 c = center(n);
    return {{c.x - h, c.y - h}, {c.x + h, c.y + h}};
  }
  /// Support of the rescaled block: the cell x_n + lambda_n [-1/2, 1/2]^2.
  Box2 cell(int n) const {
    const double h = 0.5 * lambda_n(n);
    const Vec2 c = center(n);
    return {{c.x - h, c.y - h}, {c.x + h, c.y + h}};
  }

  /// Block whose open cell contains x (1-based), or 0.
  int block_at(Vec2 x) const {
    for (int n = 1; n <= N; ++n) {
      const Vec2 c = center(n);
      const double h = 0.5 * lambda_n(n);
      if (std::abs(x.x - c.x) < h && std::abs(x.y - c.y) < h) return n;
    }
    return 0;
  }
};

inline double schedule_lambda(int n) { return std::exp(-static_cast<double>(n)); }
inline double schedule_gamma(int n) { return 1.0 / (static_cast<double>(n) * static_cast<double>(n)); }
inline double schedule_tau(int n, double p, int d) {
  const double m = static_cast<double>(n);
  return std::pow(m * m * std::exp(-static_cast<double>(d) * m), 1.0 / p);
}

/// Hilbert curve of order 2^k: index -> cell (x, y).
inline std::pair<std::uint32_t, std::uint32_t> hilbert_point(std::uint32_t side, std::uint64_t d) {
  std::uint32_t x = 0, y = 0;
  for (std::uint32_t s = 1; s < side; s *= 2) {
    const auto rx = static_cast<std::uint32_t>(1 & (d / 2));
    const auto ry = static_cast<std::uint32_t>(1 & (d ^ rx));
    if (ry == 0) {
      if (rx == 1) {
        x = s - 1 - x;
        y = s - 1 - y;
      }
      std::swap(x, y);
    }
    x += s * rx;
    y += s * ry;
    d /= 4;
  }
  return {x, y};
}

namespace detail {

inline bool box_in_unit_disk(const Box2& b) {
  for (double x : {b.lo.x, b.hi.x})
    for (double y : {b.lo.y, b.hi.y})
      if (x * x + y * y >= 1.0) return false;
  return true;
}

// Cells stay this far from the composite box edge, so shifts |h| <= 1/3 never
// carry one support onto the periodic image of another.
inline constexpr double kWrapGuard = 1.0 / 6.0;

inline bool cell_clear_of_edges(const Box2& b, double half) {
  const double lim = half - kWrapGuard;
  return b.lo.x > -lim && b.lo.y > -lim && b.hi.x < lim && b.hi.y < lim;
}

}  // namespace detail

/// Builds the schedule and packs the cubes largest first along a Hilbert
/// curve over [-1, 1]^2, taking the first admissible position for each.
inline ScheduleN make_schedule(int N, double p, int d = 2) {
  require(N >= 1, "make_schedule: N must be at least 1");
  require(p >= 1.0, "make_schedule: p must be >= 1");
  require(d == 2, "make_schedule: only the planar case is implemented");
  ScheduleN s;
  s.N = N;
  s.p = p;
  s.d = d;
  for (int n = 1; n <= N; ++n) {
    s.lambda.push_back(schedule_lambda(n));
    s.gamma.push_back(schedule_gamma(n));
    s.tau.push_back(schedule_tau(n, p, d));
  }
  const std::uint32_t side = 256;
  const double step = 2.0 / side;
  std::vector<Box2> placed;
  for (int n = 1; n <= N; ++n) {
    const double h = 1.5 * s.lambda_n(n), hc = 0.5 * s.lambda_n(n);
    bool found = false;
    for (std::uint64_t k = 0; k < std::uint64_t{side} * side && !found; ++k) {
      const auto [i, j] = hilbert_point(side, k);
      const Vec2 c{-1.0 + (i + 0.5) * step, -1.0 + (j + 0.5) * step};
      const Box2 q{{c.x - h, c.y - h}, {c.x + h, c.y + h}};
      const Box2 cell{{c.x - hc, c.y - hc}, {c.x + hc, c.y + hc}};
      if (!detail::box_in_unit_disk(q) || !detail::cell_clear_of_edges(cell, 0.5 * s.box)) continue;
      bool clear = true;
      for (const auto& o : placed) clear = clear && !o.overlaps(q);
      if (!clear) continue;
      placed.push_back(q);
      s.centers.push_back(c);
      found = true;
    }
    if (!found)
      throw PreconditionError("make_schedule: cannot pack cube " + std::to_string(n) +
                              " inside the unit disk");
  }
  return s;
}

/// Checks the parameter formulas bit for bit and the geometric constraints.
inline void validate_schedule(const ScheduleN& s) {
  require(s.N >= 1 && s.d == 2, "schedule: bad N or d");
  const auto N = static_cast<std::size_t>(s.N);
  require(s.lambda.size() == N && s.gamma.size() == N && s.tau.size() == N &&
              s.centers.size() == N,
          "schedule: array lengths differ from N");
  for (int n = 1; n <= s.N; ++n) {
    require(s.lambda_n(n) == schedule_lambda(n), "schedule: lambda_n != e^{-n}");
    require(s.gamma_n(n) == schedule_gamma(n), "schedule: gamma_n != 1/n^2");
    require(s.tau_n(n) == schedule_tau(n, s.p, s.d), "schedule: tau_n != (n^2 e^{-dn})^{1/p}");
    require(detail::box_in_unit_disk(s.cube(n)), "schedule: cube outside the unit disk");
    require(detail::cell_clear_of_edges(s.cell(n), 0.5 * s.box), "schedule: cell too close to box edge");
    for (int m = n + 1; m <= s.N; ++m)
      require(!s.cube(n).overlaps(s.cube(m)), "schedule: cubes overlap");
  }
}

inline nlohmann::json schedule_to_json(const ScheduleN& s) {
  nlohmann::json centers = nlohmann::json::array();
  for (Vec2 c : s.centers) centers.push_back({c.x, c.y});
  return {{"N", s.N},          {"p", s.p},         {"d", s.d},
          {"lambda", s.lambda}, {"gamma", s.gamma}, {"tau", s.tau},
          {"centers", centers}, {"box", s.box},     {"origin", {s.origin.x, s.origin.y}}};
}

inline ScheduleN schedule_from_json(const nlohmann::json& j) {
  ScheduleN s;
  s.N = j.at("N").get<int>();
  s.p = j.at("p").get<double>();
  s.d = j.at("d").get<int>();
  s.lambda = j.at("lambda").get<std::vector<double>>();
  s.gamma = j.at("gamma").get<std::vector<double>>();
  s.tau = j.at("tau").get<std::vector<double>>();
  for (const auto& c : j.at("centers")) s.centers.push_back({c.at(0).get<double>(), c.at(1).get<double>()});
  s.box = j.at("box").get<double>();
  s.origin = {j.at("origin").at(0).get<double>(), j.at("origin").at(1).get<double>()};
  validate_schedule(s);
  return s;
}

}  // namespace loglab
