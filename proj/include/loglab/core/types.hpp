#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace loglab {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Point or displacement in the plane.
struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2& operator+=(Vec2 o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  constexpr Vec2& operator-=(Vec2 o) {
    x -= o.x;
    y -= o.y;
    return *this;
  }
  friend constexpr Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend constexpr Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend constexpr Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend constexpr Vec2 operator*(Vec2 a, double s) { return {s * a.x, s * a.y}; }
  friend constexpr Vec2 operator/(Vec2 a, double s) { return {a.x / s, a.y / s}; }
  friend constexpr bool operator==(Vec2, Vec2) = default;
};

inline double norm(Vec2 v) { return std::hypot(v.x, v.y); }

/// Row-major 2x2 matrix; used for velocity gradients, (i,j) = d v_i / d x_j.
struct Mat2 {
  double a11 = 0.0, a12 = 0.0, a21 = 0.0, a22 = 0.0;

  friend constexpr Mat2 operator*(double s, Mat2 m) {
    return {s * m.a11, s * m.a12, s * m.a21, s * m.a22};
  }
  constexpr double trace() const { return a11 + a22; }
};

inline double frobenius(const Mat2& m) {
  return std::sqrt(m.a11 * m.a11 + m.a12 * m.a12 + m.a21 * m.a21 + m.a22 * m.a22);
}

/// Violated operation precondition (bad argument, ill-defined norm, ...).
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The requested computation is not resolved by the chosen grid.
class ResolutionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numerical solver diagnostic failed (NaN, norm drift, ...).
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool ok, const std::string& what) {
  if (!ok) throw PreconditionError(what);
}

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

/// Wrap x into [lo, lo + period).
inline double wrap(double x, double lo, double period) {
  double r = std::fmod(x - lo, period);
  if (r < 0.0) r += period;
  if (r >= period) r -= period;
  return lo + r;
}

/// Signed minimal-image difference a - b on a circle of given period.
inline double periodic_delta(double a, double b, double period) {
  double d = std::remainder(a - b, period);
  return d;
}

inline double periodic_distance(Vec2 a, Vec2 b, double period) {
  return std::hypot(periodic_delta(a.x, b.x, period), periodic_delta(a.y, b.y, period));
}

}  // namespace loglab
