#pragma once

// Alternating sinusoidal shear on the unit cell Q = [-1/2, 1/2]^2, cut off
// smoothly near the cell boundary through its stream function so that it is
// exactly divergence-free and vanishes to all orders on the boundary.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "loglab/core/grid_field.hpp"
#include "loglab/flow/solve_ce.hpp"

namespace loglab {

/// Smooth step S(z): 0 for z <= 0, 1 for z >= 1, built from exp(-1/z).
struct SmoothStep {
  double value = 0.0, d1 = 0.0, d2 = 0.0;

  static SmoothStep at(double z) {
    if (z <= 0.0) return {0.0, 0.0, 0.0};
    if (z >= 1.0) return {1.0, 0.0, 0.0};
    const auto a = base(z), b = base(1.0 - z);
    // a = f(z), b = f(1 - z); b' and b'' carry the chain-rule signs.
    const double A = a.f, A1 = a.f1, A2 = a.f2;
    const double B = b.f, B1 = -b.f1, B2 = b.f2;
    const double D = A + B, D1 = A1 + B1;
    const double N = A1 * B - A * B1;
    const double N1 = A2 * B - A * B2;
    return {A / D, N / (D * D), N1 / (D * D) - 2.0 * N * D1 / (D * D * D)};
  }

 private:
  struct F {
    double f, f1, f2;
  };
  // f(z) = exp(-1/z) and its first two derivatives, z in (0, 1).
  static F base(double z) {
    const double e = std::exp(-1.0 / z);
    const double z2 = z * z;
    return {e, e / z2, e * (1.0 / (z2 * z2) - 2.0 / (z2 * z))};
  }
};

/// Cutoff profile eta(s) = S((1/2 - |s|) / w) on [-1/2, 1/2] with derivatives.
struct Cutoff {
  double width = 1.0 / 16.0;

  SmoothStep at(double s) const {
    const double u = (0.5 - std::abs(s)) / width;
    const SmoothStep st = SmoothStep::at(u);
    const double sign = s >= 0.0 ? 1.0 : -1.0;
    return {st.value, -sign * st.d1 / width, st.d2 / (width * width)};
  }
  double core() const { return 0.5 - width; }
};

enum class InitialProfile { sine_core, sine_cell };

struct BuildingBlock {
  double switch_period = 1.0;  // T_sw
  double amplitude = 1.0;      // A
  double cutoff_width = 1.0 / 16.0;
  InitialProfile profile = InitialProfile::sine_core;

  /// Mean-zero initial datum on Q, compactly supported in the cutoff core.
  double rho0(Vec2 y) const {
    const Vec2 x{wrap(y.x, -0.5, 1.0), wrap(y.y, -0.5, 1.0)};
    const double a = 0.5 - cutoff_width;
    if (profile == InitialProfile::sine_cell)
      return std::sin(kTwoPi * x.x) * std::sin(kTwoPi * x.y);
    if (std::abs(x.x) >= a || std::abs(x.y) >= a) return 0.0;
    return std::sin(std::numbers::pi * x.x / a) * std::sin(std::numbers::pi * x.y / a);
  }

  /// ||rho0||_{L^2} in closed form.
  double rho0_l2() const {
    if (profile == InitialProfile::sine_cell) return 0.5;
    return 0.5 - cutoff_width;
  }

  double rho0_sup() const { return 1.0; }
};

/// Velocity of a building block on the periodic unit cell.
class BlockVelocity {
 public:
  explicit BlockVelocity(const BuildingBlock& bb)
      : A_(bb.amplitude), T_(bb.switch_period), cut_{bb.cutoff_width} {
    require(bb.switch_period > 0.0, "building block: T_sw must be positive");
    require(bb.amplitude >= 0.0, "building block: amplitude must be nonnegative");
    require(bb.cutoff_width > 0.0 && bb.cutoff_width < 0.5, "building block: bad cutoff width");
  }

  /// 0 on [0, T_sw), 1 on [T_sw, 2 T_sw), and so on.
  int phase(double t) const {
    const auto k = static_cast<long long>(std::floor(t / T_));
    return static_cast<int>(((k % 2) + 2) % 2);
  }

  Vec2 velocity(double t, Vec2 y) const { return eval(phase(t), y, nullptr); }

  Mat2 gradient(double t, Vec2 y) const {
    Mat2 m;
    eval(phase(t), y, &m);
    return m;
  }

  /// Phase-resolved evaluation for callers that already know the phase.
  Vec2 eval(int ph, Vec2 y, Mat2* grad) const {
    const Vec2 x{y.x - std::floor(y.x + 0.5), y.y - std::floor(y.y + 0.5)};
    const double core = cut_.core();
    const double k = kTwoPi;
    // Core: pure shear, the cutoff is identically one.
    if (std::abs(x.x) <= core && std::abs(x.y) <= core) {
      if (ph == 0) {
        if (grad) *grad = {0.0, A_ * k * std::cos(k * x.y), 0.0, 0.0};
        return {A_ * std::sin(k * x.y), 0.0};
      }
      if (grad) *grad = {0.0, 0.0, A_ * k * std::cos(k * x.x), 0.0};
      return {0.0, A_ * std::sin(k * x.x)};
    }
    const SmoothStep e1 = cut_.at(x.x), e2 = cut_.at(x.y);
    if (ph == 0) {
      // psi = eta(x1) G(x2), G = C eta, C = -(A / 2 pi) cos(2 pi x2).
      const double C = -A_ / k * std::cos(k * x.y), C1 = A_ * std::sin(k * x.y),
                   C2 = A_ * k * std::cos(k * x.y);
      const double G = C * e2.value, G1 = C1 * e2.value + C * e2.d1,
                   G2 = C2 * e2.value + 2.0 * C1 * e2.d1 + C * e2.d2;
      // b = (d2 psi, -d1 psi)
      if (grad) *grad = {e1.d1 * G1, e1.value * G2, -e1.d2 * G, -e1.d1 * G1};
      return {e1.value * G1, -e1.d1 * G};
    }
    // psi = H(x1) eta(x2), H = D eta, D = (A / 2 pi) cos(2 pi x1).
    const double D = A_ / k * std::cos(k * x.x), D1 = -A_ * std::sin(k * x.x),
                 D2 = -A_ * k * std::cos(k * x.x);
    const double H = D * e1.value, H1 = D1 * e1.value + D * e1.d1,
                 H2 = D2 * e1.value + 2.0 * D1 * e1.d1 + D * e1.d2;
    if (grad) *grad = {H1 * e2.d1, H * e2.d2, -H2 * e2.value, -H1 * e2.d1};
    return {H * e2.d1, -H1 * e2.value};
  }

  /// Upper bound for |grad b| at (t, y); exact outside the core.
  double stiffness(double t, Vec2 y) const {
    const double core = cut_.core();
    if (std::abs(y.x - std::floor(y.x + 0.5)) <= core && std::abs(y.y - std::floor(y.y + 0.5)) <= core)
      return A_ * kTwoPi;
    Mat2 g;
    eval(phase(t), y, &g);
    return frobenius(g);
  }

  /// The shear core, where the field is a single sine and fixed RK4 steps
  /// are accurate. The cutoff layer is not.
  bool smooth_at(double, Vec2 y) const {
    const double core = cut_.core();
    return std::abs(y.x - std::floor(y.x + 0.5)) <= core && std::abs(y.y - std::floor(y.y + 0.5)) <= core;
  }

  bool divergence_free() const { return true; }
  double box() const { return 1.0; }
  Vec2 origin() const { return {-0.5, -0.5}; }
  double switch_period() const { return T_; }
  double amplitude() const { return A_; }
  double time_scale(Vec2) const { return T_; }
  /// The field repeats after one switch of each phase.
  double period() const { return 2.0 * T_; }
  std::uint64_t snapshot_key(double t) const { return static_cast<std::uint64_t>(phase(t)); }

  void breakpoints(Vec2, double t0, double t1, std::vector<double>& out) const {
    const double lo = std::min(t0, t1), hi = std::max(t0, t1);
    for (double k = std::floor(lo / T_) + 1.0; k * T_ < hi; k += 1.0) out.push_back(k * T_);
  }

 private:
  double A_;
  double T_;
  Cutoff cut_;
};

inline BlockVelocity building_block_field(const BuildingBlock& bb) { return BlockVelocity(bb); }

/// Samples rho0 on an n x n grid over the unit cell.
inline GridField block_initial(const BuildingBlock& bb, std::size_t n) {
  return GridField::sample(n, 1.0, [&](Vec2 y) { return bb.rho0(y); }, {-0.5, -0.5});
}

struct BlockNorms {
  double value_pp = 0.0;     // ||v_t||_p^p
  double gradient_pp = 0.0;  // ||grad v_t||_p^p, Frobenius norm pointwise
  double total() const { return value_pp + gradient_pp; }
};

/// Midpoint sums of |v_t|^p and |grad v_t|^p on an n x n grid over the cell.
inline BlockNorms block_lp_norms(const BlockVelocity& v, double t, double p, std::size_t n) {
  require(p >= 1.0, "block_lp_norms: p must be >= 1");
  const double h = 1.0 / static_cast<double>(n);
  const int ph = v.phase(t);
  BlockNorms r;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const Vec2 y{-0.5 + h * (static_cast<double>(i) + 0.5), -0.5 + h * (static_cast<double>(j) + 0.5)};
      Mat2 g;
      const Vec2 b = v.eval(ph, y, &g);
      r.value_pp += std::pow(norm(b), p);
      r.gradient_pp += std::pow(frobenius(g), p);
    }
  r.value_pp *= h * h;
  r.gradient_pp *= h * h;
  return r;
}

/// ||v_t||_{W^{1,p}}^p = ||v_t||_p^p + ||grad v_t||_p^p.
inline double block_sobolev_pp(const BlockVelocity& v, double t, double p, std::size_t n) {
  return block_lp_norms(v, t, p, n).total();
}

/// rho_s on an n x n unit-cell grid, traced straight back to s = 0.
inline GridField evolve_block(const BuildingBlock& bb, double s, std::size_t n, double ode_tol = 1e-8) {
  const BlockVelocity v(bb);
  return solve_ce(v, [&](Vec2 y) { return bb.rho0(y); }, GridField(n, 1.0, Vec2{-0.5, -0.5}), s,
                  ode_tol);
}

}  // namespace loglab
