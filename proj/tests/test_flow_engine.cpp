#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "loglab/constructions/building_block.hpp"
#include "loglab/core/fit.hpp"
#include "loglab/flow/lusin.hpp"
#include "loglab/flow/solve_ce.hpp"
#include "loglab/lab/calibration.hpp"
#include "test_support.hpp"

using namespace loglab;

namespace {

std::vector<Vec2> random_points(std::size_t m, double box, Vec2 lo, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, box);
  std::vector<Vec2> p(m);
  for (auto& x : p) x = {lo.x + u(rng), lo.y + u(rng)};
  return p;
}

double l2_diff(const GridField& a, const GridField& b) { return lp_norm(a - b, 2.0); }

Calibration frozen_calibration() { return load_calibration(std::string(LOGLAB_DATA_DIR) + "/calibration.json"); }

}  // namespace

// ---------------------------------------------------------------- trace

TEST(Trace, ZeroFieldLeavesSeeds) {
  const auto seeds = random_points(200, 1.0, {}, 1);
  const FlowMap fm = trace(ZeroField{}, seeds, 0.0, 3.0, 1e-8);
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    EXPECT_EQ(fm.positions[i].x, seeds[i].x);
    EXPECT_EQ(fm.positions[i].y, seeds[i].y);
  }
}

TEST(Trace, ShearMatchesClosedForm) {
  const SteadyShear b{1.0, 1.0, {}};
  const auto seeds = random_points(500, 1.0, {}, 2);
  for (double t : {1.0, -0.7}) {
    const FlowMap fm = trace(b, seeds, 0.0, t, 1e-8);
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      const Vec2 exact{seeds[i].x + t * std::sin(kTwoPi * seeds[i].y), seeds[i].y};
      EXPECT_LE(periodic_distance(fm.positions[i], exact, 1.0), 1e-10);
    }
  }
}

TEST(Trace, PositionsAreWrappedAndFinite) {
  const SteadyShear b{3.0, 1.0, {}};
  const FlowMap fm = trace(b, random_points(300, 1.0, {}, 3), 0.0, 5.0, 1e-8);
  for (Vec2 p : fm.positions) {
    ASSERT_TRUE(std::isfinite(p.x) && std::isfinite(p.y));
    EXPECT_GE(p.x, 0.0);
    EXPECT_LT(p.x, 1.0);
    EXPECT_GE(p.y, 0.0);
    EXPECT_LT(p.y, 1.0);
  }
  EXPECT_EQ(fm.direction(), Direction::forward);
  EXPECT_EQ(trace(b, {{0.1, 0.2}}, 2.0, 0.0, 1e-8).direction(), Direction::backward);
}

TEST(Trace, BlockRoundTrip) {
  const BlockVelocity v{BuildingBlock{}};
  const FlowMap fm = trace(v, lattice_seeds(40, v.box(), v.origin(), 0.37), 0.0, 1.0, 1e-8);
  EXPECT_LE(round_trip_error(v, fm, 1e-8), 1e-6);
}

TEST(Trace, RoundTripAcrossSwitchesConverges) {
  // Orbits hugging the cutoff layer are sensitive over several switches, so
  // the error is checked for convergence in ode_tol rather than against 1e-6.
  const BlockVelocity v{BuildingBlock{}};
  const auto seeds = lattice_seeds(24, v.box(), v.origin(), 0.11);
  const double coarse = round_trip_error(v, trace(v, seeds, 0.0, 4.5, 1e-6), 1e-6);
  const double fine = round_trip_error(v, trace(v, seeds, 0.0, 4.5, 1e-10), 1e-10);
  EXPECT_LE(fine, 1e-4);
  EXPECT_LT(fine, coarse);
}

TEST(Trace, VortexRoundTrip) {
  const RadialVortex w{5.0, 0.15, {0.5, 0.5}, 1.0, {}};
  const FlowMap fw = trace(w, lattice_seeds(24, 1.0, {}, 0.3), 0.0, 2.0, 1e-8);
  EXPECT_LE(round_trip_error(w, fw, 1e-8), 1e-6);
}

TEST(Trace, RecordedSamplesMatchSeparateTraces) {
  const RadialVortex w{4.0, 0.2, {0.5, 0.5}, 1.0, {}};
  const auto seeds = random_points(50, 1.0, {}, 4);
  const FlowMap fm = trace(w, seeds, 0.0, 1.0, 1e-8, 5);
  ASSERT_EQ(fm.samples.size(), 5u);
  EXPECT_DOUBLE_EQ(fm.sample_times.back(), 1.0);
  const FlowMap mid = trace(w, seeds, 0.0, 0.5, 1e-8);
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    EXPECT_EQ(fm.samples[0][i].x, seeds[i].x);
    const Vec2 s = fm.samples[2][i];
    EXPECT_LE(periodic_distance({wrap(s.x, 0.0, 1.0), wrap(s.y, 0.0, 1.0)}, mid.positions[i], 1.0), 1e-9);
  }
}

TEST(Trace, NonFiniteFieldThrows) {
  struct Bad : ZeroField {
    Vec2 velocity(double, Vec2) const { return {std::nan(""), 0.0}; }
  };
  EXPECT_THROW(trace(Bad{}, {{0.1, 0.1}}, 0.0, 1.0, 1e-8), SolverError);
}

// ---------------------------------------------------------------- velocity fields

TEST(Velocity, AnalyticGradientsMatchDifferences) {
  const BlockVelocity v{BuildingBlock{}};
  const RadialVortex w{5.0, 0.15, {0.5, 0.5}, 1.0, {}};
  const double h = 1e-6;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  auto check = [&](const auto& b, double t, Vec2 x) {
    const Mat2 g = b.gradient(t, x);
    const Vec2 dx = (b.velocity(t, x + Vec2{h, 0}) - b.velocity(t, x - Vec2{h, 0})) / (2 * h);
    const Vec2 dy = (b.velocity(t, x + Vec2{0, h}) - b.velocity(t, x - Vec2{0, h})) / (2 * h);
    const double scale = 1.0 + frobenius(g);
    EXPECT_NEAR(g.a11, dx.x, 1e-6 * scale);
    EXPECT_NEAR(g.a21, dx.y, 1e-6 * scale);
    EXPECT_NEAR(g.a12, dy.x, 1e-6 * scale);
    EXPECT_NEAR(g.a22, dy.y, 1e-6 * scale);
  };
  for (int k = 0; k < 400; ++k) {
    const Vec2 x{u(rng), u(rng)};
    check(v, 0.3, x);
    check(v, 1.3, x);
    check(w, 0.0, x + Vec2{0.5, 0.5});
  }
}

TEST(Velocity, SnapshotsAreDivergenceFree) {
  EXPECT_LE(snapshot_divergence_l2(SteadyShear{2.0, 1.0, {}}, 0.0, 256), 1e-10);
  EXPECT_LE(snapshot_divergence_l2(RadialVortex{5.0, 0.15, {0.5, 0.5}, 1.0, {}}, 0.0, 256), 1e-10);
  const BlockVelocity v{BuildingBlock{}};
  for (double t : {0.2, 1.5}) EXPECT_LE(snapshot_divergence_l2(v, t, 256), 1e-10);
}

TEST(Velocity, SampledFieldDetectsDivergence) {
  const auto [b1, b2] = sample_velocity(SteadyShear{1.0, 1.0, {}}, 0.0, 64);
  EXPECT_TRUE(SampledField(b1, b2).divergence_free());
  const GridField c = GridField::sample(64, 1.0, [](Vec2 x) { return std::sin(kTwoPi * x.x); });
  const SampledField bad(c, GridField(64, 1.0));
  EXPECT_FALSE(bad.divergence_free());
  EXPECT_THROW(solve_ce(bad, c, 0.5, 1e-8), PreconditionError);
}

// ---------------------------------------------------------------- solve_ce

TEST(SolveCe, ZeroFieldIsIdentity) {
  const GridField u0 = loglab::testing::white_field(32, 1.0, 6);
  const GridField ut = solve_ce(ZeroField{}, u0, 2.0, 1e-8);
  EXPECT_EQ(l2_diff(u0, ut), 0.0);
}

TEST(SolveCe, RadialDatumInvariantUnderVortex) {
  const RadialVortex w{5.0, 0.15, {0.5, 0.5}, 1.0, {}};
  const GridField u0 = GridField::sample(128, 1.0, [](Vec2 x) {
    const double r2 = (x.x - 0.5) * (x.x - 0.5) + (x.y - 0.5) * (x.y - 0.5);
    return std::exp(-r2 / 0.02);
  });
  const GridField ut = solve_ce(w, u0, 1.0, 1e-8, Reconstruction::spectral);
  EXPECT_LE(l2_diff(u0, ut), 1e-6 * lp_norm(u0, 2.0));
  const GridField ub = solve_ce(w, u0, 1.0, 1e-8, Reconstruction::bilinear);
  EXPECT_LE(l2_diff(u0, ub), 1e-2 * lp_norm(u0, 2.0));
}

TEST(SolveCe, ShearAdvectionClosedForm) {
  const SteadyShear b{1.0, 1.0, {}};
  const std::size_t n = 256;
  const double t = 1.0;
  const GridField u0 = GridField::sample(n, 1.0, [](Vec2 x) { return std::cos(kTwoPi * x.x); });
  const GridField exact =
      GridField::sample(n, 1.0, [&](Vec2 x) { return std::cos(kTwoPi * (x.x - t * std::sin(kTwoPi * x.y))); });
  EXPECT_LE(l2_diff(solve_ce(b, u0, t, 1e-8, Reconstruction::spectral), exact), 1e-4);
}

TEST(SolveCe, SeriesMatchesSingleSolves) {
  const BuildingBlock bb{1.0, 1.0, 1.0 / 16.0, InitialProfile::sine_cell};
  const BlockVelocity v(bb);
  const GridField like(64, 1.0, Vec2{-0.5, -0.5});
  auto u0 = [&](Vec2 y) { return bb.rho0(y); };
  const std::vector<double> times{0.0, 0.5, 2.0, 3.7, 4.0};
  const auto series = solve_ce_series(v, u0, like, times, 1e-8);
  for (std::size_t k = 0; k < times.size(); ++k)
    EXPECT_LE(sup_norm(series[k] - solve_ce(v, u0, like, times[k], 1e-8)), 1e-7) << "t=" << times[k];
}

TEST(SolveCe, NormsConservedSmoothAndBv) {
  const BuildingBlock bb{1.0, 1.0, 1.0 / 16.0, InitialProfile::sine_cell};
  const BlockVelocity v(bb);
  const std::size_t n = 128;
  const GridField like(n, 1.0, Vec2{-0.5, -0.5});
  auto smooth = [&](Vec2 y) { return bb.rho0(y); };
  auto checker = [](Vec2 y) {
    const double a = wrap(y.x, -0.5, 1.0), c = wrap(y.y, -0.5, 1.0);
    return (a < 0.0) == (c < 0.0) ? 1.0 : -1.0;
  };
  const std::vector<double> times{2.0, 4.0, 6.0};
  const GridField s0 = solve_ce(v, smooth, like, 0.0, 1e-8);
  const GridField c0 = solve_ce(v, checker, like, 0.0, 1e-8);
  const auto ss = solve_ce_series(v, smooth, like, times, 1e-8);
  const auto cs = solve_ce_series(v, checker, like, times, 1e-8);
  for (std::size_t k = 0; k < times.size(); ++k) {
    EXPECT_LE(ce_diagnostics(s0, ss[k]).l2_drift, 0.01);
    // n = 128 under-resolves the L^1 mass of late filaments slightly; the
    // acceptance run holds both norms to 1% at n = 512.
    EXPECT_LE(ce_diagnostics(s0, ss[k]).l1_drift, 0.02);
    EXPECT_LE(ce_diagnostics(c0, cs[k]).l2_drift, 0.03);
    EXPECT_LE(ce_diagnostics(c0, cs[k]).l1_drift, 0.03);
  }
}

TEST(SolveCe, PushforwardPreservesMeasure) {
  // One uniform point per cell of a 1000 x 1000 lattice: a uniform cloud
  // without the aliasing a plain lattice shows after shearing.
  const BlockVelocity v{BuildingBlock{}};
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> jit(0.0, 1.0);
  auto seeds = lattice_seeds(1000, v.box(), v.origin());
  for (auto& p : seeds) p = p + 1e-3 * Vec2{jit(rng), jit(rng)};
  const FlowMap fm = trace(v, std::move(seeds), 0.0, 0.3, 1e-8);
  const auto d = pushforward_density(fm, 32);
  EXPECT_LE(d.compressibility_L, 1.1);
  EXPECT_GE(d.min_density, 0.9);
}

// ---------------------------------------------------------------- maximal function

TEST(Maximal, ConstantIsFixed) {
  const GridField c = GridField::sample(64, 1.0, [](Vec2) { return -2.5; });
  const GridField m = maximal_function(c);
  for (double x : m.values()) EXPECT_NEAR(x, 2.5, 1e-12);
}

TEST(Maximal, MatchesDirectRadiusScan) {
  const std::size_t n = 64;
  const GridField f = GridField::sample(n, 1.0, [](Vec2 x) {
    const double r2 = (x.x - 0.3) * (x.x - 0.3) + (x.y - 0.7) * (x.y - 0.7);
    return std::exp(-r2 / 0.003);
  });
  const GridField m = maximal_function(f);
  const auto radii = dyadic_radii(n, 1.0);
  const long nn = static_cast<long>(n);
  for (std::size_t i = 0; i < n; i += 7)
    for (std::size_t j = 0; j < n; j += 5) {
      double best = std::abs(f(i, j));
      for (double r : radii) {
        double acc = 0.0;
        std::size_t cnt = 0;
        for (long a = -nn / 2; a < nn / 2; ++a)
          for (long b = -nn / 2; b < nn / 2; ++b) {
            const double da = static_cast<double>(a) / nn, db = static_cast<double>(b) / nn;
            if (da * da + db * db > r * r * (1 + 1e-12)) continue;
            acc += std::abs(f(static_cast<std::size_t>((static_cast<long>(i) + a + nn) % nn),
                              static_cast<std::size_t>((static_cast<long>(j) + b + nn) % nn)));
            ++cnt;
          }
        best = std::max(best, acc / static_cast<double>(cnt));
      }
      EXPECT_NEAR(m(i, j), best, 1e-10);
      EXPECT_GE(m(i, j), std::abs(f(i, j)) - 1e-12);
    }
}

TEST(Maximal, DecayEnvelopeAwayFromBump) {
  const std::size_t n = 128;
  const GridField f = GridField::sample(n, 1.0, [](Vec2 x) {
    const double r2 = (x.x - 0.5) * (x.x - 0.5) + (x.y - 0.5) * (x.y - 0.5);
    return std::exp(-r2 / 0.0005);
  });
  const GridField m = maximal_function(f);
  const double mass = lp_norm(f, 1.0);
  // Any ball reaching the bump from distance r has radius at least about r.
  for (std::size_t i = n / 2 + 8; i < n; i += 4) {
    const double r = f.node(i, n / 2).x - 0.5;
    EXPECT_LE(m(i, n / 2), 2.0 * mass / (kTwoPi / 2.0 * (r - 0.08) * (r - 0.08)) + 1e-12) << r;
  }
}

TEST(Maximal, BoundedOnL2AcrossCorpus) {
  double worst = 0.0, best = 1e300;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const GridField f = loglab::testing::band_limited_field(64, 1.0, 2 + static_cast<long>(s), 100 + s, 1.0);
    const double ratio = lp_norm(maximal_function(f), 2.0) / lp_norm(f, 2.0);
    worst = std::max(worst, ratio);
    best = std::min(best, ratio);
  }
  EXPECT_GE(best, 1.0);
  EXPECT_LE(worst, 4.0);
}

// ---------------------------------------------------------------- Lusin witness

TEST(Lusin, ZeroFieldWitnessVanishes) {
  const FlowMap fm = trace(ZeroField{}, lattice_seeds(16, 1.0, {}), 0.0, 1.0, 1e-8, 9);
  const auto w = lusin_witness(ZeroField{}, fm, 9, 1.0, 32);
  for (double g : w.g_values) EXPECT_EQ(g, 0.0);
  const auto r = check_lusin_bilipschitz(fm, w, 2000, 1);
  EXPECT_EQ(r.pass_rate, 1.0);
}

TEST(Lusin, ShearWitnessIsTimesMaximalGradient) {
  const SteadyShear b{1.0, 1.0, {}};
  const std::size_t ng = 128;
  const auto seeds = lattice_seeds(32, 1.0, {}, 0.25);
  const double t = 0.8, Cd = 0.7;
  const FlowMap fm = trace(b, seeds, 0.0, t, 1e-8, 33);
  const auto w = lusin_witness(b, fm, 33, Cd, ng);
  const BilinearSampler M(maximal_function(gradient_magnitude(b, 0.0, ng)));
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const double expect = Cd * t * M(seeds[i]);
    EXPECT_NEAR(w.g_values[i], expect, 1e-9 * (1.0 + expect));
    EXPECT_GE(w.g_values[i], 0.0);
  }
}

TEST(Lusin, WitnessNormLinearForAutonomousField) {
  const RadialVortex b{5.0, 0.15, {0.5, 0.5}, 1.0, {}};
  const auto seeds = lattice_seeds(48, 1.0, {}, 0.5);
  std::vector<double> ts, norms;
  for (double t : {0.25, 0.5, 0.75, 1.0, 1.5, 2.0}) {
    const FlowMap fm = trace(b, seeds, 0.0, t, 1e-8, 17);
    const auto w = lusin_witness(b, fm, 17, 1.0, 128);
    double acc = 0.0;
    for (double g : w.g_values) acc += g * g;
    ts.push_back(t);
    norms.push_back(std::sqrt(acc / static_cast<double>(seeds.size())));
  }
  EXPECT_GE(fit_line(ts, norms).r2, 0.99);
}

TEST(Lusin, ShearPassesWithFrozenConstant) {
  const double Cd = frozen_calibration().constant("lusin_Cd");
  const SteadyShear b{1.0, 1.0, {}};
  const FlowMap fm = trace(b, lattice_seeds(64, 1.0, {}), 0.0, 1.0, 1e-8, 65);
  const auto r = check_lusin_bilipschitz(fm, lusin_witness(b, fm, 65, Cd, 128), 20000, 7);
  EXPECT_GE(r.pass_rate, 0.999);
  EXPECT_LE(r.min_scale, 1.0);
}

TEST(Lusin, MinScaleIsMonotoneInConstant) {
  const RadialVortex b{5.0, 0.15, {0.5, 0.5}, 1.0, {}};
  const FlowMap fm = trace(b, lattice_seeds(48, 1.0, {}), 0.0, 1.0, 1e-8, 33);
  const auto w1 = lusin_witness(b, fm, 33, 1.0, 128);
  const auto r1 = check_lusin_bilipschitz(fm, w1, 10000, 3);
  const auto w2 = lusin_witness(b, fm, 33, 2.0, 128);
  const auto r2 = check_lusin_bilipschitz(fm, w2, 10000, 3);
  EXPECT_NEAR(r2.min_scale, 0.5 * r1.min_scale, 1e-9 * (1.0 + r1.min_scale));
  EXPECT_GE(r2.pass_rate, r1.pass_rate);
}
