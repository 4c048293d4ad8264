#pragma once

// One-time calibration: measure every implicit constant on the frozen
// corpus, add headroom, and record the block decay fit.

#include <chrono>
#include <ostream>

#include "loglab/lab/experiments.hpp"

namespace loglab {

struct CalibrateOptions {
  int version = 1;
  std::uint64_t seed = 2024;
  std::size_t corpus_size = 8;
  std::size_t corpus_n = 128;
  std::size_t decay_n = 512;   // block decay grid; n/2 sets the resolved window
  std::size_t mixing_n = 256;
  double headroom = 1.25;
  bool quick = false;          // smaller grids, for smoke tests only
};

/// Upper-type constants C with lhs <= C rhs on the corpus: worst ratio.
inline std::map<std::string, double> measure_key_lemma_corpus(const std::vector<CorpusField>& corpus,
                                                              const std::vector<double>& ps) {
  std::map<std::string, double> out;
  for (double p : ps) out[keyed("key_lemma_corpus", "p", p)] = 0.0;
  for (const auto& c : corpus) {
    if (lp_norm(c.f, 2.0) == 0.0) continue;
    const GridField g = maximal_witness(c.f);
    for (double p : ps) {
      auto& w = out[keyed("key_lemma_corpus", "p", p)];
      w = std::max(w, check_key_lemma(c.f, g, p).ratio);
    }
  }
  return out;
}

/// The (u_t, gt) pair built by the Lusin experiment on the block flow with a
/// checkerboard datum at t = 1.
inline LusinMeasurement lusin_closure_run(double p, double Cd, std::size_t n_seed = 128) {
  const BlockVelocity v{BuildingBlock{}};
  const auto u = make_initial("checkerboard", v.box(), v.origin());
  return measure_lusin(v, u, 1.0, p, n_seed, n_seed, n_seed, Cd, 20000, 65, 1e-8, 7);
}

/// Smallest multiplier on the C_d = 1 witness that gives a 99.9% pass rate,
/// worst over smooth flows at t = 1.
inline double measure_lusin_scale(std::size_t side = 64) {
  double worst = 0.0;
  auto one = [&](const auto& b) {
    const auto seeds = lattice_seeds(side, b.box(), b.origin());
    const FlowMap fm = trace(b, seeds, 0.0, 1.0, 1e-8, 65);
    const auto w = lusin_witness(b, fm, 65, 1.0, 128);
    worst = std::max(worst, check_lusin_bilipschitz(fm, w, 20000, 7, 0.999).min_scale);
  };
  one(SteadyShear{1.0, 1.0, {}});
  one(RadialVortex{5.0, 0.15, {0.5, 0.5}, 1.0, {}});
  one(BlockVelocity{BuildingBlock{}});
  return worst;
}

inline Calibration calibrate(CalibrateOptions o, std::ostream* log = nullptr) {
  if (o.quick) {
    o.decay_n = 256;
    o.mixing_n = 128;
    o.corpus_size = 3;
  }
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  auto say = [&](const std::string& what) {
    if (!log) return;
    const double s = std::chrono::duration<double>(clock::now() - start).count();
    *log << "[" << detail::fmt(s) << " s] " << what << std::endl;
  };
  Calibration cal;
  cal.version = o.version;
  cal.headroom = o.headroom;
  cal.thresholds = default_thresholds();
  const double h = o.headroom;
  const BuildingBlock bb;

  const BlockDecay d = measure_block_decay(bb, 10.0, o.decay_n);
  cal.block_decay = {o.decay_n, d.c_hat, d.C, d.r2, d.c_hat_stderr, d.t_window, bb.rho0_l2(),
                     bb.amplitude, bb.switch_period, bb.cutoff_width};
  say("block decay c_hat = " + detail::fmt(d.c_hat) + " (R^2 " + detail::fmt(d.r2) + ")");

  const auto corpus = field_corpus(o.corpus_size, o.seed, o.corpus_n);
  const auto interp = measure_interpolation(corpus, {0.0, -0.5, -1.0}, cal.threshold("interpolation_lambda"),
                                            cal.threshold("interpolation_delta"), 64, 32);
  for (const auto& [k, v] : interp.worst) {
    cal.measured[k] = v;
    cal.constants[k] = h * v;
  }
  say("interpolation constants measured");

  const auto kl = measure_key_lemma_corpus(corpus, {1.0, 1.5, 2.0});
  for (const auto& [k, v] : kl) cal.measured[k] = v;
  say("key lemma corpus measured");

  const double scale = measure_lusin_scale();
  cal.measured["lusin_min_scale"] = scale;
  const double Cd = h * std::max(scale, 1e-3);
  cal.constants["lusin_Cd"] = Cd;
  say("C_d = " + detail::fmt(Cd));

  for (double p : {1.5, 2.0}) {
    const auto m = lusin_closure_run(p, Cd);
    cal.measured[keyed("key_lemma_closure", "p", p)] = m.key_ratio;
    cal.measured[keyed("lusin_gtilde", "p", p)] = m.budget > 0.0 ? m.gtilde_p / m.budget : 0.0;
    cal.constants[keyed("lusin_gtilde", "p", p)] = h * cal.measured[keyed("lusin_gtilde", "p", p)];
  }
  for (double p : {1.0, 1.5, 2.0}) {
    double w = cal.measured[keyed("key_lemma_corpus", "p", p)];
    if (cal.measured.count(keyed("key_lemma_closure", "p", p)))
      w = std::max(w, cal.measured[keyed("key_lemma_closure", "p", p)]);
    cal.constants[keyed("key_lemma", "p", p)] = h * w;
  }
  say("Lusin closure measured");

  const BlockVelocity v(bb);
  const std::vector<double> growth_times{0.0, 2.0, 4.0, 6.0, 8.0};
  for (double p : {1.5, 2.0}) {
    double worst = 0.0;
    for (const char* datum : {"checkerboard", "disk"}) {
      const auto u = make_initial(datum, 1.0, v.origin());
      worst = std::max(worst, measure_regularity_growth(v, u, growth_times, p, o.corpus_n, 1e-8).max_ratio);
    }
    cal.measured[keyed("regularity", "p", p)] = worst;
    cal.constants[keyed("regularity", "p", p)] = h * worst;
  }
  say("regularity constants measured");

  const auto u = make_initial("checkerboard", 1.0, v.origin());
  const auto times = stroboscopic_times(bb, 10.0);
  MixingMeasurement mm = measure_mixing(v, u, times, 1.5, o.mixing_n, 0.5, 1e-8, cal.threshold("window_rel_tol"));
  for (double p : {1.5, 2.0}) {
    if (p != 1.5) {
      mm.B = gradient_lp_sup(v, times.back(), p, o.mixing_n);
      for (std::size_t k = 0; k < times.size(); ++k)
        mm.grad_integral[k] = gradient_lp_integral(v, times[k], p, o.mixing_n);
    }
    const auto c = mixing_constants(mm, 0.1);
    cal.measured[keyed("mixing_rate", "p", p)] = c.c;
    cal.measured[keyed("mixing_offset", "p", p)] = c.C;
    cal.measured[keyed("mixing_geometric", "p", p)] = c.geometric;
    cal.constants[keyed("mixing_rate", "p", p)] = h * c.c;
    cal.constants[keyed("mixing_offset", "p", p)] = h * c.C;
    cal.constants[keyed("mixing_geometric", "p", p)] = h * c.geometric;
    // A lower-type constant: headroom divides.
    const double b = c.bressan.value_or(0.0);
    cal.measured[keyed("bressan", "p", p)] = b;
    cal.constants[keyed("bressan", "p", p)] = b / h;
  }
  say("mixing constants measured");

  cal.corpus = std::to_string(o.corpus_size) + " band-limited fields (seed " + std::to_string(o.seed) +
               "), single mode, zero, block datum at t=4 and t=8, all on a " + std::to_string(o.corpus_n) +
               "^2 grid; smooth flows: shear, vortex, block; block flow with checkerboard and disk data" +
               (o.quick ? " (quick)" : "");
  return cal;
}

}  // namespace loglab
