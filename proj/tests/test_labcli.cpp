#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "loglab/lab.hpp"

using namespace loglab;
namespace fs = std::filesystem;

namespace {

Calibration frozen_calibration() { return load_calibration(std::string(LOGLAB_DATA_DIR) + "/calibration.json"); }

ExperimentConfig cfg_from(const std::string& text) { return parse_config(nlohmann::json::parse(text)); }

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("loglab_labcli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_lab(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(LOGLAB_LAB_BINARY) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const Verdict* find_verdict(const ExperimentReport& r, const std::string& prefix) {
  for (const auto& v : r.verdicts)
    if (v.name.rfind(prefix, 0) == 0) return &v;
  return nullptr;
}

}  // namespace

// ---------------------------------------------------------------- config

TEST(Config, DefaultsAndNames) {
  const auto c = cfg_from(R"({"experiment": "mixing-bounds"})");
  EXPECT_EQ(c.experiment, Experiment::mixing_bounds);
  EXPECT_EQ(c.n, 128u);
  EXPECT_EQ(c.field.kind, "building-block");
  EXPECT_DOUBLE_EQ(c.eps_target, 0.1);
  for (const auto& [e, name] : experiment_names()) {
    EXPECT_EQ(parse_experiment(name), e);
    EXPECT_EQ(to_string(e), name);
  }
}

TEST(Config, RejectsOutOfRange) {
  const char* bad[] = {
      R"({"n": 128})",
      R"({"experiment": "nope"})",
      R"({"experiment": "mixing-bounds", "n": 100})",
      R"({"experiment": "mixing-bounds", "n": 8192})",
      R"({"experiment": "mixing-bounds", "times": [0, 2, 1]})",
      R"({"experiment": "mixing-bounds", "times": []})",
      R"({"experiment": "mixing-bounds", "gammas": [1.0]})",
      R"({"experiment": "mixing-bounds", "colour": "red"})",
      R"({"experiment": "mixing-bounds", "field": {"kind": "vortex"}})",
      R"({"experiment": "mixing-bounds", "field": {"shape": 1}})",
      R"({"experiment": "mixing-bounds", "field": {"kind": "sampled", "components": ["a"]}})",
      R"({"experiment": "mixing-bounds", "field": {"divergence_free": false}})",
      R"({"experiment": "mixing-bounds", "kappa": 1.0})",
      R"({"experiment": "mixing-bounds", "eps_target": 0.5})",
      R"({"experiment": "mixing-bounds", "ode_tol": 0.1})",
      R"({"experiment": "mixing-bounds", "n": "big"})",
      R"({"experiment": "sharpness-divergence", "schedule": {"N": 9}})",
      R"({"experiment": "sharpness-divergence", "schedule": {"p": 0.5}})",
      R"({"experiment": "interpolation-sweep", "quadrature": {"angles": 7}})",
      R"({"experiment": "lusin-verify", "initial": "stripes"})",
  };
  for (const char* text : bad) EXPECT_THROW(cfg_from(text), ConfigError) << text;
  // non-solenoidal fields are only allowed where nothing is transported
  EXPECT_NO_THROW(cfg_from(R"({"experiment": "interpolation-sweep", "field": {"divergence_free": false}})"));
}

TEST(Config, ShippedConfigsLoad) {
  std::size_t count = 0;
  for (const auto& e : fs::directory_iterator(LOGLAB_CONFIG_DIR)) {
    if (e.path().extension() != ".json") continue;
    ++count;
    const auto c = load_config(e.path().string());
    EXPECT_EQ(e.path().stem().string().rfind(to_string(c.experiment), 0), 0u) << e.path();
  }
  EXPECT_GE(count, 6u);
  EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
}

TEST(Config, HashIsCanonical) {
  const auto a = cfg_from(R"({"experiment": "mixing-bounds", "n": 64, "p": 2})");
  const auto b = cfg_from("{ \"p\" : 2,\n \"n\": 64, \"experiment\":\"mixing-bounds\" }");
  const auto c = cfg_from(R"({"experiment": "mixing-bounds", "n": 64, "p": 1.5})");
  EXPECT_EQ(config_hash(a), config_hash(b));
  EXPECT_NE(config_hash(a), config_hash(c));
  EXPECT_EQ(config_hash(a).size(), 16u);
  // FNV-1a reference values
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cULL);
}

// ---------------------------------------------------------------- report

TEST(Report, ExitCodes) {
  ExperimentReport r;
  EXPECT_EQ(r.exit_code(), 0);
  r.add_verdict("ok", true, "");
  r.add_verdict("skipped", false, "", false);
  EXPECT_EQ(r.exit_code(), 0);
  r.add_verdict("bad", false, "");
  EXPECT_EQ(r.exit_code(), 2);
  r.resolution_guard = true;
  EXPECT_EQ(r.exit_code(), 3);
}

TEST(Report, JsonAndCsvRoundTrip) {
  ExperimentReport r;
  r.experiment = "mixing-bounds";
  r.config_hash = "0123456789abcdef";
  r.seed = 11;
  r.calibration_version = 3;
  r.columns = {{"t", "time", "output time"}, {"value", "norm", "a, quoted \"thing\""}};
  r.rows = {{0.0, 1.0}, {1.0, std::numeric_limits<double>::quiet_NaN()}};
  r.plot = {{0.0, 1.0, 0.5, std::numeric_limits<double>::quiet_NaN()}};
  r.fits = {{"rate", 0.25, 0.01, 0.99, 5}};
  r.constants = {{"bressan[p=1.5]", 86.9}};
  r.diagnostics = {{"B", 4.2}};
  r.add_verdict("envelope", true, "fine");
  r.add_verdict("extra", false, "not counted", false);
  r.note = "note";

  const ExperimentReport back = report_from_json(nlohmann::json::parse(to_json(r).dump()));
  EXPECT_EQ(back.experiment, r.experiment);
  EXPECT_EQ(back.config_hash, r.config_hash);
  EXPECT_EQ(back.seed, r.seed);
  EXPECT_EQ(back.calibration_version, 3);
  ASSERT_EQ(back.rows.size(), 2u);
  EXPECT_TRUE(std::isnan(back.rows[1][1]));
  EXPECT_EQ(back.plot[0].lower_bound, 0.5);
  EXPECT_TRUE(std::isnan(back.plot[0].upper_bound));
  EXPECT_EQ(back.fits[0].points, 5u);
  EXPECT_EQ(back.constants.at("bressan[p=1.5]"), 86.9);
  ASSERT_EQ(back.verdicts.size(), 2u);
  EXPECT_FALSE(back.verdicts[1].applicable);
  EXPECT_EQ(to_json(back), to_json(r));

  const fs::path dir = scratch("report");
  write_report_files(r, dir);
  EXPECT_EQ(to_json(read_report(dir)), to_json(r));
  const std::string ts = read_text(dir / "timeseries.csv");
  EXPECT_EQ(ts.substr(0, ts.find('\n')), "t [time],value [norm]");
  EXPECT_NE(ts.find("\n1,nan\n"), std::string::npos) << ts;
  const std::string pd = read_text(dir / "plotdata.csv");
  EXPECT_EQ(pd.substr(0, pd.find('\n')), "t,value,lower_bound,upper_bound");
  const std::string sc = summary_csv(r);
  EXPECT_NE(sc.find("verdict,envelope,,,pass,fine"), std::string::npos) << sc;
  EXPECT_NE(sc.find("verdict,extra,,,n/a"), std::string::npos);
}

TEST(Report, EveryColumnLabelled) {
  const Calibration cal = frozen_calibration();
  const auto r = run_experiment(cfg_from(R"({"experiment": "regularity-growth", "n": 32,
      "field": {"amplitude": 0}, "times": [0, 1]})"), cal);
  ASSERT_FALSE(r.columns.empty());
  for (const auto& c : r.columns) {
    EXPECT_FALSE(c.unit.empty()) << c.name;
    EXPECT_FALSE(c.anchor.empty()) << c.name;
  }
  for (const auto& row : r.rows) EXPECT_EQ(row.size(), r.columns.size());
}

// ---------------------------------------------------------------- calibration

TEST(Calibration, RoundTripAndMalformed) {
  const Calibration cal = frozen_calibration();
  EXPECT_GE(cal.version, 1);
  const Calibration back = calibration_from_json(nlohmann::json::parse(to_json(cal).dump()));
  EXPECT_EQ(to_json(back), to_json(cal));
  auto j = to_json(cal);
  j.erase("constants");
  EXPECT_THROW(calibration_from_json(j), ConfigError);
  EXPECT_THROW(cal.constant("no_such_constant"), ConfigError);
  EXPECT_THROW(load_calibration("/nonexistent/calibration.json"), ConfigError);
  EXPECT_EQ(keyed("bressan", "p", 1.5), "bressan[p=1.5]");
  EXPECT_EQ(keyed("log_interpolation", "gamma", -0.5), "log_interpolation[gamma=-0.5]");
}

TEST(Calibration, FrozenFileIsComplete) {
  const Calibration cal = frozen_calibration();
  for (double p : {1.5, 2.0})
    for (const char* base : {"regularity", "mixing_rate", "mixing_offset", "mixing_geometric", "bressan",
                             "lusin_gtilde", "key_lemma"})
      EXPECT_TRUE(cal.has_constant(keyed(base, "p", p))) << base << " p=" << p;
  for (double g : {0.0, -0.5, -1.0}) {
    EXPECT_TRUE(cal.has_constant(keyed("interpolation", "gamma", g)));
    EXPECT_TRUE(cal.has_constant(keyed("log_interpolation", "gamma", g)));
  }
  EXPECT_TRUE(cal.has_constant("lusin_Cd"));
  // upper-type constants carry headroom over the measured worst case, lower-type divide by it
  for (const auto& [k, v] : cal.measured) {
    if (!cal.has_constant(k)) continue;
    if (k.rfind("bressan", 0) == 0) {
      EXPECT_NEAR(cal.constant(k), v / cal.headroom, 1e-12 * v) << k;
    } else if (k.rfind("key_lemma", 0) != 0) {
      EXPECT_NEAR(cal.constant(k), v * cal.headroom, 1e-12 * std::max(v, 1.0)) << k;
    }
  }
  EXPECT_GT(cal.block_decay.c_hat, 0.0);
  for (const auto& [k, v] : default_thresholds()) EXPECT_EQ(cal.threshold(k), v) << k;
}

TEST(Calibration, RegressionCheck) {
  Calibration cal;
  cal.measured = {{"a", 2.0}, {"b", 0.0}};
  auto r = regression_check({{"a", 2.3}}, cal, 0.2);
  EXPECT_TRUE(r.pass);
  EXPECT_NEAR(r.relative_change.at("a"), 0.15, 1e-12);
  r = regression_check({{"a", 2.5}, {"b", 0.0}}, cal, 0.2);
  EXPECT_FALSE(r.pass);
  EXPECT_EQ(r.worst_key, "a");
  EXPECT_THROW(regression_check({{"c", 1.0}}, cal, 0.2), ConfigError);
}

// ---------------------------------------------------------------- runners

TEST(Runners, RegularityFrozenFieldAndConstantDatum) {
  const Calibration cal = frozen_calibration();
  const auto r = run_experiment(cfg_from(R"({"experiment": "regularity-growth", "n": 64,
      "field": {"amplitude": 0}, "times": [0, 1, 2, 4]})"), cal);
  EXPECT_EQ(r.exit_code(), 0);
  for (const auto& row : r.rows) EXPECT_NEAR(row[1], r.rows[0][1], 1e-12 * r.rows[0][1]);
  for (std::size_t k = 1; k < r.rows.size(); ++k) EXPECT_EQ(r.rows[k][2], r.rows[0][2]);

  const auto c = run_experiment(cfg_from(R"({"experiment": "regularity-growth", "n": 64,
      "initial": "constant", "times": [0, 1, 2]})"), cal);
  EXPECT_EQ(c.exit_code(), 0);
  for (const auto& row : c.rows) EXPECT_EQ(row[1], 0.0);
}

TEST(Runners, RegularityBlockWithinCalibratedConstant) {
  const Calibration cal = frozen_calibration();
  const auto r = run_experiment(cfg_from(R"({"experiment": "regularity-growth", "n": 128,
      "initial": "checkerboard", "times": [0, 2, 4, 6, 8]})"), cal);
  EXPECT_EQ(r.exit_code(), 0) << r.verdicts.front().detail;
  EXPECT_GT(r.rows.back()[1], r.rows.front()[1]);
  EXPECT_EQ(r.config_hash.size(), 16u);
  EXPECT_EQ(r.calibration_version, cal.version);
}

TEST(Runners, RegularityRejectsDriftingSolver) {
  Calibration cal = frozen_calibration();
  cal.thresholds["norm_drift_bv"] = 1e-12;
  EXPECT_THROW(run_experiment(cfg_from(R"({"experiment": "regularity-growth", "n": 32,
      "initial": "sine-core", "times": [0, 2]})"), cal), SolverError);
}

TEST(Runners, SharpnessPolyFrozenFieldNotApplicable) {
  const Calibration cal = frozen_calibration();
  const auto r = run_experiment(cfg_from(R"({"experiment": "sharpness-poly", "n": 64, "p": 1,
      "field": {"amplitude": 0}, "initial": "sine-core", "times": [0, 2, 4, 6]})"), cal);
  EXPECT_EQ(r.exit_code(), 0);
  const Verdict* v = find_verdict(r, "slope");
  ASSERT_NE(v, nullptr);
  EXPECT_FALSE(v->applicable);
  EXPECT_NEAR(r.fits.front().value, 0.0, 1e-9);
  EXPECT_THROW(run_experiment(cfg_from(R"({"experiment": "sharpness-poly", "initial": "checkerboard"})"), cal),
               ConfigError);
}

TEST(Runners, SharpnessPolyGuardWhenWindowTooShort) {
  const Calibration cal = frozen_calibration();
  const auto r = run_experiment(cfg_from(R"({"experiment": "sharpness-poly", "n": 32, "p": 1,
      "initial": "sine-core", "times": [0, 2, 4, 6, 8, 10]})"), cal);
  EXPECT_TRUE(r.resolution_guard);
  EXPECT_EQ(r.exit_code(), 3);
}

TEST(Runners, DivergenceGuardAndSingleScale) {
  const Calibration cal = frozen_calibration();
  const auto g = run_experiment(cfg_from(R"({"experiment": "sharpness-divergence", "n_block": 32,
      "schedule": {"N": 2, "p": 1.5}, "times": [1]})"), cal);
  EXPECT_EQ(g.exit_code(), 3);

  const auto r = run_experiment(cfg_from(R"({"experiment": "sharpness-divergence", "n_block": 64,
      "schedule": {"N": 1, "p": 1.5}, "times": [1], "quadrature": {"shells": 24, "angles": 16}})"), cal);
  ASSERT_EQ(r.rows.size(), 2u);  // one row per gamma
  for (const auto& row : r.rows) {
    EXPECT_TRUE(std::isfinite(row[2]));
    EXPECT_GT(row[2], 0.0);
  }
  // too few truncation levels for a growth verdict
  for (const auto& v : r.verdicts) {
    if (v.name.find("grows") != std::string::npos || v.name.find("plateaus") != std::string::npos) {
      EXPECT_FALSE(v.applicable);
    }
  }
  EXPECT_TRUE(std::isfinite(r.diagnostics.at("N1_baseline_ratio")));
}

TEST(Runners, MixingFrozenFieldPasses) {
  const Calibration cal = frozen_calibration();
  const auto r = run_experiment(cfg_from(R"({"experiment": "mixing-bounds", "n": 64,
      "field": {"amplitude": 0}, "initial": "checkerboard", "times": [0, 2, 4]})"), cal);
  EXPECT_EQ(r.exit_code(), 0);
  for (const auto& row : r.rows) {
    EXPECT_NEAR(row[1], r.rows[0][1], 1e-12);
    EXPECT_NEAR(row[3], r.rows[0][3], 1e-12);
  }
  EXPECT_THROW(run_experiment(cfg_from(R"({"experiment": "mixing-bounds", "initial": "sine-core"})"), cal),
               ConfigError);
}

TEST(Runners, LusinIdentityFlow) {
  const Calibration cal = frozen_calibration();
  const auto r = run_experiment(cfg_from(R"({"experiment": "lusin-verify", "n": 64, "p": 1.5,
      "field": {"amplitude": 0}, "initial": "disk", "times": [1], "n_pairs": 5000})"), cal);
  ASSERT_EQ(r.rows.size(), 1u);
  EXPECT_EQ(r.rows[0][1], 1.0);
  // nothing moves, so the solution pass rate is the time-independent BV one
  const auto r0 = run_experiment(cfg_from(R"({"experiment": "lusin-verify", "n": 64, "p": 1.5,
      "field": {"amplitude": 0}, "initial": "disk", "times": [3], "n_pairs": 5000})"), cal);
  EXPECT_EQ(r0.rows[0][2], r.rows[0][2]);
  EXPECT_EQ(r0.rows[0][3], r.rows[0][3]);
  EXPECT_EQ(r.rows[0][4], r.diagnostics.at("bv_seminorm"));  // no transport budget
}

TEST(Runners, InterpolationCorpus) {
  const Calibration cal = frozen_calibration();
  const auto r = run_experiment(cfg_from(R"({"experiment": "interpolation-sweep", "n": 128,
      "corpus_size": 8, "seed": 2024, "gammas": [0, -0.5, -1]})"), cal);
  EXPECT_EQ(r.exit_code(), 0);
  ASSERT_EQ(r.rows.size(), 12u);
  // the zero field is vacuous: NaN ratios
  EXPECT_TRUE(std::isnan(r.rows[9][1]));
  for (const auto& row : r.rows)
    for (std::size_t k = 1; k < row.size(); ++k) EXPECT_TRUE(std::isnan(row[k]) || row[k] > 0.0);
}

TEST(Runners, BitReproducible) {
  const Calibration cal = frozen_calibration();
  const auto cfg = cfg_from(R"({"experiment": "mixing-bounds", "n": 32, "initial": "checkerboard",
      "times": [0, 2]})");
  EXPECT_EQ(to_json(run_experiment(cfg, cal)).dump(), to_json(run_experiment(cfg, cal)).dump());
}

// ---------------------------------------------------------------- CLI

TEST(Cli, ExitCodes) {
  const fs::path dir = scratch("cli");
  const std::string cal = std::string(LOGLAB_DATA_DIR) + "/calibration.json";
  write_text(dir / "frozen.json", R"({"experiment": "regularity-growth", "n": 32,
      "field": {"amplitude": 0}, "times": [0, 1]})");
  write_text(dir / "guard.json", R"({"experiment": "sharpness-divergence", "n_block": 32,
      "schedule": {"N": 2}, "times": [1]})");
  write_text(dir / "bad.json", R"({"experiment": "regularity-growth", "n": 33})");

  const std::string cal_flag = "--calibration " + cal + " ";
  EXPECT_EQ(run_lab(cal_flag + "run regularity-growth --config " + (dir / "frozen.json").string() + " --out " +
                        (dir / "ok").string(),
                    dir / "log1"),
            0)
      << read_text(dir / "log1");
  EXPECT_TRUE(fs::exists(dir / "ok" / "report.json"));
  EXPECT_TRUE(fs::exists(dir / "ok" / "timeseries.csv"));
  EXPECT_TRUE(fs::exists(dir / "ok" / "plotdata.csv"));

  EXPECT_EQ(run_lab(cal_flag + "run sharpness-divergence --config " + (dir / "guard.json").string() + " --out " +
                        (dir / "guard").string(),
                    dir / "log2"),
            3);
  EXPECT_EQ(run_lab(cal_flag + "run mixing-bounds --config " + (dir / "frozen.json").string() + " --out " +
                        (dir / "x").string(),
                    dir / "log3"),
            1);
  EXPECT_EQ(run_lab(cal_flag + "run regularity-growth --config " + (dir / "bad.json").string() + " --out " +
                        (dir / "x").string(),
                    dir / "log4"),
            1);

  // a calibration with a constant too small to hold
  auto j = to_json(load_calibration(cal));
  j["constants"]["regularity[p=1.5]"] = 1e-9;
  write_text(dir / "tight.json", j.dump());
  write_text(dir / "block.json", R"({"experiment": "regularity-growth", "n": 32, "initial": "checkerboard",
      "times": [0, 1]})");
  EXPECT_EQ(run_lab("--calibration " + (dir / "tight.json").string() + " run regularity-growth --config " +
                        (dir / "block.json").string() + " --out " + (dir / "fail").string(),
                    dir / "log5"),
            2)
      << read_text(dir / "log5");

  EXPECT_EQ(run_lab("report --format csv --in " + (dir / "ok").string(), dir / "log6"), 0);
  EXPECT_EQ(read_text(dir / "log6").rfind("section,name,value", 0), 0u);
  EXPECT_EQ(run_lab("report --format json --in " + (dir / "ok").string(), dir / "log7"), 0);
  EXPECT_EQ(report_from_json(nlohmann::json::parse(read_text(dir / "log7"))).experiment, "regularity-growth");
  EXPECT_NE(run_lab("report --format xml --in " + (dir / "ok").string(), dir / "log8"), 0);
}
