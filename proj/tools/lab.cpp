// lab: calibrate constants, run experiments, print reports.

#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "loglab/lab.hpp"

namespace {

int report_command(const std::string& dir, const std::string& format) {
  const auto r = loglab::read_report(dir);
  if (format == "json")
    std::cout << loglab::to_json(r).dump(2) << '\n';
  else
    std::cout << loglab::summary_csv(r) << loglab::timeseries_csv(r);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"loglab experiment runner"};
  app.require_subcommand(1);

  std::string calibration_path = loglab::default_calibration_path();
  app.add_option("--calibration", calibration_path, "calibration file")->capture_default_str();

  auto* cal_cmd = app.add_subcommand("calibrate", "measure constants on the frozen corpus");
  std::string cal_out;
  loglab::CalibrateOptions copts;
  cal_cmd->add_option("--out", cal_out, "where to write the file (default: --calibration path)");
  cal_cmd->add_option("--version", copts.version, "calibration version")->check(CLI::PositiveNumber);
  cal_cmd->add_flag("--quick", copts.quick, "small grids, for smoke tests");

  auto* run_cmd = app.add_subcommand("run", "run one experiment");
  std::string experiment, config_path, out_dir;
  run_cmd->add_option("experiment", experiment, "experiment name")->required();
  run_cmd->add_option("--config", config_path, "JSON config")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--out", out_dir, "output directory")->required();

  auto* rep_cmd = app.add_subcommand("report", "print a stored report");
  std::string format = "json", in_dir = ".";
  rep_cmd->add_option("--format", format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
  rep_cmd->add_option("--in", in_dir, "directory holding report.json")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*cal_cmd) {
      const auto cal = loglab::calibrate(copts, &std::cerr);
      const std::string path = cal_out.empty() ? calibration_path : cal_out;
      loglab::save_calibration(cal, path);
      std::cout << "wrote " << path << '\n';
      return 0;
    }
    if (*run_cmd) {
      const auto cfg = loglab::load_config(config_path);
      if (loglab::to_string(cfg.experiment) != experiment) {
        std::cerr << "lab: config is for '" << loglab::to_string(cfg.experiment) << "', not '" << experiment
                  << "'\n";
        return 1;
      }
      const auto cal = loglab::load_calibration(calibration_path);
      const auto r = loglab::run_experiment(cfg, cal);
      loglab::write_report_files(r, out_dir);
      for (const auto& v : r.verdicts)
        std::cout << (v.applicable ? (v.pass ? "PASS " : "FAIL ") : "N/A  ") << v.name << ": " << v.detail << '\n';
      if (r.resolution_guard) std::cout << "RESOLUTION " << r.note << '\n';
      return r.exit_code();
    }
    return report_command(in_dir, format);
  } catch (const std::exception& e) {
    std::cerr << "lab: " << e.what() << '\n';
    return 1;
  }
}
