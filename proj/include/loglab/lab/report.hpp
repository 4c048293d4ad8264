#pragma once

// Experiment reports: labelled time series, fits, verdicts, and their
// report.json / timeseries.csv / plotdata.csv renderings.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "loglab/core/types.hpp"

namespace loglab {

struct Column {
  std::string name;
  std::string unit;
  std::string anchor;  // which estimate the column tests
};

struct FitRecord {
  std::string name;
  double value = 0.0;
  double stderr_ = 0.0;
  double r2 = 1.0;
  std::size_t points = 0;
};

struct Verdict {
  std::string name;
  bool pass = true;
  bool applicable = true;  // non-applicable verdicts are recorded but not counted
  std::string detail;
};

struct PlotRow {
  double t = 0.0;
  double value = 0.0;
  double lower_bound = std::numeric_limits<double>::quiet_NaN();
  double upper_bound = std::numeric_limits<double>::quiet_NaN();
};

struct ExperimentReport {
  std::string experiment;
  std::string config_hash;
  std::uint64_t seed = 0;
  int calibration_version = 0;
  std::vector<Column> columns;
  std::vector<std::vector<double>> rows;
  std::vector<PlotRow> plot;
  std::vector<FitRecord> fits;
  std::map<std::string, double> constants;
  std::map<std::string, double> diagnostics;
  std::vector<Verdict> verdicts;
  bool resolution_guard = false;  // set when a grid could not resolve the request
  std::string note;

  void add_verdict(std::string name, bool pass, std::string detail, bool applicable = true) {
    verdicts.push_back({std::move(name), pass, applicable, std::move(detail)});
  }

  bool passed() const {
    for (const auto& v : verdicts)
      if (v.applicable && !v.pass) return false;
    return true;
  }

  /// 0 all verdicts pass, 2 a verdict failed, 3 resolution guard tripped.
  int exit_code() const {
    if (resolution_guard) return 3;
    return passed() ? 0 : 2;
  }
};

namespace detail {

// JSON has no NaN or infinity; they are written as null.
inline nlohmann::json num(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }
inline double num_from(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

inline std::string csv_num(double v) {
  if (!std::isfinite(v)) return "nan";
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

inline std::string csv_text(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

}  // namespace detail

inline nlohmann::json to_json(const ExperimentReport& r) {
  using nlohmann::json;
  json cols = json::array();
  for (const auto& c : r.columns) cols.push_back({{"name", c.name}, {"unit", c.unit}, {"anchor", c.anchor}});
  json rows = json::array();
  for (const auto& row : r.rows) {
    json a = json::array();
    for (double v : row) a.push_back(detail::num(v));
    rows.push_back(a);
  }
  json plot = json::array();
  for (const auto& p : r.plot)
    plot.push_back({{"t", detail::num(p.t)},
                    {"value", detail::num(p.value)},
                    {"lower_bound", detail::num(p.lower_bound)},
                    {"upper_bound", detail::num(p.upper_bound)}});
  json fits = json::array();
  for (const auto& f : r.fits)
    fits.push_back({{"name", f.name},
                    {"value", detail::num(f.value)},
                    {"stderr", detail::num(f.stderr_)},
                    {"r2", detail::num(f.r2)},
                    {"points", f.points}});
  json verdicts = json::array();
  for (const auto& v : r.verdicts)
    verdicts.push_back({{"name", v.name}, {"pass", v.pass}, {"applicable", v.applicable}, {"detail", v.detail}});
  json constants = json::object();
  for (const auto& [k, v] : r.constants) constants[k] = detail::num(v);
  json diag = json::object();
  for (const auto& [k, v] : r.diagnostics) diag[k] = detail::num(v);
  return {{"experiment", r.experiment},
          {"config_hash", r.config_hash},
          {"seed", r.seed},
          {"calibration_version", r.calibration_version},
          {"columns", cols},
          {"timeseries", rows},
          {"plot", plot},
          {"fits", fits},
          {"constants", constants},
          {"diagnostics", diag},
          {"verdicts", verdicts},
          {"resolution_guard", r.resolution_guard},
          {"passed", r.passed()},
          {"exit_code", r.exit_code()},
          {"note", r.note}};
}

inline ExperimentReport report_from_json(const nlohmann::json& j) {
  ExperimentReport r;
  r.experiment = j.at("experiment").get<std::string>();
  r.config_hash = j.at("config_hash").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.calibration_version = j.at("calibration_version").get<int>();
  for (const auto& c : j.at("columns"))
    r.columns.push_back({c.at("name").get<std::string>(), c.at("unit").get<std::string>(),
                         c.at("anchor").get<std::string>()});
  for (const auto& row : j.at("timeseries")) {
    std::vector<double> v;
    for (const auto& x : row) v.push_back(detail::num_from(x));
    r.rows.push_back(std::move(v));
  }
  for (const auto& p : j.at("plot"))
    r.plot.push_back({detail::num_from(p.at("t")), detail::num_from(p.at("value")),
                      detail::num_from(p.at("lower_bound")), detail::num_from(p.at("upper_bound"))});
  for (const auto& f : j.at("fits"))
    r.fits.push_back({f.at("name").get<std::string>(), detail::num_from(f.at("value")),
                      detail::num_from(f.at("stderr")), detail::num_from(f.at("r2")),
                      f.at("points").get<std::size_t>()});
  for (const auto& [k, v] : j.at("constants").items()) r.constants[k] = detail::num_from(v);
  for (const auto& [k, v] : j.at("diagnostics").items()) r.diagnostics[k] = detail::num_from(v);
  for (const auto& v : j.at("verdicts"))
    r.verdicts.push_back({v.at("name").get<std::string>(), v.at("pass").get<bool>(),
                          v.at("applicable").get<bool>(), v.at("detail").get<std::string>()});
  r.resolution_guard = j.at("resolution_guard").get<bool>();
  r.note = j.at("note").get<std::string>();
  return r;
}

/// Time series with a header row of "name [unit]" labels.
inline std::string timeseries_csv(const ExperimentReport& r) {
  std::ostringstream os;
  for (std::size_t k = 0; k < r.columns.size(); ++k) {
    if (k) os << ',';
    const auto& c = r.columns[k];
    os << detail::csv_text(c.unit.empty() ? c.name : c.name + " [" + c.unit + "]");
  }
  os << '\n';
  for (const auto& row : r.rows) {
    for (std::size_t k = 0; k < row.size(); ++k) os << (k ? "," : "") << detail::csv_num(row[k]);
    os << '\n';
  }
  return os.str();
}

inline std::string plotdata_csv(const ExperimentReport& r) {
  std::ostringstream os;
  os << "t,value,lower_bound,upper_bound\n";
  for (const auto& p : r.plot)
    os << detail::csv_num(p.t) << ',' << detail::csv_num(p.value) << ','
       << detail::csv_num(p.lower_bound) << ',' << detail::csv_num(p.upper_bound) << '\n';
  return os.str();
}

/// Flat summary: one line per fit, constant, diagnostic and verdict.
inline std::string summary_csv(const ExperimentReport& r) {
  std::ostringstream os;
  os << "section,name,value,stderr,pass,detail\n";
  for (const auto& f : r.fits)
    os << "fit," << detail::csv_text(f.name) << ',' << detail::csv_num(f.value) << ','
       << detail::csv_num(f.stderr_) << ",,r2=" << detail::csv_num(f.r2) << '\n';
  for (const auto& [k, v] : r.constants)
    os << "constant," << detail::csv_text(k) << ',' << detail::csv_num(v) << ",,,\n";
  for (const auto& [k, v] : r.diagnostics)
    os << "diagnostic," << detail::csv_text(k) << ',' << detail::csv_num(v) << ",,,\n";
  for (const auto& v : r.verdicts)
    os << "verdict," << detail::csv_text(v.name) << ",,,"
       << (v.applicable ? (v.pass ? "pass" : "fail") : "n/a") << ',' << detail::csv_text(v.detail) << '\n';
  return os.str();
}

inline void write_report_files(const ExperimentReport& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto put = [&](const char* name, const std::string& text) {
    std::ofstream out(dir / name);
    if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
    out << text;
  };
  put("report.json", to_json(r).dump(2) + "\n");
  put("timeseries.csv", timeseries_csv(r));
  put("plotdata.csv", plotdata_csv(r));
}

inline ExperimentReport read_report(const std::filesystem::path& dir) {
  std::ifstream in(dir / "report.json");
  if (!in) throw std::runtime_error("no report.json in " + dir.string());
  nlohmann::json j;
  in >> j;
  return report_from_json(j);
}

}  // namespace loglab
