#pragma once

#include <limits>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "cutoff/config.hpp"

namespace cutoff {

enum class Command { constants, profile, fp, mc, doublewell, compare };

Command parse_command(const std::string& name);
std::string to_string(Command c);

/// 17 significant digits in scientific notation; nan/inf spelled out.
std::string format_number(double x);

/// Column-named table; cells are stored already formatted.
struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  void add(std::vector<std::string> row);
  /// Header comment line, column row, data rows.
  std::string render(const std::string& config_hash, const std::string& command) const;
};

struct RunManifest {
  std::string command;
  std::string config_hash;
  std::string version;
  std::string config;                     // canonical form
  std::vector<std::string> outputs;
  std::map<std::string, double> timings;  // seconds
  nlohmann::json diagnostics = nlohmann::json::object();
  std::vector<std::string> warnings;
  std::vector<std::string> errors;        // engine failures; the rest of the run continues
  int status = 0;                         // 0 ok, 2 at least one engine failed

  nlohmann::json to_json() const;
};

struct RunOptions {
  std::string out_dir;  // empty uses the config's `out`
  bool force = false;
};

/// Tables produced by one command, keyed by file name, plus the manifest
/// without timing or output information.
struct CommandResult {
  std::map<std::string, CsvTable> tables;
  RunManifest manifest;
};

/// Runs a command without touching the file system.
CommandResult execute(const ExperimentConfig& config, Command command);

/// execute + write: `<command>*.csv` and `<command>.manifest.json` under the
/// output directory. Existing outputs raise ValidationError unless `force`.
RunManifest run(const ExperimentConfig& config, Command command, const RunOptions& options = {});

struct ComparePair {
  std::string pair;        // "analytic-fp", "fp-mc", "analytic-mc"
  double epsilon = 0.0;
  double max_deviation = 0.0;
  double tolerance = 0.0;  // absolute, or the multiple of the standard error for mc pairs
  bool pass = false;
  double self_convergence = std::numeric_limits<double>::quiet_NaN();  // attached on fp failures
};

struct CompareRow {
  double epsilon = 0.0;
  double b = 0.0;
  double t = 0.0;
  double analytic = std::numeric_limits<double>::quiet_NaN();
  double fp = std::numeric_limits<double>::quiet_NaN();
  double mc = std::numeric_limits<double>::quiet_NaN();
  double mc_se = std::numeric_limits<double>::quiet_NaN();
};

struct CompareReport {
  std::vector<CompareRow> rows;
  std::vector<ComparePair> pairs;
  std::vector<std::string> errors;
  bool pass() const;
};

/// Distances at t*(b) from every selected engine and their pairwise
/// deviations: analytic-fp within 5e-3, mc pairs within 3 standard errors
/// (floored at 1/N).
/// The analytic engine is the first-order Gaussian law. Needs >= 2 engines.
CompareReport compare_engines(const ExperimentConfig& config);

}  // namespace cutoff
