#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "uwauth/config.hpp"
#include "uwauth/sim.hpp"

namespace uwauth::experiment {

/// Library version, from git describe when available.
std::string version();

struct RunOptions {
  std::filesystem::path out = "out";
  unsigned workers = 1;
  std::optional<std::uint64_t> seed;  ///< overrides plan.seed
  std::string format = "csv";         ///< csv | json
  std::ostream* log = nullptr;        ///< progress and resolved values; null is silent
  /// Test hook: scales the analytic sigma so validate must disagree.
  double inject_sigma_scale = 1.0;
};

inline constexpr const char* kCsvHeader =
    "scenario_id,source,test,fusion,snr_db,p_fa,p_fa_ci,p_md,p_md_ci,p_mc,p_mc_ci,n_trials,flags";

/// One CSV document: the config comment line, the header and one row per
/// (curve, SNR point). Absent values are empty fields.
std::string format_csv(const std::vector<sim::ErrorRateCurve>& curves, const std::string& config_json);
std::string format_json(const std::vector<sim::ErrorRateCurve>& curves, const std::string& config_json);

/// Creates the directory and proves it writable. Throws IoError.
void ensure_writable(const std::filesystem::path& dir);

struct RunResult {
  std::vector<std::filesystem::path> files;
  sim::SweepResult sweep;
  std::vector<sim::ErrorRateCurve> curves;
  double wall_seconds = 0.0;
};

/// Applies --seed to the config; the embedded config reflects it.
config::ExperimentConfig effective(config::ExperimentConfig cfg, const RunOptions& opts);

/// Monte Carlo sweep; one file per curve family plus manifest.json.
RunResult cmd_simulate(const config::ExperimentConfig& cfg, const RunOptions& opts);

/// Analytic curves on the same grid; files are prefixed analytic_.
RunResult cmd_analytic(const config::ExperimentConfig& cfg, const RunOptions& opts);

struct ValidationReport {
  sim::ComparisonReport comparison;
  std::uint64_t inclusion_violations = 0;
  std::uint64_t records = 0;
  std::vector<std::filesystem::path> files;
  bool pass() const { return comparison.flags == 0 && inclusion_violations == 0; }
};

/// Runs both paths and compares them point by point. Writes validation.csv.
ValidationReport cmd_validate(const config::ExperimentConfig& cfg, const RunOptions& opts);

/// Writes the preset scenario configs as <name>.json.
std::vector<std::filesystem::path> emit_scenarios(const std::filesystem::path& dir);

/// Human-readable pass/fail table.
void print_report(std::ostream& os, const ValidationReport& rep);

}  // namespace uwauth::experiment
