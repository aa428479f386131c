#pragma once

// Config-driven experiment runs: every suite is prepared (and validated)
// before anything executes, then run with a seed derived from the master
// seed and the suite name. Reports, a CSV summary, plot data and the
// manifest are written under the output directory.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gglab/config.hpp"
#include "gglab/measure.hpp"

namespace gglab {

inline constexpr const char* kToolVersion = "gglab 0.1.0";

struct RunOptions {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<unsigned> jobs;
  double budget_scale = 1.0;
};

struct SummaryRow {
  std::string suite;
  std::string kind;
  std::string test;
  std::size_t n = 0;
  double lhs = 0.0;
  double lhs_se = 0.0;
  double rhs = 0.0;
  double rhs_se = 0.0;
  double difference = 0.0;
  double se = 0.0;
  double z = 0.0;
  std::string verdict;  // pass | fail | report | not-applicable
};

struct SuiteOutcome {
  std::string name;
  std::string kind;
  std::string verdict;
  nlohmann::json report;  // includes "rows" and "data"
};

struct ManifestEntry {
  std::string name;
  std::string kind;
  std::string report;  // path relative to the output directory
  std::string verdict;
};

struct RunManifest {
  std::string tool_version = kToolVersion;
  std::string config_hash;  // FNV-1a 64 of the config bytes, hex
  std::uint64_t seed = 0;
  double budget_scale = 1.0;
  std::vector<ManifestEntry> suites;
  std::string aggregate;  // pass | fail
  double runtime_seconds = 0.0;
};

void to_json(nlohmann::json& j, const RunManifest& m);
void from_json(const nlohmann::json& j, RunManifest& m);

/// Builds the measure source a config entry describes.
std::shared_ptr<MeasureSource> make_source(const ConfigDocument& doc, const SourceConfig& source);

/// A validated suite ready to run.
struct PreparedSuite {
  std::string name;
  std::string kind;
  std::function<SuiteOutcome(std::uint64_t seed, unsigned jobs)> run;
};

/// Throws ConfigError when a source or suite is invalid.
std::vector<PreparedSuite> prepare_suites(const ExperimentConfig& config, double budget_scale);

/// Runs every suite and writes all outputs. Throws ConfigError on invalid
/// configuration (including a missing seed).
RunManifest run_experiment(const ExperimentConfig& config, const RunOptions& options,
                           std::ostream& log);

/// "fail" entries of a manifest, by name.
std::vector<std::string> failing_suites(const RunManifest& m);

/// Loads a config file, runs it and returns the process exit code
/// (0 pass, 1 failure, 2 configuration error).
int run_command(const std::filesystem::path& config, const RunOptions& options, std::ostream& out,
                std::ostream& err);

/// Prints the table for a manifest and rewrites summary.csv and the plot data
/// files next to it. Exit code 1 when report files are missing, 2 when the
/// manifest cannot be read.
int summarize_command(const std::filesystem::path& manifest, std::ostream& out, std::ostream& err);

/// CSV text with one row per test; deterministic number formatting.
std::string summary_csv(const std::vector<SummaryRow>& rows);
std::string summary_table(const std::vector<SummaryRow>& rows);

/// Writes to a temporary sibling and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace gglab
