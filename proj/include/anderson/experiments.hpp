#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "anderson/regularization.hpp"
#include "anderson/spectral_grid.hpp"

namespace anderson {

inline constexpr const char* kExperimentNames[] = {
    "divergence", "regularity", "renorm-necessity", "transform-equivalence",
    "spectral-gap", "positivity", "form-convergence"};

/// Raw key-value settings as read from a config file and flag overrides.
using ConfigValues = std::map<std::string, std::string>;

struct ExperimentConfig {
  std::string experiment;
  int dimension = 2;
  int grid = 256;
  std::vector<int> grid_ladder;
  std::vector<double> eps;
  MollifierKind mollifier = MollifierKind::gaussian;
  std::vector<std::uint64_t> seeds;
  double kappa = 0.1;
  double tol = 1e-8;
  std::size_t max_iter = 500;
  std::size_t eigen_count = 2;
  ProductMode dealias = ProductMode::pointwise;
  std::string output = "results";
  std::size_t jobs = 1;
  std::size_t cy_samples = 200;
  int block_lo = 1;
  int block_hi = 1;
  bool zero_noise = false;
  double heat_time = 0.1;
  std::size_t heat_steps = 4;
  double bump_width = 0.3;
  std::size_t probe_pairs = 10;
  std::uint64_t probe_seed = 12345;

  // Built-in assertion thresholds.
  double target_prefactor = 0.0;
  double prefactor_tol = 0.2;
  double r2_min = 0.99;
  double discrimination_min = 0.05;
  double xi_tol = 0.15;
  double x_shift_tol = 0.10;
  double wick_min = -0.2;
  double wick_max = 1e300;
  double shift_tol = 0.30;
  double equivalence_tol = 0.01;
  double roundoff_floor = 1e-12;
  double gap_factor = 10.0;
  double spectrum_tol = 1e-10;
  double stability_band = 0.5;
};

/// Parses "key = value" lines; '#' starts a comment. Throws Error(config).
ConfigValues parse_config_text(const std::string& text);
ConfigValues load_config_file(const std::filesystem::path& path);

/// Defaults for (experiment, dimension), then the given values. Validates
/// every invariant and throws Error(config) naming the violated one.
ExperimentConfig resolve_config(const ConfigValues& values);
/// Every key accepted in a config file.
std::vector<std::string> config_keys();

/// Canonical JSON snapshot (all fields except output location and pool size).
nlohmann::json config_to_json(const ExperimentConfig& config);
std::string config_hash(const ExperimentConfig& config);

/// "a..b" (inclusive) or comma list.
std::vector<std::uint64_t> parse_seed_list(const std::string& text);
/// Dyadic "2^-a..2^-b", single "2^-a", or comma list of decimals.
std::vector<double> parse_eps_list(const std::string& text);

struct Assertion {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ResultRecord {
  std::string experiment;
  std::string config_hash;
  nlohmann::json config;
  /// Cell key: {"seed": .., "eps": ..} or the string "aggregate".
  nlohmann::json cell;
  std::string status = "ok";
  std::string error;
  nlohmann::json values = nlohmann::json::object();
  std::vector<Assertion> assertions;
  double wall_clock_s = 0.0;
  std::string version;

  bool is_aggregate() const { return cell.is_string() && cell.get<std::string>() == "aggregate"; }
  bool passed() const;
  nlohmann::json to_json() const;
  static ResultRecord from_json(const nlohmann::json& j);
};

struct RunOptions {
  /// Write records under config.output; otherwise keep them in memory only.
  bool write_files = true;
  /// Called in cell order as each record is emitted.
  std::function<void(const ResultRecord&)> on_record;
};

struct RunResult {
  std::vector<ResultRecord> records;
  bool all_passed = false;
  std::filesystem::path records_file;
  std::filesystem::path csv_file;
};

RunResult run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

enum class DivergenceModel { log, inverse };

struct FitResult {
  double a = 0.0;
  double b = 0.0;
  double r_squared = 0.0;
};

/// Least squares c = a + b g(1/eps) with g = log or identity.
FitResult fit_divergence(const std::vector<std::pair<double, double>>& values, DivergenceModel model);

struct Report {
  std::string table;
  nlohmann::json summary;
  bool failed = false;
  bool empty = true;
};

/// Aggregates records, optionally restricted to one experiment name.
Report emit_report(const std::vector<ResultRecord>& records, const std::string& experiment_filter = "");
std::vector<ResultRecord> read_records(const std::filesystem::path& dir);
/// Writes summary.txt and summary.json into dir.
Report write_report(const std::filesystem::path& dir, const std::string& experiment_filter = "");

/// Numeric payload of a records file: every line with wall-clock fields removed.
std::string payload_of(const std::filesystem::path& records_file);

}  // namespace anderson
