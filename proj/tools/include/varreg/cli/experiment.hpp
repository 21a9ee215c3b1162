#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "varreg/core.hpp"
#include "varreg/csv.hpp"

namespace varreg::cli {

enum class Experiment { solve, bregman, debias, convergence, bias_variance, operator_error, risk_theorem, radon_demo };

std::string_view to_string(Experiment e);
/// Throws ConfigError naming "experiment" for unknown names.
Experiment parse_experiment(std::string_view text);
const std::vector<Experiment>& all_experiments();

/// Invalid configuration; `field()` names the offending key.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::invalid_argument(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Forward operator description.
///   identity     n x n
///   dense        m x n Gaussian / sqrt(m), or `matrix_file` (plain numeric CSV)
///   convolution  circular, `kernel` (default 1/4,1/2,1/4), size n
///   spectral     n x n, singular values squared geometric in [spectrum_lo, spectrum_hi]
///   radon        grid_n^2 pixels, angles x offsets rays (0 means 2 grid_n)
struct OperatorSpec {
  std::string kind = "identity";
  Index n = 16;
  /// Rows of a random dense operator; 0 means n.
  Index m = 0;
  std::vector<double> kernel;
  double spectrum_lo = 1e-4;
  double spectrum_hi = 1.0;
  std::string matrix_file;
  int grid_n = 16;
  int angles = 0;
  int offsets = 0;
};

struct ExperimentConfig {
  Experiment experiment = Experiment::solve;
  OperatorSpec op;
  /// quadratic, l1 or tv; tv is 2-d on radon images and 1-d otherwise.
  std::string regularizer = "quadratic";
  double alpha = 0.1;
  /// bias_variance grid; operator_error and risk_theorem cycle through it
  /// when non-empty.
  std::vector<double> alpha_grid;
  /// Explicit data for solve, bregman and debias; otherwise data come from a
  /// seeded source instance plus noise.
  std::vector<double> data;
  double noise_sigma = 0.0;
  double delta0 = 1e-3;
  int n_max = 8;
  /// alpha_n = c delta_n; 0 selects c = 1/|z*|.
  double c = 0.0;
  std::string alpha_rule = "linear";
  /// Sampled rays per design (risk experiments).
  Index samples = 500;
  int replicates = 200;
  int instances = 1;
  int iterations = 10;
  std::uint64_t seed = 0;
  double tol = 1e-8;
  int max_iters = 20000;
  std::string out = "varreg-out";

  /// Throws ConfigError for the first invalid field.
  void validate() const;
};

enum class Status { pass, fail, info };

struct CheckLine {
  Status status = Status::info;
  /// Instance or check identifier, e.g. "instance 17" or "n=3".
  std::string id;
  std::string detail;
};

struct ExperimentResult {
  Experiment experiment = Experiment::solve;
  /// File stem -> table; written as <stem>.csv.
  std::vector<std::pair<std::string, csv::Table>> tables;
  /// File stem -> image or sinogram; written with csv::write_grid.
  std::vector<std::pair<std::string, DenseMatrix>> grids;
  std::vector<CheckLine> checks;
  std::vector<std::pair<std::string, double>> metrics;

  int pass_count() const;
  int fail_count() const;
  bool passed() const { return fail_count() == 0; }
};

ExperimentResult run_experiment(const ExperimentConfig& config);

/// Writes the tables and grids, summary.txt and summary.json into `dir`.
void emit_report(const ExperimentResult& result, const ExperimentConfig& config, const std::filesystem::path& dir);

/// Human-readable summary: one PASS/FAIL/INFO line per check, then counts.
void write_summary(const ExperimentResult& result, std::ostream& out);

/// Command-line entry point. Exit codes: 0 all checks pass, 1 a check
/// failed, 2 invalid configuration or usage, 3 runtime error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace varreg::cli
