#pragma once

#include "pcgpwm/surrogate.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pcgpwm {

enum class TestFunction { borehole, piston, wingweight, otlcircuit };

struct Range {
  double lo;
  double hi;
};

struct TestFunctionInfo {
  std::string_view name;
  std::vector<Range> theta_ranges;
  std::vector<Range> x_ranges;
  Index d() const { return static_cast<Index>(theta_ranges.size()); }
  Index p() const { return static_cast<Index>(x_ranges.size()); }
};

const TestFunctionInfo& info(TestFunction tf);
TestFunction parse_test_function(std::string_view name);
inline constexpr std::array<TestFunction, 4> kAllTestFunctions{TestFunction::borehole, TestFunction::piston,
                                                               TestFunction::wingweight, TestFunction::otlcircuit};

/// f(theta, x) in natural units. Throws InputError outside the ranges.
double eval_function(TestFunction tf, const Vector& theta, const Vector& x);

/// Maps unit-cube rows onto the parameter ranges and back.
Matrix theta_from_unit(TestFunction tf, const Matrix& unit);
Matrix x_from_unit(TestFunction tf, const Matrix& unit);

/// n x m responses for unit-scale theta (n x d) and natural-unit locations.
Matrix evaluate_grid(TestFunction tf, const Matrix& theta_unit, const Matrix& locations);

enum class Mechanism { mcar, mar, mnar };
std::string_view to_string(Mechanism m);
Mechanism parse_mechanism(std::string_view name);

struct MissingnessSpec {
  Mechanism mechanism = Mechanism::mcar;
  double rate = 0.05;
  std::uint64_t seed = 0;
  /// MAR: fraction of locations eligible to go missing.
  double mar_subset_fraction = 0.5;
  /// MNAR-threshold: use this c instead of bisecting for the rate.
  std::optional<double> threshold;
};

/// Masks `values` (n x m, natural units) in place of a copy. MNAR uses the
/// threshold rule for borehole and wingweight and the logistic rule for
/// piston and otlcircuit. `locations` (m x p) feed the MNAR rules.
Matrix apply_missingness(const Matrix& values, const MissingnessSpec& spec, TestFunction tf,
                         const Matrix& locations);

/// Fraction of NaN entries.
double realized_missing_fraction(const Matrix& m);

/// Threshold mask: missing iff value > c * reference_j.
Matrix threshold_mask(const Matrix& values, const Vector& reference, double c);

struct Metrics {
  double rmse = 0.0;
  double coverage = 0.0;
  double width = 0.0;
  Index count = 0;
};

inline constexpr double kZ95 = 1.6448536269514722;

/// Interval mean +/- z sqrt(variance). Missing truths are skipped.
Metrics compute_metrics(const Matrix& mean, const Matrix& variance, const Matrix& truth, double z = kZ95);

/// Per-column predictor built from independent univariate GPs.
struct ColumnGP {
  std::vector<std::optional<ComponentGP>> columns;
  StandardizationStats stats;

  std::pair<Matrix, Matrix> predict_diag(const Matrix& theta_star) const;
};

Surrogate baseline_complete_rows(const SimulationDataset& ds, const SurrogateConfig& config = {});

/// Fills each missing (i, j) with the mean of the k nearest available
/// entries in joint (theta, x) space, all coordinates rescaled to [0, 1].
Matrix knn_impute(const SimulationDataset& ds, int k = 5);
Surrogate baseline_knn_impute(const SimulationDataset& ds, int k = 5, const SurrogateConfig& config = {});

ColumnGP baseline_colgp(const SimulationDataset& ds, int restarts = 4, std::uint64_t seed = 0);

struct ExperimentConfig {
  std::vector<TestFunction> functions{TestFunction::borehole};
  std::vector<Index> n_values{50, 100, 250};
  std::vector<std::pair<Mechanism, double>> scenarios;
  std::vector<std::string> methods{"pcgpwm", "pcgp_knn", "colgp"};
  int replications = 5;
  Index m = 15;
  Index holdout = 500;
  int knn_k = 5;
  std::uint64_t seed = 2024;
  double budget_seconds = 3600.0;
  bool record_timing = true;
  SurrogateConfig surrogate;
};

/// Parses and validates a JSON config. Errors name the offending field path.
ExperimentConfig parse_experiment_config(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

struct ResultRow {
  std::string function;
  std::string method;
  Index n = 0;
  std::string mechanism;
  double rate = 0.0;
  int rep = 0;
  Metrics metrics;
  double fit_seconds = 0.0;
  std::string status = "ok";
};

/// Generated data of one (function, n, scenario, replication) cell.
struct CellData {
  SimulationDataset train;
  Matrix holdout_theta;
  Matrix holdout_truth;
};

CellData make_cell_data(const ExperimentConfig& cfg, TestFunction tf, Index n, Mechanism mech, double rate, int rep);

/// Runs every cell; rows come back ordered by cell key regardless of thread
/// scheduling. `progress` (optional) is called after each cell.
std::vector<ResultRow> run_experiment(const ExperimentConfig& cfg,
                                      const std::function<void(const ResultRow&)>& progress = {});

void write_results_csv(const std::filesystem::path& path, const std::vector<ResultRow>& rows);

}  // namespace pcgpwm
