#pragma once

// Synthetic multi-source coverage data and the BDSL versus IDML comparison
// experiment.

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vaxcov/model.hpp"
#include "vaxcov/posterior.hpp"
#include "vaxcov/sampler.hpp"

namespace vaxcov {

struct ScenarioSpec {
  std::string name = "custom";
  /// Effect hyperparameters, IDML source scales (sigma_src), BDSL residual
  /// scale (sigma) and source-effect scale (sigma_nu).
  Hyperparams truth;
  std::array<double, 3> lambda_src{0.07, 0.02, 0.05};
  double lambda = 0.05;
  std::array<double, 3> missing_rate{0.15, 0.15, 0.20};
  /// Candidate first years (1-based, on a 20-year grid) of the late vaccines.
  std::vector<int> late_starts{10, 15};
  int late_vaccines = 2;

  /// Scenarios 1 to 3 of the simulation study.
  static ScenarioSpec standard(int scenario);
  /// Scenario 1 effects with every noise scale at 0.01 and no missingness.
  static ScenarioSpec zero_noise();
  /// "1", "2", "3", "s1".. or "zero-noise".
  static ScenarioSpec parse(const std::string& name);

  /// Throws DomainError on rates outside [0, 1], non-positive scales,
  /// |rho| >= 1 or start years below 1.
  void validate() const;
};

/// Default dimensions of the simulation study and of the desk-scale runs.
inline constexpr ModelDims kStudyDims{20, 5, 20};
inline constexpr ModelDims kDeskDims{8, 3, 12};

struct SyntheticData {
  ModelDims dims;
  IndexMaps maps;  // countries C01.., vaccines V1.., years 1..T
  LatentField effects;
  std::array<double, 3> nu{};  // BDSL source effects
  ObservationSet idml;         // generated from the IDML likelihood
  ObservationSet bdsl;         // generated from the BDSL likelihood, same mask
  Eigen::VectorXd mu_idml;     // true shared mean, no intercept
  Eigen::VectorXd mu_bdsl;     // true shared mean including lambda
  std::vector<int> start;      // first time index (0-based) of each (i, j) series

  const ObservationSet& observations(ModelKind kind) const { return kind == ModelKind::BDSL ? bdsl : idml; }
  const Eigen::VectorXd& mu(ModelKind kind) const { return kind == ModelKind::BDSL ? mu_bdsl : mu_idml; }
  /// True coverage in percent at cells with t >= start and t in [from, to).
  TruthTable truth(ModelKind kind, int from = 0, int to = -1) const;
};

/// Draws effects at the true hyperparameters, then both source datasets.
/// The same (dims, scenario, seed) always gives the same data.
SyntheticData generate_synthetic(const ModelDims& dims, const ScenarioSpec& scenario, std::uint64_t seed);

enum class ForecastMode { Rolling, Once, None };
ForecastMode parse_forecast_mode(const std::string& text);

struct ExperimentOptions {
  ModelDims dims = kDeskDims;
  ChainConfig chains;
  PriorConfig priors = PriorConfig::simulation_study();
  ForecastMode forecast = ForecastMode::Rolling;
  /// Training years of the first forecast origin; defaults to half of T.
  std::optional<int> base_years;
  std::uint64_t data_seed = 1;
};

struct MetricsColumn {
  ModelKind model = ModelKind::IDML;
  std::string horizon;  // "in-sample", "one-step", "two-step", "forecast"
  ValidationMetrics metrics;
  int fits = 0;
  /// Fits whose R-hat gate failed, or which could not be run.
  std::vector<std::string> warnings;
};

struct ExperimentReport {
  std::string scenario;
  ModelDims dims;
  std::uint64_t data_seed = 0;
  std::size_t n_observations = 0;
  std::vector<MetricsColumn> columns;

  const MetricsColumn* find(ModelKind model, const std::string& horizon) const;
  /// Long CSV: scenario,seed,model,horizon,metric,value.
  void write_csv(const std::filesystem::path& path) const;
  /// Aligned table with one row per metric and one column per model x horizon.
  void write_text(std::ostream& out) const;
};

ExperimentReport run_experiment(const ScenarioSpec& scenario, const ExperimentOptions& options);

}  // namespace vaxcov
