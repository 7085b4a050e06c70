#pragma once

// Posterior summaries: coverage estimates, forward predictions, regional
// aggregates, WAIC and validation metrics.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "vaxcov/coverage_data.hpp"
#include "vaxcov/estimate_table.hpp"
#include "vaxcov/observations.hpp"
#include "vaxcov/sampler.hpp"

namespace vaxcov {

/// Vaccines modelled as a ratio and converted back by multiplying with the
/// base vaccine, draw by draw.
struct RatioSpec {
  std::string ratio_vaccine = "DTP3_RATIO";
  std::string base_vaccine = "DTP1";
  std::string output_vaccine = "DTP3";
};

/// Coverage proportions per draw on a (unit, vaccine, year) grid.
struct CoverageDraws {
  std::vector<std::string> units;
  std::vector<std::string> vaccines;
  int first_year = 0;
  int n_years = 0;
  std::vector<char> prediction;  // per year
  Eigen::MatrixXd p;             // rows: row(u, v, y); columns: draws

  int row(int u, int v, int y) const { return (u * static_cast<int>(vaccines.size()) + v) * n_years + y; }
  /// Mean and type-7 2.5/50/97.5% quantiles in percent.
  EstimateTable summarize() const;
};

/// p = invlogit(mu) for every retained draw (chains pooled in order). When
/// both ratio and base vaccines are present the ratio series is replaced by
/// base x ratio under `output_vaccine`.
CoverageDraws coverage_draws(const Draws& draws, const IndexMaps& maps,
                             const std::optional<RatioSpec>& ratio = RatioSpec{});

EstimateTable coverage_estimates(const Draws& draws, const IndexMaps& maps,
                                 const std::optional<RatioSpec>& ratio = RatioSpec{});

/// Extends gamma, phi, delta and omega `steps` years past the data with their
/// AR(1) dynamics, per draw. The result holds the fitted years followed by the
/// predicted ones (flagged) unless `include_fitted` is false.
CoverageDraws predict_forward(const Draws& draws, const IndexMaps& maps, int steps, std::uint64_t seed,
                              const std::optional<RatioSpec>& ratio = RatioSpec{}, bool include_fitted = true);

/// Population-weighted regional means per draw. `regions` is parallel to
/// national.units. Throws DataError listing every missing denominator.
CoverageDraws regional_aggregate(const CoverageDraws& national, const std::vector<std::string>& regions,
                                 const DenominatorTable& denominators);

struct WaicReport {
  double lppd = 0.0;
  double gof = 0.0;      // -2 lppd
  double penalty = 0.0;  // p_waic, sum of pointwise variances
  double waic = 0.0;     // gof + 2 penalty
  std::size_t n_obs = 0;
  std::size_t n_draws = 0;

  static WaicReport from_columns(double gof, double penalty);
};

/// Log likelihood of each observation (columns) under each draw (rows).
Eigen::MatrixXd pointwise_log_lik(const Draws& draws, const ObservationSet& data);
WaicReport waic(const Eigen::MatrixXd& log_lik);
WaicReport waic(const Draws& draws, const ObservationSet& data);

using EstimateKey = std::tuple<std::string, std::string, int>;  // unit, vaccine, year
using TruthTable = std::map<EstimateKey, double>;                // percent

struct ValidationMetrics {
  double av_bias = 0.0;
  double rmse = 0.0;
  double mae = 0.0;
  double coverage95 = 0.0;  // percent of keys inside the 95% interval
  double correlation = 0.0;
  std::size_t n = 0;
};

/// Metrics over the keys present in both tables, in percentage points.
/// Throws DataError when no key matches.
ValidationMetrics validation_metrics(const EstimateTable& predicted, const TruthTable& truth);

/// Type-7 sample quantile of already sorted values.
double quantile_sorted(const std::vector<double>& sorted, double prob);

}  // namespace vaxcov
