#pragma once

// Convergence diagnostics on retained draws: split R-hat and effective
// sample sizes.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vaxcov/sampler.hpp"

namespace vaxcov {

using Traces = std::vector<std::vector<double>>;  // one trace per chain

/// Split R-hat: every chain is cut in half and
/// sqrt(((n-1)/n W + B/n) / W) is taken over the halves. nullopt when the
/// within-half variance is zero (undefined). Needs >= 2 chains or halves and
/// >= 4 draws per chain.
std::optional<double> split_rhat(const Traces& chains);

/// Multi-chain effective sample size on split chains with Geyer's initial
/// positive and monotone sequence truncation. NaN when undefined.
double effective_sample_size(const Traces& chains);

/// ESS of the rank-normalised draws (bulk ESS).
double bulk_ess(const Traces& chains);

/// Monte Carlo standard error of the mean, sd / sqrt(ESS).
double mcse_mean(const Traces& chains);

struct ParamDiagnostic {
  std::string name;
  std::optional<double> rhat;  // nullopt: undefined
  double ess_bulk = 0.0;
};

struct DiagnosticsReport {
  static constexpr double kRhatGate = 1.05;

  std::vector<ParamDiagnostic> params;
  double max_rhat = 1.0;  // over defined values
  bool passed = true;     // max_rhat < kRhatGate

  void write_csv(const std::filesystem::path& path) const;
};

/// Diagnostics for the hyperparameters (unless held fixed), the intercepts
/// (lambda or lambda^(k), and nu) and every mu_ijt.
DiagnosticsReport diagnose(const Draws& draws, bool include_hyper = true);

}  // namespace vaxcov
