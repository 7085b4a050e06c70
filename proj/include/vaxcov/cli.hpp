#pragma once

// Command-line workflow: preprocess -> fit -> predict / aggregate / waic, and
// the simulation experiment.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vaxcov/coverage_data.hpp"
#include "vaxcov/model.hpp"
#include "vaxcov/observations.hpp"
#include "vaxcov/sampler.hpp"
#include "vaxcov/simulate.hpp"

namespace vaxcov::cli {

enum ExitCode : int { kOk = 0, kUserError = 1, kInternalError = 2 };

/// Settings shared by the subcommands. Precedence: flags > config file >
/// defaults.
struct RunConfig {
  ModelKind model = ModelKind::IDML;
  ChainConfig chains;
  PriorConfig priors;
  bool pooled = false;
  std::optional<YearRange> years;
  std::vector<std::string> vaccine_order;

  // preprocess
  std::vector<std::string> vaccines{"DTP1", "DTP3", "MCV1", "MCV2", "PCV3"};
  int min_n = 300;
  bool drop_zero = true;
  bool ratio = true;
  bool recall = true;

  // predict / aggregate
  int steps = 2;

  // simulate
  std::string scenario = "2";
  ModelDims dims = kDeskDims;
  std::vector<std::uint64_t> data_seeds{1};
  ForecastMode forecast = ForecastMode::Rolling;
  std::optional<int> base_years;

  nlohmann::json to_json() const;
  /// Applies the keys present in `j` onto `base`. Throws DomainError on
  /// unknown keys or bad values.
  static RunConfig from_json(const nlohmann::json& j, RunConfig base);
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::filesystem::path& path, RunConfig base);
  void save(const std::filesystem::path& path) const;

  bool operator==(const RunConfig&) const;
};

/// Everything a downstream stage needs from one fitted region.
struct FitArtifact {
  std::filesystem::path dir;
  std::string region;
  ModelKind kind = ModelKind::IDML;
  IndexMaps maps;
  ObservationSet observations;
  Draws draws;
};

/// Region directories (those holding fit.json) under a fit output root,
/// sorted by name. Throws IoError when there are none.
std::vector<std::filesystem::path> fit_dirs(const std::filesystem::path& root);
FitArtifact load_fit(const std::filesystem::path& dir);

void write_observations_csv(const ObservationSet& data, const IndexMaps& maps, const std::filesystem::path& path);
ObservationSet read_observations_csv(const std::filesystem::path& path, const IndexMaps& maps);

/// Runs the command line; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace vaxcov::cli
