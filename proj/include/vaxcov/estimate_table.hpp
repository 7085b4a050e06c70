#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace vaxcov {

/// Posterior summary of coverage for one (country|region, vaccine, year), in
/// percent.
struct EstimateRow {
  std::string unit;  // country ISO3 or region code
  std::string vaccine;
  int year = 0;
  double mean = 0.0;
  double q025 = 0.0;
  double q50 = 0.0;
  double q975 = 0.0;
  bool is_prediction = false;
};

struct EstimateTable {
  std::vector<EstimateRow> rows;
};

/// Columns: <unit_column>,vaccine,time,mean,2.5%,50%,97.5%,prediction
void write_estimates_csv(const EstimateTable& table, const std::filesystem::path& path,
                         const std::string& unit_column = "country");
EstimateTable read_estimates_csv(const std::filesystem::path& path);

}  // namespace vaxcov
