#pragma once

// Bias corrections and transforms applied between ingestion and model
// fitting: recall-bias adjustment, survey selection, the DTP3/DTP1 ratio,
// clamping and the logit transform. Recommended order is the order of the
// declarations below.

#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "vaxcov/coverage_data.hpp"
#include "vaxcov/estimate_table.hpp"
#include "vaxcov/observations.hpp"

namespace vaxcov {

inline constexpr double kMinProportion = 0.001;
inline constexpr double kMaxProportion = 0.999;

double logit(double p);
double inv_logit(double x);

/// One line of the processing report.
struct ReportEntry {
  std::string step;    // e.g. "recall_bias"
  std::string code;    // reason code, e.g. "adjusted", "dropped_small_sample"
  std::string key;     // record description
  std::optional<double> before;
  std::optional<double> after;
};

class ProcessingReport {
 public:
  void add(ReportEntry entry) { entries_.push_back(std::move(entry)); }
  const std::vector<ReportEntry>& entries() const noexcept { return entries_; }
  std::size_t count(std::string_view step, std::string_view code) const;
  void write(std::ostream& out) const;

 private:
  std::vector<ReportEntry> entries_;
};

/// Third dose / first dose pair used for recall-bias adjustment.
struct DosePair {
  std::string dose3;
  std::string dose1;
};
std::vector<DosePair> default_recall_pairs();  // DTP3/DTP1, PCV3/PCV1

/// Replaces each "Card or History" third-dose survey estimate by
/// card3 * history1 / card1 when all three inputs exist for the same
/// (country, year, survey). Inputs are read from card-only and first-dose
/// records only, so re-applying gives the same result.
ICDataset recall_bias_adjust(const ICDataset& dataset, std::span<const DosePair> pairs,
                             ProcessingReport* report = nullptr);

/// Keeps at most one survey estimate per (country, vaccine, year).
ICDataset select_survey_estimates(const ICDataset& dataset, int min_n = 300,
                                  ProcessingReport* report = nullptr);

/// Replaces DTP3 by the pseudo-vaccine DTP3_RATIO = 100 * DTP3 / DTP1 for each
/// (country, year, source) with both doses, and caps DTP1 above 100 at 99.9.
ICDataset apply_dtp_ratio(const ICDataset& dataset, ProcessingReport* report = nullptr);

/// Caps coverage into [0.1, 99.9] percent.
ICDataset clamp_coverage(const ICDataset& dataset, ProcessingReport* report = nullptr);

struct LogitData {
  ObservationSet observations;
  IndexMaps maps;
};

struct LogitOptions {
  std::optional<YearRange> years;  // defaults to the observed span
  std::vector<std::string> vaccine_order;  // optional explicit ordering
};

/// Clamps to [0.001, 0.999] as proportions, applies the logit and assigns
/// integer indices (countries sorted, vaccines sorted unless ordered,
/// years contiguous).
LogitData clamp_and_logit(const ICDataset& dataset, const LogitOptions& options = {});

/// Drops rows before the year of introduction; rows for (country, vaccine)
/// pairs missing from `yovi` are kept and noted in `report`.
EstimateTable yovi_filter(const EstimateTable& estimates, const YoviTable& yovi,
                          ProcessingReport* report = nullptr);

}  // namespace vaxcov
