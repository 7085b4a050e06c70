#pragma once

// Immunization coverage records and ingestion of the admin / official /
// survey CSV streams into one harmonised dataset.

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

namespace vaxcov {

/// Data source. The enumerator order is the output order.
enum class SourceKind { Admin = 0, Official = 1, Survey = 2 };
inline constexpr std::array<SourceKind, 3> kAllSources{SourceKind::Admin, SourceKind::Official,
                                                       SourceKind::Survey};

enum class Evidence { Card, CardOrHistory };
enum class Validity { Crude, Valid };

enum class ProvenanceFlag { RatioApplied, RecallAdjusted, Clamped, LogitReady };

std::string_view to_string(SourceKind kind);
std::string_view to_string(Evidence evidence);
std::string_view to_string(Validity validity);
std::string_view to_string(ProvenanceFlag flag);
SourceKind parse_source_kind(std::string_view text);
std::optional<ProvenanceFlag> parse_provenance_flag(std::string_view text);

/// Canonical WHO region code (AFR, AMR, EMR, EUR, SEAR, WPR) for a code or a
/// regional-office alias such as "AFRO" or "PAHO"; nullopt when unknown.
std::optional<std::string> normalize_region(std::string_view code);

/// Pseudo-vaccine code used for the DTP3/DTP1 ratio after preprocessing.
inline constexpr std::string_view kDtpRatioCode = "DTP3_RATIO";

struct CoverageRecord {
  std::string country;  // ISO3
  std::string region;
  std::string vaccine;
  int year = 0;
  SourceKind source = SourceKind::Admin;
  double coverage_pct = 0.0;
  std::optional<int> sample_size;
  std::optional<Evidence> evidence;
  std::optional<Validity> validity;
  std::string survey_id;        // optional grouping key for recall adjustment
  bool recall_adjusted = false;
  std::size_t line = 0;  // input line, 0 when synthesised
};

/// Key used for sorting and de-duplication.
struct RecordKey {
  std::string country;
  std::string vaccine;
  int year = 0;
  SourceKind source = SourceKind::Admin;
  auto operator<=>(const RecordKey&) const = default;
};
RecordKey key_of(const CoverageRecord& record);
std::string describe(const RecordKey& key);

/// Immutable collection of coverage records plus the set of processing steps
/// already applied. Flags can only be added.
class ICDataset {
 public:
  ICDataset() = default;
  explicit ICDataset(std::vector<CoverageRecord> records,
                     std::set<ProvenanceFlag> flags = {})
      : records_(std::move(records)), flags_(std::move(flags)) {}

  const std::vector<CoverageRecord>& records() const noexcept { return records_; }
  const std::set<ProvenanceFlag>& flags() const noexcept { return flags_; }
  bool has_flag(ProvenanceFlag flag) const { return flags_.contains(flag); }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }

  /// New dataset with different records; existing flags are carried over and
  /// `added` is merged in.
  ICDataset with_records(std::vector<CoverageRecord> records,
                         std::set<ProvenanceFlag> added = {}) const;

  bool operator==(const ICDataset&) const = default;

 private:
  std::vector<CoverageRecord> records_;
  std::set<ProvenanceFlag> flags_;
};

bool operator==(const CoverageRecord& a, const CoverageRecord& b);

/// Maps a column role to the header name used by a particular export.
/// Roles: country, region, year, antigen, coverage_category, coverage,
/// sample_size, evidence, validity, survey_id.
class ColumnMap {
 public:
  ColumnMap();
  static ColumnMap from_file(const std::filesystem::path& path);

  const std::string& name(std::string_view role) const;
  void set(std::string_view role, std::string column);

 private:
  std::map<std::string, std::string, std::less<>> names_;
};

enum class DropReason { MissingCoverage, MissingRegion, OtherCategory, UnsupportedCategory };
std::string_view to_string(DropReason reason);

struct DroppedRow {
  std::size_t line = 0;
  DropReason reason = DropReason::MissingCoverage;
  std::string detail;
};

/// Result of reading one source file. `dropped.size() + data.size()` equals
/// the number of data rows in the file.
struct ParsedFile {
  ICDataset data;
  std::vector<DroppedRow> dropped;
  std::size_t rows = 0;
};

/// Reads an admin/official export. Rows whose coverage_category is the other
/// kind are dropped (reason OtherCategory); categories other than
/// admin/official (e.g. wuenic) are dropped as UnsupportedCategory. When the
/// mapped category column is absent every row is taken as `kind`.
ParsedFile parse_coverage_csv(const std::filesystem::path& path, SourceKind kind,
                              const ColumnMap& columns = {});

/// Reads a survey export. `year` is taken as the birth-cohort year verbatim.
ParsedFile parse_survey_csv(const std::filesystem::path& path, const ColumnMap& columns = {});

struct YearRange {
  int first = 0;
  int last = 0;
  bool contains(int year) const { return year >= first && year <= last; }
};

/// Concatenates, keeps only `vaccines` inside `years`, optionally removes exact
/// zero coverage, and stable-sorts by (country, vaccine, year, source).
/// Throws DataError listing duplicated admin/official keys.
ICDataset merge_and_filter(const std::vector<ICDataset>& sets, const std::vector<std::string>& vaccines,
                           YearRange years, bool drop_zero);

struct DenominatorRow {
  std::string country;
  std::string vaccine;
  int year = 0;
  double target_population = 0.0;
};

class DenominatorTable {
 public:
  DenominatorTable() = default;
  /// Validates positivity and key uniqueness.
  explicit DenominatorTable(std::vector<DenominatorRow> rows);
  static DenominatorTable from_csv(const std::filesystem::path& path);

  std::optional<double> population(std::string_view country, std::string_view vaccine,
                                   int year) const;
  const std::vector<DenominatorRow>& rows() const noexcept { return rows_; }

 private:
  std::vector<DenominatorRow> rows_;
  std::map<std::tuple<std::string, std::string, int>, double> index_;
};

struct YoviRow {
  std::string country;
  std::string vaccine;
  int intro_year = 0;
};

class YoviTable {
 public:
  YoviTable() = default;
  explicit YoviTable(std::vector<YoviRow> rows);
  static YoviTable from_csv(const std::filesystem::path& path);

  std::optional<int> intro_year(std::string_view country, std::string_view vaccine) const;
  const std::vector<YoviRow>& rows() const noexcept { return rows_; }

 private:
  std::vector<YoviRow> rows_;
  std::map<std::pair<std::string, std::string>, int> index_;
};

/// Analysis-ready CSV: country,region,vaccine,year,source,coverage,sample_size,
/// evidence,validity. Provenance flags go in a leading "#provenance:" comment.
void write_dataset_csv(const ICDataset& data, const std::filesystem::path& path);
ICDataset read_dataset_csv(const std::filesystem::path& path);

}  // namespace vaxcov
