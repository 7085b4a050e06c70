#include "vaxcov/coverage_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <tuple>

#include "vaxcov/csv.hpp"
#include "vaxcov/errors.hpp"

namespace vaxcov {

std::string_view to_string(SourceKind kind) {
  switch (kind) {
    case SourceKind::Admin:
      return "admin";
    case SourceKind::Official:
      return "official";
    case SourceKind::Survey:
      return "survey";
  }
  return "?";
}

std::string_view to_string(Evidence evidence) {
  return evidence == Evidence::Card ? "Card" : "Card or History";
}

std::string_view to_string(Validity validity) {
  return validity == Validity::Valid ? "valid" : "crude";
}

std::string_view to_string(ProvenanceFlag flag) {
  switch (flag) {
    case ProvenanceFlag::RatioApplied:
      return "ratio_applied";
    case ProvenanceFlag::RecallAdjusted:
      return "recall_adjusted";
    case ProvenanceFlag::Clamped:
      return "clamped";
    case ProvenanceFlag::LogitReady:
      return "logit_ready";
  }
  return "?";
}

std::string_view to_string(DropReason reason) {
  switch (reason) {
    case DropReason::MissingCoverage:
      return "missing_coverage";
    case DropReason::MissingRegion:
      return "missing_region";
    case DropReason::OtherCategory:
      return "other_category";
    case DropReason::UnsupportedCategory:
      return "unsupported_category";
  }
  return "?";
}

SourceKind parse_source_kind(std::string_view text) {
  const auto lower = csv::to_lower(csv::trim(text));
  if (lower == "admin" || lower == "administrative") return SourceKind::Admin;
  if (lower == "official") return SourceKind::Official;
  if (lower == "survey") return SourceKind::Survey;
  throw DataError("unknown source kind '" + std::string(text) + "'");
}

std::optional<ProvenanceFlag> parse_provenance_flag(std::string_view text) {
  for (auto flag : {ProvenanceFlag::RatioApplied, ProvenanceFlag::RecallAdjusted,
                    ProvenanceFlag::Clamped, ProvenanceFlag::LogitReady}) {
    if (to_string(flag) == text) return flag;
  }
  return std::nullopt;
}

std::optional<std::string> normalize_region(std::string_view code) {
  static const std::map<std::string, std::string, std::less<>> aliases{
      {"AFR", "AFR"},   {"AFRO", "AFR"}, {"AMR", "AMR"},   {"AMRO", "AMR"},
      {"PAHO", "AMR"},  {"EMR", "EMR"},  {"EMRO", "EMR"},  {"EUR", "EUR"},
      {"EURO", "EUR"},  {"SEAR", "SEAR"}, {"SEARO", "SEAR"}, {"WPR", "WPR"},
      {"WPRO", "WPR"}};
  const auto it = aliases.find(csv::to_upper(csv::trim(code)));
  if (it == aliases.end()) return std::nullopt;
  return it->second;
}

RecordKey key_of(const CoverageRecord& record) {
  return {record.country, record.vaccine, record.year, record.source};
}

std::string describe(const RecordKey& key) {
  return key.country + "/" + key.vaccine + "/" + std::to_string(key.year) + "/" +
         std::string(to_string(key.source));
}

bool operator==(const CoverageRecord& a, const CoverageRecord& b) {
  return std::tie(a.country, a.region, a.vaccine, a.year, a.source, a.coverage_pct, a.sample_size,
                  a.evidence, a.validity, a.survey_id, a.recall_adjusted) ==
         std::tie(b.country, b.region, b.vaccine, b.year, b.source, b.coverage_pct, b.sample_size,
                  b.evidence, b.validity, b.survey_id, b.recall_adjusted);
}

ICDataset ICDataset::with_records(std::vector<CoverageRecord> records,
                                  std::set<ProvenanceFlag> added) const {
  auto flags = flags_;
  flags.merge(added);
  return ICDataset(std::move(records), std::move(flags));
}

// ---------------------------------------------------------------------------
// Column mapping

ColumnMap::ColumnMap() {
  for (const char* role : {"region", "year", "antigen", "coverage_category", "coverage",
                           "sample_size", "evidence", "validity", "survey_id"}) {
    names_[role] = role;
  }
  names_["country"] = "code";
}

const std::string& ColumnMap::name(std::string_view role) const {
  const auto it = names_.find(role);
  if (it == names_.end()) throw DataError("unknown column role '" + std::string(role) + "'");
  return it->second;
}

void ColumnMap::set(std::string_view role, std::string column) {
  const auto it = names_.find(role);
  if (it == names_.end()) throw DataError("unknown column role '" + std::string(role) + "'");
  it->second = std::move(column);
}

ColumnMap ColumnMap::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open column map: " + path.string());
  ColumnMap map;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = csv::trim(line);
    if (text.empty() || text.front() == '#') continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw ParseError(path.string(), line_no, "expected role=column");
    try {
      map.set(csv::trim(text.substr(0, eq)), csv::trim(text.substr(eq + 1)));
    } catch (const DataError& e) {
      throw ParseError(path.string(), line_no, e.what());
    }
  }
  return map;
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

bool is_missing(std::string_view field) {
  const auto lower = csv::to_lower(field);
  return lower.empty() || lower == "na" || lower == "nan" || lower == "null";
}

std::string normalize_antigen(std::string_view antigen) {
  auto code = csv::to_upper(csv::trim(antigen));
  if (code == "DTPCV1") return "DTP1";
  if (code == "DTPCV2") return "DTP2";
  if (code == "DTPCV3") return "DTP3";
  return code;
}

class RowReader {
 public:
  RowReader(const csv::Table& table, const ColumnMap& columns, std::string source)
      : table_(table), columns_(columns), source_(std::move(source)) {}

  std::optional<std::size_t> index(std::string_view role) const {
    return table_.column(columns_.name(role));
  }

  std::size_t require(std::string_view role) const {
    if (auto idx = index(role)) return *idx;
    throw ParseError(source_, 1, "missing required column '" + columns_.name(role) + "'");
  }

  const std::string& source() const { return source_; }

 private:
  const csv::Table& table_;
  const ColumnMap& columns_;
  std::string source_;
};

struct CommonColumns {
  std::size_t country, region, year, antigen, coverage;
};

// Parses the fields shared by all sources. Returns nullopt (after recording the
// drop) for rows that are dropped by the missing-value rules.
std::optional<CoverageRecord> parse_common(const std::vector<std::string>& row, std::size_t line,
                                           const CommonColumns& cols, const std::string& source,
                                           std::vector<DroppedRow>& dropped) {
  CoverageRecord rec;
  rec.line = line;
  rec.country = csv::to_upper(row[cols.country]);
  if (rec.country.empty()) throw ParseError(source, line, "empty country code");

  const auto year = csv::to_int(row[cols.year]);
  if (!year || *year < 1000 || *year > 9999) {
    throw ParseError(source, line, "bad year '" + row[cols.year] + "'");
  }
  rec.year = *year;
  rec.vaccine = normalize_antigen(row[cols.antigen]);
  if (rec.vaccine.empty()) throw ParseError(source, line, "empty antigen");

  if (is_missing(row[cols.region])) {
    dropped.push_back({line, DropReason::MissingRegion, ""});
    return std::nullopt;
  }
  const auto region = normalize_region(row[cols.region]);
  if (!region) throw ParseError(source, line, "unknown region code '" + row[cols.region] + "'");
  rec.region = *region;

  if (is_missing(row[cols.coverage])) {
    dropped.push_back({line, DropReason::MissingCoverage, ""});
    return std::nullopt;
  }
  const auto coverage = csv::to_double(row[cols.coverage]);
  if (!coverage || !std::isfinite(*coverage) || *coverage < 0.0) {
    throw ParseError(source, line, "non-numeric coverage '" + row[cols.coverage] + "'");
  }
  rec.coverage_pct = *coverage;
  return rec;
}

}  // namespace

ParsedFile parse_coverage_csv(const std::filesystem::path& path, SourceKind kind,
                              const ColumnMap& columns) {
  if (kind == SourceKind::Survey) {
    throw DataError("parse_coverage_csv handles admin or official data; use parse_survey_csv");
  }
  const auto table = csv::read_file(path);
  RowReader reader(table, columns, path.string());
  const CommonColumns cols{reader.require("country"), reader.require("region"),
                           reader.require("year"), reader.require("antigen"),
                           reader.require("coverage")};
  const auto category_col = reader.index("coverage_category");

  ParsedFile out;
  out.rows = table.rows.size();
  std::vector<CoverageRecord> records;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const auto line = table.line_numbers[r];
    if (category_col) {
      const auto category = csv::to_lower(row[*category_col]);
      if (category == "admin" || category == "administrative" || category == "official") {
        if (parse_source_kind(category) != kind) {
          out.dropped.push_back({line, DropReason::OtherCategory, category});
          continue;
        }
      } else {
        out.dropped.push_back({line, DropReason::UnsupportedCategory, category});
        continue;
      }
    }
    auto rec = parse_common(row, line, cols, reader.source(), out.dropped);
    if (!rec) continue;
    rec->source = kind;
    records.push_back(std::move(*rec));
  }
  out.data = ICDataset(std::move(records));
  return out;
}

ParsedFile parse_survey_csv(const std::filesystem::path& path, const ColumnMap& columns) {
  const auto table = csv::read_file(path);
  RowReader reader(table, columns, path.string());
  const CommonColumns cols{reader.require("country"), reader.require("region"),
                           reader.require("year"), reader.require("antigen"),
                           reader.require("coverage")};
  const auto n_col = reader.require("sample_size");
  const auto evidence_col = reader.require("evidence");
  const auto validity_col = reader.require("validity");
  const auto survey_col = reader.index("survey_id");

  ParsedFile out;
  out.rows = table.rows.size();
  std::vector<CoverageRecord> records;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const auto line = table.line_numbers[r];
    auto rec = parse_common(row, line, cols, reader.source(), out.dropped);
    if (!rec) continue;
    rec->source = SourceKind::Survey;

    if (!is_missing(row[n_col])) {
      const auto n = csv::to_int(row[n_col]);
      if (!n || *n <= 0) {
        throw ParseError(reader.source(), line, "bad sample size '" + row[n_col] + "'");
      }
      rec->sample_size = *n;
    }

    const auto evidence = csv::to_lower(row[evidence_col]);
    if (evidence == "card") {
      rec->evidence = Evidence::Card;
    } else if (evidence == "card or history") {
      rec->evidence = Evidence::CardOrHistory;
    } else {
      throw ParseError(reader.source(), line, "unknown evidence '" + row[evidence_col] + "'");
    }

    const auto validity = csv::to_lower(row[validity_col]);
    if (validity == "valid") {
      rec->validity = Validity::Valid;
    } else if (validity == "crude") {
      rec->validity = Validity::Crude;
    } else if (!is_missing(validity)) {
      throw ParseError(reader.source(), line, "unknown validity '" + row[validity_col] + "'");
    }
    if (survey_col) rec->survey_id = row[*survey_col];
    records.push_back(std::move(*rec));
  }
  out.data = ICDataset(std::move(records));
  return out;
}

ICDataset merge_and_filter(const std::vector<ICDataset>& sets,
                           const std::vector<std::string>& vaccines, YearRange years,
                           bool drop_zero) {
  const std::set<std::string, std::less<>> wanted(vaccines.begin(), vaccines.end());
  std::vector<CoverageRecord> records;
  std::set<ProvenanceFlag> flags;
  for (const auto& set : sets) {
    flags.insert(set.flags().begin(), set.flags().end());
    for (const auto& rec : set.records()) {
      if (!wanted.contains(rec.vaccine) || !years.contains(rec.year)) continue;
      if (drop_zero && rec.coverage_pct == 0.0) continue;
      records.push_back(rec);
    }
  }
  std::stable_sort(records.begin(), records.end(),
                   [](const CoverageRecord& a, const CoverageRecord& b) {
                     return key_of(a) < key_of(b);
                   });

  std::vector<std::string> duplicates;
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& prev = records[i - 1];
    const auto& cur = records[i];
    if (cur.source != SourceKind::Survey && key_of(prev) == key_of(cur)) {
      const auto text = describe(key_of(cur));
      if (duplicates.empty() || duplicates.back() != text) duplicates.push_back(text);
    }
  }
  if (!duplicates.empty()) {
    std::string msg = "duplicate admin/official records:";
    for (const auto& d : duplicates) msg += " " + d;
    throw DataError(msg);
  }
  return ICDataset(std::move(records), std::move(flags));
}

// ---------------------------------------------------------------------------
// Denominators and year of introduction

DenominatorTable::DenominatorTable(std::vector<DenominatorRow> rows) : rows_(std::move(rows)) {
  for (const auto& row : rows_) {
    if (!(row.target_population > 0.0)) {
      throw DataError("non-positive target population for " + row.country + "/" + row.vaccine +
                      "/" + std::to_string(row.year));
    }
    auto [it, inserted] =
        index_.emplace(std::make_tuple(row.country, row.vaccine, row.year), row.target_population);
    if (!inserted) {
      throw DataError("duplicate denominator row for " + row.country + "/" + row.vaccine + "/" +
                      std::to_string(row.year));
    }
  }
}

DenominatorTable DenominatorTable::from_csv(const std::filesystem::path& path) {
  const auto table = csv::read_file(path);
  const auto src = path.string();
  auto need = [&](const char* name) {
    if (auto c = table.column(name)) return *c;
    throw ParseError(src, 1, std::string("missing required column '") + name + "'");
  };
  const auto c_country = need("country");
  const auto c_vaccine = need("vaccine");
  const auto c_year = need("year");
  const auto c_pop = need("target_population");
  std::vector<DenominatorRow> rows;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const auto year = csv::to_int(row[c_year]);
    const auto pop = csv::to_double(row[c_pop]);
    if (!year) throw ParseError(src, table.line_numbers[r], "bad year '" + row[c_year] + "'");
    if (!pop) {
      throw ParseError(src, table.line_numbers[r], "bad target_population '" + row[c_pop] + "'");
    }
    rows.push_back({csv::to_upper(row[c_country]), normalize_antigen(row[c_vaccine]), *year, *pop});
  }
  return DenominatorTable(std::move(rows));
}

std::optional<double> DenominatorTable::population(std::string_view country,
                                                   std::string_view vaccine, int year) const {
  const auto it = index_.find(std::make_tuple(std::string(country), std::string(vaccine), year));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

YoviTable::YoviTable(std::vector<YoviRow> rows) : rows_(std::move(rows)) {
  for (const auto& row : rows_) {
    auto [it, inserted] = index_.emplace(std::make_pair(row.country, row.vaccine), row.intro_year);
    if (!inserted) throw DataError("duplicate yovi row for " + row.country + "/" + row.vaccine);
  }
}

YoviTable YoviTable::from_csv(const std::filesystem::path& path) {
  const auto table = csv::read_file(path);
  const auto src = path.string();
  auto need = [&](const char* name) {
    if (auto c = table.column(name)) return *c;
    throw ParseError(src, 1, std::string("missing required column '") + name + "'");
  };
  const auto c_country = need("country");
  const auto c_vaccine = need("vaccine");
  const auto c_year = need("intro_year");
  std::vector<YoviRow> rows;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const auto year = csv::to_int(row[c_year]);
    if (!year) throw ParseError(src, table.line_numbers[r], "bad intro_year '" + row[c_year] + "'");
    rows.push_back({csv::to_upper(row[c_country]), normalize_antigen(row[c_vaccine]), *year});
  }
  return YoviTable(std::move(rows));
}

std::optional<int> YoviTable::intro_year(std::string_view country, std::string_view vaccine) const {
  const auto it = index_.find(std::make_pair(std::string(country), std::string(vaccine)));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

// ---------------------------------------------------------------------------
// Analysis-ready dataset files

void write_dataset_csv(const ICDataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write file: " + path.string());
  out << "#provenance:";
  bool first = true;
  for (auto flag : data.flags()) {
    out << (first ? "" : ";") << to_string(flag);
    first = false;
  }
  out << "\n";
  out << "country,region,vaccine,year,source,coverage,sample_size,evidence,validity,survey_id,"
         "recall_adjusted\n";
  for (const auto& r : data.records()) {
    std::vector<std::string> fields{
        r.country,
        r.region,
        r.vaccine,
        std::to_string(r.year),
        std::string(to_string(r.source)),
        csv::format_double(r.coverage_pct),
        r.sample_size ? std::to_string(*r.sample_size) : "",
        r.evidence ? std::string(to_string(*r.evidence)) : "",
        r.validity ? std::string(to_string(*r.validity)) : "",
        r.survey_id,
        r.recall_adjusted ? "1" : "0"};
    out << csv::join(fields) << "\n";
  }
}

ICDataset read_dataset_csv(const std::filesystem::path& path) {
  const auto table = csv::read_file(path);
  const auto src = path.string();
  std::set<ProvenanceFlag> flags;
  for (const auto& comment : table.comments) {
    const std::string prefix = "provenance:";
    if (comment.rfind(prefix, 0) != 0) continue;
    std::stringstream ss(comment.substr(prefix.size()));
    std::string item;
    while (std::getline(ss, item, ';')) {
      if (auto flag = parse_provenance_flag(csv::trim(item))) flags.insert(*flag);
    }
  }
  auto need = [&](const char* name) {
    if (auto c = table.column(name)) return *c;
    throw ParseError(src, 1, std::string("missing required column '") + name + "'");
  };
  const auto c_country = need("country");
  const auto c_region = need("region");
  const auto c_vaccine = need("vaccine");
  const auto c_year = need("year");
  const auto c_source = need("source");
  const auto c_cov = need("coverage");
  const auto c_n = table.column("sample_size");
  const auto c_ev = table.column("evidence");
  const auto c_val = table.column("validity");
  const auto c_sid = table.column("survey_id");
  const auto c_adj = table.column("recall_adjusted");

  std::vector<CoverageRecord> records;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const auto line = table.line_numbers[r];
    CoverageRecord rec;
    rec.line = line;
    rec.country = row[c_country];
    rec.region = row[c_region];
    rec.vaccine = row[c_vaccine];
    const auto year = csv::to_int(row[c_year]);
    const auto cov = csv::to_double(row[c_cov]);
    if (!year) throw ParseError(src, line, "bad year '" + row[c_year] + "'");
    if (!cov) throw ParseError(src, line, "non-numeric coverage '" + row[c_cov] + "'");
    rec.year = *year;
    rec.coverage_pct = *cov;
    try {
      rec.source = parse_source_kind(row[c_source]);
    } catch (const DataError& e) {
      throw ParseError(src, line, e.what());
    }
    if (c_n && !row[*c_n].empty()) rec.sample_size = csv::to_int(row[*c_n]);
    if (c_ev && !row[*c_ev].empty()) {
      rec.evidence = csv::to_lower(row[*c_ev]) == "card" ? Evidence::Card : Evidence::CardOrHistory;
    }
    if (c_val && !row[*c_val].empty()) {
      rec.validity = csv::to_lower(row[*c_val]) == "valid" ? Validity::Valid : Validity::Crude;
    }
    if (c_sid) rec.survey_id = row[*c_sid];
    if (c_adj) rec.recall_adjusted = row[*c_adj] == "1";
    records.push_back(std::move(rec));
  }
  return ICDataset(std::move(records), std::move(flags));
}

}  // namespace vaxcov
