#include "vaxcov/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <tuple>

#include "vaxcov/errors.hpp"

namespace vaxcov {

double logit(double p) { return std::log(p) - std::log1p(-p); }

double inv_logit(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::size_t ProcessingReport::count(std::string_view step, std::string_view code) const {
  return static_cast<std::size_t>(std::count_if(entries_.begin(), entries_.end(), [&](const auto& e) {
    return e.step == step && e.code == code;
  }));
}

void ProcessingReport::write(std::ostream& out) const {
  out << "step\tcode\trecord\tbefore\tafter\n";
  for (const auto& e : entries_) {
    out << e.step << '\t' << e.code << '\t' << e.key << '\t';
    if (e.before) out << *e.before;
    out << '\t';
    if (e.after) out << *e.after;
    out << '\n';
  }
}

std::vector<DosePair> default_recall_pairs() { return {{"DTP3", "DTP1"}, {"PCV3", "PCV1"}}; }

namespace {

std::string describe_record(const CoverageRecord& r) {
  auto text = describe(key_of(r));
  if (r.line) text += " (line " + std::to_string(r.line) + ")";
  return text;
}

void note(ProcessingReport* report, ReportEntry entry) {
  if (report) report->add(std::move(entry));
}

// Index of the preferred record among `candidates`: first Valid, else first.
std::optional<std::size_t> preferred(const std::vector<CoverageRecord>& records,
                                     const std::vector<std::size_t>& candidates) {
  if (candidates.empty()) return std::nullopt;
  for (auto idx : candidates) {
    if (records[idx].validity == Validity::Valid) return idx;
  }
  return candidates.front();
}

}  // namespace

ICDataset recall_bias_adjust(const ICDataset& dataset, std::span<const DosePair> pairs,
                             ProcessingReport* report) {
  auto records = dataset.records();
  using GroupKey = std::tuple<std::string, int, std::string>;
  std::map<GroupKey, std::vector<std::size_t>> groups;
  for (std::size_t r = 0; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.source != SourceKind::Survey) continue;
    groups[{rec.country, rec.year, rec.survey_id}].push_back(r);
  }

  for (const auto& [gkey, members] : groups) {
    for (const auto& pair : pairs) {
      std::vector<std::size_t> card3, card1, history1, targets;
      for (auto idx : members) {
        const auto& rec = records[idx];
        if (!rec.evidence) continue;
        const bool card = *rec.evidence == Evidence::Card;
        if (rec.vaccine == pair.dose3) (card ? card3 : targets).push_back(idx);
        if (rec.vaccine == pair.dose1) (card ? card1 : history1).push_back(idx);
      }
      if (targets.empty()) continue;
      const auto c3 = preferred(records, card3);
      const auto c1 = preferred(records, card1);
      const auto h1 = preferred(records, history1);
      for (auto idx : targets) {
        auto& target = records[idx];
        if (!c3 || !c1 || !h1) {
          note(report, {"recall_bias", "inputs_missing", describe_record(target), target.coverage_pct,
                        std::nullopt});
          continue;
        }
        const double card1_value = records[*c1].coverage_pct;
        if (card1_value == 0.0) {
          note(report, {"recall_bias", "zero_card_dose1", describe_record(target),
                        target.coverage_pct, std::nullopt});
          continue;
        }
        const double adjusted = records[*c3].coverage_pct * records[*h1].coverage_pct / card1_value;
        note(report, {"recall_bias", "adjusted", describe_record(target), target.coverage_pct, adjusted});
        target.coverage_pct = adjusted;
        target.recall_adjusted = true;
      }
    }
  }
  return dataset.with_records(std::move(records), {ProvenanceFlag::RecallAdjusted});
}

ICDataset select_survey_estimates(const ICDataset& dataset, int min_n, ProcessingReport* report) {
  const auto& records = dataset.records();
  std::map<std::tuple<std::string, std::string, int>, std::vector<std::size_t>> groups;
  for (std::size_t r = 0; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.source == SourceKind::Survey) groups[{rec.country, rec.vaccine, rec.year}].push_back(r);
  }

  auto acceptable = [&](const CoverageRecord& rec) {
    return (rec.sample_size && *rec.sample_size > min_n) || rec.validity == Validity::Valid;
  };

  std::vector<char> keep(records.size(), 1);
  for (const auto& [key, members] : groups) {
    std::optional<std::size_t> chosen;
    if (members.size() == 1) {
      if (acceptable(records[members.front()])) chosen = members.front();
    } else {
      std::vector<std::size_t> cands;
      for (auto idx : members) {
        if (acceptable(records[idx])) cands.push_back(idx);
      }
      auto narrow = [&](auto pred) {
        std::vector<std::size_t> subset;
        std::copy_if(cands.begin(), cands.end(), std::back_inserter(subset),
                     [&](std::size_t idx) { return pred(records[idx]); });
        if (!subset.empty()) cands = std::move(subset);
      };
      narrow([](const CoverageRecord& r) { return r.evidence == Evidence::CardOrHistory; });
      narrow([](const CoverageRecord& r) { return r.recall_adjusted; });
      if (!cands.empty()) {
        std::optional<std::size_t> largest;
        for (auto idx : cands) {
          const auto& n = records[idx].sample_size;
          if (n && (!largest || *n > *records[*largest].sample_size)) largest = idx;
        }
        chosen = largest ? largest : preferred(records, cands);
      }
    }
    for (auto idx : members) {
      if (chosen && idx == *chosen) continue;
      keep[idx] = 0;
      const bool single = members.size() == 1;
      note(report, {"survey_selection", single ? "rejected_singleton" : "not_selected",
                    describe_record(records[idx]), records[idx].coverage_pct, std::nullopt});
    }
  }

  std::vector<CoverageRecord> out;
  for (std::size_t r = 0; r < records.size(); ++r) {
    if (keep[r]) out.push_back(records[r]);
  }
  return dataset.with_records(std::move(out));
}

ICDataset apply_dtp_ratio(const ICDataset& dataset, ProcessingReport* report) {
  const auto& records = dataset.records();
  std::map<std::tuple<std::string, int, SourceKind>, double> dtp1;
  for (const auto& rec : records) {
    if (rec.vaccine == "DTP1") dtp1[{rec.country, rec.year, rec.source}] = rec.coverage_pct;
  }

  std::vector<CoverageRecord> out;
  out.reserve(records.size());
  for (const auto& rec : records) {
    if (rec.vaccine == "DTP1") {
      auto copy = rec;
      if (copy.coverage_pct > 100.0) {
        note(report, {"dtp_ratio", "dtp1_capped", describe_record(rec), rec.coverage_pct, 99.9});
        copy.coverage_pct = 99.9;
      }
      out.push_back(std::move(copy));
      continue;
    }
    if (rec.vaccine != "DTP3") {
      out.push_back(rec);
      continue;
    }
    const auto it = dtp1.find({rec.country, rec.year, rec.source});
    if (it == dtp1.end() || it->second == 0.0) {
      note(report, {"dtp_ratio", "dtp3_without_dtp1", describe_record(rec), rec.coverage_pct,
                    std::nullopt});
      continue;
    }
    double ratio = rec.coverage_pct / it->second;
    if (ratio > 1.0) {
      note(report, {"dtp_ratio", "ratio_capped", describe_record(rec), ratio, kMaxProportion});
      ratio = kMaxProportion;
    }
    auto copy = rec;
    copy.vaccine = std::string(kDtpRatioCode);
    copy.coverage_pct = 100.0 * ratio;
    out.push_back(std::move(copy));
  }
  std::stable_sort(out.begin(), out.end(), [](const CoverageRecord& a, const CoverageRecord& b) {
    return key_of(a) < key_of(b);
  });
  return dataset.with_records(std::move(out), {ProvenanceFlag::RatioApplied});
}

ICDataset clamp_coverage(const ICDataset& dataset, ProcessingReport* report) {
  auto records = dataset.records();
  constexpr double lo = 100.0 * kMinProportion;
  constexpr double hi = 100.0 * kMaxProportion;
  for (auto& rec : records) {
    const double clamped = std::clamp(rec.coverage_pct, lo, hi);
    if (clamped != rec.coverage_pct) {
      note(report, {"clamp", rec.coverage_pct > hi ? "capped_high" : "raised_low", describe_record(rec),
                    rec.coverage_pct, clamped});
      rec.coverage_pct = clamped;
    }
  }
  return dataset.with_records(std::move(records), {ProvenanceFlag::Clamped});
}

LogitData clamp_and_logit(const ICDataset& dataset, const LogitOptions& options) {
  const auto& records = dataset.records();
  if (records.empty()) throw DataError("cannot build observations from an empty dataset");

  YearRange years{};
  if (options.years) {
    years = *options.years;
  } else {
    years.first = records.front().year;
    years.last = records.front().year;
    for (const auto& r : records) {
      years.first = std::min(years.first, r.year);
      years.last = std::max(years.last, r.year);
    }
  }
  if (years.last < years.first) throw DataError("empty year range");

  IndexMaps maps;
  maps.first_year = years.first;
  maps.n_years = years.last - years.first + 1;
  std::map<std::string, std::string> country_region;
  std::set<std::string> vaccines;
  for (const auto& r : records) {
    if (!years.contains(r.year)) continue;
    country_region.emplace(r.country, r.region);
    vaccines.insert(r.vaccine);
  }
  for (const auto& [country, region] : country_region) {
    maps.countries.push_back(country);
    maps.regions.push_back(region);
  }
  if (!options.vaccine_order.empty()) {
    for (const auto& v : options.vaccine_order) {
      if (vaccines.contains(v)) maps.vaccines.push_back(v);
    }
    for (const auto& v : vaccines) {
      if (std::find(maps.vaccines.begin(), maps.vaccines.end(), v) == maps.vaccines.end()) {
        maps.vaccines.push_back(v);
      }
    }
  } else {
    maps.vaccines.assign(vaccines.begin(), vaccines.end());
  }

  std::vector<Observation> obs;
  obs.reserve(records.size());
  for (const auto& r : records) {
    if (!years.contains(r.year)) continue;
    const double p = std::clamp(r.coverage_pct / 100.0, kMinProportion, kMaxProportion);
    obs.push_back({*maps.country_index(r.country), *maps.vaccine_index(r.vaccine),
                   r.year - years.first, r.source, logit(p)});
  }
  return {ObservationSet(maps.dims(), std::move(obs)), std::move(maps)};
}

EstimateTable yovi_filter(const EstimateTable& estimates, const YoviTable& yovi,
                          ProcessingReport* report) {
  EstimateTable out;
  std::set<std::pair<std::string, std::string>> noted;
  for (const auto& row : estimates.rows) {
    const auto intro = yovi.intro_year(row.unit, row.vaccine);
    if (!intro) {
      if (noted.emplace(row.unit, row.vaccine).second) {
        note(report, {"yovi", "no_intro_year", row.unit + "/" + row.vaccine, std::nullopt, std::nullopt});
      }
      out.rows.push_back(row);
      continue;
    }
    if (row.year < *intro) continue;
    out.rows.push_back(row);
  }
  return out;
}

}  // namespace vaxcov
