#include <doctest.h>

#include <cmath>

#include "vaxcov/errors.hpp"
#include "vaxcov/preprocess.hpp"

using namespace vaxcov;

namespace {

CoverageRecord rec(std::string country, std::string vaccine, int year, SourceKind source, double pct) {
  CoverageRecord r;
  r.country = std::move(country);
  r.region = "AFR";
  r.vaccine = std::move(vaccine);
  r.year = year;
  r.source = source;
  r.coverage_pct = pct;
  return r;
}

CoverageRecord survey(std::string vaccine, double pct, Evidence ev, std::optional<int> n = std::nullopt,
                      std::optional<Validity> validity = std::nullopt) {
  auto r = rec("GHA", std::move(vaccine), 2010, SourceKind::Survey, pct);
  r.evidence = ev;
  r.sample_size = n;
  r.validity = validity;
  return r;
}

double find_pct(const ICDataset& d, std::string_view vaccine, Evidence ev) {
  for (const auto& r : d.records()) {
    if (r.vaccine == vaccine && r.evidence == ev) return r.coverage_pct;
  }
  return std::nan("");
}

}  // namespace

TEST_CASE("logit round trip") {
  CHECK(logit(0.5) == 0.0);
  CHECK(logit(0.999) == doctest::Approx(6.906754778648554).epsilon(1e-14));
  for (int k = 0; k <= 998; ++k) {
    const double p = 0.001 + k * 0.001;
    CHECK(std::abs(inv_logit(logit(p)) - p) < 1e-12);
  }
  CHECK(inv_logit(-800.0) >= 0.0);
  CHECK(inv_logit(800.0) == 1.0);
}

TEST_CASE("recall_bias_adjust: formula, identity ratio, missing inputs, idempotence") {
  const auto pairs = default_recall_pairs();
  ICDataset d({survey("DTP3", 50, Evidence::Card), survey("DTP1", 80, Evidence::CardOrHistory),
               survey("DTP1", 70, Evidence::Card), survey("DTP3", 65, Evidence::CardOrHistory)});
  ProcessingReport report;
  const auto once = recall_bias_adjust(d, pairs, &report);
  CHECK(find_pct(once, "DTP3", Evidence::CardOrHistory) == doctest::Approx(50.0 * 80.0 / 70.0).epsilon(1e-15));
  CHECK(once.has_flag(ProvenanceFlag::RecallAdjusted));
  CHECK(report.count("recall_bias", "adjusted") == 1);
  const auto twice = recall_bias_adjust(once, pairs);
  CHECK(twice == once);

  ICDataset same({survey("DTP3", 50, Evidence::Card), survey("DTP1", 70, Evidence::CardOrHistory),
                  survey("DTP1", 70, Evidence::Card), survey("DTP3", 65, Evidence::CardOrHistory)});
  CHECK(find_pct(recall_bias_adjust(same, pairs), "DTP3", Evidence::CardOrHistory) == 50.0);

  ICDataset missing({survey("DTP3", 50, Evidence::Card), survey("DTP3", 65, Evidence::CardOrHistory)});
  const auto kept = recall_bias_adjust(missing, pairs);
  CHECK(find_pct(kept, "DTP3", Evidence::CardOrHistory) == 65.0);
  CHECK(kept.has_flag(ProvenanceFlag::RecallAdjusted));

  ICDataset zero({survey("DTP3", 50, Evidence::Card), survey("DTP1", 80, Evidence::CardOrHistory),
                  survey("DTP1", 0, Evidence::Card), survey("DTP3", 65, Evidence::CardOrHistory)});
  ProcessingReport zr;
  CHECK(find_pct(recall_bias_adjust(zero, pairs, &zr), "DTP3", Evidence::CardOrHistory) == 65.0);
  CHECK(zr.count("recall_bias", "zero_card_dose1") == 1);
}

TEST_CASE("recall_bias_adjust: separate surveys do not mix") {
  auto a3 = survey("DTP3", 50, Evidence::Card);
  auto a1h = survey("DTP1", 80, Evidence::CardOrHistory);
  auto a1c = survey("DTP1", 70, Evidence::Card);
  auto b3 = survey("DTP3", 65, Evidence::CardOrHistory);
  for (auto* r : {&a3, &a1h, &a1c}) r->survey_id = "DHS";
  b3.survey_id = "MICS";
  const auto out = recall_bias_adjust(ICDataset({a3, a1h, a1c, b3}), default_recall_pairs());
  CHECK(find_pct(out, "DTP3", Evidence::CardOrHistory) == 65.0);
}

TEST_CASE("select_survey_estimates: cascade") {
  SUBCASE("small crude singleton dropped, valid singleton kept") {
    ICDataset d({survey("MCV1", 70, Evidence::Card, 250, Validity::Crude)});
    CHECK(select_survey_estimates(d).empty());
    ICDataset v({survey("MCV1", 70, Evidence::Card, 250, Validity::Valid)});
    CHECK(select_survey_estimates(v).size() == 1);
  }
  SUBCASE("card or history preferred over card") {
    ICDataset d({survey("MCV1", 70, Evidence::Card, 5000), survey("MCV1", 80, Evidence::CardOrHistory, 400)});
    const auto out = select_survey_estimates(d);
    REQUIRE(out.size() == 1);
    CHECK(out.records()[0].coverage_pct == 80);
  }
  SUBCASE("largest sample") {
    ICDataset d({survey("MCV1", 70, Evidence::CardOrHistory, 400),
                 survey("MCV1", 80, Evidence::CardOrHistory, 900)});
    const auto out = select_survey_estimates(d);
    REQUIRE(out.size() == 1);
    CHECK(out.records()[0].coverage_pct == 80);
  }
  SUBCASE("sizes missing: first valid, else first") {
    ICDataset d({survey("MCV1", 70, Evidence::CardOrHistory, std::nullopt, Validity::Crude),
                 survey("MCV1", 80, Evidence::CardOrHistory, std::nullopt, Validity::Valid),
                 survey("MCV1", 90, Evidence::CardOrHistory, std::nullopt, Validity::Valid)});
    CHECK(select_survey_estimates(d).records()[0].coverage_pct == 80);
  }
  SUBCASE("admin records untouched and keys unique") {
    ICDataset d({rec("GHA", "MCV1", 2010, SourceKind::Admin, 99),
                 survey("MCV1", 70, Evidence::CardOrHistory, 400), survey("MCV1", 75, Evidence::CardOrHistory, 500),
                 survey("DTP1", 75, Evidence::Card, 500)});
    const auto out = select_survey_estimates(d);
    CHECK(out.size() == 3);
  }
}

TEST_CASE("apply_dtp_ratio") {
  ICDataset d({rec("A", "DTP1", 2000, SourceKind::Admin, 104), rec("A", "DTP3", 2000, SourceKind::Admin, 101.92),
               rec("A", "DTP1", 2001, SourceKind::Admin, 90), rec("A", "DTP3", 2001, SourceKind::Admin, 45),
               rec("A", "DTP1", 2002, SourceKind::Admin, 80), rec("A", "DTP3", 2002, SourceKind::Admin, 80),
               rec("A", "DTP3", 2003, SourceKind::Admin, 70), rec("A", "DTP3", 2004, SourceKind::Admin, 90),
               rec("A", "DTP1", 2004, SourceKind::Admin, 80)});
  ProcessingReport report;
  const auto out = apply_dtp_ratio(d, &report);
  CHECK(out.has_flag(ProvenanceFlag::RatioApplied));
  auto value = [&](std::string_view v, int year) {
    for (const auto& r : out.records()) {
      if (r.vaccine == v && r.year == year) return r.coverage_pct;
    }
    return std::nan("");
  };
  CHECK(value("DTP1", 2000) == 99.9);
  CHECK(std::abs(value("DTP3_RATIO", 2000) - 98.0) < 1e-12);
  CHECK(value("DTP3_RATIO", 2001) == 50.0);
  CHECK(value("DTP3_RATIO", 2002) == 100.0);
  CHECK(std::isnan(value("DTP3_RATIO", 2003)));
  CHECK(value("DTP3_RATIO", 2004) == doctest::Approx(99.9));
  CHECK(report.count("dtp_ratio", "dtp3_without_dtp1") == 1);
  CHECK(report.count("dtp_ratio", "ratio_capped") == 1);
  CHECK(out.size() == 8);
}

TEST_CASE("clamp and logit") {
  ICDataset d({rec("B", "MCV1", 2001, SourceKind::Admin, 100.0), rec("A", "MCV1", 2000, SourceKind::Survey, 0.05),
               rec("A", "DTP1", 2002, SourceKind::Official, 50.0)});
  const auto clamped = clamp_coverage(d);
  CHECK(clamped.has_flag(ProvenanceFlag::Clamped));
  CHECK(clamped.records()[0].coverage_pct == 99.9);
  CHECK(clamped.records()[1].coverage_pct == 0.1);

  const auto data = clamp_and_logit(d);
  CHECK(data.maps.countries == std::vector<std::string>{"A", "B"});
  CHECK(data.maps.vaccines == std::vector<std::string>{"DTP1", "MCV1"});
  CHECK(data.maps.first_year == 2000);
  CHECK(data.observations.dims() == ModelDims{2, 2, 3});
  const auto& obs = data.observations.observations();
  CHECK(obs[0].y == doctest::Approx(6.906754778648554).epsilon(1e-14));
  CHECK(obs[0].country == 1);
  CHECK(obs[1].y == doctest::Approx(-6.906754778648554).epsilon(1e-14));
  CHECK(obs[2].y == 0.0);
  CHECK(obs[2].source == SourceKind::Official);

  LogitOptions options;
  options.vaccine_order = {"MCV1", "DTP1"};
  options.years = YearRange{1999, 2002};
  const auto ordered = clamp_and_logit(d, options);
  CHECK(ordered.maps.vaccines.front() == "MCV1");
  CHECK(ordered.observations.dims().times == 4);
  CHECK(ordered.observations.observations()[1].time == 1);
}

TEST_CASE("yovi_filter") {
  EstimateTable t;
  for (int y = 2000; y <= 2019; ++y) {
    t.rows.push_back({"A", "PCV3", y, 50, 40, 50, 60, false});
    t.rows.push_back({"A", "DTP1", y, 50, 40, 50, 60, false});
  }
  YoviTable yovi({{"A", "PCV3", 2014}, {"A", "MCV2", 1990}});
  ProcessingReport report;
  const auto out = yovi_filter(t, yovi, &report);
  CHECK(out.rows.size() == 6 + 20);
  CHECK(report.count("yovi", "no_intro_year") == 1);
}
