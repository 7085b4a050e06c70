#include <doctest.h>

#include "test_util.hpp"
#include "vaxcov/coverage_data.hpp"
#include "vaxcov/errors.hpp"

using namespace vaxcov;
using vaxcov::testing::TempDir;

namespace {

const char* kAdminHeader = "code,region,year,antigen,coverage_category,coverage\n";
const char* kSurveyHeader =
    "code,region,year,antigen,coverage,sample_size,evidence,validity,survey_id\n";

CoverageRecord rec(std::string country, std::string vaccine, int year, SourceKind source,
                   double pct) {
  CoverageRecord r;
  r.country = std::move(country);
  r.region = "AFR";
  r.vaccine = std::move(vaccine);
  r.year = year;
  r.source = source;
  r.coverage_pct = pct;
  return r;
}

}  // namespace

TEST_CASE("parse_coverage_csv: alias mapping and drops") {
  TempDir dir;
  const auto path = dir.write("admin.csv", std::string(kAdminHeader) +
                                               "NGA,AFR,2006,DTPCV1,admin,73.0\n"
                                               "NGA,AFR,2007,DTPCV1,admin,\n"
                                               "NGA,,2008,DTPCV1,admin,70\n"
                                               "NGA,AFR,2006,DTPCV1,official,80\n"
                                               "NGA,AFR,2006,DTPCV1,wuenic,80\n");
  const auto parsed = parse_coverage_csv(path, SourceKind::Admin);
  REQUIRE(parsed.data.size() == 1);
  const auto& r = parsed.data.records()[0];
  CHECK(r.country == "NGA");
  CHECK(r.vaccine == "DTP1");
  CHECK(r.year == 2006);
  CHECK(r.source == SourceKind::Admin);
  CHECK(r.coverage_pct == 73.0);
  CHECK(parsed.rows == 5);
  CHECK(parsed.dropped.size() + parsed.data.size() == parsed.rows);
  CHECK(parsed.dropped[0].reason == DropReason::MissingCoverage);
  CHECK(parsed.dropped[1].reason == DropReason::MissingRegion);
  CHECK(parsed.dropped[2].reason == DropReason::OtherCategory);
  CHECK(parsed.dropped[3].reason == DropReason::UnsupportedCategory);

  const auto official = parse_coverage_csv(path, SourceKind::Official);
  REQUIRE(official.data.size() == 1);
  CHECK(official.data.records()[0].coverage_pct == 80.0);
}

TEST_CASE("parse_coverage_csv: header only and errors") {
  TempDir dir;
  CHECK(parse_coverage_csv(dir.write("empty.csv", kAdminHeader), SourceKind::Admin).data.empty());

  auto bad = dir.write("bad.csv", std::string(kAdminHeader) + "NGA,AFR,2006,DTP1,admin,73\n"
                                                              "NGA,AFR,20x6,DTP1,admin,73\n");
  try {
    parse_coverage_csv(bad, SourceKind::Admin);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  auto cov = dir.write("cov.csv", std::string(kAdminHeader) + "NGA,AFR,2006,DTP1,admin,abc\n");
  CHECK_THROWS_AS(parse_coverage_csv(cov, SourceKind::Admin), ParseError);
  auto region = dir.write("reg.csv", std::string(kAdminHeader) + "NGA,XYZ,2006,DTP1,admin,7\n");
  CHECK_THROWS_AS(parse_coverage_csv(region, SourceKind::Admin), ParseError);
  CHECK_THROWS_AS(parse_coverage_csv(dir.path() / "missing.csv", SourceKind::Admin), IoError);
}

TEST_CASE("parse_coverage_csv: column map") {
  TempDir dir;
  const auto path = dir.write("x.csv", "iso,who,yr,vac,val\nKEN,AFRO,2010,MCV1,88\n");
  const auto map_path = dir.write("map.txt",
                                  "# role=column\ncountry=iso\nregion=who\nyear=yr\n"
                                  "antigen=vac\ncoverage=val\n");
  const auto parsed = parse_coverage_csv(path, SourceKind::Official, ColumnMap::from_file(map_path));
  REQUIRE(parsed.data.size() == 1);
  CHECK(parsed.data.records()[0].region == "AFR");
  CHECK(parsed.data.records()[0].source == SourceKind::Official);
}

TEST_CASE("parse_survey_csv: metadata mapping") {
  TempDir dir;
  const auto path = dir.write("s.csv", std::string(kSurveyHeader) +
                                           "GHA,AFR,2008,DTP3,71.5,4200,Card or History,valid,DHS\n"
                                           "GHA,AFR,2008,DTP3,60.0,4100,Card,crude,DHS\n"
                                           "GHA,AFR,2008,DTP3,61.0,,Card,,MICS\n");
  const auto parsed = parse_survey_csv(path);
  REQUIRE(parsed.data.size() == 3);
  const auto& r = parsed.data.records();
  CHECK(r[0].evidence == Evidence::CardOrHistory);
  CHECK(r[0].sample_size == 4200);
  CHECK(r[0].validity == Validity::Valid);
  CHECK(r[1].evidence == Evidence::Card);
  CHECK(r[1].validity == Validity::Crude);
  CHECK(!r[2].sample_size);
  CHECK(!r[2].validity);
  CHECK(r[2].survey_id == "MICS");

  auto bad = dir.write("b.csv", std::string(kSurveyHeader) + "GHA,AFR,2008,DTP3,71.5,10,Recall,,\n");
  CHECK_THROWS_AS(parse_survey_csv(bad), ParseError);
}

TEST_CASE("merge_and_filter: filters, sorts, rejects duplicates") {
  ICDataset a({rec("B", "DTP1", 2005, SourceKind::Official, 90), rec("A", "DTP1", 2020, SourceKind::Admin, 90),
               rec("A", "DTP1", 2004, SourceKind::Admin, 0.0)});
  ICDataset b({rec("A", "DTP1", 2004, SourceKind::Survey, 80), rec("A", "MCV1", 2004, SourceKind::Admin, 80),
               rec("A", "HEPB", 2004, SourceKind::Admin, 80)});
  const std::vector<std::string> vaccines{"DTP1", "MCV1"};
  const auto merged = merge_and_filter({a, b}, vaccines, {2000, 2019}, true);
  REQUIRE(merged.size() == 3);
  CHECK(merged.records()[0].source == SourceKind::Survey);
  CHECK(merged.records()[1].vaccine == "MCV1");
  CHECK(merged.records()[2].country == "B");
  CHECK(merge_and_filter({merged}, vaccines, {2000, 2019}, true) == merged);

  const auto keep_zero = merge_and_filter({a}, vaccines, {2000, 2019}, false);
  CHECK(keep_zero.size() == 2);

  ICDataset dup({rec("A", "DTP1", 2004, SourceKind::Admin, 80), rec("A", "DTP1", 2004, SourceKind::Admin, 81)});
  CHECK_THROWS_AS(merge_and_filter({dup}, vaccines, {2000, 2019}, true), DataError);
  ICDataset survey_dup({rec("A", "DTP1", 2004, SourceKind::Survey, 80),
                        rec("A", "DTP1", 2004, SourceKind::Survey, 81)});
  CHECK(merge_and_filter({survey_dup}, vaccines, {2000, 2019}, true).size() == 2);
}

TEST_CASE("ICDataset: flags only grow") {
  ICDataset d({}, {ProvenanceFlag::Clamped});
  const auto e = d.with_records({}, {ProvenanceFlag::RatioApplied});
  CHECK(e.has_flag(ProvenanceFlag::Clamped));
  CHECK(e.has_flag(ProvenanceFlag::RatioApplied));
}

TEST_CASE("dataset csv round trip") {
  TempDir dir;
  auto s = rec("GHA", "DTP3", 2008, SourceKind::Survey, 57.142857142857146);
  s.sample_size = 900;
  s.evidence = Evidence::CardOrHistory;
  s.validity = Validity::Valid;
  s.survey_id = "DHS, 2008";
  s.recall_adjusted = true;
  ICDataset d({rec("GHA", "DTP1", 2008, SourceKind::Admin, 99.9), s},
              {ProvenanceFlag::RecallAdjusted, ProvenanceFlag::RatioApplied});
  const auto path = dir.path() / "d.csv";
  write_dataset_csv(d, path);
  const auto back = read_dataset_csv(path);
  CHECK(back.flags() == d.flags());
  REQUIRE(back.size() == 2);
  CHECK(back.records()[1].coverage_pct == s.coverage_pct);
  CHECK(back.records()[1].survey_id == s.survey_id);
  CHECK(back.records()[1].recall_adjusted);
  CHECK(back.records()[1].evidence == Evidence::CardOrHistory);
}

TEST_CASE("denominator and yovi tables") {
  TempDir dir;
  const auto den = DenominatorTable::from_csv(
      dir.write("d.csv", "country,vaccine,year,target_population\nA,DTP1,2000,100\n"));
  CHECK(den.population("A", "DTP1", 2000) == 100.0);
  CHECK(!den.population("A", "DTP1", 2001));
  CHECK_THROWS(DenominatorTable::from_csv(
      dir.write("e.csv", "country,vaccine,year,target_population\nA,DTP1,2000,0\n")));
  CHECK_THROWS(DenominatorTable::from_csv(dir.write(
      "f.csv", "country,vaccine,year,target_population\nA,DTP1,2000,5\nA,DTP1,2000,6\n")));
  const auto yovi = YoviTable::from_csv(dir.write("y.csv", "country,vaccine,intro_year\nA,PCV3,2014\n"));
  CHECK(yovi.intro_year("A", "PCV3") == 2014);
  CHECK(!yovi.intro_year("A", "DTP1"));
}
