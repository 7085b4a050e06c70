#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "test_util.hpp"
#include "vaxcov/errors.hpp"
#include "vaxcov/preprocess.hpp"
#include "vaxcov/simulate.hpp"

using namespace vaxcov;

TEST_CASE("scenario variances") {
  const auto s1 = ScenarioSpec::standard(1);
  CHECK(s1.truth.sigma_src[0] * s1.truth.sigma_src[0] == doctest::Approx(1.0));
  CHECK(s1.truth.sigma_src[1] * s1.truth.sigma_src[1] == doctest::Approx(0.64));
  CHECK(s1.truth.sigma_src[2] * s1.truth.sigma_src[2] == doctest::Approx(0.16));
  CHECK(s1.truth.sigma_nu * s1.truth.sigma_nu == doctest::Approx(0.6));
  const auto s2 = ScenarioSpec::parse("S2");
  CHECK(s2.truth.sigma_src[0] == doctest::Approx(3.0));
  CHECK(s2.truth.sigma_nu == doctest::Approx(2.0));
  const auto s3 = ScenarioSpec::parse("3");
  CHECK(s3.truth.sigma_nu * s3.truth.sigma_nu == doctest::Approx(0.1));
  CHECK(s1.truth.sigma == 1.0);
  CHECK(s1.truth.rho_omega == 0.7);
  CHECK(s1.truth.sigma_phi * s1.truth.sigma_phi == doctest::Approx(0.25));
  CHECK(s1.lambda == 0.05);
  CHECK_THROWS_AS(ScenarioSpec::standard(4), DomainError);
  CHECK_THROWS_AS(ScenarioSpec::parse("five"), DomainError);

  auto bad = s1;
  bad.missing_rate[2] = 1.5;
  CHECK_THROWS_AS(bad.validate(), DomainError);
  bad = s1;
  bad.truth.sigma_src[1] = 0.0;
  CHECK_THROWS_AS(bad.validate(), DomainError);
}

TEST_CASE("study-scale observation count") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto data = generate_synthetic(kStudyDims, ScenarioSpec::standard(1), seed);
    CHECK(data.idml.size() >= 3600);
    CHECK(data.idml.size() <= 4100);
    CHECK(data.bdsl.size() == data.idml.size());
    const double admin_official =
        static_cast<double>(data.idml.count(SourceKind::Admin) + data.idml.count(SourceKind::Official));
    CHECK(admin_official / static_cast<double>(data.idml.size()) == doctest::Approx(0.68).epsilon(0.03));
  }
}

TEST_CASE("no deletion and no late starts gives the full grid") {
  auto s = ScenarioSpec::standard(2);
  s.missing_rate = {0.0, 0.0, 0.0};
  s.late_starts = {1};
  const ModelDims d{5, 3, 7};
  const auto data = generate_synthetic(d, s, 4);
  CHECK(data.idml.size() == static_cast<std::size_t>(3 * d.cells()));
  CHECK(data.idml.missing_cells().empty());
}

TEST_CASE("late vaccines start at scaled years") {
  const auto data = generate_synthetic(kStudyDims, ScenarioSpec::standard(1), 9);
  for (int i = 0; i < 20; ++i) {
    for (int j = 0; j < 3; ++j) CHECK(data.start[i * 5 + j] == 0);
    for (int j = 3; j < 5; ++j) {
      const int s = data.start[i * 5 + j];
      CHECK((s == 9 || s == 14));
      for (auto k : kAllSources) CHECK(data.idml.observed_times(i, j, k).front() >= s);
    }
  }
  const auto desk = generate_synthetic(kDeskDims, ScenarioSpec::standard(1), 9);
  for (int i = 0; i < 8; ++i) {
    const int s = desk.start[i * 3 + 2];
    CHECK((s == 5 || s == 8));
  }
}

TEST_CASE("generator is deterministic and shares the mask") {
  const auto a = generate_synthetic(kDeskDims, ScenarioSpec::standard(3), 77);
  const auto b = generate_synthetic(kDeskDims, ScenarioSpec::standard(3), 77);
  const auto c = generate_synthetic(kDeskDims, ScenarioSpec::standard(3), 78);
  REQUIRE(a.idml.size() == b.idml.size());
  for (std::size_t n = 0; n < a.idml.size(); ++n) {
    CHECK(a.idml.observations()[n].y == b.idml.observations()[n].y);
    CHECK(a.bdsl.observations()[n].y == b.bdsl.observations()[n].y);
    const auto& x = a.idml.observations()[n];
    const auto& y = a.bdsl.observations()[n];
    CHECK((x.country == y.country && x.vaccine == y.vaccine && x.time == y.time && x.source == y.source));
  }
  CHECK(a.mu_idml != c.mu_idml);
  CHECK((a.mu_bdsl.array() - a.mu_idml.array() - 0.05).abs().maxCoeff() < 1e-12);
}

TEST_CASE("source noise variance matches the scenario") {
  auto s = ScenarioSpec::standard(2);
  s.missing_rate = {0.0, 0.0, 0.0};
  s.late_starts = {1};
  const auto data = generate_synthetic(kStudyDims, s, 5);
  std::array<double, 3> ss{}, n{};
  for (const auto& o : data.idml.observations()) {
    const int k = static_cast<int>(o.source);
    const double e = o.y - s.lambda_src[k] - data.mu_idml[kStudyDims.cell(o.country, o.vaccine, o.time)];
    ss[k] += e * e;
    n[k] += 1.0;
    CHECK(std::isfinite(o.y));
    const double p = inv_logit(o.y);
    CHECK((p > 0.0 && p < 1.0));
  }
  for (int k = 0; k < 3; ++k) CHECK(ss[k] / n[k] == doctest::Approx(s.truth.sigma_src[k] * s.truth.sigma_src[k]).epsilon(0.10));
}

TEST_CASE("truth table covers observed series") {
  const auto data = generate_synthetic(kDeskDims, ScenarioSpec::standard(1), 2);
  const auto truth = data.truth(ModelKind::IDML);
  std::size_t expect = 0;
  for (int s : data.start) expect += static_cast<std::size_t>(kDeskDims.times - s);
  CHECK(truth.size() == expect);
  const auto late = data.truth(ModelKind::BDSL, 10);
  for (const auto& [key, p] : late) {
    CHECK(std::get<2>(key) >= 11);
    CHECK((p > 0.0 && p < 100.0));
  }
}

TEST_CASE("experiment report shape") {
  ExperimentOptions opt;
  opt.dims = {3, 2, 6};
  opt.chains.n_chains = 2;
  opt.chains.iterations = 60;
  opt.chains.warmup = 30;
  opt.base_years = 4;
  const auto rep = run_experiment(ScenarioSpec::standard(1), opt);
  CHECK(rep.columns.size() == 6);
  for (auto kind : {ModelKind::BDSL, ModelKind::IDML}) {
    const auto* in = rep.find(kind, "in-sample");
    const auto* one = rep.find(kind, "one-step");
    const auto* two = rep.find(kind, "two-step");
    REQUIRE(in);
    REQUIRE(one);
    REQUIRE(two);
    CHECK(in->fits == 1);
    CHECK(one->fits == 2);
    CHECK(two->fits == 1);
    CHECK(in->metrics.n > 0);
    CHECK(one->metrics.n > 0);
    CHECK(two->metrics.n > 0);
  }
  testing::TempDir dir;
  rep.write_csv(dir.path() / "m.csv");
  const auto text = testing::slurp(dir.path() / "m.csv");
  CHECK(text.rfind("scenario,seed,model,horizon,metric,value\n", 0) == 0);
  CHECK(text.find("S1,1,idml,two-step,RMSE,") != std::string::npos);
  std::ostringstream out;
  rep.write_text(out);
  CHECK(out.str().find("idml one-step") != std::string::npos);
  CHECK(out.str().find("95% coverage") != std::string::npos);

  opt.forecast = ForecastMode::Once;
  const auto once = run_experiment(ScenarioSpec::standard(1), opt);
  CHECK(once.columns.size() == 4);
  REQUIRE(once.find(ModelKind::IDML, "forecast"));
  CHECK(once.find(ModelKind::IDML, "forecast")->fits == 1);
  CHECK_THROWS_AS(parse_forecast_mode("weekly"), DomainError);
}
