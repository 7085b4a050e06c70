#include <doctest.h>

#include <cmath>
#include <random>

#include "vaxcov/diagnostics.hpp"
#include "vaxcov/errors.hpp"

using namespace vaxcov;

namespace {

Traces iid(int chains, int n, std::uint64_t seed, double shift = 0.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  Traces t(chains);
  for (int c = 0; c < chains; ++c)
    for (int k = 0; k < n; ++k) t[c].push_back(z(rng) + shift * c);
  return t;
}

}  // namespace

TEST_CASE("split R-hat of well-mixed chains is near one") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto r = split_rhat(iid(4, 2000, seed));
    REQUIRE(r);
    CHECK(*r >= 0.99);
    CHECK(*r <= 1.02);
  }
}

TEST_CASE("split R-hat detects separated chains") {
  Traces t(2);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z(0.0, 0.1);
  for (int k = 0; k < 500; ++k) {
    t[0].push_back(z(rng));
    t[1].push_back(10.0 + z(rng));
  }
  const auto r = split_rhat(t);
  REQUIRE(r);
  CHECK(*r > 2.0);
}

TEST_CASE("split R-hat of constant chains is undefined") {
  Traces t(3, std::vector<double>(50, 1.5));
  CHECK_FALSE(split_rhat(t).has_value());
  CHECK(std::isnan(effective_sample_size(t)));
}

TEST_CASE("split R-hat catches a trend within one chain") {
  Traces t(1);
  for (int k = 0; k < 400; ++k) t[0].push_back(k < 200 ? 0.01 * (k % 7) : 5.0 + 0.01 * (k % 5));
  const auto r = split_rhat(t);
  REQUIRE(r);
  CHECK(*r > 2.0);
}

TEST_CASE("effective sample size") {
  const auto t = iid(4, 1000, 9);
  CHECK(effective_sample_size(t) == doctest::Approx(4000).epsilon(0.15));
  CHECK(bulk_ess(t) == doctest::Approx(4000).epsilon(0.15));

  // AR(1) chains: ESS ~ N (1 - rho) / (1 + rho).
  const double rho = 0.8;
  std::mt19937_64 rng(10);
  std::normal_distribution<double> z;
  Traces ar(4);
  for (auto& c : ar) {
    double x = z(rng) / std::sqrt(1 - rho * rho);
    for (int k = 0; k < 5000; ++k) {
      x = rho * x + z(rng);
      c.push_back(x);
    }
  }
  CHECK(effective_sample_size(ar) == doctest::Approx(20000 * (1 - rho) / (1 + rho)).epsilon(0.25));
  const double sd = 1.0 / std::sqrt(1 - rho * rho);
  CHECK(mcse_mean(ar) == doctest::Approx(sd / std::sqrt(effective_sample_size(ar))).epsilon(0.05));
}

TEST_CASE("malformed traces are rejected") {
  CHECK_THROWS_AS(split_rhat(Traces{{1.0, 2.0, 3.0}}), DataError);
  CHECK_THROWS_AS(split_rhat(Traces{{1, 2, 3, 4}, {1, 2, 3, 4, 5}}), DataError);
  CHECK_THROWS_AS(split_rhat(Traces{}), DataError);
}
