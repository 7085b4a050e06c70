#include <doctest.h>

#include <cmath>
#include <random>

#include "../oracles/density_oracle.hpp"
#include "../oracles/random_instance.hpp"
#include "vaxcov/errors.hpp"
#include "vaxcov/model.hpp"

using namespace vaxcov;

TEST_CASE("ar1_structure examples") {
  CHECK(ar1_structure(2, 0.0).isApprox(Eigen::MatrixXd::Identity(2, 2)));
  Eigen::MatrixXd expect(3, 3);
  expect << 1, -0.5, 0, -0.5, 1.25, -0.5, 0, -0.5, 1;
  CHECK((ar1_structure(3, 0.5) - expect).norm() == 0.0);
  CHECK(ar1_structure(1, 0.6)(0, 0) == doctest::Approx(0.64));
  CHECK_THROWS_AS(ar1_structure(3, 1.0), DomainError);
  CHECK_THROWS_AS(ar1_structure(0, 0.1), DomainError);
}

TEST_CASE("ar1 inverse is the stationary covariance") {
  const int T = 6;
  const double rho = 0.7;
  const Eigen::MatrixXd cov = ar1_structure(T, rho).inverse();
  for (int s = 0; s < T; ++s)
    for (int t = 0; t < T; ++t)
      CHECK(std::abs(cov(s, t) - std::pow(rho, std::abs(s - t)) / (1 - rho * rho)) < 1e-10);
}

TEST_CASE("ar1 log det matches dense Cholesky") {
  for (int T = 1; T <= 20; ++T) {
    for (double rho : {-0.9, -0.3, 0.0, 0.5, 0.95}) {
      const Eigen::LLT<Eigen::MatrixXd> llt(ar1_structure(T, rho));
      const double dense = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
      CHECK(std::abs(dense - ar1_log_det(T, rho)) < 1e-8);
    }
  }
}

TEST_CASE("interaction precision blocks and quadratic forms") {
  const ModelDims d{3, 2, 4};
  const auto phi = interaction_precision(InteractionKind::Phi, d, 0.4, 1.5);
  CHECK(phi.blocks() == 3);
  CHECK(phi.size() == 12);
  const auto omega = interaction_precision(InteractionKind::Omega, {2, 2, 3}, 0.4, 1.5);
  CHECK(omega.blocks() == 4);
  CHECK(omega.block_size() == 3);

  std::mt19937_64 rng(3);
  std::normal_distribution<double> z;
  Eigen::VectorXd x(12);
  for (auto& v : x) v = z(rng);
  Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(12, 12);
  for (int b = 0; b < 3; ++b) dense.block(b * 4, b * 4, 4, 4) = ar1_structure(4, 0.4) / 2.25;
  CHECK(std::abs(phi.quadratic(x) - x.dot(dense * x)) < 1e-10);
  CHECK((phi.multiply(x) - dense * x).norm() < 1e-12);
  CHECK(std::abs(phi.log_det() - std::log(dense.determinant())) < 1e-8);
}

TEST_CASE("shared_mean examples and linearity") {
  const ModelDims d{2, 2, 3};
  auto f = LatentField::zeros(d);
  f.lambda = 0.05;
  CHECK((shared_mean(f, d, ModelKind::BDSL).array() == 0.05).all());
  CHECK(shared_mean(f, d, ModelKind::IDML).isZero());
  f.lambda = 0.0;
  f.beta[0] = 1.0;
  const auto mu = shared_mean(f, d, ModelKind::IDML);
  for (int j = 0; j < 2; ++j)
    for (int t = 0; t < 3; ++t) {
      CHECK(mu[d.cell(0, j, t)] == 1.0);
      CHECK(mu[d.cell(1, j, t)] == 0.0);
    }

  std::mt19937_64 rng(9);
  const auto a = oracle::random_instance(ModelKind::BDSL, d, rng);
  const auto b = oracle::random_instance(ModelKind::BDSL, d, rng);
  const LatentLayout layout(ModelKind::BDSL, d);
  const auto combo = layout.unpack(2.0 * layout.pack(a.field) - 3.0 * layout.pack(b.field));
  const Eigen::VectorXd lhs = shared_mean(combo, d, ModelKind::BDSL);
  const Eigen::VectorXd rhs =
      2.0 * shared_mean(a.field, d, ModelKind::BDSL) - 3.0 * shared_mean(b.field, d, ModelKind::BDSL);
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("layout round trip and names") {
  const ModelDims d{2, 3, 4};
  std::mt19937_64 rng(1);
  for (auto kind : {ModelKind::BDSL, ModelKind::IDML}) {
    const auto inst = oracle::random_instance(kind, d, rng);
    const LatentLayout layout(kind, d);
    const auto x = layout.pack(inst.field);
    CHECK(x.size() == layout.size());
    CHECK(layout.pack(layout.unpack(x)) == x);
    const auto names = layout.names();
    CHECK(static_cast<int>(names.size()) == layout.size());
    CHECK(names[layout.omega(1, 2, 3)] == "omega[2,3,4]");
    CHECK(names[layout.phi(1, 0)] == "phi[2,1]");
  }
}

TEST_CASE("log_posterior single observation likelihood") {
  const ModelDims d{1, 1, 1};
  ObservationSet data(d, {{0, 0, 0, SourceKind::Admin, 0.0}});
  Hyperparams h;
  PriorConfig untruncated;
  untruncated.sigma3_upper.reset();
  const auto lp = log_posterior(ModelKind::IDML, LatentField::zeros(d), h, untruncated, data);
  CHECK(lp.likelihood == doctest::Approx(-0.9189385332046727).epsilon(1e-14));
  h.rho_gamma = 1.0;
  CHECK(log_posterior(ModelKind::IDML, LatentField::zeros(d), h, untruncated, data).total() ==
        -std::numeric_limits<double>::infinity());
  h.rho_gamma = 0.0;
  h.sigma_src[2] = 0.5;  // above the default truncation
  CHECK(std::isinf(log_posterior(ModelKind::IDML, LatentField::zeros(d), h, PriorConfig{}, data).total()));
}

TEST_CASE("log_posterior matches term-by-term oracle and is order invariant") {
  std::mt19937_64 rng(2024);
  const ModelDims d{2, 2, 3};
  for (auto kind : {ModelKind::BDSL, ModelKind::IDML}) {
    for (int rep = 0; rep < 10; ++rep) {
      const auto inst = oracle::random_instance(kind, d, rng);
      const PriorConfig priors;
      const double lib =
          log_posterior(kind, inst.field, inst.hyper, priors, inst.data, inst.missing_y).total();
      const double ref = oracle::log_posterior(kind, inst.field, inst.hyper, priors, inst.data, inst.missing_y);
      CHECK(std::abs(lib - ref) < 1e-10);

      auto obs = inst.data.observations();
      std::reverse(obs.begin(), obs.end());
      const ObservationSet reversed(d, obs);
      CHECK(std::abs(log_posterior(kind, inst.field, inst.hyper, priors, reversed, inst.missing_y).total() -
                     lib) < 1e-9);
    }
  }
}

TEST_CASE("half-Cauchy density integrates to one") {
  for (auto upper : {std::optional<double>{}, std::optional<double>{0.4}}) {
    const double hi = upper ? *upper : 2e4;
    const int n = 400000;
    double sum = 0.0;
    const double h = hi / n;
    for (int i = 0; i < n; ++i) sum += std::exp(half_cauchy_log_pdf((i + 0.5) * h, 0.2, upper)) * h;
    CHECK(sum == doctest::Approx(upper ? 1.0 : 1.0 - 2.0 / std::numbers::pi * std::atan(0.2 / hi)).epsilon(1e-5));
  }
}

TEST_CASE("prior config key-value round trip") {
  PriorConfig p;
  p.sigma_scale[2] = 0.3;
  p.sigma3_upper.reset();
  const auto back = PriorConfig::from_kv(p.to_kv());
  CHECK(back == p);
  CHECK(PriorConfig::from_kv({{"prior.sigma3.upper", "0.5"}}).sigma3_upper == 0.5);
  CHECK_THROWS_AS(PriorConfig::from_kv({{"prior.sigma9.scale", "1"}}), DomainError);
  CHECK_THROWS_AS(PriorConfig::from_kv({{"prior.sigma1.scale", "-1"}}), DomainError);
}

TEST_CASE("hyper ids and names") {
  CHECK(hyper_ids(ModelKind::BDSL).size() == 13);
  CHECK(hyper_ids(ModelKind::IDML).size() == 14);
  for (auto id : hyper_ids(ModelKind::IDML)) CHECK(parse_hyper_id(to_string(id)) == id);
  CHECK(parse_model_kind("IDML") == ModelKind::IDML);
  CHECK_THROWS_AS(parse_model_kind("probit"), DomainError);
}
