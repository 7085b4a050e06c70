#pragma once

#include <cmath>

#include <Eigen/Dense>

#include "vaxcov/model.hpp"

namespace vaxcov::oracle {

// Dense Gaussian posterior of the packed latent field with fixed
// hyperparameters: prior precision and design matrix built entry by entry.
struct DenseGaussian {
  Eigen::MatrixXd prior_precision;
  Eigen::MatrixXd design;  // observations x field
  Eigen::VectorXd noise_var;
  Eigen::VectorXd y;
  Eigen::MatrixXd post_precision;
  Eigen::VectorXd post_mean;
};

inline Eigen::MatrixXd dense_ar1(int T, double rho, double sigma) {
  Eigen::MatrixXd cov(T, T);
  for (int s = 0; s < T; ++s)
    for (int t = 0; t < T; ++t) cov(s, t) = sigma * sigma * std::pow(rho, std::abs(s - t)) / (1.0 - rho * rho);
  return cov.inverse();
}

inline DenseGaussian dense_gaussian(ModelKind kind, const ObservationSet& data, const Hyperparams& h,
                                    const PriorConfig& priors) {
  const LatentLayout L(kind, data.dims());
  const auto& d = data.dims();
  const int n = L.size();
  DenseGaussian g;
  Eigen::MatrixXd& P = g.prior_precision;
  P = Eigen::MatrixXd::Zero(n, n);
  if (kind == ModelKind::BDSL) {
    P(0, 0) = 1.0 / priors.bdsl_lambda_var;
    for (int k = 0; k < 3; ++k) P(1 + k, 1 + k) = 1.0 / (h.sigma_nu * h.sigma_nu);
  } else {
    for (int k = 0; k < 3; ++k) P(k, k) = 1.0 / priors.lambda_var[k];
  }
  for (int i = 0; i < d.countries; ++i) P(L.beta(i), L.beta(i)) = 1.0 / (h.sigma_beta * h.sigma_beta);
  for (int j = 0; j < d.vaccines; ++j) P(L.alpha(j), L.alpha(j)) = 1.0 / (h.sigma_alpha * h.sigma_alpha);
  for (int i = 0; i < d.countries; ++i)
    for (int j = 0; j < d.vaccines; ++j) P(L.psi(i, j), L.psi(i, j)) = 1.0 / (h.sigma_psi * h.sigma_psi);
  const int T = d.times;
  P.block(L.gamma(0), L.gamma(0), T, T) = dense_ar1(T, h.rho_gamma, h.sigma_gamma);
  for (int i = 0; i < d.countries; ++i) P.block(L.phi(i, 0), L.phi(i, 0), T, T) = dense_ar1(T, h.rho_phi, h.sigma_phi);
  for (int j = 0; j < d.vaccines; ++j)
    P.block(L.delta(j, 0), L.delta(j, 0), T, T) = dense_ar1(T, h.rho_delta, h.sigma_delta);
  for (int i = 0; i < d.countries; ++i)
    for (int j = 0; j < d.vaccines; ++j)
      P.block(L.omega(i, j, 0), L.omega(i, j, 0), T, T) = dense_ar1(T, h.rho_omega, h.sigma_omega);

  const auto& obs = data.observations();
  const auto m = static_cast<Eigen::Index>(obs.size());
  g.design = Eigen::MatrixXd::Zero(m, n);
  g.noise_var.resize(m);
  g.y.resize(m);
  for (Eigen::Index r = 0; r < m; ++r) {
    const auto& o = obs[static_cast<std::size_t>(r)];
    const int k = static_cast<int>(o.source);
    if (kind == ModelKind::BDSL) {
      g.design(r, 0) = 1.0;
      g.design(r, 1 + k) = 1.0;
      g.noise_var[r] = h.sigma * h.sigma;
    } else {
      g.design(r, k) = 1.0;
      g.noise_var[r] = h.sigma_src[k] * h.sigma_src[k];
    }
    g.design(r, L.beta(o.country)) = 1.0;
    g.design(r, L.alpha(o.vaccine)) = 1.0;
    g.design(r, L.gamma(o.time)) = 1.0;
    g.design(r, L.phi(o.country, o.time)) = 1.0;
    g.design(r, L.delta(o.vaccine, o.time)) = 1.0;
    g.design(r, L.psi(o.country, o.vaccine)) = 1.0;
    g.design(r, L.omega(o.country, o.vaccine, o.time)) = 1.0;
    g.y[r] = o.y;
  }
  const Eigen::VectorXd w = g.noise_var.cwiseInverse();
  g.post_precision = P + g.design.transpose() * w.asDiagonal() * g.design;
  g.post_mean = g.post_precision.ldlt().solve(g.design.transpose() * w.asDiagonal() * g.y);
  return g;
}

// Map from the packed field to mu at every cell.
inline Eigen::MatrixXd mu_map(ModelKind kind, const ModelDims& d) {
  const LatentLayout L(kind, d);
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(d.cells(), L.size());
  for (int i = 0; i < d.countries; ++i)
    for (int j = 0; j < d.vaccines; ++j)
      for (int t = 0; t < d.times; ++t) {
        const int c = d.cell(i, j, t);
        if (kind == ModelKind::BDSL) S(c, 0) = 1.0;
        for (int idx : {L.beta(i), L.alpha(j), L.gamma(t), L.phi(i, t), L.delta(j, t), L.psi(i, j), L.omega(i, j, t)})
          S(c, idx) = 1.0;
      }
  return S;
}

// log N(y; 0, A Q^{-1} A' + D), the field integrated out.
inline double log_marginal(const DenseGaussian& g) {
  const Eigen::MatrixXd cov = g.design * g.prior_precision.inverse() * g.design.transpose() +
                              Eigen::MatrixXd(g.noise_var.asDiagonal());
  const Eigen::LLT<Eigen::MatrixXd> llt(cov);
  const Eigen::MatrixXd Lm = llt.matrixL();
  double log_det = 0.0;
  for (Eigen::Index a = 0; a < Lm.rows(); ++a) log_det += 2.0 * std::log(Lm(a, a));
  const Eigen::VectorXd z = llt.matrixL().solve(g.y);
  return -0.5 * static_cast<double>(g.y.size()) * std::log(2.0 * M_PI) - 0.5 * log_det - 0.5 * z.squaredNorm();
}

}  // namespace vaxcov::oracle
