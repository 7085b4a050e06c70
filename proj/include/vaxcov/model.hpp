#pragma once

// BDSL and IDML model definitions: latent field, hyperparameters, priors,
// AR(1) structure matrices and the joint log posterior.

#include <array>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "vaxcov/observations.hpp"

namespace vaxcov {

enum class ModelKind { BDSL, IDML };
std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view text);  // "bdsl" / "idml", any case

/// All random effects. omega is indexed by ModelDims::cell(i, j, t).
struct LatentField {
  double lambda = 0.0;                    // BDSL
  std::array<double, 3> lambda_src{};     // IDML, by SourceKind
  std::array<double, 3> nu{};             // BDSL, by SourceKind
  Eigen::VectorXd beta;                   // C
  Eigen::VectorXd alpha;                  // V
  Eigen::VectorXd gamma;                  // T
  Eigen::MatrixXd phi;                    // C x T
  Eigen::MatrixXd delta;                  // V x T
  Eigen::MatrixXd psi;                    // C x V
  Eigen::VectorXd omega;                  // C*V*T

  static LatentField zeros(const ModelDims& dims);
  bool matches(const ModelDims& dims) const;
};

enum class HyperId {
  Sigma,
  Sigma1,
  Sigma2,
  Sigma3,
  SigmaNu,
  SigmaBeta,
  SigmaAlpha,
  SigmaGamma,
  RhoGamma,
  SigmaPhi,
  RhoPhi,
  SigmaDelta,
  RhoDelta,
  SigmaPsi,
  SigmaOmega,
  RhoOmega,
};
std::string_view to_string(HyperId id);
std::optional<HyperId> parse_hyper_id(std::string_view name);
bool is_correlation(HyperId id);

/// Scales (standard deviations) and AR(1) coefficients.
struct Hyperparams {
  double sigma = 1.0;                         // BDSL residual
  std::array<double, 3> sigma_src{1.0, 1.0, 1.0};  // IDML sigma_1..3
  double sigma_nu = 1.0;
  double sigma_beta = 1.0;
  double sigma_alpha = 1.0;
  double sigma_gamma = 1.0;
  double rho_gamma = 0.0;
  double sigma_phi = 1.0;
  double rho_phi = 0.0;
  double sigma_delta = 1.0;
  double rho_delta = 0.0;
  double sigma_psi = 1.0;
  double sigma_omega = 1.0;
  double rho_omega = 0.0;

  double& at(HyperId id);
  double at(HyperId id) const;
  bool operator==(const Hyperparams&) const = default;
};

/// Hyperparameters that enter each model, in a fixed order.
const std::vector<HyperId>& hyper_ids(ModelKind kind);

struct PriorConfig {
  std::array<double, 3> lambda_var{0.25, 0.25, 0.25};  // IDML lambda^(k) ~ N(0, v_k)
  std::array<double, 3> sigma_scale{2.0, 2.0, 0.2};    // half-Cauchy scales of sigma_1..3
  std::optional<double> sigma3_upper = 0.4;            // truncation of sigma_3
  double bdsl_lambda_var = 1.0;                        // BDSL lambda ~ N(0, v)
  double bdsl_sigma_scale = 2.0;
  double bdsl_sigma_nu_scale = 2.0;

  /// Priors of the simulation study: sigma_3 gets the same untruncated
  /// Half-Cauchy(0, 2) as sigma_1 and sigma_2.
  static PriorConfig simulation_study();

  /// Throws DomainError on non-positive scales or bounds.
  void validate() const;

  /// Flat key=value form, e.g. prior.sigma3.scale=0.2, prior.sigma3.upper=none.
  std::map<std::string, std::string> to_kv() const;
  /// Applies recognised "prior.*" keys onto `base`; throws DomainError on
  /// unknown prior keys or bad values.
  static PriorConfig from_kv(const std::map<std::string, std::string>& kv, PriorConfig base);
  static PriorConfig from_kv(const std::map<std::string, std::string>& kv);

  bool operator==(const PriorConfig&) const = default;
};

/// Tridiagonal AR(1) structure matrix (T x T). T = 1 gives [1 - rho^2].
Eigen::MatrixXd ar1_structure(int T, double rho);
/// log det of ar1_structure(T, rho); equals log(1 - rho^2) for every T.
double ar1_log_det(int T, double rho);

/// Sufficient statistics of AR(1) blocks: x'R(rho)x = q0 + rho^2 q2 + rho q1,
/// summed over blocks.
struct Ar1Stats {
  double q0 = 0.0;
  double q1 = 0.0;
  double q2 = 0.0;
  int blocks = 0;
  int length = 0;

  void add(std::span<const double> x);
  double quadratic(double rho) const { return q0 + rho * rho * q2 + rho * q1; }
  /// Gaussian log density of all blocks under precision R(rho)/sigma^2.
  double log_density(double sigma, double rho) const;
};

enum class InteractionKind { Phi, Delta, Omega };

/// Block-diagonal precision I_n (x) R(T, rho) / sigma^2, held as one T x T
/// block. Vectors are laid out block by block.
class BlockPrecision {
 public:
  BlockPrecision(int blocks, int T, double rho, double sigma);

  int blocks() const noexcept { return blocks_; }
  int block_size() const noexcept { return static_cast<int>(block_.rows()); }
  int size() const noexcept { return blocks_ * block_size(); }
  const Eigen::MatrixXd& block() const noexcept { return block_; }
  double log_det() const;
  double quadratic(const Eigen::VectorXd& x) const;
  /// Each row of `m` is one block.
  double quadratic_rows(const Eigen::MatrixXd& m) const;
  Eigen::VectorXd multiply(const Eigen::VectorXd& x) const;

 private:
  int blocks_;
  double rho_;
  double sigma_;
  Eigen::MatrixXd block_;
};

BlockPrecision interaction_precision(InteractionKind kind, const ModelDims& dims, double rho,
                                     double sigma);

/// mu_ijt at every cell, laid out by ModelDims::cell. BDSL adds lambda.
Eigen::VectorXd shared_mean(const LatentField& field, const ModelDims& dims, ModelKind kind);

/// Flat packing of a LatentField used by the sampler and the draws files.
/// Order: intercepts (BDSL lambda, nu_a, nu_o, nu_s; IDML lambda_a, lambda_o,
/// lambda_s), beta, alpha, gamma, phi (by country), delta (by vaccine), psi
/// (by country then vaccine), omega (by cell).
class LatentLayout {
 public:
  LatentLayout() = default;
  LatentLayout(ModelKind kind, ModelDims dims);

  ModelKind kind() const noexcept { return kind_; }
  const ModelDims& dims() const noexcept { return dims_; }
  int size() const noexcept { return size_; }
  int intercepts() const noexcept { return kind_ == ModelKind::BDSL ? 4 : 3; }
  int beta(int i) const { return beta_ + i; }
  int alpha(int j) const { return alpha_ + j; }
  int gamma(int t) const { return gamma_ + t; }
  int phi(int i, int t) const { return phi_ + i * dims_.times + t; }
  int delta(int j, int t) const { return delta_ + j * dims_.times + t; }
  int psi(int i, int j) const { return psi_ + i * dims_.vaccines + j; }
  int omega(int i, int j, int t) const { return omega_ + dims_.cell(i, j, t); }

  Eigen::VectorXd pack(const LatentField& field) const;
  LatentField unpack(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  /// Column names such as "beta[2]" or "omega[1,2,3]" (1-based indices).
  std::vector<std::string> names() const;

 private:
  ModelKind kind_ = ModelKind::IDML;
  ModelDims dims_;
  int beta_ = 0, alpha_ = 0, gamma_ = 0, phi_ = 0, delta_ = 0, psi_ = 0, omega_ = 0, size_ = 0;
};

/// mu at every cell computed directly from a packed field.
Eigen::VectorXd shared_mean(const LatentLayout& layout, const Eigen::Ref<const Eigen::VectorXd>& x);

/// Log posterior split into its parts; `terms` names each contribution.
struct LogPosterior {
  double likelihood = 0.0;
  double latent = 0.0;
  double prior = 0.0;
  std::vector<std::pair<std::string, double>> terms;

  double total() const { return likelihood + latent + prior; }
};

/// Half-Cauchy(0, scale) log density, optionally truncated to [0, upper].
double half_cauchy_log_pdf(double x, double scale, std::optional<double> upper = std::nullopt);

/// True when every scale is positive, every rho inside (-1, 1) and sigma_3
/// respects the truncation bound (IDML).
bool in_domain(const Hyperparams& hyper, ModelKind kind, const PriorConfig& priors);

/// Unnormalised joint log density (normalising constants of every proper
/// density are included). For BDSL `missing_y` holds a value for each entry
/// of data.missing_cells(), in that order. Out-of-domain hyperparameters give
/// -infinity.
LogPosterior log_posterior(ModelKind kind, const LatentField& field, const Hyperparams& hyper,
                           const PriorConfig& priors, const ObservationSet& data,
                           std::span<const double> missing_y = {});

}  // namespace vaxcov
