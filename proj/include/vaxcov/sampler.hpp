#pragma once

// MCMC for the BDSL and IDML posteriors. Each sweep draws the whole latent
// field from its Gaussian full conditional, slice-samples every
// hyperparameter, and for BDSL imputes the missing cells.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "vaxcov/model.hpp"

namespace vaxcov {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ChainConfig {
  int n_chains = 4;
  int iterations = 4000;  // per chain, including warmup
  int warmup = 2000;
  int thin = 1;
  std::uint64_t seed = 20240501;
  double init_jitter = 0.5;
  /// When set, hyperparameters are held at these values.
  std::optional<Hyperparams> fixed_hyper;
  bool parallel = true;
  bool store_imputed = true;  // BDSL only
  /// Every k-th sweep also slice-samples each hyperparameter with the latent
  /// field integrated out (one sparse factorisation per density evaluation);
  /// the other sweeps update them given the field. 0 disables the marginal
  /// sweeps, 1 uses them only.
  int marginal_every = 10;

  /// Throws DomainError unless 0 <= warmup < iterations, n_chains >= 1,
  /// thin >= 1, init_jitter >= 0 and marginal_every >= 0.
  void validate() const;
  int retained_per_chain() const { return (iterations - warmup + thin - 1) / thin; }
};

/// Retained draws of one chain, one row per draw.
struct ChainDraws {
  std::vector<Hyperparams> hyper;
  std::vector<int> iteration;  // 1-based sweep number of each draw
  RowMatrix field;             // packed by LatentLayout
  RowMatrix imputed;           // BDSL: one column per data.missing_cells() entry
};

struct Draws {
  ModelKind kind = ModelKind::IDML;
  ModelDims dims;
  std::vector<ChainDraws> chains;

  LatentLayout layout() const { return {kind, dims}; }
  std::size_t per_chain() const { return chains.empty() ? 0 : chains.front().hyper.size(); }
  std::size_t total() const;
  /// mu at every cell for draw d of chain c.
  Eigen::VectorXd mu(std::size_t c, std::size_t d) const;
};

/// Gaussian full conditional of the packed latent field. The precision is
/// assembled as a sum of fixed sparse pieces scaled by functions of the
/// hyperparameters, so its sparsity pattern is analysed only once.
class FieldSampler {
 public:
  FieldSampler(ModelKind kind, const ObservationSet& data, const PriorConfig& priors);

  const LatentLayout& layout() const noexcept { return layout_; }

  /// Refactorises for `hyper`. Throws NumericError if the precision is not
  /// positive definite.
  void set_hyper(const Hyperparams& hyper);
  /// Conditional mean Q^{-1} b at the current hyperparameters.
  Eigen::VectorXd mean() const;
  /// Draws mean + P^T L^{-T} z with z standard normal.
  Eigen::VectorXd draw(std::mt19937_64& rng) const;
  /// Applies P^T L^{-T} to z; exposed so tests can check M M^T = Q^{-1}.
  Eigen::VectorXd apply_root(const Eigen::VectorXd& z) const;

  /// log p(y | hyper) with the latent field integrated out, up to a constant
  /// that does not depend on the hyperparameters. Refactorises; returns
  /// -infinity when the precision is numerically singular.
  double log_marginal(const Hyperparams& hyper);

  const Eigen::SparseMatrix<double>& precision() const noexcept { return q_; }
  const Eigen::VectorXd& rhs() const noexcept { return b_; }

  /// Packed-field indices that sum to the fitted value of observation n.
  std::span<const int> design_row(std::size_t n) const;
  int design_width() const noexcept { return width_; }

 private:
  struct Piece {
    std::vector<std::pair<int, double>> entries;  // (index into q_ values, value)
    std::function<double(const Hyperparams&)> coef;
  };

  ModelKind kind_;
  LatentLayout layout_;
  int width_ = 0;
  std::vector<int> design_;  // width_ indices per observation
  std::array<Eigen::VectorXd, 3> aty_;
  std::array<double, 3> yty_{};
  std::array<int, 3> count_{};
  std::vector<Piece> pieces_;
  Eigen::SparseMatrix<double> q_;
  Eigen::VectorXd b_;
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::AMDOrdering<int>> llt_;
};

/// Univariate stepping-out slice sampler (Neal 2003) on [lo, hi].
class SliceSampler {
 public:
  explicit SliceSampler(double width = 1.0, int max_steps = 32) : width_(width), max_steps_(max_steps) {}

  double step(double x0, const std::function<double(double)>& log_density, double lo, double hi,
              std::mt19937_64& rng) const;
  /// As above with the density at x0 already known; the density at the
  /// returned point is stored in `f1`.
  double step(double x0, double f0, const std::function<double(double)>& log_density, double lo, double hi,
              std::mt19937_64& rng, double& f1) const;
  double width() const noexcept { return width_; }
  /// Moves the width towards a multiple of the observed jump size.
  void adapt(double jump);

 private:
  double width_;
  int max_steps_;
  int adapted_ = 0;
  double mean_jump_ = 0.0;
};

struct ChainStart {
  LatentField field;
  Hyperparams hyper;
};

/// Deterministic start for (seed, chain): zeros, unit scales, sigma_3 at
/// min(1, upper/2), rho 0, then uniform jitter of size init_jitter.
ChainStart initialize(ModelKind kind, const ModelDims& dims, const PriorConfig& priors,
                      const ChainConfig& config, int chain);

/// Runs all chains. Throws NumericError naming the offending block if the
/// starting log posterior is not finite.
Draws run_chains(ModelKind kind, const ObservationSet& data, const PriorConfig& priors,
                 const ChainConfig& config);

/// Wide CSV: chain,iteration,<hyperparameters>,<packed field>.
void write_draws_csv(const Draws& draws, const std::filesystem::path& path);
Draws read_draws_csv(const std::filesystem::path& path, ModelKind kind, const ModelDims& dims);

/// Imputed BDSL cells: chain,iteration,<k:i,j,t>... one column per missing cell.
void write_imputed_csv(const Draws& draws, const ObservationSet& data, const std::filesystem::path& path);

}  // namespace vaxcov
