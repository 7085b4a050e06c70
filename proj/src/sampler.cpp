#include "vaxcov/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <thread>

#include "vaxcov/csv.hpp"
#include "vaxcov/errors.hpp"

namespace vaxcov {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
// Slice bounds on log(sigma) and atanh(rho).
constexpr double kLogScaleMin = -12.0;
constexpr double kLogScaleMax = 12.0;
constexpr double kAtanhMax = 7.0;

std::mt19937_64 make_rng(std::uint64_t seed, int chain, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(chain), stream};
  return std::mt19937_64(seq);
}

double uniform01(std::mt19937_64& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

// log(1 - tanh(w)^2) without cancellation.
double log_sech2(double w) {
  const double a = std::abs(w);
  return 2.0 * (std::log(2.0) - a - std::log1p(std::exp(-2.0 * a)));
}

using Triplets = std::vector<Eigen::Triplet<double>>;

void add_ar1_pattern(Triplets& e0, Triplets& e2, Triplets& e1, int start, int T) {
  for (int t = 0; t < T; ++t) {
    e0.emplace_back(start + t, start + t, 1.0);
    if (T == 1) e2.emplace_back(start, start, -1.0);
    if (t > 0 && t < T - 1) e2.emplace_back(start + t, start + t, 1.0);
    if (t + 1 < T) {
      e1.emplace_back(start + t, start + t + 1, -1.0);
      e1.emplace_back(start + t + 1, start + t, -1.0);
    }
  }
}

}  // namespace

void ChainConfig::validate() const {
  if (n_chains < 1) throw DomainError("n_chains must be at least 1");
  if (iterations < 1) throw DomainError("iterations must be at least 1");
  if (warmup < 0 || warmup >= iterations) throw DomainError("warmup must satisfy 0 <= warmup < iterations");
  if (thin < 1) throw DomainError("thin must be at least 1");
  if (!(init_jitter >= 0.0)) throw DomainError("init_jitter must be non-negative");
  if (marginal_every < 0) throw DomainError("marginal_every must be non-negative");
}

std::size_t Draws::total() const {
  std::size_t n = 0;
  for (const auto& c : chains) n += c.hyper.size();
  return n;
}

Eigen::VectorXd Draws::mu(std::size_t c, std::size_t d) const {
  const Eigen::VectorXd x = chains.at(c).field.row(static_cast<Eigen::Index>(d)).transpose();
  return shared_mean(layout(), x);
}

// ---------------------------------------------------------------------------
// FieldSampler

FieldSampler::FieldSampler(ModelKind kind, const ObservationSet& data, const PriorConfig& priors)
    : kind_(kind), layout_(kind, data.dims()) {
  priors.validate();
  const auto& d = data.dims();
  const int n = layout_.size();
  width_ = kind == ModelKind::BDSL ? 9 : 8;
  for (auto& a : aty_) a = Eigen::VectorXd::Zero(n);

  std::array<Triplets, 3> lik;
  design_.reserve(data.size() * width_);
  for (const auto& o : data.observations()) {
    const int k = static_cast<int>(o.source);
    yty_[k] += o.y * o.y;
    ++count_[k];
    const std::size_t first = design_.size();
    if (kind == ModelKind::BDSL) {
      design_.push_back(0);
      design_.push_back(1 + k);
    } else {
      design_.push_back(k);
    }
    for (int idx : {layout_.beta(o.country), layout_.alpha(o.vaccine), layout_.gamma(o.time),
                    layout_.phi(o.country, o.time), layout_.delta(o.vaccine, o.time),
                    layout_.psi(o.country, o.vaccine), layout_.omega(o.country, o.vaccine, o.time)}) {
      design_.push_back(idx);
    }
    for (std::size_t a = first; a < design_.size(); ++a) {
      aty_[k][design_[a]] += o.y;
      for (std::size_t b = first; b < design_.size(); ++b) lik[k].emplace_back(design_[a], design_[b], 1.0);
    }
  }

  std::vector<std::pair<Triplets, std::function<double(const Hyperparams&)>>> raw;
  for (int k = 0; k < 3; ++k) {
    if (kind == ModelKind::BDSL) {
      raw.emplace_back(std::move(lik[k]), [](const Hyperparams& h) { return 1.0 / (h.sigma * h.sigma); });
    } else {
      raw.emplace_back(std::move(lik[k]),
                       [k](const Hyperparams& h) { return 1.0 / (h.sigma_src[k] * h.sigma_src[k]); });
    }
  }
  auto diag = [](int start, int count) {
    Triplets t;
    for (int a = 0; a < count; ++a) t.emplace_back(start + a, start + a, 1.0);
    return t;
  };
  if (kind == ModelKind::BDSL) {
    const double inv = 1.0 / priors.bdsl_lambda_var;
    raw.emplace_back(diag(0, 1), [inv](const Hyperparams&) { return inv; });
    raw.emplace_back(diag(1, 3), [](const Hyperparams& h) { return 1.0 / (h.sigma_nu * h.sigma_nu); });
  } else {
    for (int k = 0; k < 3; ++k) {
      const double inv = 1.0 / priors.lambda_var[k];
      raw.emplace_back(diag(k, 1), [inv](const Hyperparams&) { return inv; });
    }
  }
  raw.emplace_back(diag(layout_.beta(0), d.countries),
                   [](const Hyperparams& h) { return 1.0 / (h.sigma_beta * h.sigma_beta); });
  raw.emplace_back(diag(layout_.alpha(0), d.vaccines),
                   [](const Hyperparams& h) { return 1.0 / (h.sigma_alpha * h.sigma_alpha); });
  raw.emplace_back(diag(layout_.psi(0, 0), d.countries * d.vaccines),
                   [](const Hyperparams& h) { return 1.0 / (h.sigma_psi * h.sigma_psi); });

  // AR(1) blocks: R = E0 + rho^2 E2 + rho E1, scaled by 1/sigma^2.
  auto ar_group = [&](std::vector<int> starts, double Hyperparams::*sigma, double Hyperparams::*rho) {
    Triplets e0, e2, e1;
    for (int s : starts) add_ar1_pattern(e0, e2, e1, s, d.times);
    raw.emplace_back(std::move(e0), [sigma](const Hyperparams& h) { return 1.0 / (h.*sigma * h.*sigma); });
    raw.emplace_back(std::move(e2), [sigma, rho](const Hyperparams& h) {
      return h.*rho * h.*rho / (h.*sigma * h.*sigma);
    });
    raw.emplace_back(std::move(e1),
                     [sigma, rho](const Hyperparams& h) { return h.*rho / (h.*sigma * h.*sigma); });
  };
  ar_group({layout_.gamma(0)}, &Hyperparams::sigma_gamma, &Hyperparams::rho_gamma);
  {
    std::vector<int> starts;
    for (int i = 0; i < d.countries; ++i) starts.push_back(layout_.phi(i, 0));
    ar_group(starts, &Hyperparams::sigma_phi, &Hyperparams::rho_phi);
  }
  {
    std::vector<int> starts;
    for (int j = 0; j < d.vaccines; ++j) starts.push_back(layout_.delta(j, 0));
    ar_group(starts, &Hyperparams::sigma_delta, &Hyperparams::rho_delta);
  }
  {
    std::vector<int> starts;
    for (int i = 0; i < d.countries; ++i)
      for (int j = 0; j < d.vaccines; ++j) starts.push_back(layout_.omega(i, j, 0));
    ar_group(starts, &Hyperparams::sigma_omega, &Hyperparams::rho_omega);
  }

  // Union pattern, then the position of every piece entry inside it.
  std::vector<Eigen::SparseMatrix<double>> mats;
  Triplets all;
  for (auto& [trips, coef] : raw) {
    Eigen::SparseMatrix<double> m(n, n);
    m.setFromTriplets(trips.begin(), trips.end());
    m.makeCompressed();
    for (int c = 0; c < m.outerSize(); ++c)
      for (Eigen::SparseMatrix<double>::InnerIterator it(m, c); it; ++it) all.emplace_back(it.row(), it.col(), 1.0);
    mats.push_back(std::move(m));
  }
  q_.resize(n, n);
  q_.setFromTriplets(all.begin(), all.end());
  q_.makeCompressed();
  const int* outer = q_.outerIndexPtr();
  const int* inner = q_.innerIndexPtr();
  for (std::size_t p = 0; p < mats.size(); ++p) {
    Piece piece;
    piece.coef = std::move(raw[p].second);
    const auto& m = mats[p];
    for (int c = 0; c < m.outerSize(); ++c) {
      for (Eigen::SparseMatrix<double>::InnerIterator it(m, c); it; ++it) {
        const int* pos = std::lower_bound(inner + outer[c], inner + outer[c + 1], static_cast<int>(it.row()));
        piece.entries.emplace_back(static_cast<int>(pos - inner), it.value());
      }
    }
    pieces_.push_back(std::move(piece));
  }
  llt_.analyzePattern(q_);
  b_ = Eigen::VectorXd::Zero(n);
}

void FieldSampler::set_hyper(const Hyperparams& hyper) {
  double* values = q_.valuePtr();
  std::fill(values, values + q_.nonZeros(), 0.0);
  for (const auto& piece : pieces_) {
    const double c = piece.coef(hyper);
    for (const auto& [idx, v] : piece.entries) values[idx] += c * v;
  }
  b_.setZero();
  for (int k = 0; k < 3; ++k) {
    const double s = kind_ == ModelKind::BDSL ? hyper.sigma : hyper.sigma_src[k];
    b_ += aty_[k] / (s * s);
  }
  llt_.factorize(q_);
  if (llt_.info() != Eigen::Success) throw NumericError("latent precision is not positive definite");
}

double FieldSampler::log_marginal(const Hyperparams& h) {
  try {
    set_hyper(h);
  } catch (const NumericError&) {
    return kNegInf;
  }
  const auto& d = layout_.dims();
  const double C = d.countries, V = d.vaccines, T = d.times;
  auto ar = [T](double blocks, double sigma, double rho) {
    return blocks * (std::log1p(-rho * rho) - 2.0 * T * std::log(sigma));
  };
  // log det of the prior precision, dropping fixed intercept terms.
  double prior = -2.0 * C * std::log(h.sigma_beta) - 2.0 * V * std::log(h.sigma_alpha) -
                 2.0 * C * V * std::log(h.sigma_psi) + ar(1.0, h.sigma_gamma, h.rho_gamma) +
                 ar(C, h.sigma_phi, h.rho_phi) + ar(V, h.sigma_delta, h.rho_delta) +
                 ar(C * V, h.sigma_omega, h.rho_omega);
  if (kind_ == ModelKind::BDSL) prior -= 6.0 * std::log(h.sigma_nu);
  double noise = 0.0;
  for (int k = 0; k < 3; ++k) {
    const double s = kind_ == ModelKind::BDSL ? h.sigma : h.sigma_src[k];
    noise -= count_[k] * std::log(s) + 0.5 * yty_[k] / (s * s);
  }
  Eigen::VectorXd w = llt_.permutationP() * b_;
  llt_.matrixL().solveInPlace(w);
  const Eigen::VectorXd diag = llt_.matrixL().nestedExpression().diagonal();
  const double log_det_post = 2.0 * diag.array().log().sum();
  const double value = 0.5 * prior - 0.5 * log_det_post + noise + 0.5 * w.squaredNorm();
  return std::isfinite(value) ? value : kNegInf;
}

Eigen::VectorXd FieldSampler::mean() const { return llt_.solve(b_); }

Eigen::VectorXd FieldSampler::apply_root(const Eigen::VectorXd& z) const {
  const Eigen::VectorXd w = llt_.matrixU().solve(z);
  return llt_.permutationPinv() * w;
}

Eigen::VectorXd FieldSampler::draw(std::mt19937_64& rng) const {
  std::normal_distribution<double> normal;
  // x = P^T L^{-T} (L^{-1} P b + z)
  Eigen::VectorXd w = llt_.permutationP() * b_;
  llt_.matrixL().solveInPlace(w);
  for (Eigen::Index a = 0; a < w.size(); ++a) w[a] += normal(rng);
  llt_.matrixU().solveInPlace(w);
  return llt_.permutationPinv() * w;
}

std::span<const int> FieldSampler::design_row(std::size_t n) const {
  return {design_.data() + n * width_, static_cast<std::size_t>(width_)};
}

// ---------------------------------------------------------------------------
// Slice sampling

double SliceSampler::step(double x0, const std::function<double(double)>& log_density, double lo, double hi,
                          std::mt19937_64& rng) const {
  double f1 = 0.0;
  return step(x0, log_density(x0), log_density, lo, hi, rng, f1);
}

double SliceSampler::step(double x0, double f0, const std::function<double(double)>& log_density, double lo,
                          double hi, std::mt19937_64& rng, double& f1) const {
  if (!std::isfinite(f0)) throw NumericError("slice sampler started outside the support");
  f1 = f0;
  const double level = f0 + std::log(uniform01(rng));  // f0 - Exp(1)
  double left = x0 - width_ * uniform01(rng);
  double right = left + width_;
  int j = static_cast<int>(std::floor(max_steps_ * uniform01(rng)));
  int k = max_steps_ - 1 - j;
  while (j > 0 && left > lo && log_density(left) > level) {
    left -= width_;
    --j;
  }
  while (k > 0 && right < hi && log_density(right) > level) {
    right += width_;
    --k;
  }
  left = std::max(left, lo);
  right = std::min(right, hi);
  for (int guard = 0; guard < 200; ++guard) {
    const double x1 = left + uniform01(rng) * (right - left);
    const double f = log_density(x1);
    if (f > level) {
      f1 = f;
      return x1;
    }
    if (x1 < x0) {
      left = x1;
    } else {
      right = x1;
    }
  }
  return x0;
}

void SliceSampler::adapt(double jump) {
  ++adapted_;
  mean_jump_ += (std::abs(jump) - mean_jump_) / adapted_;
  width_ = std::max(1e-4, 3.0 * mean_jump_);
}

// ---------------------------------------------------------------------------
// Chains

ChainStart initialize(ModelKind kind, const ModelDims& dims, const PriorConfig& priors,
                      const ChainConfig& config, int chain) {
  auto rng = make_rng(config.seed, chain, 0x1417u);
  const double j = config.init_jitter;
  auto jitter = [&]() { return j > 0.0 ? j * (2.0 * uniform01(rng) - 1.0) : 0.0; };

  ChainStart start;
  start.field = LatentField::zeros(dims);
  LatentLayout layout(kind, dims);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(layout.size());
  for (Eigen::Index a = 0; a < x.size(); ++a) x[a] = jitter();
  start.field = layout.unpack(x);

  if (config.fixed_hyper) {
    start.hyper = *config.fixed_hyper;
    return start;
  }
  Hyperparams h;
  if (kind == ModelKind::IDML && priors.sigma3_upper) h.sigma_src[2] = std::min(1.0, 0.5 * *priors.sigma3_upper);
  for (auto id : hyper_ids(kind)) {
    double& v = h.at(id);
    if (is_correlation(id)) {
      v = std::clamp(v + jitter(), -0.9, 0.9);
    } else {
      v *= std::exp(jitter());
    }
  }
  if (kind == ModelKind::IDML && priors.sigma3_upper) {
    h.sigma_src[2] = std::min(h.sigma_src[2], 0.95 * *priors.sigma3_upper);
  }
  start.hyper = h;
  return start;
}

namespace {

struct SweepStats {
  std::array<double, 3> rss{};
  std::array<int, 3> count{};
  double ss_beta = 0, ss_alpha = 0, ss_psi = 0, ss_nu = 0;
  Ar1Stats gamma, phi, delta, omega;
};

SweepStats sweep_stats(ModelKind kind, const ObservationSet& data, const FieldSampler& fs,
                       const Eigen::VectorXd& x) {
  const auto& layout = fs.layout();
  const auto& d = layout.dims();
  SweepStats s;
  const auto& obs = data.observations();
  for (std::size_t n = 0; n < obs.size(); ++n) {
    double fit = 0.0;
    for (int idx : fs.design_row(n)) fit += x[idx];
    const double r = obs[n].y - fit;
    const int k = kind == ModelKind::BDSL ? 0 : static_cast<int>(obs[n].source);
    s.rss[k] += r * r;
    ++s.count[k];
  }
  s.ss_beta = x.segment(layout.beta(0), d.countries).squaredNorm();
  s.ss_alpha = x.segment(layout.alpha(0), d.vaccines).squaredNorm();
  s.ss_psi = x.segment(layout.psi(0, 0), d.countries * d.vaccines).squaredNorm();
  if (kind == ModelKind::BDSL) s.ss_nu = x.segment(1, 3).squaredNorm();
  const auto T = static_cast<std::size_t>(d.times);
  s.gamma.add({x.data() + layout.gamma(0), T});
  for (int i = 0; i < d.countries; ++i) s.phi.add({x.data() + layout.phi(i, 0), T});
  for (int j = 0; j < d.vaccines; ++j) s.delta.add({x.data() + layout.delta(j, 0), T});
  for (int i = 0; i < d.countries; ++i)
    for (int j = 0; j < d.vaccines; ++j) s.omega.add({x.data() + layout.omega(i, j, 0), T});
  return s;
}

class ChainRunner {
 public:
  ChainRunner(ModelKind kind, const ObservationSet& data, const PriorConfig& priors, const ChainConfig& config,
              int chain)
      : kind_(kind), data_(data), priors_(priors), config_(config), chain_(chain),
        fs_(kind, data, priors), rng_(make_rng(config.seed, chain, 0x5eedu)) {
    for (auto id : hyper_ids(kind)) {
      slicers_.emplace(id, SliceSampler(1.0));
      marginal_slicers_.emplace(id, SliceSampler(1.0));
    }
    if (kind == ModelKind::BDSL) missing_ = data.missing_cells();
  }

  ChainDraws run() {
    const auto start = initialize(kind_, data_.dims(), priors_, config_, chain_);
    hyper_ = start.hyper;
    x_ = fs_.layout().pack(start.field);
    check_start(start);

    ChainDraws out;
    const int keep = config_.retained_per_chain();
    out.field.resize(keep, fs_.layout().size());
    const bool impute = kind_ == ModelKind::BDSL && config_.store_imputed;
    if (impute) out.imputed.resize(keep, static_cast<Eigen::Index>(missing_.size()));
    std::vector<double> ymis(missing_.size());
    int row = 0;
    const int every = config_.marginal_every;
    for (int it = 0; it < config_.iterations; ++it) {
      const bool marginal = !config_.fixed_hyper && every > 0 && it % every == 0;
      if (marginal) update_hyper_marginal(it < config_.warmup);
      fs_.set_hyper(hyper_);
      x_ = fs_.draw(rng_);
      if (!config_.fixed_hyper && !marginal) update_hyper(it < config_.warmup);
      const bool retain = it >= config_.warmup && (it - config_.warmup) % config_.thin == 0;
      if (kind_ == ModelKind::BDSL && (impute && retain)) impute_missing(ymis);
      if (retain) {
        out.hyper.push_back(hyper_);
        out.iteration.push_back(it + 1);
        out.field.row(row) = x_.transpose();
        if (impute) {
          for (std::size_t m = 0; m < ymis.size(); ++m) out.imputed(row, static_cast<Eigen::Index>(m)) = ymis[m];
        }
        ++row;
      }
    }
    return out;
  }

 private:
  void check_start(const ChainStart& start) {
    std::vector<double> ymis;
    if (kind_ == ModelKind::BDSL) {
      const Eigen::VectorXd mu = shared_mean(start.field, data_.dims(), kind_);
      for (const auto& m : missing_) {
        ymis.push_back(mu[data_.dims().cell(m.country, m.vaccine, m.time)] +
                       start.field.nu[static_cast<int>(m.source)]);
      }
    }
    const auto lp = log_posterior(kind_, start.field, start.hyper, priors_, data_, ymis);
    for (const auto& [name, value] : lp.terms) {
      if (!std::isfinite(value)) {
        throw NumericError("non-finite log posterior at initialization (chain " + std::to_string(chain_ + 1) +
                           ", block " + name + ")");
      }
    }
  }

  void impute_missing(std::vector<double>& ymis) {
    std::normal_distribution<double> normal;
    const Eigen::VectorXd mu = shared_mean(fs_.layout(), x_);
    const auto& d = data_.dims();
    for (std::size_t m = 0; m < missing_.size(); ++m) {
      const auto& c = missing_[m];
      ymis[m] = mu[d.cell(c.country, c.vaccine, c.time)] + x_[1 + static_cast<int>(c.source)] +
                hyper_.sigma * normal(rng_);
    }
  }

  void slice_scale(HyperId id, const std::function<double(double)>& log_density, bool warmup,
                   double upper = std::numeric_limits<double>::infinity()) {
    double& sigma = hyper_.at(id);
    auto g = [&](double u) {
      const double s = std::exp(u);
      if (s > upper) return kNegInf;
      return log_density(s) + u;
    };
    const double hi = std::min(kLogScaleMax, std::log(upper));
    const double u0 = std::log(sigma);
    auto& slicer = slicers_.at(id);
    const double u1 = slicer.step(u0, g, kLogScaleMin, hi, rng_);
    if (warmup) slicer.adapt(u1 - u0);
    sigma = std::exp(u1);
  }

  void slice_rho(HyperId id, const std::function<double(double)>& log_density, bool warmup) {
    double& rho = hyper_.at(id);
    auto g = [&](double w) { return log_density(std::tanh(w)) + log_sech2(w); };
    const double w0 = std::atanh(rho);
    auto& slicer = slicers_.at(id);
    const double w1 = slicer.step(w0, g, -kAtanhMax, kAtanhMax, rng_);
    if (warmup) slicer.adapt(w1 - w0);
    rho = std::tanh(w1);
  }

  void update_hyper(bool warmup) {
    const auto s = sweep_stats(kind_, data_, fs_, x_);
    const auto& d = data_.dims();
    auto gauss = [](int n, double ss) {
      return [n, ss](double sigma) { return -n * std::log(sigma) - 0.5 * ss / (sigma * sigma); };
    };
    if (kind_ == ModelKind::BDSL) {
      const double scale = priors_.bdsl_sigma_scale;
      const auto like = gauss(s.count[0], s.rss[0]);
      slice_scale(HyperId::Sigma, [&](double v) { return like(v) + half_cauchy_log_pdf(v, scale); }, warmup);
      const auto nu = gauss(3, s.ss_nu);
      const double nu_scale = priors_.bdsl_sigma_nu_scale;
      slice_scale(HyperId::SigmaNu, [&](double v) { return nu(v) + half_cauchy_log_pdf(v, nu_scale); }, warmup);
    } else {
      for (int k = 0; k < 3; ++k) {
        const auto like = gauss(s.count[k], s.rss[k]);
        const double scale = priors_.sigma_scale[k];
        const auto upper = k == 2 ? priors_.sigma3_upper : std::nullopt;
        slice_scale(static_cast<HyperId>(static_cast<int>(HyperId::Sigma1) + k),
                    [&](double v) { return like(v) + half_cauchy_log_pdf(v, scale, upper); }, warmup,
                    upper.value_or(std::numeric_limits<double>::infinity()));
      }
    }
    slice_scale(HyperId::SigmaBeta, gauss(d.countries, s.ss_beta), warmup);
    slice_scale(HyperId::SigmaAlpha, gauss(d.vaccines, s.ss_alpha), warmup);
    ar_pair(HyperId::SigmaGamma, HyperId::RhoGamma, s.gamma, warmup);
    ar_pair(HyperId::SigmaPhi, HyperId::RhoPhi, s.phi, warmup);
    ar_pair(HyperId::SigmaDelta, HyperId::RhoDelta, s.delta, warmup);
    slice_scale(HyperId::SigmaPsi, gauss(d.countries * d.vaccines, s.ss_psi), warmup);
    ar_pair(HyperId::SigmaOmega, HyperId::RhoOmega, s.omega, warmup);
  }

  double scale_prior(HyperId id, double v) const {
    switch (id) {
      case HyperId::Sigma: return half_cauchy_log_pdf(v, priors_.bdsl_sigma_scale);
      case HyperId::SigmaNu: return half_cauchy_log_pdf(v, priors_.bdsl_sigma_nu_scale);
      case HyperId::Sigma1: return half_cauchy_log_pdf(v, priors_.sigma_scale[0]);
      case HyperId::Sigma2: return half_cauchy_log_pdf(v, priors_.sigma_scale[1]);
      case HyperId::Sigma3: return half_cauchy_log_pdf(v, priors_.sigma_scale[2], priors_.sigma3_upper);
      default: return 0.0;
    }
  }

  // Each hyperparameter in turn from p(theta_i | theta_-i, y), the latent
  // field integrated out.
  void update_hyper_marginal(bool warmup) {
    double current = fs_.log_marginal(hyper_);
    if (!std::isfinite(current)) throw NumericError("marginal likelihood is not finite at the current state");
    for (auto id : hyper_ids(kind_)) {
      double& v = hyper_.at(id);
      auto& slicer = marginal_slicers_.at(id);
      double f1 = 0.0;
      if (is_correlation(id)) {
        auto g = [&](double w) {
          v = std::tanh(w);
          return fs_.log_marginal(hyper_) + log_sech2(w);
        };
        const double w0 = std::atanh(v);
        const double w1 = slicer.step(w0, current + log_sech2(w0), g, -kAtanhMax, kAtanhMax, rng_, f1);
        if (warmup) slicer.adapt(w1 - w0);
        v = std::tanh(w1);
        current = f1 - log_sech2(w1);
      } else {
        const double upper = id == HyperId::Sigma3 && priors_.sigma3_upper ? *priors_.sigma3_upper
                                                                           : std::numeric_limits<double>::infinity();
        auto g = [&](double u) {
          const double sig = std::exp(u);
          if (sig > upper) return kNegInf;
          v = sig;
          return fs_.log_marginal(hyper_) + scale_prior(id, sig) + u;
        };
        const double u0 = std::log(v);
        const double hi = std::min(kLogScaleMax, std::log(upper));
        const double u1 = slicer.step(u0, current + scale_prior(id, v) + u0, g, kLogScaleMin, hi, rng_, f1);
        if (warmup) slicer.adapt(u1 - u0);
        v = std::exp(u1);
        current = f1 - scale_prior(id, v) - u1;
      }
    }
  }

  void ar_pair(HyperId sigma_id, HyperId rho_id, const Ar1Stats& stats, bool warmup) {
    const double rho = hyper_.at(rho_id);
    slice_scale(sigma_id, [&](double v) { return stats.log_density(v, rho); }, warmup);
    const double sigma = hyper_.at(sigma_id);
    slice_rho(rho_id, [&](double r) { return stats.log_density(sigma, r); }, warmup);
  }

  ModelKind kind_;
  const ObservationSet& data_;
  const PriorConfig& priors_;
  const ChainConfig& config_;
  int chain_;
  FieldSampler fs_;
  std::mt19937_64 rng_;
  std::map<HyperId, SliceSampler> slicers_;
  std::map<HyperId, SliceSampler> marginal_slicers_;
  std::vector<Observation> missing_;
  Hyperparams hyper_;
  Eigen::VectorXd x_;
};

}  // namespace

Draws run_chains(ModelKind kind, const ObservationSet& data, const PriorConfig& priors,
                 const ChainConfig& config) {
  config.validate();
  priors.validate();
  if (config.fixed_hyper && !in_domain(*config.fixed_hyper, kind, priors)) {
    throw DomainError("fixed hyperparameters are outside the prior support");
  }
  Draws draws;
  draws.kind = kind;
  draws.dims = data.dims();
  draws.chains.resize(config.n_chains);
  std::vector<std::exception_ptr> errors(config.n_chains);
  auto work = [&](int c) {
    try {
      ChainRunner runner(kind, data, priors, config, c);
      draws.chains[c] = runner.run();
    } catch (...) {
      errors[c] = std::current_exception();
    }
  };
  if (config.parallel && config.n_chains > 1) {
    std::vector<std::thread> threads;
    for (int c = 0; c < config.n_chains; ++c) threads.emplace_back(work, c);
    for (auto& t : threads) t.join();
  } else {
    for (int c = 0; c < config.n_chains; ++c) work(c);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return draws;
}

// ---------------------------------------------------------------------------
// Draws IO

namespace {

std::vector<std::string> draws_header(ModelKind kind, const ModelDims& dims) {
  std::vector<std::string> header{"chain", "iteration"};
  for (auto id : hyper_ids(kind)) header.emplace_back(to_string(id));
  for (auto& n : LatentLayout(kind, dims).names()) header.push_back(std::move(n));
  return header;
}

}  // namespace

void write_draws_csv(const Draws& draws, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write file: " + path.string());
  out << csv::join(draws_header(draws.kind, draws.dims)) << '\n';
  const auto& ids = hyper_ids(draws.kind);
  std::string line;
  for (std::size_t c = 0; c < draws.chains.size(); ++c) {
    const auto& chain = draws.chains[c];
    for (std::size_t d = 0; d < chain.hyper.size(); ++d) {
      line = std::to_string(c + 1) + "," + std::to_string(chain.iteration[d]);
      for (auto id : ids) line += "," + csv::format_double(chain.hyper[d].at(id));
      for (Eigen::Index a = 0; a < chain.field.cols(); ++a) {
        line += ",";
        line += csv::format_double(chain.field(static_cast<Eigen::Index>(d), a));
      }
      out << line << '\n';
    }
  }
  if (!out) throw IoError("error writing file: " + path.string());
}

Draws read_draws_csv(const std::filesystem::path& path, ModelKind kind, const ModelDims& dims) {
  const auto table = csv::read_file(path);
  const auto expected = draws_header(kind, dims);
  if (table.header != expected) {
    throw ParseError(path.string(), 1, "draws header does not match the " + std::string(to_string(kind)) +
                                           " model with the recorded dimensions");
  }
  Draws draws;
  draws.kind = kind;
  draws.dims = dims;
  const auto& ids = hyper_ids(kind);
  const int n_field = LatentLayout(kind, dims).size();
  std::vector<std::vector<std::size_t>> rows_by_chain;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto chain = csv::to_int(table.rows[r][0]);
    if (!chain || *chain < 1) throw ParseError(path.string(), table.line_numbers[r], "bad chain number");
    if (static_cast<std::size_t>(*chain) > rows_by_chain.size()) rows_by_chain.resize(*chain);
    rows_by_chain[*chain - 1].push_back(r);
  }
  for (const auto& rows : rows_by_chain) {
    ChainDraws chain;
    chain.field.resize(static_cast<Eigen::Index>(rows.size()), n_field);
    for (std::size_t d = 0; d < rows.size(); ++d) {
      const auto& row = table.rows[rows[d]];
      const auto line = table.line_numbers[rows[d]];
      auto num = [&](std::size_t col) {
        const auto v = csv::to_double(row[col]);
        if (!v) throw ParseError(path.string(), line, "bad number in column " + table.header[col]);
        return *v;
      };
      const auto it = csv::to_int(row[1]);
      if (!it) throw ParseError(path.string(), line, "bad iteration");
      chain.iteration.push_back(*it);
      Hyperparams h;
      for (std::size_t p = 0; p < ids.size(); ++p) h.at(ids[p]) = num(2 + p);
      chain.hyper.push_back(h);
      for (int a = 0; a < n_field; ++a) chain.field(static_cast<Eigen::Index>(d), a) = num(2 + ids.size() + a);
    }
    draws.chains.push_back(std::move(chain));
  }
  return draws;
}

void write_imputed_csv(const Draws& draws, const ObservationSet& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write file: " + path.string());
  std::vector<std::string> header{"chain", "iteration"};
  for (const auto& m : data.missing_cells()) {
    header.push_back("y[" + std::string(to_string(m.source)) + ":" + std::to_string(m.country + 1) + "," +
                     std::to_string(m.vaccine + 1) + "," + std::to_string(m.time + 1) + "]");
  }
  out << csv::join(header) << '\n';
  for (std::size_t c = 0; c < draws.chains.size(); ++c) {
    const auto& chain = draws.chains[c];
    for (Eigen::Index d = 0; d < chain.imputed.rows(); ++d) {
      out << (c + 1) << ',' << chain.iteration[d];
      for (Eigen::Index a = 0; a < chain.imputed.cols(); ++a) out << ',' << csv::format_double(chain.imputed(d, a));
      out << '\n';
    }
  }
}

}  // namespace vaxcov
