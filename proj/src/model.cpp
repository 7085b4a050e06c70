#include "vaxcov/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "vaxcov/csv.hpp"
#include "vaxcov/errors.hpp"

namespace vaxcov {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
const double kLogTwoPi = std::log(2.0 * std::numbers::pi);

double normal_log_pdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -0.5 * kLogTwoPi - std::log(sd) - 0.5 * z * z;
}

// n iid N(0, sigma^2) values with sum of squares ss.
double iid_log_density(int n, double ss, double sigma) {
  return -0.5 * n * kLogTwoPi - n * std::log(sigma) - 0.5 * ss / (sigma * sigma);
}

std::string format_index(std::initializer_list<int> idx) {
  std::string out = "[";
  bool first = true;
  for (int v : idx) {
    if (!first) out += ",";
    out += std::to_string(v + 1);
    first = false;
  }
  return out + "]";
}

}  // namespace

std::string_view to_string(ModelKind kind) { return kind == ModelKind::BDSL ? "bdsl" : "idml"; }

ModelKind parse_model_kind(std::string_view text) {
  const auto lower = csv::to_lower(text);
  if (lower == "bdsl") return ModelKind::BDSL;
  if (lower == "idml") return ModelKind::IDML;
  throw DomainError("unknown model '" + std::string(text) + "' (expected bdsl or idml)");
}

LatentField LatentField::zeros(const ModelDims& dims) {
  LatentField f;
  f.beta = Eigen::VectorXd::Zero(dims.countries);
  f.alpha = Eigen::VectorXd::Zero(dims.vaccines);
  f.gamma = Eigen::VectorXd::Zero(dims.times);
  f.phi = Eigen::MatrixXd::Zero(dims.countries, dims.times);
  f.delta = Eigen::MatrixXd::Zero(dims.vaccines, dims.times);
  f.psi = Eigen::MatrixXd::Zero(dims.countries, dims.vaccines);
  f.omega = Eigen::VectorXd::Zero(dims.cells());
  return f;
}

bool LatentField::matches(const ModelDims& dims) const {
  return beta.size() == dims.countries && alpha.size() == dims.vaccines &&
         gamma.size() == dims.times && phi.rows() == dims.countries && phi.cols() == dims.times &&
         delta.rows() == dims.vaccines && delta.cols() == dims.times &&
         psi.rows() == dims.countries && psi.cols() == dims.vaccines && omega.size() == dims.cells();
}

// ---------------------------------------------------------------------------
// Hyperparameters

namespace {
constexpr std::array<std::pair<HyperId, std::string_view>, 16> kHyperNames{{
    {HyperId::Sigma, "sigma"},
    {HyperId::Sigma1, "sigma1"},
    {HyperId::Sigma2, "sigma2"},
    {HyperId::Sigma3, "sigma3"},
    {HyperId::SigmaNu, "sigma_nu"},
    {HyperId::SigmaBeta, "sigma_beta"},
    {HyperId::SigmaAlpha, "sigma_alpha"},
    {HyperId::SigmaGamma, "sigma_gamma"},
    {HyperId::RhoGamma, "rho_gamma"},
    {HyperId::SigmaPhi, "sigma_phi"},
    {HyperId::RhoPhi, "rho_phi"},
    {HyperId::SigmaDelta, "sigma_delta"},
    {HyperId::RhoDelta, "rho_delta"},
    {HyperId::SigmaPsi, "sigma_psi"},
    {HyperId::SigmaOmega, "sigma_omega"},
    {HyperId::RhoOmega, "rho_omega"},
}};
}  // namespace

std::string_view to_string(HyperId id) {
  for (const auto& [key, name] : kHyperNames) {
    if (key == id) return name;
  }
  return "?";
}

std::optional<HyperId> parse_hyper_id(std::string_view name) {
  for (const auto& [key, text] : kHyperNames) {
    if (text == name) return key;
  }
  return std::nullopt;
}

bool is_correlation(HyperId id) {
  return id == HyperId::RhoGamma || id == HyperId::RhoPhi || id == HyperId::RhoDelta ||
         id == HyperId::RhoOmega;
}

double& Hyperparams::at(HyperId id) {
  switch (id) {
    case HyperId::Sigma: return sigma;
    case HyperId::Sigma1: return sigma_src[0];
    case HyperId::Sigma2: return sigma_src[1];
    case HyperId::Sigma3: return sigma_src[2];
    case HyperId::SigmaNu: return sigma_nu;
    case HyperId::SigmaBeta: return sigma_beta;
    case HyperId::SigmaAlpha: return sigma_alpha;
    case HyperId::SigmaGamma: return sigma_gamma;
    case HyperId::RhoGamma: return rho_gamma;
    case HyperId::SigmaPhi: return sigma_phi;
    case HyperId::RhoPhi: return rho_phi;
    case HyperId::SigmaDelta: return sigma_delta;
    case HyperId::RhoDelta: return rho_delta;
    case HyperId::SigmaPsi: return sigma_psi;
    case HyperId::SigmaOmega: return sigma_omega;
    case HyperId::RhoOmega: return rho_omega;
  }
  throw DomainError("invalid hyperparameter id");
}

double Hyperparams::at(HyperId id) const { return const_cast<Hyperparams&>(*this).at(id); }

const std::vector<HyperId>& hyper_ids(ModelKind kind) {
  static const std::vector<HyperId> bdsl{
      HyperId::Sigma,      HyperId::SigmaNu,    HyperId::SigmaBeta,  HyperId::SigmaAlpha,
      HyperId::SigmaGamma, HyperId::RhoGamma,   HyperId::SigmaPhi,   HyperId::RhoPhi,
      HyperId::SigmaDelta, HyperId::RhoDelta,   HyperId::SigmaPsi,   HyperId::SigmaOmega,
      HyperId::RhoOmega};
  static const std::vector<HyperId> idml{
      HyperId::Sigma1,     HyperId::Sigma2,   HyperId::Sigma3,     HyperId::SigmaBeta,
      HyperId::SigmaAlpha, HyperId::SigmaGamma, HyperId::RhoGamma, HyperId::SigmaPhi,
      HyperId::RhoPhi,     HyperId::SigmaDelta, HyperId::RhoDelta, HyperId::SigmaPsi,
      HyperId::SigmaOmega, HyperId::RhoOmega};
  return kind == ModelKind::BDSL ? bdsl : idml;
}

// ---------------------------------------------------------------------------
// Priors

PriorConfig PriorConfig::simulation_study() {
  PriorConfig p;
  p.sigma_scale = {2.0, 2.0, 2.0};
  p.sigma3_upper.reset();
  return p;
}

void PriorConfig::validate() const {
  auto positive = [](double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v)) throw DomainError(std::string(what) + " must be positive");
  };
  for (double v : lambda_var) positive(v, "prior lambda variance");
  for (double s : sigma_scale) positive(s, "prior sigma scale");
  if (sigma3_upper) positive(*sigma3_upper, "prior sigma3 upper bound");
  positive(bdsl_lambda_var, "prior lambda variance");
  positive(bdsl_sigma_scale, "prior sigma scale");
  positive(bdsl_sigma_nu_scale, "prior sigma_nu scale");
}

std::map<std::string, std::string> PriorConfig::to_kv() const {
  std::map<std::string, std::string> kv;
  for (int k = 0; k < 3; ++k) {
    const auto n = std::to_string(k + 1);
    kv["prior.lambda" + n + ".var"] = csv::format_double(lambda_var[k]);
    kv["prior.sigma" + n + ".scale"] = csv::format_double(sigma_scale[k]);
  }
  kv["prior.sigma3.upper"] = sigma3_upper ? csv::format_double(*sigma3_upper) : "none";
  kv["prior.lambda.var"] = csv::format_double(bdsl_lambda_var);
  kv["prior.sigma.scale"] = csv::format_double(bdsl_sigma_scale);
  kv["prior.sigma_nu.scale"] = csv::format_double(bdsl_sigma_nu_scale);
  return kv;
}

PriorConfig PriorConfig::from_kv(const std::map<std::string, std::string>& kv) {
  return from_kv(kv, PriorConfig{});
}

PriorConfig PriorConfig::from_kv(const std::map<std::string, std::string>& kv, PriorConfig base) {
  auto number = [](const std::string& key, const std::string& value) {
    const auto v = csv::to_double(csv::trim(value));
    if (!v) throw DomainError("bad value for " + key + ": '" + value + "'");
    return *v;
  };
  for (const auto& [key, value] : kv) {
    if (key.rfind("prior.", 0) != 0) continue;
    bool known = false;
    for (int k = 0; k < 3; ++k) {
      const auto n = std::to_string(k + 1);
      if (key == "prior.lambda" + n + ".var") {
        base.lambda_var[k] = number(key, value);
        known = true;
      } else if (key == "prior.sigma" + n + ".scale") {
        base.sigma_scale[k] = number(key, value);
        known = true;
      }
    }
    if (key == "prior.sigma3.upper") {
      const auto lower = csv::to_lower(csv::trim(value));
      if (lower == "none" || lower == "inf") {
        base.sigma3_upper.reset();
      } else {
        base.sigma3_upper = number(key, value);
      }
      known = true;
    } else if (key == "prior.lambda.var") {
      base.bdsl_lambda_var = number(key, value);
      known = true;
    } else if (key == "prior.sigma.scale") {
      base.bdsl_sigma_scale = number(key, value);
      known = true;
    } else if (key == "prior.sigma_nu.scale") {
      base.bdsl_sigma_nu_scale = number(key, value);
      known = true;
    }
    if (!known) throw DomainError("unknown prior key '" + key + "'");
  }
  base.validate();
  return base;
}

double half_cauchy_log_pdf(double x, double scale, std::optional<double> upper) {
  if (!(x > 0.0)) return kNegInf;
  if (upper && x > *upper) return kNegInf;
  const double z = x / scale;
  double lp = std::log(2.0 / (std::numbers::pi * scale)) - std::log1p(z * z);
  if (upper) lp -= std::log(2.0 / std::numbers::pi * std::atan(*upper / scale));
  return lp;
}

bool in_domain(const Hyperparams& hyper, ModelKind kind, const PriorConfig& priors) {
  for (auto id : hyper_ids(kind)) {
    const double v = hyper.at(id);
    if (!std::isfinite(v)) return false;
    if (is_correlation(id)) {
      if (!(std::abs(v) < 1.0)) return false;
    } else if (!(v > 0.0)) {
      return false;
    }
  }
  if (kind == ModelKind::IDML && priors.sigma3_upper && hyper.sigma_src[2] > *priors.sigma3_upper) {
    return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// AR(1) structure

Eigen::MatrixXd ar1_structure(int T, double rho) {
  if (T < 1) throw DomainError("AR(1) length must be at least 1");
  if (!(std::abs(rho) < 1.0)) throw DomainError("AR(1) coefficient must lie in (-1, 1)");
  Eigen::MatrixXd R = Eigen::MatrixXd::Zero(T, T);
  if (T == 1) {
    R(0, 0) = 1.0 - rho * rho;
    return R;
  }
  for (int t = 0; t < T; ++t) {
    R(t, t) = (t == 0 || t == T - 1) ? 1.0 : 1.0 + rho * rho;
    if (t + 1 < T) R(t, t + 1) = R(t + 1, t) = -rho;
  }
  return R;
}

double ar1_log_det(int T, double rho) {
  if (T < 1) throw DomainError("AR(1) length must be at least 1");
  if (!(std::abs(rho) < 1.0)) throw DomainError("AR(1) coefficient must lie in (-1, 1)");
  return std::log1p(-rho * rho);
}

void Ar1Stats::add(std::span<const double> x) {
  const int T = static_cast<int>(x.size());
  if (blocks > 0 && T != length) throw DataError("AR(1) blocks of different lengths");
  length = T;
  ++blocks;
  for (int t = 0; t < T; ++t) {
    q0 += x[t] * x[t];
    if (t > 0 && t < T - 1) q2 += x[t] * x[t];
    if (t + 1 < T) q1 -= 2.0 * x[t] * x[t + 1];
  }
  if (T == 1) q2 -= x[0] * x[0];
}

double Ar1Stats::log_density(double sigma, double rho) const {
  if (!(sigma > 0.0) || !(std::abs(rho) < 1.0)) return kNegInf;
  const double n = static_cast<double>(blocks) * length;
  return -0.5 * n * kLogTwoPi + 0.5 * blocks * std::log1p(-rho * rho) - n * std::log(sigma) -
         0.5 * quadratic(rho) / (sigma * sigma);
}

BlockPrecision::BlockPrecision(int blocks, int T, double rho, double sigma)
    : blocks_(blocks), rho_(rho), sigma_(sigma), block_(ar1_structure(T, rho)) {
  if (blocks < 1) throw DomainError("block count must be at least 1");
  if (!(sigma > 0.0)) throw DomainError("scale must be positive");
  block_ /= sigma * sigma;
}

double BlockPrecision::log_det() const {
  return blocks_ * (ar1_log_det(block_size(), rho_) - 2.0 * block_size() * std::log(sigma_));
}

double BlockPrecision::quadratic(const Eigen::VectorXd& x) const {
  if (x.size() != size()) throw DataError("vector length does not match precision");
  const int T = block_size();
  double q = 0.0;
  for (int b = 0; b < blocks_; ++b) {
    const auto seg = x.segment(b * T, T);
    q += seg.dot(block_ * seg);
  }
  return q;
}

double BlockPrecision::quadratic_rows(const Eigen::MatrixXd& m) const {
  if (m.rows() != blocks_ || m.cols() != block_size()) throw DataError("matrix shape does not match precision");
  double q = 0.0;
  for (int b = 0; b < blocks_; ++b) {
    const Eigen::VectorXd row = m.row(b).transpose();
    q += row.dot(block_ * row);
  }
  return q;
}

Eigen::VectorXd BlockPrecision::multiply(const Eigen::VectorXd& x) const {
  if (x.size() != size()) throw DataError("vector length does not match precision");
  const int T = block_size();
  Eigen::VectorXd out(x.size());
  for (int b = 0; b < blocks_; ++b) out.segment(b * T, T) = block_ * x.segment(b * T, T);
  return out;
}

BlockPrecision interaction_precision(InteractionKind kind, const ModelDims& dims, double rho,
                                     double sigma) {
  if (dims.countries < 1 || dims.vaccines < 1 || dims.times < 1) throw DomainError("invalid dimensions");
  switch (kind) {
    case InteractionKind::Phi: return BlockPrecision(dims.countries, dims.times, rho, sigma);
    case InteractionKind::Delta: return BlockPrecision(dims.vaccines, dims.times, rho, sigma);
    case InteractionKind::Omega:
      return BlockPrecision(dims.countries * dims.vaccines, dims.times, rho, sigma);
  }
  throw DomainError("invalid interaction kind");
}

// ---------------------------------------------------------------------------
// Shared mean and layout

Eigen::VectorXd shared_mean(const LatentField& f, const ModelDims& dims, ModelKind kind) {
  if (!f.matches(dims)) throw DataError("latent field shape does not match dimensions");
  Eigen::VectorXd mu(dims.cells());
  const double base = kind == ModelKind::BDSL ? f.lambda : 0.0;
  for (int i = 0; i < dims.countries; ++i) {
    for (int j = 0; j < dims.vaccines; ++j) {
      const double static_part = base + f.beta[i] + f.alpha[j] + f.psi(i, j);
      for (int t = 0; t < dims.times; ++t) {
        const int c = dims.cell(i, j, t);
        mu[c] = static_part + f.gamma[t] + f.phi(i, t) + f.delta(j, t) + f.omega[c];
      }
    }
  }
  return mu;
}

LatentLayout::LatentLayout(ModelKind kind, ModelDims dims) : kind_(kind), dims_(dims) {
  int next = intercepts();
  beta_ = next;
  next += dims.countries;
  alpha_ = next;
  next += dims.vaccines;
  gamma_ = next;
  next += dims.times;
  phi_ = next;
  next += dims.countries * dims.times;
  delta_ = next;
  next += dims.vaccines * dims.times;
  psi_ = next;
  next += dims.countries * dims.vaccines;
  omega_ = next;
  next += dims.cells();
  size_ = next;
}

Eigen::VectorXd LatentLayout::pack(const LatentField& f) const {
  if (!f.matches(dims_)) throw DataError("latent field shape does not match layout");
  Eigen::VectorXd x(size_);
  if (kind_ == ModelKind::BDSL) {
    x[0] = f.lambda;
    for (int k = 0; k < 3; ++k) x[1 + k] = f.nu[k];
  } else {
    for (int k = 0; k < 3; ++k) x[k] = f.lambda_src[k];
  }
  const auto& d = dims_;
  x.segment(beta_, d.countries) = f.beta;
  x.segment(alpha_, d.vaccines) = f.alpha;
  x.segment(gamma_, d.times) = f.gamma;
  for (int i = 0; i < d.countries; ++i) x.segment(phi(i, 0), d.times) = f.phi.row(i).transpose();
  for (int j = 0; j < d.vaccines; ++j) x.segment(delta(j, 0), d.times) = f.delta.row(j).transpose();
  for (int i = 0; i < d.countries; ++i) x.segment(psi(i, 0), d.vaccines) = f.psi.row(i).transpose();
  x.segment(omega_, d.cells()) = f.omega;
  return x;
}

LatentField LatentLayout::unpack(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != size_) throw DataError("vector length does not match layout");
  LatentField f = LatentField::zeros(dims_);
  if (kind_ == ModelKind::BDSL) {
    f.lambda = x[0];
    for (int k = 0; k < 3; ++k) f.nu[k] = x[1 + k];
  } else {
    for (int k = 0; k < 3; ++k) f.lambda_src[k] = x[k];
  }
  const auto& d = dims_;
  f.beta = x.segment(beta_, d.countries);
  f.alpha = x.segment(alpha_, d.vaccines);
  f.gamma = x.segment(gamma_, d.times);
  for (int i = 0; i < d.countries; ++i) f.phi.row(i) = x.segment(phi(i, 0), d.times).transpose();
  for (int j = 0; j < d.vaccines; ++j) f.delta.row(j) = x.segment(delta(j, 0), d.times).transpose();
  for (int i = 0; i < d.countries; ++i) f.psi.row(i) = x.segment(psi(i, 0), d.vaccines).transpose();
  f.omega = x.segment(omega_, d.cells());
  return f;
}

std::vector<std::string> LatentLayout::names() const {
  std::vector<std::string> out;
  out.reserve(size_);
  if (kind_ == ModelKind::BDSL) {
    out.emplace_back("lambda");
    for (auto k : kAllSources) out.push_back("nu[" + std::string(to_string(k)) + "]");
  } else {
    for (auto k : kAllSources) out.push_back("lambda[" + std::string(to_string(k)) + "]");
  }
  const auto& d = dims_;
  for (int i = 0; i < d.countries; ++i) out.push_back("beta" + format_index({i}));
  for (int j = 0; j < d.vaccines; ++j) out.push_back("alpha" + format_index({j}));
  for (int t = 0; t < d.times; ++t) out.push_back("gamma" + format_index({t}));
  for (int i = 0; i < d.countries; ++i)
    for (int t = 0; t < d.times; ++t) out.push_back("phi" + format_index({i, t}));
  for (int j = 0; j < d.vaccines; ++j)
    for (int t = 0; t < d.times; ++t) out.push_back("delta" + format_index({j, t}));
  for (int i = 0; i < d.countries; ++i)
    for (int j = 0; j < d.vaccines; ++j) out.push_back("psi" + format_index({i, j}));
  for (int i = 0; i < d.countries; ++i)
    for (int j = 0; j < d.vaccines; ++j)
      for (int t = 0; t < d.times; ++t) out.push_back("omega" + format_index({i, j, t}));
  return out;
}

Eigen::VectorXd shared_mean(const LatentLayout& layout, const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (x.size() != layout.size()) throw DataError("vector length does not match layout");
  const auto& d = layout.dims();
  const double base = layout.kind() == ModelKind::BDSL ? x[0] : 0.0;
  Eigen::VectorXd mu(d.cells());
  for (int i = 0; i < d.countries; ++i) {
    for (int j = 0; j < d.vaccines; ++j) {
      const double static_part = base + x[layout.beta(i)] + x[layout.alpha(j)] + x[layout.psi(i, j)];
      for (int t = 0; t < d.times; ++t) {
        mu[d.cell(i, j, t)] = static_part + x[layout.gamma(t)] + x[layout.phi(i, t)] +
                              x[layout.delta(j, t)] + x[layout.omega(i, j, t)];
      }
    }
  }
  return mu;
}

// ---------------------------------------------------------------------------
// Log posterior

LogPosterior log_posterior(ModelKind kind, const LatentField& field, const Hyperparams& h,
                           const PriorConfig& priors, const ObservationSet& data,
                           std::span<const double> missing_y) {
  const auto& dims = data.dims();
  if (!field.matches(dims)) throw DataError("latent field shape does not match data dimensions");
  LogPosterior lp;
  if (!in_domain(h, kind, priors)) {
    lp.prior = kNegInf;
    lp.terms.emplace_back("domain", kNegInf);
    return lp;
  }
  auto add = [&lp](double& part, const char* name, double value) {
    part += value;
    lp.terms.emplace_back(name, value);
  };

  const Eigen::VectorXd mu = shared_mean(field, dims, kind);
  double like = 0.0;
  if (kind == ModelKind::IDML) {
    for (const auto& o : data.observations()) {
      const int k = static_cast<int>(o.source);
      like += normal_log_pdf(o.y, field.lambda_src[k] + mu[dims.cell(o.country, o.vaccine, o.time)],
                             h.sigma_src[k]);
    }
  } else {
    const auto missing = data.missing_cells();
    if (missing_y.size() != missing.size()) {
      throw DataError("BDSL log posterior needs one imputed value per missing cell (" +
                      std::to_string(missing.size()) + "), got " + std::to_string(missing_y.size()));
    }
    auto term = [&](const Observation& o, double y) {
      const int k = static_cast<int>(o.source);
      return normal_log_pdf(y, mu[dims.cell(o.country, o.vaccine, o.time)] + field.nu[k], h.sigma);
    };
    for (const auto& o : data.observations()) like += term(o, o.y);
    for (std::size_t m = 0; m < missing.size(); ++m) like += term(missing[m], missing_y[m]);
  }
  add(lp.likelihood, "likelihood", like);

  add(lp.latent, "beta", iid_log_density(dims.countries, field.beta.squaredNorm(), h.sigma_beta));
  add(lp.latent, "alpha", iid_log_density(dims.vaccines, field.alpha.squaredNorm(), h.sigma_alpha));
  {
    Ar1Stats s;
    s.add({field.gamma.data(), static_cast<std::size_t>(dims.times)});
    add(lp.latent, "gamma", s.log_density(h.sigma_gamma, h.rho_gamma));
  }
  auto rows_density = [&](const Eigen::MatrixXd& m, double sigma, double rho) {
    Ar1Stats s;
    std::vector<double> row(m.cols());
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) row[c] = m(r, c);
      s.add(row);
    }
    return s.log_density(sigma, rho);
  };
  add(lp.latent, "phi", rows_density(field.phi, h.sigma_phi, h.rho_phi));
  add(lp.latent, "delta", rows_density(field.delta, h.sigma_delta, h.rho_delta));
  add(lp.latent, "psi",
      iid_log_density(dims.countries * dims.vaccines, field.psi.squaredNorm(), h.sigma_psi));
  {
    Ar1Stats s;
    for (int b = 0; b < dims.countries * dims.vaccines; ++b) {
      s.add({field.omega.data() + static_cast<std::ptrdiff_t>(b) * dims.times,
             static_cast<std::size_t>(dims.times)});
    }
    add(lp.latent, "omega", s.log_density(h.sigma_omega, h.rho_omega));
  }
  if (kind == ModelKind::BDSL) {
    double ss = 0.0;
    for (double v : field.nu) ss += v * v;
    add(lp.latent, "nu", iid_log_density(3, ss, h.sigma_nu));
  }

  // Priors. Flat on the remaining scales, uniform(-1, 1) on each rho.
  double prior = 4.0 * std::log(0.5);
  if (kind == ModelKind::BDSL) {
    prior += normal_log_pdf(field.lambda, 0.0, std::sqrt(priors.bdsl_lambda_var));
    prior += half_cauchy_log_pdf(h.sigma, priors.bdsl_sigma_scale);
    prior += half_cauchy_log_pdf(h.sigma_nu, priors.bdsl_sigma_nu_scale);
  } else {
    for (int k = 0; k < 3; ++k) {
      prior += normal_log_pdf(field.lambda_src[k], 0.0, std::sqrt(priors.lambda_var[k]));
      prior += half_cauchy_log_pdf(h.sigma_src[k], priors.sigma_scale[k],
                                   k == 2 ? priors.sigma3_upper : std::nullopt);
    }
  }
  add(lp.prior, "prior", prior);
  return lp;
}

}  // namespace vaxcov
