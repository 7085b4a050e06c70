#include "vaxcov/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "vaxcov/errors.hpp"
#include "vaxcov/preprocess.hpp"

namespace vaxcov {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

void require_draws(const Draws& draws) {
  if (draws.total() == 0) throw DataError("draws are empty");
}

struct DrawRef {
  std::size_t chain;
  std::size_t draw;
};

std::vector<DrawRef> draw_refs(const Draws& draws) {
  std::vector<DrawRef> refs;
  refs.reserve(draws.total());
  for (std::size_t c = 0; c < draws.chains.size(); ++c)
    for (std::size_t d = 0; d < draws.chains[c].hyper.size(); ++d) refs.push_back({c, d});
  return refs;
}

/// Output vaccine list and, for each output vaccine, the model vaccine index
/// and an optional base index it is multiplied with.
struct VaccinePlan {
  std::vector<std::string> names;
  std::vector<int> source;
  std::vector<int> base;  // -1 when none
};

VaccinePlan vaccine_plan(const IndexMaps& maps, const std::optional<RatioSpec>& ratio) {
  VaccinePlan plan;
  std::optional<int> r, b;
  if (ratio) {
    r = maps.vaccine_index(ratio->ratio_vaccine);
    b = maps.vaccine_index(ratio->base_vaccine);
  }
  for (int j = 0; j < static_cast<int>(maps.vaccines.size()); ++j) {
    if (r && b && j == *r) {
      plan.names.push_back(ratio->output_vaccine);
      plan.base.push_back(*b);
    } else {
      plan.names.push_back(maps.vaccines[j]);
      plan.base.push_back(-1);
    }
    plan.source.push_back(j);
  }
  return plan;
}

CoverageDraws empty_grid(const IndexMaps& maps, const VaccinePlan& plan, int n_years, std::size_t n_draws) {
  CoverageDraws out;
  out.units = maps.countries;
  out.vaccines = plan.names;
  out.first_year = maps.first_year;
  out.n_years = n_years;
  out.prediction.assign(n_years, 0);
  out.p.resize(static_cast<Eigen::Index>(out.units.size() * out.vaccines.size()) * n_years,
               static_cast<Eigen::Index>(n_draws));
  return out;
}

/// Writes invlogit(mu) for one draw into column `col`, applying the ratio plan.
/// `mu` is laid out (i, j, t) with `times` years.
void fill_column(CoverageDraws& out, const VaccinePlan& plan, const Eigen::VectorXd& mu, int times,
                 Eigen::Index col) {
  const int C = static_cast<int>(out.units.size());
  const int V = static_cast<int>(plan.names.size());
  for (int i = 0; i < C; ++i)
    for (int v = 0; v < V; ++v)
      for (int t = 0; t < times; ++t) {
        double p = inv_logit(mu[(i * V + plan.source[v]) * times + t]);
        if (plan.base[v] >= 0) p *= inv_logit(mu[(i * V + plan.base[v]) * times + t]);
        out.p(out.row(i, v, t), col) = p;
      }
}

void check_maps(const Draws& draws, const IndexMaps& maps) {
  if (maps.dims() != draws.dims)
    throw DataError("index maps do not match the dimensions of the draws");
}

}  // namespace

double quantile_sorted(const std::vector<double>& sorted, double prob) {
  if (sorted.empty()) throw DataError("quantile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

EstimateTable CoverageDraws::summarize() const {
  EstimateTable table;
  table.rows.reserve(static_cast<std::size_t>(p.rows()));
  std::vector<double> buf(static_cast<std::size_t>(p.cols()));
  for (int u = 0; u < static_cast<int>(units.size()); ++u)
    for (int v = 0; v < static_cast<int>(vaccines.size()); ++v)
      for (int y = 0; y < n_years; ++y) {
        const auto r = p.row(row(u, v, y));
        for (Eigen::Index d = 0; d < p.cols(); ++d) buf[static_cast<std::size_t>(d)] = r[d];
        std::sort(buf.begin(), buf.end());
        EstimateRow e;
        e.unit = units[u];
        e.vaccine = vaccines[v];
        e.year = first_year + y;
        e.mean = 100.0 * r.mean();
        e.q025 = 100.0 * quantile_sorted(buf, 0.025);
        e.q50 = 100.0 * quantile_sorted(buf, 0.5);
        e.q975 = 100.0 * quantile_sorted(buf, 0.975);
        e.is_prediction = prediction[y] != 0;
        table.rows.push_back(std::move(e));
      }
  return table;
}

CoverageDraws coverage_draws(const Draws& draws, const IndexMaps& maps, const std::optional<RatioSpec>& ratio) {
  require_draws(draws);
  check_maps(draws, maps);
  const auto plan = vaccine_plan(maps, ratio);
  const auto refs = draw_refs(draws);
  auto out = empty_grid(maps, plan, draws.dims.times, refs.size());
  for (std::size_t l = 0; l < refs.size(); ++l)
    fill_column(out, plan, draws.mu(refs[l].chain, refs[l].draw), draws.dims.times, static_cast<Eigen::Index>(l));
  return out;
}

EstimateTable coverage_estimates(const Draws& draws, const IndexMaps& maps, const std::optional<RatioSpec>& ratio) {
  return coverage_draws(draws, maps, ratio).summarize();
}

CoverageDraws predict_forward(const Draws& draws, const IndexMaps& maps, int steps, std::uint64_t seed,
                              const std::optional<RatioSpec>& ratio, bool include_fitted) {
  require_draws(draws);
  check_maps(draws, maps);
  if (steps < 1) throw DomainError("steps must be at least 1");
  const auto& d = draws.dims;
  const int C = d.countries, V = d.vaccines, T = d.times, S = T + steps;
  const auto layout = draws.layout();
  const auto plan = vaccine_plan(maps, ratio);
  const auto refs = draw_refs(draws);
  auto full = empty_grid(maps, plan, S, refs.size());
  for (int t = T; t < S; ++t) full.prediction[t] = 1;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto extend = [&](double last, double rho, double sigma, double* out) {
    double prev = last;
    for (int s = 0; s < steps; ++s) {
      prev = rho * prev + sigma * normal(rng);
      out[s] = prev;
    }
  };

  Eigen::VectorXd mu(C * V * S);
  std::vector<double> g(steps), tmp(steps);
  Eigen::MatrixXd ph(C, steps), de(V, steps);
  for (std::size_t l = 0; l < refs.size(); ++l) {
    const auto& h = draws.chains[refs[l].chain].hyper[refs[l].draw];
    const Eigen::VectorXd x = draws.chains[refs[l].chain].field.row(static_cast<Eigen::Index>(refs[l].draw)).transpose();
    const Eigen::VectorXd fitted = shared_mean(layout, x);
    extend(x[layout.gamma(T - 1)], h.rho_gamma, h.sigma_gamma, g.data());
    for (int i = 0; i < C; ++i) {
      extend(x[layout.phi(i, T - 1)], h.rho_phi, h.sigma_phi, tmp.data());
      for (int s = 0; s < steps; ++s) ph(i, s) = tmp[s];
    }
    for (int j = 0; j < V; ++j) {
      extend(x[layout.delta(j, T - 1)], h.rho_delta, h.sigma_delta, tmp.data());
      for (int s = 0; s < steps; ++s) de(j, s) = tmp[s];
    }
    const double base = draws.kind == ModelKind::BDSL ? x[0] : 0.0;
    for (int i = 0; i < C; ++i)
      for (int j = 0; j < V; ++j) {
        for (int t = 0; t < T; ++t) mu[(i * V + j) * S + t] = fitted[d.cell(i, j, t)];
        extend(x[layout.omega(i, j, T - 1)], h.rho_omega, h.sigma_omega, tmp.data());
        const double stat = base + x[layout.beta(i)] + x[layout.alpha(j)] + x[layout.psi(i, j)];
        for (int s = 0; s < steps; ++s) mu[(i * V + j) * S + T + s] = stat + g[s] + ph(i, s) + de(j, s) + tmp[s];
      }
    fill_column(full, plan, mu, S, static_cast<Eigen::Index>(l));
  }
  if (include_fitted) return full;

  auto out = empty_grid(maps, plan, steps, refs.size());
  out.first_year = maps.first_year + T;
  out.prediction.assign(steps, 1);
  for (int u = 0; u < C; ++u)
    for (int v = 0; v < V; ++v)
      for (int s = 0; s < steps; ++s) out.p.row(out.row(u, v, s)) = full.p.row(full.row(u, v, T + s));
  return out;
}

CoverageDraws regional_aggregate(const CoverageDraws& national, const std::vector<std::string>& regions,
                                 const DenominatorTable& denominators) {
  if (regions.size() != national.units.size())
    throw DataError("region map must list one region per country");
  std::vector<std::string> names(regions);
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  std::vector<int> region_of(regions.size());
  for (std::size_t i = 0; i < regions.size(); ++i)
    region_of[i] = static_cast<int>(std::lower_bound(names.begin(), names.end(), regions[i]) - names.begin());

  const int C = static_cast<int>(national.units.size());
  const int V = static_cast<int>(national.vaccines.size());
  const int Y = national.n_years;
  std::vector<std::string> missing;
  Eigen::MatrixXd pop(C, V * Y);
  for (int i = 0; i < C; ++i)
    for (int v = 0; v < V; ++v)
      for (int y = 0; y < Y; ++y) {
        const int year = national.first_year + y;
        const auto n = denominators.population(national.units[i], national.vaccines[v], year);
        if (!n) {
          missing.push_back("(" + national.units[i] + ", " + national.vaccines[v] + ", " + std::to_string(year) + ")");
          continue;
        }
        pop(i, v * Y + y) = *n;
      }
  if (!missing.empty()) {
    std::ostringstream msg;
    msg << "missing denominators for " << missing.size() << " key(s):";
    for (const auto& m : missing) msg << ' ' << m;
    throw DataError(msg.str());
  }

  CoverageDraws out;
  out.units = names;
  out.vaccines = national.vaccines;
  out.first_year = national.first_year;
  out.n_years = Y;
  out.prediction = national.prediction;
  out.p = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(names.size()) * V * Y, national.p.cols());
  for (int v = 0; v < V; ++v)
    for (int y = 0; y < Y; ++y) {
      std::vector<double> total(names.size(), 0.0);
      for (int i = 0; i < C; ++i) total[region_of[i]] += pop(i, v * Y + y);
      for (int i = 0; i < C; ++i) {
        const double w = pop(i, v * Y + y) / total[region_of[i]];
        out.p.row(out.row(region_of[i], v, y)) += w * national.p.row(national.row(i, v, y));
      }
    }
  return out;
}

WaicReport WaicReport::from_columns(double gof, double penalty) {
  WaicReport r;
  r.gof = gof;
  r.lppd = -gof / 2.0;
  r.penalty = penalty;
  r.waic = gof + 2.0 * penalty;
  return r;
}

Eigen::MatrixXd pointwise_log_lik(const Draws& draws, const ObservationSet& data) {
  require_draws(draws);
  if (data.dims() != draws.dims) throw DataError("observations do not match the dimensions of the draws");
  const auto layout = draws.layout();
  const auto refs = draw_refs(draws);
  const auto& obs = data.observations();
  Eigen::MatrixXd ll(static_cast<Eigen::Index>(refs.size()), static_cast<Eigen::Index>(obs.size()));
  for (std::size_t l = 0; l < refs.size(); ++l) {
    const auto& h = draws.chains[refs[l].chain].hyper[refs[l].draw];
    const Eigen::VectorXd x = draws.chains[refs[l].chain].field.row(static_cast<Eigen::Index>(refs[l].draw)).transpose();
    const Eigen::VectorXd mu = shared_mean(layout, x);
    for (std::size_t n = 0; n < obs.size(); ++n) {
      const auto& o = obs[n];
      const int k = static_cast<int>(o.source);
      double mean = mu[draws.dims.cell(o.country, o.vaccine, o.time)];
      double sigma;
      if (draws.kind == ModelKind::BDSL) {
        mean += x[1 + k];
        sigma = h.sigma;
      } else {
        mean += x[k];
        sigma = h.sigma_src[k];
      }
      const double z = (o.y - mean) / sigma;
      ll(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(n)) = -0.5 * kLog2Pi - std::log(sigma) - 0.5 * z * z;
    }
  }
  return ll;
}

WaicReport waic(const Eigen::MatrixXd& log_lik) {
  const Eigen::Index S = log_lik.rows();
  if (S < 2) throw DataError("WAIC needs at least two draws");
  double lppd = 0.0, penalty = 0.0;
  for (Eigen::Index n = 0; n < log_lik.cols(); ++n) {
    const auto col = log_lik.col(n);
    const double m = col.maxCoeff();
    lppd += m + std::log((col.array() - m).exp().sum()) - std::log(static_cast<double>(S));
    const double mean = col.mean();
    penalty += (col.array() - mean).square().sum() / static_cast<double>(S - 1);
  }
  auto r = WaicReport::from_columns(-2.0 * lppd, penalty);
  r.lppd = lppd;
  r.n_obs = static_cast<std::size_t>(log_lik.cols());
  r.n_draws = static_cast<std::size_t>(S);
  return r;
}

WaicReport waic(const Draws& draws, const ObservationSet& data) {
  if (draws.total() < 2) throw DataError("WAIC needs at least two draws");
  return waic(pointwise_log_lik(draws, data));
}

ValidationMetrics validation_metrics(const EstimateTable& predicted, const TruthTable& truth) {
  std::vector<double> est, tru;
  std::size_t inside = 0;
  for (const auto& r : predicted.rows) {
    const auto it = truth.find({r.unit, r.vaccine, r.year});
    if (it == truth.end()) continue;
    est.push_back(r.mean);
    tru.push_back(it->second);
    if (r.q025 <= it->second && it->second <= r.q975) ++inside;
  }
  if (est.empty()) throw DataError("no estimate matches a true value");
  const double m = static_cast<double>(est.size());
  ValidationMetrics out;
  out.n = est.size();
  double sq = 0.0, ab = 0.0, bias = 0.0;
  for (std::size_t n = 0; n < est.size(); ++n) {
    const double e = est[n] - tru[n];
    bias += e;
    sq += e * e;
    ab += std::abs(e);
  }
  out.av_bias = bias / m;
  out.rmse = std::sqrt(sq / m);
  out.mae = ab / m;
  out.coverage95 = 100.0 * static_cast<double>(inside) / m;
  const double me = std::accumulate(est.begin(), est.end(), 0.0) / m;
  const double mt = std::accumulate(tru.begin(), tru.end(), 0.0) / m;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t n = 0; n < est.size(); ++n) {
    sxy += (est[n] - me) * (tru[n] - mt);
    sxx += (est[n] - me) * (est[n] - me);
    syy += (tru[n] - mt) * (tru[n] - mt);
  }
  out.correlation = sxx > 0.0 && syy > 0.0 ? sxy / std::sqrt(sxx * syy) : std::nan("");
  return out;
}

}  // namespace vaxcov
