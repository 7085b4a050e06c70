#include "vaxcov/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <boost/math/distributions/normal.hpp>

#include "vaxcov/csv.hpp"
#include "vaxcov/errors.hpp"

namespace vaxcov {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Traces split(const Traces& chains) {
  Traces halves;
  for (const auto& c : chains) {
    const std::size_t half = c.size() / 2;
    // Drop the middle draw of odd-length chains.
    halves.emplace_back(c.begin(), c.begin() + half);
    halves.emplace_back(c.end() - half, c.end());
  }
  return halves;
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double var_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return ss / static_cast<double>(v.size() - 1);
}

void check_shape(const Traces& chains) {
  if (chains.empty()) throw DataError("no chains supplied");
  const auto n = chains.front().size();
  for (const auto& c : chains) {
    if (c.size() != n) throw DataError("chains must have equal length");
  }
  if (n < 4) throw DataError("at least 4 draws per chain are required");
}

// Geyer-truncated ESS of equal-length chains (no further splitting).
double ess_impl(const Traces& chains) {
  const std::size_t m = chains.size();
  const std::size_t n = chains.front().size();
  std::vector<double> means(m), vars(m);
  for (std::size_t c = 0; c < m; ++c) {
    means[c] = mean_of(chains[c]);
    vars[c] = var_of(chains[c]);
  }
  const double w = mean_of(vars);
  double var_plus = w * (n - 1.0) / n;
  if (m > 1) var_plus += var_of(means);
  if (!(var_plus > 0.0) || !std::isfinite(var_plus)) return kNaN;

  // Mean over chains of the biased autocovariance at lag t.
  auto acov = [&](std::size_t t) {
    double total = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
      const auto& x = chains[c];
      double s = 0.0;
      for (std::size_t i = 0; i + t < n; ++i) s += (x[i] - means[c]) * (x[i + t] - means[c]);
      total += s / n;
    }
    return total / m;
  };
  const double mean_var = w;  // unbiased per-chain variances averaged
  auto rho = [&](std::size_t t) { return 1.0 - (mean_var - acov(t)) / var_plus; };

  std::vector<double> rho_hat(n, 0.0);
  rho_hat[0] = 1.0;
  double even = 1.0;
  double odd = rho(1);
  rho_hat[1] = odd;
  std::size_t t = 0;
  while (t + 5 < n && std::isfinite(even + odd) && even + odd > 0.0) {
    t += 2;
    even = rho(t);
    odd = rho(t + 1);
    if (even + odd >= 0.0) {
      rho_hat[t] = even;
      rho_hat[t + 1] = odd;
    }
  }
  const std::size_t max_t = t;
  if (even > 0.0) rho_hat[max_t] = even;
  // Monotone sequence.
  t = 0;
  while (t + 4 <= max_t) {
    t += 2;
    if (rho_hat[t] + rho_hat[t + 1] > rho_hat[t - 2] + rho_hat[t - 1]) {
      rho_hat[t] = (rho_hat[t - 2] + rho_hat[t - 1]) / 2.0;
      rho_hat[t + 1] = rho_hat[t];
    }
  }
  const double total = static_cast<double>(m * n);
  double tau = -1.0 + rho_hat[max_t];
  for (std::size_t s = 0; s < max_t; ++s) tau += 2.0 * rho_hat[s];
  tau = std::max(tau, 1.0 / std::log10(total));
  return total / tau;
}

}  // namespace

std::optional<double> split_rhat(const Traces& chains) {
  check_shape(chains);
  const auto halves = split(chains);
  const double n = static_cast<double>(halves.front().size());
  std::vector<double> means, vars;
  for (const auto& h : halves) {
    means.push_back(mean_of(h));
    vars.push_back(var_of(h));
  }
  const double w = mean_of(vars);
  if (!(w > 0.0)) return std::nullopt;
  const double b = n * var_of(means);
  return std::sqrt(((n - 1.0) / n * w + b / n) / w);
}

double effective_sample_size(const Traces& chains) {
  check_shape(chains);
  return ess_impl(split(chains));
}

double bulk_ess(const Traces& chains) {
  check_shape(chains);
  std::vector<std::pair<double, std::size_t>> pooled;
  for (const auto& c : chains)
    for (double v : c) pooled.emplace_back(v, pooled.size());
  const std::size_t S = pooled.size();
  std::sort(pooled.begin(), pooled.end());
  std::vector<double> ranks(S);
  for (std::size_t i = 0; i < S;) {
    std::size_t j = i;
    while (j + 1 < S && pooled[j + 1].first == pooled[i].first) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;  // average rank
    for (std::size_t k = i; k <= j; ++k) ranks[pooled[k].second] = r;
    i = j + 1;
  }
  const boost::math::normal_distribution<double> normal;
  Traces z;
  std::size_t pos = 0;
  for (const auto& c : chains) {
    std::vector<double> zc;
    for (std::size_t i = 0; i < c.size(); ++i, ++pos) {
      zc.push_back(boost::math::quantile(normal, (ranks[pos] - 0.375) / (S + 0.25)));
    }
    z.push_back(std::move(zc));
  }
  return ess_impl(split(z));
}

double mcse_mean(const Traces& chains) {
  std::vector<double> pooled;
  for (const auto& c : chains) pooled.insert(pooled.end(), c.begin(), c.end());
  return std::sqrt(var_of(pooled) / effective_sample_size(chains));
}

void DiagnosticsReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write file: " + path.string());
  out << "parameter,rhat,ess\n";
  for (const auto& p : params) {
    out << csv::escape(p.name) << ',' << (p.rhat ? csv::format_double(*p.rhat) : "undefined") << ','
        << (std::isfinite(p.ess_bulk) ? csv::format_double(p.ess_bulk) : "undefined") << '\n';
  }
}

DiagnosticsReport diagnose(const Draws& draws, bool include_hyper) {
  DiagnosticsReport report;
  if (draws.chains.empty() || draws.per_chain() < 4) {
    throw DataError("diagnostics need at least 4 retained draws per chain");
  }
  const auto layout = draws.layout();
  const std::size_t n = draws.per_chain();
  auto add = [&](std::string name, const Traces& traces) {
    ParamDiagnostic p;
    p.name = std::move(name);
    p.rhat = split_rhat(traces);
    p.ess_bulk = p.rhat ? bulk_ess(traces) : kNaN;
    if (p.rhat) report.max_rhat = std::max(report.max_rhat, *p.rhat);
    report.params.push_back(std::move(p));
  };
  auto column = [&](auto&& value_of) {
    Traces traces;
    for (std::size_t c = 0; c < draws.chains.size(); ++c) {
      std::vector<double> t(n);
      for (std::size_t d = 0; d < n; ++d) t[d] = value_of(c, d);
      traces.push_back(std::move(t));
    }
    return traces;
  };

  if (include_hyper) {
    for (auto id : hyper_ids(draws.kind)) {
      add(std::string(to_string(id)), column([&](std::size_t c, std::size_t d) {
            return draws.chains[c].hyper[d].at(id);
          }));
    }
  }
  const auto names = layout.names();
  for (int a = 0; a < layout.intercepts(); ++a) {
    add(names[a], column([&](std::size_t c, std::size_t d) {
          return draws.chains[c].field(static_cast<Eigen::Index>(d), a);
        }));
  }
  std::vector<Eigen::MatrixXd> mu(draws.chains.size());
  for (std::size_t c = 0; c < draws.chains.size(); ++c) {
    mu[c].resize(draws.dims.cells(), static_cast<Eigen::Index>(n));
    for (std::size_t d = 0; d < n; ++d) mu[c].col(static_cast<Eigen::Index>(d)) = draws.mu(c, d);
  }
  const auto& dims = draws.dims;
  for (int i = 0; i < dims.countries; ++i)
    for (int j = 0; j < dims.vaccines; ++j)
      for (int t = 0; t < dims.times; ++t) {
        const int cell = dims.cell(i, j, t);
        add("mu[" + std::to_string(i + 1) + "," + std::to_string(j + 1) + "," + std::to_string(t + 1) + "]",
            column([&](std::size_t c, std::size_t d) { return mu[c](cell, static_cast<Eigen::Index>(d)); }));
      }
  report.passed = report.max_rhat < DiagnosticsReport::kRhatGate;
  return report;
}

}  // namespace vaxcov
