#include "vaxcov/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "vaxcov/diagnostics.hpp"
#include "vaxcov/errors.hpp"
#include "vaxcov/preprocess.hpp"

namespace vaxcov {

namespace {

std::mt19937_64 stream(std::uint64_t seed, std::uint32_t id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), id};
  return std::mt19937_64(seq);
}

Hyperparams study_effects() {
  Hyperparams h;
  h.sigma = 1.0;
  h.sigma_beta = 1.0;
  h.sigma_alpha = 1.0;
  h.rho_gamma = 0.5;
  h.sigma_gamma = 1.0;
  h.rho_phi = 0.3;
  h.sigma_phi = 0.5;
  h.rho_delta = 0.4;
  h.sigma_delta = 0.8;
  h.sigma_psi = 1.0;
  h.rho_omega = 0.7;
  h.sigma_omega = 0.8;
  return h;
}

void ar1_path(std::mt19937_64& rng, double rho, double sigma, double* out, int T) {
  std::normal_distribution<double> normal(0.0, 1.0);
  out[0] = sigma / std::sqrt(1.0 - rho * rho) * normal(rng);
  for (int t = 1; t < T; ++t) out[t] = rho * out[t - 1] + sigma * normal(rng);
}

std::string label(char prefix, int index, int width) {
  std::ostringstream s;
  s << prefix << std::setw(width) << std::setfill('0') << index + 1;
  return s.str();
}

int scaled_start(int start, int T) {
  return std::max(1, static_cast<int>(std::lround(static_cast<double>(start) * T / 20.0)));
}

}  // namespace

ScenarioSpec ScenarioSpec::standard(int scenario) {
  ScenarioSpec s;
  s.truth = study_effects();
  std::array<double, 3> var{};
  double nu_var = 0.0;
  switch (scenario) {
    case 1: var = {1.0, 0.64, 0.16}; nu_var = 0.6; break;
    case 2: var = {9.0, 4.0, 0.25}; nu_var = 4.0; break;
    case 3: var = {1.0, 1.0, 1.0}; nu_var = 0.1; break;
    default: throw DomainError("scenario must be 1, 2 or 3, got " + std::to_string(scenario));
  }
  s.name = "S" + std::to_string(scenario);
  for (int k = 0; k < 3; ++k) s.truth.sigma_src[k] = std::sqrt(var[k]);
  s.truth.sigma_nu = std::sqrt(nu_var);
  return s;
}

ScenarioSpec ScenarioSpec::zero_noise() {
  auto s = standard(1);
  s.name = "zero-noise";
  s.truth.sigma = 0.01;
  s.truth.sigma_src = {0.01, 0.01, 0.01};
  s.truth.sigma_nu = 0.01;
  s.missing_rate = {0.0, 0.0, 0.0};
  return s;
}

ScenarioSpec ScenarioSpec::parse(const std::string& name) {
  std::string n;
  for (char c : name) n.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (n == "zero-noise" || n == "zero_noise") return zero_noise();
  if (!n.empty() && n.front() == 's') n.erase(0, 1);
  if (n == "1" || n == "2" || n == "3") return standard(n[0] - '0');
  throw DomainError("unknown scenario '" + name + "' (expected 1, 2, 3 or zero-noise)");
}

void ScenarioSpec::validate() const {
  for (double r : missing_rate)
    if (!(r >= 0.0 && r <= 1.0)) throw DomainError("missingness rates must lie in [0, 1]");
  for (HyperId id : {HyperId::Sigma, HyperId::Sigma1, HyperId::Sigma2, HyperId::Sigma3, HyperId::SigmaNu,
                     HyperId::SigmaBeta, HyperId::SigmaAlpha, HyperId::SigmaGamma, HyperId::SigmaPhi,
                     HyperId::SigmaDelta, HyperId::SigmaPsi, HyperId::SigmaOmega})
    if (!(truth.at(id) > 0.0)) throw DomainError("scenario scale " + std::string(to_string(id)) + " must be positive");
  for (HyperId id : {HyperId::RhoGamma, HyperId::RhoPhi, HyperId::RhoDelta, HyperId::RhoOmega})
    if (!(std::abs(truth.at(id)) < 1.0)) throw DomainError("scenario " + std::string(to_string(id)) + " must lie in (-1, 1)");
  if (late_starts.empty()) throw DomainError("late_starts must not be empty");
  for (int s : late_starts)
    if (s < 1) throw DomainError("late start years must be at least 1");
  if (late_vaccines < 0) throw DomainError("late_vaccines must be non-negative");
}

TruthTable SyntheticData::truth(ModelKind kind, int from, int to) const {
  if (to < 0) to = dims.times;
  const auto& m = mu(kind);
  TruthTable out;
  for (int i = 0; i < dims.countries; ++i)
    for (int j = 0; j < dims.vaccines; ++j)
      for (int t = std::max(from, start[i * dims.vaccines + j]); t < to; ++t)
        out[{maps.countries[i], maps.vaccines[j], maps.year(t)}] = 100.0 * inv_logit(m[dims.cell(i, j, t)]);
  return out;
}

SyntheticData generate_synthetic(const ModelDims& dims, const ScenarioSpec& scenario, std::uint64_t seed) {
  scenario.validate();
  if (dims.countries < 1 || dims.vaccines < 1 || dims.times < 1)
    throw DomainError("simulation dimensions must be positive");
  const int C = dims.countries, V = dims.vaccines, T = dims.times;
  const auto& h = scenario.truth;

  SyntheticData out;
  out.dims = dims;
  for (int i = 0; i < C; ++i) {
    out.maps.countries.push_back(label('C', i, 2));
    out.maps.regions.push_back("SIM");
  }
  for (int j = 0; j < V; ++j) out.maps.vaccines.push_back(label('V', j, 1));
  out.maps.first_year = 1;
  out.maps.n_years = T;

  auto rng = stream(seed, 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto& f = out.effects;
  f = LatentField::zeros(dims);
  f.lambda = scenario.lambda;
  f.lambda_src = scenario.lambda_src;
  for (int i = 0; i < C; ++i) f.beta[i] = h.sigma_beta * normal(rng);
  for (int j = 0; j < V; ++j) f.alpha[j] = h.sigma_alpha * normal(rng);
  ar1_path(rng, h.rho_gamma, h.sigma_gamma, f.gamma.data(), T);
  std::vector<double> path(T);
  for (int i = 0; i < C; ++i) {
    ar1_path(rng, h.rho_phi, h.sigma_phi, path.data(), T);
    for (int t = 0; t < T; ++t) f.phi(i, t) = path[t];
  }
  for (int j = 0; j < V; ++j) {
    ar1_path(rng, h.rho_delta, h.sigma_delta, path.data(), T);
    for (int t = 0; t < T; ++t) f.delta(j, t) = path[t];
  }
  for (int i = 0; i < C; ++i)
    for (int j = 0; j < V; ++j) f.psi(i, j) = h.sigma_psi * normal(rng);
  for (int i = 0; i < C; ++i)
    for (int j = 0; j < V; ++j) ar1_path(rng, h.rho_omega, h.sigma_omega, f.omega.data() + dims.cell(i, j, 0), T);
  for (int k = 0; k < 3; ++k) out.nu[k] = h.sigma_nu * normal(rng);
  f.nu = out.nu;

  out.mu_idml = shared_mean(f, dims, ModelKind::IDML);
  out.mu_bdsl = shared_mean(f, dims, ModelKind::BDSL);

  auto srng = stream(seed, 2);
  std::uniform_int_distribution<std::size_t> pick(0, scenario.late_starts.size() - 1);
  out.start.assign(static_cast<std::size_t>(C * V), 0);
  const int first_late = std::max(0, V - scenario.late_vaccines);
  for (int i = 0; i < C; ++i)
    for (int j = first_late; j < V; ++j)
      out.start[i * V + j] = std::min(T, scaled_start(scenario.late_starts[pick(srng)], T)) - 1;

  std::vector<int> cells;
  for (int i = 0; i < C; ++i)
    for (int j = 0; j < V; ++j)
      for (int t = out.start[i * V + j]; t < T; ++t) cells.push_back(dims.cell(i, j, t));

  auto mrng = stream(seed, 3);
  auto irng = stream(seed, 4);
  auto brng = stream(seed, 5);
  std::vector<Observation> idml, bdsl;
  for (int k = 0; k < 3; ++k) {
    std::vector<char> keep(cells.size(), 1);
    std::vector<std::size_t> order(cells.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), mrng);
    const auto drop = static_cast<std::size_t>(std::lround(scenario.missing_rate[k] * static_cast<double>(cells.size())));
    for (std::size_t n = 0; n < drop; ++n) keep[order[n]] = 0;
    for (std::size_t n = 0; n < cells.size(); ++n) {
      const int c = cells[n];
      const double ei = normal(irng), eb = normal(brng);
      if (!keep[n]) continue;
      Observation o;
      o.country = c / (V * T);
      o.vaccine = (c / T) % V;
      o.time = c % T;
      o.source = static_cast<SourceKind>(k);
      o.y = scenario.lambda_src[k] + out.mu_idml[c] + h.sigma_src[k] * ei;
      idml.push_back(o);
      o.y = out.mu_bdsl[c] + out.nu[k] + h.sigma * eb;
      bdsl.push_back(o);
    }
  }
  out.idml = ObservationSet(dims, std::move(idml));
  out.bdsl = ObservationSet(dims, std::move(bdsl));
  return out;
}

ForecastMode parse_forecast_mode(const std::string& text) {
  if (text == "rolling") return ForecastMode::Rolling;
  if (text == "once") return ForecastMode::Once;
  if (text == "none") return ForecastMode::None;
  throw DomainError("forecast mode must be rolling, once or none, got '" + text + "'");
}

const MetricsColumn* ExperimentReport::find(ModelKind model, const std::string& horizon) const {
  for (const auto& c : columns)
    if (c.model == model && c.horizon == horizon) return &c;
  return nullptr;
}

namespace {

const std::array<std::pair<const char*, double ValidationMetrics::*>, 5> kMetricRows{{
    {"AvBias", &ValidationMetrics::av_bias},
    {"RMSE", &ValidationMetrics::rmse},
    {"MAE", &ValidationMetrics::mae},
    {"95% coverage", &ValidationMetrics::coverage95},
    {"correlation", &ValidationMetrics::correlation},
}};

std::string column_title(const MetricsColumn& c) {
  return std::string(to_string(c.model)) + " " + c.horizon;
}

std::string fixed(double v, int digits) {
  if (!std::isfinite(v)) return "NA";
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

}  // namespace

void ExperimentReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "scenario,seed,model,horizon,metric,value\n";
  out << std::setprecision(17);
  for (const auto& c : columns) {
    for (const auto& [name, member] : kMetricRows)
      out << scenario << ',' << data_seed << ',' << to_string(c.model) << ',' << c.horizon << ',' << name << ','
          << c.metrics.*member << '\n';
    out << scenario << ',' << data_seed << ',' << to_string(c.model) << ',' << c.horizon << ",n," << c.metrics.n
        << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

void ExperimentReport::write_text(std::ostream& out) const {
  out << "Scenario " << scenario << "  (C=" << dims.countries << ", V=" << dims.vaccines << ", T=" << dims.times
      << ", seed " << data_seed << ", " << n_observations << " observations per model)\n";
  const std::size_t first = 14;
  std::vector<std::size_t> width;
  for (const auto& c : columns) width.push_back(std::max<std::size_t>(10, column_title(c).size() + 2));
  out << std::left << std::setw(static_cast<int>(first)) << "";
  for (std::size_t n = 0; n < columns.size(); ++n)
    out << std::right << std::setw(static_cast<int>(width[n])) << column_title(columns[n]);
  out << '\n';
  for (const auto& [name, member] : kMetricRows) {
    out << std::left << std::setw(static_cast<int>(first)) << name;
    for (std::size_t n = 0; n < columns.size(); ++n)
      out << std::right << std::setw(static_cast<int>(width[n])) << fixed(columns[n].metrics.*member, 2);
    out << '\n';
  }
  for (const auto& c : columns)
    for (const auto& w : c.warnings) out << "warning: " << column_title(c) << ": " << w << '\n';
}

namespace {

struct FitOutcome {
  std::optional<Draws> draws;
  std::string warning;
};

FitOutcome fit(ModelKind kind, const ObservationSet& data, const ExperimentOptions& options, const std::string& tag) {
  FitOutcome out;
  try {
    out.draws = run_chains(kind, data, options.priors, options.chains);
    if (!options.chains.fixed_hyper) {
      const auto report = diagnose(*out.draws);
      if (!report.passed) {
        std::ostringstream s;
        s << tag << ": R-hat gate failed (max " << fixed(report.max_rhat, 3) << ")";
        out.warning = s.str();
      }
    }
  } catch (const Error& e) {
    out.draws.reset();
    out.warning = tag + ": fit failed: " + e.what();
  }
  return out;
}

}  // namespace

ExperimentReport run_experiment(const ScenarioSpec& scenario, const ExperimentOptions& options) {
  options.chains.validate();
  options.priors.validate();
  const auto data = generate_synthetic(options.dims, scenario, options.data_seed);
  const int T = options.dims.times;
  const int base = options.base_years.value_or(std::max(1, static_cast<int>(std::lround(T / 2.0))));
  if (options.forecast != ForecastMode::None && (base < 1 || base >= T))
    throw DomainError("base years must lie in [1, T)");

  ExperimentReport report;
  report.scenario = scenario.name;
  report.dims = options.dims;
  report.data_seed = options.data_seed;
  report.n_observations = data.idml.size();

  for (ModelKind kind : {ModelKind::BDSL, ModelKind::IDML}) {
    const auto& obs = data.observations(kind);
    const auto truth = data.truth(kind);

    MetricsColumn in;
    in.model = kind;
    in.horizon = "in-sample";
    auto full = fit(kind, obs, options, "full data");
    if (!full.warning.empty()) in.warnings.push_back(full.warning);
    if (full.draws) {
      in.metrics = validation_metrics(coverage_estimates(*full.draws, data.maps, std::nullopt), truth);
      in.fits = 1;
    }
    report.columns.push_back(std::move(in));
    if (options.forecast == ForecastMode::None) continue;

    std::vector<std::pair<int, int>> origins;  // (training years, steps)
    if (options.forecast == ForecastMode::Rolling) {
      for (int t0 = base; t0 + 1 <= T; ++t0) origins.emplace_back(t0, std::min(2, T - t0));
    } else {
      origins.emplace_back(base, T - base);
    }

    MetricsColumn one{kind, "one-step", {}, 0, {}};
    MetricsColumn two{kind, "two-step", {}, 0, {}};
    MetricsColumn ahead{kind, "forecast", {}, 0, {}};
    EstimateTable one_rows, two_rows, ahead_rows;
    for (const auto& [t0, steps] : origins) {
      const auto tag = "origin " + std::to_string(t0);
      auto train_maps = data.maps;
      train_maps.n_years = t0;
      auto result = fit(kind, obs.truncated(t0), options, tag);
      auto& col = options.forecast == ForecastMode::Rolling ? one : ahead;
      if (!result.warning.empty()) col.warnings.push_back(result.warning);
      if (!result.draws) continue;
      const auto table = predict_forward(*result.draws, train_maps, steps, options.chains.seed + static_cast<std::uint64_t>(t0),
                                         std::nullopt, false)
                             .summarize();
      for (const auto& r : table.rows) {
        const int step = r.year - data.maps.year(t0 - 1);
        if (options.forecast == ForecastMode::Once) ahead_rows.rows.push_back(r);
        else if (step == 1) one_rows.rows.push_back(r);
        else if (step == 2) two_rows.rows.push_back(r);
      }
      if (options.forecast == ForecastMode::Once) {
        ++ahead.fits;
      } else {
        ++one.fits;
        if (steps == 2) ++two.fits;
      }
    }
    auto finish = [&](MetricsColumn& col, const EstimateTable& rows) {
      if (!rows.rows.empty()) {
        try {
          col.metrics = validation_metrics(rows, truth);
        } catch (const DataError& e) {
          col.warnings.push_back(e.what());
        }
      }
      report.columns.push_back(std::move(col));
    };
    if (options.forecast == ForecastMode::Rolling) {
      finish(one, one_rows);
      finish(two, two_rows);
    } else {
      finish(ahead, ahead_rows);
    }
  }
  return report;
}

}  // namespace vaxcov
