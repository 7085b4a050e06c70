#include "vaxcov/cli.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <ostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "vaxcov/csv.hpp"
#include "vaxcov/diagnostics.hpp"
#include "vaxcov/errors.hpp"
#include "vaxcov/posterior.hpp"
#include "vaxcov/preprocess.hpp"

namespace vaxcov::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string forecast_name(ForecastMode mode) {
  switch (mode) {
    case ForecastMode::Rolling: return "rolling";
    case ForecastMode::Once: return "once";
    case ForecastMode::None: return "none";
  }
  return "rolling";
}

void check_keys(const json& j, const std::string& where, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw DomainError("config " + where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw DomainError("unknown config key: " + (where.empty() ? key : where + "." + key));
    }
  }
}

YearRange parse_years(const std::string& text) {
  const auto sep = text.find(':');
  if (sep == std::string::npos) throw DomainError("years must look like FIRST:LAST, got '" + text + "'");
  const auto first = csv::to_int(csv::trim(text.substr(0, sep)));
  const auto last = csv::to_int(csv::trim(text.substr(sep + 1)));
  if (!first || !last || *last < *first) throw DomainError("bad year range '" + text + "'");
  return {*first, *last};
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    auto t = csv::trim(item);
    if (!t.empty()) out.push_back(std::move(t));
  }
  return out;
}

std::map<std::string, std::string> parse_prior_flags(const std::vector<std::string>& items) {
  std::map<std::string, std::string> kv;
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw DomainError("prior override must be key=value, got '" + item + "'");
    auto key = csv::trim(item.substr(0, eq));
    if (!key.starts_with("prior.")) key = "prior." + key;
    kv[key] = csv::trim(item.substr(eq + 1));
  }
  return kv;
}

void write_json(const json& j, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write file: " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("error writing file: " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open file: " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string(), 0, e.what());
  }
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

std::vector<std::string> dataset_regions(const ICDataset& data) {
  std::set<std::string> regions;
  for (const auto& r : data.records()) regions.insert(r.region);
  return {regions.begin(), regions.end()};
}

}  // namespace

json RunConfig::to_json() const {
  json j;
  j["model"] = std::string(vaxcov::to_string(model));
  j["pooled"] = pooled;
  j["years"] = years ? json::array({years->first, years->last}) : json(nullptr);
  j["vaccine_order"] = vaccine_order;
  j["chains"] = {{"n_chains", chains.n_chains},     {"iterations", chains.iterations},
                 {"warmup", chains.warmup},         {"thin", chains.thin},
                 {"seed", chains.seed},             {"init_jitter", chains.init_jitter},
                 {"marginal_every", chains.marginal_every}, {"parallel", chains.parallel}};
  j["priors"] = priors.to_kv();
  j["preprocess"] = {{"vaccines", vaccines}, {"min_n", min_n}, {"drop_zero", drop_zero},
                     {"ratio", ratio},       {"recall", recall}};
  j["steps"] = steps;
  j["simulate"] = {{"scenario", scenario},
                   {"dims", json::array({dims.countries, dims.vaccines, dims.times})},
                   {"data_seeds", data_seeds},
                   {"forecast", forecast_name(forecast)},
                   {"base_years", base_years ? json(*base_years) : json(nullptr)}};
  return j;
}

RunConfig RunConfig::from_json(const json& j, RunConfig c) {
  try {
    check_keys(j, "", {"model", "pooled", "years", "vaccine_order", "chains", "priors", "preprocess", "steps",
                       "simulate"});
    if (j.contains("model")) c.model = parse_model_kind(j.at("model").get<std::string>());
    if (j.contains("pooled")) c.pooled = j.at("pooled").get<bool>();
    if (j.contains("years")) {
      const auto& y = j.at("years");
      if (y.is_null()) {
        c.years.reset();
      } else {
        if (!y.is_array() || y.size() != 2) throw DomainError("config years must be [first, last] or null");
        c.years = YearRange{y[0].get<int>(), y[1].get<int>()};
        if (c.years->last < c.years->first) throw DomainError("config years: last precedes first");
      }
    }
    if (j.contains("vaccine_order")) c.vaccine_order = j.at("vaccine_order").get<std::vector<std::string>>();
    if (j.contains("chains")) {
      const auto& ch = j.at("chains");
      check_keys(ch, "chains",
                 {"n_chains", "iterations", "warmup", "thin", "seed", "init_jitter", "marginal_every", "parallel"});
      if (ch.contains("n_chains")) c.chains.n_chains = ch.at("n_chains").get<int>();
      if (ch.contains("iterations")) c.chains.iterations = ch.at("iterations").get<int>();
      if (ch.contains("warmup")) c.chains.warmup = ch.at("warmup").get<int>();
      if (ch.contains("thin")) c.chains.thin = ch.at("thin").get<int>();
      if (ch.contains("seed")) c.chains.seed = ch.at("seed").get<std::uint64_t>();
      if (ch.contains("init_jitter")) c.chains.init_jitter = ch.at("init_jitter").get<double>();
      if (ch.contains("marginal_every")) c.chains.marginal_every = ch.at("marginal_every").get<int>();
      if (ch.contains("parallel")) c.chains.parallel = ch.at("parallel").get<bool>();
    }
    if (j.contains("priors")) {
      const auto& p = j.at("priors");
      if (!p.is_object()) throw DomainError("config priors must be an object");
      std::map<std::string, std::string> kv;
      for (const auto& [key, value] : p.items()) {
        const auto full = key.starts_with("prior.") ? key : "prior." + key;
        if (value.is_string()) {
          kv[full] = value.get<std::string>();
        } else if (value.is_null()) {
          kv[full] = "none";
        } else if (value.is_number()) {
          kv[full] = csv::format_double(value.get<double>());
        } else {
          throw DomainError("config priors." + key + " must be a number, string or null");
        }
      }
      c.priors = PriorConfig::from_kv(kv, c.priors);
    }
    if (j.contains("preprocess")) {
      const auto& p = j.at("preprocess");
      check_keys(p, "preprocess", {"vaccines", "min_n", "drop_zero", "ratio", "recall"});
      if (p.contains("vaccines")) c.vaccines = p.at("vaccines").get<std::vector<std::string>>();
      if (p.contains("min_n")) c.min_n = p.at("min_n").get<int>();
      if (p.contains("drop_zero")) c.drop_zero = p.at("drop_zero").get<bool>();
      if (p.contains("ratio")) c.ratio = p.at("ratio").get<bool>();
      if (p.contains("recall")) c.recall = p.at("recall").get<bool>();
    }
    if (j.contains("steps")) c.steps = j.at("steps").get<int>();
    if (j.contains("simulate")) {
      const auto& s = j.at("simulate");
      check_keys(s, "simulate", {"scenario", "dims", "data_seeds", "forecast", "base_years"});
      if (s.contains("scenario")) c.scenario = s.at("scenario").get<std::string>();
      if (s.contains("dims")) {
        const auto d = s.at("dims").get<std::vector<int>>();
        if (d.size() != 3) throw DomainError("config simulate.dims must be [countries, vaccines, times]");
        c.dims = {d[0], d[1], d[2]};
      }
      if (s.contains("data_seeds")) c.data_seeds = s.at("data_seeds").get<std::vector<std::uint64_t>>();
      if (s.contains("forecast")) c.forecast = parse_forecast_mode(s.at("forecast").get<std::string>());
      if (s.contains("base_years")) {
        const auto& b = s.at("base_years");
        c.base_years = b.is_null() ? std::nullopt : std::optional<int>(b.get<int>());
      }
    }
  } catch (const json::exception& e) {
    throw DomainError(std::string("bad config value: ") + e.what());
  }
  return c;
}

RunConfig RunConfig::from_json(const json& j) { return from_json(j, RunConfig{}); }

RunConfig RunConfig::load(const fs::path& path, RunConfig base) {
  const auto j = read_json(path);
  try {
    return from_json(j, std::move(base));
  } catch (const DomainError& e) {
    throw DomainError(path.string() + ": " + e.what());
  }
}

void RunConfig::save(const fs::path& path) const { write_json(to_json(), path); }

bool RunConfig::operator==(const RunConfig& other) const { return to_json() == other.to_json(); }

void write_observations_csv(const ObservationSet& data, const IndexMaps& maps, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write file: " + path.string());
  out << "country,vaccine,year,source,y\n";
  for (const auto& o : data.observations()) {
    out << csv::escape(maps.countries[o.country]) << ',' << csv::escape(maps.vaccines[o.vaccine]) << ','
        << maps.year(o.time) << ',' << vaxcov::to_string(o.source) << ',' << csv::format_double(o.y) << '\n';
  }
  if (!out) throw IoError("error writing file: " + path.string());
}

ObservationSet read_observations_csv(const fs::path& path, const IndexMaps& maps) {
  const auto table = csv::read_file(path);
  const auto src = path.string();
  std::array<std::size_t, 5> col{};
  const std::array<std::string_view, 5> names{"country", "vaccine", "year", "source", "y"};
  for (std::size_t k = 0; k < names.size(); ++k) {
    const auto c = table.column(names[k]);
    if (!c) throw ParseError(src, 1, "missing column " + std::string(names[k]));
    col[k] = *c;
  }
  std::vector<Observation> obs;
  obs.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const auto line = table.line_numbers[r];
    const auto i = maps.country_index(row[col[0]]);
    const auto j = maps.vaccine_index(row[col[1]]);
    const auto year = csv::to_int(row[col[2]]);
    const auto y = csv::to_double(row[col[4]]);
    if (!i) throw ParseError(src, line, "unknown country " + row[col[0]]);
    if (!j) throw ParseError(src, line, "unknown vaccine " + row[col[1]]);
    if (!year || *year < maps.first_year || *year >= maps.first_year + maps.n_years) {
      throw ParseError(src, line, "year outside the fitted range");
    }
    if (!y) throw ParseError(src, line, "bad value " + row[col[4]]);
    Observation o;
    o.country = *i;
    o.vaccine = *j;
    o.time = *year - maps.first_year;
    try {
      o.source = parse_source_kind(row[col[3]]);
    } catch (const Error& e) {
      throw ParseError(src, line, e.what());
    }
    o.y = *y;
    obs.push_back(o);
  }
  return ObservationSet(maps.dims(), std::move(obs));
}

std::vector<fs::path> fit_dirs(const fs::path& root) {
  std::vector<fs::path> dirs;
  std::error_code ec;
  if (fs::is_directory(root, ec)) {
    for (const auto& entry : fs::directory_iterator(root, ec)) {
      if (entry.is_directory() && fs::exists(entry.path() / "fit.json")) dirs.push_back(entry.path());
    }
  }
  if (dirs.empty()) throw IoError("no fit artifacts (*/fit.json) under " + root.string());
  std::sort(dirs.begin(), dirs.end());
  return dirs;
}

FitArtifact load_fit(const fs::path& dir) {
  const auto meta = read_json(dir / "fit.json");
  FitArtifact fit;
  fit.dir = dir;
  try {
    fit.region = meta.at("region").get<std::string>();
    fit.kind = parse_model_kind(meta.at("model").get<std::string>());
    fit.maps.countries = meta.at("countries").get<std::vector<std::string>>();
    fit.maps.regions = meta.at("regions").get<std::vector<std::string>>();
    fit.maps.vaccines = meta.at("vaccines").get<std::vector<std::string>>();
    fit.maps.first_year = meta.at("first_year").get<int>();
    fit.maps.n_years = meta.at("n_years").get<int>();
  } catch (const json::exception& e) {
    throw ParseError((dir / "fit.json").string(), 0, e.what());
  }
  fit.observations = read_observations_csv(dir / "observations.csv", fit.maps);
  fit.draws = read_draws_csv(dir / "draws.csv", fit.kind, fit.maps.dims());
  return fit;
}

namespace {

/// Options shared by several subcommands. Each registered option records how
/// it modifies a RunConfig; modifications run after the config file so flags
/// take precedence.
class Layer {
 public:
  template <typename T, typename F>
  CLI::Option* add(CLI::App* app, const std::string& name, const std::string& help, F apply) {
    auto value = std::make_shared<T>();
    auto* opt = app->add_option(name, *value, help);
    appliers_.push_back([opt, value, apply](RunConfig& c) {
      if (opt->count() > 0) apply(c, *value);
    });
    holders_.push_back(value);
    return opt;
  }

  CLI::Option* flag(CLI::App* app, const std::string& name, const std::string& help,
                    std::function<void(RunConfig&)> apply) {
    auto* opt = app->add_flag(name, help);
    appliers_.push_back([opt, apply](RunConfig& c) {
      if (opt->count() > 0) apply(c);
    });
    return opt;
  }

  void on(CLI::Option* opt, std::function<void(RunConfig&)> apply) {
    appliers_.push_back([opt, apply](RunConfig& c) {
      if (opt->count() > 0) apply(c);
    });
  }

  void apply(RunConfig& c) const {
    for (const auto& f : appliers_) f(c);
  }

 private:
  std::vector<std::function<void(RunConfig&)>> appliers_;
  std::vector<std::shared_ptr<void>> holders_;
};

struct Command {
  CLI::App* app = nullptr;
  Layer layer;
  std::string config_path;
  std::function<RunConfig()> defaults = [] { return RunConfig{}; };

  RunConfig resolve() const {
    RunConfig c = defaults();
    if (!config_path.empty()) c = RunConfig::load(config_path, std::move(c));
    layer.apply(c);
    return c;
  }
};

void add_config_option(Command& cmd) {
  cmd.app->add_option("--config", cmd.config_path, "JSON run configuration (flags override it)");
}

void add_chain_options(Command& cmd) {
  auto* app = cmd.app;
  auto& l = cmd.layer;
  l.add<std::string>(app, "--model", "bdsl or idml",
                     [](RunConfig& c, const std::string& v) { c.model = parse_model_kind(v); });
  l.add<int>(app, "--chains", "number of chains", [](RunConfig& c, int v) { c.chains.n_chains = v; });
  l.add<int>(app, "--iter", "iterations per chain, warmup included",
             [](RunConfig& c, int v) { c.chains.iterations = v; });
  l.add<int>(app, "--warmup", "warmup iterations", [](RunConfig& c, int v) { c.chains.warmup = v; });
  l.add<int>(app, "--thin", "thinning interval", [](RunConfig& c, int v) { c.chains.thin = v; });
  l.add<std::uint64_t>(app, "--seed", "random seed", [](RunConfig& c, std::uint64_t v) { c.chains.seed = v; });
  l.add<double>(app, "--init-jitter", "jitter of the starting values",
                [](RunConfig& c, double v) { c.chains.init_jitter = v; });
  l.add<int>(app, "--marginal-every", "sweeps between marginal hyperparameter updates (0 = never)",
             [](RunConfig& c, int v) { c.chains.marginal_every = v; });
  l.flag(app, "--serial", "run chains one after another", [](RunConfig& c) { c.chains.parallel = false; });
  l.add<std::vector<std::string>>(app, "--prior", "prior override, e.g. sigma3.scale=0.5 (repeatable)",
                                  [](RunConfig& c, const std::vector<std::string>& v) {
                                    c.priors = PriorConfig::from_kv(parse_prior_flags(v), c.priors);
                                  });
}

void add_years_option(Command& cmd) {
  cmd.layer.add<std::string>(cmd.app, "--years", "year range FIRST:LAST",
                             [](RunConfig& c, const std::string& v) { c.years = parse_years(v); });
}

// preprocess ---------------------------------------------------------------

struct PreprocessPaths {
  std::string admin, official, survey, columns, out;
};

void cmd_preprocess(const RunConfig& c, const PreprocessPaths& p, std::ostream& out) {
  if (p.admin.empty() && p.official.empty() && p.survey.empty()) {
    throw DomainError("preprocess needs at least one of --admin, --official, --survey");
  }
  const ColumnMap columns = p.columns.empty() ? ColumnMap{} : ColumnMap::from_file(p.columns);
  std::vector<ICDataset> sets;
  ProcessingReport report;
  std::size_t dropped = 0;
  auto take = [&](const std::string& path, ParsedFile file) {
    for (const auto& d : file.dropped) {
      report.add({"ingest", std::string(vaxcov::to_string(d.reason)),
                  path + ":" + std::to_string(d.line) + (d.detail.empty() ? "" : " " + d.detail), std::nullopt,
                  std::nullopt});
    }
    dropped += file.dropped.size();
    sets.push_back(std::move(file.data));
  };
  if (!p.admin.empty()) take(p.admin, parse_coverage_csv(p.admin, SourceKind::Admin, columns));
  if (!p.official.empty()) take(p.official, parse_coverage_csv(p.official, SourceKind::Official, columns));
  if (!p.survey.empty()) take(p.survey, parse_survey_csv(p.survey, columns));

  // First doses of the recall pairs are needed as inputs to the adjustment
  // even when they are not requested.
  const auto pairs = default_recall_pairs();
  auto merge_vaccines = c.vaccines;
  if (c.recall) {
    for (const auto& pair : pairs) {
      if (std::find(c.vaccines.begin(), c.vaccines.end(), pair.dose3) != c.vaccines.end()) {
        merge_vaccines.push_back(pair.dose1);
      }
    }
  }
  const YearRange years = c.years.value_or(YearRange{0, 9999});
  auto data = merge_and_filter(sets, merge_vaccines, years, c.drop_zero);
  if (c.recall) {
    data = recall_bias_adjust(data, pairs, &report);
  } else {
    report.add({"recall_bias", "skipped", "--no-recall", std::nullopt, std::nullopt});
  }
  data = select_survey_estimates(data, c.min_n, &report);
  {
    const std::set<std::string> wanted(c.vaccines.begin(), c.vaccines.end());
    std::vector<CoverageRecord> kept;
    for (const auto& r : data.records()) {
      if (wanted.contains(r.vaccine)) kept.push_back(r);
    }
    data = data.with_records(std::move(kept));
  }
  if (c.ratio) {
    data = apply_dtp_ratio(data, &report);
  } else {
    report.add({"dtp_ratio", "skipped", "--no-ratio", std::nullopt, std::nullopt});
  }
  data = clamp_coverage(data, &report);

  const fs::path dir(p.out);
  ensure_dir(dir);
  write_dataset_csv(data, dir / "dataset.csv");
  std::ofstream rep(dir / "report.tsv");
  if (!rep) throw IoError("cannot write file: " + (dir / "report.tsv").string());
  report.write(rep);
  out << "records " << data.size() << ", dropped rows " << dropped << ", report entries "
      << report.entries().size() << '\n';
  out << "wrote " << (dir / "dataset.csv").string() << " and " << (dir / "report.tsv").string() << '\n';
}

// fit ----------------------------------------------------------------------

std::vector<std::pair<std::string, ICDataset>> split_regions(const ICDataset& data, bool pooled) {
  if (pooled) return {{"all", data}};
  std::vector<std::pair<std::string, ICDataset>> parts;
  for (const auto& region : dataset_regions(data)) {
    std::vector<CoverageRecord> records;
    for (const auto& r : data.records()) {
      if (r.region == region) records.push_back(r);
    }
    parts.emplace_back(region, ICDataset(std::move(records), data.flags()));
  }
  return parts;
}

void cmd_fit(const RunConfig& c, const std::string& data_path, const std::string& out_dir, std::ostream& out,
             std::ostream& err) {
  c.chains.validate();
  c.priors.validate();
  const auto data = read_dataset_csv(data_path);
  if (data.empty()) throw DataError(data_path + ": no records");
  const fs::path root(out_dir);
  ensure_dir(root);
  c.save(root / "config.json");

  for (const auto& [region, part] : split_regions(data, c.pooled)) {
    const auto logit = clamp_and_logit(part, LogitOptions{c.years, c.vaccine_order});
    const auto draws = run_chains(c.model, logit.observations, c.priors, c.chains);
    const auto diag = diagnose(draws);

    const auto dir = root / region;
    ensure_dir(dir);
    write_draws_csv(draws, dir / "draws.csv");
    diag.write_csv(dir / "diagnostics.csv");
    write_estimates_csv(coverage_estimates(draws, logit.maps), dir / "estimates.csv");
    write_observations_csv(logit.observations, logit.maps, dir / "observations.csv");
    json meta;
    meta["region"] = region;
    meta["model"] = std::string(vaxcov::to_string(c.model));
    meta["countries"] = logit.maps.countries;
    meta["regions"] = logit.maps.regions;
    meta["vaccines"] = logit.maps.vaccines;
    meta["first_year"] = logit.maps.first_year;
    meta["n_years"] = logit.maps.n_years;
    meta["n_observations"] = logit.observations.size();
    meta["max_rhat"] = diag.max_rhat;
    meta["rhat_passed"] = diag.passed;
    write_json(meta, dir / "fit.json");

    out << region << ": " << logit.observations.size() << " observations, " << draws.total()
        << " draws, max R-hat " << csv::format_double(diag.max_rhat) << '\n';
    if (!diag.passed) {
      err << "warning: " << region << ": R-hat gate failed (max " << csv::format_double(diag.max_rhat)
          << " >= " << DiagnosticsReport::kRhatGate << ")\n";
    }
  }
}

// predict / aggregate / waic ----------------------------------------------

void append(EstimateTable& into, const EstimateTable& from) {
  into.rows.insert(into.rows.end(), from.rows.begin(), from.rows.end());
}

void cmd_predict(const RunConfig& c, const std::string& fit_root, const std::string& yovi_path,
                 const std::string& out_dir, std::ostream& out) {
  if (c.steps < 1) throw DomainError("--steps must be at least 1");
  EstimateTable all;
  for (const auto& dir : fit_dirs(fit_root)) {
    const auto fit = load_fit(dir);
    append(all, predict_forward(fit.draws, fit.maps, c.steps, c.chains.seed).summarize());
  }
  if (!yovi_path.empty()) {
    ProcessingReport report;
    all = yovi_filter(all, YoviTable::from_csv(yovi_path), &report);
    out << "yovi notes " << report.entries().size() << '\n';
  }
  const fs::path dir(out_dir);
  ensure_dir(dir);
  write_estimates_csv(all, dir / "predictions.csv");
  out << "wrote " << all.rows.size() << " rows to " << (dir / "predictions.csv").string() << '\n';
}

void cmd_aggregate(const RunConfig& c, const std::string& fit_root, const std::string& denominators,
                   const std::string& out_dir, std::ostream& out) {
  if (c.steps < 0) throw DomainError("--steps must be non-negative");
  const auto denoms = DenominatorTable::from_csv(denominators);
  EstimateTable all;
  for (const auto& dir : fit_dirs(fit_root)) {
    const auto fit = load_fit(dir);
    const auto national = c.steps > 0 ? predict_forward(fit.draws, fit.maps, c.steps, c.chains.seed)
                                      : coverage_draws(fit.draws, fit.maps);
    append(all, regional_aggregate(national, fit.maps.regions, denoms).summarize());
  }
  const fs::path dir(out_dir);
  ensure_dir(dir);
  write_estimates_csv(all, dir / "regional.csv", "region");
  out << "wrote " << all.rows.size() << " rows to " << (dir / "regional.csv").string() << '\n';
}

void cmd_waic(const std::string& fit_root, const std::string& out_dir, std::ostream& out) {
  const fs::path dir(out_dir);
  ensure_dir(dir);
  std::ofstream file(dir / "waic.csv");
  if (!file) throw IoError("cannot write file: " + (dir / "waic.csv").string());
  file << "region,model,lppd,gof,penalty,waic,n_obs,n_draws\n";
  for (const auto& d : fit_dirs(fit_root)) {
    const auto fit = load_fit(d);
    const auto w = waic(fit.draws, fit.observations);
    file << csv::escape(fit.region) << ',' << vaxcov::to_string(fit.kind) << ',' << csv::format_double(w.lppd)
         << ',' << csv::format_double(w.gof) << ',' << csv::format_double(w.penalty) << ','
         << csv::format_double(w.waic) << ',' << w.n_obs << ',' << w.n_draws << '\n';
    out << fit.region << ' ' << vaxcov::to_string(fit.kind) << ": gof " << w.gof << ", penalty " << w.penalty
        << ", waic " << w.waic << '\n';
  }
  if (!file) throw IoError("error writing file: " + (dir / "waic.csv").string());
}

// simulate -----------------------------------------------------------------

void cmd_simulate(const RunConfig& c, const std::string& out_dir, std::ostream& out) {
  const auto scenario = ScenarioSpec::parse(c.scenario);
  if (c.data_seeds.empty()) throw DomainError("simulate needs at least one data seed");
  const fs::path dir(out_dir);
  ensure_dir(dir);
  std::ofstream metrics(dir / "metrics.csv");
  std::ofstream text(dir / "report.txt");
  if (!metrics || !text) throw IoError("cannot write reports under " + dir.string());

  ExperimentOptions options;
  options.dims = c.dims;
  options.chains = c.chains;
  options.priors = c.priors;
  options.forecast = c.forecast;
  options.base_years = c.base_years;
  bool header = true;
  for (const auto seed : c.data_seeds) {
    options.data_seed = seed;
    const auto report = run_experiment(scenario, options);

    const auto tmp = dir / ("metrics." + std::to_string(seed) + ".tmp");
    report.write_csv(tmp);
    {
      std::ifstream in(tmp);
      std::string line;
      bool first = true;
      while (std::getline(in, line)) {
        if (first && !header) {
          first = false;
          continue;
        }
        first = false;
        metrics << line << '\n';
      }
    }
    fs::remove(tmp);
    header = false;

    std::ostringstream table;
    report.write_text(table);
    text << table.str() << '\n';
    out << table.str() << '\n';
  }
  if (!metrics || !text) throw IoError("error writing reports under " + dir.string());
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bayesian multi-source immunization coverage estimation", "vaxcov"};
  app.require_subcommand(1);

  // preprocess
  Command pre;
  pre.app = app.add_subcommand("preprocess", "ingest, bias-adjust and clamp the source files");
  PreprocessPaths paths;
  pre.app->add_option("--admin", paths.admin, "administrative coverage CSV");
  pre.app->add_option("--official", paths.official, "official coverage CSV");
  pre.app->add_option("--survey", paths.survey, "survey coverage CSV");
  pre.app->add_option("--columns", paths.columns, "column map (role=column lines)");
  pre.app->add_option("--out", paths.out, "output directory")->required();
  add_config_option(pre);
  add_years_option(pre);
  pre.layer.add<std::string>(pre.app, "--vaccines", "comma-separated vaccines to keep",
                             [](RunConfig& c, const std::string& v) { c.vaccines = split_list(v); });
  pre.layer.add<int>(pre.app, "--min-n", "minimum survey sample size", [](RunConfig& c, int v) { c.min_n = v; });
  pre.layer.flag(pre.app, "--keep-zero", "keep exact zero coverage", [](RunConfig& c) { c.drop_zero = false; });
  pre.layer.flag(pre.app, "--no-ratio", "skip the DTP3/DTP1 ratio", [](RunConfig& c) { c.ratio = false; });
  pre.layer.flag(pre.app, "--no-recall", "skip the recall-bias adjustment", [](RunConfig& c) { c.recall = false; });

  // fit
  Command fit;
  fit.app = app.add_subcommand("fit", "fit BDSL or IDML per region (or pooled)");
  std::string fit_data, fit_out;
  fit.app->add_option("--data", fit_data, "dataset CSV from preprocess")->required();
  fit.app->add_option("--out", fit_out, "output directory")->required();
  add_config_option(fit);
  add_chain_options(fit);
  add_years_option(fit);
  fit.layer.flag(fit.app, "--pooled", "fit all regions together", [](RunConfig& c) { c.pooled = true; });
  fit.layer.add<std::string>(fit.app, "--vaccine-order", "comma-separated vaccine index order",
                             [](RunConfig& c, const std::string& v) { c.vaccine_order = split_list(v); });

  // predict
  Command pred;
  pred.app = app.add_subcommand("predict", "extend fitted series forward in time");
  std::string pred_fit, pred_yovi, pred_out;
  pred.app->add_option("--fit", pred_fit, "fit output directory")->required();
  pred.app->add_option("--yovi", pred_yovi, "year of vaccine introduction CSV");
  pred.app->add_option("--out", pred_out, "output directory")->required();
  add_config_option(pred);
  pred.layer.add<int>(pred.app, "--steps", "years to predict", [](RunConfig& c, int v) { c.steps = v; });
  pred.layer.add<std::uint64_t>(pred.app, "--seed", "random seed",
                                [](RunConfig& c, std::uint64_t v) { c.chains.seed = v; });

  // aggregate
  Command agg;
  agg.app = app.add_subcommand("aggregate", "population-weighted regional coverage");
  std::string agg_fit, agg_den, agg_out;
  agg.app->add_option("--fit", agg_fit, "fit output directory")->required();
  agg.app->add_option("--denominators", agg_den, "target population CSV")->required();
  agg.app->add_option("--out", agg_out, "output directory")->required();
  add_config_option(agg);
  agg.defaults = [] {
    RunConfig c;
    c.steps = 0;
    return c;
  };
  agg.layer.add<int>(agg.app, "--steps", "also aggregate this many predicted years",
                     [](RunConfig& c, int v) { c.steps = v; });
  agg.layer.add<std::uint64_t>(agg.app, "--seed", "random seed for predicted years",
                               [](RunConfig& c, std::uint64_t v) { c.chains.seed = v; });

  // waic
  Command wa;
  wa.app = app.add_subcommand("waic", "WAIC of each fitted region");
  std::string wa_fit, wa_out;
  wa.app->add_option("--fit", wa_fit, "fit output directory")->required();
  wa.app->add_option("--out", wa_out, "output directory")->required();

  // simulate
  Command sim;
  sim.app = app.add_subcommand("simulate", "BDSL versus IDML simulation experiment");
  std::string sim_out;
  sim.app->add_option("--out", sim_out, "output directory")->required();
  add_config_option(sim);
  add_chain_options(sim);
  auto* full_flag = sim.app->add_flag("--full", "full study dimensions (20 x 5 x 20) and chain lengths");
  auto* desk_flag = sim.app->add_flag("--desk", "desk-scale dimensions (8 x 3 x 12), 1000 iterations (default)");
  full_flag->excludes(desk_flag);
  sim.defaults = [full_flag] {
    RunConfig c;
    c.priors = PriorConfig::simulation_study();
    if (full_flag->count() > 0) {
      c.dims = kStudyDims;
    } else {
      c.dims = kDeskDims;
      c.chains.iterations = 1000;
      c.chains.warmup = 500;
    }
    return c;
  };
  sim.layer.add<std::string>(sim.app, "--scenario", "1, 2, 3 or zero-noise",
                             [](RunConfig& c, const std::string& v) { c.scenario = v; });
  sim.layer.add<std::string>(sim.app, "--seeds", "comma-separated data seeds",
                             [](RunConfig& c, const std::string& v) {
                               c.data_seeds.clear();
                               for (const auto& s : split_list(v)) {
                                 const auto n = csv::to_uint64(s);
                                 if (!n) throw DomainError("bad seed '" + s + "'");
                                 c.data_seeds.push_back(*n);
                               }
                             });
  sim.layer.add<std::string>(sim.app, "--forecast", "rolling, once or none",
                             [](RunConfig& c, const std::string& v) { c.forecast = parse_forecast_mode(v); });
  sim.layer.add<int>(sim.app, "--base-years", "training years of the first forecast origin",
                     [](RunConfig& c, int v) { c.base_years = v; });
  sim.layer.on(full_flag, [](RunConfig& c) { c.dims = kStudyDims; });
  sim.layer.on(desk_flag, [](RunConfig& c) { c.dims = kDeskDims; });

  try {
    try {
      std::vector<std::string> args;
      for (int i = argc - 1; i >= 1; --i) args.emplace_back(argv[i]);
      app.parse(args);
    } catch (const CLI::CallForHelp&) {
      out << app.help();
      return kOk;
    } catch (const CLI::CallForAllHelp&) {
      out << app.help("", CLI::AppFormatMode::All);
      return kOk;
    } catch (const CLI::ParseError& e) {
      err << "error: " << e.what() << '\n';
      return kUserError;
    }

    if (pre.app->parsed()) {
      cmd_preprocess(pre.resolve(), paths, out);
    } else if (fit.app->parsed()) {
      cmd_fit(fit.resolve(), fit_data, fit_out, out, err);
    } else if (pred.app->parsed()) {
      cmd_predict(pred.resolve(), pred_fit, pred_yovi, pred_out, out);
    } else if (agg.app->parsed()) {
      cmd_aggregate(agg.resolve(), agg_fit, agg_den, agg_out, out);
    } else if (wa.app->parsed()) {
      cmd_waic(wa_fit, wa_out, out);
    } else if (sim.app->parsed()) {
      cmd_simulate(sim.resolve(), sim_out, out);
    }
  } catch (const NumericError& e) {
    err << "internal error: " << e.what() << '\n';
    return kInternalError;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kUserError;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kInternalError;
  }
  return kOk;
}

}  // namespace vaxcov::cli
