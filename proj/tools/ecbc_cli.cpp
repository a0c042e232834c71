// ecbc: command-line front end.
//
// Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ecbc/ecbc.hpp"

namespace fs = std::filesystem;
using ecbc::Json;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::uint64_t seed = 0;
  unsigned threads = 0;
  std::string out = ".";
  std::string format;
};

// ---------------------------------------------------------------------------
// Flat key = value configuration files

using Config = std::map<std::string, std::string>;

Config read_config(const std::string& path, const std::vector<std::string>& allowed) {
  Config cfg;
  if (path.empty()) return cfg;
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file '" + path + "'");
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = ecbc::detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(path + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = ecbc::detail::trim(line.substr(0, eq));
    const std::string value = ecbc::detail::trim(line.substr(eq + 1));
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw UsageError(path + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    cfg[key] = value;
  }
  return cfg;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    item = ecbc::detail::trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used == v.size()) return x;
  } catch (const std::exception&) {
  }
  throw UsageError("config key '" + key + "': expected a number, got '" + v + "'");
}

long long to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long x = std::stoll(v, &used);
    if (used == v.size()) return x;
  } catch (const std::exception&) {
  }
  throw UsageError("config key '" + key + "': expected an integer, got '" + v + "'");
}

std::vector<double> to_doubles(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& item : split_list(v)) out.push_back(to_double(key, item));
  return out;
}

template <typename T>
T get_or(const Config& cfg, const std::string& key, T fallback) {
  const auto it = cfg.find(key);
  if (it == cfg.end()) return fallback;
  if constexpr (std::is_floating_point_v<T>) {
    return static_cast<T>(to_double(key, it->second));
  } else if constexpr (std::is_same_v<T, std::string>) {
    return it->second;
  } else {
    return static_cast<T>(to_int(key, it->second));
  }
}

void apply_mcmc_config(const Config& cfg, ecbc::McmcConfig& mcmc) {
  mcmc.chains = get_or(cfg, "mcmc.chains", mcmc.chains);
  mcmc.burn_in = get_or(cfg, "mcmc.burn_in", mcmc.burn_in);
  mcmc.samples_per_chain = get_or(cfg, "mcmc.samples", mcmc.samples_per_chain);
  mcmc.m_proposal_halfwidth = get_or(cfg, "mcmc.halfwidth", mcmc.m_proposal_halfwidth);
  mcmc.thin = get_or(cfg, "mcmc.thin", mcmc.thin);
}

const std::vector<std::string> kMcmcKeys{"mcmc.chains", "mcmc.burn_in", "mcmc.samples", "mcmc.halfwidth",
                                         "mcmc.thin"};

Json config_json(const Config& cfg) {
  Json j = Json::object();
  for (const auto& [k, v] : cfg) j[k] = v;
  return j;
}

Json mcmc_json(const ecbc::McmcConfig& m) {
  return Json{{"chains", m.chains},
              {"burn_in", m.burn_in},
              {"samples", m.samples_per_chain},
              {"halfwidth", m.m_proposal_halfwidth},
              {"thin", m.thin}};
}

// ---------------------------------------------------------------------------
// Output helpers

std::string resolve_format(const Globals& g, const std::string& fallback,
                           const std::vector<std::string>& supported) {
  const std::string f = g.format.empty() ? fallback : g.format;
  if (std::find(supported.begin(), supported.end(), f) == supported.end()) {
    throw UsageError("--format " + f + " is not supported by this command");
  }
  return f;
}

class Outputs {
 public:
  explicit Outputs(const Globals& g) : dir_(g.out) {}

  void add(const std::string& name, const std::string& content) {
    files_.emplace_back(name, content);
  }

  void commit(Json manifest) {
    fs::create_directories(dir_);
    Json names = Json::array();
    for (const auto& f : files_) names.push_back(f.first);
    manifest["outputs"] = names;
    ecbc::AtomicWriter writer;
    for (const auto& [name, content] : files_) writer.add(dir_ / name, content);
    writer.add(dir_ / "manifest.json", manifest.dump(2) + "\n");
    writer.commit();
  }

 private:
  fs::path dir_;
  std::vector<std::pair<std::string, std::string>> files_;
};

Json base_manifest(const std::string& command, const Globals& g) {
  Json m;
  m["tool"] = "ecbc";
  m["version"] = ECBC_VERSION;
  m["command"] = command;
  m["seed"] = g.seed;
  return m;
}

struct Summary {
  double mean, sd, q025, q25, median, q75, q975;
};

double quantile_sorted(const std::vector<double>& s, double p) {
  if (s.size() == 1) return s.front();
  const double h = p * static_cast<double>(s.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, s.size() - 1);
  return s[lo] + (h - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

Summary summarize(std::vector<double> x) {
  std::sort(x.begin(), x.end());
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  const double sd = x.size() > 1 ? std::sqrt(ss / static_cast<double>(x.size() - 1)) : 0.0;
  return {mean,
          sd,
          quantile_sorted(x, 0.025),
          quantile_sorted(x, 0.25),
          quantile_sorted(x, 0.5),
          quantile_sorted(x, 0.75),
          quantile_sorted(x, 0.975)};
}

Json summary_json(const Summary& s) {
  return Json{{"mean", s.mean}, {"sd", s.sd},         {"q025", s.q025}, {"q25", s.q25},
              {"median", s.median}, {"q75", s.q75}, {"q975", s.q975}};
}

// ---------------------------------------------------------------------------
// Commands

struct FitArgs {
  std::string data;
  std::string config;
  std::string prior = "flexible";
  std::string ties = "random";
  ecbc::McmcConfig mcmc{};
};

int cmd_fit(const Globals& g, FitArgs args) {
  const Config cfg = read_config(args.config, [] {
    auto keys = kMcmcKeys;
    keys.push_back("prior");
    keys.push_back("ties");
    return keys;
  }());
  apply_mcmc_config(cfg, args.mcmc);
  args.prior = get_or<std::string>(cfg, "prior", args.prior);
  args.ties = get_or<std::string>(cfg, "ties", args.ties);
  ecbc::PriorSpec prior;
  if (args.prior == "equal") {
    prior.kind = ecbc::PriorKind::equal;
  } else if (args.prior != "flexible") {
    throw UsageError("prior must be 'flexible' or 'equal'");
  }
  ecbc::TiePolicy ties = ecbc::TiePolicy::random_seeded;
  if (args.ties == "input") {
    ties = ecbc::TiePolicy::input_order;
  } else if (args.ties != "random") {
    throw UsageError("ties must be 'random' or 'input'");
  }

  const ecbc::NumericTable table = ecbc::load_numeric_csv(args.data);
  if (table.values.cols() < 2) throw ecbc::InvalidInput(args.data + ": need at least two columns");
  if (table.values.rows() < 2) throw ecbc::NumericalFailure("fit: the sampler needs at least two observations");
  const ecbc::RankMatrix ranks =
      ecbc::compute_ranks(ecbc::Dataset(table.values), ties, ecbc::derive_seed(g.seed, 1));
  ecbc::McmcConfig mcmc = args.mcmc;
  mcmc.seed = ecbc::derive_seed(g.seed, 2);
  mcmc.threads = g.threads;
  const ecbc::McmcTrace trace = ecbc::mcmc_run(ranks, prior, mcmc);
  const ecbc::DegreeEstimate est = ecbc::posterior_mode(trace);
  const ecbc::EcbcModel model(ranks, est.modes);

  Outputs out(g);
  out.add("model.json", ecbc::model_to_json(model).dump(2) + "\n");
  Json degrees = ecbc::degree_estimate_to_json(est);
  degrees["columns"] = table.header;
  out.add("degrees.json", degrees.dump(2) + "\n");
  std::ostringstream trace_csv;
  ecbc::write_trace_csv(trace_csv, trace);
  out.add("trace.csv", trace_csv.str());

  Json manifest = base_manifest("fit", g);
  manifest["inputs"] = {{"data", args.data}};
  manifest["config"] = config_json(cfg);
  manifest["prior"] = args.prior;
  manifest["ties"] = args.ties;
  manifest["mcmc"] = mcmc_json(mcmc);
  out.commit(manifest);

  std::cout << "n=" << model.n() << " d=" << model.d() << " degrees:";
  for (int m : model.degrees()) std::cout << ' ' << m;
  std::cout << "\n";
  return 0;
}

struct GridArgs {
  std::string model;
  int resolution = 51;
  std::vector<int> slice;
  std::vector<double> at;
};

int cmd_grid(const Globals& g, const GridArgs& args) {
  const std::string format = resolve_format(g, "csv", {"csv", "json"});
  const ecbc::EcbcModel model = ecbc::load_model(args.model);
  const std::size_t d = model.d();
  std::size_t a = 0;
  std::size_t b = 1;
  std::vector<double> point(d, 0.5);
  if (d > 2 || !args.slice.empty()) {
    if (args.slice.size() != 2) throw UsageError("grid: d > 2 requires --slice J1,J2 (1-based coordinates)");
    if (args.at.size() != d) throw UsageError("grid: --at must give all " + std::to_string(d) + " coordinates");
    a = static_cast<std::size_t>(args.slice[0] - 1);
    b = static_cast<std::size_t>(args.slice[1] - 1);
    if (args.slice[0] < 1 || args.slice[1] < 1 || a >= d || b >= d || a == b) {
      throw UsageError("grid: invalid --slice");
    }
    point = args.at;
  }
  if (args.resolution < 2) throw UsageError("grid: resolution must be >= 2");
  const int G = args.resolution;

  std::vector<double> u1, u2, cdf;
  std::vector<std::optional<double>> pdf;
  for (int r = 0; r < G; ++r) {
    for (int c = 0; c < G; ++c) {
      point[a] = static_cast<double>(r) / (G - 1);
      point[b] = static_cast<double>(c) / (G - 1);
      u1.push_back(point[a]);
      u2.push_back(point[b]);
      cdf.push_back(ecbc::ecbc_cdf(model, point));
      const bool interior = std::all_of(point.begin(), point.end(), [](double x) { return x > 0.0 && x < 1.0; });
      pdf.push_back(interior ? std::optional<double>(ecbc::ecbc_pdf(model, point)) : std::nullopt);
    }
  }

  Outputs out(g);
  if (format == "csv") {
    std::ostringstream s;
    s << "u1,u2,cdf,pdf\n";
    for (std::size_t k = 0; k < u1.size(); ++k) {
      s << ecbc::format_double(u1[k]) << ',' << ecbc::format_double(u2[k]) << ',' << ecbc::format_double(cdf[k])
        << ',' << (pdf[k] ? ecbc::format_double(*pdf[k]) : "NA") << '\n';
    }
    out.add("grid.csv", s.str());
  } else {
    Json j;
    j["u1"] = u1;
    j["u2"] = u2;
    j["cdf"] = cdf;
    Json p = Json::array();
    for (const auto& v : pdf) p.push_back(v ? Json(*v) : Json(nullptr));
    j["pdf"] = p;
    out.add("grid.json", j.dump(2) + "\n");
  }
  Json manifest = base_manifest("grid", g);
  manifest["inputs"] = {{"model", args.model}};
  manifest["resolution"] = G;
  if (!args.slice.empty()) {
    manifest["slice"] = args.slice;
    manifest["at"] = args.at;
  }
  out.commit(manifest);
  return 0;
}

int cmd_measure(const Globals& g, const std::string& model_path) {
  const std::string format = resolve_format(g, "json", {"csv", "json"});
  const ecbc::EcbcModel model = ecbc::load_model(model_path);
  const ecbc::DependenceReport rep = ecbc::dependence_report(model, ecbc::resolve_threads(g.threads));
  Outputs out(g);
  if (format == "json") {
    Json j;
    j["d"] = rep.d;
    j["rho_ecbc"] = rep.rho_ecbc;
    j["rho_empirical"] = rep.rho_empirical;
    j["tau_ecbc"] = rep.tau_ecbc ? Json(*rep.tau_ecbc) : Json(nullptr);
    if (!rep.tau_advisory.empty()) j["tau_advisory"] = rep.tau_advisory;
    j["rho_lower_bound"] = rep.rho_lower_bound;
    out.add("dependence.json", j.dump(2) + "\n");
  } else {
    std::ostringstream s;
    s << "measure,value\n";
    s << "d," << rep.d << '\n';
    s << "rho_ecbc," << ecbc::format_double(rep.rho_ecbc) << '\n';
    s << "rho_empirical," << ecbc::format_double(rep.rho_empirical) << '\n';
    s << "tau_ecbc," << (rep.tau_ecbc ? ecbc::format_double(*rep.tau_ecbc) : "NA") << '\n';
    s << "rho_lower_bound," << ecbc::format_double(rep.rho_lower_bound) << '\n';
    out.add("dependence.csv", s.str());
  }
  Json manifest = base_manifest("measure", g);
  manifest["inputs"] = {{"model", model_path}};
  out.commit(manifest);
  std::cout << "rho_ecbc=" << ecbc::format_double(rep.rho_ecbc) << "\n";
  return 0;
}

int cmd_sample(const Globals& g, const std::string& model_path, long long count, bool no_header) {
  resolve_format(g, "csv", {"csv"});
  if (count < 1) throw UsageError("sample: --count must be >= 1");
  const ecbc::EcbcModel model = ecbc::load_model(model_path);
  const ecbc::Matrix<double> draws =
      ecbc::sample_ecbc(model, static_cast<std::size_t>(count), ecbc::derive_seed(g.seed, 3),
                        ecbc::resolve_threads(g.threads));
  std::vector<std::string> header;
  if (!no_header) {
    for (std::size_t j = 0; j < model.d(); ++j) header.push_back("u_" + std::to_string(j + 1));
  }
  std::ostringstream s;
  ecbc::write_matrix_csv(s, draws, header);
  Outputs out(g);
  out.add("samples.csv", s.str());
  Json manifest = base_manifest("sample", g);
  manifest["inputs"] = {{"model", model_path}};
  manifest["count"] = count;
  manifest["header"] = !no_header;
  out.commit(manifest);
  return 0;
}

ecbc::CopulaSpec spec_from_config(const Config& cfg) {
  const auto family = ecbc::copula_family_from_string(get_or<std::string>(cfg, "copula", "independence"));
  const auto d = get_or<std::size_t>(cfg, "d", 2);
  const double theta = get_or(cfg, "theta", 0.0);
  auto correlation = [&]() {
    if (cfg.count("correlation")) {
      auto values = to_doubles("correlation", cfg.at("correlation"));
      const auto k = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(values.size()))));
      if (k * k != values.size()) throw UsageError("correlation must list a square matrix row by row");
      return ecbc::Matrix<double>(k, k, std::move(values));
    }
    if (cfg.count("rho")) {
      const double rho = get_or(cfg, "rho", 0.0);
      return ecbc::Matrix<double>(2, 2, std::vector<double>{1.0, rho, rho, 1.0});
    }
    throw UsageError("gaussian and student_t need 'rho' or 'correlation'");
  };
  switch (family) {
    case ecbc::CopulaFamily::frank: return ecbc::CopulaSpec::frank(theta);
    case ecbc::CopulaFamily::clayton: return ecbc::CopulaSpec::clayton(theta, d);
    case ecbc::CopulaFamily::gumbel: return ecbc::CopulaSpec::gumbel(theta);
    case ecbc::CopulaFamily::fgm: return ecbc::CopulaSpec::fgm(theta);
    case ecbc::CopulaFamily::independence: return ecbc::CopulaSpec::independence(d);
    case ecbc::CopulaFamily::asymmetric_sine: return ecbc::CopulaSpec::asymmetric_sine();
    case ecbc::CopulaFamily::gaussian: return ecbc::CopulaSpec::gaussian(correlation());
    case ecbc::CopulaFamily::student_t: return ecbc::CopulaSpec::student_t(correlation(), get_or(cfg, "df", 4.0));
  }
  throw UsageError("unsupported copula");
}

int cmd_benchmark(const Globals& g, const std::string& config_path) {
  const std::string format = resolve_format(g, "csv", {"csv", "json"});
  auto keys = kMcmcKeys;
  for (const char* k : {"copula", "theta", "rho", "correlation", "df", "d", "n", "replicates", "estimators",
                        "eval_points"}) {
    keys.emplace_back(k);
  }
  const Config cfg = read_config(config_path, keys);
  ecbc::BenchmarkConfig base;
  base.spec = spec_from_config(cfg);
  base.N = get_or(cfg, "replicates", 100);
  base.eval_points = get_or(cfg, "eval_points", 1000);
  base.seed = g.seed;
  base.threads = ecbc::resolve_threads(g.threads);
  apply_mcmc_config(cfg, base.mcmc);
  if (cfg.count("estimators")) {
    base.estimators.clear();
    for (const auto& name : split_list(cfg.at("estimators"))) {
      base.estimators.push_back(ecbc::estimator_from_string(name));
    }
  }
  std::vector<int> ns{100};
  if (cfg.count("n")) {
    ns.clear();
    for (const auto& v : split_list(cfg.at("n"))) ns.push_back(static_cast<int>(to_int("n", v)));
  }

  std::ostringstream csv;
  csv << "copula,estimator,n,ISB,IV,IMSE\n";
  Json rows = Json::array();
  const std::string label = ecbc::to_string(base.spec.family);
  for (int n : ns) {
    ecbc::BenchmarkConfig config = base;
    config.n = n;
    config.seed = ecbc::derive_seed(g.seed, static_cast<std::uint64_t>(n));
    const ecbc::BenchmarkResult result = ecbc::run_benchmark(config);
    for (const auto& [name, triple] : result.rows) {
      csv << label << ',' << name << ',' << n;
      Json row{{"copula", label}, {"estimator", name}, {"n", n}};
      if (triple) {
        for (double v : {triple->isb, triple->iv, triple->imse}) csv << ',' << ecbc::format_double(v * 1e4);
        row["isb"] = triple->isb;
        row["iv"] = triple->iv;
        row["imse"] = triple->imse;
        row["isb_se"] = triple->isb_se;
        row["iv_se"] = triple->iv_se;
        row["imse_se"] = triple->imse_se;
      } else {
        csv << ",NA,NA,NA";
        row["isb"] = nullptr;
        row["iv"] = nullptr;
        row["imse"] = nullptr;
      }
      csv << '\n';
      rows.push_back(row);
    }
  }
  Outputs out(g);
  if (format == "csv") {
    out.add("benchmark.csv", csv.str());
  } else {
    out.add("benchmark.json", Json{{"scale", "raw"}, {"rows", rows}}.dump(2) + "\n");
  }
  Json manifest = base_manifest("benchmark", g);
  manifest["inputs"] = {{"config", config_path}};
  manifest["config"] = config_json(cfg);
  manifest["mcmc"] = mcmc_json(base.mcmc);
  out.commit(manifest);
  return 0;
}

int cmd_portfolio(const Globals& g, const std::string& prices_path, const std::string& config_path) {
  resolve_format(g, "json", {"json"});
  auto keys = kMcmcKeys;
  for (const char* k : {"levels", "v_min", "M", "epsilon", "N", "prior", "target_return"}) keys.emplace_back(k);
  const Config cfg = read_config(config_path, keys);
  ecbc::PipelineConfig pc;
  if (cfg.count("levels")) pc.levels = to_doubles("levels", cfg.at("levels"));
  pc.v_min = get_or(cfg, "v_min", pc.v_min);
  pc.M = get_or<std::int64_t>(cfg, "M", pc.M);
  pc.epsilon = get_or(cfg, "epsilon", pc.epsilon);
  pc.N = get_or(cfg, "N", pc.N);
  apply_mcmc_config(cfg, pc.mcmc);
  const std::string prior = get_or<std::string>(cfg, "prior", "flexible");
  if (prior == "equal") {
    pc.prior.kind = ecbc::PriorKind::equal;
  } else if (prior != "flexible") {
    throw UsageError("prior must be 'flexible' or 'equal'");
  }
  if (cfg.count("target_return")) pc.target_return = get_or(cfg, "target_return", 0.0);
  pc.seed = g.seed;
  pc.threads = ecbc::resolve_threads(g.threads);

  const ecbc::ReturnSeries returns = ecbc::to_log_returns(ecbc::load_prices_csv(prices_path));
  if (static_cast<double>(returns.d()) * pc.v_min > 1.0 + 1e-12 || pc.v_min < 0.0) {
    throw ecbc::NumericalFailure("portfolio: LP infeasible, need 0 <= v_min <= 1/d");
  }
  const ecbc::PipelineResult res = ecbc::portfolio_pipeline(returns, pc);

  Json report;
  report["tickers"] = returns.tickers;
  report["T"] = returns.T();
  report["d"] = returns.d();
  report["degrees"] = res.model.degrees().values();
  report["lambda_max"] = res.lambda_max;
  report["M"] = res.M;
  report["N"] = pc.N;
  report["lil_epsilon"] = res.lil_epsilon;
  report["seed"] = g.seed;
  Json levels = Json::object();
  std::ostringstream reps;
  reps << "level,replicate,var,cvar";
  for (const auto& t : returns.tickers) reps << ",w_" << t;
  reps << '\n';
  for (const auto& lr : res.levels) {
    Json level;
    Json weights = Json::object();
    for (std::size_t j = 0; j < returns.d(); ++j) {
      std::vector<double> w;
      for (const auto& s : lr.replicates) w.push_back(s.weights[j]);
      weights[returns.tickers[j]] = summary_json(summarize(w));
    }
    level["weights"] = weights;
    std::vector<double> var, cvar;
    for (const auto& s : lr.replicates) {
      var.push_back(s.var);
      cvar.push_back(s.cvar);
    }
    level["var"] = summary_json(summarize(var));
    level["cvar"] = summary_json(summarize(cvar));
    Json hist_w = Json::object();
    for (std::size_t j = 0; j < returns.d(); ++j) hist_w[returns.tickers[j]] = lr.historical.weights[j];
    level["historical"] = {{"var", lr.historical.var}, {"cvar", lr.historical.cvar}, {"weights", hist_w}};
    levels[ecbc::format_double(lr.level)] = level;

    for (std::size_t r = 0; r < lr.replicates.size(); ++r) {
      const auto& s = lr.replicates[r];
      reps << ecbc::format_double(lr.level) << ',' << r << ',' << ecbc::format_double(s.var) << ','
           << ecbc::format_double(s.cvar);
      for (double w : s.weights) reps << ',' << ecbc::format_double(w);
      reps << '\n';
    }
  }
  report["levels"] = levels;
  report["degree_report"] = ecbc::degree_estimate_to_json(res.degrees);

  Outputs out(g);
  out.add("portfolio.json", report.dump(2) + "\n");
  out.add("replicates.csv", reps.str());
  Json manifest = base_manifest("portfolio", g);
  manifest["inputs"] = {{"prices", prices_path}, {"config", config_path}};
  manifest["config"] = config_json(cfg);
  manifest["mcmc"] = mcmc_json(pc.mcmc);
  out.commit(manifest);
  return 0;
}

const char* kConfigHelp = R"(Config files hold one 'key = value' per line; '#' starts a comment.
  benchmark keys: copula (frank|clayton|gumbel|fgm|gaussian|student_t|independence|asymmetric_sine),
    theta, rho, correlation (row-major list), df, d, n (list allowed), replicates, eval_points,
    estimators (list of ecbc_flexible, ecbc_equal, beta, bernstein_janssen)
  portfolio keys: levels (list), v_min, M (0 = smallest LIL-sufficient M for epsilon), epsilon, N,
    prior (flexible|equal), target_return
  fit keys: prior, ties (random|input)
  shared MCMC keys: mcmc.chains, mcmc.burn_in, mcmc.samples, mcmc.halfwidth, mcmc.thin)";

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Empirical checkerboard Bernstein copula toolkit"};
  app.footer(kConfigHelp);
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Base random seed")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads (0 = all cores)")->capture_default_str();
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  app.add_option("--format", g.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
  app.fallthrough();

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "Fit degrees by MCMC; writes model.json, degrees.json, trace.csv");
  fit_cmd->add_option("data", fit.data, "CSV of observations with a header row")->required();
  fit_cmd->add_option("--config", fit.config, "Config file");
  fit_cmd->add_option("--prior", fit.prior, "flexible or equal")->capture_default_str();
  fit_cmd->add_option("--ties", fit.ties, "random or input")->capture_default_str();
  fit_cmd->add_option("--chains", fit.mcmc.chains)->capture_default_str();
  fit_cmd->add_option("--burn-in", fit.mcmc.burn_in)->capture_default_str();
  fit_cmd->add_option("--samples", fit.mcmc.samples_per_chain, "Samples per chain")->capture_default_str();
  fit_cmd->add_option("--halfwidth", fit.mcmc.m_proposal_halfwidth, "Degree proposal halfwidth")
      ->capture_default_str();
  fit_cmd->add_option("--thin", fit.mcmc.thin)->capture_default_str();

  GridArgs grid;
  auto* grid_cmd = app.add_subcommand("grid", "Evaluate CDF and density on a G x G grid");
  grid_cmd->add_option("model", grid.model, "model.json")->required();
  grid_cmd->add_option("--resolution", grid.resolution, "Grid size G")->capture_default_str();
  grid_cmd->add_option("--slice", grid.slice, "Two 1-based coordinates to vary (d > 2)")->delimiter(',');
  grid_cmd->add_option("--at", grid.at, "Full point fixing the other coordinates (d > 2)")->delimiter(',');

  std::string measure_model;
  auto* measure_cmd = app.add_subcommand("measure", "Spearman's rho and Kendall's tau of a model");
  measure_cmd->add_option("model", measure_model, "model.json")->required();

  std::string sample_model;
  long long sample_count = 0;
  bool no_header = false;
  auto* sample_cmd = app.add_subcommand("sample", "Draw from a fitted model");
  sample_cmd->add_option("model", sample_model, "model.json")->required();
  sample_cmd->add_option("--count", sample_count, "Number of rows")->required();
  sample_cmd->add_flag("--no-header", no_header, "Omit the header row");

  std::string bench_config;
  auto* bench_cmd = app.add_subcommand("benchmark", "ISB / IV / IMSE simulation study");
  bench_cmd->add_option("config", bench_config, "Config file")->required();

  std::string prices_path;
  std::string portfolio_config;
  auto* portfolio_cmd = app.add_subcommand("portfolio", "Mean-CVaR portfolio from a price CSV");
  portfolio_cmd->add_option("prices", prices_path, "CSV: date,ticker_1,...,ticker_d")->required();
  portfolio_cmd->add_option("--config", portfolio_config, "Config file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*fit_cmd) return cmd_fit(g, fit);
    if (*grid_cmd) return cmd_grid(g, grid);
    if (*measure_cmd) return cmd_measure(g, measure_model);
    if (*sample_cmd) return cmd_sample(g, sample_model, sample_count, no_header);
    if (*bench_cmd) return cmd_benchmark(g, bench_config);
    if (*portfolio_cmd) return cmd_portfolio(g, prices_path, portfolio_config);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ecbc::NumericalFailure& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const ecbc::GuardExceeded& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
