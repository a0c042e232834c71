#pragma once

// Mean-CVaR portfolio selection on ECBC-simulated scenarios.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ecbc/bayes_degrees.hpp"
#include "ecbc/copula_core.hpp"
#include "ecbc/errors.hpp"
#include "ecbc/matrix.hpp"
#include "ecbc/parallel.hpp"
#include "ecbc/random.hpp"
#include "ecbc/sampling.hpp"
#include "ecbc/simplex.hpp"

namespace ecbc {

struct PriceTable {
  std::vector<std::string> dates;
  std::vector<std::string> tickers;
  Matrix<double> prices;  // rows x d
};

struct ReturnSeries {
  std::vector<std::string> dates;  // date of the closing price of each return
  std::vector<std::string> tickers;
  Matrix<double> returns;  // T x d

  std::size_t T() const { return returns.rows(); }
  std::size_t d() const { return returns.cols(); }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

inline std::optional<std::chrono::year_month_day> parse_iso_date(const std::string& s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
  for (std::size_t i : {0, 1, 2, 3, 5, 6, 8, 9}) {
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) return std::nullopt;
  }
  const std::chrono::year_month_day ymd{std::chrono::year(std::stoi(s.substr(0, 4))),
                                        std::chrono::month(static_cast<unsigned>(std::stoi(s.substr(5, 2)))),
                                        std::chrono::day(static_cast<unsigned>(std::stoi(s.substr(8, 2))))};
  if (!ymd.ok()) return std::nullopt;
  return ymd;
}

inline double parse_number(const std::string& text, std::size_t line, std::size_t column) {
  const std::string s = trim(text);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (s.empty() || used != s.size() || !std::isfinite(v)) {
    throw InvalidInput("line " + std::to_string(line) + ", column " + std::to_string(column) +
                       ": cannot parse number '" + s + "'");
  }
  return v;
}

}  // namespace detail

// Header: date,ticker_1,...,ticker_d; ISO dates strictly increasing; prices > 0.
inline PriceTable parse_prices_csv(std::istream& in) {
  PriceTable table;
  std::string line;
  std::size_t line_no = 0;
  std::vector<double> values;
  std::optional<std::chrono::year_month_day> previous;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_csv_line(line);
    if (table.tickers.empty()) {
      if (fields.size() < 2) throw InvalidInput("line 1: need a date column and at least one ticker");
      for (std::size_t c = 1; c < fields.size(); ++c) table.tickers.push_back(detail::trim(fields[c]));
      continue;
    }
    if (fields.size() != table.tickers.size() + 1) {
      throw InvalidInput("line " + std::to_string(line_no) + ": expected " +
                         std::to_string(table.tickers.size() + 1) + " fields, found " +
                         std::to_string(fields.size()));
    }
    const std::string date = detail::trim(fields[0]);
    const auto ymd = detail::parse_iso_date(date);
    if (!ymd) throw InvalidInput("line " + std::to_string(line_no) + ": unparseable date '" + date + "'");
    if (previous && std::chrono::sys_days(*ymd) <= std::chrono::sys_days(*previous)) {
      throw InvalidInput("line " + std::to_string(line_no) + ": dates must be strictly increasing");
    }
    previous = ymd;
    table.dates.push_back(date);
    for (std::size_t c = 1; c < fields.size(); ++c) {
      const double p = detail::parse_number(fields[c], line_no, c + 1);
      if (!(p > 0.0)) {
        throw InvalidInput("line " + std::to_string(line_no) + ", column " + std::to_string(c + 1) +
                           ": price must be positive");
      }
      values.push_back(p);
    }
  }
  if (table.tickers.empty()) throw InvalidInput("price file is empty");
  table.prices = Matrix<double>(table.dates.size(), table.tickers.size(), std::move(values));
  return table;
}

inline PriceTable load_prices_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open price file '" + path + "'");
  try {
    return parse_prices_csv(in);
  } catch (const InvalidInput& e) {
    throw InvalidInput(path + ": " + e.what());
  }
}

// X_tj = ln(P_tj / P_(t-1)j).
inline ReturnSeries to_log_returns(const PriceTable& prices) {
  const std::size_t rows = prices.prices.rows();
  if (rows < 3) throw InvalidInput("to_log_returns: need at least three prices per asset");
  ReturnSeries out;
  out.tickers = prices.tickers;
  out.dates.assign(prices.dates.begin() + 1, prices.dates.end());
  out.returns = Matrix<double>(rows - 1, prices.prices.cols());
  for (std::size_t t = 1; t < rows; ++t) {
    for (std::size_t j = 0; j < prices.prices.cols(); ++j) {
      out.returns(t - 1, j) = std::log(prices.prices(t, j) / prices.prices(t - 1, j));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scenario count and covariance

inline bool lil_condition(std::int64_t M, double target) {
  const double m = static_cast<double>(M);
  return m / std::log(std::log(m)) >= target;
}

// Smallest M >= 16 with M / ln ln M >= 2 lambda_max / epsilon^2. The left side
// increases for M >= 16, so doubling then bisection finds the boundary.
inline std::int64_t lil_sample_size(double epsilon, double lambda_max) {
  if (!(epsilon > 0.0) || !(lambda_max > 0.0)) throw InvalidInput("lil_sample_size: arguments must be positive");
  const double target = 2.0 * lambda_max / (epsilon * epsilon);
  std::int64_t lo = 16;
  if (lil_condition(lo, target)) return lo;
  std::int64_t hi = 32;
  while (!lil_condition(hi, target)) {
    lo = hi;
    if (hi > (std::int64_t{1} << 61)) throw InvalidInput("lil_sample_size: target too large");
    hi *= 2;
  }
  while (hi - lo > 1) {
    const std::int64_t mid = lo + (hi - lo) / 2;
    (lil_condition(mid, target) ? hi : lo) = mid;
  }
  return hi;
}

// Accuracy implied by M scenarios: sqrt(2 lambda_max ln ln M / M).
inline double lil_epsilon(std::int64_t M, double lambda_max) {
  const double m = static_cast<double>(M);
  return std::sqrt(2.0 * lambda_max * std::log(std::log(m)) / m);
}

inline Matrix<double> sample_covariance(const Matrix<double>& x) {
  const std::size_t T = x.rows();
  const std::size_t d = x.cols();
  std::vector<double> mean(d, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t j = 0; j < d; ++j) mean[j] += x(t, j);
  }
  for (double& m : mean) m /= static_cast<double>(T);
  Matrix<double> cov(d, d, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t a = 0; a < d; ++a) {
      for (std::size_t b = a; b < d; ++b) cov(a, b) += (x(t, a) - mean[a]) * (x(t, b) - mean[b]);
    }
  }
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = a; b < d; ++b) {
      cov(a, b) /= static_cast<double>(T) - 1.0;
      cov(b, a) = cov(a, b);
    }
  }
  return cov;
}

// Largest eigenvalue of the sample covariance by power iteration, stopped when
// the residual ||S x - lambda x|| drops below 1e-10 lambda.
inline double max_cov_eigenvalue(const Matrix<double>& returns) {
  const std::size_t T = returns.rows();
  const std::size_t d = returns.cols();
  if (T <= d) {
    throw InvalidInput("max_cov_eigenvalue: need more observations than assets (T > d); "
                       "high-dimensional covariance estimation is not supported");
  }
  const Matrix<double> cov = sample_covariance(returns);
  std::vector<double> x(d, 1.0 / std::sqrt(static_cast<double>(d)));
  // Perturb the start so it is not orthogonal to the top eigenvector by symmetry.
  for (std::size_t j = 0; j < d; ++j) x[j] += 1e-3 * static_cast<double>(j + 1) / static_cast<double>(d);
  std::vector<double> y(d);
  double lambda = 0.0;
  for (int it = 0; it < 100000; ++it) {
    double norm = 0.0;
    for (double v : x) norm += v * v;
    norm = std::sqrt(norm);
    if (norm == 0.0) return 0.0;
    for (double& v : x) v /= norm;
    for (std::size_t a = 0; a < d; ++a) {
      double s = 0.0;
      for (std::size_t b = 0; b < d; ++b) s += cov(a, b) * x[b];
      y[a] = s;
    }
    lambda = 0.0;
    for (std::size_t a = 0; a < d; ++a) lambda += x[a] * y[a];
    double residual = 0.0;
    for (std::size_t a = 0; a < d; ++a) residual += (y[a] - lambda * x[a]) * (y[a] - lambda * x[a]);
    if (std::sqrt(residual) <= 1e-10 * std::abs(lambda) || lambda == 0.0) return lambda;
    x = y;
  }
  throw NumericalFailure("max_cov_eigenvalue: power iteration did not converge");
}

inline double max_cov_eigenvalue(const ReturnSeries& returns) { return max_cov_eigenvalue(returns.returns); }

// ---------------------------------------------------------------------------
// CVaR linear program

struct CvarLp {
  Matrix<double> scenarios;  // M x d returns
  double alpha = 0.05;
  double v_min = 0.0;
  // Optional expected-return floor: mean_returns . v >= target_return.
  std::optional<double> target_return;
  std::vector<double> mean_returns;
};

struct PortfolioSolution {
  std::vector<double> weights;
  double var = 0.0;
  double cvar = 0.0;
  double level = 0.0;
  double duality_gap = 0.0;
};

struct VarCvar {
  double var;
  double cvar;
};

namespace detail {

inline std::size_t tail_count(double alpha, std::size_t M) {
  return static_cast<std::size_t>(std::floor(alpha * static_cast<double>(M) * (1.0 + 1e-12)));
}

}  // namespace detail

// For fixed weights: VaR is the left end of the minimizer set of
// H(gamma) = gamma + (1/(alpha M)) sum_k (L_k - gamma)^+, i.e. the
// (floor(alpha M) + 1)-th largest loss, and CVaR = H(VaR).
inline VarCvar var_cvar_fixed(const Matrix<double>& scenarios, std::span<const double> weights, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidInput("alpha must lie in (0, 1)");
  if (weights.size() != scenarios.cols()) throw InvalidInput("weight vector length mismatch");
  const std::size_t M = scenarios.rows();
  std::vector<double> loss(M);
  for (std::size_t k = 0; k < M; ++k) {
    double r = 0.0;
    for (std::size_t j = 0; j < weights.size(); ++j) r += weights[j] * scenarios(k, j);
    loss[k] = -r;
  }
  const std::size_t K = std::min(detail::tail_count(alpha, M), M - 1);
  std::nth_element(loss.begin(), loss.begin() + static_cast<std::ptrdiff_t>(K), loss.end(), std::greater<>());
  const double var = loss[K];
  double excess = 0.0;
  for (double l : loss) excess += std::max(0.0, l - var);
  return {var, var + excess / (alpha * static_cast<double>(M))};
}

// Solves
//   min_{v, gamma, z} gamma + (1/(alpha M)) sum_k z_k
//   s.t. z_k >= 0, z_k + v.x_k + gamma >= 0, sum v = 1, v >= v_min
// through its dual, which has only d + 1 equality rows:
//   max b.p + s mu [+ t eta]
//   s.t. sum_k x_kj p_k + mu [+ rbar_j eta] + slack_j = 0,  sum p = 1,
//        0 <= p_k <= 1/(alpha M), slack >= 0, mu free [, eta >= 0],
// with b_k = -v_min sum_j x_kj and s = 1 - d v_min. The primal weights are
// recovered from the row multipliers; certification compares the primal
// objective at the recovered weights with the dual optimum.
inline PortfolioSolution optimize_cvar(const CvarLp& lp) {
  const std::size_t M = lp.scenarios.rows();
  const std::size_t d = lp.scenarios.cols();
  if (M < 1 || d < 1) throw InvalidInput("optimize_cvar: empty scenario set");
  if (!(lp.alpha > 0.0 && lp.alpha < 1.0)) throw InvalidInput("optimize_cvar: alpha must lie in (0, 1)");
  if (!(lp.v_min >= 0.0) || static_cast<double>(d) * lp.v_min > 1.0 + 1e-12) {
    throw InvalidInput("optimize_cvar: infeasible weight floor (need 0 <= v_min <= 1/d)");
  }
  const bool has_target = lp.target_return.has_value();
  if (has_target && lp.mean_returns.size() != d) throw InvalidInput("optimize_cvar: mean_returns length mismatch");

  const double cap = 1.0 / (lp.alpha * static_cast<double>(M));
  const double budget = std::max(0.0, 1.0 - static_cast<double>(d) * lp.v_min);
  const std::size_t rows = d + 1;
  const std::size_t p0 = 0;
  const std::size_t mu = M;
  const std::size_t eta = M + 1;
  const std::size_t slack0 = has_target ? M + 2 : M + 1;
  const std::size_t vars = slack0 + d;

  BoundedLp dual;
  dual.columns = Matrix<double>(vars, rows, 0.0);
  dual.cost.assign(vars, 0.0);
  dual.lower.assign(vars, 0.0);
  dual.upper.assign(vars, kInf);
  dual.rhs.assign(rows, 0.0);
  dual.rhs[d] = 1.0;
  for (std::size_t k = 0; k < M; ++k) {
    double row_sum = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      dual.columns(p0 + k, j) = lp.scenarios(k, j);
      row_sum += lp.scenarios(k, j);
    }
    dual.columns(p0 + k, d) = 1.0;
    dual.cost[p0 + k] = lp.v_min * row_sum;  // negated b_k
    dual.upper[p0 + k] = cap;
  }
  for (std::size_t j = 0; j < d; ++j) dual.columns(mu, j) = 1.0;
  dual.cost[mu] = -budget;
  dual.lower[mu] = -kInf;
  if (has_target) {
    double floor_return = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      dual.columns(eta, j) = lp.mean_returns[j];
      floor_return += lp.v_min * lp.mean_returns[j];
    }
    dual.cost[eta] = -(*lp.target_return - floor_return);
  }
  for (std::size_t j = 0; j < d; ++j) dual.columns(slack0 + j, j) = 1.0;

  // Crash start: the floor(alpha M) worst scenarios of the equal-weight
  // portfolio at their cap.
  SimplexOptions options;
  options.start_at_upper.assign(vars, 0);
  {
    std::vector<std::pair<double, std::size_t>> loss(M);
    for (std::size_t k = 0; k < M; ++k) {
      double r = 0.0;
      for (std::size_t j = 0; j < d; ++j) r += lp.scenarios(k, j);
      loss[k] = {-r, k};
    }
    std::sort(loss.begin(), loss.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    const std::size_t K = std::min(detail::tail_count(lp.alpha, M), M);
    for (std::size_t t = 0; t < K; ++t) options.start_at_upper[p0 + loss[t].second] = 1;
  }

  const LpResult res = solve_bounded_simplex(dual, options);
  if (res.status == LpStatus::infeasible) {
    throw NumericalFailure("optimize_cvar: infeasible (the return target cannot be met)");
  }
  if (res.status != LpStatus::optimal) throw NumericalFailure("optimize_cvar: simplex did not reach optimality");

  PortfolioSolution sol;
  sol.level = lp.alpha;
  sol.weights.resize(d);
  double total = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    const double w = std::max(0.0, -res.duals[j]);
    sol.weights[j] = lp.v_min + w;
    total += sol.weights[j];
  }
  // Remove rounding drift from the budget constraint.
  const double excess = total - 1.0;
  if (std::abs(excess) > 1e-6) throw NumericalFailure("optimize_cvar: recovered weights violate the budget");
  if (budget > 0.0) {
    for (std::size_t j = 0; j < d; ++j) {
      sol.weights[j] -= excess * (sol.weights[j] - lp.v_min) / (total - static_cast<double>(d) * lp.v_min);
    }
  }
  const VarCvar vc = var_cvar_fixed(lp.scenarios, sol.weights, lp.alpha);
  sol.var = vc.var;
  sol.cvar = vc.cvar;
  const double dual_value = -res.objective;
  sol.duality_gap = std::abs(sol.cvar - dual_value);
  double scale = 1.0;
  for (double x : lp.scenarios.data()) scale = std::max(scale, std::abs(x));
  if (sol.duality_gap > 1e-7 * scale) {
    throw NumericalFailure("optimize_cvar: duality gap " + std::to_string(sol.duality_gap) + " exceeds tolerance");
  }
  return sol;
}

inline VarCvar empirical_var_cvar(const ReturnSeries& returns, std::span<const double> weights, double alpha) {
  return var_cvar_fixed(returns.returns, weights, alpha);
}

// ---------------------------------------------------------------------------
// Pipeline

// X* = X_(ceil(u (T+1))) with the order index clamped to [1, T].
inline double empirical_quantile(std::span<const double> sorted, double u) {
  const std::size_t T = sorted.size();
  const double pos = std::ceil(u * (static_cast<double>(T) + 1.0));
  const std::size_t idx = static_cast<std::size_t>(std::clamp(pos, 1.0, static_cast<double>(T)));
  return sorted[idx - 1];
}

struct PipelineConfig {
  std::vector<double> levels{0.10, 0.05, 0.01};
  double v_min = 0.01;
  // 0 selects the smallest M meeting the LIL bound for `epsilon`.
  std::int64_t M = 10000;
  double epsilon = 1e-3;
  int N = 100;
  McmcConfig mcmc{2, 1000, 2000, 0, 3, 1, 1, false};
  PriorSpec prior{};
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::optional<double> target_return;
};

struct LevelResult {
  double level = 0.0;
  std::vector<PortfolioSolution> replicates;
  PortfolioSolution historical;
};

struct PipelineResult {
  EcbcModel model;
  DegreeEstimate degrees;
  double lambda_max = 0.0;
  std::int64_t M = 0;
  double lil_epsilon = 0.0;
  std::vector<LevelResult> levels;
};

inline PipelineResult portfolio_pipeline(const ReturnSeries& returns, const PipelineConfig& config) {
  const std::size_t T = returns.T();
  const std::size_t d = returns.d();
  if (T <= d) throw InvalidInput("portfolio_pipeline: need more returns than assets");
  if (config.N < 1) throw InvalidInput("portfolio_pipeline: N must be >= 1");
  for (double a : config.levels) {
    if (!(a > 0.0 && a < 1.0)) throw InvalidInput("portfolio_pipeline: levels must lie in (0, 1)");
  }

  const double lambda_max = max_cov_eigenvalue(returns.returns);
  const std::int64_t M = config.M > 0 ? config.M : lil_sample_size(config.epsilon, lambda_max);

  // Step 1: ranks and posterior-mode degrees.
  const RankMatrix ranks = compute_ranks(Dataset(returns.returns), TiePolicy::random_seeded, derive_seed(config.seed, 1));
  McmcConfig mcmc = config.mcmc;
  mcmc.seed = derive_seed(config.seed, 2);
  mcmc.threads = config.threads;
  const McmcTrace trace = mcmc_run(ranks, config.prior, mcmc);
  DegreeEstimate degrees = posterior_mode(trace);
  EcbcModel model(ranks, degrees.modes);

  std::vector<std::vector<double>> sorted(d);
  std::vector<double> mean_returns(d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    sorted[j] = returns.returns.column(j);
    for (double x : sorted[j]) mean_returns[j] += x / static_cast<double>(T);
    std::sort(sorted[j].begin(), sorted[j].end());
  }
  auto make_lp = [&](Matrix<double> scenarios, double alpha) {
    CvarLp lp;
    lp.scenarios = std::move(scenarios);
    lp.alpha = alpha;
    lp.v_min = config.v_min;
    lp.target_return = config.target_return;
    if (config.target_return) lp.mean_returns = mean_returns;
    return lp;
  };

  PipelineResult result{model, std::move(degrees), lambda_max, M, lil_epsilon(M, lambda_max), {}};
  for (double a : config.levels) {
    LevelResult lr;
    lr.level = a;
    lr.replicates.resize(static_cast<std::size_t>(config.N));
    lr.historical = optimize_cvar(make_lp(returns.returns, a));
    result.levels.push_back(std::move(lr));
  }

  // Steps 2-3, repeated N times.
  parallel_for(static_cast<std::size_t>(config.N), config.threads, [&](std::size_t r) {
    Matrix<double> draws = sample_ecbc(model, static_cast<std::size_t>(M), derive_seed(config.seed, 100 + r));
    for (std::size_t k = 0; k < draws.rows(); ++k) {
      for (std::size_t j = 0; j < d; ++j) draws(k, j) = empirical_quantile(sorted[j], draws(k, j));
    }
    for (auto& lr : result.levels) lr.replicates[r] = optimize_cvar(make_lp(draws, lr.level));
  });
  return result;
}

}  // namespace ecbc
