#pragma once

// Monte Carlo comparison of copula estimators: ISB / IV / IMSE against a
// reference copula, plus the comparator estimators (empirical beta copula and
// the empirical Bernstein copula with the Janssen pointwise degree).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "ecbc/bayes_degrees.hpp"
#include "ecbc/copula_core.hpp"
#include "ecbc/errors.hpp"
#include "ecbc/matrix.hpp"
#include "ecbc/parallel.hpp"
#include "ecbc/random.hpp"
#include "ecbc/reference_copula.hpp"
#include "ecbc/special.hpp"

namespace ecbc {

// (1/n) sum_i prod_j BetaCDF(u_j; R_ij, n + 1 - R_ij).
inline double beta_copula_cdf(const RankMatrix& ranks, std::span<const double> u) {
  detail::check_point(ranks.d(), u, false);
  const double n = static_cast<double>(ranks.n());
  double total = 0.0;
  for (std::size_t i = 0; i < ranks.n(); ++i) {
    double prod = 1.0;
    for (std::size_t j = 0; j < ranks.d() && prod != 0.0; ++j) {
      const double r = ranks(i, j);
      prod *= beta_cdf(u[j], r, n + 1.0 - r);
    }
    total += prod;
  }
  return total / n;
}

// Empirical Bernstein copula: Bernstein smoothing of the empirical copula on
// the grid {k / m}. Per coordinate the sum over k collapses to a binomial
// tail, since 1{R/(n+1) <= k/m} holds exactly for k >= ceil(m R / (n+1)).
inline double empirical_bernstein_cdf(const RankMatrix& ranks, const DegreeVector& degrees,
                                      std::span<const double> u) {
  detail::check_point(ranks.d(), u, false);
  if (degrees.size() != ranks.d()) throw InvalidInput("empirical_bernstein_cdf: degree length mismatch");
  const std::int64_t n1 = static_cast<std::int64_t>(ranks.n()) + 1;
  std::vector<std::vector<double>> tail(ranks.d());
  for (std::size_t j = 0; j < ranks.d(); ++j) {
    const int m = degrees[j];
    const std::vector<double> pmf = binomial_pmf(m, u[j]);
    tail[j].assign(static_cast<std::size_t>(m) + 2, 0.0);
    for (int k = m; k >= 0; --k) tail[j][k] = tail[j][k + 1] + pmf[k];
  }
  double total = 0.0;
  for (std::size_t i = 0; i < ranks.n(); ++i) {
    double prod = 1.0;
    for (std::size_t j = 0; j < ranks.d() && prod != 0.0; ++j) {
      const std::int64_t m = degrees[j];
      const std::int64_t k_min = (m * ranks(i, j) + n1 - 1) / n1;
      prod *= k_min > m ? 0.0 : tail[j][static_cast<std::size_t>(k_min)];
    }
    total += prod;
  }
  return total / static_cast<double>(ranks.n());
}

inline constexpr double kJanssenStep = 1e-5;
inline constexpr int kJanssenMaxDegree = 1000000;

// floor((4 b^2 / V)^(2/3) n^(2/3)) with
//   b = (1/2) sum_j u_j (1 - u_j) C_jj,
//   V = sum_j C_j (1 - C_j) sqrt(u_j (1 - u_j) / pi),
// partial derivatives by central differences on the reference CDF.
inline int janssen_m0(const CopulaSpec& spec, std::span<const double> u, int n) {
  if (spec.d != 2) throw InvalidInput("janssen_m0: bivariate copulas only");
  if (u.size() != 2 || !(u[0] > 0.0 && u[0] < 1.0 && u[1] > 0.0 && u[1] < 1.0)) {
    throw DomainError("janssen_m0: point must lie in the open unit square");
  }
  const double h = kJanssenStep;
  const double c0 = cdf_reference(spec, u);
  double b = 0.0;
  double v = 0.0;
  for (std::size_t j = 0; j < 2; ++j) {
    std::array<double, 2> up{u[0], u[1]};
    std::array<double, 2> dn{u[0], u[1]};
    up[j] += h;
    dn[j] -= h;
    const double cu = cdf_reference(spec, up);
    const double cd = cdf_reference(spec, dn);
    const double first = (cu - cd) / (2.0 * h);
    const double second = (cu - 2.0 * c0 + cd) / (h * h);
    const double w = u[j] * (1.0 - u[j]);
    b += 0.5 * w * second;
    v += first * (1.0 - first) * std::sqrt(w / std::numbers::pi);
  }
  const double b2 = b * b;
  if (b2 < 1e-12) throw DomainError("janssen_m0: degree undefined (vanishing second partials)");
  if (!(v > 0.0)) throw DomainError("janssen_m0: degree undefined (vanishing variance term)");
  const double m0 = std::floor(std::pow(4.0 * b2 / v, 2.0 / 3.0) * std::pow(static_cast<double>(n), 2.0 / 3.0));
  return static_cast<int>(std::clamp(m0, 1.0, static_cast<double>(kJanssenMaxDegree)));
}

inline double bernstein_janssen_cdf(const RankMatrix& ranks, const CopulaSpec& spec, std::span<const double> u,
                                    int n) {
  const int m = janssen_m0(spec, u, n);
  return empirical_bernstein_cdf(ranks, DegreeVector({m, m}), u);
}

// ---------------------------------------------------------------------------
// Benchmark protocol

enum class EstimatorKind { ecbc_flexible, ecbc_equal, beta, bernstein_janssen };

inline std::string to_string(EstimatorKind e) {
  switch (e) {
    case EstimatorKind::ecbc_flexible: return "ecbc_flexible";
    case EstimatorKind::ecbc_equal: return "ecbc_equal";
    case EstimatorKind::beta: return "beta";
    case EstimatorKind::bernstein_janssen: return "bernstein_janssen";
  }
  return "unknown";
}

inline EstimatorKind estimator_from_string(const std::string& name) {
  for (auto e : {EstimatorKind::ecbc_flexible, EstimatorKind::ecbc_equal, EstimatorKind::beta,
                 EstimatorKind::bernstein_janssen}) {
    if (to_string(e) == name) return e;
  }
  throw InvalidInput("unknown estimator '" + name + "'");
}

struct PerformanceTriple {
  double isb = 0.0;
  double iv = 0.0;
  double imse = 0.0;
  // Standard errors of the averages over evaluation points.
  double isb_se = 0.0;
  double iv_se = 0.0;
  double imse_se = 0.0;
};

// Values of a fitted estimator at every evaluation point, or nullopt when the
// estimator does not apply (reported as NA).
using Estimator = std::function<std::optional<std::vector<double>>(
    const RankMatrix& ranks, const Matrix<double>& points, std::uint64_t seed)>;

struct BenchmarkConfig {
  CopulaSpec spec;
  int n = 100;
  int N = 100;
  std::vector<EstimatorKind> estimators{EstimatorKind::ecbc_flexible, EstimatorKind::ecbc_equal,
                                        EstimatorKind::beta, EstimatorKind::bernstein_janssen};
  int eval_points = 1000;
  std::uint64_t seed = 0;
  McmcConfig mcmc{};
  unsigned threads = 1;

  void validate() const {
    spec.validate();
    if (n < 2) throw InvalidInput("BenchmarkConfig: n must be >= 2");
    if (N < 2) throw InvalidInput("BenchmarkConfig: N must be >= 2");
    if (eval_points < 100) throw InvalidInput("BenchmarkConfig: eval_points must be >= 100");
    mcmc.validate();
  }
};

struct BenchmarkResult {
  // Entry absent (nullopt) when the estimator was not applicable.
  std::vector<std::pair<std::string, std::optional<PerformanceTriple>>> rows;

  const std::optional<PerformanceTriple>* find(const std::string& name) const {
    for (const auto& [key, value] : rows) {
      if (key == name) return &value;
    }
    return nullptr;
  }
};

inline Estimator make_estimator(EstimatorKind kind, const CopulaSpec& spec, const McmcConfig& mcmc) {
  switch (kind) {
    case EstimatorKind::ecbc_flexible:
    case EstimatorKind::ecbc_equal: {
      PriorSpec prior;
      prior.kind = kind == EstimatorKind::ecbc_flexible ? PriorKind::flexible : PriorKind::equal;
      return [prior, mcmc](const RankMatrix& ranks, const Matrix<double>& points,
                           std::uint64_t seed) -> std::optional<std::vector<double>> {
        McmcConfig cfg = mcmc;
        cfg.seed = seed;
        cfg.threads = 1;
        const EcbcModel model = fit_ecbc(ranks, prior, cfg);
        std::vector<double> out(points.rows());
        for (std::size_t q = 0; q < points.rows(); ++q) out[q] = ecbc_cdf(model, points.row(q));
        return out;
      };
    }
    case EstimatorKind::beta:
      return [](const RankMatrix& ranks, const Matrix<double>& points,
                std::uint64_t) -> std::optional<std::vector<double>> {
        std::vector<double> out(points.rows());
        for (std::size_t q = 0; q < points.rows(); ++q) out[q] = beta_copula_cdf(ranks, points.row(q));
        return out;
      };
    case EstimatorKind::bernstein_janssen: {
      // Degrees depend only on the reference copula and n: compute lazily once.
      auto degrees = std::make_shared<std::optional<std::vector<int>>>();
      auto undefined = std::make_shared<bool>(false);
      auto mutex = std::make_shared<std::mutex>();
      return [spec, degrees, undefined, mutex](const RankMatrix& ranks, const Matrix<double>& points,
                                               std::uint64_t) -> std::optional<std::vector<double>> {
        if (spec.d != 2 || spec.family == CopulaFamily::independence) return std::nullopt;
        {
          std::lock_guard lock(*mutex);
          if (!*degrees && !*undefined) {
            try {
              std::vector<int> m(points.rows());
              for (std::size_t q = 0; q < points.rows(); ++q) {
                m[q] = janssen_m0(spec, points.row(q), static_cast<int>(ranks.n()));
              }
              *degrees = std::move(m);
            } catch (const DomainError&) {
              *undefined = true;
            }
          }
          if (*undefined) return std::nullopt;
        }
        const std::vector<int>& m = **degrees;
        std::vector<double> out(points.rows());
        for (std::size_t q = 0; q < points.rows(); ++q) {
          out[q] = empirical_bernstein_cdf(ranks, DegreeVector({m[q], m[q]}), points.row(q));
        }
        return out;
      };
    }
  }
  throw InvalidInput("make_estimator: unknown estimator");
}

// ISB / IV / IMSE from replicate values (N x Q) and truth (Q). IV uses the
// 1/N variance so that IMSE = ISB + IV holds exactly.
inline PerformanceTriple performance_triple(const Matrix<double>& values, std::span<const double> truth) {
  const std::size_t N = values.rows();
  const std::size_t Q = values.cols();
  std::vector<double> sb(Q), v(Q), mse(Q);
  for (std::size_t q = 0; q < Q; ++q) {
    double mean = 0.0;
    for (std::size_t r = 0; r < N; ++r) mean += values(r, q);
    mean /= static_cast<double>(N);
    double var = 0.0;
    double err = 0.0;
    for (std::size_t r = 0; r < N; ++r) {
      var += (values(r, q) - mean) * (values(r, q) - mean);
      err += (values(r, q) - truth[q]) * (values(r, q) - truth[q]);
    }
    sb[q] = (mean - truth[q]) * (mean - truth[q]);
    v[q] = var / static_cast<double>(N);
    mse[q] = err / static_cast<double>(N);
  }
  auto mean_se = [Q](const std::vector<double>& x) {
    double s = 0.0;
    double s2 = 0.0;
    for (double a : x) {
      s += a;
      s2 += a * a;
    }
    const double m = s / static_cast<double>(Q);
    const double var = std::max(0.0, (s2 - static_cast<double>(Q) * m * m) / (static_cast<double>(Q) - 1.0));
    return std::pair{m, std::sqrt(var / static_cast<double>(Q))};
  };
  PerformanceTriple t;
  std::tie(t.isb, t.isb_se) = mean_se(sb);
  std::tie(t.iv, t.iv_se) = mean_se(v);
  std::tie(t.imse, t.imse_se) = mean_se(mse);
  return t;
}

inline Matrix<double> benchmark_points(std::size_t Q, std::size_t d, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x9E0B));
  Matrix<double> points(Q, d);
  for (double& x : points.data()) x = uniform_open(rng);
  return points;
}

// Generic protocol with caller-supplied estimators. Replicates are run in
// parallel; replicate r uses seeds derived from (seed, r) only.
inline BenchmarkResult run_benchmark(const CopulaSpec& spec, int n, int N, int eval_points, std::uint64_t seed,
                                     const std::vector<std::pair<std::string, Estimator>>& estimators,
                                     unsigned threads = 1) {
  const Matrix<double> points = benchmark_points(static_cast<std::size_t>(eval_points), spec.d, seed);
  std::vector<double> truth(points.rows());
  for (std::size_t q = 0; q < points.rows(); ++q) truth[q] = cdf_reference(spec, points.row(q));

  const std::size_t E = estimators.size();
  std::vector<Matrix<double>> values(E, Matrix<double>(static_cast<std::size_t>(N), points.rows()));
  std::vector<std::vector<char>> missing(E, std::vector<char>(static_cast<std::size_t>(N), 0));
  parallel_for(static_cast<std::size_t>(N), threads, [&](std::size_t r) {
    const std::uint64_t rep_seed = derive_seed(seed, r);
    const Matrix<double> sample = sample_reference(spec, static_cast<std::size_t>(n), derive_seed(rep_seed, 0));
    const RankMatrix ranks = compute_ranks(Dataset(sample), TiePolicy::random_seeded, derive_seed(rep_seed, 1));
    for (std::size_t e = 0; e < E; ++e) {
      const auto out = estimators[e].second(ranks, points, derive_seed(rep_seed, 2 + e));
      if (!out) {
        missing[e][r] = 1;
        continue;
      }
      std::copy(out->begin(), out->end(), values[e].row(r).begin());
    }
  });

  BenchmarkResult result;
  for (std::size_t e = 0; e < E; ++e) {
    bool absent = false;
    for (char c : missing[e]) absent = absent || c;
    if (absent) {
      result.rows.emplace_back(estimators[e].first, std::nullopt);
    } else {
      result.rows.emplace_back(estimators[e].first, performance_triple(values[e], truth));
    }
  }
  return result;
}

inline BenchmarkResult run_benchmark(const BenchmarkConfig& config) {
  config.validate();
  std::vector<std::pair<std::string, Estimator>> estimators;
  for (EstimatorKind kind : config.estimators) {
    estimators.emplace_back(to_string(kind), make_estimator(kind, config.spec, config.mcmc));
  }
  return run_benchmark(config.spec, config.n, config.N, config.eval_points, config.seed, estimators,
                       config.threads);
}

}  // namespace ecbc
