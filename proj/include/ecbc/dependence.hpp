#pragma once

// Multivariate Spearman's rho and Kendall's tau of a fitted ECBC, and the
// empirical-copula comparator.

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ecbc/copula_core.hpp"
#include "ecbc/errors.hpp"
#include "ecbc/parallel.hpp"
#include "ecbc/sampling.hpp"
#include "ecbc/special.hpp"

namespace ecbc {

struct RhoBounds {
  double lower;
  double upper;
};

// lower = (2^d - (d+1)!) / (d! (2^d - d - 1)).
inline RhoBounds rho_bounds(int d) {
  if (d < 2) throw InvalidInput("rho_bounds: d must be >= 2");
  double fact = 1.0;
  for (int k = 2; k <= d; ++k) fact *= k;
  const double two_d = std::ldexp(1.0, d);
  return {(two_d - fact * (d + 1)) / (fact * (two_d - d - 1)), 1.0};
}

namespace detail {

inline double rho_scale(std::size_t d) {
  const double two_d = std::ldexp(1.0, static_cast<int>(d));
  return (static_cast<double>(d) + 1.0) / (two_d - static_cast<double>(d) - 1.0);
}

}  // namespace detail

// Uses C(m, k) B(k+1, m-k+1) = 1/(m+1), so the integral of each Bernstein
// factor is the average of the ramp g over k = 0..m.
inline double spearman_rho_ecbc(const EcbcModel& model) {
  const int n = static_cast<int>(model.n());
  const std::size_t d = model.d();
  double total = 0.0;
  for (std::size_t i = 0; i < model.n(); ++i) {
    double prod = 1.0;
    for (std::size_t j = 0; j < d; ++j) {
      const int m = model.degrees()[j];
      const int r = model.ranks()(i, j);
      const CellWeights cw = cell_weights(r, m, n);
      // g = 0 up to cw.first, rises over the support, then stays at 1.
      double sum = static_cast<double>(m - cw.last());
      for (int k = cw.first + 1; k <= cw.last(); ++k) sum += ramp_value(r, m, n, k);
      prod *= sum / (m + 1.0);
    }
    total += prod;
  }
  const double two_d = std::ldexp(1.0, static_cast<int>(d));
  return detail::rho_scale(d) * (two_d * total / n - 1.0);
}

inline double spearman_rho_empirical(const RankMatrix& ranks) {
  const std::size_t d = ranks.d();
  const double scale = 1.0 / (static_cast<double>(ranks.n()) + 1.0);
  double total = 0.0;
  for (std::size_t i = 0; i < ranks.n(); ++i) {
    double prod = 1.0;
    for (std::size_t j = 0; j < d; ++j) prod *= 1.0 - ranks(i, j) * scale;
    total += prod;
  }
  const double two_d = std::ldexp(1.0, static_cast<int>(d));
  return detail::rho_scale(d) * (two_d * total / static_cast<double>(ranks.n()) - 1.0);
}

inline constexpr double kTauGuard = 1e10;

inline bool kendall_tau_feasible(const EcbcModel& model) {
  double m2 = 0.0;
  for (int m : model.degrees()) m2 += static_cast<double>(m) * m;
  const double n = static_cast<double>(model.n());
  return n * n * m2 <= kTauGuard;
}

// tau = (2^d int C dC - 1) / (2^(d-1) - 1), with
// int C dC = (1/n^2) sum_{i,i'} prod_j A_j(i, i') and
// A_j(i, i') = sum_k sum_l h_ij(k) g_i'j(l) K_j(k, l),
// K(k, l) = m C(m-1, k) C(m, l) B(k+l+1, 2m-k-l).
// Per coordinate q_ij(l) = sum_k h_ij(k) K(k, l) is tabulated once, after
// which each pair costs one pass over the rising part of g_i'j.
inline double kendall_tau_ecbc(const EcbcModel& model, unsigned threads = 1) {
  if (!kendall_tau_feasible(model)) {
    throw GuardExceeded(
        "kendall_tau_ecbc: n^2 * sum(m_j^2) exceeds 1e10; estimate tau by Monte Carlo "
        "(mc_expectation) or reduce the degrees");
  }
  const int n = static_cast<int>(model.n());
  const std::size_t d = model.d();
  const std::size_t nn = model.n();

  struct Coord {
    std::vector<CellWeights> cells;   // per rank
    Matrix<double> q_suffix;          // per rank a: suffix sums of q over l, width m+2
    Matrix<double> q;                 // per rank a: q(l), l = 0..m
  };
  std::vector<Coord> coords(d);
  for (std::size_t j = 0; j < d; ++j) {
    const int m = model.degrees()[j];
    Coord& c = coords[j];
    c.cells.resize(nn);
    for (int r = 1; r <= n; ++r) c.cells[r - 1] = cell_weights(r, m, n);
    c.q = Matrix<double>(nn, static_cast<std::size_t>(m) + 1, 0.0);
    c.q_suffix = Matrix<double>(nn, static_cast<std::size_t>(m) + 2, 0.0);
    const double log_m = std::log(static_cast<double>(m));
    for (std::size_t a = 0; a < nn; ++a) {
      const CellWeights& cw = c.cells[a];
      for (int l = 0; l <= m; ++l) {
        double acc = 0.0;
        for (std::size_t t = 0; t < cw.weights.size(); ++t) {
          const int k = cw.first + static_cast<int>(t);
          acc += cw.weights[t] * std::exp(log_m + log_choose(m - 1, k) + log_choose(m, l) +
                                          log_beta_int(k + l + 1, 2 * m - k - l));
        }
        c.q(a, l) = acc;
      }
      for (int l = m; l >= 0; --l) c.q_suffix(a, l) = c.q_suffix(a, l + 1) + c.q(a, l);
    }
  }

  std::vector<double> row_sums(nn, 0.0);
  parallel_for(nn, threads, [&](std::size_t i) {
    double sum = 0.0;
    for (std::size_t ip = 0; ip < nn; ++ip) {
      double prod = 1.0;
      for (std::size_t j = 0; j < d && prod != 0.0; ++j) {
        const int m = model.degrees()[j];
        const Coord& c = coords[j];
        const std::size_t a = static_cast<std::size_t>(model.ranks()(i, j) - 1);
        const int rp = model.ranks()(ip, j);
        const CellWeights& cwp = c.cells[static_cast<std::size_t>(rp - 1)];
        double acc = c.q_suffix(a, static_cast<std::size_t>(cwp.last() + 1));
        for (int l = cwp.first + 1; l <= cwp.last(); ++l) acc += ramp_value(rp, m, n, l) * c.q(a, l);
        prod *= acc;
      }
      sum += prod;
    }
    row_sums[i] = sum;
  });
  double total = 0.0;
  for (double s : row_sums) total += s;
  const double two_d = std::ldexp(1.0, static_cast<int>(d));
  const double integral = total / (static_cast<double>(n) * n);
  return (two_d * integral - 1.0) / (two_d / 2.0 - 1.0);
}

// Monte Carlo estimate of E[f(U)] under the model, with its standard error.
struct McEstimate {
  double mean;
  double standard_error;
};

inline McEstimate mc_expectation(const EcbcModel& model, const std::function<double(std::span<const double>)>& f,
                                 std::size_t M, std::uint64_t seed, unsigned threads = 1) {
  if (M < 2) throw InvalidInput("mc_expectation: M must be >= 2");
  const Matrix<double> draws = sample_ecbc(model, M, seed, threads);
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t r = 0; r < M; ++r) {
    const double v = f(draws.row(r));
    sum += v;
    sum_sq += v * v;
  }
  const double mean = sum / static_cast<double>(M);
  const double var = std::max(0.0, (sum_sq - M * mean * mean) / (static_cast<double>(M) - 1.0));
  return {mean, std::sqrt(var / static_cast<double>(M))};
}

struct DependenceReport {
  double rho_ecbc = 0.0;
  double rho_empirical = 0.0;
  std::optional<double> tau_ecbc;
  std::string tau_advisory;
  double rho_lower_bound = 0.0;
  std::size_t d = 0;
};

inline DependenceReport dependence_report(const EcbcModel& model, unsigned threads = 1) {
  DependenceReport rep;
  rep.d = model.d();
  rep.rho_ecbc = spearman_rho_ecbc(model);
  rep.rho_empirical = spearman_rho_empirical(model.ranks());
  rep.rho_lower_bound = rho_bounds(static_cast<int>(model.d())).lower;
  if (kendall_tau_feasible(model)) {
    rep.tau_ecbc = kendall_tau_ecbc(model, threads);
  } else {
    rep.tau_advisory = "tau skipped: n^2 * sum(m_j^2) exceeds 1e10";
  }
  return rep;
}

}  // namespace ecbc
