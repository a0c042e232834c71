#pragma once

// Independent reference implementations used only by tests. They follow the
// defining tensor sums directly and share no evaluation code with the
// factorized library paths beyond the checkerboard/empirical copulas.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "ecbc/ecbc.hpp"

namespace oracle {

using ecbc::Matrix;

inline double choose(int m, int k) {
  if (k < 0 || k > m) return 0.0;
  double c = 1.0;
  for (int t = 1; t <= k; ++t) c = c * (m - k + t) / t;
  return c;
}

inline double bernstein_basis(int m, int k, double u) {
  return choose(m, k) * std::pow(u, k) * std::pow(1.0 - u, m - k);
}

inline double beta_density(double u, int a, int b) {
  return std::pow(u, a - 1) * std::pow(1.0 - u, b - 1) / std::beta(static_cast<double>(a), static_cast<double>(b));
}

// Visits every multi-index of a product grid.
inline void for_each_index(const std::vector<int>& extent, const std::function<void(const std::vector<int>&)>& fn) {
  std::vector<int> idx(extent.size(), 0);
  while (true) {
    fn(idx);
    std::size_t j = extent.size();
    while (j > 0) {
      --j;
      if (++idx[j] < extent[j]) break;
      idx[j] = 0;
      if (j == 0) return;
    }
    if (extent.empty()) return;
  }
}

inline std::vector<double> grid_point(const std::vector<int>& k, const ecbc::DegreeVector& m) {
  std::vector<double> u(k.size());
  for (std::size_t j = 0; j < k.size(); ++j) u[j] = static_cast<double>(k[j]) / m[j];
  return u;
}

// Checkerboard coefficients theta~ on prod_j {0..m_j}.
inline std::vector<double> theta_grid(const ecbc::EcbcModel& model) {
  std::vector<int> extent;
  for (int m : model.degrees()) extent.push_back(m + 1);
  std::vector<double> out;
  for_each_index(extent, [&](const std::vector<int>& k) {
    out.push_back(ecbc::checkerboard_copula(model.ranks(), grid_point(k, model.degrees())));
  });
  return out;
}

inline double naive_pdf(const ecbc::EcbcModel& model, std::span<const double> u) {
  const ecbc::Tensor w = ecbc::bernstein_weights(model);
  double total = 0.0;
  std::size_t pos = 0;
  for_each_index(w.shape, [&](const std::vector<int>& k) {
    double prod = 1.0;
    for (std::size_t j = 0; j < k.size(); ++j) prod *= beta_density(u[j], k[j] + 1, model.degrees()[j] - k[j]);
    total += w.values[pos++] * prod;
  });
  return total;
}

inline double rho_scale(std::size_t d) {
  const double two_d = std::pow(2.0, static_cast<double>(d));
  return (d + 1.0) / (two_d - d - 1.0);
}

// rho = scale * (2^d sum_k theta_k prod_j C(m,k) B(k+1, m-k+1) - 1).
inline double naive_rho(const ecbc::EcbcModel& model) {
  const auto theta = theta_grid(model);
  std::vector<int> extent;
  for (int m : model.degrees()) extent.push_back(m + 1);
  double integral = 0.0;
  std::size_t pos = 0;
  for_each_index(extent, [&](const std::vector<int>& k) {
    double prod = 1.0;
    for (std::size_t j = 0; j < k.size(); ++j) {
      const int m = model.degrees()[j];
      prod *= choose(m, k[j]) * std::beta(k[j] + 1.0, m - k[j] + 1.0);
    }
    integral += theta[pos++] * prod;
  });
  const double two_d = std::pow(2.0, static_cast<double>(model.d()));
  return rho_scale(model.d()) * (two_d * integral - 1.0);
}

// tau via the double tensor sum over w~ (k) and theta~ (l).
inline double naive_tau(const ecbc::EcbcModel& model) {
  const ecbc::Tensor w = ecbc::bernstein_weights(model);
  const auto theta = theta_grid(model);
  std::vector<int> extent;
  for (int m : model.degrees()) extent.push_back(m + 1);
  double integral = 0.0;
  std::size_t pk = 0;
  for_each_index(w.shape, [&](const std::vector<int>& k) {
    const double wk = w.values[pk++];
    std::size_t pl = 0;
    for_each_index(extent, [&](const std::vector<int>& l) {
      double prod = 1.0;
      for (std::size_t j = 0; j < k.size(); ++j) {
        const int m = model.degrees()[j];
        prod *= m * choose(m - 1, k[j]) * choose(m, l[j]) * std::beta(k[j] + l[j] + 1.0, 2.0 * m - k[j] - l[j]);
      }
      integral += wk * theta[pl++] * prod;
    });
  });
  const double two_d = std::pow(2.0, static_cast<double>(model.d()));
  return (two_d * integral - 1.0) / (two_d / 2.0 - 1.0);
}

// Bernstein smoothing of an arbitrary copula function on the grid {k / m}.
inline double bernstein_of(const std::function<double(std::span<const double>)>& c,
                           const std::vector<int>& degrees, std::span<const double> u) {
  std::vector<int> extent;
  for (int m : degrees) extent.push_back(m + 1);
  double total = 0.0;
  std::vector<double> point(degrees.size());
  for_each_index(extent, [&](const std::vector<int>& k) {
    double basis = 1.0;
    for (std::size_t j = 0; j < k.size(); ++j) {
      basis *= bernstein_basis(degrees[j], k[j], u[j]);
      point[j] = static_cast<double>(k[j]) / degrees[j];
    }
    if (basis != 0.0) total += c(point) * basis;
  });
  return total;
}

// Mean of the worst losses with the fractional-tail adjustment:
// (1/(alpha M)) [sum of the K largest + (alpha M - K) * (K+1)-th largest].
inline double order_statistic_cvar(std::vector<double> losses, double alpha) {
  std::sort(losses.begin(), losses.end(), std::greater<>());
  const double am = alpha * static_cast<double>(losses.size());
  const auto K = static_cast<std::size_t>(std::floor(am * (1.0 + 1e-12)));
  double s = 0.0;
  for (std::size_t t = 0; t < K; ++t) s += losses[t];
  if (K < losses.size()) s += (am - static_cast<double>(K)) * losses[K];
  return s / am;
}

// Minimum of the primal CVaR LP over all vertices of its feasible polytope.
// Variables (v_1..v_d, gamma, z_1..z_M); a vertex fixes d + M of the
// 2M + d inequalities as equalities alongside sum v = 1.
inline double vertex_enumeration_cvar(const Matrix<double>& x, double alpha, double v_min) {
  const std::size_t M = x.rows();
  const std::size_t d = x.cols();
  const std::size_t nv = d + 1 + M;
  // Inequalities a.y >= b.
  std::vector<Eigen::VectorXd> a;
  std::vector<double> b;
  for (std::size_t k = 0; k < M; ++k) {
    Eigen::VectorXd row = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nv));
    row(static_cast<Eigen::Index>(d + 1 + k)) = 1.0;
    a.push_back(row);
    b.push_back(0.0);
    Eigen::VectorXd row2 = row;
    for (std::size_t j = 0; j < d; ++j) row2(static_cast<Eigen::Index>(j)) = x(k, j);
    row2(static_cast<Eigen::Index>(d)) = 1.0;
    a.push_back(row2);
    b.push_back(0.0);
  }
  for (std::size_t j = 0; j < d; ++j) {
    Eigen::VectorXd row = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nv));
    row(static_cast<Eigen::Index>(j)) = 1.0;
    a.push_back(row);
    b.push_back(v_min);
  }
  Eigen::VectorXd cost = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nv));
  cost(static_cast<Eigen::Index>(d)) = 1.0;
  for (std::size_t k = 0; k < M; ++k) cost(static_cast<Eigen::Index>(d + 1 + k)) = 1.0 / (alpha * M);

  const std::size_t active = nv - 1;
  std::vector<int> pick(a.size(), 0);
  std::fill(pick.end() - static_cast<std::ptrdiff_t>(active), pick.end(), 1);
  double best = std::numeric_limits<double>::infinity();
  do {
    Eigen::MatrixXd A(static_cast<Eigen::Index>(nv), static_cast<Eigen::Index>(nv));
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(nv));
    Eigen::Index r = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (!pick[i]) continue;
      A.row(r) = a[i].transpose();
      rhs(r++) = b[i];
    }
    A.row(r).setZero();
    A.row(r).head(static_cast<Eigen::Index>(d)).setOnes();
    rhs(r) = 1.0;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    if (lu.rank() < static_cast<Eigen::Index>(nv)) continue;
    const Eigen::VectorXd y = lu.solve(rhs);
    bool feasible = true;
    for (std::size_t i = 0; i < a.size() && feasible; ++i) feasible = a[i].dot(y) >= b[i] - 1e-10;
    if (feasible) best = std::min(best, cost.dot(y));
  } while (std::next_permutation(pick.begin(), pick.end()));
  return best;
}

// ---------------------------------------------------------------------------
// Random instances

inline ecbc::RankMatrix random_ranks(std::mt19937_64& rng, std::size_t n, std::size_t d) {
  Matrix<int> r(n, d);
  std::vector<int> perm(n);
  for (std::size_t j = 0; j < d; ++j) {
    std::iota(perm.begin(), perm.end(), 1);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (std::size_t i = 0; i < n; ++i) r(i, j) = perm[i];
  }
  return ecbc::RankMatrix(std::move(r));
}

inline ecbc::EcbcModel random_model(std::mt19937_64& rng, std::size_t n, std::size_t d, int max_m) {
  std::uniform_int_distribution<int> deg(1, max_m);
  std::vector<int> m(d);
  for (int& v : m) v = deg(rng);
  return ecbc::EcbcModel(random_ranks(rng, n, d), ecbc::DegreeVector(m));
}

inline std::vector<double> random_point(std::mt19937_64& rng, std::size_t d) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> p(d);
  for (double& x : p) {
    do {
      x = u(rng);
    } while (x <= 0.0);
  }
  return p;
}

// Asymptotic 1% and 0.1% critical values of the one-sample Kolmogorov-Smirnov statistic.
inline double ks_critical_01(std::size_t n) { return 1.6276 / std::sqrt(static_cast<double>(n)); }
inline double ks_critical_001(std::size_t n) { return 1.9495 / std::sqrt(static_cast<double>(n)); }

inline double ks_uniform_statistic(std::vector<double> x) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    d = std::max({d, (i + 1) / n - x[i], x[i] - i / n});
  }
  return d;
}

}  // namespace oracle
