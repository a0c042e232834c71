#pragma once

// Rank statistics and exact evaluation of the empirical, checkerboard and
// empirical checkerboard Bernstein (ECBC) copulas.
//
// All ECBC quantities route through the per-observation ramp
//
//   g_ij(k) = min(max(n k / m_j - R_ij + 1, 0), 1),   k = 0..m_j
//
// and its increments h_ij(k) = g_ij(k+1) - g_ij(k), which turn the d-fold
// tensor sums over grid coefficients into a sum over observations of
// d-fold products of one-dimensional sums. The tensor forms are kept only
// as guarded oracles.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "ecbc/errors.hpp"
#include "ecbc/matrix.hpp"
#include "ecbc/random.hpp"
#include "ecbc/special.hpp"

namespace ecbc {

// Raw observations, one row per sample.
class Dataset {
 public:
  explicit Dataset(Matrix<double> values) : values_(std::move(values)) {
    if (values_.rows() < 1) throw InvalidInput("Dataset: need at least one row");
    if (values_.cols() < 2) throw InvalidInput("Dataset: need at least two columns");
    for (std::size_t i = 0; i < values_.rows(); ++i) {
      for (std::size_t j = 0; j < values_.cols(); ++j) {
        if (!std::isfinite(values_(i, j))) {
          throw InvalidInput("Dataset: non-finite value at row " + std::to_string(i + 1) +
                             ", column " + std::to_string(j + 1));
        }
      }
    }
  }

  std::size_t n() const { return values_.rows(); }
  std::size_t d() const { return values_.cols(); }
  const Matrix<double>& values() const { return values_; }

 private:
  Matrix<double> values_;
};

// Column-wise ranks in 1..n; every column is a permutation.
class RankMatrix {
 public:
  RankMatrix() = default;
  explicit RankMatrix(Matrix<int> ranks) : ranks_(std::move(ranks)) {
    const std::size_t n = ranks_.rows();
    if (n < 1 || ranks_.cols() < 1) throw InvalidInput("RankMatrix: empty");
    std::vector<char> seen(n);
    for (std::size_t j = 0; j < ranks_.cols(); ++j) {
      std::fill(seen.begin(), seen.end(), 0);
      for (std::size_t i = 0; i < n; ++i) {
        const int r = ranks_(i, j);
        if (r < 1 || static_cast<std::size_t>(r) > n || seen[r - 1]) {
          throw InvalidInput("RankMatrix: column " + std::to_string(j + 1) +
                             " is not a permutation of 1..n");
        }
        seen[r - 1] = 1;
      }
    }
  }

  std::size_t n() const { return ranks_.rows(); }
  std::size_t d() const { return ranks_.cols(); }
  int operator()(std::size_t i, std::size_t j) const { return ranks_(i, j); }
  std::span<const int> row(std::size_t i) const { return ranks_.row(i); }
  const Matrix<int>& values() const { return ranks_; }

  // Same observations with the coordinates reordered.
  RankMatrix permuted_columns(std::span<const std::size_t> order) const {
    Matrix<int> out(n(), order.size());
    for (std::size_t i = 0; i < n(); ++i) {
      for (std::size_t j = 0; j < order.size(); ++j) out(i, j) = ranks_(i, order[j]);
    }
    return RankMatrix(std::move(out));
  }

  bool operator==(const RankMatrix&) const = default;

 private:
  Matrix<int> ranks_;
};

struct PseudoObs {
  Matrix<double> u;
};

// Bernstein degrees (m_1, ..., m_d), each at least 1.
class DegreeVector {
 public:
  DegreeVector() = default;
  explicit DegreeVector(std::vector<int> m) : m_(std::move(m)) {
    for (int v : m_) {
      if (v < 1) throw InvalidInput("DegreeVector: degrees must be >= 1");
    }
  }

  std::size_t size() const { return m_.size(); }
  int operator[](std::size_t j) const { return m_[j]; }
  const std::vector<int>& values() const { return m_; }
  auto begin() const { return m_.begin(); }
  auto end() const { return m_.end(); }

  bool operator==(const DegreeVector&) const = default;

 private:
  std::vector<int> m_;
};

// Ranks plus degrees; fully determines the fitted copula.
class EcbcModel {
 public:
  EcbcModel(RankMatrix ranks, DegreeVector degrees)
      : ranks_(std::move(ranks)), degrees_(std::move(degrees)) {
    if (degrees_.size() != ranks_.d()) {
      throw InvalidInput("EcbcModel: degree vector length " + std::to_string(degrees_.size()) +
                         " does not match dimension " + std::to_string(ranks_.d()));
    }
  }

  const RankMatrix& ranks() const { return ranks_; }
  const DegreeVector& degrees() const { return degrees_; }
  std::size_t n() const { return ranks_.n(); }
  std::size_t d() const { return ranks_.d(); }

  bool operator==(const EcbcModel&) const = default;

 private:
  RankMatrix ranks_;
  DegreeVector degrees_;
};

// Dense tensor over a product grid, last index fastest.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> values;

  std::size_t offset(std::span<const int> index) const {
    std::size_t off = 0;
    for (std::size_t j = 0; j < shape.size(); ++j) off = off * shape[j] + index[j];
    return off;
  }
  double at(std::span<const int> index) const { return values[offset(index)]; }
};

enum class TiePolicy { random_seeded, input_order };

// ---------------------------------------------------------------------------
// Ranks and pseudo-observations

inline RankMatrix compute_ranks(const Dataset& data, TiePolicy tie_policy, std::uint64_t seed) {
  const std::size_t n = data.n();
  const std::size_t d = data.d();
  Matrix<int> ranks(n, d);
  Rng rng(seed);
  std::vector<std::size_t> order(n);
  std::vector<std::size_t> tiebreak(n);
  for (std::size_t j = 0; j < d; ++j) {
    std::iota(tiebreak.begin(), tiebreak.end(), std::size_t{0});
    if (tie_policy == TiePolicy::random_seeded) std::shuffle(tiebreak.begin(), tiebreak.end(), rng);
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto& x = data.values();
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (x(a, j) != x(b, j)) return x(a, j) < x(b, j);
      return tiebreak[a] < tiebreak[b];
    });
    for (std::size_t pos = 0; pos < n; ++pos) ranks(order[pos], j) = static_cast<int>(pos + 1);
  }
  return RankMatrix(std::move(ranks));
}

inline PseudoObs pseudo_observations(const RankMatrix& ranks) {
  const double n1 = static_cast<double>(ranks.n()) + 1.0;
  Matrix<double> u(ranks.n(), ranks.d());
  for (std::size_t i = 0; i < ranks.n(); ++i) {
    for (std::size_t j = 0; j < ranks.d(); ++j) {
      u(i, j) = static_cast<double>(ranks(i, j)) / n1;
    }
  }
  return {std::move(u)};
}

namespace detail {

inline void check_point(std::size_t d, std::span<const double> u, bool open) {
  if (u.size() != d) {
    throw InvalidInput("point has dimension " + std::to_string(u.size()) + ", expected " +
                       std::to_string(d));
  }
  for (double x : u) {
    const bool ok = open ? (x > 0.0 && x < 1.0) : (x >= 0.0 && x <= 1.0);
    if (!ok) {
      throw DomainError(open ? "point must lie in the open unit cube"
                             : "point must lie in the closed unit cube");
    }
  }
}

}  // namespace detail

// Division rather than a reciprocal multiply: R/(n+1) and a grid point k/m
// that are equal as rationals then round to the same double.
inline double empirical_copula(const RankMatrix& ranks, std::span<const double> u) {
  detail::check_point(ranks.d(), u, false);
  const double n1 = static_cast<double>(ranks.n()) + 1.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < ranks.n(); ++i) {
    bool inside = true;
    for (std::size_t j = 0; j < ranks.d() && inside; ++j) {
      inside = ranks(i, j) / n1 <= u[j];
    }
    count += inside;
  }
  return static_cast<double>(count) / static_cast<double>(ranks.n());
}

inline double checkerboard_copula(const RankMatrix& ranks, std::span<const double> u) {
  detail::check_point(ranks.d(), u, false);
  const double n = static_cast<double>(ranks.n());
  double total = 0.0;
  for (std::size_t i = 0; i < ranks.n(); ++i) {
    double prod = 1.0;
    for (std::size_t j = 0; j < ranks.d(); ++j) {
      prod *= std::clamp(n * u[j] - ranks(i, j) + 1.0, 0.0, 1.0);
    }
    total += prod;
  }
  return total / n;
}

// ---------------------------------------------------------------------------
// Ramp factorization

// Numerator of g(k) over the common denominator m: clamp(n k - (r-1) m, 0, m).
inline std::int64_t ramp_numerator(int rank, int m, int n, int k) {
  const std::int64_t v = std::int64_t{n} * k - std::int64_t{rank - 1} * m;
  return std::clamp<std::int64_t>(v, 0, m);
}

inline double ramp_value(int rank, int m, int n, int k) {
  return static_cast<double>(ramp_numerator(rank, m, n, k)) / m;
}

// Increments h(k) = g(k+1) - g(k) restricted to their support
// [first, first + weights.size()). Equivalently, the share of the rank cell
// [(r-1)/n, r/n) that falls in the Bernstein cell [k/m, (k+1)/m), times n.
// Integer bookkeeping makes the numerators sum to m exactly.
struct CellWeights {
  int first = 0;
  std::vector<double> weights;

  int last() const { return first + static_cast<int>(weights.size()) - 1; }
};

inline CellWeights cell_weights(int rank, int m, int n) {
  const std::int64_t lo = std::int64_t{rank - 1} * m;
  const int first = static_cast<int>(lo / n);
  const int last = static_cast<int>((std::int64_t{rank} * m + n - 1) / n) - 1;
  CellWeights out;
  out.first = first;
  out.weights.reserve(static_cast<std::size_t>(last - first + 1));
  for (int k = first; k <= last; ++k) {
    const std::int64_t num = ramp_numerator(rank, m, n, k + 1) - ramp_numerator(rank, m, n, k);
    out.weights.push_back(static_cast<double>(num) / m);
  }
  return out;
}

// Full ramp tables: entry j is an n x (m_j + 1) matrix of g_ij(k).
inline std::vector<Matrix<double>> g_table(const EcbcModel& model) {
  const int n = static_cast<int>(model.n());
  std::vector<Matrix<double>> out;
  out.reserve(model.d());
  for (std::size_t j = 0; j < model.d(); ++j) {
    const int m = model.degrees()[j];
    Matrix<double> g(model.n(), static_cast<std::size_t>(m) + 1);
    for (std::size_t i = 0; i < model.n(); ++i) {
      for (int k = 0; k <= m; ++k) g(i, k) = ramp_value(model.ranks()(i, j), m, n, k);
    }
    out.push_back(std::move(g));
  }
  return out;
}

// ---------------------------------------------------------------------------
// ECBC evaluation

// C#_{m,n}(u). Cost O(sum_j m_j + n d (1 + m/n)) per point.
inline double ecbc_cdf(const EcbcModel& model, std::span<const double> u) {
  detail::check_point(model.d(), u, false);
  const int n = static_cast<int>(model.n());
  const std::size_t d = model.d();
  std::vector<std::vector<double>> pmf(d);
  std::vector<std::vector<double>> tail(d);
  for (std::size_t j = 0; j < d; ++j) {
    const int m = model.degrees()[j];
    pmf[j] = binomial_pmf(m, u[j]);
    tail[j].assign(static_cast<std::size_t>(m) + 2, 0.0);
    for (int k = m; k >= 0; --k) tail[j][k] = tail[j][k + 1] + pmf[j][k];
  }
  double total = 0.0;
  for (std::size_t i = 0; i < model.n(); ++i) {
    double prod = 1.0;
    for (std::size_t j = 0; j < d && prod != 0.0; ++j) {
      const int m = model.degrees()[j];
      const int r = model.ranks()(i, j);
      const std::int64_t lo = std::int64_t{r - 1} * m;
      const int first = static_cast<int>(lo / n);
      const int last = static_cast<int>((std::int64_t{r} * m + n - 1) / n) - 1;
      double factor = tail[j][last + 1];
      for (int k = first + 1; k <= last; ++k) factor += ramp_value(r, m, n, k) * pmf[j][k];
      prod *= factor;
    }
    total += prod;
  }
  return total / n;
}

// c#_{m,n}(u) on the open cube.
inline double ecbc_pdf(const EcbcModel& model, std::span<const double> u) {
  detail::check_point(model.d(), u, true);
  const int n = static_cast<int>(model.n());
  const std::size_t d = model.d();
  std::vector<std::vector<double>> pmf(d);
  for (std::size_t j = 0; j < d; ++j) pmf[j] = binomial_pmf(model.degrees()[j] - 1, u[j]);
  double total = 0.0;
  for (std::size_t i = 0; i < model.n(); ++i) {
    double prod = 1.0;
    for (std::size_t j = 0; j < d && prod != 0.0; ++j) {
      const int m = model.degrees()[j];
      const CellWeights cw = cell_weights(model.ranks()(i, j), m, n);
      double factor = 0.0;
      for (std::size_t t = 0; t < cw.weights.size(); ++t) {
        factor += cw.weights[t] * pmf[j][cw.first + t];
      }
      prod *= m * factor;
    }
    total += prod;
  }
  return total / n;
}

// ---------------------------------------------------------------------------
// Tensor forms (oracles, size guarded)

inline constexpr double kTensorGuard = 1e7;

namespace detail {

// Advances a multi-index over [0, extent_j) in row-major order.
inline bool next_index(std::vector<int>& index, std::span<const int> extent) {
  for (std::size_t j = index.size(); j-- > 0;) {
    if (++index[j] < extent[j]) return true;
    index[j] = 0;
  }
  return false;
}

inline double binomial_coefficient(int m, int k) {
  double c = 1.0;
  for (int t = 1; t <= k; ++t) c = c * (m - k + t) / t;
  return c;
}

}  // namespace detail

// Direct tensor sum over k in prod_j {0..m_j} with grid coefficients taken
// from the checkerboard copula.
inline double ecbc_cdf_naive(const EcbcModel& model, std::span<const double> u) {
  detail::check_point(model.d(), u, false);
  const std::size_t d = model.d();
  std::vector<int> extent(d);
  double cells = 1.0;
  for (std::size_t j = 0; j < d; ++j) {
    extent[j] = model.degrees()[j] + 1;
    cells *= extent[j];
  }
  if (cells > kTensorGuard) throw GuardExceeded("ecbc_cdf_naive: tensor exceeds 1e7 cells");
  const double n = static_cast<double>(model.n());
  std::vector<int> k(d, 0);
  double total = 0.0;
  do {
    double basis = 1.0;
    for (std::size_t j = 0; j < d; ++j) {
      const int m = model.degrees()[j];
      basis *= detail::binomial_coefficient(m, k[j]) * std::pow(u[j], k[j]) *
               std::pow(1.0 - u[j], m - k[j]);
    }
    if (basis == 0.0) continue;
    double theta = 0.0;
    for (std::size_t i = 0; i < model.n(); ++i) {
      double prod = 1.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double grid = static_cast<double>(k[j]) / model.degrees()[j];
        prod *= std::min(std::max(n * grid - model.ranks()(i, j) + 1.0, 0.0), 1.0);
      }
      theta += prod;
    }
    total += theta / n * basis;
  } while (detail::next_index(k, extent));
  return total;
}

// Mixture weights over the prod_j m_j Beta cells, by 2^d-term finite
// differences of the checkerboard copula on the grid {k / m}.
inline Tensor bernstein_weights(const EcbcModel& model) {
  const std::size_t d = model.d();
  std::vector<int> shape(d);
  std::vector<int> grid_extent(d);
  double cells = 1.0;
  for (std::size_t j = 0; j < d; ++j) {
    shape[j] = model.degrees()[j];
    grid_extent[j] = shape[j] + 1;
    cells *= static_cast<double>(grid_extent[j]);
  }
  if (cells > kTensorGuard) throw GuardExceeded("bernstein_weights: tensor exceeds 1e7 cells");

  Tensor theta{grid_extent, {}};
  theta.values.reserve(static_cast<std::size_t>(cells));
  std::vector<int> k(d, 0);
  std::vector<double> point(d);
  do {
    for (std::size_t j = 0; j < d; ++j) {
      point[j] = static_cast<double>(k[j]) / model.degrees()[j];
    }
    theta.values.push_back(checkerboard_copula(model.ranks(), point));
  } while (detail::next_index(k, grid_extent));

  Tensor w{shape, {}};
  std::size_t total = 1;
  for (int s : shape) total *= static_cast<std::size_t>(s);
  w.values.reserve(total);
  std::fill(k.begin(), k.end(), 0);
  std::vector<int> corner(d);
  do {
    double acc = 0.0;
    for (unsigned mask = 0; mask < (1u << d); ++mask) {
      int ones = 0;
      for (std::size_t j = 0; j < d; ++j) {
        const int l = (mask >> j) & 1;
        ones += l;
        corner[j] = k[j] + l;
      }
      const double sign = ((static_cast<int>(d) + ones) % 2 == 0) ? 1.0 : -1.0;
      acc += sign * theta.at(corner);
    }
    w.values.push_back(acc);
  } while (detail::next_index(k, shape));
  return w;
}

// Same weights through the per-observation product (1/n) sum_i prod_j h_ij(k_j).
inline Tensor bernstein_weights_product(const EcbcModel& model) {
  const std::size_t d = model.d();
  const int n = static_cast<int>(model.n());
  std::vector<int> shape(model.degrees().values());
  double cells = 1.0;
  for (int s : shape) cells *= s;
  if (cells > kTensorGuard) {
    throw GuardExceeded("bernstein_weights_product: tensor exceeds 1e7 cells");
  }
  Tensor w{shape, std::vector<double>(static_cast<std::size_t>(cells), 0.0)};
  std::vector<CellWeights> cw(d);
  std::vector<int> extent(d);
  std::vector<int> local(d);
  std::vector<int> index(d);
  for (std::size_t i = 0; i < model.n(); ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      cw[j] = cell_weights(model.ranks()(i, j), model.degrees()[j], n);
      extent[j] = static_cast<int>(cw[j].weights.size());
    }
    std::fill(local.begin(), local.end(), 0);
    do {
      double prod = 1.0;
      for (std::size_t j = 0; j < d; ++j) {
        prod *= cw[j].weights[local[j]];
        index[j] = cw[j].first + local[j];
      }
      w.values[w.offset(index)] += prod / n;
    } while (detail::next_index(local, extent));
  }
  return w;
}

}  // namespace ecbc
