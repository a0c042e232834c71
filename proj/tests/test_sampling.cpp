#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "ecbc/ecbc.hpp"
#include "oracles.hpp"

using namespace ecbc;

namespace {

double empirical_cdf(const Matrix<double>& x, std::span<const double> u) {
  std::size_t count = 0;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    bool in = true;
    for (std::size_t j = 0; j < x.cols() && in; ++j) in = x(r, j) <= u[j];
    count += in;
  }
  return static_cast<double>(count) / x.rows();
}

struct ChiSquare {
  double stat = 0.0;
  int cells = 0;  // cells with positive expected mass
  double stray = 0.0;  // observations in zero-mass cells
};

// Pearson statistic on a g x g partition of the unit square, cell masses from
// the supplied bivariate CDF.
ChiSquare grid_chi_square(const Matrix<double>& x, int g, const std::function<double(double, double)>& cdf) {
  std::vector<double> observed(static_cast<std::size_t>(g * g), 0.0);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const int a = std::min(g - 1, static_cast<int>(x(r, 0) * g));
    const int b = std::min(g - 1, static_cast<int>(x(r, 1) * g));
    observed[static_cast<std::size_t>(a * g + b)] += 1.0;
  }
  ChiSquare out;
  for (int a = 0; a < g; ++a) {
    for (int b = 0; b < g; ++b) {
      const double u0 = static_cast<double>(a) / g;
      const double u1 = static_cast<double>(a + 1) / g;
      const double v0 = static_cast<double>(b) / g;
      const double v1 = static_cast<double>(b + 1) / g;
      const double p = cdf(u1, v1) - cdf(u0, v1) - cdf(u1, v0) + cdf(u0, v0);
      const double e = p * x.rows();
      const double o = observed[static_cast<std::size_t>(a * g + b)];
      if (p < 1e-12) {
        out.stray += o;
        continue;
      }
      out.stat += (o - e) * (o - e) / e;
      ++out.cells;
    }
  }
  return out;
}

double chi_square_critical(double df, double level) {
  return boost::math::quantile(boost::math::complement(boost::math::chi_squared(df), level));
}

}  // namespace

TEST(SampleEcbc, DeterministicAndThreadInvariant) {
  std::mt19937_64 rng(41);
  const EcbcModel model = oracle::random_model(rng, 30, 3, 20);
  const Matrix<double> a = sample_ecbc(model, 5000, 9, 1);
  EXPECT_EQ(a, sample_ecbc(model, 5000, 9, 1));
  EXPECT_EQ(a, sample_ecbc(model, 5000, 9, 4));
  EXPECT_NE(a, sample_ecbc(model, 5000, 10, 1));
  // A prefix of a longer run is the shorter run.
  const Matrix<double> longer = sample_ecbc(model, 6000, 9, 2);
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t j = 0; j < 3; ++j) ASSERT_EQ(a(r, j), longer(r, j));
  }
  EXPECT_THROW(sample_ecbc(model, 0, 1), InvalidInput);
}

TEST(SampleEcbc, OpenUnitCubeAndUniformMargins) {
  std::mt19937_64 rng(42);
  const EcbcModel model = oracle::random_model(rng, 40, 3, 25);
  const Matrix<double> x = sample_ecbc(model, 20000, 3);
  for (double v : x.data()) {
    ASSERT_GT(v, 0.0);
    ASSERT_LT(v, 1.0);
  }
  for (std::size_t j = 0; j < 3; ++j) {
    EXPECT_LT(oracle::ks_uniform_statistic(x.column(j)), oracle::ks_critical_01(x.rows()));
  }
}

TEST(SampleEcbc, EmpiricalCdfTracksModel) {
  std::mt19937_64 rng(43);
  const EcbcModel model = oracle::random_model(rng, 25, 3, 15);
  const std::size_t M = 40000;
  const Matrix<double> x = sample_ecbc(model, M, 4);
  for (int s = 0; s < 25; ++s) {
    const auto u = oracle::random_point(rng, 3);
    const double c = ecbc_cdf(model, u);
    const double se = std::sqrt(c * (1.0 - c) / M);
    EXPECT_NEAR(empirical_cdf(x, u), c, 5.0 * se + 1e-4);
  }
}

TEST(SampleEcbc, CellMassesPassChiSquare) {
  std::mt19937_64 rng(44);
  const EcbcModel model = oracle::random_model(rng, 15, 2, 12);
  const Matrix<double> x = sample_ecbc(model, 50000, 5);
  const int g = 5;
  const ChiSquare chi = grid_chi_square(x, g, [&](double u, double v) {
    return ecbc_cdf(model, std::vector<double>{u, v});
  });
  EXPECT_EQ(chi.cells, g * g);
  EXPECT_LT(chi.stat, chi_square_critical(chi.cells - 1, 0.01));
}

TEST(SampleCheckerboard, CellMassesPassChiSquare) {
  std::mt19937_64 rng(45);
  const RankMatrix r = oracle::random_ranks(rng, 12, 2);
  const Matrix<double> x = sample_checkerboard(r, 50000, 6);
  const int g = 6;
  const ChiSquare chi = grid_chi_square(x, g, [&](double u, double v) {
    return checkerboard_copula(r, std::vector<double>{u, v});
  });
  EXPECT_EQ(chi.stray, 0.0);
  EXPECT_LT(chi.stat, chi_square_critical(chi.cells - 1, 0.01));
  EXPECT_EQ(x, sample_checkerboard(r, 50000, 6, 3));
}

TEST(SampleCheckerboard, StaysInsideObservedCells) {
  const RankMatrix r(Matrix<int>(3, 2, {1, 3, 2, 1, 3, 2}));
  const Matrix<double> x = sample_checkerboard(r, 3000, 7);
  for (std::size_t k = 0; k < x.rows(); ++k) {
    const int a = static_cast<int>(x(k, 0) * 3) + 1;
    const int b = static_cast<int>(x(k, 1) * 3) + 1;
    const bool hit = (a == 1 && b == 3) || (a == 2 && b == 1) || (a == 3 && b == 2);
    ASSERT_TRUE(hit) << a << "," << b;
  }
}
