#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "ecbc/ecbc.hpp"
#include "oracles.hpp"

using namespace ecbc;

TEST(RhoBounds, KnownLowerBounds) {
  EXPECT_DOUBLE_EQ(rho_bounds(2).lower, -1.0);
  EXPECT_NEAR(rho_bounds(3).lower, -2.0 / 3.0, 1e-15);
  EXPECT_NEAR(rho_bounds(4).lower, -0.393939393939394, 1e-12);
  EXPECT_NEAR(rho_bounds(5).lower, -0.220512820512821, 1e-12);
  EXPECT_EQ(rho_bounds(7).upper, 1.0);
  EXPECT_THROW(rho_bounds(1), InvalidInput);
}

TEST(SpearmanRho, MatchesNaiveTensorForm) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 80; ++trial) {
    const EcbcModel model = oracle::random_model(rng, 1 + rng() % 40, 2 + rng() % 3, 12);
    EXPECT_NEAR(spearman_rho_ecbc(model), oracle::naive_rho(model), 1e-12);
  }
}

TEST(SpearmanRho, WithinBoundsOnRandomModels) {
  std::mt19937_64 rng(32);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t d = 2 + rng() % 4;
    const EcbcModel model = oracle::random_model(rng, 1 + rng() % 60, d, 40);
    const double rho = spearman_rho_ecbc(model);
    EXPECT_GE(rho, rho_bounds(static_cast<int>(d)).lower - 1e-12);
    EXPECT_LE(rho, 1.0 + 1e-12);
  }
}

TEST(SpearmanRho, SingleObservationIsZero) {
  const EcbcModel model(RankMatrix(Matrix<int>(1, 3, {1, 1, 1})), DegreeVector({3, 5, 2}));
  EXPECT_NEAR(spearman_rho_ecbc(model), 0.0, 1e-14);
  EXPECT_NEAR(kendall_tau_ecbc(model), 0.0, 1e-14);
}

TEST(SpearmanRho, EmpiricalComonotoneClosedForm) {
  // Identical columns: sum_i (1 - i/(n+1))^2 gives rho~ = (n - 1) / (n + 1).
  for (int n : {2, 5, 17, 100}) {
    Matrix<int> r(static_cast<std::size_t>(n), 2);
    for (int i = 0; i < n; ++i) r(i, 0) = r(i, 1) = i + 1;
    EXPECT_NEAR(spearman_rho_empirical(RankMatrix(r)), (n - 1.0) / (n + 1.0), 1e-13);
  }
}

TEST(SpearmanRho, AgreesWithMonteCarloBivariate) {
  std::mt19937_64 rng(33);
  const EcbcModel model = oracle::random_model(rng, 30, 2, 15);
  const McEstimate e = mc_expectation(
      model, [](std::span<const double> u) { return 12.0 * u[0] * u[1] - 3.0; }, 200000, 5);
  EXPECT_NEAR(spearman_rho_ecbc(model), e.mean, 5.0 * e.standard_error);
}

TEST(KendallTau, MatchesNaiveTensorForm) {
  std::mt19937_64 rng(34);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t d = 2 + rng() % 2;
    const EcbcModel model = oracle::random_model(rng, 1 + rng() % 20, d, d == 2 ? 10 : 6);
    EXPECT_NEAR(kendall_tau_ecbc(model), oracle::naive_tau(model), 1e-12);
  }
}

TEST(KendallTau, AgreesWithMonteCarloBivariate) {
  std::mt19937_64 rng(35);
  const EcbcModel model = oracle::random_model(rng, 25, 2, 12);
  const McEstimate e = mc_expectation(
      model, [&](std::span<const double> u) { return 4.0 * ecbc_cdf(model, u) - 1.0; }, 40000, 6);
  EXPECT_NEAR(kendall_tau_ecbc(model), e.mean, 5.0 * e.standard_error);
}

TEST(KendallTau, ThreadCountDoesNotChangeResult) {
  std::mt19937_64 rng(36);
  const EcbcModel model = oracle::random_model(rng, 60, 3, 30);
  EXPECT_EQ(kendall_tau_ecbc(model, 1), kendall_tau_ecbc(model, 3));
}

TEST(KendallTau, GuardAndReport) {
  Matrix<int> r(2000, 2);
  for (int i = 0; i < 2000; ++i) {
    r(i, 0) = i + 1;
    r(i, 1) = 2000 - i;
  }
  const EcbcModel big(RankMatrix(r), DegreeVector({40, 40}));
  EXPECT_FALSE(kendall_tau_feasible(big));
  EXPECT_THROW(kendall_tau_ecbc(big), GuardExceeded);
  const DependenceReport rep = dependence_report(big);
  EXPECT_FALSE(rep.tau_ecbc.has_value());
  EXPECT_FALSE(rep.tau_advisory.empty());
  EXPECT_LT(rep.rho_ecbc, -0.9);
  EXPECT_EQ(rep.rho_lower_bound, -1.0);

  std::mt19937_64 rng(37);
  const EcbcModel small = oracle::random_model(rng, 20, 3, 8);
  const DependenceReport ok = dependence_report(small);
  ASSERT_TRUE(ok.tau_ecbc.has_value());
  EXPECT_TRUE(ok.tau_advisory.empty());
  EXPECT_EQ(ok.d, 3u);
  EXPECT_DOUBLE_EQ(*ok.tau_ecbc, kendall_tau_ecbc(small));
}

TEST(KendallTau, CountermonotoneTightensWithDegree) {
  Matrix<int> r(50, 2);
  for (int i = 0; i < 50; ++i) {
    r(i, 0) = i + 1;
    r(i, 1) = 50 - i;
  }
  const EcbcModel model(RankMatrix(r), DegreeVector({50, 50}));
  const double tau = kendall_tau_ecbc(model);
  EXPECT_LT(tau, -0.75);
  EXPECT_GE(tau, -1.0);
  // Smoothing pulls tau toward zero, so larger degrees sit closer to -1.
  const EcbcModel rough(RankMatrix(r), DegreeVector({10, 10}));
  EXPECT_LT(tau, kendall_tau_ecbc(rough));
}

TEST(KendallTau, ComonotoneFullDegree) {
  // With m = n this is the empirical beta copula of the comonotone sample;
  // reference value from 200-point Gauss-Legendre quadrature of
  // 4 int C c - 1 with C, c built from scipy Beta cdf/pdf.
  Matrix<int> r(30, 2);
  for (int i = 0; i < 30; ++i) r(i, 0) = r(i, 1) = i + 1;
  const double tau = kendall_tau_ecbc(EcbcModel(RankMatrix(r), DegreeVector({30, 30})));
  EXPECT_NEAR(tau, 0.7735173645552176, 1e-9);
}

TEST(Dependence, UnitDegreesGiveZero) {
  std::mt19937_64 rng(38);
  for (std::size_t d = 2; d <= 5; ++d) {
    const RankMatrix r = oracle::random_ranks(rng, 25, d);
    const EcbcModel model(r, DegreeVector(std::vector<int>(d, 1)));
    EXPECT_NEAR(spearman_rho_ecbc(model), 0.0, 1e-14);
    EXPECT_NEAR(kendall_tau_ecbc(model), 0.0, 1e-14);
  }
}

TEST(Dependence, InvariantUnderCoordinatePermutation) {
  std::mt19937_64 rng(39);
  for (int trial = 0; trial < 20; ++trial) {
    const EcbcModel model = oracle::random_model(rng, 5 + rng() % 30, 3, 20);
    std::vector<std::size_t> order{0, 1, 2};
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<int> m;
    for (std::size_t j : order) m.push_back(model.degrees()[j]);
    const EcbcModel p(model.ranks().permuted_columns(order), DegreeVector(m));
    EXPECT_NEAR(spearman_rho_ecbc(model), spearman_rho_ecbc(p), 1e-13);
    EXPECT_NEAR(kendall_tau_ecbc(model), kendall_tau_ecbc(p), 1e-13);
  }
}

TEST(RhoBounds, LowerBoundIncreasesWithDimension) {
  for (int d = 2; d < 10; ++d) EXPECT_LT(rho_bounds(d).lower, rho_bounds(d + 1).lower);
  EXPECT_LT(rho_bounds(10).lower, 0.0);
}

TEST(SpearmanRho, EmpiricalEdgeCases) {
  EXPECT_NEAR(spearman_rho_empirical(RankMatrix(Matrix<int>(1, 3, {1, 1, 1}))), 0.0, 1e-15);
  // d = 3 comonotone columns against the direct sum; scale (d+1)/(2^d-d-1) = 1.
  Matrix<int> r(100, 3);
  double sum = 0.0;
  for (int i = 0; i < 100; ++i) {
    r(i, 0) = r(i, 1) = r(i, 2) = i + 1;
    sum += std::pow(1.0 - (i + 1) / 101.0, 3);
  }
  EXPECT_NEAR(spearman_rho_empirical(RankMatrix(r)), 8.0 * sum / 100.0 - 1.0, 1e-13);
}
