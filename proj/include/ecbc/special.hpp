#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <vector>

#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>

namespace ecbc {

namespace detail {

inline const std::vector<double>& log_factorial_table() {
  static const std::vector<double> table = [] {
    constexpr std::size_t kSize = 1 << 16;
    std::vector<double> t(kSize);
    t[0] = 0.0;
    for (std::size_t k = 1; k < kSize; ++k) {
      t[k] = t[k - 1] + std::log(static_cast<double>(k));
    }
    return t;
  }();
  return table;
}

}  // namespace detail

// log(k!), tabulated for k < 65536.
inline double log_factorial(std::int64_t k) {
  const auto& table = detail::log_factorial_table();
  if (k < static_cast<std::int64_t>(table.size())) {
    return table[static_cast<std::size_t>(k)];
  }
  return boost::math::lgamma(static_cast<double>(k) + 1.0);
}

inline double log_choose(std::int64_t n, std::int64_t k) {
  return log_factorial(n) - log_factorial(k) - log_factorial(n - k);
}

// log B(a, b) for positive integers.
inline double log_beta_int(std::int64_t a, std::int64_t b) {
  return log_factorial(a - 1) + log_factorial(b - 1) - log_factorial(a + b - 1);
}

// Binomial(m, u) probabilities for k = 0..m. The recurrence
// p(k+1) = p(k) * (m-k)/(k+1) * u/(1-u) is anchored at the mode and run
// outward in both directions, so nothing overflows or underflows at the
// bulk of the distribution even for m in the tens of thousands.
inline std::vector<double> binomial_pmf(int m, double u) {
  std::vector<double> p(static_cast<std::size_t>(m) + 1, 0.0);
  if (u <= 0.0) {
    p.front() = 1.0;
    return p;
  }
  if (u >= 1.0) {
    p.back() = 1.0;
    return p;
  }
  const double odds = u / (1.0 - u);
  const int mode = std::clamp(static_cast<int>(std::floor((m + 1) * u)), 0, m);
  p[mode] = std::exp(log_choose(m, mode) + mode * std::log(u) +
                     (m - mode) * std::log1p(-u));
  for (int k = mode; k < m; ++k) {
    p[k + 1] = p[k] * (static_cast<double>(m - k) / (k + 1)) * odds;
  }
  for (int k = mode; k > 0; --k) {
    p[k - 1] = p[k] * (static_cast<double>(k) / (m - k + 1)) / odds;
  }
  return p;
}

// Beta(a, b) distribution function.
inline double beta_cdf(double u, double a, double b) {
  if (u <= 0.0) return 0.0;
  if (u >= 1.0) return 1.0;
  return boost::math::ibeta(a, b, u);
}

inline double normal_cdf(double x) {
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

inline double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

inline double normal_quantile(double p) {
  if (p <= 0.0) return -std::numeric_limits<double>::infinity();
  if (p >= 1.0) return std::numeric_limits<double>::infinity();
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

}  // namespace ecbc
