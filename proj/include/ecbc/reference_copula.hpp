#pragma once

// Parametric copulas used as simulation ground truth: distribution functions,
// conditional distributions and samplers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

#include "ecbc/errors.hpp"
#include "ecbc/matrix.hpp"
#include "ecbc/random.hpp"
#include "ecbc/sampling.hpp"
#include "ecbc/special.hpp"

namespace ecbc {

enum class CopulaFamily { frank, clayton, gumbel, fgm, gaussian, student_t, independence, asymmetric_sine };

inline std::string to_string(CopulaFamily f) {
  switch (f) {
    case CopulaFamily::frank: return "frank";
    case CopulaFamily::clayton: return "clayton";
    case CopulaFamily::gumbel: return "gumbel";
    case CopulaFamily::fgm: return "fgm";
    case CopulaFamily::gaussian: return "gaussian";
    case CopulaFamily::student_t: return "student_t";
    case CopulaFamily::independence: return "independence";
    case CopulaFamily::asymmetric_sine: return "asymmetric_sine";
  }
  return "unknown";
}

inline CopulaFamily copula_family_from_string(const std::string& name) {
  for (auto f : {CopulaFamily::frank, CopulaFamily::clayton, CopulaFamily::gumbel, CopulaFamily::fgm,
                 CopulaFamily::gaussian, CopulaFamily::student_t, CopulaFamily::independence,
                 CopulaFamily::asymmetric_sine}) {
    if (to_string(f) == name) return f;
  }
  throw InvalidInput("unknown copula family '" + name + "'");
}

// FGM uses the parameterization C(u, v) = uv (1 - theta (1 - u)(1 - v)), so
// theta = -1 is the strongest positive dependence.
struct CopulaSpec {
  CopulaFamily family = CopulaFamily::independence;
  std::size_t d = 2;
  double theta = 0.0;
  Matrix<double> correlation;  // gaussian, student_t
  double df = 0.0;             // student_t

  static CopulaSpec frank(double theta) { return make(CopulaFamily::frank, 2, theta); }
  static CopulaSpec clayton(double theta, std::size_t d = 2) { return make(CopulaFamily::clayton, d, theta); }
  static CopulaSpec gumbel(double theta) { return make(CopulaFamily::gumbel, 2, theta); }
  static CopulaSpec fgm(double theta) { return make(CopulaFamily::fgm, 2, theta); }
  static CopulaSpec independence(std::size_t d = 2) { return make(CopulaFamily::independence, d, 0.0); }
  static CopulaSpec asymmetric_sine() { return make(CopulaFamily::asymmetric_sine, 2, 0.0); }
  static CopulaSpec gaussian(Matrix<double> corr) {
    CopulaSpec s = make_unchecked(CopulaFamily::gaussian, corr.rows(), 0.0);
    s.correlation = std::move(corr);
    s.validate();
    return s;
  }
  static CopulaSpec gaussian2(double rho) {
    return gaussian(Matrix<double>(2, 2, std::vector<double>{1.0, rho, rho, 1.0}));
  }
  static CopulaSpec student_t(Matrix<double> corr, double df) {
    CopulaSpec s = make_unchecked(CopulaFamily::student_t, corr.rows(), 0.0);
    s.correlation = std::move(corr);
    s.df = df;
    s.validate();
    return s;
  }

  void validate() const {
    auto fail = [](const std::string& msg) { throw InvalidInput("CopulaSpec: " + msg); };
    if (d < 2) fail("d must be >= 2");
    switch (family) {
      case CopulaFamily::frank:
        if (d != 2) fail("frank is bivariate only");
        if (theta == 0.0 || !std::isfinite(theta)) fail("frank theta must be finite and nonzero");
        break;
      case CopulaFamily::clayton:
        if (!(theta > 0.0) || !std::isfinite(theta)) fail("clayton theta must be > 0");
        break;
      case CopulaFamily::gumbel:
        if (d != 2) fail("gumbel is bivariate only");
        if (!(theta >= 1.0) || !std::isfinite(theta)) fail("gumbel theta must be >= 1");
        break;
      case CopulaFamily::fgm:
        if (d != 2) fail("fgm is bivariate only");
        if (!(theta >= -1.0 && theta <= 1.0)) fail("fgm theta must lie in [-1, 1]");
        break;
      case CopulaFamily::asymmetric_sine:
        if (d != 2) fail("asymmetric_sine is bivariate only");
        break;
      case CopulaFamily::independence:
        break;
      case CopulaFamily::student_t:
        if (!(df > 0.0) || !std::isfinite(df)) fail("student_t df must be > 0");
        [[fallthrough]];
      case CopulaFamily::gaussian: {
        if (correlation.rows() != d || correlation.cols() != d) fail("correlation must be d x d");
        Eigen::MatrixXd r(d, d);
        for (std::size_t i = 0; i < d; ++i) {
          for (std::size_t j = 0; j < d; ++j) {
            r(i, j) = correlation(i, j);
            if (!std::isfinite(r(i, j))) fail("correlation entries must be finite");
          }
          if (correlation(i, i) != 1.0) fail("correlation must have unit diagonal");
        }
        if (!r.isApprox(r.transpose(), 0.0)) fail("correlation must be symmetric");
        Eigen::LLT<Eigen::MatrixXd> llt(r);
        if (llt.info() != Eigen::Success) fail("correlation must be positive definite");
        break;
      }
    }
  }

 private:
  static CopulaSpec make_unchecked(CopulaFamily f, std::size_t d, double theta) {
    CopulaSpec s;
    s.family = f;
    s.d = d;
    s.theta = theta;
    return s;
  }
  static CopulaSpec make(CopulaFamily f, std::size_t d, double theta) {
    CopulaSpec s = make_unchecked(f, d, theta);
    s.validate();
    return s;
  }
};

namespace detail {

inline Eigen::MatrixXd cholesky_factor(const Matrix<double>& corr) {
  const auto d = static_cast<Eigen::Index>(corr.rows());
  Eigen::MatrixXd r(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) r(i, j) = corr(i, j);
  }
  return Eigen::LLT<Eigen::MatrixXd>(r).matrixL();
}

// Asymmetric sine copula: C = uv - 0.12 (1 - v^2) sin(8.3 v) u (1 - u).
inline double sine_profile(double v) { return 0.12 * (1.0 - v * v) * std::sin(8.3 * v); }

// Phi_2(a, b; rho) by integrating d/dr Phi_2 = phi_2(a, b; r) over [0, rho].
inline double bivariate_normal_cdf(double a, double b, double rho) {
  if (a == -std::numeric_limits<double>::infinity() || b == -std::numeric_limits<double>::infinity()) {
    return 0.0;
  }
  if (a == std::numeric_limits<double>::infinity()) return normal_cdf(b);
  if (b == std::numeric_limits<double>::infinity()) return normal_cdf(a);
  auto integrand = [&](double r) {
    const double s = 1.0 - r * r;
    return std::exp(-(a * a - 2.0 * r * a * b + b * b) / (2.0 * s)) / std::sqrt(s);
  };
  const double integral =
      boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, 0.0, rho, 15, 1e-14);
  return normal_cdf(a) * normal_cdf(b) + integral / (2.0 * std::numbers::pi);
}

// Randomized lattice rule for P(X <= b) with X Gaussian or t with the given
// correlation, by separation of variables. Points follow a Richtmyer lattice
// with fixed-seed random shifts and the baker's periodization; the sample
// size doubles until the standard error across shifts is at most tol.
inline double elliptical_cdf_qmc(const Matrix<double>& corr, double df, std::span<const double> upper,
                                 double tol) {
  static constexpr int kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53,
                                    59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103, 107, 109, 113};
  const std::size_t d = upper.size();
  const bool student = df > 0.0;
  const std::size_t dims = student ? d : d - 1;
  if (dims > std::size(kPrimes)) throw GuardExceeded("elliptical_cdf_qmc: dimension too large");
  const Eigen::MatrixXd L = cholesky_factor(corr);
  std::vector<double> gen(dims);
  for (std::size_t t = 0; t < dims; ++t) {
    const double s = std::sqrt(static_cast<double>(kPrimes[t]));
    gen[t] = s - std::floor(s);
  }
  std::optional<boost::math::chi_squared_distribution<double>> chi;
  if (student) chi.emplace(df);

  auto integrand = [&](std::span<const double> w) {
    double scale = 1.0;
    std::size_t next = 0;
    if (student) scale = std::sqrt(boost::math::quantile(*chi, w[next++]) / df);
    std::vector<double> y(d, 0.0);
    double f = 1.0;
    for (std::size_t i = 0; i < d; ++i) {
      double shift = 0.0;
      for (std::size_t k = 0; k < i; ++k) shift += L(i, k) * y[k];
      double e = 1.0;
      if (std::isfinite(upper[i])) e = normal_cdf((scale * upper[i] - shift) / L(i, i));
      f *= e;
      if (f == 0.0) return 0.0;
      if (i + 1 < d) {
        const double p = std::clamp(w[next++] * e, 1e-300, 1.0 - 1e-16);
        y[i] = normal_quantile(p);
      }
    }
    return f;
  };

  constexpr int kShifts = 16;
  Rng rng(0x5eedc0deULL);
  std::vector<std::vector<double>> shifts(kShifts, std::vector<double>(dims));
  for (auto& s : shifts) {
    for (double& x : s) x = uniform_open(rng);
  }
  std::vector<double> w(dims);
  double estimate = 0.0;
  for (std::size_t points = 1024; points <= (std::size_t{1} << 20); points *= 2) {
    double sum = 0.0;
    double sum_sq = 0.0;
    for (const auto& s : shifts) {
      double acc = 0.0;
      for (std::size_t k = 1; k <= points; ++k) {
        for (std::size_t t = 0; t < dims; ++t) {
          double x = static_cast<double>(k) * gen[t] + s[t];
          x -= std::floor(x);
          x = 1.0 - std::abs(2.0 * x - 1.0);
          w[t] = std::clamp(x, 1e-15, 1.0 - 1e-15);
        }
        acc += integrand(w);
      }
      acc /= static_cast<double>(points);
      sum += acc;
      sum_sq += acc * acc;
    }
    estimate = sum / kShifts;
    const double var = std::max(0.0, (sum_sq - kShifts * estimate * estimate) / (kShifts - 1));
    if (std::sqrt(var / kShifts) <= tol) return estimate;
  }
  throw NumericalFailure("elliptical_cdf_qmc: standard error target not reached");
}

inline double solve_increasing(const std::function<double(double)>& f, double target) {
  constexpr double lo = 0x1.0p-53;
  constexpr double hi = 1.0 - 0x1.0p-53;
  auto g = [&](double x) { return f(x) - target; };
  double glo = g(lo);
  double ghi = g(hi);
  if (glo >= 0.0) return lo;
  if (ghi <= 0.0) return hi;
  std::uintmax_t iters = 200;
  try {
    auto tol = [](double a, double b) { return std::abs(b - a) <= 1e-12; };
    auto [a, b] = boost::math::tools::toms748_solve(g, lo, hi, glo, ghi, tol, iters);
    if (iters < 200) return 0.5 * (a + b);
  } catch (const boost::math::evaluation_error&) {
  }
  double a = lo;
  double b = hi;
  while (b - a > 1e-12) {
    const double mid = 0.5 * (a + b);
    (g(mid) < 0.0 ? a : b) = mid;
  }
  return 0.5 * (a + b);
}

// Root of v (1 - b) + b v^2 = p in [0, 1], for |b| <= 1.
inline double quadratic_conditional_inverse(double b, double p) {
  const double c = 1.0 - b;
  return 2.0 * p / (c + std::sqrt(c * c + 4.0 * b * p));
}

}  // namespace detail

// Reference copula distribution function.
inline double cdf_reference(const CopulaSpec& spec, std::span<const double> u) {
  if (u.size() != spec.d) throw InvalidInput("cdf_reference: dimension mismatch");
  for (double x : u) {
    if (!(x >= 0.0 && x <= 1.0)) throw DomainError("cdf_reference: point outside the unit cube");
  }
  for (double x : u) {
    if (x == 0.0) return 0.0;
  }
  const double theta = spec.theta;
  switch (spec.family) {
    case CopulaFamily::independence: {
      double p = 1.0;
      for (double x : u) p *= x;
      return p;
    }
    case CopulaFamily::frank: {
      const double num = std::expm1(-theta * u[0]) * std::expm1(-theta * u[1]);
      return -std::log1p(num / std::expm1(-theta)) / theta;
    }
    case CopulaFamily::clayton: {
      double s = 1.0 - static_cast<double>(u.size());
      for (double x : u) s += std::pow(x, -theta);
      return std::pow(s, -1.0 / theta);
    }
    case CopulaFamily::gumbel: {
      if (u[0] == 1.0) return u[1];
      if (u[1] == 1.0) return u[0];
      const double s = std::pow(-std::log(u[0]), theta) + std::pow(-std::log(u[1]), theta);
      return std::exp(-std::pow(s, 1.0 / theta));
    }
    case CopulaFamily::fgm:
      return u[0] * u[1] * (1.0 - theta * (1.0 - u[0]) * (1.0 - u[1]));
    case CopulaFamily::asymmetric_sine:
      return u[0] * u[1] - detail::sine_profile(u[1]) * u[0] * (1.0 - u[0]);
    case CopulaFamily::gaussian:
    case CopulaFamily::student_t: {
      const bool student = spec.family == CopulaFamily::student_t;
      std::vector<double> upper(u.size());
      std::size_t active = 0;
      for (std::size_t j = 0; j < u.size(); ++j) {
        if (u[j] >= 1.0) {
          upper[j] = std::numeric_limits<double>::infinity();
        } else {
          ++active;
          upper[j] = student ? boost::math::quantile(boost::math::students_t_distribution<double>(spec.df), u[j])
                             : normal_quantile(u[j]);
        }
      }
      if (active == 0) return 1.0;
      if (!student && u.size() == 2) {
        return std::clamp(detail::bivariate_normal_cdf(upper[0], upper[1], spec.correlation(0, 1)), 0.0, 1.0);
      }
      if (active == 1) {
        for (double x : u) {
          if (x < 1.0) return x;
        }
      }
      return std::clamp(detail::elliptical_cdf_qmc(spec.correlation, student ? spec.df : 0.0, upper, 1e-4),
                        0.0, 1.0);
    }
  }
  return 0.0;
}

inline bool has_conditional(const CopulaSpec& spec) {
  return spec.d == 2 && spec.family != CopulaFamily::gaussian && spec.family != CopulaFamily::student_t;
}

// P(U_2 <= v | U_1 = u) for the bivariate closed-form families.
inline double conditional_cdf(const CopulaSpec& spec, double u, double v) {
  if (!has_conditional(spec)) throw InvalidInput("conditional_cdf: bivariate closed-form families only");
  const double theta = spec.theta;
  switch (spec.family) {
    case CopulaFamily::independence:
      return v;
    case CopulaFamily::frank: {
      const double a = std::expm1(-theta * u);
      const double b = std::expm1(-theta * v);
      const double c = std::expm1(-theta);
      return std::exp(-theta * u) * b / (c + a * b);
    }
    case CopulaFamily::clayton: {
      const double s = std::pow(u, -theta) + std::pow(v, -theta) - 1.0;
      return std::pow(u, -theta - 1.0) * std::pow(s, -1.0 / theta - 1.0);
    }
    case CopulaFamily::gumbel: {
      const double x = -std::log(u);
      const double y = -std::log(v);
      const double s = std::pow(x, theta) + std::pow(y, theta);
      const double a = std::pow(s, 1.0 / theta);
      return std::exp(-a) * std::pow(s, 1.0 / theta - 1.0) * std::pow(x, theta - 1.0) / u;
    }
    case CopulaFamily::fgm:
      return v * (1.0 - theta * (1.0 - v) * (1.0 - 2.0 * u));
    case CopulaFamily::asymmetric_sine:
      return v - detail::sine_profile(v) * (1.0 - 2.0 * u);
    default:
      break;
  }
  return v;
}

// Inverse of conditional_cdf in v.
inline double conditional_quantile(const CopulaSpec& spec, double u, double p) {
  const double theta = spec.theta;
  switch (spec.family) {
    case CopulaFamily::independence:
      return p;
    case CopulaFamily::frank: {
      const double e = std::exp(-theta * u);
      return -std::log1p(p * std::expm1(-theta) / (p + (1.0 - p) * e)) / theta;
    }
    case CopulaFamily::clayton: {
      const double s = (std::pow(p, -theta / (1.0 + theta)) - 1.0) * std::pow(u, -theta) + 1.0;
      return std::pow(s, -1.0 / theta);
    }
    case CopulaFamily::fgm:
      return detail::quadratic_conditional_inverse(theta * (1.0 - 2.0 * u), p);
    case CopulaFamily::gumbel:
    case CopulaFamily::asymmetric_sine:
      return detail::solve_increasing([&](double v) { return conditional_cdf(spec, u, v); }, p);
    default:
      break;
  }
  throw InvalidInput("conditional_quantile: bivariate closed-form families only");
}

inline Matrix<double> sample_reference(const CopulaSpec& spec, std::size_t M, std::uint64_t seed,
                                       unsigned threads = 1) {
  spec.validate();
  if (M < 1) throw InvalidInput("sample_reference: M must be >= 1");
  const std::size_t d = spec.d;
  switch (spec.family) {
    case CopulaFamily::independence:
      return detail::sample_rows(M, d, seed, threads, [&](Rng& rng, std::span<double> row) {
        for (double& x : row) x = uniform_open(rng);
      });
    case CopulaFamily::clayton:
      if (d > 2) {
        return detail::sample_rows(M, d, seed, threads, [&](Rng& rng, std::span<double> row) {
          const double w = std::gamma_distribution<double>(1.0 / spec.theta, 1.0)(rng);
          for (double& x : row) {
            const double e = -std::log(uniform_open(rng));
            x = detail::clamp_open(std::pow(1.0 + e / w, -1.0 / spec.theta));
          }
        });
      }
      [[fallthrough]];
    case CopulaFamily::frank:
    case CopulaFamily::gumbel:
    case CopulaFamily::fgm:
    case CopulaFamily::asymmetric_sine:
      return detail::sample_rows(M, d, seed, threads, [&](Rng& rng, std::span<double> row) {
        const double u = uniform_open(rng);
        const double p = uniform_open(rng);
        row[0] = u;
        row[1] = detail::clamp_open(conditional_quantile(spec, u, p));
      });
    case CopulaFamily::gaussian:
    case CopulaFamily::student_t: {
      const Eigen::MatrixXd L = detail::cholesky_factor(spec.correlation);
      const bool student = spec.family == CopulaFamily::student_t;
      return detail::sample_rows(M, d, seed, threads, [&](Rng& rng, std::span<double> row) {
        std::normal_distribution<double> normal;
        Eigen::VectorXd z(static_cast<Eigen::Index>(d));
        for (Eigen::Index j = 0; j < z.size(); ++j) z(j) = normal(rng);
        Eigen::VectorXd x = L * z;
        if (student) {
          const double w = std::chi_squared_distribution<double>(spec.df)(rng);
          x /= std::sqrt(w / spec.df);
          const boost::math::students_t_distribution<double> t(spec.df);
          for (std::size_t j = 0; j < d; ++j) {
            row[j] = detail::clamp_open(boost::math::cdf(t, x(static_cast<Eigen::Index>(j))));
          }
        } else {
          for (std::size_t j = 0; j < d; ++j) {
            row[j] = detail::clamp_open(normal_cdf(x(static_cast<Eigen::Index>(j))));
          }
        }
      });
    }
  }
  throw InvalidInput("sample_reference: unsupported family");
}

}  // namespace ecbc
