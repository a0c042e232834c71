#pragma once

// Bounded-variable revised primal simplex for small-row, many-column LPs:
//
//   min c.x  s.t.  A x = b,  lower <= x <= upper  (bounds may be infinite).
//
// The basis inverse is kept dense (rows x rows) with eta updates and periodic
// refactorization. Pricing is Dantzig's rule; after a run of degenerate
// pivots it falls back to Bland's rule until progress resumes.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ecbc/errors.hpp"
#include "ecbc/matrix.hpp"

namespace ecbc {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct BoundedLp {
  // One row of `columns` per variable: column A_v of the constraint matrix.
  Matrix<double> columns;
  std::vector<double> cost;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<double> rhs;

  std::size_t num_rows() const { return rhs.size(); }
  std::size_t num_vars() const { return cost.size(); }
};

enum class LpStatus { optimal, infeasible, unbounded, iteration_limit };

struct LpResult {
  LpStatus status = LpStatus::iteration_limit;
  std::vector<double> x;
  std::vector<double> duals;  // simplex multipliers y with reduced cost c - A^T y
  double objective = 0.0;
  int iterations = 0;
};

struct SimplexOptions {
  // Optional starting point: nonbasic variables flagged here start at their
  // upper bound instead of their lower bound.
  std::vector<char> start_at_upper;
  int max_iterations = 200000;
  int refactor_interval = 64;
  int degenerate_limit = 50;
  double feasibility_tol = 1e-9;
  double optimality_tol = 1e-11;
  double pivot_tol = 1e-9;
};

namespace detail {

class BoundedSimplex {
 public:
  BoundedSimplex(const BoundedLp& lp, const SimplexOptions& opt) : opt_(opt) {
    rows_ = lp.num_rows();
    const std::size_t n = lp.num_vars();
    if (lp.columns.rows() != n || lp.columns.cols() != rows_ || lp.lower.size() != n ||
        lp.upper.size() != n) {
      throw InvalidInput("BoundedLp: inconsistent dimensions");
    }
    structural_ = n;
    // Structural variables followed by one artificial per row.
    cols_ = Matrix<double>(n + rows_, rows_, 0.0);
    std::copy(lp.columns.data().begin(), lp.columns.data().end(), cols_.data().begin());
    lower_ = lp.lower;
    upper_ = lp.upper;
    cost_ = lp.cost;
    rhs_ = lp.rhs;
    for (std::size_t v = 0; v < n; ++v) {
      if (lower_[v] > upper_[v]) throw InvalidInput("BoundedLp: lower bound exceeds upper bound");
    }

    x_.assign(n + rows_, 0.0);
    for (std::size_t v = 0; v < n; ++v) {
      const bool want_upper = v < opt.start_at_upper.size() && opt.start_at_upper[v];
      if (std::isfinite(lower_[v]) && !(want_upper && std::isfinite(upper_[v]))) {
        x_[v] = lower_[v];
      } else if (std::isfinite(upper_[v])) {
        x_[v] = upper_[v];
      } else {
        x_[v] = 0.0;
      }
    }
    // Artificials absorb the residual with a nonnegative value.
    std::vector<double> residual = rhs_;
    for (std::size_t v = 0; v < n; ++v) {
      if (x_[v] == 0.0) continue;
      const auto col = cols_.row(v);
      for (std::size_t r = 0; r < rows_; ++r) residual[r] -= col[r] * x_[v];
    }
    basis_.resize(rows_);
    is_basic_.assign(n + rows_, -1);
    for (std::size_t r = 0; r < rows_; ++r) {
      const std::size_t a = n + r;
      cols_(a, r) = residual[r] >= 0.0 ? 1.0 : -1.0;
      x_[a] = std::abs(residual[r]);
      lower_.push_back(0.0);
      upper_.push_back(kInf);
      basis_[r] = a;
      is_basic_[a] = static_cast<int>(r);
    }
    binv_ = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(rows_), static_cast<Eigen::Index>(rows_));
    for (std::size_t r = 0; r < rows_; ++r) binv_(r, r) = cols_(n + r, r);
  }

  LpResult solve() {
    LpResult result;
    // Phase 1: minimize the sum of artificials.
    std::vector<double> phase1(structural_ + rows_, 0.0);
    for (std::size_t r = 0; r < rows_; ++r) phase1[structural_ + r] = 1.0;
    LpStatus status = iterate(phase1, result.iterations);
    if (status == LpStatus::iteration_limit) {
      result.status = status;
      return result;
    }
    double infeasibility = 0.0;
    for (std::size_t r = 0; r < rows_; ++r) infeasibility += x_[structural_ + r];
    double scale = 1.0;
    for (double b : rhs_) scale = std::max(scale, std::abs(b));
    if (infeasibility > opt_.feasibility_tol * scale * 10.0) {
      result.status = LpStatus::infeasible;
      return result;
    }
    // Artificials are pinned at zero for phase 2.
    for (std::size_t r = 0; r < rows_; ++r) {
      const std::size_t a = structural_ + r;
      upper_[a] = 0.0;
      x_[a] = 0.0;
    }
    recompute_basic_values();

    std::vector<double> phase2 = cost_;
    phase2.resize(structural_ + rows_, 0.0);
    status = iterate(phase2, result.iterations);
    result.status = status;
    result.x.assign(x_.begin(), x_.begin() + static_cast<std::ptrdiff_t>(structural_));
    result.duals = multipliers(phase2);
    result.objective = 0.0;
    for (std::size_t v = 0; v < structural_; ++v) result.objective += cost_[v] * result.x[v];
    return result;
  }

 private:
  std::vector<double> multipliers(const std::vector<double>& c) const {
    Eigen::VectorXd cb(static_cast<Eigen::Index>(rows_));
    for (std::size_t r = 0; r < rows_; ++r) cb(r) = c[basis_[r]];
    const Eigen::VectorXd y = binv_.transpose() * cb;
    return {y.data(), y.data() + y.size()};
  }

  double column_dot(std::size_t v, const std::vector<double>& y) const {
    const auto col = cols_.row(v);
    double s = 0.0;
    for (std::size_t r = 0; r < rows_; ++r) s += col[r] * y[r];
    return s;
  }

  void refactor() {
    Eigen::MatrixXd B(static_cast<Eigen::Index>(rows_), static_cast<Eigen::Index>(rows_));
    for (std::size_t r = 0; r < rows_; ++r) {
      const auto col = cols_.row(basis_[r]);
      for (std::size_t i = 0; i < rows_; ++i) B(i, r) = col[i];
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(B);
    if (!lu.isInvertible()) throw NumericalFailure("simplex: singular basis on refactorization");
    binv_ = lu.inverse();
    recompute_basic_values();
  }

  void recompute_basic_values() {
    Eigen::VectorXd residual(static_cast<Eigen::Index>(rows_));
    for (std::size_t r = 0; r < rows_; ++r) residual(r) = rhs_[r];
    for (std::size_t v = 0; v < x_.size(); ++v) {
      if (is_basic_[v] >= 0 || x_[v] == 0.0) continue;
      const auto col = cols_.row(v);
      for (std::size_t r = 0; r < rows_; ++r) residual(r) -= col[r] * x_[v];
    }
    const Eigen::VectorXd xb = binv_ * residual;
    for (std::size_t r = 0; r < rows_; ++r) x_[basis_[r]] = xb(r);
  }

  LpStatus iterate(const std::vector<double>& c, int& iterations) {
    int since_refactor = 0;
    int degenerate_run = 0;
    bool bland = false;
    const std::size_t total = x_.size();
    Eigen::VectorXd column(static_cast<Eigen::Index>(rows_));
    double cost_scale = 1.0;
    for (double v : c) cost_scale = std::max(cost_scale, std::abs(v));
    const double opt_tol = opt_.optimality_tol * cost_scale;

    while (true) {
      if (iterations >= opt_.max_iterations) return LpStatus::iteration_limit;
      const std::vector<double> y = multipliers(c);

      // Pricing.
      std::size_t entering = total;
      double best = 0.0;
      int direction = 0;
      for (std::size_t v = 0; v < total; ++v) {
        if (is_basic_[v] >= 0 || lower_[v] == upper_[v]) continue;
        const double dj = c[v] - column_dot(v, y);
        int dir = 0;
        const bool at_lower = std::isfinite(lower_[v]) && x_[v] <= lower_[v];
        const bool at_upper = std::isfinite(upper_[v]) && x_[v] >= upper_[v];
        if (dj < -opt_tol && !at_upper) dir = 1;
        if (dj > opt_tol && !at_lower) dir = -1;
        if (dir == 0) continue;
        if (bland) {
          entering = v;
          direction = dir;
          break;
        }
        if (std::abs(dj) > best) {
          best = std::abs(dj);
          entering = v;
          direction = dir;
        }
      }
      if (entering == total) return LpStatus::optimal;

      // Ratio test along x_B(t) = x_B - t * dir * Binv A_q.
      const auto acol = cols_.row(entering);
      for (std::size_t r = 0; r < rows_; ++r) column(r) = acol[r];
      const Eigen::VectorXd alpha = binv_ * column;
      double step = upper_[entering] - lower_[entering];  // bound flip
      std::size_t leave_row = rows_;
      bool leave_to_upper = false;
      for (std::size_t r = 0; r < rows_; ++r) {
        const double rate = direction * alpha(r);
        if (std::abs(rate) <= opt_.pivot_tol) continue;
        const std::size_t b = basis_[r];
        double limit;
        bool to_upper;
        if (rate > 0.0) {
          if (!std::isfinite(lower_[b])) continue;
          limit = (x_[b] - lower_[b]) / rate;
          to_upper = false;
        } else {
          if (!std::isfinite(upper_[b])) continue;
          limit = (upper_[b] - x_[b]) / -rate;
          to_upper = true;
        }
        limit = std::max(limit, 0.0);
        const bool better = limit < step ||
                            (limit == step && leave_row < rows_ &&
                             (bland ? b < basis_[leave_row] : std::abs(alpha(r)) > std::abs(alpha(leave_row))));
        if (better) {
          step = limit;
          leave_row = r;
          leave_to_upper = to_upper;
        }
      }
      if (!std::isfinite(step)) return LpStatus::unbounded;

      ++iterations;
      for (std::size_t r = 0; r < rows_; ++r) x_[basis_[r]] -= step * direction * alpha(r);
      x_[entering] += step * direction;

      if (step <= 0.0) {
        if (++degenerate_run >= opt_.degenerate_limit) bland = true;
      } else {
        degenerate_run = 0;
        bland = false;
      }

      if (leave_row == rows_) {
        // Entering variable moved to its opposite bound.
        x_[entering] = direction > 0 ? upper_[entering] : lower_[entering];
        continue;
      }
      const std::size_t leaving = basis_[leave_row];
      x_[leaving] = leave_to_upper ? upper_[leaving] : lower_[leaving];
      is_basic_[leaving] = -1;
      basis_[leave_row] = entering;
      is_basic_[entering] = static_cast<int>(leave_row);

      // Eta update of the basis inverse.
      const double pivot = alpha(leave_row);
      binv_.row(leave_row) /= pivot;
      for (std::size_t r = 0; r < rows_; ++r) {
        if (r == leave_row || alpha(r) == 0.0) continue;
        binv_.row(r) -= alpha(r) * binv_.row(leave_row);
      }
      if (++since_refactor >= opt_.refactor_interval) {
        refactor();
        since_refactor = 0;
      }
    }
  }

  const SimplexOptions& opt_;
  std::size_t rows_ = 0;
  std::size_t structural_ = 0;
  Matrix<double> cols_;
  std::vector<double> lower_, upper_, cost_, rhs_, x_;
  std::vector<std::size_t> basis_;
  std::vector<int> is_basic_;
  Eigen::MatrixXd binv_;
};

}  // namespace detail

inline LpResult solve_bounded_simplex(const BoundedLp& lp, const SimplexOptions& options = {}) {
  detail::BoundedSimplex solver(lp, options);
  return solver.solve();
}

}  // namespace ecbc
