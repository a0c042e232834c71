#pragma once

// Draws from fitted checkerboard and ECBC copulas.

#include <algorithm>
#include <cstdint>
#include <vector>

#include "ecbc/copula_core.hpp"
#include "ecbc/errors.hpp"
#include "ecbc/matrix.hpp"
#include "ecbc/parallel.hpp"
#include "ecbc/random.hpp"

namespace ecbc {

// Rows are generated in blocks of this size, each block from its own derived
// seed, so output does not depend on the thread count.
inline constexpr std::size_t kSampleBlock = 1024;

namespace detail {

inline double clamp_open(double x) {
  constexpr double lo = 0x1.0p-53;
  return std::clamp(x, lo, 1.0 - lo);
}

template <typename RowFn>
Matrix<double> sample_rows(std::size_t rows, std::size_t d, std::uint64_t seed, unsigned threads,
                           RowFn&& row_fn) {
  Matrix<double> out(rows, d);
  const std::size_t blocks = (rows + kSampleBlock - 1) / kSampleBlock;
  parallel_for(blocks, threads, [&](std::size_t b) {
    Rng rng(derive_seed(seed, b));
    const std::size_t end = std::min(rows, (b + 1) * kSampleBlock);
    for (std::size_t r = b * kSampleBlock; r < end; ++r) row_fn(rng, out.row(r));
  });
  return out;
}

inline int draw_cell(Rng& rng, const CellWeights& cw) {
  if (cw.weights.size() == 1) return cw.first;
  double target = uniform_open(rng);
  for (std::size_t t = 0; t + 1 < cw.weights.size(); ++t) {
    target -= cw.weights[t];
    if (target <= 0.0) return cw.first + static_cast<int>(t);
  }
  return cw.last();
}

}  // namespace detail

// Row law: pick an observation i uniformly, then per coordinate a Bernstein
// cell k with probability h_ij(k) and U_j ~ Beta(k + 1, m_j - k). Mixing over
// i reproduces the weights w~, so this is an exact draw from the ECBC.
inline Matrix<double> sample_ecbc(const EcbcModel& model, std::size_t M, std::uint64_t seed,
                                  unsigned threads = 1) {
  if (M < 1) throw InvalidInput("sample_ecbc: M must be >= 1");
  const std::size_t n = model.n();
  const std::size_t d = model.d();
  // Cell weights for every (rank, dimension) pair.
  std::vector<std::vector<CellWeights>> cells(d, std::vector<CellWeights>(n));
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t r = 0; r < n; ++r) {
      cells[j][r] = cell_weights(static_cast<int>(r + 1), model.degrees()[j], static_cast<int>(n));
    }
  }
  return detail::sample_rows(M, d, seed, threads, [&](Rng& rng, std::span<double> row) {
    const std::size_t i = uniform_index(rng, n);
    for (std::size_t j = 0; j < d; ++j) {
      const int m = model.degrees()[j];
      const int k = detail::draw_cell(rng, cells[j][model.ranks()(i, j) - 1]);
      row[j] = detail::clamp_open(beta_draw(rng, k + 1.0, static_cast<double>(m - k)));
    }
  });
}

inline Matrix<double> sample_checkerboard(const RankMatrix& ranks, std::size_t M, std::uint64_t seed,
                                          unsigned threads = 1) {
  if (M < 1) throw InvalidInput("sample_checkerboard: M must be >= 1");
  const double n = static_cast<double>(ranks.n());
  return detail::sample_rows(M, ranks.d(), seed, threads, [&](Rng& rng, std::span<double> row) {
    const std::size_t i = uniform_index(rng, ranks.n());
    for (std::size_t j = 0; j < ranks.d(); ++j) {
      row[j] = detail::clamp_open((ranks(i, j) - 1.0 + uniform_open(rng)) / n);
    }
  });
}

}  // namespace ecbc
