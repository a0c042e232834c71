#pragma once

// Empirical-Bayes selection of the Bernstein degrees.
//
// Model per observation i and coordinate j:
//   pi_i ~ Uniform{1..n},  Lambda_ij ~ Uniform(0, 1),
//   V_ij = (R_{pi_i j} - 1 + Lambda_ij) / n,  L_ij = floor(m_j V_ij),
//   U_ij | L_ij ~ Beta(L_ij + 1, m_j - L_ij),
//   m_j - 1 | alpha_j ~ Poisson(n^alpha_j),  alpha_j ~ Uniform(alpha_lo, alpha_hi).
// Lambda is integrated out exactly (the cell-overlap mixture below), pi is
// Gibbs-updated, m by a random-walk Metropolis step and alpha by an
// independence Metropolis step.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <list>
#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "ecbc/copula_core.hpp"
#include "ecbc/errors.hpp"
#include "ecbc/matrix.hpp"
#include "ecbc/parallel.hpp"
#include "ecbc/random.hpp"
#include "ecbc/special.hpp"

namespace ecbc {

enum class PriorKind { flexible, equal };

struct PriorSpec {
  PriorKind kind = PriorKind::flexible;
  double alpha_lo = 1.0 / 3.0;
  double alpha_hi = 2.0 / 3.0;

  void validate() const {
    if (!(alpha_lo > 0.0 && alpha_lo < alpha_hi && alpha_hi < 1.0)) {
      throw InvalidInput("PriorSpec: need 0 < alpha_lo < alpha_hi < 1");
    }
  }
};

struct McmcConfig {
  int chains = 2;
  int burn_in = 2000;
  int samples_per_chain = 5000;
  std::uint64_t seed = 0;
  int m_proposal_halfwidth = 3;
  int thin = 1;
  unsigned threads = 0;
  // Drops the likelihood so the chain targets the prior (diagnostics).
  bool prior_only = false;

  void validate() const {
    if (chains < 1) throw InvalidInput("McmcConfig: chains must be >= 1");
    if (burn_in < 0) throw InvalidInput("McmcConfig: burn_in must be >= 0");
    if (samples_per_chain < 1) throw InvalidInput("McmcConfig: samples_per_chain must be >= 1");
    if (m_proposal_halfwidth < 1) throw InvalidInput("McmcConfig: halfwidth must be >= 1");
    if (thin < 1) throw InvalidInput("McmcConfig: thin must be >= 1");
  }
};

struct McmcTrace {
  Matrix<int> m_samples;         // K x d
  Matrix<double> alpha_samples;  // K x d
  std::vector<int> chain_ids;    // K
  std::vector<int> iterations;   // K, post-burn-in sweep index within the chain

  std::size_t size() const { return chain_ids.size(); }
  std::size_t d() const { return m_samples.cols(); }
};

struct DegreeEstimate {
  DegreeVector modes;
  // Per dimension: distinct m value -> count.
  std::vector<std::map<int, std::size_t>> frequency_tables;
  std::vector<double> rhat_m;
  std::vector<double> rhat_alpha;
  // Share of samples whose degrees are all equal.
  double equal_fraction = 0.0;
};

// One Metropolis step on a degree, reported to an observer. dim is -1 for the
// pooled move under the equal prior.
struct DegreeMove {
  int chain = 0;
  int sweep = 0;
  int dim = 0;
  int current = 0;
  int proposed = 0;
  double alpha = 0.0;
  double log_prior_current = 0.0;
  double log_prior_proposed = 0.0;
  double loglik_current = 0.0;
  double loglik_proposed = 0.0;
  double log_uniform = 0.0;
  bool accepted = false;
  std::vector<int> pi;  // latent row assignment (0-based) at the time of the move
};

using DegreeMoveObserver = std::function<void(const DegreeMove&)>;

// ---------------------------------------------------------------------------
// Densities

// log P(Poisson(n^alpha) = m - 1); -inf for m < 1.
inline double log_shifted_poisson_prior(int m, double alpha, int n) {
  if (m < 1) return -std::numeric_limits<double>::infinity();
  const double lambda = std::pow(static_cast<double>(n), alpha);
  return (m - 1) * std::log(lambda) - lambda - log_factorial(m - 1);
}

// log of the Beta(k+1, m-k) density at u, for 0 <= k < m.
inline double log_beta_pdf_cell(double log_u, double log_1mu, int m, int k) {
  return std::log(static_cast<double>(m)) + log_choose(m - 1, k) + k * log_u +
         (m - 1 - k) * log_1mu;
}

// log p(u | rank, m) with Lambda integrated out: a mixture of Beta(k+1, m-k)
// densities weighted by the overlap of [(rank-1)/n, rank/n) with
// [k/m, (k+1)/m), scaled by n.
inline double obs_dim_loglik(double u, int rank, int m, int n) {
  if (!(u > 0.0 && u < 1.0)) throw DomainError("obs_dim_loglik: u must lie in (0, 1)");
  if (rank < 1 || rank > n || m < 1) throw InvalidInput("obs_dim_loglik: bad rank or degree");
  const CellWeights cw = cell_weights(rank, m, n);
  const double log_u = std::log(u);
  const double log_1mu = std::log1p(-u);
  double peak = -std::numeric_limits<double>::infinity();
  std::vector<double> terms(cw.weights.size());
  for (std::size_t t = 0; t < cw.weights.size(); ++t) {
    terms[t] = std::log(cw.weights[t]) +
               log_beta_pdf_cell(log_u, log_1mu, m, cw.first + static_cast<int>(t));
    peak = std::max(peak, terms[t]);
  }
  double acc = 0.0;
  for (double v : terms) acc += std::exp(v - peak);
  return peak + std::log(acc);
}

namespace detail {

// exp(obs_dim_loglik) for all (own rank a, assigned rank b) at one degree,
// stored linearly as kernel[a-1][b-1]. Entries that underflow are 0.
class KernelCache {
 public:
  KernelCache(int n, std::size_t capacity) : n_(n), capacity_(capacity) {}

  const Matrix<double>& get(int m) {
    auto it = index_.find(m);
    if (it != index_.end()) {
      order_.splice(order_.begin(), order_, it->second);
      return *it->second->second;
    }
    if (order_.size() >= capacity_) {
      index_.erase(order_.back().first);
      order_.pop_back();
    }
    order_.emplace_front(m, std::make_unique<Matrix<double>>(build(m)));
    index_[m] = order_.begin();
    return *order_.front().second;
  }

 private:
  Matrix<double> build(int m) const {
    Matrix<double> kernel(static_cast<std::size_t>(n_), static_cast<std::size_t>(n_));
    std::vector<CellWeights> cells(static_cast<std::size_t>(n_));
    for (int b = 1; b <= n_; ++b) cells[b - 1] = cell_weights(b, m, n_);
    for (int a = 1; a <= n_; ++a) {
      const double u = static_cast<double>(a) / (n_ + 1.0);
      const std::vector<double> pmf = binomial_pmf(m - 1, u);
      for (int b = 1; b <= n_; ++b) {
        const CellWeights& cw = cells[b - 1];
        double acc = 0.0;
        for (std::size_t t = 0; t < cw.weights.size(); ++t) acc += cw.weights[t] * pmf[cw.first + t];
        kernel(a - 1, b - 1) = m * acc;
      }
    }
    return kernel;
  }

  using Entry = std::pair<int, std::unique_ptr<Matrix<double>>>;
  int n_;
  std::size_t capacity_;
  std::list<Entry> order_;
  std::unordered_map<int, std::list<Entry>::iterator> index_;
};

struct ChainResult {
  std::vector<int> m;        // samples x d
  std::vector<double> alpha; // samples x d
  std::vector<int> iterations;
};

class Chain {
 public:
  Chain(const RankMatrix& ranks, const PriorSpec& prior, const McmcConfig& config, int chain_id,
        const DegreeMoveObserver* observer)
      : ranks_(ranks),
        prior_(prior),
        config_(config),
        chain_id_(chain_id),
        observer_(observer),
        n_(static_cast<int>(ranks.n())),
        d_(ranks.d()),
        params_(prior.kind == PriorKind::equal ? 1 : ranks.d()),
        rng_(derive_seed(config.seed, static_cast<std::uint64_t>(chain_id))),
        cache_(static_cast<int>(ranks.n()), 32),
        pi_(ranks.n()),
        weights_(ranks.n()) {
    const int m0 = std::max(2, static_cast<int>(std::lround(std::sqrt(static_cast<double>(n_)))));
    m_.assign(params_, m0);
    alpha_.assign(params_, 0.5);
    for (std::size_t i = 0; i < pi_.size(); ++i) pi_[i] = static_cast<int>(i);
  }

  ChainResult run() {
    ChainResult out;
    const int total = config_.burn_in + config_.samples_per_chain * config_.thin;
    out.m.reserve(static_cast<std::size_t>(config_.samples_per_chain) * d_);
    out.alpha.reserve(out.m.capacity());
    for (int sweep = 0; sweep < total; ++sweep) {
      if (!config_.prior_only) update_pi();
      for (std::size_t p = 0; p < params_; ++p) update_m(p, sweep);
      for (std::size_t p = 0; p < params_; ++p) update_alpha(p);
      const int post = sweep - config_.burn_in;
      if (post >= 0 && (post + 1) % config_.thin == 0) {
        for (std::size_t j = 0; j < d_; ++j) {
          const std::size_t p = params_ == 1 ? 0 : j;
          out.m.push_back(m_[p]);
          out.alpha.push_back(alpha_[p]);
        }
        out.iterations.push_back(post);
      }
    }
    return out;
  }

 private:
  int degree_of(std::size_t j) const { return m_[params_ == 1 ? 0 : j]; }

  void update_pi() {
    std::vector<const Matrix<double>*> kernels(d_);
    for (std::size_t j = 0; j < d_; ++j) kernels[j] = &cache_.get(degree_of(j));
    for (std::size_t i = 0; i < ranks_.n(); ++i) {
      std::fill(weights_.begin(), weights_.end(), 1.0);
      for (std::size_t j = 0; j < d_; ++j) {
        const auto row = kernels[j]->row(static_cast<std::size_t>(ranks_(i, j) - 1));
        for (std::size_t r = 0; r < ranks_.n(); ++r) {
          weights_[r] *= row[static_cast<std::size_t>(ranks_(r, j) - 1)];
        }
      }
      double total = 0.0;
      for (double w : weights_) total += w;
      if (!(total > 0.0) || !std::isfinite(total)) {
        log_weights(i);
        total = 0.0;
        for (double w : weights_) total += w;
      }
      double target = uniform_open(rng_) * total;
      std::size_t pick = ranks_.n() - 1;
      for (std::size_t r = 0; r < ranks_.n(); ++r) {
        target -= weights_[r];
        if (target <= 0.0 && weights_[r] > 0.0) {
          pick = r;
          break;
        }
      }
      pi_[i] = static_cast<int>(pick);
    }
  }

  // Fallback when every linear-scale weight underflowed.
  void log_weights(std::size_t i) {
    std::vector<double> lw(ranks_.n(), 0.0);
    for (std::size_t j = 0; j < d_; ++j) {
      const double u = ranks_(i, j) / (n_ + 1.0);
      for (std::size_t r = 0; r < ranks_.n(); ++r) {
        lw[r] += obs_dim_loglik(u, ranks_(r, j), degree_of(j), n_);
      }
    }
    const double peak = *std::max_element(lw.begin(), lw.end());
    for (std::size_t r = 0; r < ranks_.n(); ++r) weights_[r] = std::exp(lw[r] - peak);
  }

  double dim_loglik(std::size_t j, int m) const {
    double total = 0.0;
    for (std::size_t i = 0; i < ranks_.n(); ++i) {
      const double u = ranks_(i, j) / (n_ + 1.0);
      total += obs_dim_loglik(u, ranks_(static_cast<std::size_t>(pi_[i]), j), m, n_);
    }
    return total;
  }

  double param_loglik(std::size_t p, int m) const {
    if (config_.prior_only) return 0.0;
    if (params_ == 1) {
      double total = 0.0;
      for (std::size_t j = 0; j < d_; ++j) total += dim_loglik(j, m);
      return total;
    }
    return dim_loglik(p, m);
  }

  void update_m(std::size_t p, int sweep) {
    const int w = config_.m_proposal_halfwidth;
    const int step = 1 + static_cast<int>(uniform_index(rng_, static_cast<std::size_t>(w)));
    const int sign = uniform_open(rng_) < 0.5 ? -1 : 1;
    const int current = m_[p];
    const int proposed = current + sign * step;
    const double log_u = std::log(uniform_open(rng_));

    DegreeMove move;
    move.chain = chain_id_;
    move.sweep = sweep;
    move.dim = params_ == 1 ? -1 : static_cast<int>(p);
    move.current = current;
    move.proposed = proposed;
    move.alpha = alpha_[p];
    move.log_uniform = log_u;
    move.log_prior_current = log_shifted_poisson_prior(current, alpha_[p], n_);
    move.log_prior_proposed = log_shifted_poisson_prior(proposed, alpha_[p], n_);
    if (proposed >= 1) {
      move.loglik_current = param_loglik(p, current);
      move.loglik_proposed = param_loglik(p, proposed);
      const double log_ratio = move.log_prior_proposed - move.log_prior_current +
                               move.loglik_proposed - move.loglik_current;
      move.accepted = log_u < log_ratio;
    }
    if (move.accepted) m_[p] = proposed;
    if (observer_ != nullptr && *observer_) {
      move.pi = pi_;
      (*observer_)(move);
    }
  }

  void update_alpha(std::size_t p) {
    const double proposal = prior_.alpha_lo + (prior_.alpha_hi - prior_.alpha_lo) * uniform_open(rng_);
    const double log_ratio = log_shifted_poisson_prior(m_[p], proposal, n_) -
                             log_shifted_poisson_prior(m_[p], alpha_[p], n_);
    if (std::log(uniform_open(rng_)) < log_ratio) alpha_[p] = proposal;
  }

  const RankMatrix& ranks_;
  const PriorSpec& prior_;
  const McmcConfig& config_;
  int chain_id_;
  const DegreeMoveObserver* observer_;
  int n_;
  std::size_t d_;
  std::size_t params_;
  Rng rng_;
  KernelCache cache_;
  std::vector<int> pi_;
  std::vector<double> weights_;
  std::vector<int> m_;
  std::vector<double> alpha_;
};

}  // namespace detail

// Runs config.chains independent chains (concurrently when threads allow).
// The observer, if set, is called from the chain's thread.
inline McmcTrace mcmc_run(const RankMatrix& ranks, const PriorSpec& prior, const McmcConfig& config,
                          const DegreeMoveObserver& observer = {}) {
  if (ranks.n() < 2) throw InvalidInput("mcmc_run: need n >= 2");
  prior.validate();
  config.validate();
  std::vector<detail::ChainResult> results(static_cast<std::size_t>(config.chains));
  const DegreeMoveObserver* obs = observer ? &observer : nullptr;
  parallel_for(results.size(), config.threads, [&](std::size_t c) {
    detail::Chain chain(ranks, prior, config, static_cast<int>(c), obs);
    results[c] = chain.run();
  });

  const std::size_t d = ranks.d();
  const std::size_t per_chain = static_cast<std::size_t>(config.samples_per_chain);
  McmcTrace trace;
  trace.m_samples = Matrix<int>(per_chain * results.size(), d);
  trace.alpha_samples = Matrix<double>(per_chain * results.size(), d);
  std::size_t row = 0;
  for (std::size_t c = 0; c < results.size(); ++c) {
    for (std::size_t s = 0; s < per_chain; ++s, ++row) {
      for (std::size_t j = 0; j < d; ++j) {
        trace.m_samples(row, j) = results[c].m[s * d + j];
        trace.alpha_samples(row, j) = results[c].alpha[s * d + j];
      }
      trace.chain_ids.push_back(static_cast<int>(c));
      trace.iterations.push_back(results[c].iterations[s]);
    }
  }
  return trace;
}

// Split-Rhat of one scalar parameter; each chain is cut into two halves.
// Returns 1 for a constant parameter and +inf when halves are internally
// constant but disagree.
inline double split_rhat(const std::vector<std::vector<double>>& chains) {
  std::vector<std::vector<double>> halves;
  for (const auto& c : chains) {
    const std::size_t half = c.size() / 2;
    if (half < 1) continue;
    halves.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(half));
    halves.emplace_back(c.end() - static_cast<std::ptrdiff_t>(half), c.end());
  }
  if (halves.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const double len = static_cast<double>(halves.front().size());
  std::vector<double> means;
  double within = 0.0;
  for (const auto& h : halves) {
    double mean = 0.0;
    for (double v : h) mean += v;
    mean /= len;
    double ss = 0.0;
    for (double v : h) ss += (v - mean) * (v - mean);
    within += len > 1 ? ss / (len - 1) : 0.0;
    means.push_back(mean);
  }
  within /= static_cast<double>(halves.size());
  double grand = 0.0;
  for (double v : means) grand += v;
  grand /= static_cast<double>(means.size());
  double between = 0.0;
  for (double v : means) between += (v - grand) * (v - grand);
  between *= len / (static_cast<double>(means.size()) - 1.0);
  if (within == 0.0) return between == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  const double pooled = (len - 1.0) / len * within + between / len;
  return std::sqrt(pooled / within);
}

inline DegreeEstimate posterior_mode(const McmcTrace& trace) {
  if (trace.size() == 0) throw InvalidInput("posterior_mode: empty trace");
  const std::size_t d = trace.d();
  DegreeEstimate est;
  est.frequency_tables.resize(d);
  std::vector<int> modes(d);
  int max_chain = 0;
  for (int c : trace.chain_ids) max_chain = std::max(max_chain, c);
  for (std::size_t j = 0; j < d; ++j) {
    auto& table = est.frequency_tables[j];
    for (std::size_t s = 0; s < trace.size(); ++s) ++table[trace.m_samples(s, j)];
    std::size_t best = 0;
    for (const auto& [value, count] : table) {
      if (count > best) {  // ascending keys: ties keep the smallest value
        best = count;
        modes[j] = value;
      }
    }
    std::vector<std::vector<double>> m_chains(static_cast<std::size_t>(max_chain) + 1);
    std::vector<std::vector<double>> a_chains(m_chains.size());
    for (std::size_t s = 0; s < trace.size(); ++s) {
      m_chains[trace.chain_ids[s]].push_back(trace.m_samples(s, j));
      a_chains[trace.chain_ids[s]].push_back(trace.alpha_samples(s, j));
    }
    est.rhat_m.push_back(split_rhat(m_chains));
    est.rhat_alpha.push_back(split_rhat(a_chains));
  }
  std::size_t equal = 0;
  for (std::size_t s = 0; s < trace.size(); ++s) {
    bool same = true;
    for (std::size_t j = 1; j < d && same; ++j) same = trace.m_samples(s, j) == trace.m_samples(s, 0);
    equal += same;
  }
  est.equal_fraction = static_cast<double>(equal) / static_cast<double>(trace.size());
  est.modes = DegreeVector(std::move(modes));
  return est;
}

// Ranks -> posterior-mode degrees -> fitted model.
inline EcbcModel fit_ecbc(const RankMatrix& ranks, const PriorSpec& prior, const McmcConfig& config) {
  const McmcTrace trace = mcmc_run(ranks, prior, config);
  return EcbcModel(ranks, posterior_mode(trace).modes);
}

}  // namespace ecbc
