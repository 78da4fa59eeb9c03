#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mmcd/chi_square.hpp"
#include "mmcd/error.hpp"
#include "mmcd/flip_flop.hpp"
#include "mmcd/matrix_stack.hpp"
#include "mmcd/matvar.hpp"
#include "mmcd/parallel.hpp"
#include "mmcd/param_set.hpp"
#include "mmcd/seeding.hpp"

namespace mmcd {

// ---------------------------------------------------------------------------
// Closed-form helpers
// ---------------------------------------------------------------------------

/// c(alpha) = alpha / F_{chi2_{pq+2}}(chi2_{alpha; pq}); makes the trimmed
/// Kronecker covariance consistent at the matrix normal model.
inline double consistency_factor(double alpha, std::size_t pq) {
  if (!(alpha >= 0.5 && alpha <= 1.0))
    throw PreconditionError("consistency factor needs alpha in [0.5, 1], got " + std::to_string(alpha));
  if (pq == 0) throw PreconditionError("consistency factor needs pq >= 1");
  if (alpha == 1.0) return 1.0;
  const double dof = static_cast<double>(pq);
  const double cutoff = stats::chi_square_quantile(alpha, dof);
  return alpha / stats::chi_square_cdf(cutoff, dof + 2.0);
}

struct BreakdownInfo {
  std::size_t d = 0;       // floor(p/q + q/p)
  std::size_t h = 0;       // floor((n + d + 2) / 2)
  std::size_t m = 0;       // replacements tolerated: min(n - h + 1, h - (d + 1))
  bool reduces_to_mcd = false;  // p == 1 or q == 1: the breakdown bound does not apply
  std::size_t mcd_h = 0;   // floor((n + pq + 1) / 2), the vector MCD convention
};

/// Subset size with maximal breakdown point and the corresponding count of
/// arbitrarily replaceable observations.
inline BreakdownInfo max_breakdown_h(std::size_t n, std::size_t p, std::size_t q) {
  if (p == 0 || q == 0) throw PreconditionError("p and q must be positive");
  BreakdownInfo b;
  b.d = ratio_floor(p, q);
  b.h = (n + b.d + 2) / 2;
  const long long a1 = static_cast<long long>(n) - static_cast<long long>(b.h) + 1;
  const long long a2 = static_cast<long long>(b.h) - static_cast<long long>(b.d + 1);
  b.m = static_cast<std::size_t>(std::max(0LL, std::min(a1, a2)));
  b.reduces_to_mcd = (p == 1 || q == 1);
  b.mcd_h = (n + p * q + 1) / 2;
  return b;
}

/// Large-n probability that at least one of m random subsets of size d + 2 is
/// free of contamination.
inline double clean_subset_probability(double epsilon, std::size_t d, std::size_t m) {
  if (!(epsilon >= 0.0 && epsilon < 1.0)) throw PreconditionError("epsilon must lie in [0, 1)");
  if (m < 1) throw PreconditionError("subset count must be at least 1");
  const double clean = std::pow(1.0 - epsilon, static_cast<double>(d + 2));
  return 1.0 - std::pow(1.0 - clean, static_cast<double>(m));
}

/// Number of subsets of size d + 2 needed for probability beta of at least one
/// clean subset.
inline std::size_t required_subsets(double epsilon, std::size_t d, double beta) {
  if (!(epsilon >= 0.0 && epsilon < 1.0)) throw PreconditionError("epsilon must lie in [0, 1)");
  if (!(beta > 0.0 && beta < 1.0)) throw PreconditionError("beta must lie in (0, 1)");
  const double clean = std::pow(1.0 - epsilon, static_cast<double>(d + 2));
  if (clean >= 1.0) return 1;
  const double m = std::ceil(std::log(1.0 - beta) / std::log(1.0 - clean));
  return std::max<std::size_t>(1, static_cast<std::size_t>(m));
}

// ---------------------------------------------------------------------------
// Configuration and results
// ---------------------------------------------------------------------------

enum class Subsampling { off, automatic };

struct MMCDConfig {
  std::optional<std::size_t> h;  // default floor((n + d + 2) / 2)
  std::size_t n_initial_subsets = 500;
  std::size_t n_keep = 10;
  int initial_iters = 2;  // C-steps and flip-flop iterations per trial
  double cstep_tol = 1e-8;
  std::uint64_t rng_seed = 0;
  Subsampling subsampling = Subsampling::automatic;
  std::size_t subsample_threshold = 1000;
  std::size_t subsample_block = 300;
  double reweight_quantile = 0.975;
  double detection_quantile = 0.975;
  int max_csteps = 200;
  // Run the trial-phase flip-flops to convergence (with `mle`) instead of
  // capping them at initial_iters. Slower, but the whole search is then
  // affine equivariant: capped iterates from the identity start are not.
  bool converge_trials = false;
  FlipFlopConfig mle;  // used wherever the flip-flop runs to convergence
  unsigned threads = 0;  // 0: MMCD_THREADS or hardware concurrency

  std::size_t resolved_h(std::size_t n, std::size_t p, std::size_t q) const {
    return h ? *h : (n + ratio_floor(p, q) + 2) / 2;
  }

  void validate(std::size_t n, std::size_t p, std::size_t q) const {
    const std::size_t elemental = min_subset_size(p, q);
    if (n < elemental)
      throw PreconditionError("n = " + std::to_string(n) + " observations; at least d + 2 = " +
                              std::to_string(elemental) + " are required for " + std::to_string(p) +
                              "x" + std::to_string(q) + " matrices");
    const std::size_t hh = resolved_h(n, p, q);
    if (2 * hh < n || hh > n || hh < elemental)
      throw PreconditionError("h = " + std::to_string(hh) + " must satisfy n/2 <= h <= n and h >= " +
                              std::to_string(elemental) + " (n = " + std::to_string(n) + ")");
    if (n_initial_subsets < 1) throw PreconditionError("at least one initial subset is required");
    if (n_keep < 1 || n_keep > n_initial_subsets)
      throw PreconditionError("n_keep must lie in [1, n_initial_subsets]");
    if (initial_iters < 1) throw PreconditionError("initial_iters must be at least 1");
    if (!(cstep_tol > 0.0)) throw PreconditionError("cstep_tol must be positive");
    if (max_csteps < 1) throw PreconditionError("max_csteps must be at least 1");
    if (subsample_block < 1) throw PreconditionError("subsample block size must be positive");
    for (double qv : {reweight_quantile, detection_quantile})
      if (!(qv > 0.0 && qv < 1.0)) throw PreconditionError("quantiles must lie in (0, 1)");
    mle.validate();
  }
};

struct TrialRecord {
  std::size_t block = 0;
  std::size_t index = 0;
  int attempts = 0;
  bool ok = false;
  double objective = std::numeric_limits<double>::infinity();
  std::vector<double> cstep_objectives;  // after each h-subset refit
};

struct MMCDFit {
  std::size_t h = 0;
  ParamSet raw;         // consistency-scaled
  ParamSet reweighted;  // consistency-scaled
  std::vector<std::size_t> h_subset;  // sorted
  std::vector<std::uint8_t> weights;  // 1 for observations in the reweighting set
  std::vector<double> distances_raw;
  std::vector<double> distances_reweighted;
  double objective = 0.0;  // of the unscaled raw fit
  double c_raw = 1.0;
  double c_rew = 1.0;
  std::vector<TrialRecord> trial_log;
  std::vector<std::vector<double>> final_traces;  // objective per C-step, one per refined candidate
  int cstep_iterations = 0;  // C-steps taken by the winning candidate

  std::size_t reweighted_count() const {
    return static_cast<std::size_t>(std::count(weights.begin(), weights.end(), std::uint8_t{1}));
  }
};

// ---------------------------------------------------------------------------
// C-steps
// ---------------------------------------------------------------------------

/// Indices of the h smallest distances, ties broken by ascending index,
/// returned in ascending index order.
inline std::vector<std::size_t> smallest_h(std::span<const double> distances, std::size_t h) {
  std::vector<std::size_t> order(distances.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return distances[a] < distances[b]; });
  order.resize(h);
  std::sort(order.begin(), order.end());
  return order;
}

struct CStepResult {
  std::vector<std::size_t> subset_out;
  MLEFit fit;  // fitted on subset_in
  std::vector<double> distances;
  bool fixed_point = false;
};

/// One concentration step: fit on `subset_in`, score all observations, keep
/// the `h` closest. `warm_col` seeds the flip-flop's column covariance.
inline CStepResult cstep(const MatrixStack& stack, std::span<const std::size_t> subset_in,
                         std::size_t h, const FlipFlopConfig& mle_cfg,
                         const std::optional<Matrix>& warm_col = std::nullopt) {
  if (h > stack.n()) throw PreconditionError("h exceeds the number of observations");
  CStepResult r;
  r.fit = flip_flop_mle(stack, subset_in, mle_cfg, warm_col);
  r.distances = mmd_squared(stack, r.fit.params);
  r.subset_out = smallest_h(r.distances, h);
  std::vector<std::size_t> sorted_in(subset_in.begin(), subset_in.end());
  std::sort(sorted_in.begin(), sorted_in.end());
  r.fixed_point = (sorted_in == r.subset_out);
  return r;
}

/// C-step with the subset size taken from the configuration.
inline CStepResult cstep(const MatrixStack& stack, std::span<const std::size_t> subset_in,
                         const MMCDConfig& cfg) {
  cfg.validate(stack.n(), stack.p(), stack.q());
  const std::size_t h = cfg.resolved_h(stack.n(), stack.p(), stack.q());
  if (subset_in.size() != h)
    throw PreconditionError("C-step input subset must have exactly h = " + std::to_string(h) + " indices");
  return cstep(stack, subset_in, h, cfg.mle);
}

struct ConcentrationResult {
  std::vector<std::size_t> subset;
  MLEFit fit;
  std::vector<double> distances;  // against fit.params
  std::vector<double> objective_trace;
  int steps = 0;
  bool fixed_point = false;
};

/// Iterates C-steps from `start` until the subset repeats or the objective
/// changes by less than `tol`. Each refit is warm-started from the previous
/// column covariance, which makes the objective non-increasing even when the
/// flip-flop is capped. Throws NumericalError if `max_steps` is exhausted.
inline ConcentrationResult concentrate(const MatrixStack& stack, std::vector<std::size_t> start,
                                       std::size_t h, const FlipFlopConfig& mle_cfg,
                                       const std::optional<Matrix>& warm_col, int max_steps,
                                       double tol) {
  ConcentrationResult r;
  std::sort(start.begin(), start.end());
  r.subset = std::move(start);
  r.fit = flip_flop_mle(stack, r.subset, mle_cfg, warm_col);
  r.objective_trace.push_back(r.fit.objective);
  bool done = false;
  for (int step = 1; step <= max_steps; ++step) {
    r.distances = mmd_squared(stack, r.fit.params);
    auto next = smallest_h(r.distances, h);
    r.steps = step;
    if (next == r.subset) {
      r.fixed_point = true;
      done = true;
      break;
    }
    MLEFit next_fit = flip_flop_mle(stack, next, mle_cfg, r.fit.params.sigma_col);
    const double change = r.fit.objective - next_fit.objective;
    r.objective_trace.push_back(next_fit.objective);
    r.subset = std::move(next);
    r.fit = std::move(next_fit);
    if (std::abs(change) < tol) {
      done = true;
      break;
    }
  }
  if (!done)
    throw NumericalError("C-steps did not reach a fixed point within " + std::to_string(max_steps) +
                         " iterations");
  r.distances = mmd_squared(stack, r.fit.params);
  return r;
}

// ---------------------------------------------------------------------------
// Fast MMCD
// ---------------------------------------------------------------------------

namespace detail {

struct Candidate {
  TrialRecord record;
  ParamSet params;
  std::vector<std::size_t> subset;
};

inline std::vector<std::size_t> draw_subset(std::size_t n, std::size_t size, std::mt19937_64& rng) {
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t i = 0; i < size; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(size);
  std::sort(pool.begin(), pool.end());
  return pool;
}

// Elemental start, capped flip-flop, `initial_iters` C-steps. Degenerate draws
// are redrawn up to ten times.
inline Candidate run_trial(const MatrixStack& data, std::size_t h, const MMCDConfig& cfg,
                           std::size_t block, std::size_t index) {
  constexpr int kAttempts = 10;
  const std::size_t elemental = min_subset_size(data.p(), data.q());
  const auto capped = cfg.converge_trials ? cfg.mle : FlipFlopConfig::fixed(cfg.initial_iters);
  Candidate c;
  c.record.block = block;
  c.record.index = index;
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    c.record.attempts = attempt + 1;
    std::mt19937_64 rng(derive_seed(cfg.rng_seed, {stream::trial, block, index,
                                                   static_cast<std::uint64_t>(attempt)}));
    try {
      auto subset = draw_subset(data.n(), elemental, rng);
      MLEFit fit = flip_flop_mle(data, subset, capped);
      std::vector<double> trace;
      for (int s = 0; s < cfg.initial_iters; ++s) {
        subset = smallest_h(mmd_squared(data, fit.params), h);
        fit = flip_flop_mle(data, subset, capped, fit.params.sigma_col);
        trace.push_back(fit.objective);
      }
      c.record.ok = true;
      c.record.objective = fit.objective;
      c.record.cstep_objectives = std::move(trace);
      c.params = std::move(fit.params);
      c.subset = std::move(subset);
      return c;
    } catch (const NumericalError&) {
    }
  }
  return c;
}

inline bool candidate_less(const Candidate& a, const Candidate& b) {
  if (a.record.objective != b.record.objective) return a.record.objective < b.record.objective;
  if (a.record.block != b.record.block) return a.record.block < b.record.block;
  return a.record.index < b.record.index;
}

inline std::vector<Candidate> best_of(std::vector<Candidate> all, std::size_t keep) {
  std::erase_if(all, [](const Candidate& c) { return !c.record.ok; });
  std::stable_sort(all.begin(), all.end(), candidate_less);
  if (all.size() > keep) all.resize(keep);
  return all;
}

}  // namespace detail

/// Fast reweighted MMCD: elemental trial subsets, concentration of the best
/// candidates, consistency scaling, and one reweighting step.
inline MMCDFit fast_mmcd(const MatrixStack& stack, const MMCDConfig& cfg = {}) {
  const std::size_t n = stack.n();
  const std::size_t p = stack.p();
  const std::size_t q = stack.q();
  cfg.validate(n, p, q);
  const std::size_t h = cfg.resolved_h(n, p, q);
  const std::size_t pq = p * q;
  const unsigned threads = resolve_threads(cfg.threads);

  MMCDFit out;
  out.h = h;
  MLEFit best_fit;

  if (h == n) {
    best_fit = flip_flop_mle(stack, cfg.mle);
    out.h_subset.resize(n);
    std::iota(out.h_subset.begin(), out.h_subset.end(), std::size_t{0});
    out.final_traces.push_back(best_fit.objective_trace);
  } else {
    std::vector<detail::Candidate> pooled;
    const bool subsample = cfg.subsampling == Subsampling::automatic && n >= cfg.subsample_threshold;

    if (!subsample) {
      std::vector<detail::Candidate> trials(cfg.n_initial_subsets);
      parallel_for(trials.size(), threads,
                   [&](std::size_t k) { trials[k] = detail::run_trial(stack, h, cfg, 0, k); });
      for (const auto& t : trials) out.trial_log.push_back(t.record);
      pooled = detail::best_of(std::move(trials), cfg.n_keep);
    } else {
      // Disjoint random blocks; trials run inside each block, the best
      // candidates of every block are re-ranked on the full data.
      const std::size_t blocks = (n + cfg.subsample_block - 1) / cfg.subsample_block;
      std::vector<std::size_t> perm(n);
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      std::mt19937_64 rng(derive_seed(cfg.rng_seed, {stream::subsample}));
      std::shuffle(perm.begin(), perm.end(), rng);
      std::vector<MatrixStack> block_data;
      std::vector<std::size_t> block_h;
      for (std::size_t b = 0; b < blocks; ++b) {
        std::vector<std::size_t> idx(perm.begin() + static_cast<std::ptrdiff_t>(b * n / blocks),
                                     perm.begin() + static_cast<std::ptrdiff_t>((b + 1) * n / blocks));
        std::sort(idx.begin(), idx.end());
        const std::size_t nb = idx.size();
        block_h.push_back(std::clamp<std::size_t>(nb * h / n, min_subset_size(p, q), nb));
        block_data.push_back(stack.select(idx));
      }
      const std::size_t per_block = (cfg.n_initial_subsets + blocks - 1) / blocks;
      std::vector<detail::Candidate> trials(blocks * per_block);
      parallel_for(trials.size(), threads, [&](std::size_t t) {
        const std::size_t b = t / per_block;
        trials[t] = detail::run_trial(block_data[b], block_h[b], cfg, b, t % per_block);
      });
      for (const auto& t : trials) out.trial_log.push_back(t.record);
      std::vector<detail::Candidate> merged;
      for (std::size_t b = 0; b < blocks; ++b) {
        std::vector<detail::Candidate> mine(std::make_move_iterator(trials.begin() + static_cast<std::ptrdiff_t>(b * per_block)),
                                            std::make_move_iterator(trials.begin() + static_cast<std::ptrdiff_t>((b + 1) * per_block)));
        for (auto& c : detail::best_of(std::move(mine), cfg.n_keep)) merged.push_back(std::move(c));
      }
      // Move every block candidate to the full data with capped C-steps.
      const auto capped = FlipFlopConfig::fixed(cfg.initial_iters);
      parallel_for(merged.size(), threads, [&](std::size_t i) {
        auto& c = merged[i];
        try {
          ParamSet params = c.params;
          for (int s = 0; s < cfg.initial_iters; ++s) {
            c.subset = smallest_h(mmd_squared(stack, params), h);
            MLEFit fit = flip_flop_mle(stack, c.subset, capped, params.sigma_col);
            params = std::move(fit.params);
            c.record.objective = fit.objective;
          }
          c.params = std::move(params);
        } catch (const NumericalError&) {
          c.record.ok = false;
        }
      });
      pooled = detail::best_of(std::move(merged), cfg.n_keep);
    }

    if (pooled.empty())
      throw NumericalError("every initial subset produced a singular fit; the data look degenerate");

    std::vector<std::optional<ConcentrationResult>> refined(pooled.size());
    parallel_for(pooled.size(), threads, [&](std::size_t i) {
      try {
        refined[i] = concentrate(stack, pooled[i].subset, h, cfg.mle, pooled[i].params.sigma_col,
                                 cfg.max_csteps, cfg.cstep_tol);
      } catch (const NumericalError&) {
        // Singular refit on the full data: drop the candidate.
      }
    });
    std::optional<std::size_t> winner;
    for (std::size_t i = 0; i < refined.size(); ++i) {
      if (!refined[i]) continue;
      out.final_traces.push_back(refined[i]->objective_trace);
      if (!winner || refined[i]->fit.objective < refined[*winner]->fit.objective) winner = i;
    }
    if (!winner) throw NumericalError("every refined candidate produced a singular fit");
    best_fit = std::move(refined[*winner]->fit);
    out.h_subset = std::move(refined[*winner]->subset);
    out.cstep_iterations = refined[*winner]->steps;
  }

  out.objective = best_fit.objective;

  // Raw estimate: scale the Kronecker product through sigma_row.
  out.c_raw = consistency_factor(static_cast<double>(h) / static_cast<double>(n), pq);
  out.raw = best_fit.params;
  out.raw.sigma_row *= out.c_raw;
  out.distances_raw = mmd_squared(stack, out.raw);

  // Reweighting: keep the h-subset plus everything inside the chi-square cutoff.
  const double cutoff = stats::chi_square_quantile(cfg.reweight_quantile, static_cast<double>(pq));
  out.weights.assign(n, 0);
  for (std::size_t i : out.h_subset) out.weights[i] = 1;
  for (std::size_t i = 0; i < n; ++i)
    if (out.distances_raw[i] < cutoff) out.weights[i] = 1;
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < n; ++i)
    if (out.weights[i]) kept.push_back(i);

  const MLEFit rew = flip_flop_mle(stack, kept, cfg.mle);
  out.c_rew = consistency_factor(static_cast<double>(kept.size()) / static_cast<double>(n), pq);
  out.reweighted = rew.params;
  out.reweighted.sigma_row *= out.c_rew;
  out.distances_reweighted = mmd_squared(stack, out.reweighted);
  return out;
}

}  // namespace mmcd
