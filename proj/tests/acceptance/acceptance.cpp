// Acceptance run: one [PASS]/[FAIL] line per criterion, nonzero exit on any
// failure. Criteria with a time budget fail when they exceed it.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <deque>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "../oracles.hpp"
#include "mmcd/mmcd.hpp"

using namespace mmcd;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Every MMCD fit produced here; the monotonicity criterion inspects them all.
std::deque<MMCDFit> g_fits;  // stable references on push_back

const MMCDFit& record(MMCDFit fit) {
  g_fits.push_back(std::move(fit));
  return g_fits.back();
}

std::string fmt(const char* f, double a) {
  char buf[96];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt(const char* f, double a, double b) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

std::string fmt(const char* f, double a, double b, double c) {
  char buf[200];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(1e-300, std::abs(b)); }

// -- AC-1 ---------------------------------------------------------------------

Outcome shapley_efficiency() {
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> dim(1, 10);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const int p = dim(rng), q = dim(rng);
    const ParamSet s = oracle::random_params(p, q, rng);
    const Matrix x = s.mean + 2.0 * oracle::random_matrix(p, q, rng);
    const double d = mmd_squared(x, s);
    worst = std::max(worst, std::abs(shapley(x, s).cell.sum() - d) / (1.0 + d));
  }
  double worst_oracle = 0.0;
  for (int p = 1; p <= 9; ++p)
    for (int q = 1; p * q <= 9; ++q)
      for (int rep = 0; rep < 5; ++rep) {
        const ParamSet s = oracle::random_params(p, q, rng);
        const Matrix x = s.mean + oracle::random_matrix(p, q, rng);
        worst_oracle = std::max(worst_oracle, (shapley(x, s).cell - oracle::coalition_shapley(x, s)).cwiseAbs().maxCoeff());
      }
  return {worst <= 1e-8 && worst_oracle <= 1e-8,
          fmt("max efficiency residual %.2e, max coalition deviation %.2e", worst, worst_oracle)};
}

// -- AC-2 ---------------------------------------------------------------------

Outcome mmd_equivalence() {
  std::mt19937_64 rng(202);
  std::uniform_int_distribution<int> dim(1, 5);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const int p = dim(rng), q = dim(rng);
    const ParamSet s = oracle::random_params(p, q, rng);
    const Matrix x = s.mean + oracle::random_matrix(p, q, rng);
    worst = std::max(worst, rel(mmd_squared(x, s), oracle::dense_mahalanobis(x, s)));
  }
  return {worst <= 1e-10, fmt("max relative deviation %.2e", worst)};
}

// -- AC-3 ---------------------------------------------------------------------

Outcome cstep_monotonicity() {
  // Own runs over varied shapes, sizes and contamination, including the
  // subsampling path; the fits from the other criteria are already recorded.
  int seed = 0;
  for (auto [p, q, n] : {std::tuple{2, 3, 40}, std::tuple{3, 3, 80}, std::tuple{4, 6, 150}, std::tuple{5, 20, 100},
                         std::tuple{1, 4, 60}, std::tuple{3, 5, 1200}})
    for (int rep = 0; rep < 3; ++rep, ++seed) {
      std::mt19937_64 rng(3000 + seed);
      const ParamSet t = oracle::random_params(p, q, rng);
      MatrixStack x = sample(DistributionSpec::normal(t), n, 3100 + seed);
      sim::ContaminationSpec c;
      c.epsilon = 0.1 * rep;
      c.gamma = 3.0;
      if (c.epsilon > 0.0) x = sim::contaminate(x, t, c, 3200 + seed).data;
      MMCDConfig cfg;
      cfg.rng_seed = 3300 + seed;
      cfg.n_initial_subsets = n > 1000 ? 100 : 500;
      record(fast_mmcd(x, cfg));
    }

  std::size_t traces = 0, steps = 0;
  double worst_increase = -std::numeric_limits<double>::infinity();
  int longest = 0;
  auto scan = [&](const std::vector<double>& tr) {
    ++traces;
    steps += tr.size();
    for (std::size_t k = 1; k < tr.size(); ++k) worst_increase = std::max(worst_increase, tr[k] - tr[k - 1]);
  };
  for (const auto& f : g_fits) {
    for (const auto& t : f.trial_log)
      if (t.ok) scan(t.cstep_objectives);
    for (const auto& t : f.final_traces) {
      scan(t);
      longest = std::max(longest, static_cast<int>(t.size()));
    }
    longest = std::max(longest, f.cstep_iterations);
  }
  return {worst_increase <= 1e-10 && longest <= 200 && !g_fits.empty(),
          fmt("%.0f fits, %.0f traces, ", double(g_fits.size()), double(traces)) +
              fmt("largest per-step increase %.2e, longest concentration %.0f C-steps", worst_increase, double(longest))};
}

// -- AC-4 ---------------------------------------------------------------------

Outcome equivariance() {
  const int p = 4, q = 6;
  std::mt19937_64 rng(404);
  const ParamSet t = oracle::random_params(p, q, rng);
  const MatrixStack clean = sample(DistributionSpec::normal(t), 200, 405);
  sim::ContaminationSpec c;
  c.gamma = 4.0;
  const MatrixStack x = sim::contaminate(clean, t, c, 406).data;
  // Capped trial iterations from the identity start are not equivariant, so
  // the trial phase runs its flip-flops to convergence here.
  MMCDConfig cfg;
  cfg.rng_seed = 407;
  cfg.converge_trials = true;
  const MMCDFit& base = record(fast_mmcd(x, cfg));

  int subset_mismatch = 0;
  double worst_mean = 0.0, worst_cov = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Matrix a = oracle::random_invertible(p, rng);
    const Matrix b = oracle::random_invertible(q, rng);
    const Matrix cc = 10.0 * oracle::random_matrix(p, q, rng);
    MatrixStack y = x;
    for (std::size_t k = 0; k < x.n(); ++k) y.set(k, a * x.at(k) * b + cc);
    const MMCDFit& fit = record(fast_mmcd(y, cfg));
    if (fit.h_subset != base.h_subset) ++subset_mismatch;
    const Matrix mean = a * base.raw.mean * b + cc;
    worst_mean = std::max(worst_mean, (fit.raw.mean - mean).norm() / mean.norm());
    const ParamSet expected{mean, a * base.raw.sigma_row * a.transpose(), b.transpose() * base.raw.sigma_col * b};
    worst_cov = std::max(worst_cov, sim::frobenius_error(fit.raw, expected));
  }
  return {subset_mismatch == 0 && worst_mean <= 1e-6 && worst_cov <= 1e-6,
          fmt("h-subset mismatches %.0f/100, mean deviation %.2e, Kronecker scatter deviation %.2e", subset_mismatch,
              worst_mean, worst_cov)};
}

// -- AC-5 ---------------------------------------------------------------------

Outcome breakdown() {
  const int p = 5, q = 20;
  int passed = 0;
  double worst_ratio = 0.0, min_mle = std::numeric_limits<double>::infinity();
  double worst_eig = 1.0;
  for (int s = 0; s < 10; ++s) {
    const ParamSet t{Matrix::Zero(p, q), sim::make_cov(sim::CovSpec::rnd(p, 500 + s)),
                     sim::make_cov(sim::CovSpec::mix(q, 0.7))};
    const MatrixStack clean = sample(DistributionSpec::normal(t), 100, 510 + s);
    std::mt19937_64 rng(520 + s);
    Matrix shift = oracle::random_matrix(p, q, rng);
    shift *= 1e6 / shift.norm();
    MatrixStack bad = clean;
    for (std::size_t i = 0; i < 47; ++i) bad.set(i, clean.at(i) + shift);

    MMCDConfig cfg;
    cfg.h = 53;
    cfg.rng_seed = 530 + s;
    const MMCDFit& ref = record(fast_mmcd(clean, cfg));
    const MMCDFit& fit = record(fast_mmcd(bad, cfg));
    const double mle_norm = flip_flop_mle(bad).params.mean.norm();
    min_mle = std::max(0.0, std::min(min_mle, mle_norm));

    bool ok = mle_norm > 1e4;
    for (const auto* pair : {&fit.raw, &fit.reweighted}) {
      const ParamSet& clean_par = pair == &fit.raw ? ref.raw : ref.reweighted;
      const double ratio = pair->mean.norm() / clean_par.mean.norm();
      worst_ratio = std::max(worst_ratio, ratio);
      ok = ok && ratio <= 10.0;
      const Vector e1 = sym_eigenvalues_desc(pair->sigma_row), e2 = sym_eigenvalues_desc(pair->sigma_col);
      const Vector c1 = sym_eigenvalues_desc(clean_par.sigma_row), c2 = sym_eigenvalues_desc(clean_par.sigma_col);
      for (Eigen::Index i = 0; i < e1.size(); ++i)
        for (Eigen::Index j = 0; j < e2.size(); ++j) {
          const double r = e1(i) * e2(j) / (c1(i) * c2(j));
          worst_eig = std::max({worst_eig, r, 1.0 / r});
          ok = ok && r >= 1e-6 && r <= 1e6;
        }
    }
    passed += ok;
  }
  return {passed == 10, fmt("%.0f/10 seeds pass, worst mean-norm ratio %.2f, worst eigenvalue-product ratio %.2e", passed,
                            worst_ratio, worst_eig) +
                            fmt(", smallest MLE mean norm %.3g", min_mle)};
}

// -- AC-6 ---------------------------------------------------------------------

Outcome consistency() {
  bool ok = true;
  double worst = 0.0;
  for (std::size_t pq : {1, 4, 100}) {
    ok = ok && consistency_factor(1.0, pq) == 1.0;
    for (double alpha : {0.5, 0.75}) {
      const double r = rel(consistency_factor(alpha, pq), oracle::quad_consistency_factor(alpha, double(pq)));
      worst = std::max(worst, r);
    }
  }
  return {ok && worst <= 1e-6, std::string(ok ? "c(1) = 1 exactly" : "c(1) != 1") +
                                   fmt(", max relative deviation from quadrature %.2e", worst)};
}

// -- AC-7 ---------------------------------------------------------------------

Outcome mle_coincidence() {
  double worst_obj = 0.0, worst_identity = 0.0;
  std::size_t checks = 0;
  int seed = 0;
  for (auto [p, q, n] : {std::tuple{2, 3, 30}, std::tuple{3, 4, 50}, std::tuple{5, 20, 100}, std::tuple{4, 6, 200}})
    for (int rep = 0; rep < 3; ++rep, ++seed) {
      std::mt19937_64 rng(700 + seed);
      const ParamSet t = oracle::random_params(p, q, rng);
      const MatrixStack x = sample(DistributionSpec::normal(t), n, 710 + seed);
      MMCDConfig cfg;
      cfg.h = n;
      cfg.rng_seed = 720 + seed;
      const MMCDFit& fit = record(fast_mmcd(x, cfg));
      const MLEFit mle = flip_flop_mle(x);
      worst_obj = std::max(worst_obj, std::abs(fit.objective - mle.objective));

      // Identity residual at converged fits: the full sample, the default
      // h-subset of an MMCD run, and random subsets.
      std::vector<std::vector<std::size_t>> subsets;
      std::vector<std::size_t> all(x.n());
      std::iota(all.begin(), all.end(), std::size_t{0});
      subsets.push_back(all);
      MMCDConfig dflt;
      dflt.rng_seed = 730 + seed;
      subsets.push_back(record(fast_mmcd(x, dflt)).h_subset);
      for (int k = 0; k < 5; ++k) {
        std::shuffle(all.begin(), all.end(), rng);
        std::vector<std::size_t> sub(all.begin(), all.begin() + (n * 3) / 4);
        std::sort(sub.begin(), sub.end());
        subsets.push_back(sub);
      }
      for (const auto& sub : subsets) {
        const MLEFit f = flip_flop_mle(x, sub);
        if (!f.converged) continue;
        ++checks;
        worst_identity = std::max(worst_identity, mean_mmd_identity_check(x, sub, f) / double(sub.size() * p * q));
      }
    }
  return {worst_obj <= 1e-8 && worst_identity <= 1e-6 && checks > 0,
          fmt("max objective difference %.2e, max identity residual / hpq %.2e", worst_obj, worst_identity) +
              fmt(" over %.0f converged fits", double(checks))};
}

// -- AC-8 ---------------------------------------------------------------------

Outcome efficiency_curve() {
  sim::Scenario s;
  s.reps = 50;
  s.seed = 8;
  const auto r = sim::efficiency_experiment(s, {100, 300, 1000});
  bool ok = true;
  std::string detail;
  double prev = -1.0;
  for (std::size_t n : {100u, 300u, 1000u}) {
    const double rew = sim::median(r.column(sim::Estimator::mmcd, &sim::SimRecord::efficiency, n));
    const double raw = sim::median(r.column(sim::Estimator::mmcd_raw, &sim::SimRecord::efficiency, n));
    ok = ok && rew > prev && raw <= rew;
    prev = rew;
    detail += fmt("n=%.0f raw %.3f reweighted %.3f; ", double(n), raw, rew);
  }
  ok = ok && prev >= 0.8;
  return {ok, detail.substr(0, detail.size() - 2)};
}

// -- AC-9 ---------------------------------------------------------------------

Outcome contamination_recovery() {
  sim::Scenario s;
  s.n = 1000;
  s.reps = 50;
  s.seed = 9;
  s.estimators = {sim::Estimator::mle, sim::Estimator::mmcd, sim::Estimator::truth};
  const auto r = sim::contamination_experiment(s);
  const auto recall = r.column(sim::Estimator::mmcd, &sim::SimRecord::recall);
  const auto truth = r.column(sim::Estimator::truth, &sim::SimRecord::recall);
  const auto kl_mmcd = r.column(sim::Estimator::mmcd, &sim::SimRecord::kl);
  const auto kl_mle = r.column(sim::Estimator::mle, &sim::SimRecord::kl);
  std::size_t wins = 0;
  for (std::size_t i = 0; i < kl_mmcd.size(); ++i) wins += kl_mmcd[i] < kl_mle[i];
  const double med = sim::median(recall), med_truth = sim::median(truth);
  const double win_rate = double(wins) / double(kl_mmcd.size());
  return {med >= 0.9 && win_rate >= 0.95 && med_truth >= med,
          fmt("median MMCD recall %.3f (needs >= 0.9), KL(MMCD) < KL(MLE) in %.0f%% of reps", med, 100 * win_rate) +
              fmt(", median true-parameter recall %.3f", med_truth)};
}

// -- AC-10 --------------------------------------------------------------------

Outcome detection_calibration() {
  std::size_t flagged = 0, total = 0;
  for (int s = 0; s < 10; ++s) {
    const ParamSet t{Matrix::Zero(5, 20), sim::make_cov(sim::CovSpec::rnd(5, 1000 + s)),
                     sim::make_cov(sim::CovSpec::mix(20, 0.7))};
    const auto d = detect(sample(DistributionSpec::normal(t), 1000, 1010 + s), t, 0.975);
    flagged += d.flagged();
    total += d.flags.size();
  }
  const double rate = double(flagged) / double(total);
  return {rate >= 0.015 && rate <= 0.035, fmt("%.0f of %.0f flagged", double(flagged), double(total)) +
                                              fmt(" (%.2f%%)", 100 * rate)};
}

// -- AC-11 --------------------------------------------------------------------

Outcome clean_subsets() {
  double worst = 0.0;
  std::uint64_t seed = 1100;
  for (double eps : {0.2, 0.4})
    for (std::size_t d : {2, 4})
      for (std::size_t m : {100, 500}) {
        const double mc = oracle::monte_carlo_clean_subset(eps, d + 2, m, 20000, seed++);
        worst = std::max(worst, std::abs(mc - clean_subset_probability(eps, d, m)));
      }
  const std::size_t m = required_subsets(0.2, 4, 0.99);
  return {worst <= 0.01 && m == 16,
          fmt("max |closed form - Monte Carlo| %.4f, required_subsets(0.2, 4, 0.99) = %.0f", worst, double(m))};
}

struct Criterion {
  const char* id;
  const char* title;
  double budget_seconds;  // 0: no time limit
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  // Monotonicity runs after the others so that it sees every fit they made.
  const std::vector<Criterion> criteria = {
      {"AC-1", "Shapley efficiency and coalition oracle", 30, shapley_efficiency},
      {"AC-2", "MMD equals vectorized Mahalanobis distance", 10, mmd_equivalence},
      {"AC-4", "affine equivariance", 120, equivariance},
      {"AC-5", "breakdown stress", 120, breakdown},
      {"AC-6", "consistency factor", 0, consistency},
      {"AC-7", "MLE coincidence and mean distance identity", 0, mle_coincidence},
      {"AC-3", "C-step monotonicity and termination", 0, cstep_monotonicity},
      {"AC-8", "efficiency curve", 600, efficiency_curve},
      {"AC-9", "contamination recovery", 600, contamination_recovery},
      {"AC-10", "detection calibration", 0, detection_calibration},
      {"AC-11", "clean-subset probability", 0, clean_subsets},
  };
  std::vector<std::pair<int, std::string>> lines;
  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget_seconds > 0 && secs > c.budget_seconds) {
      o.pass = false;
      o.detail += fmt(" (over the %.0f s budget)", c.budget_seconds);
    }
    failures += !o.pass;
    const std::string line = std::string(o.pass ? "[PASS] " : "[FAIL] ") + c.id + " " + c.title + ": " + o.detail +
                             fmt(" [%.1f s]", secs);
    std::fprintf(stderr, "%s\n", line.c_str());
    lines.emplace_back(std::stoi(c.id + 3), line);
  }
  std::sort(lines.begin(), lines.end());
  for (const auto& [id, line] : lines) std::printf("%s\n", line.c_str());
  std::printf("%d of %zu criteria passed\n", int(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
