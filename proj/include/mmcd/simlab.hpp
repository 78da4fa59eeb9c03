#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mmcd/error.hpp"
#include "mmcd/estimator.hpp"
#include "mmcd/flip_flop.hpp"
#include "mmcd/linalg.hpp"
#include "mmcd/matrix_stack.hpp"
#include "mmcd/matvar.hpp"
#include "mmcd/outlier.hpp"
#include "mmcd/parallel.hpp"
#include "mmcd/param_set.hpp"
#include "mmcd/seeding.hpp"

namespace mmcd::sim {

// ---------------------------------------------------------------------------
// Covariance generators
// ---------------------------------------------------------------------------

struct CovSpec {
  enum class Kind { rnd, fix, mix };

  Kind kind = Kind::mix;
  std::size_t dim = 1;
  double rho = 0.7;         // fix and mix
  std::uint64_t seed = 0;   // rnd

  static CovSpec fix(std::size_t dim, double rho) { return {Kind::fix, dim, rho, 0}; }
  static CovSpec mix(std::size_t dim, double rho) { return {Kind::mix, dim, rho, 0}; }
  static CovSpec rnd(std::size_t dim, std::uint64_t seed) { return {Kind::rnd, dim, 0.0, seed}; }

  void validate() const {
    if (dim < 1) throw PreconditionError("covariance dimension must be positive");
    if (kind != Kind::rnd && !(rho > 0.0 && rho < 1.0))
      throw PreconditionError("correlation parameter must lie in (0, 1)");
  }
};

/// Correlation matrix for the given spec. fix: equicorrelation rho; mix:
/// rho^|j-k|; rnd: correlation of a dim x (dim + 2) normal Gram matrix,
/// redrawn until every off-diagonal is at most 0.5 in magnitude.
inline Matrix make_cov(const CovSpec& spec) {
  spec.validate();
  const auto d = static_cast<Eigen::Index>(spec.dim);
  Matrix out(d, d);
  switch (spec.kind) {
    case CovSpec::Kind::fix:
      out.setConstant(spec.rho);
      out.diagonal().setOnes();
      return out;
    case CovSpec::Kind::mix:
      for (Eigen::Index j = 0; j < d; ++j)
        for (Eigen::Index k = 0; k < d; ++k) out(j, k) = std::pow(spec.rho, static_cast<double>(std::abs(j - k)));
      return out;
    case CovSpec::Kind::rnd:
      break;
  }
  constexpr int kMaxDraws = 100000;
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix t(d, d + 2);
  for (int draw = 0; draw < kMaxDraws; ++draw) {
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = normal(rng);
    const Matrix gram = t * t.transpose();
    const Vector inv_sd = gram.diagonal().cwiseSqrt().cwiseInverse();
    out = inv_sd.asDiagonal() * gram * inv_sd.asDiagonal();
    out.diagonal().setOnes();
    out = symmetrize(out);
    Matrix off = out;
    off.diagonal().setZero();
    if ((d == 1 || off.cwiseAbs().maxCoeff() <= 0.5) && try_cholesky(out)) return out;
  }
  throw NumericalError("random correlation generator did not meet the 0.5 bound");
}

// ---------------------------------------------------------------------------
// Contamination
// ---------------------------------------------------------------------------

struct ContaminationSpec {
  enum class Scheme { shift, block, cell };

  Scheme scheme = Scheme::shift;
  double epsilon = 0.1;
  double gamma = 1.0;            // shift and block
  std::size_t rows = 2;          // block
  std::size_t cols = 5;          // block
  double permute_fraction = 0.1; // cell
  double scale = 1.0;            // s, multiplies sigma_row of the outlier law

  void validate(std::size_t p, std::size_t q) const {
    if (!(epsilon >= 0.0 && epsilon < 0.5)) throw PreconditionError("epsilon must lie in [0, 0.5)");
    if (!(scale > 0.0)) throw PreconditionError("covariance multiplier s must be positive");
    if (!std::isfinite(gamma)) throw PreconditionError("gamma must be finite");
    if (scheme == Scheme::block && (rows < 1 || cols < 1 || rows > p || cols > q))
      throw PreconditionError("block " + std::to_string(rows) + "x" + std::to_string(cols) +
                              " does not fit into " + std::to_string(p) + "x" + std::to_string(q));
    if (scheme == Scheme::cell) {
      if (!(permute_fraction > 0.0 && permute_fraction <= 1.0))
        throw PreconditionError("permute fraction must lie in (0, 1]");
      if (p * q < 2) throw PreconditionError("cell contamination needs at least two cells");
    }
  }
};

struct Contaminated {
  MatrixStack data;
  std::vector<std::size_t> outliers;  // sorted

  std::vector<bool> labels() const {
    std::vector<bool> out(data.n(), false);
    for (std::size_t i : outliers) out[i] = true;
    return out;
  }
};

namespace detail {

inline Matrix draw_normal(const Matrix& mean, const Matrix& lr, const Matrix& lc, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix z(mean.rows(), mean.cols());
  for (Eigen::Index c = 0; c < z.cols(); ++c)
    for (Eigen::Index r = 0; r < z.rows(); ++r) z(r, c) = normal(rng);
  return mean + lr.triangularView<Eigen::Lower>() * z * lc.transpose();
}

}  // namespace detail

/// Replaces floor(epsilon * n) randomly chosen observations by outliers and
/// returns their indices.
inline Contaminated contaminate(const MatrixStack& stack, const ParamSet& truth, const ContaminationSpec& spec,
                                std::uint64_t seed) {
  const std::size_t p = stack.p();
  const std::size_t q = stack.q();
  spec.validate(p, q);
  if (static_cast<std::size_t>(truth.p()) != p || static_cast<std::size_t>(truth.q()) != q)
    throw PreconditionError("truth shape does not match the data");

  Contaminated out{stack, {}};
  const auto count = static_cast<std::size_t>(std::floor(spec.epsilon * static_cast<double>(stack.n())));
  if (count == 0) return out;

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> pool(stack.n());
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(count);
  std::sort(pool.begin(), pool.end());
  out.outliers = pool;

  switch (spec.scheme) {
    case ContaminationSpec::Scheme::shift: {
      const Matrix lr = cholesky_or_throw(spec.scale * truth.sigma_row, "outlier sigma_row").lower;
      const Matrix lc = cholesky_or_throw(truth.sigma_col, "sigma_col").lower;
      const Matrix mean = truth.mean.array() + spec.gamma;
      for (std::size_t i : pool) out.data.set(i, detail::draw_normal(mean, lr, lc, rng));
      break;
    }
    case ContaminationSpec::Scheme::block: {
      const auto r = static_cast<Eigen::Index>(spec.rows);
      const auto c = static_cast<Eigen::Index>(spec.cols);
      const Matrix lr =
          cholesky_or_throw(spec.scale * truth.sigma_row.topLeftCorner(r, r), "outlier sigma_row block").lower;
      const Matrix lc = cholesky_or_throw(Matrix(truth.sigma_col.topLeftCorner(c, c)), "sigma_col block").lower;
      const Matrix mean = truth.mean.topLeftCorner(r, c).array() + spec.gamma;
      for (std::size_t i : pool) {
        Matrix x = out.data.at(i);
        x.topLeftCorner(r, c) = detail::draw_normal(mean, lr, lc, rng);
        out.data.set(i, x);
      }
      break;
    }
    case ContaminationSpec::Scheme::cell: {
      const std::size_t cells = p * q;
      const auto k = std::clamp<std::size_t>(
          static_cast<std::size_t>(std::llround(spec.permute_fraction * static_cast<double>(cells))), 2, cells);
      std::vector<std::size_t> pos(cells);
      for (std::size_t i : pool) {
        std::iota(pos.begin(), pos.end(), std::size_t{0});
        for (std::size_t j = 0; j < k; ++j) {
          std::uniform_int_distribution<std::size_t> pick(j, cells - 1);
          std::swap(pos[j], pos[pick(rng)]);
        }
        const Matrix x = out.data.at(i);
        Matrix y = x;
        // Cyclic shift among the chosen cells (column-major cell numbering).
        for (std::size_t j = 0; j < k; ++j) {
          const std::size_t from = pos[j];
          const std::size_t to = pos[(j + 1) % k];
          y(static_cast<Eigen::Index>(to % p), static_cast<Eigen::Index>(to / p)) =
              x(static_cast<Eigen::Index>(from % p), static_cast<Eigen::Index>(from / p));
        }
        out.data.set(i, y);
      }
      break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

namespace detail {

inline void check_pair(const ParamSet& est, const ParamSet& truth) {
  if (est.p() != truth.p() || est.q() != truth.q())
    throw PreconditionError("estimate and truth have different shapes");
}

// tr(Omega S) and ln det(Omega S) with Omega = sigma^{-1}.
struct Relative {
  double trace;
  double log_det;
};

inline Relative relative(const Matrix& est, const Matrix& sigma, const char* what) {
  const auto ls = cholesky_or_throw(sigma, std::string("true ") + what);
  const auto le = cholesky_or_throw(est, std::string("estimated ") + what);
  const Matrix a = ls.solve_lower(le.lower);  // L_s^{-1} L_e
  return {a.squaredNorm(), le.log_det - ls.log_det};
}

inline double cosine_gap(Vector a, Vector b) {
  std::sort(a.data(), a.data() + a.size(), std::greater<>());
  std::sort(b.data(), b.data() + b.size(), std::greater<>());
  const double c = a.dot(b) / (a.norm() * b.norm());
  return std::clamp(1.0 - c, 0.0, 1.0);
}

inline Vector kron_eigenvalues(const ParamSet& s) {
  const Vector er = sym_eigenvalues_desc(s.sigma_row);
  const Vector ec = sym_eigenvalues_desc(s.sigma_col);
  Vector out(er.size() * ec.size());
  for (Eigen::Index i = 0; i < ec.size(); ++i)
    for (Eigen::Index j = 0; j < er.size(); ++j) out(i * er.size() + j) = ec(i) * er(j);
  return out;
}

}  // namespace detail

/// tr(Or Sr^) tr(Oc Sc^) - q ln det(Or Sr^) - p ln det(Oc Sc^) - pq.
/// Twice the usual Gaussian KL divergence of the vectorized laws.
inline double kl_divergence(const ParamSet& est, const ParamSet& truth) {
  detail::check_pair(est, truth);
  const auto r = detail::relative(est.sigma_row, truth.sigma_row, "sigma_row");
  const auto c = detail::relative(est.sigma_col, truth.sigma_col, "sigma_col");
  const double p = static_cast<double>(truth.p());
  const double q = static_cast<double>(truth.q());
  return r.trace * c.trace - q * r.log_det - p * c.log_det - p * q;
}

/// Same divergence for an unstructured pq x pq estimate of cov(vec X).
inline double kl_divergence_full(const Matrix& est_cov, const ParamSet& truth) {
  const auto r = detail::relative(est_cov, truth.kronecker_covariance(), "covariance");
  return r.trace - r.log_det - static_cast<double>(est_cov.rows());
}

/// ||Sc^ (x) Sr^ - Sc (x) Sr||_F / ||Sc (x) Sr||_F without forming either
/// Kronecker product.
inline double frobenius_error(const ParamSet& est, const ParamSet& truth) {
  detail::check_pair(est, truth);
  est.validate();
  truth.validate();
  const ParamSet e = est.normalized();
  const ParamSet t = truth.normalized();
  // A (x) B - C (x) D = (A - C) (x) B + C (x) (B - D)
  const Matrix& a = e.sigma_col;
  const Matrix& b = e.sigma_row;
  const Matrix& c = t.sigma_col;
  const Matrix& d = t.sigma_row;
  const Matrix ac = a - c;
  const Matrix bd = b - d;
  const double num2 = ac.squaredNorm() * b.squaredNorm() + c.squaredNorm() * bd.squaredNorm() +
                      2.0 * (ac.cwiseProduct(c).sum()) * (b.cwiseProduct(bd).sum());
  return std::sqrt(std::max(0.0, num2)) / (c.norm() * d.norm());
}

inline double frobenius_error_full(const Matrix& est_cov, const ParamSet& truth) {
  const Matrix t = truth.kronecker_covariance();
  return (est_cov - t).norm() / t.norm();
}

/// 1 - cosine between the descending eigenvalue vectors of the two Kronecker
/// covariances.
inline double angle_error(const ParamSet& est, const ParamSet& truth) {
  detail::check_pair(est, truth);
  est.validate();
  truth.validate();
  return detail::cosine_gap(detail::kron_eigenvalues(est), detail::kron_eigenvalues(truth));
}

inline double angle_error_full(const Matrix& est_cov, const ParamSet& truth) {
  cholesky_or_throw(est_cov, "estimated covariance");
  return detail::cosine_gap(sym_eigenvalues_desc(est_cov), detail::kron_eigenvalues(truth));
}

struct Scores {
  double precision = 1.0;
  double recall = 1.0;
  double f_score = 1.0;
};

/// Precision, recall and F-score. With nothing flagged precision is 1; with
/// no true outliers recall is 1; F is 0 whenever precision or recall is 0.
inline Scores classification_scores(const std::vector<bool>& flags, const std::vector<bool>& labels) {
  if (flags.size() != labels.size()) throw PreconditionError("flags and labels differ in length");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    if (flags[i] && labels[i]) ++tp;
    else if (flags[i]) ++fp;
    else if (labels[i]) ++fn;
  }
  Scores s;
  s.precision = (tp + fp) ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 1.0;
  s.recall = (tp + fn) ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 1.0;
  s.f_score = (s.precision > 0.0 && s.recall > 0.0)
                  ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
                  : 0.0;
  return s;
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

inline double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

inline double mean(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Sample standard deviation over sqrt(count); 0 for fewer than two values.
inline double standard_error(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

enum class Estimator { mle, mmcd_raw, mmcd, mcd_vec, truth };

inline const char* name(Estimator e) {
  switch (e) {
    case Estimator::mle: return "mle";
    case Estimator::mmcd_raw: return "mmcd_raw";
    case Estimator::mmcd: return "mmcd";
    case Estimator::mcd_vec: return "mcd_vec";
    case Estimator::truth: return "truth";
  }
  return "?";
}

inline std::optional<Estimator> parse_estimator(const std::string& s) {
  for (Estimator e : {Estimator::mle, Estimator::mmcd_raw, Estimator::mmcd, Estimator::mcd_vec, Estimator::truth})
    if (s == name(e)) return e;
  return std::nullopt;
}

struct SimRecord {
  std::size_t scenario = 0;
  std::size_t rep = 0;
  std::size_t n = 0;
  Estimator estimator = Estimator::mle;
  double kl = 0.0;
  double frobenius = 0.0;
  double angle = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f_score = 0.0;
  double efficiency = std::numeric_limits<double>::quiet_NaN();  // efficiency experiment only
  double runtime_seconds = 0.0;
};

struct SimResult {
  std::vector<SimRecord> records;
  std::vector<std::string> notices;

  /// Values of one metric for an estimator, optionally restricted to one n.
  std::vector<double> column(Estimator e, double SimRecord::*metric,
                             std::optional<std::size_t> n = std::nullopt) const {
    std::vector<double> out;
    for (const auto& r : records)
      if (r.estimator == e && (!n || r.n == *n)) out.push_back(r.*metric);
    return out;
  }
};

struct Scenario {
  std::size_t p = 5;
  std::size_t q = 20;
  std::size_t n = 100;
  CovSpec row_cov = CovSpec::rnd(5, 0);   // rnd is redrawn per replication
  CovSpec col_cov = CovSpec::mix(20, 0.7);
  ContaminationSpec contamination;
  std::vector<Estimator> estimators{Estimator::mle, Estimator::mmcd, Estimator::truth};
  std::size_t reps = 10;
  std::uint64_t seed = 1;
  std::size_t index = 0;  // scenario id, enters the replication seeds
  double detection_quantile = 0.99;
  MMCDConfig mmcd;
  unsigned threads = 0;  // replications in parallel; MMCD itself runs single-threaded

  void validate() const {
    if (p < 1 || q < 1) throw PreconditionError("scenario shape must be positive");
    if (row_cov.dim != p || col_cov.dim != q)
      throw PreconditionError("covariance dimensions do not match the scenario shape");
    row_cov.validate();
    col_cov.validate();
    contamination.validate(p, q);
    if (reps < 1) throw PreconditionError("at least one replication is required");
    if (estimators.empty()) throw PreconditionError("no estimators requested");
    if (!(detection_quantile > 0.0 && detection_quantile < 1.0))
      throw PreconditionError("detection quantile must lie in (0, 1)");
    if (n < min_subset_size(p, q))
      throw PreconditionError("n = " + std::to_string(n) + " is below d + 2 = " +
                              std::to_string(min_subset_size(p, q)));
  }
};

namespace detail {

inline ParamSet replication_truth(const Scenario& s, std::uint64_t rep_seed) {
  auto cov = [&](CovSpec spec, std::uint64_t which) {
    if (spec.kind == CovSpec::Kind::rnd) spec.seed = derive_seed(rep_seed, {stream::covariance, which});
    return make_cov(spec);
  };
  const auto ip = static_cast<Eigen::Index>(s.p);
  const auto iq = static_cast<Eigen::Index>(s.q);
  return ParamSet{Matrix::Zero(ip, iq), cov(s.row_cov, 0), cov(s.col_cov, 1)};
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Runs the requested estimators on one replication.
inline std::vector<SimRecord> run_replication(const Scenario& s, std::size_t rep, std::size_t n,
                                              bool efficiency_mode, std::vector<std::string>& notices) {
  const std::uint64_t rep_seed = derive_seed(s.seed, {s.index, n, rep});
  const ParamSet truth = replication_truth(s, rep_seed);
  const MatrixStack clean = sample(DistributionSpec::normal(truth), n, derive_seed(rep_seed, {stream::data}));
  const Contaminated data = efficiency_mode
                                ? Contaminated{clean, {}}
                                : contaminate(clean, truth, s.contamination, derive_seed(rep_seed, {stream::contamination}));
  const std::vector<bool> labels = data.labels();

  MMCDConfig cfg = s.mmcd;
  cfg.rng_seed = derive_seed(rep_seed, {stream::estimator});
  cfg.threads = 1;

  std::optional<MMCDFit> mmcd_fit;
  double mmcd_seconds = 0.0;
  auto need_mmcd = [&] {
    if (!mmcd_fit) {
      const auto t0 = std::chrono::steady_clock::now();
      mmcd_fit = fast_mmcd(data.data, cfg);
      mmcd_seconds = seconds_since(t0);
    }
    return *mmcd_fit;
  };

  std::vector<SimRecord> out;
  for (Estimator e : s.estimators) {
    SimRecord r;
    r.scenario = s.index;
    r.rep = rep;
    r.n = n;
    r.estimator = e;
    std::vector<bool> flags;
    if (e == Estimator::mcd_vec) {
      const std::size_t pq = s.p * s.q;
      if (n < pq + 3) {
        if (rep == 0)
          notices.push_back("mcd_vec skipped at n = " + std::to_string(n) + ": the vectorized MCD needs n > pq = " +
                            std::to_string(pq));
        continue;
      }
      const auto t0 = std::chrono::steady_clock::now();
      MMCDConfig vcfg = cfg;
      vcfg.h = (n + pq + 1) / 2;
      const MatrixStack vec_data = data.data.vectorized();
      const MMCDFit vf = fast_mmcd(vec_data, vcfg);
      r.runtime_seconds = seconds_since(t0);
      const Matrix cov = vf.reweighted.sigma_row * vf.reweighted.sigma_col(0, 0);
      r.kl = kl_divergence_full(cov, truth);
      r.frobenius = frobenius_error_full(cov, truth);
      r.angle = angle_error_full(cov, truth);
      flags = detect(vec_data, vf.reweighted, s.detection_quantile).flags;
    } else {
      ParamSet est;
      const auto t0 = std::chrono::steady_clock::now();
      switch (e) {
        case Estimator::mle:
          est = flip_flop_mle(data.data, cfg.mle).params;
          r.runtime_seconds = seconds_since(t0);
          break;
        case Estimator::mmcd_raw:
          est = need_mmcd().raw;
          r.runtime_seconds = mmcd_seconds;
          break;
        case Estimator::mmcd:
          est = need_mmcd().reweighted;
          r.runtime_seconds = mmcd_seconds;
          break;
        default:
          est = truth;
          break;
      }
      r.kl = kl_divergence(est, truth);
      r.frobenius = frobenius_error(est, truth);
      r.angle = angle_error(est, truth);
      flags = detect(data.data, est, s.detection_quantile).flags;
    }
    const Scores sc = classification_scores(flags, labels);
    r.precision = sc.precision;
    r.recall = sc.recall;
    r.f_score = sc.f_score;
    out.push_back(r);
  }

  if (efficiency_mode) {
    double mle_kl = std::numeric_limits<double>::quiet_NaN();
    for (const auto& r : out)
      if (r.estimator == Estimator::mle) mle_kl = r.kl;
    for (auto& r : out)
      if (r.estimator != Estimator::truth) r.efficiency = mle_kl / r.kl;
  }
  return out;
}

inline SimResult run_grid(const Scenario& s, const std::vector<std::size_t>& n_grid, bool efficiency_mode) {
  struct Job {
    std::size_t n, rep;
  };
  std::vector<Job> jobs;
  for (std::size_t n : n_grid)
    for (std::size_t rep = 0; rep < s.reps; ++rep) jobs.push_back({n, rep});
  std::vector<std::vector<SimRecord>> records(jobs.size());
  std::vector<std::vector<std::string>> notices(jobs.size());
  parallel_for(jobs.size(), resolve_threads(s.threads), [&](std::size_t j) {
    records[j] = run_replication(s, jobs[j].rep, jobs[j].n, efficiency_mode, notices[j]);
  });
  SimResult out;
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    out.records.insert(out.records.end(), records[j].begin(), records[j].end());
    out.notices.insert(out.notices.end(), notices[j].begin(), notices[j].end());
  }
  return out;
}

}  // namespace detail

/// Clean matrix normal data over a grid of sample sizes; records the KL ratio
/// D(MLE) / D(estimator) for the MLE, raw and reweighted MMCD.
inline SimResult efficiency_experiment(Scenario s, const std::vector<std::size_t>& n_grid) {
  if (n_grid.empty()) throw PreconditionError("empty sample-size grid");
  s.estimators = {Estimator::mle, Estimator::mmcd_raw, Estimator::mmcd};
  for (std::size_t n : n_grid) {
    s.n = n;
    s.validate();
  }
  return detail::run_grid(s, n_grid, true);
}

/// Contaminated replications of one scenario with all requested estimators.
inline SimResult contamination_experiment(const Scenario& s) {
  s.validate();
  return detail::run_grid(s, {s.n}, false);
}

}  // namespace mmcd::sim
