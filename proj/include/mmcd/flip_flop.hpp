#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mmcd/error.hpp"
#include "mmcd/linalg.hpp"
#include "mmcd/matrix_stack.hpp"
#include "mmcd/param_set.hpp"

namespace mmcd {

/// d = floor(p/q + q/p), computed exactly in integers.
constexpr std::size_t ratio_floor(std::size_t p, std::size_t q) { return (p * p + q * q) / (p * q); }

/// Smallest sample for which the matrix normal MLE exists almost surely.
constexpr std::size_t min_subset_size(std::size_t p, std::size_t q) { return ratio_floor(p, q) + 2; }

struct FlipFlopConfig {
  enum class Cap { until_convergence, fixed };

  int max_iters = 100;
  double tol = 1e-8;  // on |change| of p ln det S_col + q ln det S_row
  Cap cap = Cap::until_convergence;
  int fixed_iters = 2;

  static FlipFlopConfig fixed(int k) {
    FlipFlopConfig c;
    c.cap = Cap::fixed;
    c.fixed_iters = k;
    return c;
  }

  int iteration_limit() const { return cap == Cap::fixed ? fixed_iters : max_iters; }

  void validate() const {
    if (max_iters < 1) throw PreconditionError("flip-flop max_iters must be at least 1");
    if (!(tol > 0.0)) throw PreconditionError("flip-flop tolerance must be positive");
    if (cap == Cap::fixed && fixed_iters < 1)
      throw PreconditionError("fixed flip-flop iteration count must be at least 1");
  }
};

struct MLEFit {
  ParamSet params;  // normalized: sigma_col(0,0) == 1
  int iters_used = 0;
  double objective = 0.0;  // p ln det sigma_col + q ln det sigma_row
  bool converged = false;
  std::vector<double> objective_trace;  // one entry per completed iteration
};

/// Objective p ln det sigma_col + q ln det sigma_row of a ParamSet.
inline double determinant_objective(const ParamSet& params) {
  const double p = static_cast<double>(params.p());
  const double q = static_cast<double>(params.q());
  return p * cholesky_or_throw(params.sigma_col, "sigma_col").log_det +
         q * cholesky_or_throw(params.sigma_row, "sigma_row").log_det;
}

/// Matrix normal MLE over the observations in `subset` by alternating the
/// closed-form row and column covariance updates, starting from
/// sigma_col = `init_col` (identity when absent).
inline MLEFit flip_flop_mle(const MatrixStack& stack, std::span<const std::size_t> subset,
                            const FlipFlopConfig& cfg = {},
                            const std::optional<Matrix>& init_col = std::nullopt) {
  cfg.validate();
  const std::size_t p = stack.p();
  const std::size_t q = stack.q();
  const std::size_t h = subset.size();
  if (h < min_subset_size(p, q))
    throw PreconditionError("subset of size " + std::to_string(h) + " is too small; at least " +
                            std::to_string(min_subset_size(p, q)) + " observations are required");
  for (std::size_t i : subset)
    if (i >= stack.n()) throw PreconditionError("subset index out of range");

  const auto ip = static_cast<Eigen::Index>(p);
  const auto iq = static_cast<Eigen::Index>(q);

  Matrix mean = Matrix::Zero(ip, iq);
  for (std::size_t i : subset) mean += stack[i];
  mean /= static_cast<double>(h);

  // Centered observations side by side (p x hq) and stacked (hp x q).
  Matrix wide(ip, static_cast<Eigen::Index>(h) * iq);
  for (std::size_t k = 0; k < h; ++k)
    wide.block(0, static_cast<Eigen::Index>(k) * iq, ip, iq) = stack[subset[k]] - mean;
  const Matrix tall = wide_to_tall(wide, iq);

  Matrix sigma_col = init_col ? *init_col : Matrix::Identity(iq, iq);
  if (sigma_col.rows() != iq || sigma_col.cols() != iq)
    throw PreconditionError("initial column covariance has the wrong shape");
  Matrix sigma_row(ip, ip);

  auto col_factor = try_cholesky(sigma_col);
  if (!col_factor) throw NumericalError("initial column covariance is not positive definite");

  MLEFit fit;
  const int limit = cfg.iteration_limit();
  const double qh = static_cast<double>(q * h);
  const double ph = static_cast<double>(p * h);
  for (int it = 1; it <= limit; ++it) {
    // sigma_row = (1/qh) sum E_i Omega_col E_i'
    Matrix y = tall;
    col_factor->lower.transpose().triangularView<Eigen::Upper>().solveInPlace<Eigen::OnTheRight>(y);
    sigma_row.setZero();
    sigma_row.selfadjointView<Eigen::Lower>().rankUpdate(tall_to_wide(y, ip));
    sigma_row.triangularView<Eigen::StrictlyUpper>() = sigma_row.transpose();
    sigma_row /= qh;
    auto row_factor = try_cholesky(sigma_row);
    if (!row_factor)
      throw NumericalError("row covariance became singular at flip-flop iteration " + std::to_string(it));

    // sigma_col = (1/ph) sum E_i' Omega_row E_i
    Matrix w = wide;
    row_factor->lower.triangularView<Eigen::Lower>().solveInPlace(w);
    sigma_col.setZero();
    sigma_col.selfadjointView<Eigen::Lower>().rankUpdate(wide_to_tall(w, iq).transpose());
    sigma_col.triangularView<Eigen::StrictlyUpper>() = sigma_col.transpose();
    sigma_col /= ph;
    col_factor = try_cholesky(sigma_col);
    if (!col_factor)
      throw NumericalError("column covariance became singular at flip-flop iteration " + std::to_string(it));

    const double objective = static_cast<double>(p) * col_factor->log_det +
                             static_cast<double>(q) * row_factor->log_det;
    const bool small_change =
        !fit.objective_trace.empty() && std::abs(fit.objective_trace.back() - objective) < cfg.tol;
    fit.objective_trace.push_back(objective);
    fit.iters_used = it;
    fit.objective = objective;
    fit.converged = small_change;
    if (small_change && cfg.cap == FlipFlopConfig::Cap::until_convergence) break;
  }

  fit.params = ParamSet{std::move(mean), std::move(sigma_row), std::move(sigma_col)}.normalized();
  return fit;
}

/// Flip-flop MLE over the whole stack.
inline MLEFit flip_flop_mle(const MatrixStack& stack, const FlipFlopConfig& cfg = {}) {
  std::vector<std::size_t> all(stack.n());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return flip_flop_mle(stack, all, cfg);
}

/// |sum_{i in H} mmd^2(X_i; fit) - h p q|. Zero (up to rounding) whenever the
/// fit's last update was a column step on the same subset.
inline double mean_mmd_identity_check(const MatrixStack& stack, std::span<const std::size_t> subset,
                                      const MLEFit& fit) {
  const DistanceKernel kernel(fit.params);
  double sum = 0.0;
  for (std::size_t i : subset) sum += kernel(stack[i]);
  return std::abs(sum - static_cast<double>(subset.size() * stack.p() * stack.q()));
}

}  // namespace mmcd
