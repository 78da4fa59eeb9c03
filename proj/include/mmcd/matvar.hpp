#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <vector>

#include "mmcd/error.hpp"
#include "mmcd/linalg.hpp"
#include "mmcd/matrix_stack.hpp"
#include "mmcd/param_set.hpp"

namespace mmcd {

/// Squared matrix Mahalanobis distance tr(Omega_col (X-M)' Omega_row (X-M)).
/// Equals the Mahalanobis distance of vec(X) under sigma_col (x) sigma_row.
inline double mmd_squared(const Matrix& x, const ParamSet& params) {
  return DistanceKernel(params)(x);
}

/// Squared distances of every observation in the stack, batched as two
/// triangular solves over all observations at once.
inline std::vector<double> mmd_squared(const MatrixStack& stack, const ParamSet& params) {
  const DistanceKernel kernel(params);
  const auto p = static_cast<Eigen::Index>(stack.p());
  const auto q = static_cast<Eigen::Index>(stack.q());
  if (p != params.p() || q != params.q())
    throw PreconditionError("observation shape does not match the parameter shape");
  const auto n = static_cast<Eigen::Index>(stack.n());
  Matrix wide(p, n * q);
  for (Eigen::Index i = 0; i < n; ++i)
    wide.block(0, i * q, p, q) = stack[static_cast<std::size_t>(i)] - params.mean;
  kernel.row_factor().lower.triangularView<Eigen::Lower>().solveInPlace(wide);
  Matrix tall = wide_to_tall(wide, q);
  kernel.col_factor().lower.transpose().triangularView<Eigen::Upper>().solveInPlace<Eigen::OnTheRight>(tall);
  std::vector<double> out(stack.n());
  for (Eigen::Index i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = tall.block(i * p, 0, p, q).squaredNorm();
  return out;
}

/// Matrix normal log-density.
inline double matnorm_logpdf(const Matrix& x, const ParamSet& params) {
  const DistanceKernel kernel(params);
  const double p = static_cast<double>(params.p());
  const double q = static_cast<double>(params.q());
  return -0.5 * (kernel(x) + p * q * std::log(2.0 * std::numbers::pi) +
                 p * kernel.col_factor().log_det + q * kernel.row_factor().log_det);
}

enum class Family { matrix_normal, matrix_t };

struct DistributionSpec {
  Family family = Family::matrix_normal;
  ParamSet params;
  std::optional<double> dof;  // matrix_t only

  static DistributionSpec normal(ParamSet params) {
    return {Family::matrix_normal, std::move(params), std::nullopt};
  }
  static DistributionSpec t(ParamSet params, double dof) {
    return {Family::matrix_t, std::move(params), dof};
  }

  void validate() const {
    params.validate();
    if (family == Family::matrix_t) {
      if (!dof || !(*dof > 0.0)) throw PreconditionError("matrix-t needs positive degrees of freedom");
    } else if (dof) {
      throw PreconditionError("degrees of freedom only apply to the matrix-t family");
    }
  }
};

/// Draws n observations. Matrix normal: M + L_r Z L_c'. Matrix t: the same
/// normal deviation divided by sqrt(chi2_nu / nu), i.e. vec(X) is
/// multivariate t with scale sigma_col (x) sigma_row.
inline MatrixStack sample(const DistributionSpec& spec, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw PreconditionError("sample size must be at least one");
  spec.validate();
  const auto lr = cholesky_or_throw(spec.params.sigma_row, "sigma_row").lower;
  const auto lc = cholesky_or_throw(spec.params.sigma_col, "sigma_col").lower;
  const Eigen::Index p = spec.params.p();
  const Eigen::Index q = spec.params.q();

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::optional<std::chi_squared_distribution<double>> chi2;
  if (spec.family == Family::matrix_t) chi2.emplace(*spec.dof);

  std::vector<double> data;
  data.reserve(n * static_cast<std::size_t>(p * q));
  RowMatrix z(p, q);
  for (std::size_t i = 0; i < n; ++i) {
    for (Eigen::Index r = 0; r < p; ++r)
      for (Eigen::Index c = 0; c < q; ++c) z(r, c) = normal(rng);
    Matrix dev = lr.triangularView<Eigen::Lower>() * Matrix(z);
    dev = dev * lc.transpose();
    if (chi2) dev /= std::sqrt((*chi2)(rng) / *spec.dof);
    const RowMatrix x = spec.params.mean + dev;
    data.insert(data.end(), x.data(), x.data() + x.size());
  }
  return MatrixStack(static_cast<std::size_t>(p), static_cast<std::size_t>(q), std::move(data));
}

}  // namespace mmcd
