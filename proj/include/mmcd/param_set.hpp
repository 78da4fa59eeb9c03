#pragma once

#include <string>

#include "mmcd/error.hpp"
#include "mmcd/linalg.hpp"

namespace mmcd {

/// Mean matrix plus row and column covariance factors. The pair
/// (sigma_row, sigma_col) is identified only through sigma_col (x) sigma_row;
/// normalized() fixes sigma_col(0,0) = 1.
struct ParamSet {
  Matrix mean;       // p x q
  Matrix sigma_row;  // p x p
  Matrix sigma_col;  // q x q

  Eigen::Index p() const { return mean.rows(); }
  Eigen::Index q() const { return mean.cols(); }

  /// Throws PreconditionError on shape or symmetry problems and
  /// NumericalError when a factor is not positive definite.
  void validate() const {
    if (sigma_row.rows() != p() || sigma_row.cols() != p())
      throw PreconditionError("sigma_row must be " + std::to_string(p()) + "x" + std::to_string(p()));
    if (sigma_col.rows() != q() || sigma_col.cols() != q())
      throw PreconditionError("sigma_col must be " + std::to_string(q()) + "x" + std::to_string(q()));
    if (!mean.allFinite()) throw PreconditionError("mean contains non-finite entries");
    if (!is_symmetric(sigma_row)) throw PreconditionError("sigma_row is not symmetric");
    if (!is_symmetric(sigma_col)) throw PreconditionError("sigma_col is not symmetric");
    cholesky_or_throw(sigma_row, "sigma_row");
    cholesky_or_throw(sigma_col, "sigma_col");
  }

  ParamSet normalized() const {
    ParamSet out = *this;
    const double s = sigma_col(0, 0);
    if (!(s > 0.0)) throw NumericalError("sigma_col(0,0) must be positive to normalize");
    out.sigma_col /= s;
    out.sigma_row *= s;
    return out;
  }

  /// (kappa * sigma_row, sigma_col / kappa): same Kronecker product.
  ParamSet rebalanced(double kappa) const {
    ParamSet out = *this;
    out.sigma_row *= kappa;
    out.sigma_col /= kappa;
    return out;
  }

  Matrix precision_row() const { return cholesky_or_throw(sigma_row, "sigma_row").inverse(); }
  Matrix precision_col() const { return cholesky_or_throw(sigma_col, "sigma_col").inverse(); }

  /// Covariance of vec(X): sigma_col (x) sigma_row.
  Matrix kronecker_covariance() const { return kronecker(sigma_col, sigma_row); }

  static ParamSet identity(Eigen::Index p, Eigen::Index q) {
    return {Matrix::Zero(p, q), Matrix::Identity(p, p), Matrix::Identity(q, q)};
  }
};

/// Squared matrix Mahalanobis distances against a fixed ParamSet, with the
/// covariance factors decomposed once.
class DistanceKernel {
 public:
  explicit DistanceKernel(const ParamSet& params)
      : mean_(params.mean),
        row_(cholesky_or_throw(params.sigma_row, "sigma_row")),
        col_(cholesky_or_throw(params.sigma_col, "sigma_col")) {}

  /// tr(Omega_col (X - M)' Omega_row (X - M)) = ||L_r^{-1} (X - M) L_c^{-T}||_F^2
  template <typename Derived>
  double operator()(const Eigen::MatrixBase<Derived>& x) const {
    if (x.rows() != mean_.rows() || x.cols() != mean_.cols())
      throw PreconditionError("observation shape does not match the parameter shape");
    const Matrix w = row_.solve_lower(x - mean_);                 // p x q
    const Matrix v = col_.solve_lower(w.transpose());             // q x p
    return v.squaredNorm();
  }

  const CholeskyFactor& row_factor() const { return row_; }
  const CholeskyFactor& col_factor() const { return col_; }

 private:
  Matrix mean_;
  CholeskyFactor row_;
  CholeskyFactor col_;
};

}  // namespace mmcd
