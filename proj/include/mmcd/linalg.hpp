#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "mmcd/error.hpp"

namespace mmcd {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Relative pivot floor used by every positive-definiteness test in the library.
inline constexpr double kPivotThreshold = 1e-12;

/// Lower Cholesky factor of a symmetric positive definite matrix together with
/// its log-determinant.
struct CholeskyFactor {
  Matrix lower;
  double log_det = 0.0;

  Eigen::Index dim() const { return lower.rows(); }

  /// L^{-1} b
  template <typename Rhs>
  Matrix solve_lower(const Eigen::MatrixBase<Rhs>& rhs) const {
    return lower.triangularView<Eigen::Lower>().solve(rhs);
  }

  /// A^{-1}
  Matrix inverse() const {
    Matrix linv = solve_lower(Matrix::Identity(dim(), dim()));
    Matrix out = linv.transpose() * linv;
    return 0.5 * (out + out.transpose());
  }
};

/// Attempts a Cholesky factorization. Fails (returns nullopt) when any pivot
/// falls below kPivotThreshold times the largest diagonal entry.
inline std::optional<CholeskyFactor> try_cholesky(const Matrix& a) {
  if (a.rows() != a.cols() || a.rows() == 0) return std::nullopt;
  if (!a.allFinite()) return std::nullopt;
  const double max_diag = a.diagonal().maxCoeff();
  if (!(max_diag > 0.0)) return std::nullopt;
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) return std::nullopt;
  CholeskyFactor f;
  f.lower = llt.matrixL();
  const double floor = kPivotThreshold * max_diag;
  for (Eigen::Index j = 0; j < a.rows(); ++j) {
    const double pivot = f.lower(j, j) * f.lower(j, j);
    if (!(pivot > floor)) return std::nullopt;
    f.log_det += std::log(pivot);
  }
  return f;
}

inline CholeskyFactor cholesky_or_throw(const Matrix& a, const std::string& what) {
  auto f = try_cholesky(a);
  if (!f) throw NumericalError(what + " is not positive definite");
  return std::move(*f);
}

inline bool is_symmetric(const Matrix& a, double rel_tol = 1e-12) {
  if (a.rows() != a.cols()) return false;
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  return (a - a.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

/// Column-stacking vectorization.
inline Vector vec(const Matrix& m) {
  return Eigen::Map<const Vector>(m.data(), m.size());
}

/// Inverse of vec for a p x q target.
inline Matrix unvec(const Vector& v, Eigen::Index rows, Eigen::Index cols) {
  return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

/// Dense Kronecker product A (x) B.
inline Matrix kronecker(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

/// Eigenvalues of a symmetric matrix, sorted descending.
inline Vector sym_eigenvalues_desc(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(a, Eigen::EigenvaluesOnly);
  Vector ev = es.eigenvalues();
  std::sort(ev.data(), ev.data() + ev.size(), std::greater<>());
  return ev;
}

inline Matrix symmetrize(const Matrix& a) { return 0.5 * (a + a.transpose()); }

/// p x (n q) layout [E_1, ..., E_n] converted to the (n p) x q layout
/// [E_1; ...; E_n], and back. Used to batch per-observation solves.
inline Matrix wide_to_tall(const Matrix& wide, Eigen::Index q) {
  const Eigen::Index p = wide.rows();
  const Eigen::Index n = wide.cols() / q;
  Matrix tall(n * p, q);
  for (Eigen::Index i = 0; i < n; ++i) tall.block(i * p, 0, p, q) = wide.block(0, i * q, p, q);
  return tall;
}

inline Matrix tall_to_wide(const Matrix& tall, Eigen::Index p) {
  const Eigen::Index q = tall.cols();
  const Eigen::Index n = tall.rows() / p;
  Matrix wide(p, n * q);
  for (Eigen::Index i = 0; i < n; ++i) wide.block(0, i * q, p, q) = tall.block(i * p, 0, p, q);
  return wide;
}

}  // namespace mmcd
