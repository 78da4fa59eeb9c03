#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "mmcd/chi_square.hpp"
#include "mmcd/error.hpp"
#include "mmcd/linalg.hpp"
#include "mmcd/matrix_stack.hpp"
#include "mmcd/matvar.hpp"
#include "mmcd/param_set.hpp"

namespace mmcd {

struct DetectionResult {
  std::vector<double> distances;
  double cutoff = 0.0;
  std::vector<bool> flags;  // distances[i] > cutoff

  std::size_t flagged() const { return static_cast<std::size_t>(std::count(flags.begin(), flags.end(), true)); }
};

/// Flags observations whose squared distance exceeds the chi-square quantile
/// with pq degrees of freedom.
inline DetectionResult detect(const MatrixStack& stack, const ParamSet& params, double quantile = 0.975) {
  if (!(quantile > 0.0 && quantile < 1.0))
    throw PreconditionError("detection quantile must lie in (0, 1), got " + std::to_string(quantile));
  if (static_cast<std::size_t>(params.p()) != stack.p() || static_cast<std::size_t>(params.q()) != stack.q())
    throw PreconditionError("parameter shape does not match the data");
  DetectionResult r;
  r.distances = mmd_squared(stack, params);
  r.cutoff = stats::chi_square_quantile(quantile, static_cast<double>(stack.p() * stack.q()));
  r.flags.resize(r.distances.size());
  for (std::size_t i = 0; i < r.distances.size(); ++i) r.flags[i] = r.distances[i] > r.cutoff;
  return r;
}

struct ShapleyReport {
  Matrix cell;  // p x q, sums to total
  Vector row;   // length p
  Vector col;   // length q
  double total = 0.0;  // squared distance
};

/// Cellwise Shapley values (X - M) o Omega_row (X - M) Omega_col together with
/// the row and column aggregates.
inline ShapleyReport shapley(const Matrix& x, const ParamSet& params) {
  if (x.rows() != params.p() || x.cols() != params.q())
    throw PreconditionError("observation is " + std::to_string(x.rows()) + "x" + std::to_string(x.cols()) +
                            " but parameters are " + std::to_string(params.p()) + "x" +
                            std::to_string(params.q()));
  const Matrix omega_row = params.precision_row();
  const Matrix omega_col = params.precision_col();
  const Matrix e = x - params.mean;
  const Matrix w = omega_row * e * omega_col;

  ShapleyReport r;
  r.cell = e.cwiseProduct(w);
  r.total = mmd_squared(x, params);
  r.row = (w * e.transpose()).diagonal();  // diag(Omega_row E Omega_col E')
  r.col = (e.transpose() * w).diagonal();  // diag(E' Omega_row E Omega_col)

  const double tol = 1e-10 * (1.0 + std::abs(r.total));
  const double row_gap = (r.row - r.cell.rowwise().sum()).cwiseAbs().maxCoeff();
  const double col_gap = (r.col - r.cell.colwise().sum().transpose()).cwiseAbs().maxCoeff();
  if (row_gap > tol || col_gap > tol)
    throw NumericalError("row/column Shapley aggregates disagree with the cell values");
  return r;
}

struct InvarianceReport {
  double shift = 0.0;      // |Phi(X + C; M + C) - Phi(X)|
  double transform = 0.0;  // |Phi(AXB; AMB, A S_r A', B' S_c B) - P_A Phi(X) P_B|
  double combined = 0.0;   // both at once

  double max_deviation() const { return std::max({shift, transform, combined}); }
};

namespace detail {

inline bool is_diagonal_invertible(const Matrix& a) {
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      if ((i == j) != (a(i, j) != 0.0)) return false;
  return true;
}

inline bool is_permutation(const Matrix& a) {
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    int ones = 0;
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      if (a(i, j) == 1.0) ++ones;
      else if (a(i, j) != 0.0) return false;
    }
    if (ones != 1) return false;
  }
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    if (a.col(j).sum() != 1.0) return false;
  return true;
}

// The reordering a supported transformation induces on Shapley values.
inline Matrix shapley_action(const Matrix& a, const char* name) {
  if (a.rows() != a.cols()) throw PreconditionError(std::string(name) + " must be square");
  if (is_permutation(a)) return a;
  if (is_diagonal_invertible(a)) return Matrix::Identity(a.rows(), a.cols());
  throw PreconditionError(std::string(name) + " must be an invertible diagonal or a permutation matrix");
}

inline double max_abs(const Matrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace detail

/// Checks the shift, scale and permutation behaviour of the cellwise Shapley
/// values for X -> A X B + C, returning the largest absolute deviations.
inline InvarianceReport shapley_invariance_suite(const Matrix& x, const ParamSet& params, const Matrix& a,
                                                 const Matrix& b, const Matrix& c) {
  const Matrix pa = detail::shapley_action(a, "A");
  const Matrix pb = detail::shapley_action(b, "B");
  if (a.rows() != params.p() || b.rows() != params.q())
    throw PreconditionError("transformation sizes do not match the parameter shape");
  if (c.rows() != params.p() || c.cols() != params.q())
    throw PreconditionError("shift must have the parameter shape");

  const Matrix base = shapley(x, params).cell;
  InvarianceReport r;

  ParamSet shifted = params;
  shifted.mean += c;
  r.shift = detail::max_abs(shapley(x + c, shifted).cell - base);

  ParamSet moved{a * params.mean * b, a * params.sigma_row * a.transpose(),
                 b.transpose() * params.sigma_col * b};
  const Matrix expected = pa * base * pb;
  r.transform = detail::max_abs(shapley(a * x * b, moved).cell - expected);

  ParamSet both = moved;
  both.mean += c;
  r.combined = detail::max_abs(shapley(a * x * b + c, both).cell - expected);
  return r;
}

}  // namespace mmcd
