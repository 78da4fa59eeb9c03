#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mmcd/error.hpp"
#include "mmcd/linalg.hpp"

namespace mmcd {

/// An ordered collection of n real p x q observations. Each matrix is stored
/// contiguously in row-major order.
class MatrixStack {
 public:
  using ConstView = Eigen::Map<const RowMatrix>;

  MatrixStack() = default;

  MatrixStack(std::size_t p, std::size_t q, std::vector<double> data)
      : p_(p), q_(q), data_(std::move(data)) {
    if (p_ == 0 || q_ == 0)
      throw PreconditionError("matrix stack dimensions must be positive");
    if (data_.size() % (p_ * q_) != 0)
      throw PreconditionError("data length is not a multiple of p*q");
    n_ = data_.size() / (p_ * q_);
    if (n_ == 0) throw PreconditionError("matrix stack needs at least one observation");
    for (double v : data_)
      if (!std::isfinite(v)) throw InputError("matrix stack contains a non-finite entry");
  }

  MatrixStack(std::size_t p, std::size_t q, const std::vector<Matrix>& mats)
      : MatrixStack(p, q, flatten(p, q, mats)) {}

  std::size_t n() const { return n_; }
  std::size_t p() const { return p_; }
  std::size_t q() const { return q_; }

  ConstView operator[](std::size_t i) const {
    return ConstView(data_.data() + i * p_ * q_, static_cast<Eigen::Index>(p_),
                     static_cast<Eigen::Index>(q_));
  }

  Matrix at(std::size_t i) const {
    if (i >= n_) throw PreconditionError("observation index out of range");
    return (*this)[i];
  }

  void set(std::size_t i, const Matrix& m) {
    if (i >= n_) throw PreconditionError("observation index out of range");
    check_shape(m);
    if (!m.allFinite()) throw InputError("matrix stack contains a non-finite entry");
    Eigen::Map<RowMatrix>(data_.data() + i * p_ * q_, static_cast<Eigen::Index>(p_),
                          static_cast<Eigen::Index>(q_)) = m;
  }

  const std::vector<double>& raw() const { return data_; }

  /// Copy of the observations listed in `indices`, in that order.
  MatrixStack select(std::span<const std::size_t> indices) const {
    std::vector<double> out;
    out.reserve(indices.size() * p_ * q_);
    for (std::size_t i : indices) {
      if (i >= n_) throw PreconditionError("observation index out of range");
      auto first = data_.begin() + static_cast<std::ptrdiff_t>(i * p_ * q_);
      out.insert(out.end(), first, first + static_cast<std::ptrdiff_t>(p_ * q_));
    }
    return MatrixStack(p_, q_, std::move(out));
  }

  /// Each observation replaced by vec(X_i) as a pq x 1 matrix.
  MatrixStack vectorized() const {
    std::vector<double> out;
    out.reserve(data_.size());
    for (std::size_t i = 0; i < n_; ++i) {
      const Matrix m = (*this)[i];
      out.insert(out.end(), m.data(), m.data() + m.size());  // column-major = vec
    }
    return MatrixStack(p_ * q_, 1, std::move(out));
  }

  void check_shape(const Matrix& m) const {
    if (static_cast<std::size_t>(m.rows()) != p_ || static_cast<std::size_t>(m.cols()) != q_)
      throw PreconditionError("matrix shape " + std::to_string(m.rows()) + "x" +
                              std::to_string(m.cols()) + " does not match stack shape " +
                              std::to_string(p_) + "x" + std::to_string(q_));
  }

  friend bool operator==(const MatrixStack&, const MatrixStack&) = default;

 private:
  static std::vector<double> flatten(std::size_t p, std::size_t q, const std::vector<Matrix>& mats) {
    std::vector<double> out;
    out.reserve(mats.size() * p * q);
    for (const auto& m : mats) {
      if (static_cast<std::size_t>(m.rows()) != p || static_cast<std::size_t>(m.cols()) != q)
        throw PreconditionError("all observations must share the stack shape");
      const RowMatrix r = m;
      out.insert(out.end(), r.data(), r.data() + r.size());
    }
    return out;
  }

  std::size_t n_ = 0;
  std::size_t p_ = 0;
  std::size_t q_ = 0;
  std::vector<double> data_;
};

}  // namespace mmcd
