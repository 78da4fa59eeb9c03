#include <gtest/gtest.h>

#include <random>

#include "mmcd/chi_square.hpp"
#include "mmcd/matvar.hpp"
#include "mmcd/outlier.hpp"
#include "oracles.hpp"

using namespace mmcd;

TEST(Detect, MeanIsNeverFlagged) {
  std::mt19937_64 rng(1);
  const ParamSet s = oracle::random_params(3, 4, rng);
  const MatrixStack x(3, 4, std::vector<Matrix>{s.mean, s.mean + Matrix::Constant(3, 4, 50.0)});
  const auto r = detect(x, s);
  EXPECT_EQ(r.distances[0], 0.0);
  EXPECT_FALSE(r.flags[0]);
  EXPECT_TRUE(r.flags[1]);
  EXPECT_DOUBLE_EQ(r.cutoff, stats::chi_square_quantile(0.975, 12));
}

TEST(Detect, CalibratedAtTheTrueParameters) {
  std::mt19937_64 rng(2);
  const ParamSet s = oracle::random_params(5, 4, rng);
  const auto r = detect(sample(DistributionSpec::normal(s), 10000, 3), s, 0.975);
  const double rate = static_cast<double>(r.flagged()) / 10000.0;
  EXPECT_GE(rate, 0.015);
  EXPECT_LE(rate, 0.035);
}

TEST(Detect, QuantileSetsTheCutoff) {
  const ParamSet s = ParamSet::identity(5, 20);
  const auto r = detect(sample(DistributionSpec::normal(s), 3, 1), s, 0.99);
  EXPECT_DOUBLE_EQ(r.cutoff, stats::chi_square_quantile(0.99, 100));
  EXPECT_THROW(detect(sample(DistributionSpec::normal(s), 3, 1), s, 1.0), PreconditionError);
  EXPECT_THROW(detect(sample(DistributionSpec::normal(s), 3, 1), s, 0.0), PreconditionError);
  EXPECT_THROW(detect(sample(DistributionSpec::normal(ParamSet::identity(2, 2)), 3, 1), s), PreconditionError);
}

TEST(Shapley, IdentityPrecisionGivesSquaredDeviations) {
  std::mt19937_64 rng(4);
  ParamSet s = ParamSet::identity(3, 5);
  s.mean = oracle::random_matrix(3, 5, rng);
  const Matrix x = oracle::random_matrix(3, 5, rng);
  const auto r = shapley(x, s);
  EXPECT_LT((r.cell - (x - s.mean).cwiseAbs2()).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Shapley, EfficiencyAndAggregation) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> dim(1, 10);
  for (int t = 0; t < 1000; ++t) {
    const auto p = dim(rng);
    const auto q = dim(rng);
    const ParamSet s = oracle::random_params(p, q, rng);
    const Matrix x = s.mean + 2.0 * oracle::random_matrix(p, q, rng);
    const auto r = shapley(x, s);
    const double d = oracle::dense_mahalanobis(x, s);
    EXPECT_NEAR(r.cell.sum(), d, 1e-8 * (1.0 + d));
    EXPECT_NEAR(r.total, d, 1e-8 * (1.0 + d));
    EXPECT_LT((r.row - r.cell.rowwise().sum()).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((r.col - r.cell.colwise().sum().transpose()).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Shapley, MatchesCoalitionEnumeration) {
  std::mt19937_64 rng(6);
  for (int p = 1; p <= 9; ++p)
    for (int q = 1; p * q <= 9; ++q)
      for (int rep = 0; rep < 3; ++rep) {
        const ParamSet s = oracle::random_params(p, q, rng);
        const Matrix x = s.mean + oracle::random_matrix(p, q, rng);
        const Matrix expected = oracle::coalition_shapley(x, s);
        EXPECT_LT((shapley(x, s).cell - expected).cwiseAbs().maxCoeff(), 1e-8 * (1.0 + expected.cwiseAbs().maxCoeff()))
            << p << "x" << q;
      }
}

TEST(Shapley, ShapeMismatchThrows) {
  EXPECT_THROW(shapley(Matrix::Zero(2, 3), ParamSet::identity(3, 2)), PreconditionError);
}

TEST(ShapleyInvariance, ZeroShiftAndIdentityMaps) {
  std::mt19937_64 rng(7);
  const ParamSet s = oracle::random_params(3, 4, rng);
  const Matrix x = oracle::random_matrix(3, 4, rng);
  const auto r = shapley_invariance_suite(x, s, Matrix::Identity(3, 3), Matrix::Identity(4, 4), Matrix::Zero(3, 4));
  EXPECT_EQ(r.shift, 0.0);
  EXPECT_EQ(r.transform, 0.0);
}

TEST(ShapleyInvariance, ShiftScaleAndPermutation) {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 50; ++t) {
    const ParamSet s = oracle::random_params(4, 3, rng);
    const Matrix x = s.mean + oracle::random_matrix(4, 3, rng);
    const Matrix c = oracle::random_matrix(4, 3, rng);
    const double scale = shapley(x, s).cell.cwiseAbs().maxCoeff() + 1.0;

    Matrix a = Matrix::Zero(4, 4);
    a.diagonal() << 2.0, -0.5, 3.0, 1.5;
    Matrix b = Matrix::Zero(3, 3);
    b.diagonal() << 3.0, 0.25, -2.0;
    EXPECT_LT(shapley_invariance_suite(x, s, a, b, c).max_deviation(), 1e-12 * scale);

    Matrix swap = Matrix::Identity(4, 4);
    swap.row(0).swap(swap.row(2));
    Matrix perm = Matrix::Zero(3, 3);
    perm(0, 1) = perm(1, 2) = perm(2, 0) = 1.0;
    EXPECT_LT(shapley_invariance_suite(x, s, swap, perm, c).max_deviation(), 1e-12 * scale);
    EXPECT_LT(shapley_invariance_suite(x, s, a, perm, c).max_deviation(), 1e-12 * scale);
  }
}

TEST(ShapleyInvariance, RowSwapSwapsRows) {
  std::mt19937_64 rng(9);
  const ParamSet s = oracle::random_params(3, 3, rng);
  const Matrix x = oracle::random_matrix(3, 3, rng);
  Matrix swap = Matrix::Identity(3, 3);
  swap.row(0).swap(swap.row(1));
  const ParamSet moved{swap * s.mean, swap * s.sigma_row * swap.transpose(), s.sigma_col};
  const Matrix base = shapley(x, s).cell;
  const Matrix after = shapley(swap * x, moved).cell;
  EXPECT_LT((after.row(0) - base.row(1)).cwiseAbs().maxCoeff(), 1e-12 * (1 + base.cwiseAbs().maxCoeff()));
  EXPECT_LT((after.row(1) - base.row(0)).cwiseAbs().maxCoeff(), 1e-12 * (1 + base.cwiseAbs().maxCoeff()));
}

TEST(ShapleyInvariance, RejectsUnsupportedTransforms) {
  const ParamSet s = ParamSet::identity(2, 2);
  Matrix general(2, 2);
  general << 1, 1, 0, 1;
  EXPECT_THROW(shapley_invariance_suite(Matrix::Zero(2, 2), s, general, Matrix::Identity(2, 2), Matrix::Zero(2, 2)),
               PreconditionError);
  Matrix singular = Matrix::Zero(2, 2);
  singular(0, 0) = 1.0;
  EXPECT_THROW(shapley_invariance_suite(Matrix::Zero(2, 2), s, Matrix::Identity(2, 2), singular, Matrix::Zero(2, 2)),
               PreconditionError);
}

TEST(ShapleyInvariance, NotEquivariantUnderRowAddition) {
  // A adds the second row to the first: cellwise values do not follow A.
  std::mt19937_64 rng(10);
  const ParamSet s = oracle::random_params(3, 3, rng);
  const Matrix x = s.mean + oracle::random_matrix(3, 3, rng);
  Matrix a = Matrix::Identity(3, 3);
  a(0, 1) = 1.0;
  const ParamSet moved{a * s.mean, a * s.sigma_row * a.transpose(), s.sigma_col};
  const Matrix lhs = shapley(a * x, moved).cell;
  const Matrix rhs = a * shapley(x, s).cell;
  EXPECT_GT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-6);
  // The distance itself is invariant.
  EXPECT_NEAR(lhs.sum(), shapley(x, s).total, 1e-9 * (1 + lhs.sum()));
}
