#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mmcd/matvar.hpp"
#include "oracles.hpp"

using namespace mmcd;

TEST(MatrixStack, ValidatesConstruction) {
  EXPECT_THROW(MatrixStack(0, 2, std::vector<double>{}), PreconditionError);
  EXPECT_THROW(MatrixStack(2, 2, std::vector<double>(6, 0.0)), PreconditionError);
  EXPECT_THROW(MatrixStack(2, 2, std::vector<double>{}), PreconditionError);
  std::vector<double> bad(4, 1.0);
  bad[2] = std::nan("");
  EXPECT_THROW(MatrixStack(2, 2, bad), InputError);
}

TEST(MatrixStack, StoresRowMajorAndSelects) {
  MatrixStack s(2, 3, std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12});
  EXPECT_EQ(s.n(), 2u);
  EXPECT_EQ(s[1](0, 2), 9.0);
  EXPECT_EQ(s[0](1, 0), 4.0);
  const std::vector<std::size_t> idx{1};
  const auto sub = s.select(idx);
  EXPECT_EQ(sub.n(), 1u);
  EXPECT_EQ(sub.at(0), s.at(1));
  EXPECT_THROW(s.at(2), PreconditionError);
  const auto v = s.vectorized();
  EXPECT_EQ(v.p(), 6u);
  EXPECT_EQ(v.q(), 1u);
  EXPECT_EQ(Vector(v.at(0)), vec(s.at(0)));
}

TEST(Distance, MatchesDenseKroneckerForm) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> dim(1, 5);
  for (int t = 0; t < 1000; ++t) {
    const auto p = dim(rng);
    const auto q = dim(rng);
    const ParamSet s = oracle::random_params(p, q, rng);
    const Matrix x = s.mean + oracle::random_matrix(p, q, rng);
    const double expected = oracle::dense_mahalanobis(x, s);
    EXPECT_NEAR(mmd_squared(x, s), expected, 1e-10 * expected) << p << "x" << q;
  }
}

TEST(Distance, BatchedAgreesWithSingle) {
  std::mt19937_64 rng(7);
  const ParamSet s = oracle::random_params(4, 6, rng);
  const MatrixStack x = sample(DistributionSpec::normal(s), 50, 9);
  const auto batch = mmd_squared(x, s);
  for (std::size_t i = 0; i < x.n(); ++i) EXPECT_NEAR(batch[i], mmd_squared(Matrix(x.at(i)), s), 1e-11 * batch[i]);
}

TEST(Distance, InvariantToRebalancing) {
  std::mt19937_64 rng(8);
  const ParamSet s = oracle::random_params(3, 4, rng);
  const Matrix x = oracle::random_matrix(3, 4, rng);
  const double d = mmd_squared(x, s);
  for (double kappa : {1e-3, 0.5, 7.0, 1e4}) EXPECT_NEAR(mmd_squared(x, s.rebalanced(kappa)), d, 1e-10 * d);
  EXPECT_NEAR(s.normalized().sigma_col(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(mmd_squared(x, s.normalized()), d, 1e-10 * d);
}

TEST(Distance, ZeroAtTheMean) {
  const ParamSet s = ParamSet::identity(2, 3);
  EXPECT_EQ(mmd_squared(s.mean, s), 0.0);
  EXPECT_THROW(mmd_squared(Matrix::Zero(3, 2), s), PreconditionError);
}

TEST(LogPdf, MatchesDenseMultivariateNormal) {
  std::mt19937_64 rng(31);
  for (int t = 0; t < 50; ++t) {
    const ParamSet s = oracle::random_params(3, 4, rng);
    const Matrix x = s.mean + oracle::random_matrix(3, 4, rng);
    EXPECT_NEAR(matnorm_logpdf(x, s), oracle::dense_mvn_logpdf(x, s), 1e-9);
  }
}

TEST(ParamSet, ValidationCatchesProblems) {
  ParamSet s = ParamSet::identity(2, 3);
  EXPECT_NO_THROW(s.validate());
  s.sigma_row(0, 1) = 0.3;
  EXPECT_THROW(s.validate(), PreconditionError);
  s.sigma_row(1, 0) = 0.3;
  EXPECT_NO_THROW(s.validate());
  s.sigma_col = Matrix::Zero(3, 3);
  EXPECT_THROW(s.validate(), NumericalError);
  s.sigma_col = Matrix::Identity(2, 2);
  EXPECT_THROW(s.validate(), PreconditionError);
}

TEST(Sampling, MomentsMatchTheModel) {
  std::mt19937_64 rng(12);
  const ParamSet s = oracle::random_params(2, 3, rng);
  const std::size_t n = 40000;
  const MatrixStack x = sample(DistributionSpec::normal(s), n, 77);
  Vector mean = Vector::Zero(6);
  for (std::size_t i = 0; i < n; ++i) mean += vec(x.at(i));
  mean /= static_cast<double>(n);
  Matrix cov = Matrix::Zero(6, 6);
  for (std::size_t i = 0; i < n; ++i) {
    const Vector d = vec(x.at(i)) - mean;
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(n - 1);
  const Matrix truth = oracle::dense_kron(s.sigma_col, s.sigma_row);
  EXPECT_LT((mean - vec(s.mean)).cwiseAbs().maxCoeff(), 0.03);
  EXPECT_LT((cov - truth).norm() / truth.norm(), 0.03);
  // Mean squared distance is pq under the model.
  double avg = 0.0;
  for (double d : mmd_squared(x, s)) avg += d;
  EXPECT_NEAR(avg / static_cast<double>(n), 6.0, 0.1);
}

TEST(Sampling, DeterministicPerSeed) {
  const ParamSet s = ParamSet::identity(3, 2);
  EXPECT_EQ(sample(DistributionSpec::normal(s), 10, 5), sample(DistributionSpec::normal(s), 10, 5));
  EXPECT_FALSE(sample(DistributionSpec::normal(s), 10, 5) == sample(DistributionSpec::normal(s), 10, 6));
}

TEST(Sampling, MatrixTHasHeavierTails) {
  const ParamSet s = ParamSet::identity(2, 2);
  const auto normal = mmd_squared(sample(DistributionSpec::normal(s), 20000, 1), s);
  const auto heavy = mmd_squared(sample(DistributionSpec::t(s, 3.0), 20000, 1), s);
  auto tail = [](const std::vector<double>& d) {
    return std::count_if(d.begin(), d.end(), [](double v) { return v > 20.0; });
  };
  EXPECT_GT(tail(heavy), 5 * tail(normal) + 50);
}

TEST(Sampling, RejectsBadSpecs) {
  const ParamSet s = ParamSet::identity(2, 2);
  EXPECT_THROW(sample(DistributionSpec::normal(s), 0, 1), PreconditionError);
  EXPECT_THROW(sample(DistributionSpec::t(s, -1.0), 5, 1), PreconditionError);
  DistributionSpec bad = DistributionSpec::normal(s);
  bad.dof = 3.0;
  EXPECT_THROW(sample(bad, 5, 1), PreconditionError);
}
