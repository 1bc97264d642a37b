#include <random>

#include <gtest/gtest.h>

#include "helpers.hpp"
#include "oracles.hpp"

using namespace dualstat;
using namespace testing_util;

TEST(FitLrm, PerfectlyInformativeFeature) {
  const Matrix Xm = (Matrix(3, 2) << 1, 0, 0, 1, 1, 0).finished();
  const Matrix Y = vec({1, 0, 1});
  const auto fit = lrm::fit_lrm(Y, DesignMatrix::indicator(Xm));
  EXPECT_NEAR(fit.W(0, 0), 1.0, 1e-12);
  EXPECT_NEAR(fit.W(0, 1), 0.0, 1e-12);
  EXPECT_LT(rel_diff(Matrix(fit.X_hat.col(0)), Y), 1e-12);
  EXPECT_LT(fit.eps_LS.col(0).norm(), 1e-12);
  // y = 0 regresses to (0, 0), which the tie rule sends to the first class.
  EXPECT_EQ(lrm::classify_rows(fit.X_hat), (std::vector<int>{0, 0, 0}));
}

TEST(FitLrm, PerfectlyInformativeFeatureWithIntercept) {
  const auto X = DesignMatrix::indicator((Matrix(3, 2) << 1, 0, 0, 1, 1, 0).finished());
  const Matrix Y = (Matrix(3, 2) << 1, 1, 0, 1, 1, 1).finished();
  const auto fit = lrm::fit_lrm(Y, X);
  EXPECT_LT(fit.eps_LS.norm(), 1e-12);
  const auto cls = lrm::classify_rows(fit.X_hat);
  EXPECT_EQ(cls, (std::vector<int>{0, 1, 0}));
  EXPECT_EQ(lrm::empirical_error(cls, X), 0.0);
}

TEST(FitLrm, SelfRegressionIsIdentity) {
  std::mt19937_64 rng(2);
  const auto X = random_indicator(12, 3, rng);
  const auto fit = lrm::fit_lrm(X.entries(), X);
  EXPECT_LT(rel_diff(fit.W, Matrix::Identity(3, 3)), 1e-12);
}

TEST(FitLrm, MatchesExplicitInverse) {
  std::mt19937_64 rng(4);
  const Matrix Y = gaussian(20, rng);
  const Matrix Xm = alternating(20);
  const auto fit = lrm::fit_lrm(Y, DesignMatrix::indicator(Xm));
  const auto ref = oracle::lrm_w(oracle::from_eigen(Y), oracle::from_eigen(Xm));
  for (int m = 0; m < 2; ++m) EXPECT_LT(rel_diff(fit.W(0, m), ref[0][static_cast<std::size_t>(m)]), 1e-10);
}

TEST(FitLrm, Invariants) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const int N = 10 + trial;
    const Matrix Y = Matrix::Random(N, 1 + trial % 3);
    const auto X = random_indicator(N, 2 + trial % 2, rng);
    const auto fit = lrm::fit_lrm(Y, X);
    EXPECT_LE(rel_diff(fit.X_hat, Y * fit.W), 1e-12);
    EXPECT_LE(rel_diff(fit.eps_LS, X.entries() - fit.X_hat), 1e-12);
    EXPECT_LT((Y.transpose() * fit.eps_LS).norm(), 1e-8 * Y.norm() * X.entries().norm());
  }
}

TEST(FitLrm, ColumnsSumToRegressionOfOnes) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix Y = gaussian(30, rng);
    const auto fit = lrm::fit_lrm(Y, random_indicator(30, 2, rng));
    const double ones = (Y.transpose() * Vector::Ones(30))(0) / Y.squaredNorm();
    EXPECT_LE(rel_diff(fit.W.row(0).sum(), ones), 1e-10);
  }
}

TEST(FitLrm, Errors) {
  const Matrix Y = Matrix::Zero(4, 1);
  expect_code([&] { lrm::fit_lrm(Y, DesignMatrix::indicator(alternating(4))); }, ErrorCode::RankDeficient);
  const Matrix collinear = (Matrix(4, 2) << 1, 2, 2, 4, 3, 6, 4, 8).finished();
  expect_code([&] { lrm::fit_lrm(collinear, DesignMatrix::indicator(alternating(4))); },
              ErrorCode::RankDeficient);
  expect_code([&] { lrm::fit_lrm(Matrix::Ones(3, 1), DesignMatrix::indicator(alternating(4))); },
              ErrorCode::DimensionMismatch);
}

TEST(PredictLabels, Examples) {
  std::mt19937_64 rng(8);
  const Matrix Y = Matrix::Random(5, 2);
  EXPECT_EQ(lrm::predict_labels(Y, Matrix::Zero(2, 3)), Matrix::Zero(5, 3));
  const Matrix W = Matrix::Random(3, 2);
  EXPECT_EQ(lrm::predict_labels(Matrix::Identity(3, 3), W), W);
  const Matrix got = lrm::predict_labels(vec({2, -1}), (Matrix(1, 2) << 0.5, -0.5).finished());
  EXPECT_EQ(got, (Matrix(2, 2) << 1, -1, -0.5, 0.5).finished());
  expect_code([&] { lrm::predict_labels(Y, Matrix::Zero(3, 2)); }, ErrorCode::DimensionMismatch);
}

TEST(ClassifyRows, ArgmaxWithLowestIndexTies) {
  const Matrix rows = (Matrix(4, 2) << 0.9, 0.1, 0.5, 0.5, -1, 2, 0, 0).finished();
  EXPECT_EQ(lrm::classify_rows(rows), (std::vector<int>{0, 0, 1, 0}));
  const Matrix three = (Matrix(2, 3) << 0.2, 0.7, 0.7, 1.5, -3, 1.5).finished();
  EXPECT_EQ(lrm::classify_rows(three), (std::vector<int>{1, 0}));
}

TEST(EmpiricalError, Counting) {
  const auto truth4 = DesignMatrix::indicator(alternating(4));
  EXPECT_EQ(lrm::empirical_error({0, 1, 0, 1}, truth4), 0.0);
  EXPECT_EQ(lrm::empirical_error({1, 0, 1, 0}, truth4), 1.0);
  const auto truth5 = DesignMatrix::indicator(alternating(5));
  EXPECT_DOUBLE_EQ(lrm::empirical_error({0, 1, 0, 1, 1}, truth5), 0.2);
  expect_code([&] { lrm::empirical_error({0, 1}, truth4); }, ErrorCode::DimensionMismatch);
  expect_code([&] { lrm::empirical_error({0, 1, 0, 1}, DesignMatrix::general(alternating(4))); },
              ErrorCode::NotIndicator);
}

TEST(FitMulticlass, EqualsFitLrm) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 100; ++trial) {
    const int N = 8 + trial % 40;
    const int P = 1 + trial % 3;
    const int M = 2 + trial % 3;
    const Matrix Y = Matrix::Random(N, P);
    const auto X = random_indicator(N, M, rng);
    EXPECT_LE(rel_diff(lrm::fit_multiclass(Y, X), lrm::fit_lrm(Y, X).W), 1e-10);
  }
}

TEST(FitMulticlass, SingleColumnAndIdentity) {
  std::mt19937_64 rng(11);
  const Matrix Y = gaussian(15, rng);
  const Vector x = gaussian(15, rng);
  const double expected = Y.col(0).dot(x) / Y.squaredNorm();
  const Matrix W = lrm::fit_multiclass(Y, DesignMatrix::general(Matrix(x)));
  EXPECT_LE(rel_diff(W(0, 0), expected), 1e-12);
  const auto X = random_indicator(10, 3, rng);
  EXPECT_LE(rel_diff(lrm::fit_multiclass(X.entries(), X), Matrix::Identity(3, 3)), 1e-12);
}
