#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "helpers.hpp"
#include "oracles.hpp"

using namespace dualstat;
using namespace testing_util;

namespace {

DesignMatrix alt4() { return DesignMatrix::indicator(alternating(4)); }

}  // namespace

TEST(GlmMl, IdentityNoiseGivesClassMeans) {
  const auto fit = glm::fit_glm_ml(vec({1, 0, 1, 0}), alt4(), glm::NoiseCov::identity(4));
  EXPECT_NEAR(fit.theta(0), 1.0, 1e-12);
  EXPECT_NEAR(fit.theta(1), 0.0, 1e-12);
  EXPECT_NEAR(fit.rss, 0.0, 1e-12);
}

TEST(GlmMl, ScalarNoiseScalingCancels) {
  std::mt19937_64 rng(5);
  const Vector y = gaussian(12, rng);
  const auto X = random_indicator(12, 3, rng);
  const auto a = glm::fit_glm_ml(y, X, glm::NoiseCov::identity(12));
  const auto b = glm::fit_glm_ml(y, X, glm::NoiseCov(2.0 * Matrix::Identity(12, 12)));
  EXPECT_LT(rel_diff(a.theta, b.theta), 1e-12);
  EXPECT_LT(rel_diff(2.0 * a.cov_theta, b.cov_theta), 1e-12);
}

TEST(GlmMl, DiagonalNoiseMatchesExplicitInverse) {
  Matrix C = Matrix::Zero(4, 4);
  C.diagonal() << 1, 1, 4, 4;
  const Vector y = vec({2, 1, 4, 3});
  const auto fit = glm::fit_glm_ml(y, alt4(), glm::NoiseCov(C));
  const auto ref = oracle::gls_theta(oracle::from_eigen(alternating(4)), oracle::from_eigen(C),
                                     oracle::from_eigen(y));
  // Weighted class means (2 + 4/4)/1.25 and (1 + 3/4)/1.25.
  ASSERT_NEAR(ref[0], 2.4, 1e-12);
  ASSERT_NEAR(ref[1], 1.4, 1e-12);
  EXPECT_NEAR(fit.theta(0), ref[0], 1e-12);
  EXPECT_NEAR(fit.theta(1), ref[1], 1e-12);
}

TEST(GlmMl, GeneralNoiseMatchesExplicitInverse) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const int N = 6 + trial;
    const Matrix A = Matrix::Random(N, N);
    const Matrix C = A * A.transpose() + Matrix::Identity(N, N);
    const Matrix Xm = Matrix::Random(N, 3);
    const Vector y = gaussian(N, rng);
    const auto fit = glm::fit_glm_ml(y, DesignMatrix::general(Xm), glm::NoiseCov(C));
    const auto ref = oracle::gls_theta(oracle::from_eigen(Xm), oracle::from_eigen(C), oracle::from_eigen(y));
    for (int m = 0; m < 3; ++m) EXPECT_LT(rel_diff(fit.theta(m), ref[static_cast<std::size_t>(m)]), 1e-9);
  }
}

TEST(GlmMl, Errors) {
  const Matrix rank1 = (Matrix(4, 2) << 1, 2, 2, 4, 3, 6, 4, 8).finished();
  expect_code([&] { glm::fit_glm_ml(vec({1, 2, 3, 4}), DesignMatrix::general(rank1), glm::NoiseCov::identity(4)); },
              ErrorCode::RankDeficient);
  expect_code([&] { glm::NoiseCov(-Matrix::Identity(3, 3)); }, ErrorCode::NotPositiveDefinite);
  expect_code([&] { glm::NoiseCov((Matrix(2, 2) << 1, 0.5, 0.4, 1).finished()); }, ErrorCode::NotSymmetric);
  expect_code([&] { glm::fit_glm_ml(vec({1, 2, 3}), alt4(), glm::NoiseCov::identity(4)); },
              ErrorCode::DimensionMismatch);
  expect_code([&] { glm::fit_glm_ml(vec({1, 2, 3, 4}), alt4(), glm::NoiseCov::identity(3)); },
              ErrorCode::DimensionMismatch);
}

TEST(GlmLs, ClassMeans) {
  const auto fit = glm::fit_glm_ls(vec({1, 0, 1, 0}), alt4());
  EXPECT_NEAR(fit.theta(0), 1.0, 1e-12);
  EXPECT_NEAR(fit.theta(1), 0.0, 1e-12);
}

TEST(GlmLs, NoisyClassMeans) {
  const auto fit = glm::fit_glm_ls(vec({0.9, 0.1, 1.1, -0.1}), alt4());
  EXPECT_NEAR(fit.theta(0), 1.0, 1e-12);
  EXPECT_NEAR(fit.theta(1), 0.0, 1e-12);
}

TEST(GlmLs, ExactInterpolation) {
  std::mt19937_64 rng(3);
  const Matrix Xm = Matrix::Random(15, 4);
  const Vector truth = gaussian(4, rng);
  const auto fit = glm::fit_glm_ls(Xm * truth, DesignMatrix::general(Xm));
  EXPECT_LT(rel_diff(fit.theta, truth), 1e-10);
  EXPECT_NEAR(fit.rss, 0.0, 1e-18);
}

TEST(GlmLs, EqualsMlWithIdentity) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const int N = 5 + trial % 30;
    const Vector y = gaussian(N, rng);
    const auto X = random_indicator(N, 2, rng);
    const auto ls = glm::fit_glm_ls(y, X);
    const auto ml = glm::fit_glm_ml(y, X, glm::NoiseCov::identity(N));
    EXPECT_LE(rel_diff(ls.theta, ml.theta), 1e-12);
    EXPECT_LE(rel_diff(ls.cov_theta, ml.cov_theta), 1e-12);
  }
}

TEST(GlmLs, FitInvariants) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 30; ++trial) {
    const Vector y = gaussian(25, rng);
    const auto X = random_indicator(25, 3, rng);
    const auto fit = glm::fit_glm_ls(y, X);
    EXPECT_LE(rel_diff(fit.rss, fit.residuals.squaredNorm()), 1e-10);
    EXPECT_LT(rel_diff(fit.residuals, y - X.entries() * fit.theta), 1e-12);
    EXPECT_LT(rel_diff(fit.cov_theta, fit.cov_theta.transpose()), 1e-14);
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(fit.cov_theta);
    EXPECT_GE(eig.eigenvalues().minCoeff(), 0.0);
  }
}

TEST(GlmLs, RssGradientVanishesAtEstimate) {
  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 20; ++trial) {
    const Vector y = gaussian(30, rng);
    const Matrix Xm = Matrix::Random(30, 3);
    const auto X = DesignMatrix::general(Xm);
    const auto fit = glm::fit_glm_ls(y, X);
    const auto g = oracle::gradient(
        [&](const std::vector<double>& th) {
          return glm::residual_sum_squares(y, X, Eigen::Map<const Vector>(th.data(), 3));
        },
        oracle::from_eigen(fit.theta));
    double norm = 0.0;
    for (double e : g) norm += e * e;
    EXPECT_LT(std::sqrt(norm), 1e-6 * (1.0 + fit.rss));
  }
}

TEST(GlmLs, GaussMarkovAgainstPerturbedUnbiasedEstimator) {
  // theta_alt = (A + D) y with D X = 0 stays unbiased; its MSE may not beat LS.
  std::mt19937_64 rng(1234);
  const int N = 40;
  const Matrix Xm = alternating(N);
  const auto X = DesignMatrix::indicator(Xm);
  const Vector truth = vec({1.0, 0.0});
  const Matrix A = (Xm.transpose() * Xm).inverse() * Xm.transpose();
  const Matrix H = Xm * A;
  const Matrix D = 0.05 * Matrix::Random(2, N) * (Matrix::Identity(N, N) - H);
  ASSERT_LT((D * Xm).norm(), 1e-12);

  std::vector<double> diffs;
  for (int trial = 0; trial < 200; ++trial) {
    const Vector y = Xm * truth + gaussian(N, rng);
    const Vector ls = glm::fit_glm_ls(y, X).theta;
    const Vector alt = (A + D) * y;
    diffs.push_back((ls - truth).squaredNorm() - (alt - truth).squaredNorm());
  }
  double mean = 0.0, sq = 0.0;
  for (double d : diffs) mean += d;
  mean /= diffs.size();
  for (double d : diffs) sq += (d - mean) * (d - mean);
  const double se = std::sqrt(sq / (diffs.size() - 1) / diffs.size());
  EXPECT_LE(mean, 3.0 * se);
}

TEST(Rss, Examples) {
  EXPECT_NEAR(glm::residual_sum_squares(vec({1, 0, 1, 0}), alt4(), vec({1, 0})), 0.0, 1e-15);
  const auto X2 = DesignMatrix::indicator(Matrix::Identity(2, 2));
  EXPECT_DOUBLE_EQ(glm::residual_sum_squares(vec({1, 0}), X2, vec({0, 0})), 1.0);
  const auto ones = DesignMatrix::general(Matrix::Ones(3, 1));
  EXPECT_DOUBLE_EQ(glm::residual_sum_squares(vec({1, 2, 3}), ones, vec({2})), 2.0);
  expect_code([&] { glm::residual_sum_squares(vec({1, 2}), ones, vec({2})); }, ErrorCode::DimensionMismatch);
  expect_code([&] { glm::residual_sum_squares(vec({1, 2, 3}), ones, vec({2, 1})); },
              ErrorCode::DimensionMismatch);
}

namespace {

glm::GlmFit fit_with(const Vector& theta, const Matrix& cov) {
  glm::GlmFit f;
  f.theta = theta;
  f.cov_theta = cov;
  return f;
}

}  // namespace

TEST(TStatistic, Examples) {
  const glm::Contrast c(vec({1, -1}));
  EXPECT_NEAR(glm::t_statistic(fit_with(vec({1, 0}), 0.5 * Matrix::Identity(2, 2)), c), 1.0, 1e-12);
  EXPECT_EQ(glm::t_statistic(fit_with(vec({3.7, 3.7}), Matrix::Identity(2, 2)), c), 0.0);
  EXPECT_NEAR(glm::t_statistic(fit_with(vec({1, 0}), Matrix::Identity(2, 2) / 50.0), c), 5.0, 1e-12);
}

TEST(TStatistic, PositiveScalingInvariance) {
  std::mt19937_64 rng(9);
  const auto fit = glm::fit_glm_ls(gaussian(20, rng), random_indicator(20, 3, rng));
  const Vector c = vec({1, -0.5, -0.5});
  const double base = glm::t_statistic(fit, glm::Contrast(c));
  for (double lambda : {1e-3, 0.7, 3.0, 1e4}) {
    EXPECT_LE(rel_diff(glm::t_statistic(fit, glm::Contrast(lambda * c)), base), 1e-12);
  }
}

TEST(TStatistic, Errors) {
  expect_code([] { glm::Contrast(vec({0, 0})); }, ErrorCode::ZeroVector);
  expect_code([] { glm::t_statistic(fit_with(vec({1, 0}), Matrix::Zero(2, 2)), glm::Contrast(vec({1, -1}))); },
              ErrorCode::DegenerateVariance);
}

TEST(TPvalue, CenterAndSymmetry) {
  for (int df : {1, 3, 30}) EXPECT_DOUBLE_EQ(glm::t_pvalue(0.0, df), 1.0);
  for (double t : {0.3, 1.7, 4.2}) EXPECT_DOUBLE_EQ(glm::t_pvalue(t, 7), glm::t_pvalue(-t, 7));
}

TEST(TPvalue, MatchesQuadratureOracle) {
  const double ref = oracle::student_t_two_sided(2.0, 10);
  EXPECT_NEAR(ref, 0.07338803477074, 1e-9);
  EXPECT_NEAR(glm::t_pvalue(2.0, 10), ref, 1e-9);
  for (double t : {0.5, 1.0, 3.0, 6.0}) {
    for (int df : {1, 4, 25}) EXPECT_NEAR(glm::t_pvalue(t, df), oracle::student_t_two_sided(t, df), 1e-8);
  }
}

TEST(TPvalue, MonotoneInMagnitude) {
  double prev = 1.0;
  for (double t = 0.1; t < 20.0; t += 0.1) {
    const double p = glm::t_pvalue(t, 12);
    EXPECT_LT(p, prev);
    EXPECT_GT(p, 0.0);
    prev = p;
  }
}

TEST(TPvalue, InvalidDf) {
  expect_code([] { glm::t_pvalue(1.0, 0); }, ErrorCode::InvalidDf);
}
