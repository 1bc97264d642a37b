#pragma once

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <string>

#include "dualstat/types.hpp"

// General Linear Model y = X theta + e on the observation domain.

namespace dualstat::glm {

/// Relative pivot floor below which X^T C^-1 X is treated as singular.
inline constexpr double kRankTolerance = 1e-10;
/// Floor on c^T Cov(theta) c for the T statistic.
inline constexpr double kVarianceFloor = 1e-300;

/// Symmetric positive-definite noise covariance. The Cholesky factor is
/// computed once at construction and reused by every fit.
class NoiseCov {
 public:
  explicit NoiseCov(Matrix entries) : entries_(std::move(entries)) {
    require(entries_.rows() == entries_.cols() && entries_.rows() >= 1,
            ErrorCode::DimensionMismatch, "noise covariance must be square, got " + shape_of(entries_));
    const double scale = entries_.cwiseAbs().maxCoeff();
    const double asym = (entries_ - entries_.transpose()).cwiseAbs().maxCoeff();
    require(asym <= 1e-12 * scale, ErrorCode::NotSymmetric, "noise covariance is not symmetric");
    chol_.compute(entries_);
    require(chol_.info() == Eigen::Success && chol_.matrixLLT().diagonal().minCoeff() > 0.0,
            ErrorCode::NotPositiveDefinite, "noise covariance failed Cholesky factorization");
  }

  static NoiseCov identity(Eigen::Index n) { return NoiseCov(Matrix::Identity(n, n)); }

  const Matrix& entries() const noexcept { return entries_; }
  const Eigen::LLT<Matrix>& cholesky() const noexcept { return chol_; }
  Eigen::Index size() const noexcept { return entries_.rows(); }

 private:
  Matrix entries_;
  Eigen::LLT<Matrix> chol_;
};

struct GlmFit {
  Vector theta;
  Matrix cov_theta;
  Vector residuals;
  double rss = 0.0;
};

class Contrast {
 public:
  explicit Contrast(Vector weights) : weights_(std::move(weights)) {
    require(weights_.size() >= 1 && weights_.cwiseAbs().maxCoeff() > 0.0, ErrorCode::ZeroVector,
            "contrast needs at least one nonzero weight");
  }
  const Vector& weights() const noexcept { return weights_; }

 private:
  Vector weights_;
};

namespace detail {

// Solves (gram) theta = rhs through a Cholesky factorization, rejecting
// near-singular systems by their smallest pivot.
inline GlmFit solve_normal_equations(const Matrix& gram, const Vector& rhs, const Vector& y,
                                     const Matrix& X) {
  const double max_diag = gram.diagonal().maxCoeff();
  require(max_diag > 0.0, ErrorCode::RankDeficient, "design has no nonzero column");
  Eigen::LLT<Matrix> llt(gram);
  require(llt.info() == Eigen::Success, ErrorCode::RankDeficient, "normal matrix is not invertible");
  const Vector pivots = llt.matrixLLT().diagonal();
  require(pivots.cwiseAbs2().minCoeff() > kRankTolerance * max_diag, ErrorCode::RankDeficient,
          "design is not full column rank");

  GlmFit fit;
  fit.theta = llt.solve(rhs);
  fit.cov_theta = llt.solve(Matrix::Identity(gram.rows(), gram.cols()));
  fit.cov_theta = 0.5 * (fit.cov_theta + fit.cov_theta.transpose()).eval();
  fit.residuals = y - X * fit.theta;
  fit.rss = fit.residuals.squaredNorm();
  return fit;
}

inline void check_dims(const Vector& y, const DesignMatrix& X) {
  require(y.size() == X.rows(), ErrorCode::DimensionMismatch,
          "y has " + std::to_string(y.size()) + " rows but X is " + shape_of(X.entries()));
}

}  // namespace detail

/// Generalized least squares / ML estimate under Gaussian noise with
/// covariance C: theta = (X^T C^-1 X)^-1 X^T C^-1 y, Cov = (X^T C^-1 X)^-1.
inline GlmFit fit_glm_ml(const Vector& y, const DesignMatrix& X, const NoiseCov& C) {
  detail::check_dims(y, X);
  require(C.size() == X.rows(), ErrorCode::DimensionMismatch,
          "noise covariance is " + shape_of(C.entries()) + " for " + std::to_string(X.rows()) + " rows");
  const auto L = C.cholesky().matrixL();
  const Matrix Xw = L.solve(X.entries());
  const Vector yw = L.solve(y);
  return detail::solve_normal_equations(Xw.transpose() * Xw, Xw.transpose() * yw, y, X.entries());
}

/// Ordinary least squares; the ML estimate with C = I.
inline GlmFit fit_glm_ls(const Vector& y, const DesignMatrix& X) {
  detail::check_dims(y, X);
  const Matrix& Xe = X.entries();
  return detail::solve_normal_equations(Xe.transpose() * Xe, Xe.transpose() * y, y, Xe);
}

inline double residual_sum_squares(const Vector& y, const DesignMatrix& X, const Vector& theta) {
  detail::check_dims(y, X);
  require(theta.size() == X.cols(), ErrorCode::DimensionMismatch,
          "theta has " + std::to_string(theta.size()) + " entries for " + std::to_string(X.cols()) +
              " columns");
  return (y - X.entries() * theta).squaredNorm();
}

inline double t_statistic(const GlmFit& fit, const Contrast& c) {
  const Vector& w = c.weights();
  require(w.size() == fit.theta.size(), ErrorCode::DimensionMismatch, "contrast length mismatch");
  const double variance = w.dot(fit.cov_theta * w);
  require(variance > kVarianceFloor, ErrorCode::DegenerateVariance,
          "contrast variance is not positive");
  return w.dot(fit.theta) / std::sqrt(variance);
}

/// Two-sided Student-t tail probability P(|T_df| >= |t|).
inline double t_pvalue(double t, int df) {
  require(df >= 1, ErrorCode::InvalidDf, "degrees of freedom must be >= 1, got " + std::to_string(df));
  require(!std::isnan(t), ErrorCode::InvalidArgument, "t statistic is NaN");
  const boost::math::students_t dist(static_cast<double>(df));
  const double tail = boost::math::cdf(boost::math::complement(dist, std::fabs(t)));
  return std::min(1.0, 2.0 * tail);
}

/// Unbiased residual variance rss / (N - M) of an ordinary LS fit.
inline double residual_variance(const GlmFit& fit) {
  const auto dof = fit.residuals.size() - fit.theta.size();
  require(dof >= 1, ErrorCode::InvalidDf, "no residual degrees of freedom");
  return fit.rss / static_cast<double>(dof);
}

/// Copy of an LS fit whose covariance is scaled by the estimated noise
/// variance, i.e. the classical C = sigma^2 I plug-in.
inline GlmFit with_estimated_noise(GlmFit fit) {
  fit.cov_theta *= residual_variance(fit);
  return fit;
}

}  // namespace dualstat::glm
