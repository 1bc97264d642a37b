#pragma once

#include <string>

#include "dualstat/types.hpp"

// Conversion between label-domain parameters w (1 x M, single response) and
// observation-domain parameters theta (M x 1). With w w^T a positive scalar,
// theta = w^T (w w^T)^-1 and the map back is its mirror image, so the two
// are inverse to each other on nonzero vectors.

namespace dualstat::duality {

inline Vector theta_from_w(const RowVector& w) {
  const double norm2 = w.squaredNorm();
  require(norm2 > 0.0, ErrorCode::ZeroVector, "w must be nonzero");
  return w.transpose() / norm2;
}

/// theta theta^T is read as the scalar theta^T theta; the outer product
/// would be rank one and not invertible.
inline RowVector w_from_theta(const Vector& theta) {
  const double norm2 = theta.squaredNorm();
  require(norm2 > 0.0, ErrorCode::ZeroVector, "theta must be nonzero");
  return theta.transpose() / norm2;
}

struct DualPair {
  RowVector w;
  Vector theta;
  double norm_scalar;  // (w w^T)^-1

  static DualPair from_w(const RowVector& w) {
    return DualPair{w, theta_from_w(w), 1.0 / w.squaredNorm()};
  }
};

/// Per-class sums of the observations, (sum_{i in C_1} y_i, ..., sum_{i in C_M} y_i),
/// which for an indicator design is exactly X^T y.
inline Vector class_sums(const Vector& y, const DesignMatrix& X) {
  require(X.is_indicator(), ErrorCode::NotIndicator, "class sums need a one-hot design");
  require(y.size() == X.rows(), ErrorCode::DimensionMismatch, "y and X row counts differ");
  Vector sums = Vector::Zero(X.cols());
  for (Eigen::Index i = 0; i < y.size(); ++i) sums(X.class_of(i)) += y(i);
  return sums;
}

/// (sum_i y_i^2)^2 / sum_m (sum_{i in C_m} y_i)^2, which equals (w w^T)^-1 for
/// the least-squares w of the indicator regression X = y w.
inline double normalization_scalar(const Vector& y, const DesignMatrix& X) {
  const Vector sums = class_sums(y, X);
  const double denominator = sums.squaredNorm();
  require(denominator > 0.0, ErrorCode::DegenerateDenominator,
          "every class sum of y is zero");
  const double power = y.squaredNorm();
  return power * power / denominator;
}

/// y = (X - eps_LS) theta_from_w(w).
inline Vector reconstruct_observations(const DesignMatrix& X, const RowVector& w,
                                       const Matrix& eps_LS) {
  require(w.size() == X.cols(), ErrorCode::DimensionMismatch, "w length does not match X columns");
  require(eps_LS.rows() == X.rows() && eps_LS.cols() == X.cols(), ErrorCode::DimensionMismatch,
          "eps_LS is " + shape_of(eps_LS) + " but X is " + shape_of(X.entries()));
  const Vector theta = theta_from_w(w);
  return (X.entries() - eps_LS) * theta;
}

/// Observations regressed from +/-1 coded parameters, mapped back to {0, 1}:
/// (X w^T (w w^T)^-1 + 1) / 2.
inline Vector svm_regressed_observations(const DesignMatrix& X, const RowVector& w) {
  require(w.size() == X.cols(), ErrorCode::DimensionMismatch, "w length does not match X columns");
  const Vector theta = theta_from_w(w);
  return ((X.entries() * theta).array() + 1.0) / 2.0;
}

}  // namespace dualstat::duality
