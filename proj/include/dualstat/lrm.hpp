#pragma once

#include <string>
#include <vector>

#include "dualstat/glm.hpp"
#include "dualstat/types.hpp"

// Linear regression of an indicator matrix: X = Y W on the label domain.

namespace dualstat::lrm {

struct LrmFit {
  Matrix W;      // P x M
  Matrix X_hat;  // N x M regressed labels
  Matrix eps_LS; // N x M, X - X_hat
};

namespace detail {

inline Eigen::LLT<Matrix> factor_gram(const Matrix& Y) {
  const Matrix gram = Y.transpose() * Y;
  const double max_diag = gram.diagonal().maxCoeff();
  require(max_diag > 0.0, ErrorCode::RankDeficient, "observations are identically zero");
  Eigen::LLT<Matrix> llt(gram);
  require(llt.info() == Eigen::Success &&
              llt.matrixLLT().diagonal().cwiseAbs2().minCoeff() > glm::kRankTolerance * max_diag,
          ErrorCode::RankDeficient, "Y^T Y is singular");
  return llt;
}

inline void check_rows(const Matrix& Y, const DesignMatrix& X) {
  require(Y.rows() == X.rows() && Y.cols() >= 1, ErrorCode::DimensionMismatch,
          "Y is " + shape_of(Y) + " but X is " + shape_of(X.entries()));
  require(Y.rows() >= Y.cols(), ErrorCode::RankDeficient, "fewer observations than features");
}

}  // namespace detail

/// W = (Y^T Y)^-1 Y^T X. No intercept is added; augment Y with a ones
/// column to get one.
inline LrmFit fit_lrm(const Matrix& Y, const DesignMatrix& X) {
  detail::check_rows(Y, X);
  const auto llt = detail::factor_gram(Y);
  LrmFit fit;
  fit.W = llt.solve(Y.transpose() * X.entries());
  fit.X_hat = Y * fit.W;
  fit.eps_LS = X.entries() - fit.X_hat;
  return fit;
}

/// Regressed labels Y W. Entries are not clipped to [0, 1].
inline Matrix predict_labels(const Matrix& Y, const Matrix& W) {
  require(Y.cols() == W.rows(), ErrorCode::DimensionMismatch,
          "Y is " + shape_of(Y) + " but W is " + shape_of(W));
  return Y * W;
}

/// Row-wise argmax; ties go to the lowest column index.
inline std::vector<int> classify_rows(const Matrix& X_hat) {
  std::vector<int> out(static_cast<std::size_t>(X_hat.rows()), 0);
  for (Eigen::Index i = 0; i < X_hat.rows(); ++i) {
    int best = 0;
    for (Eigen::Index m = 1; m < X_hat.cols(); ++m) {
      if (X_hat(i, m) > X_hat(i, best)) best = static_cast<int>(m);
    }
    out[static_cast<std::size_t>(i)] = best;
  }
  return out;
}

inline double empirical_error(const std::vector<int>& predicted, const DesignMatrix& truth) {
  require(truth.is_indicator(), ErrorCode::NotIndicator, "truth must be one-hot");
  require(static_cast<Eigen::Index>(predicted.size()) == truth.rows(), ErrorCode::DimensionMismatch,
          "predicted has " + std::to_string(predicted.size()) + " rows, truth has " +
              std::to_string(truth.rows()));
  if (predicted.empty()) return 0.0;
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i] != truth.class_of(static_cast<Eigen::Index>(i))) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(predicted.size());
}

/// Solves the M column problems min ||x_m - Y w_m||^2 one at a time through
/// a Householder QR of Y; agrees with fit_lrm(Y, X).W.
inline Matrix fit_multiclass(const Matrix& Y, const DesignMatrix& X) {
  detail::check_rows(Y, X);
  detail::factor_gram(Y);  // same singularity rule as fit_lrm
  const Eigen::HouseholderQR<Matrix> qr(Y);
  Matrix W(Y.cols(), X.cols());
  for (Eigen::Index m = 0; m < X.cols(); ++m) {
    const Vector column = X.entries().col(m);
    W.col(m) = qr.solve(column);
  }
  return W;
}

}  // namespace dualstat::lrm
