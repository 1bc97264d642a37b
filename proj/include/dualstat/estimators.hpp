#pragma once

#include <functional>
#include <string>
#include <string_view>

#include "dualstat/duality.hpp"
#include "dualstat/glm.hpp"
#include "dualstat/lrm.hpp"
#include "dualstat/svm.hpp"

// Estimators of w in the single-response model x = Y w + b + e, where x holds
// +/-1 class codes. All of them return a LinearFit so the test statistics can
// treat them interchangeably.

namespace dualstat::inference {

enum class Output { regressed, clipped };

/// f(y) = w^T y + bias. A `clipped` fit reports f clamped to [-1, 1]: points
/// on or beyond their margin predict their code exactly and only margin
/// violations leave a residual.
struct LinearFit {
  Vector w;
  double bias = 0.0;
  Output output = Output::regressed;

  Vector decision(const Matrix& Y) const {
    require(Y.cols() == w.size(), ErrorCode::DimensionMismatch,
            "Y is " + shape_of(Y) + " for " + std::to_string(w.size()) + " weights");
    return (Y * w).array() + bias;
  }

  Vector predict(const Matrix& Y) const {
    Vector f = decision(Y);
    if (output == Output::clipped) f = f.cwiseMax(-1.0).cwiseMin(1.0);
    return f;
  }
};

using Estimator = std::function<LinearFit(const Matrix& Y, const Vector& x)>;

enum class EstimatorKind { glm, lrm, svm };

inline std::string_view to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::glm: return "glm";
    case EstimatorKind::lrm: return "lrm";
    case EstimatorKind::svm: return "svm";
  }
  return "?";
}

inline EstimatorKind parse_estimator(std::string_view name) {
  if (name == "glm") return EstimatorKind::glm;
  if (name == "lrm") return EstimatorKind::lrm;
  if (name == "svm") return EstimatorKind::svm;
  throw Error(ErrorCode::InvalidArgument, "unknown estimator '" + std::string(name) + "'");
}

/// Least-squares regression of x on the columns of Y (no intercept).
inline Estimator least_squares() {
  return [](const Matrix& Y, const Vector& x) {
    const Matrix column = x;
    const auto fit = lrm::fit_lrm(Y, DesignMatrix::general(column));
    return LinearFit{fit.W.col(0), 0.0};
  };
}

/// Runs `inner` on [Y, 1] and reports the last coefficient as the bias.
inline Estimator with_intercept(Estimator inner) {
  return [inner = std::move(inner)](const Matrix& Y, const Vector& x) {
    Matrix augmented(Y.rows(), Y.cols() + 1);
    augmented << Y, Vector::Ones(Y.rows());
    const LinearFit fit = inner(augmented, x);
    return LinearFit{fit.w.head(Y.cols()), fit.bias + fit.w(Y.cols()), fit.output};
  };
}

inline Estimator linear_svm(svm::SvmOptions opts = {}) {
  return [opts](const Matrix& Y, const Vector& x) {
    const auto model = svm::train_linear_svm(Y, svm::BinaryLabels(x), opts);
    return LinearFit{model.w, model.w0, Output::clipped};
  };
}

/// Fits the GLM on the observations (y on the class indicator of x) and maps
/// theta to the label domain with w = theta^T (theta^T theta)^-1. The +/-1
/// prediction is the difference of the two regressed indicator columns.
inline Estimator glm_dual() {
  return [](const Matrix& Y, const Vector& x) {
    require(Y.cols() == 1, ErrorCode::NotScalar, "the GLM dual estimator needs a single feature");
    const svm::BinaryLabels labels(x);
    Matrix indicator = Matrix::Zero(x.size(), 2);
    for (Eigen::Index i = 0; i < x.size(); ++i) indicator(i, labels[i] > 0 ? 0 : 1) = 1.0;
    const auto fit = glm::fit_glm_ls(Y.col(0), DesignMatrix::indicator(std::move(indicator)));
    const RowVector w = duality::w_from_theta(fit.theta);
    return LinearFit{Vector::Constant(1, w(0) - w(1)), 0.0};
  };
}

inline Estimator make_estimator(EstimatorKind kind, const svm::SvmOptions& svm_opts = {}) {
  switch (kind) {
    case EstimatorKind::glm: return glm_dual();
    case EstimatorKind::lrm: return with_intercept(least_squares());
    case EstimatorKind::svm: return linear_svm(svm_opts);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown estimator kind");
}

}  // namespace dualstat::inference
