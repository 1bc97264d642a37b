#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dualstat/estimators.hpp"
#include "dualstat/parallel.hpp"
#include "dualstat/rng.hpp"

// Residual-score test statistics and the permutation test around them.
// Smaller scores mean a better fit, so the p-value counts permutations whose
// score falls strictly below the original one. Accuracy-like statistics
// (larger is better) must be negated before use.

namespace dualstat::inference {

/// (x - Y w)^T (x - Y w).
inline double t_cv_statistic(const Vector& x, const Matrix& Y, const Vector& w) {
  require(Y.rows() == x.size() && Y.cols() == w.size(), ErrorCode::DimensionMismatch,
          "x has " + std::to_string(x.size()) + " rows, Y is " + shape_of(Y) + ", w has " +
              std::to_string(w.size()));
  return (x - Y * w).squaredNorm();
}

inline double residual_score(const Vector& x, const Matrix& Y, const LinearFit& fit) {
  require(Y.rows() == x.size(), ErrorCode::DimensionMismatch, "x and Y row counts differ");
  return (x - fit.predict(Y)).squaredNorm();
}

/// Vapnik structural-risk bound for linear classifiers (VC dimension P + 1):
/// sqrt((d (ln(2N/d) + 1) + ln(4/alpha)) / N).
inline double delta_bound(long N, long P, double alpha) {
  require(N >= 1, ErrorCode::InvalidN, "N must be >= 1, got " + std::to_string(N));
  require(P >= 0, ErrorCode::InvalidArgument, "P must be >= 0");
  require(alpha > 0.0 && alpha < 1.0, ErrorCode::InvalidAlpha,
          "alpha must lie in (0, 1), got " + std::to_string(alpha));
  const double d = static_cast<double>(P + 1);
  const double n = static_cast<double>(N);
  return std::sqrt((d * (std::log(2.0 * n / d) + 1.0) + std::log(4.0 / alpha)) / n);
}

class BoundParams {
 public:
  static BoundParams make(long N, long P, double alpha) {
    return BoundParams(N, P, alpha, delta_bound(N, P, alpha));
  }

  long N() const noexcept { return N_; }
  long P() const noexcept { return P_; }
  double alpha() const noexcept { return alpha_; }
  double delta() const noexcept { return delta_; }

 private:
  BoundParams(long N, long P, double alpha, double delta)
      : N_(N), P_(P), alpha_(alpha), delta_(delta) {}

  long N_;
  long P_;
  double alpha_;
  double delta_;
};

/// Resubstitution residual plus N * Delta; Delta is a per-sample risk, so it
/// is scaled to the sum-of-squares magnitude of the first term.
inline double t_res_statistic(const Vector& x, const Matrix& Y, const LinearFit& fit,
                              const BoundParams& bound) {
  require(bound.N() == Y.rows(), ErrorCode::DimensionMismatch,
          "bound was built for N=" + std::to_string(bound.N()) + " but Y has " +
              std::to_string(Y.rows()) + " rows");
  return residual_score(x, Y, fit) + static_cast<double>(bound.N()) * bound.delta();
}

inline double t_res_statistic(const Vector& x, const Matrix& Y, const Vector& w,
                              const BoundParams& bound) {
  return t_res_statistic(x, Y, LinearFit{w, 0.0}, bound);
}

/// Fold id in [0, K) for each of N samples: a seeded shuffle dealt round-robin,
/// so fold sizes differ by at most one.
inline std::vector<int> kfold_assignment(int N, int K, std::uint64_t seed) {
  require(K >= 2 && K <= N, ErrorCode::InvalidK,
          "K must satisfy 2 <= K <= N, got K=" + std::to_string(K) + " N=" + std::to_string(N));
  Rng rng = make_rng(seed, 0x6b666f6c64ULL);
  const std::vector<int> order = random_permutation(N, rng);
  std::vector<int> fold(static_cast<std::size_t>(N));
  for (int r = 0; r < N; ++r) fold[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])] = r % K;
  return fold;
}

namespace detail {

inline Matrix take_rows(const Matrix& m, const std::vector<Eigen::Index>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = m.row(rows[r]);
  return out;
}

inline Vector take_rows(const Vector& v, const std::vector<Eigen::Index>& rows) {
  Vector out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) out(static_cast<Eigen::Index>(r)) = v(rows[r]);
  return out;
}

// Calls visit(test_rows, predictions) for each held-out fold.
template <typename Visit>
void for_each_fold(const Matrix& Y, const Vector& x, const std::vector<int>& fold, int K,
                   const Estimator& fit, Visit&& visit) {
  std::vector<Eigen::Index> train, test;
  for (int k = 0; k < K; ++k) {
    train.clear();
    test.clear();
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      (fold[static_cast<std::size_t>(i)] == k ? test : train).push_back(i);
    }
    const LinearFit model = fit(take_rows(Y, train), take_rows(x, train));
    visit(test, model.predict(take_rows(Y, test)));
  }
}

}  // namespace detail

/// Sum of squared residuals on held-out samples, each fold predicted by a
/// model fit on the other K - 1 folds.
inline double cv_residual_score(const Matrix& Y, const Vector& x, int K, const Estimator& fit,
                                std::uint64_t seed) {
  require(Y.rows() == x.size(), ErrorCode::DimensionMismatch, "x and Y row counts differ");
  const auto fold = kfold_assignment(static_cast<int>(x.size()), K, seed);
  double total = 0.0;
  detail::for_each_fold(Y, x, fold, K, fit, [&](const auto& test, const Vector& pred) {
    for (std::size_t r = 0; r < test.size(); ++r) {
      const double e = x(test[r]) - pred(static_cast<Eigen::Index>(r));
      total += e * e;
    }
  });
  return total;
}

/// Pooled held-out misclassification rate; a decision value of exactly 0
/// predicts +1.
inline double kfold_cv_error(const Matrix& Y, const Vector& x, int K, const Estimator& fit,
                             std::uint64_t seed) {
  require(Y.rows() == x.size(), ErrorCode::DimensionMismatch, "x and Y row counts differ");
  const auto fold = kfold_assignment(static_cast<int>(x.size()), K, seed);
  long wrong = 0;
  try {
    detail::for_each_fold(Y, x, fold, K, fit, [&](const auto& test, const Vector& pred) {
      for (std::size_t r = 0; r < test.size(); ++r) {
        const double label = pred(static_cast<Eigen::Index>(r)) >= 0.0 ? 1.0 : -1.0;
        if (label != x(test[r])) ++wrong;
      }
    });
  } catch (const Error& e) {
    throw Error(ErrorCode::EstimatorFailure, std::string("cross-validation fit: ") + e.what());
  }
  return static_cast<double>(wrong) / static_cast<double>(x.size());
}

inline double resubstitution_error(const Matrix& Y, const Vector& x, const LinearFit& fit) {
  const Vector pred = fit.decision(Y);
  long wrong = 0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if ((pred(i) >= 0.0 ? 1.0 : -1.0) != x(i)) ++wrong;
  }
  return x.size() == 0 ? 0.0 : static_cast<double>(wrong) / static_cast<double>(x.size());
}

/// Worst-case accuracy max(0, 1 - (resub_error + Delta)), holding with
/// probability at least 1 - alpha.
inline double corrected_accuracy(double resub_error, const BoundParams& bound) {
  require(resub_error >= 0.0 && resub_error <= 1.0, ErrorCode::InvalidProbability,
          "resubstitution error must lie in [0, 1]");
  return std::max(0.0, 1.0 - (resub_error + bound.delta()));
}

using StatisticFn = std::function<double(const Matrix& Y, const Vector& x, const Estimator& fit)>;

/// Cross-validated residual score with a fixed fold partition.
inline StatisticFn cv_statistic(int K, std::uint64_t fold_seed) {
  return [K, fold_seed](const Matrix& Y, const Vector& x, const Estimator& fit) {
    return cv_residual_score(Y, x, K, fit, fold_seed);
  };
}

/// Resubstitution residual score plus the bound correction.
inline StatisticFn resubstitution_statistic(double bound_alpha) {
  return [bound_alpha](const Matrix& Y, const Vector& x, const Estimator& fit) {
    const auto bound = BoundParams::make(Y.rows(), Y.cols(), bound_alpha);
    return t_res_statistic(x, Y, fit(Y, x), bound);
  };
}

/// Two-group T for contrast [1, -1] with x coding group membership as +/-1,
/// using the pooled residual variance. A constant series yields 0.
inline double two_group_t(const Vector& y, const Vector& x) {
  const svm::BinaryLabels labels(x);
  Matrix indicator = Matrix::Zero(y.size(), 2);
  for (Eigen::Index i = 0; i < y.size(); ++i) indicator(i, labels[i] > 0 ? 0 : 1) = 1.0;
  Vector c(2);
  c << 1.0, -1.0;
  try {
    const auto fit = glm::fit_glm_ls(y, DesignMatrix::indicator(std::move(indicator)));
    return glm::t_statistic(glm::with_estimated_noise(fit), glm::Contrast(c));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::DegenerateVariance) return 0.0;
    throw;
  }
}

/// -|T| on the first column of Y, so that larger effects give smaller scores.
/// The estimator argument is ignored.
inline StatisticFn negated_abs_t_statistic() {
  return [](const Matrix& Y, const Vector& x, const Estimator&) {
    return -std::fabs(two_group_t(Y.col(0), x));
  };
}

struct TestOutcome {
  double statistic = 0.0;
  std::vector<double> null_values;
  double p_value = 1.0;
  int permutations = 0;
  std::uint64_t seed = 0;
  int count_below = 0;
};

/// p-value of card{T_perm < T} plus one over O plus one.
inline double permutation_pvalue(double statistic, const std::vector<double>& null_values) {
  const auto below = std::count_if(null_values.begin(), null_values.end(),
                                   [&](double v) { return v < statistic; });
  return static_cast<double>(below + 1) / static_cast<double>(null_values.size() + 1);
}

/// Permutation p-value of `stat` with the labels x reshuffled O times.
/// Permutation p uses its own stream derived from (seed, p), so the outcome is
/// identical for any thread count.
inline TestOutcome permutation_test(const Matrix& Y, const Vector& x, const Estimator& fit,
                                    const StatisticFn& stat, int O, std::uint64_t seed,
                                    int threads = 1) {
  require(O >= 1, ErrorCode::InvalidArgument, "need at least one permutation");
  require(Y.rows() == x.size(), ErrorCode::DimensionMismatch, "x and Y row counts differ");

  TestOutcome out;
  out.permutations = O;
  out.seed = seed;
  try {
    out.statistic = stat(Y, x, fit);
  } catch (const Error& e) {
    throw Error(ErrorCode::EstimatorFailure, std::string("original labels: ") + e.what());
  }

  out.null_values.assign(static_cast<std::size_t>(O), 0.0);
  const int n = static_cast<int>(x.size());
  parallel_for(static_cast<std::size_t>(O), threads, [&](std::size_t p) {
    Rng rng = make_rng(seed, p + 1);
    const auto perm = random_permutation(n, rng);
    Vector shuffled(n);
    for (int i = 0; i < n; ++i) shuffled(i) = x(perm[static_cast<std::size_t>(i)]);
    try {
      out.null_values[p] = stat(Y, shuffled, fit);
    } catch (const Error& e) {
      throw Error(ErrorCode::EstimatorFailure,
                  "permutation " + std::to_string(p + 1) + ": " + e.what());
    }
  });

  out.count_below = static_cast<int>(std::count_if(
      out.null_values.begin(), out.null_values.end(), [&](double v) { return v < out.statistic; }));
  out.p_value = static_cast<double>(out.count_below + 1) / static_cast<double>(O + 1);
  return out;
}

}  // namespace dualstat::inference
