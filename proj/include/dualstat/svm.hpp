#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <type_traits>
#include <vector>

#include "dualstat/types.hpp"

// Soft-margin support vector machine trained by sequential minimal
// optimization on the dual:
//
//   min_a  1/2 a^T Q a - sum(a),  Q_ij = l_i l_j K(y_i, y_j)
//   s.t.   0 <= a_i <= C,  sum_i l_i a_i = 0
//
// Each step picks the maximal violating pair (second-order choice for the
// partner) and solves the two-variable subproblem analytically.

namespace dualstat::svm {

/// +1 / -1 class coding of N samples.
class BinaryLabels {
 public:
  explicit BinaryLabels(Vector values) : values_(std::move(values)) {
    for (Eigen::Index i = 0; i < values_.size(); ++i) {
      if (values_(i) != 1.0 && values_(i) != -1.0) {
        throw Error(ErrorCode::NotBinary, "label at row " + std::to_string(i) + " is not +/-1");
      }
    }
  }

  const Vector& values() const noexcept { return values_; }
  Eigen::Index size() const noexcept { return values_.size(); }
  double operator[](Eigen::Index i) const { return values_(i); }

  bool has_both_classes() const noexcept {
    return values_.size() > 0 && values_.maxCoeff() > 0.0 && values_.minCoeff() < 0.0;
  }

  BinaryLabels flipped() const { return BinaryLabels(-values_); }

 private:
  Vector values_;
};

/// Row (1, 0) codes +1 and row (0, 1) codes -1.
inline BinaryLabels labels_from_indicator(const DesignMatrix& X) {
  require(X.is_indicator(), ErrorCode::NotIndicator, "labels need a one-hot design");
  require(X.cols() == 2, ErrorCode::NotBinary,
          "binary labels need exactly 2 classes, got " + std::to_string(X.cols()));
  Vector values(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) values(i) = X.class_of(i) == 0 ? 1.0 : -1.0;
  return BinaryLabels(std::move(values));
}

struct SvmOptions {
  double C = 1.0;
  double tol = 1e-3;
  /// Iteration budget in units of N pair updates.
  int max_passes = 1000;
  /// Record the dual objective after every pair update.
  bool record_trace = false;
};

struct LinearKernel {
  template <typename A, typename B>
  double operator()(const A& a, const B& b) const {
    return a.dot(b);
  }
};

struct DualSolution {
  Vector alphas;
  Vector gradient;  // Q a - 1
  double bias = 0.0;
  bool converged = false;
  long iterations = 0;
  std::vector<double> objective_trace;  // dual objective, maximization form
};

/// Dual solver over an arbitrary inner product. Rows of `samples` are the
/// training points. Kernel rows are recomputed on demand; the linear kernel
/// does this with a direct dot product over contiguous columns.
template <typename Kernel>
DualSolution solve_dual(const Matrix& samples, const Vector& labels, const SvmOptions& opts,
                        Kernel kernel) {
  constexpr double kTau = 1e-12;
  constexpr bool kLinear = std::is_same_v<Kernel, LinearKernel>;
  const Eigen::Index n = samples.rows();
  const Eigen::Index dim = samples.cols();
  const double C = opts.C;
  const Matrix points = samples.transpose();  // column per sample
  const double* pts = points.data();

  auto k = [&](Eigen::Index s, Eigen::Index t) {
    if constexpr (kLinear) {
      const double* a = pts + s * dim;
      const double* b = pts + t * dim;
      double acc = 0.0;
      for (Eigen::Index d = 0; d < dim; ++d) acc += a[d] * b[d];
      return acc;
    } else {
      return kernel(points.col(s), points.col(t));
    }
  };

  DualSolution sol;
  sol.alphas = Vector::Zero(n);
  double* alpha = sol.alphas.data();
  const double* y = labels.data();

  // yg = -y .* G with G = Q a - 1 the dual gradient; up/low flag the index
  // sets I_up and I_low, which change only at the two updated indices.
  std::vector<double> yg(labels.data(), labels.data() + n);
  std::vector<char> up(static_cast<std::size_t>(n)), low(static_cast<std::size_t>(n));

  std::vector<double> kdiag(static_cast<std::size_t>(n)), ki(static_cast<std::size_t>(n)),
      kj(static_cast<std::size_t>(n));
  for (Eigen::Index t = 0; t < n; ++t) kdiag[t] = k(t, t);

  auto refresh = [&](Eigen::Index t) {
    up[t] = y[t] > 0 ? alpha[t] < C : alpha[t] > 0.0;
    low[t] = y[t] > 0 ? alpha[t] > 0.0 : alpha[t] < C;
  };
  for (Eigen::Index t = 0; t < n; ++t) refresh(t);

  double objective = 0.0;  // 1/2 a^T Q a - sum(a)
  if (opts.record_trace) sol.objective_trace.push_back(-objective);

  const long max_iter =
      static_cast<long>(std::max(opts.max_passes, 1)) * std::max<long>(static_cast<long>(n), 1);

  for (;;) {
    Eigen::Index i = -1;
    double gmax = -std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < n; ++t) {
      if (up[t] && yg[t] >= gmax) {
        gmax = yg[t];
        i = t;
      }
    }
    if (i < 0) {
      sol.converged = true;
      break;
    }

    if constexpr (!kLinear) {
      for (Eigen::Index t = 0; t < n; ++t) ki[t] = k(i, t);
    }
    auto k_i = [&](Eigen::Index t) {
      if constexpr (kLinear) {
        return k(i, t);
      } else {
        return ki[t];
      }
    };

    Eigen::Index j = -1;
    double gmin = std::numeric_limits<double>::infinity();
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < n; ++t) {
      if (!low[t]) continue;
      const double v = yg[t];
      gmin = std::min(gmin, v);
      const double b = gmax - v;
      if (b > 0.0) {
        double a = kdiag[i] + kdiag[t] - 2.0 * k_i(t);
        if (a <= 0.0) a = kTau;
        const double score = -(b * b) / a;
        if (score <= best) {
          best = score;
          j = t;
        }
      }
    }
    if (gmax - gmin < opts.tol || j < 0) {
      sol.converged = true;
      break;
    }
    if (sol.iterations >= max_iter) break;
    ++sol.iterations;

    const double yi = y[i], yj = y[j];
    const double qij = yi * yj * k_i(j);
    const double old_i = alpha[i], old_j = alpha[j];
    const double Gi = -yi * yg[i], Gj = -yj * yg[j];

    if (yi != yj) {
      double quad = kdiag[i] + kdiag[j] + 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (-Gi - Gj) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0.0) {
        if (alpha[j] < 0.0) {
          alpha[j] = 0.0;
          alpha[i] = diff;
        }
      } else if (alpha[i] < 0.0) {
        alpha[i] = 0.0;
        alpha[j] = -diff;
      }
      if (diff > 0.0) {
        if (alpha[i] > C) {
          alpha[i] = C;
          alpha[j] = C - diff;
        }
      } else if (alpha[j] > C) {
        alpha[j] = C;
        alpha[i] = C + diff;
      }
    } else {
      double quad = kdiag[i] + kdiag[j] - 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (Gi - Gj) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > C) {
        if (alpha[i] > C) {
          alpha[i] = C;
          alpha[j] = sum - C;
        }
      } else if (alpha[j] < 0.0) {
        alpha[j] = 0.0;
        alpha[i] = sum;
      }
      if (sum > C) {
        if (alpha[j] > C) {
          alpha[j] = C;
          alpha[i] = sum - C;
        }
      } else if (alpha[i] < 0.0) {
        alpha[i] = 0.0;
        alpha[j] = sum;
      }
    }

    const double di = alpha[i] - old_i;
    const double dj = alpha[j] - old_j;
    objective += Gi * di + Gj * dj + 0.5 * (kdiag[i] * di * di + kdiag[j] * dj * dj) +
                 qij * di * dj;

    const double si = yi * di, sj = yj * dj;
    if constexpr (kLinear) {
      if (dim == 1) {
        const double step = si * pts[i] + sj * pts[j];
        for (Eigen::Index t = 0; t < n; ++t) yg[t] -= pts[t] * step;
      } else {
        for (Eigen::Index t = 0; t < n; ++t) yg[t] -= si * k(i, t) + sj * k(j, t);
      }
    } else {
      for (Eigen::Index t = 0; t < n; ++t) kj[t] = k(j, t);
      for (Eigen::Index t = 0; t < n; ++t) yg[t] -= si * ki[t] + sj * kj[t];
    }
    refresh(i);
    refresh(j);
    if (opts.record_trace) sol.objective_trace.push_back(-objective);
  }

  sol.gradient.resize(n);
  for (Eigen::Index t = 0; t < n; ++t) sol.gradient(t) = -y[t] * yg[t];

  // Threshold: mean of l_i - f_i over free vectors, otherwise the midpoint of
  // the feasible interval.
  double free_sum = 0.0;
  long free_count = 0;
  for (Eigen::Index t = 0; t < n; ++t) {
    if (alpha[t] > 0.0 && alpha[t] < C) {
      free_sum += yg[t];
      ++free_count;
    }
  }
  if (free_count > 0) {
    sol.bias = free_sum / static_cast<double>(free_count);
  } else {
    double hi = -std::numeric_limits<double>::infinity();
    double lo = std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < n; ++t) {
      if (up[t]) hi = std::max(hi, yg[t]);
      if (low[t]) lo = std::min(lo, yg[t]);
    }
    if (std::isfinite(hi) && std::isfinite(lo)) {
      sol.bias = 0.5 * (hi + lo);
    } else {
      sol.bias = std::isfinite(hi) ? hi : (std::isfinite(lo) ? lo : 0.0);
    }
  }
  return sol;
}

struct SvmModel {
  Vector w;
  double w0 = 0.0;
  Vector alphas;
  double C = 1.0;
  std::vector<Eigen::Index> support_indices;
  bool converged = false;  // false: iteration budget exhausted, best iterate kept
  long iterations = 0;
  std::vector<double> objective_trace;
};

inline SvmModel train_linear_svm(const Matrix& Y, const BinaryLabels& labels,
                                 const SvmOptions& opts = {}) {
  require(Y.rows() == labels.size(), ErrorCode::DimensionMismatch,
          "Y has " + std::to_string(Y.rows()) + " rows for " + std::to_string(labels.size()) +
              " labels");
  require(labels.has_both_classes(), ErrorCode::OneClass, "training needs both label signs");
  require(opts.C > 0.0, ErrorCode::InvalidArgument, "C must be positive");
  require(opts.tol > 0.0, ErrorCode::InvalidArgument, "tol must be positive");

  // The dual is unchanged by a global label flip. Solving it in the
  // orientation where the first label is +1 makes flipped problems follow the
  // same iterates, so their solutions are exact negatives.
  const bool flip = labels[0] < 0.0;
  DualSolution sol = solve_dual(Y, flip ? Vector(-labels.values()) : labels.values(), opts,
                                LinearKernel{});
  if (flip) sol.bias = -sol.bias;

  SvmModel model;
  model.w = Y.transpose() * (sol.alphas.array() * labels.values().array()).matrix();
  model.w0 = sol.bias;
  model.C = opts.C;
  model.converged = sol.converged;
  model.iterations = sol.iterations;
  model.objective_trace = std::move(sol.objective_trace);
  for (Eigen::Index i = 0; i < sol.alphas.size(); ++i) {
    if (sol.alphas(i) > 0.0) model.support_indices.push_back(i);
  }
  model.alphas = std::move(sol.alphas);
  return model;
}

/// f(y) = w^T y + w0.
inline double decision(const SvmModel& model, const Vector& y) {
  require(y.size() == model.w.size(), ErrorCode::DimensionMismatch,
          "point has " + std::to_string(y.size()) + " features, model has " +
              std::to_string(model.w.size()));
  return model.w.dot(y) + model.w0;
}

/// Two-class row form (w, -w) of a scalar machine: the second class is the
/// mirror solution of the first.
inline RowVector svm_row_parameters(const SvmModel& model) {
  require(model.w.size() == 1, ErrorCode::NotScalar,
          "row parameters need a single-feature model, got P=" + std::to_string(model.w.size()));
  RowVector row(2);
  row << model.w(0), -model.w(0);
  return row;
}

}  // namespace dualstat::svm
