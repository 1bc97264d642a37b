#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dualstat/error.hpp"

namespace dualstat {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

inline std::string shape_of(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

/// N x M matrix of explanatory variables. An indicator design has one-hot
/// rows (each row a single 1, rest 0) and encodes class membership.
class DesignMatrix {
 public:
  enum class Kind { indicator, general };

  static DesignMatrix general(Matrix entries) {
    check_shape(entries);
    return DesignMatrix(std::move(entries), Kind::general);
  }

  static DesignMatrix indicator(Matrix entries) {
    check_shape(entries);
    for (Eigen::Index i = 0; i < entries.rows(); ++i) {
      int ones = 0;
      for (Eigen::Index m = 0; m < entries.cols(); ++m) {
        const double v = entries(i, m);
        if (v == 1.0) {
          ++ones;
        } else if (v != 0.0) {
          throw Error(ErrorCode::NotIndicator,
                      "row " + std::to_string(i) + " has entry outside {0,1}");
        }
      }
      if (ones != 1) throw Error(ErrorCode::NotIndicator, "row " + std::to_string(i) + " is not one-hot");
    }
    return DesignMatrix(std::move(entries), Kind::indicator);
  }

  /// Builds a one-hot design from zero-based class indices.
  static DesignMatrix from_classes(std::span<const int> classes, int num_classes) {
    require(num_classes >= 1, ErrorCode::InvalidArgument, "need at least one class");
    Matrix entries = Matrix::Zero(static_cast<Eigen::Index>(classes.size()), num_classes);
    for (std::size_t i = 0; i < classes.size(); ++i) {
      if (classes[i] < 0 || classes[i] >= num_classes) {
        throw Error(ErrorCode::NotIndicator, "class index out of range at row " + std::to_string(i));
      }
      entries(static_cast<Eigen::Index>(i), classes[i]) = 1.0;
    }
    return indicator(std::move(entries));
  }

  const Matrix& entries() const noexcept { return entries_; }
  Kind kind() const noexcept { return kind_; }
  bool is_indicator() const noexcept { return kind_ == Kind::indicator; }
  Eigen::Index rows() const noexcept { return entries_.rows(); }
  Eigen::Index cols() const noexcept { return entries_.cols(); }

  /// Zero-based class of row i; only meaningful for indicator designs.
  int class_of(Eigen::Index i) const {
    require(is_indicator(), ErrorCode::NotIndicator, "design is not an indicator matrix");
    Eigen::Index m = 0;
    entries_.row(i).maxCoeff(&m);
    return static_cast<int>(m);
  }

  std::vector<int> classes() const {
    std::vector<int> out(static_cast<std::size_t>(rows()));
    for (Eigen::Index i = 0; i < rows(); ++i) out[static_cast<std::size_t>(i)] = class_of(i);
    return out;
  }

 private:
  DesignMatrix(Matrix entries, Kind kind) : entries_(std::move(entries)), kind_(kind) {}

  static void check_shape(const Matrix& entries) {
    require(entries.cols() >= 1 && entries.rows() >= entries.cols(), ErrorCode::DimensionMismatch,
            "design must satisfy N >= M >= 1, got " + shape_of(entries));
  }

  Matrix entries_;
  Kind kind_;
};

}  // namespace dualstat
