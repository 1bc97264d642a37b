#pragma once

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "dualstat/dualstat.hpp"

namespace testing_util {

using dualstat::DesignMatrix;
using dualstat::Matrix;
using dualstat::Vector;

inline Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double e : v) out(i++) = e;
  return out;
}

inline Matrix alternating(int N) {
  Matrix X = Matrix::Zero(N, 2);
  for (int i = 0; i < N; ++i) X(i, i % 2) = 1.0;
  return X;
}

inline Vector gaussian(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = normal(rng);
  return v;
}

/// Random one-hot N x M design with every class present.
inline DesignMatrix random_indicator(int N, int M, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pick(0, M - 1);
  std::vector<int> classes(static_cast<std::size_t>(N));
  for (int i = 0; i < N; ++i) classes[static_cast<std::size_t>(i)] = i < M ? i : pick(rng);
  std::shuffle(classes.begin(), classes.end(), rng);
  return DesignMatrix::from_classes(classes, M);
}

inline double rel_diff(double a, double b) {
  return std::fabs(a - b) / std::max({1.0, std::fabs(a), std::fabs(b)});
}

inline double rel_diff(const Matrix& a, const Matrix& b) {
  return (a - b).norm() / std::max({1.0, a.norm(), b.norm()});
}

/// Runs f and checks it throws dualstat::Error with the given code.
template <typename F>
void expect_code(F&& f, dualstat::ErrorCode code) {
  try {
    f();
    ADD_FAILURE() << "expected " << dualstat::to_string(code) << ", nothing thrown";
  } catch (const dualstat::Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

}  // namespace testing_util
