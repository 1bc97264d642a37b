#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "dualstat/glm.hpp"
#include "dualstat/rng.hpp"
#include "dualstat/types.hpp"
#include "dualstat/voxelwise.hpp"

// Synthetic two-group data. Rows alternate between the classes (row 0 in
// class 1), observations are y = effect * X_k + v with v ~ N(0, Sigma) and
// ||Sigma||_2 = 1, and the design is [X_k, not X_k].
//
// DG2 additionally flips each design row with probability t. Observations
// follow the flipped (observed) indicator by default; ObservationSource::truth
// generates them from the clean indicator instead.

namespace dualstat::datagen {

enum class CovarianceMode { identity, random_spd };
enum class ObservationSource { observed, truth };

inline CovarianceMode parse_covariance_mode(std::string_view s) {
  if (s == "identity") return CovarianceMode::identity;
  if (s == "random_spd") return CovarianceMode::random_spd;
  throw Error(ErrorCode::InvalidArgument, "unknown covariance mode '" + std::string(s) + "'");
}

inline ObservationSource parse_observation_source(std::string_view s) {
  if (s == "observed") return ObservationSource::observed;
  if (s == "truth") return ObservationSource::truth;
  throw Error(ErrorCode::InvalidArgument, "unknown observation source '" + std::string(s) + "'");
}

struct GeneratorOptions {
  CovarianceMode covariance = CovarianceMode::identity;
  ObservationSource source = ObservationSource::observed;
  double effect = 1.0;       // expected class-1 minus class-2 mean
  double noise_scale = 1.0;  // 0 gives noise-free data
};

struct SyntheticDataset {
  Vector y;
  DesignMatrix X;
  DesignMatrix X_true;
  std::vector<bool> flip_mask;
  std::uint64_t seed = 0;
};

// Stream indices under the dataset seed.
inline constexpr std::uint64_t kNoiseStream = 1;
inline constexpr std::uint64_t kFlipStream = 2;
inline constexpr std::uint64_t kCovarianceStream = 3;

/// Noise covariance with unit spectral norm. random_spd draws A with
/// Gaussian entries and rescales A A^T / N + 0.1 I by its largest eigenvalue.
inline glm::NoiseCov make_covariance(int N, CovarianceMode mode, std::uint64_t seed) {
  require(N >= 1, ErrorCode::InvalidN, "N must be >= 1, got " + std::to_string(N));
  if (mode == CovarianceMode::identity) return glm::NoiseCov::identity(N);

  Rng rng = make_rng(seed, kCovarianceStream);
  std::normal_distribution<double> normal;
  Matrix A(N, N);
  for (Eigen::Index c = 0; c < N; ++c)
    for (Eigen::Index r = 0; r < N; ++r) A(r, c) = normal(rng);
  Matrix S = A * A.transpose() / static_cast<double>(N);
  S.diagonal().array() += 0.1;
  S = (0.5 * (S + S.transpose())).eval();
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(S, Eigen::EigenvaluesOnly);
  S /= eig.eigenvalues().maxCoeff();
  return glm::NoiseCov(std::move(S));
}

namespace detail {

inline Vector draw_noise(int N, std::uint64_t seed, const GeneratorOptions& opts) {
  Rng rng = make_rng(seed, kNoiseStream);
  std::normal_distribution<double> normal;
  Vector z(N);
  for (int i = 0; i < N; ++i) z(i) = normal(rng);
  if (opts.covariance == CovarianceMode::random_spd) {
    const auto cov = make_covariance(N, opts.covariance, seed);
    z = cov.cholesky().matrixL() * z;
  }
  return opts.noise_scale * z;
}

inline Matrix alternating_indicator(int N) {
  Matrix X = Matrix::Zero(N, 2);
  for (int i = 0; i < N; ++i) X(i, i % 2 == 0 ? 0 : 1) = 1.0;
  return X;
}

inline void check_n(int N) {
  require(N >= 2 && N % 2 == 0, ErrorCode::InvalidN,
          "N must be even and >= 2, got " + std::to_string(N));
}

}  // namespace detail

inline SyntheticDataset generate_dg1(int N, std::uint64_t seed, const GeneratorOptions& opts = {}) {
  detail::check_n(N);
  const Matrix X = detail::alternating_indicator(N);
  const Vector y = opts.effect * X.col(0) + detail::draw_noise(N, seed, opts);
  return SyntheticDataset{y, DesignMatrix::indicator(X), DesignMatrix::indicator(X),
                          std::vector<bool>(static_cast<std::size_t>(N), false), seed};
}

inline SyntheticDataset generate_dg2(int N, double t, std::uint64_t seed,
                                     const GeneratorOptions& opts = {}) {
  detail::check_n(N);
  require(t >= 0.0 && t <= 1.0, ErrorCode::InvalidProbability,
          "t must lie in [0, 1], got " + std::to_string(t));
  const Matrix truth = detail::alternating_indicator(N);
  Matrix observed = truth;
  std::vector<bool> flips(static_cast<std::size_t>(N), false);
  Rng rng = make_rng(seed, kFlipStream);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  for (int i = 0; i < N; ++i) {
    if (uniform(rng) < t) {
      observed.row(i) = truth.row(i).reverse();
      flips[static_cast<std::size_t>(i)] = true;
    }
  }
  const Matrix& source = opts.source == ObservationSource::observed ? observed : truth;
  const Vector y = opts.effect * source.col(0) + detail::draw_noise(N, seed, opts);
  return SyntheticDataset{y, DesignMatrix::indicator(observed), DesignMatrix::indicator(truth),
                          std::move(flips), seed};
}

struct EffectVolumes {
  std::vector<voxelwise::Volume> volumes;  // one per subject
  Vector labels;                           // +1 / -1, alternating from subject 0
  std::vector<std::uint8_t> effect_mask;   // 1 inside the injected block
};

/// Subject volumes of i.i.d. N(0, 1) voxels; subjects labelled +1 get `effect`
/// added inside the cube [origin, origin + block) on every axis. Subject s
/// draws from stream s of `seed`.
inline EffectVolumes generate_effect_volumes(const voxelwise::Dims& dims, int subjects,
                                             const std::array<int, 3>& origin, int block,
                                             double effect, std::uint64_t seed) {
  detail::check_n(subjects);
  require(block >= 0 && origin[0] >= 0 && origin[1] >= 0 && origin[2] >= 0 &&
              origin[0] + block <= dims.nx && origin[1] + block <= dims.ny &&
              origin[2] + block <= dims.nz,
          ErrorCode::DimsMismatch, "effect block does not fit inside " + voxelwise::to_string(dims));
  EffectVolumes out;
  out.effect_mask.assign(dims.count(), 0);
  for (int z = origin[2]; z < origin[2] + block; ++z)
    for (int y = origin[1]; y < origin[1] + block; ++y)
      for (int x = origin[0]; x < origin[0] + block; ++x) out.effect_mask[dims.index(x, y, z)] = 1;

  out.labels.resize(subjects);
  std::normal_distribution<double> normal;
  for (int s = 0; s < subjects; ++s) {
    const double label = s % 2 == 0 ? 1.0 : -1.0;
    out.labels(s) = label;
    Rng rng = make_rng(seed, static_cast<std::uint64_t>(s));
    std::vector<double> voxels(dims.count());
    for (std::size_t v = 0; v < voxels.size(); ++v) {
      voxels[v] = normal(rng) + (label > 0 && out.effect_mask[v] ? effect : 0.0);
    }
    out.volumes.emplace_back(dims, std::move(voxels));
  }
  return out;
}

}  // namespace dualstat::datagen
