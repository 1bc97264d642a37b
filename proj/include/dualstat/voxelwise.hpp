#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dualstat/glm.hpp"
#include "dualstat/inference.hpp"
#include "dualstat/parallel.hpp"
#include "dualstat/rng.hpp"
#include "dualstat/svm.hpp"

// Mass-univariate testing: one independent test per voxel on the across-subject
// series at that voxel, plus the threshold transport used to extend permutation
// results from a calibration region to the rest of the volume.

namespace dualstat::voxelwise {

struct Dims {
  int nx = 1, ny = 1, nz = 1;

  std::size_t count() const noexcept {
    return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) * static_cast<std::size_t>(nz);
  }
  /// Linear index with x varying fastest.
  std::size_t index(int x, int y, int z) const noexcept {
    return static_cast<std::size_t>(x) +
           static_cast<std::size_t>(nx) * (static_cast<std::size_t>(y) + static_cast<std::size_t>(ny) * static_cast<std::size_t>(z));
  }
  bool operator==(const Dims&) const = default;
};

inline std::string to_string(const Dims& d) {
  return std::to_string(d.nx) + "x" + std::to_string(d.ny) + "x" + std::to_string(d.nz);
}

class Volume {
 public:
  Volume(Dims dims, std::vector<double> voxels, std::optional<std::vector<std::uint8_t>> mask = {})
      : dims_(dims), voxels_(std::move(voxels)), mask_(std::move(mask)) {
    require(dims_.nx >= 1 && dims_.ny >= 1 && dims_.nz >= 1, ErrorCode::DimsMismatch,
            "volume dims must be positive, got " + to_string(dims_));
    require(voxels_.size() == dims_.count(), ErrorCode::DimsMismatch,
            "volume of dims " + to_string(dims_) + " needs " + std::to_string(dims_.count()) +
                " voxels, got " + std::to_string(voxels_.size()));
    require(!mask_ || mask_->size() == dims_.count(), ErrorCode::DimsMismatch,
            "mask size does not match volume dims " + to_string(dims_));
  }

  const Dims& dims() const noexcept { return dims_; }
  const std::vector<double>& voxels() const noexcept { return voxels_; }
  const std::optional<std::vector<std::uint8_t>>& mask() const noexcept { return mask_; }
  double operator[](std::size_t i) const { return voxels_[i]; }

 private:
  Dims dims_;
  std::vector<double> voxels_;
  std::optional<std::vector<std::uint8_t>> mask_;
};

/// Per-voxel results. Voxels outside the mask carry NaN statistics and are
/// never detected.
struct StatMap {
  Dims dims;
  std::vector<double> stat;
  std::optional<std::vector<double>> p;
  std::vector<std::uint8_t> detected;

  std::size_t detected_count() const {
    return static_cast<std::size_t>(std::count(detected.begin(), detected.end(), std::uint8_t{1}));
  }
};

enum class StatisticKind { T, T_CV, T_Res };

inline std::string_view to_string(StatisticKind kind) {
  switch (kind) {
    case StatisticKind::T: return "T";
    case StatisticKind::T_CV: return "T_CV";
    case StatisticKind::T_Res: return "T_Res";
  }
  return "?";
}

inline StatisticKind parse_statistic(std::string_view s) {
  if (s == "T") return StatisticKind::T;
  if (s == "T_CV") return StatisticKind::T_CV;
  if (s == "T_Res") return StatisticKind::T_Res;
  throw Error(ErrorCode::InvalidArgument, "unknown statistic '" + std::string(s) + "'");
}

struct VoxelTestConfig {
  StatisticKind statistic = StatisticKind::T_Res;
  inference::EstimatorKind estimator = inference::EstimatorKind::svm;
  int permutations = 0;  // 0: no permutation test
  double alpha = 0.05;   // per-voxel decision level
  int folds = 10;
  double bound_alpha = 0.05;
  svm::SvmOptions svm;
  int threads = 1;
  std::optional<std::vector<std::uint8_t>> mask;  // overrides the volumes' own mask
};

struct VoxelResult {
  double stat = std::numeric_limits<double>::quiet_NaN();
  std::optional<double> p;
};

/// Test at a single voxel given its across-subject series.
inline VoxelResult test_series(const Vector& series, const svm::BinaryLabels& labels,
                               const VoxelTestConfig& cfg, std::uint64_t voxel_seed) {
  const Matrix Y = series;
  const Vector& x = labels.values();
  VoxelResult out;

  if (cfg.statistic == StatisticKind::T) {
    out.stat = inference::two_group_t(series, x);
    if (cfg.permutations > 0) {
      out.p = inference::permutation_test(Y, x, inference::Estimator{},
                                          inference::negated_abs_t_statistic(), cfg.permutations,
                                          voxel_seed)
                  .p_value;
    } else {
      out.p = glm::t_pvalue(out.stat, static_cast<int>(series.size()) - 2);
    }
    return out;
  }

  const auto estimator = inference::make_estimator(cfg.estimator, cfg.svm);
  const inference::StatisticFn stat =
      cfg.statistic == StatisticKind::T_CV
          ? inference::cv_statistic(cfg.folds, stream_seed(voxel_seed, 0x666f6c64ULL))
          : inference::resubstitution_statistic(cfg.bound_alpha);
  if (cfg.permutations > 0) {
    const auto outcome =
        inference::permutation_test(Y, x, estimator, stat, cfg.permutations, voxel_seed);
    out.stat = outcome.statistic;
    out.p = outcome.p_value;
  } else {
    out.stat = stat(Y, x, estimator);
  }
  return out;
}

/// Runs the configured test at every in-mask voxel. Voxel v draws its
/// randomness from stream_seed(seed, v) only.
inline StatMap run_voxel_tests(std::span<const Volume> volumes, const svm::BinaryLabels& labels,
                               const VoxelTestConfig& cfg, std::uint64_t seed) {
  require(!volumes.empty(), ErrorCode::DimsMismatch, "no volumes given");
  require(static_cast<std::size_t>(labels.size()) == volumes.size(),
          ErrorCode::LabelCountMismatch,
          std::to_string(volumes.size()) + " volumes but " + std::to_string(labels.size()) +
              " labels");
  const Dims dims = volumes.front().dims();
  for (std::size_t s = 0; s < volumes.size(); ++s) {
    require(volumes[s].dims() == dims, ErrorCode::DimsMismatch,
            "volume " + std::to_string(s) + " has dims " + to_string(volumes[s].dims()) +
                ", expected " + to_string(dims));
  }
  const auto& mask = cfg.mask ? cfg.mask : volumes.front().mask();
  require(!mask || mask->size() == dims.count(), ErrorCode::DimsMismatch,
          "mask does not match volume dims " + to_string(dims));

  const std::size_t V = dims.count();
  const auto N = static_cast<Eigen::Index>(volumes.size());
  const bool has_p = cfg.statistic == StatisticKind::T || cfg.permutations > 0;

  StatMap map;
  map.dims = dims;
  map.stat.assign(V, std::numeric_limits<double>::quiet_NaN());
  map.detected.assign(V, 0);
  if (has_p) map.p.emplace(V, std::numeric_limits<double>::quiet_NaN());

  parallel_for(V, cfg.threads, [&](std::size_t v) {
    if (mask && (*mask)[v] == 0) return;
    Vector series(N);
    for (Eigen::Index s = 0; s < N; ++s) series(s) = volumes[static_cast<std::size_t>(s)][v];
    VoxelResult r;
    try {
      r = test_series(series, labels, cfg, stream_seed(seed, v));
    } catch (const Error& e) {
      throw Error(e.code(), "voxel " + std::to_string(v) + ": " + e.message());
    }
    map.stat[v] = r.stat;
    if (has_p && r.p) {
      (*map.p)[v] = *r.p;
      map.detected[v] = *r.p <= cfg.alpha ? 1 : 0;
    }
  });
  return map;
}

/// Threshold whose empirical p-value matches alpha: the largest statistic
/// among voxels with p <= alpha (smaller statistics are stronger evidence).
/// When no voxel qualifies, returns one ulp below the smallest statistic so
/// that a strict `less` threshold detects nothing.
inline double calibrate_threshold(std::span<const double> region_stats,
                                  std::span<const double> region_pvalues, double alpha) {
  require(!region_stats.empty(), ErrorCode::EmptyRegion, "calibration region is empty");
  require(region_stats.size() == region_pvalues.size(), ErrorCode::DimensionMismatch,
          "statistics and p-values differ in length");
  double best = -std::numeric_limits<double>::infinity();
  bool any = false;
  double smallest = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < region_stats.size(); ++i) {
    if (std::isnan(region_stats[i])) continue;
    smallest = std::min(smallest, region_stats[i]);
    if (region_pvalues[i] <= alpha) {
      best = std::max(best, region_stats[i]);
      any = true;
    }
  }
  require(std::isfinite(smallest), ErrorCode::EmptyRegion, "calibration region has no valid voxel");
  if (any) return best;
  return std::nextafter(smallest, -std::numeric_limits<double>::infinity());
}

enum class Direction { less, greater };

inline Direction parse_direction(std::string_view s) {
  if (s == "less") return Direction::less;
  if (s == "greater") return Direction::greater;
  throw Error(ErrorCode::InvalidArgument, "unknown direction '" + std::string(s) + "'");
}

/// Detection by strict comparison against T_th; ties are not detected.
inline StatMap threshold_map(StatMap map, double threshold, Direction direction) {
  for (std::size_t v = 0; v < map.stat.size(); ++v) {
    const double s = map.stat[v];
    const bool hit = direction == Direction::less ? s < threshold : s > threshold;
    map.detected[v] = hit ? 1 : 0;
  }
  return map;
}

}  // namespace dualstat::voxelwise
