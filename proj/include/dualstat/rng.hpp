#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

namespace dualstat {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; a bijective mixer over 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Seed of sub-stream `index` under `base`. Streams for different indices are
/// decorrelated, so work units can be scheduled in any order.
constexpr std::uint64_t stream_seed(std::uint64_t base, std::uint64_t index) noexcept {
  return mix64(base ^ mix64(index + 0x632BE59BD9B4E019ULL));
}

inline Rng make_rng(std::uint64_t base, std::uint64_t index) {
  return Rng(stream_seed(base, index));
}

inline std::vector<int> random_permutation(int n, Rng& rng) {
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  return perm;
}

}  // namespace dualstat
