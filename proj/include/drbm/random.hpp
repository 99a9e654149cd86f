#pragma once

#include <cstdint>
#include <random>

namespace drbm {

using Rng = std::mt19937_64;

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed of stream (lane, index) under a root seed.
///
/// seed = splitmix64(splitmix64(root ^ splitmix64(lane + 1)) + index). Lanes
/// separate schedule points or experiment stages; indices enumerate
/// replicates. Streams depend only on (root, lane, index), never on
/// evaluation order.
inline constexpr std::uint64_t stream_seed(std::uint64_t root, std::uint64_t lane, std::uint64_t index) {
  return splitmix64(splitmix64(root ^ splitmix64(lane + 1)) + index);
}

inline Rng make_rng(std::uint64_t root, std::uint64_t lane = 0, std::uint64_t index = 0) {
  return Rng(stream_seed(root, lane, index));
}

/// Uniform draw in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace drbm
