#pragma once

#include <cstdint>
#include <initializer_list>

namespace mmcd {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Counter-based child seed: a pure function of the master seed and the
/// coordinates, so the order in which children are consumed never matters.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = mix64(master);
  for (std::uint64_t c : path) s = mix64(s ^ mix64(c + 0x632BE59BD9B4E019ULL));
  return s;
}

// Stream tags keep independent consumers of one master seed apart.
namespace stream {
inline constexpr std::uint64_t trial = 1;
inline constexpr std::uint64_t subsample = 2;
inline constexpr std::uint64_t covariance = 3;
inline constexpr std::uint64_t data = 4;
inline constexpr std::uint64_t contamination = 5;
inline constexpr std::uint64_t estimator = 6;
}  // namespace stream

}  // namespace mmcd
