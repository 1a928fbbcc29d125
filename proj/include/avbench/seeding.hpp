#pragma once

#include <cstdint>
#include <random>

namespace avbench {

/// SplitMix64 finalizer. Used to derive independent sub-seeds so that any
/// (seed, stream, frame) triple maps to its own generator; per-frame work can
/// then run in any order and stay bit-identical to a serial run.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  return mix64(mix64(seed) ^ mix64(tag + 0x632BE59BD9B4E019ULL));
}

/// Generator for one frame of a seeded stream.
inline std::mt19937_64 frame_engine(std::uint64_t stream_seed, std::uint64_t frame) {
  return std::mt19937_64(derive_seed(stream_seed, frame));
}

/// Uniform double in [0, 1) from the top 53 bits; independent of the standard
/// library's distribution implementation.
inline double uniform01(std::mt19937_64& engine) {
  return static_cast<double>(engine() >> 11) * 0x1.0p-53;
}

}  // namespace avbench
