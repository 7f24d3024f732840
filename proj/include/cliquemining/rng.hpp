#pragma once

#include <cstdint>
#include <random>

namespace cliquemining {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent stream for (seed, stream, index); used for per-batch and
/// per-trial generators so results do not depend on scheduling.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0) {
  return mix64(mix64(mix64(seed) ^ stream) ^ index);
}

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0, std::uint64_t index = 0) {
  return Rng(derive_seed(seed, stream, index));
}

// Stream tags.
inline constexpr std::uint64_t kStreamField = 0x6669656c64ULL;
inline constexpr std::uint64_t kStreamLayout = 0x6c61796f7574ULL;
inline constexpr std::uint64_t kStreamNoise = 0x6e6f697365ULL;
inline constexpr std::uint64_t kStreamBatch = 0x6261746368ULL;
inline constexpr std::uint64_t kStreamTrial = 0x747269616cULL;
inline constexpr std::uint64_t kStreamTrain = 0x747261696eULL;
inline constexpr std::uint64_t kStreamSparse = 0x737061727365ULL;

}  // namespace cliquemining
