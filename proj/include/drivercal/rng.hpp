#pragma once

#include <cstdint>
#include <random>

namespace drivercal {

// splitmix64 finalizer; good avalanche, cheap, and stable across platforms.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Deterministic sub-stream seed: the same (seed, stream, index) triple always
// yields the same value, and distinct triples are decorrelated.  Used to hand
// every driver / repeat / profile its own generator without coupling their
// draw sequences.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream,
                                 std::uint64_t index = 0) {
  return mix64(mix64(seed ^ mix64(stream)) ^ index);
}

inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream,
                                std::uint64_t index = 0) {
  return std::mt19937_64(derive_seed(seed, stream, index));
}

}  // namespace drivercal
