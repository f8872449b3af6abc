#pragma once

#include <cstdint>
#include <random>

namespace gnsspf {
namespace rng {

inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Independent engine per (seed, a, b) key. Streams are decorrelated by the
// splitmix64 finalizer, so callers can key on (epoch, particle) pairs and
// evaluate them in any order or in parallel.
inline std::mt19937_64 stream(std::uint64_t seed, std::uint64_t a,
                              std::uint64_t b = 0) {
  return std::mt19937_64(splitmix64(splitmix64(splitmix64(seed) ^ a) ^ b));
}

}  // namespace rng
}  // namespace gnsspf
