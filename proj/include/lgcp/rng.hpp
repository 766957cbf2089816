#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace lgcp {

// splitmix64 step; used to decorrelate seeds derived from a root seed.
inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d4a68b021e663dULL;
  return z ^ (z >> 31);
}

inline uint64_t fnv1a(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

using Rng = std::mt19937_64;

// Named stream: independent generator per (root seed, purpose, index), so
// parallel replicates and pipeline stages draw from decorrelated streams.
inline Rng seed_stream(uint64_t root, std::string_view purpose, uint64_t index = 0) {
  uint64_t s = root ^ fnv1a(purpose);
  s ^= 0x9e3779b97f4a7c15ULL * (index + 1);
  uint64_t a = splitmix64(s);
  uint64_t b = splitmix64(s);
  return Rng(a ^ (b << 1));
}

}  // namespace lgcp
