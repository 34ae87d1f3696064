#pragma once

#include <cstdint>
#include <cstring>
#include <random>

namespace mgeo {

// Finalizer from splitmix64; bijective scramble of a 64-bit word.
inline uint64_t scramble64(uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Stream derivation: fold task coordinates into a base seed one at a time.
// Used so replicate/sample streams are independent of scheduling order.
inline uint64_t derive_seed(uint64_t base, uint64_t a = 0, uint64_t b = 0,
                            uint64_t c = 0) {
  uint64_t s = scramble64(base + 0x9e3779b97f4a7c15ull);
  s = scramble64(s ^ (a + 0xd1b54a32d192ed03ull));
  s = scramble64(s ^ (b + 0x8cb92ba72f3d8dd7ull));
  s = scramble64(s ^ (c + 0x2545f4914f6cdd1dull));
  return s;
}

inline uint64_t bits_of(double x) {
  uint64_t u;
  std::memcpy(&u, &x, sizeof u);
  return u;
}

inline std::mt19937_64 make_engine(uint64_t seed) {
  return std::mt19937_64(seed);
}

}  // namespace mgeo
