#pragma once

#include <cstdint>
#include <random>

namespace errp {

// All randomized code in this project draws through these helpers instead of
// <random> distributions: the std distributions are implementation-defined,
// and we need byte-identical output across compilers for reproducibility.
using Rng = std::mt19937_64;

inline double rng_unit(Rng& g) {
  // 53-bit mantissa trick, uniform on [0, 1).
  return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

inline double rng_uniform(Rng& g, double lo, double hi) {
  return lo + (hi - lo) * rng_unit(g);
}

// Inclusive integer range. Modulo bias is irrelevant for our range sizes.
inline long rng_int(Rng& g, long lo, long hi) {
  return lo + static_cast<long>(g() % static_cast<std::uint64_t>(hi - lo + 1));
}

}  // namespace errp
