#pragma once

#include <cstdint>

namespace magicitem {

/// splitmix64. The whole generator state is one 64-bit word, which makes the
/// cursor trivially snapshot-able.
struct SplitMix64 {
  std::uint64_t state = 0;

  std::uint64_t next() {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1) with 53 bits of precision.
  double nextUnit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
};

}  // namespace magicitem
