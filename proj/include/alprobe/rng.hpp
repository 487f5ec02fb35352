#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace alprobe {

// Portable random source: std::mt19937_64 (its output sequence is fixed by
// the standard) with distribution transforms written out here, since the
// standard library distributions are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n) by rejection sampling. n must be > 0.
  std::uint64_t uniform_index(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  // Standard normal via Box-Muller, consuming two uniforms per draw.
  double normal();

 private:
  std::mt19937_64 engine_;
};

// Mixes a base seed with a string key (FNV-1a, then splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t base, std::string_view key);

}  // namespace alprobe
