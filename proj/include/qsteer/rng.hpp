#pragma once

#include <cstdint>

namespace qsteer {

// SplitMix64. The state advances by the golden-ratio increment and the output
// passes through the Stafford mix13 finalizer. Every random draw in the
// project flows through this generator so runs reproduce bit-for-bit across
// platforms; the standard <random> distributions are avoided for the same
// reason.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform integer in [0, n). n must be positive.
  std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

  // Uniform double in [0, 1) with 53-bit resolution.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller (two uniforms per call, no caching).
  double next_gaussian();

 private:
  std::uint64_t state_;
};

// Stable seed derivation for subcomponents (per-task workers, per-episode
// streams). Feeds the inputs through the SplitMix64 finalizer.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c);

}  // namespace qsteer
