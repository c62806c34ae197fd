#include "qsteer/rng.hpp"

#include <cmath>

namespace qsteer {

double Rng::next_gaussian() {
  // Box-Muller; keep u1 away from zero so log stays finite.
  double u1 = next_double();
  double u2 = next_double();
  if (u1 < 1e-300) u1 = 1e-300;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

namespace {

std::uint64_t finalize(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  return finalize(finalize(a + 0x9E3779B97F4A7C15ull) ^
                  (b + 0x9E3779B97F4A7C15ull));
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return mix_seed(mix_seed(a, b), c);
}

}  // namespace qsteer
