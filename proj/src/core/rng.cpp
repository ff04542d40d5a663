#include "twz/core/rng.hpp"

#include <cmath>
#include <numbers>

namespace twz {

double standard_normal(Rng& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) {
    u1 = uniform01(rng);
  }
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  if (n <= 1) {
    return 0;
  }
  // rejection sampling for an unbiased draw
  const std::uint64_t limit = (~std::uint64_t{0}) - ((~std::uint64_t{0}) % n);
  std::uint64_t r = rng();
  while (r >= limit) {
    r = rng();
  }
  return r % n;
}

} // namespace twz
