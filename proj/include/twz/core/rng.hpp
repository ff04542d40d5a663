#pragma once

#include <cstdint>
#include <random>

namespace twz {

[[nodiscard]] constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30U)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27U)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31U);
}

using Rng = std::mt19937_64;

/// Independent generator for (seed, stream, substream). Streams keyed by
/// trial/atom/scene index keep results independent of scheduling.
[[nodiscard]] inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0,
                                  std::uint64_t substream = 0) {
  const std::uint64_t a = splitmix64(seed ^ 0x5EED5EED5EEDULL);
  const std::uint64_t b = splitmix64(a ^ splitmix64(stream + 1));
  const std::uint64_t c = splitmix64(b ^ splitmix64(substream + 0x1234567ULL));
  std::seed_seq seq{static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32U),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32U)};
  return Rng(seq);
}

/// Uniform double in [0, 1) with 53 random bits; unlike
/// std::uniform_real_distribution its output is identical on every standard library.
[[nodiscard]] inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11U) * 0x1.0p-53;
}

[[nodiscard]] inline double uniform(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

[[nodiscard]] inline bool bernoulli(Rng& rng, double p) { return uniform01(rng) < p; }

/// Standard normal via Box-Muller (portable, unlike std::normal_distribution).
[[nodiscard]] double standard_normal(Rng& rng);

/// Uniform integer in [0, n).
[[nodiscard]] std::uint64_t uniform_index(Rng& rng, std::uint64_t n);

} // namespace twz
