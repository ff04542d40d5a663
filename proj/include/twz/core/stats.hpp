#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <utility>

namespace twz {

/// Wraps an angle into [-pi, pi).
[[nodiscard]] inline double wrap_phase(double a) noexcept {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double r = std::fmod(a + std::numbers::pi, two_pi);
  if (r < 0.0) {
    r += two_pi;
  }
  r -= std::numbers::pi;
  return r >= std::numbers::pi ? r - two_pi : r;
}

/// Signed shortest angular difference b - a in [-pi, pi).
[[nodiscard]] inline double circular_diff(double a, double b) noexcept {
  return wrap_phase(b - a);
}

[[nodiscard]] double mean(std::span<const double> v);

/// Population standard deviation.
[[nodiscard]] double stddev(std::span<const double> v);

/// Circular standard deviation sqrt(-2 ln R) of a set of angles.
[[nodiscard]] double circular_stddev(std::span<const double> angles);

/// Circular mean in [-pi, pi).
[[nodiscard]] double circular_mean(std::span<const double> angles);

/// Wilson score interval for k successes out of n at the given z.
[[nodiscard]] std::pair<double, double> wilson_interval(std::size_t k, std::size_t n,
                                                        double z = 1.959963984540054);

} // namespace twz
