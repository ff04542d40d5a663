#include "twz/core/stats.hpp"

#include <algorithm>
#include <complex>
#include <limits>

namespace twz {

double mean(std::span<const double> v) {
  if (v.empty()) {
    return 0.0;
  }
  double s = 0.0;
  for (const double x : v) {
    s += x;
  }
  return s / static_cast<double>(v.size());
}

double stddev(std::span<const double> v) {
  if (v.empty()) {
    return 0.0;
  }
  const double m = mean(v);
  double s = 0.0;
  for (const double x : v) {
    s += (x - m) * (x - m);
  }
  return std::sqrt(s / static_cast<double>(v.size()));
}

double circular_stddev(std::span<const double> angles) {
  if (angles.empty()) {
    return 0.0;
  }
  std::complex<double> acc{};
  for (const double a : angles) {
    acc += std::polar(1.0, a);
  }
  const double r = std::min(1.0, std::abs(acc) / static_cast<double>(angles.size()));
  if (r <= 0.0) {
    return std::numeric_limits<double>::infinity();
  }
  return std::sqrt(-2.0 * std::log(r));
}

double circular_mean(std::span<const double> angles) {
  std::complex<double> acc{};
  for (const double a : angles) {
    acc += std::polar(1.0, a);
  }
  return wrap_phase(std::arg(acc));
}

std::pair<double, double> wilson_interval(std::size_t k, std::size_t n, double z) {
  if (n == 0) {
    return {0.0, 1.0};
  }
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(k) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double center = (p + z2 / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

} // namespace twz
