#include "twz/optics/grid.hpp"

#include <cmath>
#include <string>

namespace twz::optics {

double total_power(const ComplexField& field) noexcept {
  double s = 0.0;
  for (const cdouble& e : field.values()) {
    s += std::norm(e);
  }
  return s;
}

double total_power(const RealGrid& amplitude) noexcept {
  double s = 0.0;
  for (const double a : amplitude.values()) {
    s += a * a;
  }
  return s;
}

PhaseGrid::PhaseGrid(std::size_t n) : n_(n), units_(n * n, 0U) {
  if (!is_power_of_two(n)) {
    throw Error("PhaseGrid size must be a power of two, got " + std::to_string(n));
  }
}

std::uint32_t PhaseGrid::to_units(double radians) {
  if (!std::isfinite(radians)) {
    throw Error("PhaseGrid values must be finite");
  }
  // reduce first so the integer conversion never overflows
  const double turns = std::remainder(radians / (2.0 * std::numbers::pi), 1.0);
  const auto q = static_cast<std::int64_t>(std::llround(turns * 4294967296.0));
  return static_cast<std::uint32_t>(static_cast<std::uint64_t>(q));
}

PhaseGrid PhaseGrid::from_radians(std::size_t n, std::span<const double> radians) {
  PhaseGrid g(n);
  if (radians.size() != n * n) {
    throw Error("PhaseGrid::from_radians: expected " + std::to_string(n * n) + " values, got " +
                std::to_string(radians.size()));
  }
  for (std::size_t i = 0; i < radians.size(); ++i) {
    g.units_[i] = to_units(radians[i]);
  }
  return g;
}

std::vector<double> PhaseGrid::radians() const {
  std::vector<double> out(units_.size());
  for (std::size_t i = 0; i < units_.size(); ++i) {
    out[i] = to_radians(units_[i]);
  }
  return out;
}

PhaseGrid compose(const PhaseGrid& a, const PhaseGrid& b) {
  if (a.size() != b.size()) {
    throw Error("compose: size mismatch " + std::to_string(a.size()) + " vs " +
                std::to_string(b.size()));
  }
  PhaseGrid out(a.size());
  for (std::size_t v = 0; v < a.size(); ++v) {
    for (std::size_t u = 0; u < a.size(); ++u) {
      out.set_units(u, v, a.units(u, v) + b.units(u, v));
    }
  }
  return out;
}

} // namespace twz::optics
