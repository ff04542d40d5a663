#pragma once

#include "twz/core/error.hpp"
#include "twz/optics/grid.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace twz::optics {

/// One trap: sub-pixel position on the expanded grid, requested phase (empty
/// means "free") and relative amplitude.
struct TweezerTarget {
  double x = 0.0;
  double y = 0.0;
  std::optional<double> phase;
  double weight = 1.0;
};

struct TweezerMeasurement {
  double x = 0.0;
  double y = 0.0;
  /// Argument of the bilinearly interpolated field at (x, y), in [-pi, pi).
  double phase = 0.0;
  /// Fraction of the total field power inside the window.
  double power = 0.0;
  /// Set when the windowed power is below the floor (lenient mode only).
  bool missing = false;
};

/// A window holds less power than the configured floor: the trap is missing.
class NoPeak : public Error {
public:
  NoPeak(std::size_t index, double power)
      : Error("no peak in window " + std::to_string(index) + " (power fraction " +
              std::to_string(power) + ")"),
        index_(index) {}
  [[nodiscard]] std::size_t index() const noexcept { return index_; }

private:
  std::size_t index_;
};

struct MeasureOptions {
  /// Window radius in expanded pixels.
  double window_radius = 6.0;
  /// Minimum windowed power fraction for a trap to count as present.
  double power_floor = 1e-6;
  /// Number of times the window is re-centered on the running centroid.
  int recenter_iterations = 4;
  /// Throw NoPeak (true) or flag the measurement as missing (false).
  bool throw_on_missing = true;
};

/// Σᵢ aᵢ·exp(-|r - rᵢ|²/w²)·exp(iφᵢ) sampled on an m×m grid. A free phase is
/// taken as 0. Throws on an empty list or non-positive waist.
[[nodiscard]] ComplexField analytic_tweezer_field(std::span<const TweezerTarget> targets,
                                                  double waist, std::size_t m);

/// Intensity-weighted centroid, phase and power of each trap near its expected
/// position. Windows have a one-pixel linear edge and are re-centered on the
/// centroid a few times, which removes the bias a fixed pixel set gives for
/// sub-pixel positions. Throws on overlapping windows or windows that leave
/// the grid.
[[nodiscard]] std::vector<TweezerMeasurement>
measure_tweezers(const ComplexField& field, std::span<const TweezerTarget> expected,
                 const MeasureOptions& options = {});

} // namespace twz::optics
