#pragma once

#include "twz/core/geometry.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace twz::traj {

/// Per-step limits, in expanded-grid pixels and radians.
struct StepConstraints {
  double max_step = 1.25;
  double max_phase_step = 0.3;

  /// Throws twz::Error unless both limits are positive.
  void validate() const;
};

struct Tweezer {
  Vec2 position;
  double phase = 0.0;
  double amplitude = 1.0;
};

/// One tweezer's move from its loaded site to its destination.
struct Move {
  Vec2 from;
  Vec2 to;
  double phase_from = 0.0;
  double phase_to = 0.0;
  double amplitude = 1.0;
};

struct StepPlan {
  std::size_t steps = 0;
  /// steps + 1 frames, each holding every tweezer in the same order.
  std::vector<std::vector<Tweezer>> frames;
  /// Unmatched traps are switched off before step 0.
  bool prologue = true;
  /// The final frame is replaced by the target hologram.
  bool epilogue = true;

  [[nodiscard]] std::size_t tweezer_count() const noexcept {
    return frames.empty() ? 0 : frames.front().size();
  }
};

/// Shortest signed arc from a to b; an exact half turn resolves to +pi.
[[nodiscard]] double phase_gap(double a, double b) noexcept;

[[nodiscard]] StepPlan plan(std::span<const Move> moves, const StepConstraints& constraints = {},
                            std::size_t min_steps = 20);

struct Violation {
  std::size_t step = 0;  // transition from frame step to step + 1
  std::size_t tweezer = 0;
  double displacement = 0.0;
  double phase_change = 0.0;
};

[[nodiscard]] std::vector<Violation> validate(const StepPlan& plan,
                                              const StepConstraints& constraints);
[[nodiscard]] std::string describe(const Violation& v);

inline constexpr std::uint8_t kPlanVersion = 1;

/// "PLAN" | u8 version | u8 flags | u32 steps | u32 tweezers | f32 (x, y, phase) per tweezer per
/// frame. Amplitudes are not stored and decode as 1.
[[nodiscard]] std::vector<std::uint8_t> encode_plan(const StepPlan& plan);
[[nodiscard]] StepPlan decode_plan(std::span<const std::uint8_t> bytes);
void write_plan(const std::string& path, const StepPlan& plan);
[[nodiscard]] StepPlan read_plan(const std::string& path);

} // namespace twz::traj
