#include "twz/traj/plan.hpp"

#include "twz/core/binary_io.hpp"
#include "twz/core/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

namespace twz::traj {

namespace {

constexpr double kTolerance = 1e-9;

} // namespace

void StepConstraints::validate() const {
  if (!(max_step > 0.0) || !(max_phase_step > 0.0)) {
    throw Error(fmt::format("step constraints must be positive (got {}, {})", max_step,
                            max_phase_step));
  }
}

double phase_gap(double a, double b) noexcept {
  const double g = circular_diff(a, b);
  return g == -std::numbers::pi ? std::numbers::pi : g;
}

StepPlan plan(std::span<const Move> moves, const StepConstraints& constraints,
              std::size_t min_steps) {
  constraints.validate();
  double longest = 0.0;
  double widest = 0.0;
  for (const Move& m : moves) {
    longest = std::max(longest, dist(m.from, m.to));
    widest = std::max(widest, std::abs(phase_gap(m.phase_from, m.phase_to)));
  }
  const auto need = [](double span, double limit) {
    return static_cast<std::size_t>(std::ceil(span / limit));
  };
  StepPlan p;
  p.steps = std::max({min_steps, need(longest, constraints.max_step),
                      need(widest, constraints.max_phase_step), std::size_t{1}});
  p.frames.assign(p.steps + 1, std::vector<Tweezer>(moves.size()));
  const double n = static_cast<double>(p.steps);
  for (std::size_t i = 0; i < moves.size(); ++i) {
    const Move& m = moves[i];
    const Vec2 delta = m.to - m.from;
    const double gap = phase_gap(m.phase_from, m.phase_to);
    p.frames[0][i] = {m.from, m.phase_from, m.amplitude};
    for (std::size_t k = 1; k < p.steps; ++k) {
      const double t = static_cast<double>(k) / n;
      p.frames[k][i] = {m.from + t * delta, m.phase_from + t * gap, m.amplitude};
    }
    p.frames[p.steps][i] = {m.to, m.phase_to, m.amplitude};
  }
  return p;
}

std::vector<Violation> validate(const StepPlan& plan, const StepConstraints& constraints) {
  std::vector<Violation> out;
  for (std::size_t k = 0; k + 1 < plan.frames.size(); ++k) {
    const auto& a = plan.frames[k];
    const auto& b = plan.frames[k + 1];
    for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) {
      const double dr = dist(a[i].position, b[i].position);
      const double dphi = std::abs(phase_gap(a[i].phase, b[i].phase));
      if (dr > constraints.max_step * (1.0 + kTolerance) ||
          dphi > constraints.max_phase_step * (1.0 + kTolerance)) {
        out.push_back({k, i, dr, dphi});
      }
    }
  }
  return out;
}

std::string describe(const Violation& v) {
  return fmt::format("step {} -> {}, tweezer {}: displacement {:.6g}, phase change {:.6g}",
                     v.step, v.step + 1, v.tweezer, v.displacement, v.phase_change);
}

std::vector<std::uint8_t> encode_plan(const StepPlan& plan) {
  ByteWriter w;
  w.put_bytes("PLAN");
  w.put_u8(kPlanVersion);
  w.put_u8(static_cast<std::uint8_t>((plan.prologue ? 1U : 0U) | (plan.epilogue ? 2U : 0U)));
  w.put_u32(static_cast<std::uint32_t>(plan.steps));
  w.put_u32(static_cast<std::uint32_t>(plan.tweezer_count()));
  for (const auto& frame : plan.frames) {
    for (const Tweezer& t : frame) {
      w.put_f32(static_cast<float>(t.position.x));
      w.put_f32(static_cast<float>(t.position.y));
      w.put_f32(static_cast<float>(t.phase));
    }
  }
  return w.take();
}

StepPlan decode_plan(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (r.get_bytes(4) != "PLAN") {
    throw FormatError(FormatError::Kind::BadMagic, "not a PLAN file");
  }
  const std::uint8_t version = r.get_u8();
  if (version != kPlanVersion) {
    throw FormatError(FormatError::Kind::Unsupported,
                      fmt::format("unsupported PLAN version {}", version));
  }
  const std::uint8_t flags = r.get_u8();
  if ((flags & ~3U) != 0) {
    throw FormatError(FormatError::Kind::Malformed, fmt::format("unknown PLAN flags {}", flags));
  }
  StepPlan p;
  p.prologue = (flags & 1U) != 0;
  p.epilogue = (flags & 2U) != 0;
  p.steps = r.get_u32();
  const std::uint32_t count = r.get_u32();
  const std::uint64_t floats = (std::uint64_t{p.steps} + 1) * count * 3;
  if (floats * 4 > r.remaining()) {
    throw FormatError(FormatError::Kind::Truncation,
                      fmt::format("PLAN payload needs {} bytes, have {}", floats * 4,
                                  r.remaining()));
  }
  p.frames.assign(p.steps + 1, std::vector<Tweezer>(count));
  for (auto& frame : p.frames) {
    for (Tweezer& t : frame) {
      t.position.x = r.get_f32();
      t.position.y = r.get_f32();
      t.phase = r.get_f32();
    }
  }
  if (r.remaining() != 0) {
    throw FormatError(FormatError::Kind::Malformed,
                      fmt::format("{} trailing bytes after PLAN payload", r.remaining()));
  }
  return p;
}

void write_plan(const std::string& path, const StepPlan& plan) {
  write_file(path, encode_plan(plan));
}

StepPlan read_plan(const std::string& path) { return decode_plan(read_file(path)); }

} // namespace twz::traj
