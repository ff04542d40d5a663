#pragma once

#include "twz/optics/propagate.hpp"
#include "twz/optics/tweezer.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace twz::holo {

using optics::TweezerTarget;

class EmptyTargets : public Error {
public:
  EmptyTargets() : Error("empty target list") {}
};

class UnspecifiedPhase : public Error {
public:
  explicit UnspecifiedPhase(std::size_t index)
      : Error("target " + std::to_string(index) + " has no phase") {}
};

struct SynthesisConfig {
  /// SLM resolution N.
  std::size_t slm_size = 256;
  /// Expanded grid M = oversample·N.
  std::size_t oversample = 8;
  /// Feedback iterations K.
  int iterations = 30;
  std::uint64_t seed = 0;
  bool uniformity_weighting = true;
  /// Pinned generator: run the feedback refinement at all.
  bool phase_pinning = true;
  /// Exponent η of the weight update w ← w·(⟨P⟩/P)^η.
  double weight_exponent = 0.5;
  /// WGS: trap phases stop following the field after this many iterations,
  /// so the remaining iterations only adjust weights.
  int phase_lock_after = 10;
  /// Uniformity above this after K iterations sets converged = false.
  double uniformity_threshold = 0.01;
  /// Spot waist in expanded pixels; targets closer than 3 waists draw a warning.
  double waist = 2.5;
  optics::Aperture aperture;
  optics::MeasureOptions measure;

  [[nodiscard]] std::size_t expanded_size() const noexcept { return slm_size * oversample; }
};

struct SynthesisReport {
  std::vector<optics::TweezerMeasurement> measurements;
  /// std/mean of the measured powers.
  double uniformity = 0.0;
  /// Sum of windowed power fractions.
  double efficiency = 0.0;
  bool converged = true;
  /// Iteration whose hologram was returned (0 = initial guess).
  int best_iteration = 0;
  /// Largest measured position error against the request, expanded pixels.
  double max_position_error = 0.0;
  std::vector<std::string> warnings;
};

struct SynthesisResult {
  optics::PhaseGrid hologram;
  SynthesisReport report;
};

/// Weighted Gerchberg–Saxton on the expanded grid with free trap phases.
[[nodiscard]] SynthesisResult wgs(std::span<const TweezerTarget> targets,
                                  const SynthesisConfig& cfg);

/// Phase-pinned generator: superposition of exact sub-pixel ramps carrying the
/// requested phases, then optional feedback iterations that correct commanded
/// positions, phases and weights from the simulated field. The hologram with
/// the smallest worst-case position error seen so far is kept.
[[nodiscard]] SynthesisResult synthesize_pinned(std::span<const TweezerTarget> targets,
                                                const SynthesisConfig& cfg);

struct ExtractedPhase {
  double phase = 0.0;
  /// |E|² at the point is below 1e-3 of the field's peak intensity.
  bool low_power = false;
};

/// Propagates the hologram and samples the field argument at each coordinate
/// (expanded pixels, bilinear). Throws when a coordinate is off the grid.
[[nodiscard]] std::vector<ExtractedPhase>
extract_phases(const optics::PhaseGrid& hologram, std::span<const optics::cdouble> coords,
               std::size_t oversample, const optics::Aperture& aperture = {});

/// Same, on an already propagated centered field.
[[nodiscard]] std::vector<ExtractedPhase>
extract_phases_from_field(const optics::ComplexField& field,
                          std::span<const optics::cdouble> coords);

/// std(P)/mean(P). Throws on an empty list.
[[nodiscard]] double uniformity(std::span<const double> powers);

/// Fills the report statistics from measurements against the request.
void summarize(SynthesisReport& report, std::span<const TweezerTarget> targets,
               const SynthesisConfig& cfg);

[[nodiscard]] std::string report_to_json(const SynthesisReport& report);

/// Anything that turns a tweezer list into an SLM hologram.
class HologramGenerator {
public:
  virtual ~HologramGenerator() = default;
  [[nodiscard]] virtual optics::PhaseGrid generate(std::span<const TweezerTarget> targets) = 0;
  [[nodiscard]] virtual std::string name() const = 0;
};

class PinnedGenerator final : public HologramGenerator {
public:
  explicit PinnedGenerator(SynthesisConfig cfg) : cfg_(std::move(cfg)) {}
  [[nodiscard]] optics::PhaseGrid generate(std::span<const TweezerTarget> targets) override;
  [[nodiscard]] std::string name() const override { return "classical-pinned"; }

private:
  SynthesisConfig cfg_;
};

class WgsGenerator final : public HologramGenerator {
public:
  explicit WgsGenerator(SynthesisConfig cfg) : cfg_(std::move(cfg)) {}
  [[nodiscard]] optics::PhaseGrid generate(std::span<const TweezerTarget> targets) override;
  [[nodiscard]] std::string name() const override { return "classical-wgs"; }

private:
  SynthesisConfig cfg_;
};

} // namespace twz::holo
