#pragma once

#include "twz/core/error.hpp"
#include "twz/dataset/protocol.hpp"
#include "twz/holo/synthesis.hpp"
#include "twz/optics/grid.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace twz::dataset {

/// Two tweezers splat onto a shared input pixel with different phases.
class PhaseConflict : public Error {
public:
  PhaseConflict(std::size_t first, std::size_t second, std::size_t px, std::size_t py)
      : Error("tweezers " + std::to_string(first) + " and " + std::to_string(second) +
              " claim pixel (" + std::to_string(px) + ", " + std::to_string(py) +
              ") with different phases") {}
};

struct InputImages {
  optics::RealGrid amplitude;
  optics::RealGrid phase;
};

/// Bilinear splat of each tweezer at (x/s, y/s) onto an n×n image. Only pixels
/// with a nonzero coefficient belong to a tweezer's footprint and receive its
/// phase. Throws PhaseConflict, or twz::Error for a footprint off the image.
[[nodiscard]] InputImages encode_inputs(std::span<const TweezerRecord> tweezers, std::size_t n,
                                        std::size_t oversample);

/// Inverse of encode_inputs for disjoint footprints: each 8-connected
/// component of nonzero amplitude and equal phase is one tweezer at its
/// weighted centroid.
/// Tweezers come back ordered by (y, x) of their first pixel.
[[nodiscard]] std::vector<TweezerRecord> decode_inputs(const InputImages& images,
                                                       std::size_t oversample);

struct LabelImages {
  optics::RealGrid amplitude;
  optics::RealGrid phase;
};

/// Centered unitary forward transform of exp(i·hologram) over the central
/// n×n crop. Throws unless the hologram size is a positive multiple of n.
[[nodiscard]] LabelImages make_label(const optics::PhaseGrid& hologram, std::size_t n);

/// Inverse of make_label: the complex SLM-plane field amplitude·e^{i·phase}
/// transformed back (row-major, n×n).
[[nodiscard]] optics::ComplexField invert_label(const LabelImages& label);

struct Sample {
  std::size_t n = 0;
  std::vector<TweezerRecord> tweezers;
  /// Planes hold float-representable values so the file round trip is exact.
  InputImages inputs;
  LabelImages labels;

  friend bool operator==(const Sample& a, const Sample& b);
};

inline constexpr std::uint8_t kSampleVersion = 1;

[[nodiscard]] std::vector<std::uint8_t> encode_sample(const Sample& s);
[[nodiscard]] Sample decode_sample(std::span<const std::uint8_t> bytes);
void write_sample(const std::string& path, const Sample& s);
[[nodiscard]] Sample read_sample(const std::string& path);

struct SampleConfig {
  std::size_t count = 0;
  std::uint64_t seed = 0;
  std::size_t min_traps = 10;
  std::size_t max_traps = 200;
  /// Lattice spacing of the drawn rearrangement scenes, expanded pixels.
  double spacing = 16.0;
  double loading = 0.65;
  /// Hologram synthesis (WGS) settings; sample size n = slm_size.
  holo::SynthesisConfig synthesis = default_synthesis();

  [[nodiscard]] static holo::SynthesisConfig default_synthesis();
};

/// Builds sample `index` (retrying drawn scenes that fail); nullopt if every
/// attempt failed.
[[nodiscard]] std::optional<Sample> make_sample(const SampleConfig& cfg, std::size_t index,
                                                std::size_t* failures = nullptr);

/// On-the-fly sample stream: rearrangement scene -> matching -> step plan ->
/// one step's tweezers -> WGS hologram -> phases at the tweezers -> sample.
class SampleStream {
public:
  explicit SampleStream(SampleConfig cfg) : cfg_(std::move(cfg)) {}
  /// Next sample, or nullopt after `count` samples.
  [[nodiscard]] std::optional<Sample> next();
  [[nodiscard]] std::size_t skipped() const noexcept { return skipped_; }

private:
  SampleConfig cfg_;
  std::size_t index_ = 0;
  std::size_t skipped_ = 0;
};

/// The same samples as the stream, built in parallel.
[[nodiscard]] std::vector<Sample> generate_samples(const SampleConfig& cfg,
                                                   std::size_t* skipped = nullptr);

struct ValidationOptions {
  std::size_t scenes = 50;
  std::size_t traps = 100;
  std::uint64_t seed = 0;
  double min_separation = 24.0;
  /// Traps are drawn in a square of this half-width around the grid center.
  double half_width = 324.0;
  /// Propagation and measurement settings (aperture, oversample, windows).
  holo::SynthesisConfig optics;
};

struct GeneratorMetrics {
  std::size_t scenes = 0;
  std::size_t traps = 0;
  /// Pooled std of x and y position errors, expanded pixels.
  double position_std = 0.0;
  double phase_std = 0.0;
  double uniformity = 0.0;
  double efficiency = 0.0;
  std::size_t missing = 0;
  std::size_t failures = 0;
  std::vector<std::string> errors;
};

/// Random scene `index` of the validation set.
[[nodiscard]] std::vector<optics::TweezerTarget> validation_scene(const ValidationOptions& o,
                                                                  std::size_t index);

/// Requests a hologram per scene, propagates and measures it. A trap with no
/// power in its window is located at the brightest pixel of the field.
/// Throws unless scenes >= 10.
[[nodiscard]] GeneratorMetrics validate_generator(holo::HologramGenerator& generator,
                                                  const ValidationOptions& options);

[[nodiscard]] std::string metrics_to_json(const GeneratorMetrics& m);

} // namespace twz::dataset
