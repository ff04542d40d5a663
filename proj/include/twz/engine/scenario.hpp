#pragma once

#include "twz/core/error.hpp"
#include "twz/match/lattice.hpp"
#include "twz/traj/plan.hpp"
#include "twz/transport/dynamics.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace twz::engine {

inline constexpr int kSchemaVersion = 1;

/// Bad scenario text, unknown keys or values out of range.
class ConfigError : public Error {
public:
  using Error::Error;
};

struct Geometry {
  enum class Kind { Square, Sites, Layered };
  Kind kind = Kind::Square;
  /// Target array side (square and layered).
  std::size_t n = 45;
  /// Sites file for Kind::Sites ("x y layer" in lattice units).
  std::string sites_path;
  std::size_t layers = 1;
  /// Layer l is layer 0 rotated by l·twist about the array center.
  double twist_deg = 0.0;
  /// Fresnel coefficient per layer (missing entries are 0).
  std::vector<double> fresnel;
};

struct GeneratorSpec {
  /// none | classical-pinned | classical-wgs | external
  std::string backend = "none";
  /// "host:port" or "stdio:CMD" for the external backend.
  std::string endpoint;
  std::size_t slm_size = 256;
  std::size_t oversample = 8;
  int iterations = 1;
  /// Measure every step's tweezers in the simulated focal plane.
  bool verify = true;
  /// Largest accepted position error of a verified tweezer, expanded pixels.
  double verify_tolerance = 0.3;
  int timeout_ms = 5000;
};

struct SurvivalSpec {
  /// perfect | per_round | logistic | dynamics
  std::string model = "perfect";
  /// Survival of every atom whose tweezer moves or changes phase in a round.
  double per_round = 0.99;
  /// Logistic calibration: survival_curve over this grid, refit every run.
  std::vector<double> calibration_dr{0.0, 0.25, 0.5, 1.0, 1.5};
  std::vector<double> calibration_dphi{0.0, 0.5, 1.0, 2.0};
  std::size_t calibration_samples = 200;
  std::size_t calibration_steps = 10;
};

struct Scenario {
  int schema_version = kSchemaVersion;
  std::string name = "scenario";
  Geometry geometry;
  /// Square reservoir side per layer, same spacing and center as the targets.
  std::size_t reservoir_n = 62;
  /// One lattice unit in expanded pixels.
  double spacing_px = 24.0;
  /// Tweezer waist in expanded pixels (converts moves to transport units).
  double waist_px = 2.5;
  double loading = 0.65;
  transport::PhysicsParams physics;
  traj::StepConstraints constraints;
  std::size_t min_steps = 20;
  GeneratorSpec generator;
  SurvivalSpec survival;
  /// block | exact
  std::string matching = "block";
  double block_size = 10.0;
  bool decollide = true;
  /// Collision clearance in lattice units.
  double clearance = 0.5;
  int rounds = 1;
  std::size_t reserve = 0;
  std::size_t trials = 1;
  std::uint64_t seed = 0;
  double imaging_error = 8e-4;
  /// Emit the per-atom fate trace in the report.
  bool trace = false;

  /// Throws ConfigError on invalid values.
  void validate() const;
  [[nodiscard]] std::size_t layer_count() const noexcept;
  [[nodiscard]] double fresnel(std::size_t layer) const noexcept;
};

[[nodiscard]] Scenario scenario_from_json(const std::string& text);
[[nodiscard]] std::string scenario_to_json(const Scenario& s);
/// Reads a scenario file, applying "key=value" style overrides first. Keys
/// are dotted paths ("survival.model"); values are parsed as JSON when
/// possible and taken as strings otherwise. Throws ConfigError with
/// "scenario not found" when the file does not exist.
[[nodiscard]] Scenario load_scenario(const std::string& path,
                                     const std::vector<std::pair<std::string, std::string>>& overrides = {});
[[nodiscard]] Scenario apply_overrides(const Scenario& s,
                                       const std::vector<std::pair<std::string, std::string>>& overrides);

/// Target and reservoir lattices of one layer, in lattice units centered on
/// the origin.
struct LayerGeometry {
  match::SiteLattice targets;
  match::SiteLattice reservoir;
};

[[nodiscard]] std::vector<LayerGeometry> build_layers(const Scenario& s);

} // namespace twz::engine
