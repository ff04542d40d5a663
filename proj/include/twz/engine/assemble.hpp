#pragma once

#include "twz/engine/scenario.hpp"
#include "twz/holo/synthesis.hpp"
#include "twz/transport/dynamics.hpp"

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace twz::engine {

/// A matched atom was paired with a target on another layer.
class CrossLayerAssignment : public Error {
public:
  using Error::Error;
};

/// What happened to one loaded atom.
struct AtomFate {
  int layer = 0;
  std::size_t site = 0;
  /// placed | lost_transport | discarded | unseen | reserve | collision
  std::string fate;
  /// Target index for placed atoms, -1 otherwise.
  long target = -1;
  int round = 1;
};

struct LayerVerify {
  std::size_t steps_checked = 0;
  std::size_t steps_over_tolerance = 0;
  double max_position_error = 0.0;
  /// Worst error in the last verified frame, where every tweezer is on its target.
  double target_position_error = 0.0;
};

struct TrialReport {
  std::size_t trial = 0;
  double filling = 0.0;
  std::size_t placed = 0;
  std::size_t targets = 0;
  std::size_t lost = 0;
  std::size_t steps = 0;
  std::size_t round2_moves = 0;
  bool failed = false;
  std::vector<std::string> flags;
  std::map<std::string, std::size_t> fates;
  std::vector<AtomFate> trace;
  std::vector<LayerVerify> verify;
};

struct RunReport {
  std::string scenario;
  std::uint64_t seed = 0;
  int rounds = 1;
  std::string survival_model;
  std::optional<transport::LogisticSurvival> calibration;
  std::vector<std::string> warnings;
  std::vector<TrialReport> trials;
  double mean_filling = 0.0;
  double std_filling = 0.0;
  std::size_t failed_trials = 0;
};

/// Wall-clock stage times of a run; kept out of RunReport so reports stay
/// byte-identical.
struct TimingReport {
  double t_match_ms = 0.0;
  double t_holo_first_ms = 0.0;
  double t_holo_ms = 0.0;
  double t_refresh_ms = 0.0;
  double t_final_ms = 0.0;
  std::size_t steps = 0;

  /// t_match + t_holo(first) + steps·max(t_holo, t_refresh) + t_final.
  [[nodiscard]] double makespan_ms() const noexcept;
};

[[nodiscard]] double makespan_ms(double t_match, double t_holo_first, double t_holo,
                                 double t_refresh, std::size_t steps, double t_final) noexcept;

using GeneratorFactory = std::function<std::unique_ptr<holo::HologramGenerator>()>;

struct RunOptions {
  /// Overrides the scenario's generator (tests inject backends here).
  GeneratorFactory generator;
  /// Directory for per-step PGM frames of |E|² (layer 0, first trial).
  std::string frames_dir;
  TimingReport* timing = nullptr;
};

/// Single-layer assembly. Throws ConfigError for layered scenarios.
[[nodiscard]] RunReport assemble(const Scenario& s, const RunOptions& options = {});
/// Layered assembly with per-layer matching and a Fresnel-composed hologram.
[[nodiscard]] RunReport assemble_3d(const Scenario& s, const RunOptions& options = {});

[[nodiscard]] std::string report_to_json(const RunReport& r);
/// trial,filling,placed,targets,lost,steps,round2_moves,failed
[[nodiscard]] std::string report_to_csv(const RunReport& r);
[[nodiscard]] std::string timing_to_json(const TimingReport& t);

/// Generator for the scenario's backend; nullptr for "none".
[[nodiscard]] GeneratorFactory make_generator_factory(const Scenario& s);
[[nodiscard]] holo::SynthesisConfig synthesis_config(const Scenario& s);

/// Binary PGM (P5) of |E|² scaled to the peak.
void write_pgm(const std::string& path, const optics::ComplexField& field);

} // namespace twz::engine
