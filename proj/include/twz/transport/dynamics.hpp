#pragma once

#include "twz/core/geometry.hpp"
#include "twz/core/rng.hpp"
#include "twz/match/lattice.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace twz::transport {

/// Lengths in waists, energies in trap depths, unit mass. A single Gaussian
/// tweezer then has harmonic angular frequency 2 (period pi).
struct PhysicsParams {
  /// Temperature as a fraction of the trap depth.
  double theta = 0.1;
  double response_time_ms = 1.0;
  double refresh_ms = 1.0;
  /// Lab duration of one harmonic period; sets the ms -> model time scale.
  double trap_period_ms = 0.02;
  int steps_per_period = 192;
  /// Loss radius around the commanded position, in waists.
  double escape_radius = 3.0;

  void validate() const;
  /// Integrator step in model time.
  [[nodiscard]] double dt() const;
  /// Converts milliseconds to model time.
  [[nodiscard]] double model_time(double ms) const;
};

struct AtomState {
  Vec2 position;
  Vec2 velocity;
  /// Kinetic plus potential energy; the potential is zero far from any trap.
  double energy = 0.0;
  bool alive = true;
};

/// One commanded trap state: position and optical phase.
struct Waypoint {
  Vec2 position;
  double phase = 0.0;
};

/// Thermal state in the harmonic approximation of a trap at the origin:
/// position variance theta/4 and velocity variance theta per axis.
[[nodiscard]] AtomState sample_thermal(double theta, Rng& rng);
[[nodiscard]] AtomState sample_thermal(double theta, std::uint64_t seed, std::uint64_t stream = 0);

/// One refresh interval during which the trap fades from (from, phase_from) to
/// (to, phase_to) with the response time. Marks the atom dead if its energy is
/// positive or it is farther than the escape radius from `to` at the end.
[[nodiscard]] AtomState evolve_step(const AtomState& atom, Vec2 from, double phase_from, Vec2 to,
                                    double phase_to, const PhysicsParams& params);

/// Runs a whole move. The displayed field carries over between refreshes, so
/// each refresh fades from whatever mixture is still on the SLM. `hold`
/// extra refreshes at the last waypoint follow the move.
[[nodiscard]] AtomState evolve_path(const AtomState& atom, std::span<const Waypoint> path,
                                    const PhysicsParams& params, int hold = 1);

struct SurvivalCell {
  double dr = 0.0;
  double dphi = 0.0;
  std::size_t n = 0;
  std::size_t survived = 0;
  double p = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
};

struct SurvivalOptions {
  std::size_t samples = 200;
  /// Refreshes per simulated move; every refresh advances by (dr, dphi).
  std::size_t steps_per_move = 10;
  std::uint64_t seed = 0;
};

/// Survival fraction with 95% Wilson intervals for every (dr, dphi) pair,
/// dr in waists. Throws unless samples >= 100.
[[nodiscard]] std::vector<SurvivalCell> survival_curve(std::span<const double> dr_grid,
                                                       std::span<const double> dphi_grid,
                                                       const PhysicsParams& params,
                                                       const SurvivalOptions& options = {});

[[nodiscard]] std::string survival_to_csv(std::span<const SurvivalCell> cells);

/// Per-move survival probability 1 / (1 + exp(-(b0 + b1*dr + b2*dphi))) for
/// per-step displacement dr (waists) and phase step dphi.
struct LogisticSurvival {
  double b0 = 0.0;
  double b1 = 0.0;
  double b2 = 0.0;
  [[nodiscard]] double probability(double dr, double dphi) const noexcept;
};

/// Binomial logistic regression on the table (IRLS with a small ridge so
/// all-survive tables still converge).
[[nodiscard]] LogisticSurvival fit_logistic(std::span<const SurvivalCell> cells);

/// Independent Bernoulli(p) occupancy for every site. Throws unless p is in [0, 1].
[[nodiscard]] match::Occupancy load(const match::SiteLattice& lattice, double p,
                                    std::uint64_t seed);

} // namespace twz::transport
