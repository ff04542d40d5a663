#pragma once

#include "twz/optics/grid.hpp"

#include <span>

namespace twz::holo {

/// A point source on the expanded grid with a complex coefficient.
struct RampTerm {
  double x = 0.0;
  double y = 0.0;
  optics::cdouble coefficient{1.0, 0.0};
};

/// S(u', v') = Σⱼ cⱼ·exp(2πi(u'·(xⱼ - M/2) + v'·(yⱼ - M/2))/M) for the N×N
/// SLM pixels, u' = u - N/2. Evaluated by Gaussian gridding onto the M×M grid
/// and one band-limited FFT, so the cost barely depends on the term count.
/// Relative accuracy is about 1e-10 for M ≥ 2N.
[[nodiscard]] optics::Grid<optics::cdouble> superpose_ramps(std::span<const RampTerm> terms,
                                                            std::size_t n, std::size_t m);

/// arg of superpose_ramps, quantized into a PhaseGrid.
[[nodiscard]] optics::PhaseGrid superposition_hologram(std::span<const RampTerm> terms,
                                                       std::size_t n, std::size_t m);

} // namespace twz::holo
