#pragma once

#include "twz/optics/grid.hpp"

#include <cstddef>

namespace twz::optics {

/// Incident-beam amplitude on the SLM.
struct Aperture {
  enum class Kind { Disk, Square, Gaussian };
  Kind kind = Kind::Disk;
  /// 1/e amplitude radius for Kind::Gaussian, as a fraction of N/2. The
  /// Gaussian is clipped to the inscribed disk.
  double gaussian_waist = 0.8;
};

/// Amplitude grid for the aperture. The disk is the set u'^2 + v'^2 < (N/2)^2
/// of centered pixel coordinates, which is point symmetric, so focal spots of
/// unmodulated phase are real.
[[nodiscard]] RealGrid make_aperture(std::size_t n, const Aperture& aperture);

/// Centered unitary DFT of aperture·exp(i·hologram) zero-padded to M = s·N:
///   E(x', y') = (1/M) Σ g(u', v') exp(-2πi (u'x' + v'y') / M)
/// with u' = u - N/2 and x' = x - M/2. Total power is preserved.
[[nodiscard]] ComplexField propagate(const PhaseGrid& hologram, const RealGrid& aperture,
                                     std::size_t oversample);

/// Same as propagate() but leaves the result in FFT order (optical axis at
/// pixel (0, 0)); used by the iterative loops.
void propagate_fft_order(const PhaseGrid& hologram, const RealGrid& aperture,
                         std::size_t oversample, ComplexField& out);

/// Adjoint of propagate_fft_order restricted to the N×N SLM plane: returns the
/// complex SLM-plane field (row-major, centered coordinates) of an FFT-order
/// focal field. `field` is overwritten.
void back_propagate_fft_order(ComplexField& field, std::size_t n, Grid<cdouble>& slm_out);

/// Moves between FFT order and centered order (swap of half planes).
[[nodiscard]] ComplexField fft_order_to_centered(const ComplexField& f);
[[nodiscard]] ComplexField centered_to_fft_order(const ComplexField& f);

/// Quadratic (lens) phase c·ρ², ρ = 1 at the aperture edge, wrapped.
[[nodiscard]] PhaseGrid fresnel_phase(std::size_t n, double c);

/// Field at the plane addressed by defocus coefficient c:
/// propagate(hologram ⊕ fresnel_phase(-c)).
[[nodiscard]] ComplexField propagate_at_defocus(const PhaseGrid& hologram, double c,
                                                const RealGrid& aperture, std::size_t oversample);

/// Bilinear interpolation of a centered field at real-valued (x, y); clamps to
/// the grid.
[[nodiscard]] cdouble sample_bilinear(const ComplexField& field, double x, double y) noexcept;

} // namespace twz::optics
