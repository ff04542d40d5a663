#pragma once

#include "twz/optics/grid.hpp"

#include <cstddef>

namespace twz::optics::fft {

enum class Direction { Forward, Backward };

/// Unnormalized in-place 2D DFT of an m×m row-major array (FFTW sign
/// convention: Forward uses exp(-2πi·k·x/m)). `data` must be 64-byte aligned.
void transform(cdouble* data, std::size_t m, Direction dir);

/// Same transform, but only the rows in [0, band/2) and [m - band/2, m) may be
/// nonzero on input (a centered band×band aperture embedded in FFT order).
/// Skips the all-zero row transforms.
void transform_band_input(cdouble* data, std::size_t m, std::size_t band, Direction dir);

/// Same transform, but only output columns and rows in the centered band (FFT
/// order) are required; other outputs are left unspecified.
void transform_band_output(cdouble* data, std::size_t m, std::size_t band, Direction dir);

} // namespace twz::optics::fft
