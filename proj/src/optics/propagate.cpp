#include "twz/optics/propagate.hpp"

#include "twz/optics/fft.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace twz::optics {

namespace {

void check_sizes(const PhaseGrid& hologram, const RealGrid& aperture, std::size_t oversample) {
  if (!is_power_of_two(hologram.size())) {
    throw Error("hologram size must be a power of two");
  }
  if (aperture.size() != hologram.size()) {
    throw Error("aperture size " + std::to_string(aperture.size()) +
                " does not match hologram size " + std::to_string(hologram.size()));
  }
  if (!is_power_of_two(oversample)) {
    throw Error("oversample factor must be a power of two >= 1");
  }
}

/// FFT-order index of centered coordinate c in [-m/2, m/2).
constexpr std::size_t wrap_index(std::ptrdiff_t c, std::size_t m) noexcept {
  return c < 0 ? static_cast<std::size_t>(c + static_cast<std::ptrdiff_t>(m))
               : static_cast<std::size_t>(c);
}

ComplexField swap_halves(const ComplexField& f) {
  const std::size_t m = f.size();
  const std::size_t h = m / 2;
  ComplexField out(m);
  for (std::size_t y = 0; y < m; ++y) {
    const std::size_t yy = (y + h) % m;
    for (std::size_t x = 0; x < m; ++x) {
      out((x + h) % m, yy) = f(x, y);
    }
  }
  return out;
}

} // namespace

RealGrid make_aperture(std::size_t n, const Aperture& aperture) {
  RealGrid a(n, 0.0);
  const double half = static_cast<double>(n) / 2.0;
  for (std::size_t v = 0; v < n; ++v) {
    const double vc = static_cast<double>(v) - half;
    for (std::size_t u = 0; u < n; ++u) {
      const double uc = static_cast<double>(u) - half;
      const double r2 = uc * uc + vc * vc;
      switch (aperture.kind) {
      case Aperture::Kind::Square:
        a(u, v) = 1.0;
        break;
      case Aperture::Kind::Disk:
        a(u, v) = r2 < half * half ? 1.0 : 0.0;
        break;
      case Aperture::Kind::Gaussian: {
        const double w = aperture.gaussian_waist * half;
        a(u, v) = r2 < half * half ? std::exp(-r2 / (w * w)) : 0.0;
        break;
      }
      }
    }
  }
  return a;
}

void propagate_fft_order(const PhaseGrid& hologram, const RealGrid& aperture,
                         std::size_t oversample, ComplexField& out) {
  check_sizes(hologram, aperture, oversample);
  const std::size_t n = hologram.size();
  const std::size_t m = n * oversample;
  if (out.size() != m) {
    out = ComplexField(m);
  } else {
    std::fill(out.values().begin(), out.values().end(), cdouble{});
  }
  const auto half = static_cast<std::ptrdiff_t>(n / 2);
  for (std::size_t v = 0; v < n; ++v) {
    const std::size_t row = wrap_index(static_cast<std::ptrdiff_t>(v) - half, m);
    for (std::size_t u = 0; u < n; ++u) {
      const double amp = aperture(u, v);
      if (amp == 0.0) {
        continue;
      }
      const double phi = hologram(u, v);
      out(wrap_index(static_cast<std::ptrdiff_t>(u) - half, m), row) =
          cdouble(amp * std::cos(phi), amp * std::sin(phi));
    }
  }
  fft::transform_band_input(out.data(), m, n, fft::Direction::Forward);
  const double scale = 1.0 / static_cast<double>(m);
  for (cdouble& e : out.values()) {
    e *= scale;
  }
}

ComplexField propagate(const PhaseGrid& hologram, const RealGrid& aperture,
                       std::size_t oversample) {
  ComplexField f;
  propagate_fft_order(hologram, aperture, oversample, f);
  return fft_order_to_centered(f);
}

void back_propagate_fft_order(ComplexField& field, std::size_t n, Grid<cdouble>& slm_out) {
  const std::size_t m = field.size();
  fft::transform_band_output(field.data(), m, n, fft::Direction::Backward);
  if (slm_out.size() != n) {
    slm_out = Grid<cdouble>(n);
  }
  const double scale = 1.0 / static_cast<double>(m);
  const auto half = static_cast<std::ptrdiff_t>(n / 2);
  for (std::size_t v = 0; v < n; ++v) {
    const std::size_t row = wrap_index(static_cast<std::ptrdiff_t>(v) - half, m);
    for (std::size_t u = 0; u < n; ++u) {
      slm_out(u, v) = field(wrap_index(static_cast<std::ptrdiff_t>(u) - half, m), row) * scale;
    }
  }
}

ComplexField fft_order_to_centered(const ComplexField& f) { return swap_halves(f); }
ComplexField centered_to_fft_order(const ComplexField& f) { return swap_halves(f); }

PhaseGrid fresnel_phase(std::size_t n, double c) {
  PhaseGrid g(n);
  const double half = static_cast<double>(n) / 2.0;
  const double inv = 1.0 / (half * half);
  for (std::size_t v = 0; v < n; ++v) {
    const double vc = static_cast<double>(v) - half;
    for (std::size_t u = 0; u < n; ++u) {
      const double uc = static_cast<double>(u) - half;
      g.set(u, v, c * ((uc * uc + vc * vc) * inv));
    }
  }
  return g;
}

ComplexField propagate_at_defocus(const PhaseGrid& hologram, double c, const RealGrid& aperture,
                                  std::size_t oversample) {
  if (c == 0.0) {
    return propagate(hologram, aperture, oversample);
  }
  return propagate(compose(hologram, fresnel_phase(hologram.size(), -c)), aperture, oversample);
}

cdouble sample_bilinear(const ComplexField& field, double x, double y) noexcept {
  const auto m = static_cast<double>(field.size());
  x = std::clamp(x, 0.0, m - 1.0);
  y = std::clamp(y, 0.0, m - 1.0);
  const auto x0 = static_cast<std::size_t>(std::floor(x));
  const auto y0 = static_cast<std::size_t>(std::floor(y));
  const std::size_t x1 = std::min(x0 + 1, field.size() - 1);
  const std::size_t y1 = std::min(y0 + 1, field.size() - 1);
  const double fx = x - static_cast<double>(x0);
  const double fy = y - static_cast<double>(y0);
  return (1.0 - fx) * (1.0 - fy) * field(x0, y0) + fx * (1.0 - fy) * field(x1, y0) +
         (1.0 - fx) * fy * field(x0, y1) + fx * fy * field(x1, y1);
}

} // namespace twz::optics
