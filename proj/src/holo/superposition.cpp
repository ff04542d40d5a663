#include "twz/holo/superposition.hpp"

#include "twz/optics/fft.hpp"

#include <array>
#include <cmath>
#include <numbers>

namespace twz::holo {

namespace {

// Kernel exp(-d²/(4τ)) in grid pixels. With M ≥ 2N the aliased images sit
// below 1e-10 and the truncated tails below 1e-13.
constexpr double kTau = 0.8;
constexpr int kHalfWidth = 10;
constexpr int kTaps = 2 * kHalfWidth + 1;

std::size_t wrap(long long i, std::size_t m) {
  const auto mm = static_cast<long long>(m);
  i %= mm;
  return static_cast<std::size_t>(i < 0 ? i + mm : i);
}

} // namespace

optics::Grid<optics::cdouble> superpose_ramps(std::span<const RampTerm> terms, std::size_t n,
                                              std::size_t m) {
  using optics::cdouble;
  if (!optics::is_power_of_two(n) || !optics::is_power_of_two(m) || m < 2 * n) {
    throw Error("superpose_ramps: need power-of-two sizes with M >= 2N");
  }
  optics::ComplexField grid(m);
  const double half_m = static_cast<double>(m) / 2.0;
  std::array<double, kTaps> kx{};
  std::array<double, kTaps> ky{};
  for (const RampTerm& t : terms) {
    // Centered coordinate x' = x - M/2 lives at FFT index x' mod M.
    const double cx = t.x - half_m;
    const double cy = t.y - half_m;
    const auto ix = static_cast<long long>(std::floor(cx));
    const auto iy = static_cast<long long>(std::floor(cy));
    for (int k = 0; k < kTaps; ++k) {
      const double dx = static_cast<double>(ix + k - kHalfWidth) - cx;
      const double dy = static_cast<double>(iy + k - kHalfWidth) - cy;
      kx[k] = std::exp(-dx * dx / (4.0 * kTau));
      ky[k] = std::exp(-dy * dy / (4.0 * kTau));
    }
    for (int b = 0; b < kTaps; ++b) {
      const std::size_t row = wrap(iy + b - kHalfWidth, m);
      const cdouble c = t.coefficient * ky[b];
      for (int a = 0; a < kTaps; ++a) {
        grid(wrap(ix + a - kHalfWidth, m), row) += c * kx[a];
      }
    }
  }
  optics::fft::transform_band_output(grid.data(), m, n, optics::fft::Direction::Backward);

  // Undo the kernel's transform sqrt(4πτ)·exp(-τ(2πk/M)²) on each axis.
  const auto half_n = static_cast<long long>(n / 2);
  std::vector<double> deconv(n);
  const double w = 2.0 * std::numbers::pi / static_cast<double>(m);
  for (std::size_t u = 0; u < n; ++u) {
    const double k = static_cast<double>(static_cast<long long>(u) - half_n);
    deconv[u] = std::exp(kTau * w * w * k * k) / std::sqrt(4.0 * std::numbers::pi * kTau);
  }
  optics::Grid<cdouble> out(n);
  for (std::size_t v = 0; v < n; ++v) {
    const std::size_t row = wrap(static_cast<long long>(v) - half_n, m);
    for (std::size_t u = 0; u < n; ++u) {
      out(u, v) = grid(wrap(static_cast<long long>(u) - half_n, m), row) * (deconv[u] * deconv[v]);
    }
  }
  return out;
}

optics::PhaseGrid superposition_hologram(std::span<const RampTerm> terms, std::size_t n,
                                         std::size_t m) {
  const auto s = superpose_ramps(terms, n, m);
  optics::PhaseGrid h(n);
  for (std::size_t v = 0; v < n; ++v) {
    for (std::size_t u = 0; u < n; ++u) {
      h.set(u, v, std::arg(s(u, v)));
    }
  }
  return h;
}

} // namespace twz::holo
