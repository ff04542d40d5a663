#pragma once

#include "twz/core/error.hpp"

#include <complex>
#include <cstddef>
#include <cstdint>
#include <new>
#include <numbers>
#include <span>
#include <vector>

namespace twz::optics {

using cdouble = std::complex<double>;

/// 64-byte aligned allocator so any buffer can be handed to FFTW plans.
template <typename T> struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t alignment{64};

  AlignedAllocator() noexcept = default;
  template <typename U> AlignedAllocator(const AlignedAllocator<U>& /*unused*/) noexcept {}

  [[nodiscard]] T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), alignment));
  }
  void deallocate(T* p, std::size_t /*n*/) noexcept { ::operator delete(p, alignment); }

  template <typename U> bool operator==(const AlignedAllocator<U>& /*unused*/) const noexcept {
    return true;
  }
};

template <typename T> using aligned_vector = std::vector<T, AlignedAllocator<T>>;

[[nodiscard]] constexpr bool is_power_of_two(std::size_t n) noexcept {
  return n != 0 && (n & (n - 1)) == 0;
}

/// Square row-major grid. Pixel (x, y) is column x, row y.
template <typename T> class Grid {
public:
  Grid() = default;
  explicit Grid(std::size_t n, T fill = T{}) : n_(n), data_(n * n, fill) {}

  [[nodiscard]] std::size_t size() const noexcept { return n_; }
  [[nodiscard]] T& operator()(std::size_t x, std::size_t y) noexcept { return data_[y * n_ + x]; }
  [[nodiscard]] const T& operator()(std::size_t x, std::size_t y) const noexcept {
    return data_[y * n_ + x];
  }
  [[nodiscard]] std::span<T> values() noexcept { return data_; }
  [[nodiscard]] std::span<const T> values() const noexcept { return data_; }
  [[nodiscard]] T* data() noexcept { return data_.data(); }
  [[nodiscard]] const T* data() const noexcept { return data_.data(); }

  friend bool operator==(const Grid& a, const Grid& b) { return a.n_ == b.n_ && a.data_ == b.data_; }

private:
  std::size_t n_ = 0;
  aligned_vector<T> data_;
};

using RealGrid = Grid<double>;

/// Sampled complex field on the (expanded) focal-plane grid; pixel (M/2, M/2)
/// is the optical axis.
using ComplexField = Grid<cdouble>;

[[nodiscard]] double total_power(const ComplexField& field) noexcept;
[[nodiscard]] double total_power(const RealGrid& amplitude) noexcept;

/// Phase-only hologram. Values live on a 2^32-level lattice per turn, so
/// composition is exact modular addition and every value is in [-pi, pi).
class PhaseGrid {
public:
  static constexpr double kUnit = 2.0 * std::numbers::pi / 4294967296.0;

  PhaseGrid() = default;
  /// All-zero grid; n must be a power of two.
  explicit PhaseGrid(std::size_t n);

  /// Wraps and quantizes arbitrary finite radians.
  static PhaseGrid from_radians(std::size_t n, std::span<const double> radians);

  [[nodiscard]] static std::uint32_t to_units(double radians);
  [[nodiscard]] static double to_radians(std::uint32_t units) noexcept {
    return static_cast<double>(static_cast<std::int32_t>(units)) * kUnit;
  }

  [[nodiscard]] std::size_t size() const noexcept { return n_; }
  [[nodiscard]] double operator()(std::size_t u, std::size_t v) const noexcept {
    return to_radians(units_[v * n_ + u]);
  }
  void set(std::size_t u, std::size_t v, double radians) { units_[v * n_ + u] = to_units(radians); }
  [[nodiscard]] std::uint32_t units(std::size_t u, std::size_t v) const noexcept {
    return units_[v * n_ + u];
  }
  void set_units(std::size_t u, std::size_t v, std::uint32_t value) noexcept {
    units_[v * n_ + u] = value;
  }
  [[nodiscard]] std::span<const std::uint32_t> raw_units() const noexcept { return units_; }
  [[nodiscard]] std::vector<double> radians() const;

  friend bool operator==(const PhaseGrid&, const PhaseGrid&) = default;

private:
  std::size_t n_ = 0;
  std::vector<std::uint32_t> units_;
};

/// Pixelwise phase sum (the ⊕ of two holograms), exact modulo 2π.
[[nodiscard]] PhaseGrid compose(const PhaseGrid& a, const PhaseGrid& b);

} // namespace twz::optics
