#pragma once

#include "twz/optics/grid.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace twz::optics {

/// TWZF field/grid container:
///   "TWZF" | u8 version (1) | u8 dtype (0 = f32 real, 1 = f32 complex
///   interleaved) | u32 LE rows | u32 LE cols | row-major f32 LE payload.
struct TwzfArray {
  enum class DType : std::uint8_t { Real = 0, Complex = 1 };
  DType dtype = DType::Real;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  /// rows·cols values, or 2·rows·cols interleaved (re, im) for Complex.
  std::vector<float> data;
};

inline constexpr std::uint8_t kTwzfVersion = 1;

[[nodiscard]] std::vector<std::uint8_t> encode_twzf(const TwzfArray& array);
[[nodiscard]] TwzfArray decode_twzf(std::span<const std::uint8_t> bytes);

[[nodiscard]] TwzfArray to_twzf(const PhaseGrid& grid);
[[nodiscard]] TwzfArray to_twzf(const RealGrid& grid);
[[nodiscard]] TwzfArray to_twzf(const ComplexField& field);

/// Square real array → PhaseGrid (radians re-quantized).
[[nodiscard]] PhaseGrid phase_grid_from_twzf(const TwzfArray& array);
[[nodiscard]] ComplexField field_from_twzf(const TwzfArray& array);

void write_twzf(const std::string& path, const TwzfArray& array);
[[nodiscard]] TwzfArray read_twzf(const std::string& path);

} // namespace twz::optics
