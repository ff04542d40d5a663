#include "twz/optics/twzf.hpp"

#include "twz/core/binary_io.hpp"

namespace twz::optics {

std::vector<std::uint8_t> encode_twzf(const TwzfArray& array) {
  const std::size_t per = array.dtype == TwzfArray::DType::Complex ? 2 : 1;
  if (array.data.size() != per * array.rows * array.cols) {
    throw Error("TWZF: payload size does not match rows×cols");
  }
  ByteWriter w;
  w.put_bytes("TWZF");
  w.put_u8(kTwzfVersion);
  w.put_u8(static_cast<std::uint8_t>(array.dtype));
  w.put_u32(array.rows);
  w.put_u32(array.cols);
  for (const float f : array.data) {
    w.put_f32(f);
  }
  return w.take();
}

TwzfArray decode_twzf(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (r.get_bytes(4) != "TWZF") {
    throw FormatError(FormatError::Kind::BadMagic, "TWZF: bad magic");
  }
  if (const auto version = r.get_u8(); version != kTwzfVersion) {
    throw FormatError(FormatError::Kind::Unsupported,
                      "TWZF: unsupported version " + std::to_string(version));
  }
  TwzfArray a;
  const auto dtype = r.get_u8();
  if (dtype > 1) {
    throw FormatError(FormatError::Kind::Unsupported,
                      "TWZF: unsupported dtype " + std::to_string(dtype));
  }
  a.dtype = static_cast<TwzfArray::DType>(dtype);
  a.rows = r.get_u32();
  a.cols = r.get_u32();
  const std::size_t count =
      std::size_t{a.rows} * a.cols * (a.dtype == TwzfArray::DType::Complex ? 2 : 1);
  if (r.remaining() < count * 4) {
    throw FormatError(FormatError::Kind::Truncation, "TWZF: truncated payload");
  }
  a.data.resize(count);
  for (float& f : a.data) {
    f = r.get_f32();
  }
  if (r.remaining() != 0) {
    throw FormatError(FormatError::Kind::Malformed, "TWZF: trailing bytes");
  }
  return a;
}

TwzfArray to_twzf(const PhaseGrid& grid) {
  TwzfArray a;
  a.rows = a.cols = static_cast<std::uint32_t>(grid.size());
  a.data.reserve(grid.size() * grid.size());
  for (const std::uint32_t u : grid.raw_units()) {
    a.data.push_back(static_cast<float>(PhaseGrid::to_radians(u)));
  }
  return a;
}

TwzfArray to_twzf(const RealGrid& grid) {
  TwzfArray a;
  a.rows = a.cols = static_cast<std::uint32_t>(grid.size());
  a.data.reserve(grid.size() * grid.size());
  for (const double v : grid.values()) {
    a.data.push_back(static_cast<float>(v));
  }
  return a;
}

TwzfArray to_twzf(const ComplexField& field) {
  TwzfArray a;
  a.dtype = TwzfArray::DType::Complex;
  a.rows = a.cols = static_cast<std::uint32_t>(field.size());
  a.data.reserve(2 * field.size() * field.size());
  for (const cdouble& e : field.values()) {
    a.data.push_back(static_cast<float>(e.real()));
    a.data.push_back(static_cast<float>(e.imag()));
  }
  return a;
}

PhaseGrid phase_grid_from_twzf(const TwzfArray& array) {
  if (array.dtype != TwzfArray::DType::Real || array.rows != array.cols) {
    throw FormatError(FormatError::Kind::Malformed, "TWZF: phase grid must be square and real");
  }
  std::vector<double> values(array.data.begin(), array.data.end());
  return PhaseGrid::from_radians(array.rows, values);
}

ComplexField field_from_twzf(const TwzfArray& array) {
  if (array.dtype != TwzfArray::DType::Complex || array.rows != array.cols) {
    throw FormatError(FormatError::Kind::Malformed, "TWZF: field must be square and complex");
  }
  ComplexField f(array.rows);
  auto v = f.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = cdouble(array.data[2 * i], array.data[2 * i + 1]);
  }
  return f;
}

void write_twzf(const std::string& path, const TwzfArray& array) {
  write_file(path, encode_twzf(array));
}

TwzfArray read_twzf(const std::string& path) { return decode_twzf(read_file(path)); }

} // namespace twz::optics
