#pragma once

#include "twz/core/error.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace twz {

/// Little-endian writer used by every binary format in the project.
class ByteWriter {
public:
  void put_bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
  void put_u8(std::uint8_t v) { buf_.push_back(v); }
  void put_u16(std::uint16_t v) {
    for (unsigned i = 0; i < 2; ++i) {
      buf_.push_back(static_cast<std::uint8_t>(v >> (8U * i)));
    }
  }
  void put_u32(std::uint32_t v) {
    for (unsigned i = 0; i < 4; ++i) {
      buf_.push_back(static_cast<std::uint8_t>(v >> (8U * i)));
    }
  }
  void put_f32(float v) { put_u32(std::bit_cast<std::uint32_t>(v)); }

  [[nodiscard]] const std::vector<std::uint8_t>& bytes() const noexcept { return buf_; }
  [[nodiscard]] std::vector<std::uint8_t> take() noexcept { return std::move(buf_); }

private:
  std::vector<std::uint8_t> buf_;
};

/// Bounds-checked little-endian reader; running off the end raises
/// FormatError::Truncation.
class ByteReader {
public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  [[nodiscard]] std::size_t remaining() const noexcept { return data_.size() - pos_; }
  [[nodiscard]] std::size_t position() const noexcept { return pos_; }

  [[nodiscard]] std::string get_bytes(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  [[nodiscard]] std::uint8_t get_u8() {
    need(1);
    return data_[pos_++];
  }
  [[nodiscard]] std::uint16_t get_u16() {
    need(2);
    std::uint16_t v = 0;
    for (unsigned i = 0; i < 2; ++i) {
      v = static_cast<std::uint16_t>(v | (std::uint16_t{data_[pos_ + i]} << (8U * i)));
    }
    pos_ += 2;
    return v;
  }
  [[nodiscard]] std::uint32_t get_u32() {
    need(4);
    std::uint32_t v = 0;
    for (unsigned i = 0; i < 4; ++i) {
      v |= std::uint32_t{data_[pos_ + i]} << (8U * i);
    }
    pos_ += 4;
    return v;
  }
  [[nodiscard]] float get_f32() { return std::bit_cast<float>(get_u32()); }

private:
  void need(std::size_t n) const {
    if (remaining() < n) {
      throw FormatError(FormatError::Kind::Truncation,
                        "truncated input: need " + std::to_string(n) + " bytes at offset " +
                            std::to_string(pos_) + ", have " + std::to_string(remaining()));
    }
  }

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

/// Whole-file helpers; throw twz::Error when the file cannot be opened.
[[nodiscard]] std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const std::uint8_t> bytes);

} // namespace twz
