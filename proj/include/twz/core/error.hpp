#pragma once

#include <stdexcept>
#include <string>

namespace twz {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Raised by every binary/text decoder (TWZF, TWZS, TWZP, PLAN, CSV).
class FormatError : public Error {
public:
  enum class Kind { BadMagic, Unsupported, Truncation, Malformed };

  FormatError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

  [[nodiscard]] Kind kind() const noexcept { return kind_; }

private:
  Kind kind_;
};

} // namespace twz
