#pragma once

#include <cmath>

namespace twz {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2& operator+=(const Vec2& o) noexcept {
    x += o.x;
    y += o.y;
    return *this;
  }
  constexpr Vec2& operator-=(const Vec2& o) noexcept {
    x -= o.x;
    y -= o.y;
    return *this;
  }
  friend constexpr Vec2 operator+(Vec2 a, const Vec2& b) noexcept { return a += b; }
  friend constexpr Vec2 operator-(Vec2 a, const Vec2& b) noexcept { return a -= b; }
  friend constexpr Vec2 operator*(double s, const Vec2& v) noexcept { return {s * v.x, s * v.y}; }
  friend constexpr bool operator==(const Vec2&, const Vec2&) = default;
};

[[nodiscard]] constexpr double dot(const Vec2& a, const Vec2& b) noexcept {
  return a.x * b.x + a.y * b.y;
}
[[nodiscard]] constexpr double norm2(const Vec2& v) noexcept { return dot(v, v); }
[[nodiscard]] inline double norm(const Vec2& v) noexcept { return std::hypot(v.x, v.y); }
[[nodiscard]] constexpr double dist2(const Vec2& a, const Vec2& b) noexcept {
  return norm2(a - b);
}
[[nodiscard]] inline double dist(const Vec2& a, const Vec2& b) noexcept { return norm(a - b); }

/// Rotation by `angle` radians about `center`.
[[nodiscard]] inline Vec2 rotate(const Vec2& p, const Vec2& center, double angle) noexcept {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  const Vec2 d = p - center;
  return {center.x + c * d.x - s * d.y, center.y + s * d.x + c * d.y};
}

} // namespace twz
