#include "twz/optics/tweezer.hpp"

#include "twz/optics/propagate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace twz::optics {

ComplexField analytic_tweezer_field(std::span<const TweezerTarget> targets, double waist,
                                    std::size_t m) {
  if (targets.empty()) {
    throw Error("analytic_tweezer_field: empty target list");
  }
  if (!(waist > 0.0)) {
    throw Error("analytic_tweezer_field: waist must be positive");
  }
  ComplexField field(m);
  // exp(-40) ~ 4e-18: beyond this radius a spot contributes nothing at double precision
  const double reach = waist * std::sqrt(40.0);
  const auto last = static_cast<double>(m - 1);
  std::vector<double> gx;
  std::vector<double> gy;
  for (const TweezerTarget& t : targets) {
    const auto x0 = static_cast<std::size_t>(std::clamp(std::ceil(t.x - reach), 0.0, last));
    const auto x1 = static_cast<std::size_t>(std::clamp(std::floor(t.x + reach), 0.0, last));
    const auto y0 = static_cast<std::size_t>(std::clamp(std::ceil(t.y - reach), 0.0, last));
    const auto y1 = static_cast<std::size_t>(std::clamp(std::floor(t.y + reach), 0.0, last));
    gx.resize(x1 - x0 + 1);
    gy.resize(y1 - y0 + 1);
    for (std::size_t x = x0; x <= x1; ++x) {
      const double d = static_cast<double>(x) - t.x;
      gx[x - x0] = std::exp(-d * d / (waist * waist));
    }
    for (std::size_t y = y0; y <= y1; ++y) {
      const double d = static_cast<double>(y) - t.y;
      gy[y - y0] = std::exp(-d * d / (waist * waist));
    }
    const cdouble c = std::polar(t.weight, t.phase.value_or(0.0));
    for (std::size_t y = y0; y <= y1; ++y) {
      const cdouble cy = c * gy[y - y0];
      for (std::size_t x = x0; x <= x1; ++x) {
        field(x, y) += cy * gx[x - x0];
      }
    }
  }
  return field;
}

namespace {

struct WindowSums {
  double weight = 0.0;
  double sx = 0.0;
  double sy = 0.0;
};

WindowSums window_sums(const ComplexField& field, double cx, double cy, double radius) {
  WindowSums s;
  const double reach = radius + 0.5;
  const auto x0 = static_cast<std::size_t>(std::ceil(cx - reach));
  const auto x1 = static_cast<std::size_t>(std::floor(cx + reach));
  const auto y0 = static_cast<std::size_t>(std::ceil(cy - reach));
  const auto y1 = static_cast<std::size_t>(std::floor(cy + reach));
  for (std::size_t y = y0; y <= y1; ++y) {
    const double dy = static_cast<double>(y) - cy;
    for (std::size_t x = x0; x <= x1; ++x) {
      const double dx = static_cast<double>(x) - cx;
      const double w = std::clamp(reach - std::hypot(dx, dy), 0.0, 1.0);
      if (w == 0.0) {
        continue;
      }
      const double i = std::norm(field(x, y)) * w;
      s.weight += i;
      s.sx += i * static_cast<double>(x);
      s.sy += i * static_cast<double>(y);
    }
  }
  return s;
}

void check_windows(std::span<const TweezerTarget> expected, double radius, std::size_t m) {
  const double reach = radius + 0.5;
  const double hi = static_cast<double>(m - 1);
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const auto& t = expected[i];
    if (t.x - reach < 0.0 || t.y - reach < 0.0 || t.x + reach > hi || t.y + reach > hi) {
      throw Error("measure_tweezers: window " + std::to_string(i) + " leaves the grid");
    }
  }
  std::vector<std::size_t> order(expected.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return expected[a].x < expected[b].x; });
  const double min_sep = 2.0 * reach;
  for (std::size_t a = 0; a < order.size(); ++a) {
    for (std::size_t b = a + 1; b < order.size(); ++b) {
      const auto& p = expected[order[a]];
      const auto& q = expected[order[b]];
      if (q.x - p.x >= min_sep) {
        break;
      }
      if (std::hypot(q.x - p.x, q.y - p.y) < min_sep) {
        throw Error("measure_tweezers: windows " + std::to_string(order[a]) + " and " +
                    std::to_string(order[b]) + " overlap");
      }
    }
  }
}

} // namespace

std::vector<TweezerMeasurement> measure_tweezers(const ComplexField& field,
                                                 std::span<const TweezerTarget> expected,
                                                 const MeasureOptions& options) {
  check_windows(expected, options.window_radius, field.size());
  const double total = total_power(field);
  std::vector<TweezerMeasurement> out(expected.size());
  const double lo = options.window_radius + 0.5;
  const double hi = static_cast<double>(field.size() - 1) - lo;
  const double drift = 0.5 * options.window_radius;
  for (std::size_t i = 0; i < expected.size(); ++i) {
    double cx = expected[i].x;
    double cy = expected[i].y;
    WindowSums s = window_sums(field, cx, cy, options.window_radius);
    const double power = total > 0.0 ? s.weight / total : 0.0;
    TweezerMeasurement& m = out[i];
    if (!(power >= options.power_floor)) {
      if (options.throw_on_missing) {
        throw NoPeak(i, power);
      }
      m.missing = true;
    }
    for (int it = 0; it < options.recenter_iterations && s.weight > 0.0; ++it) {
      // the window never drifts by more than half its radius from the request
      cx = std::clamp(s.sx / s.weight, std::max(lo, expected[i].x - drift),
                      std::min(hi, expected[i].x + drift));
      cy = std::clamp(s.sy / s.weight, std::max(lo, expected[i].y - drift),
                      std::min(hi, expected[i].y + drift));
      s = window_sums(field, cx, cy, options.window_radius);
    }
    if (s.weight > 0.0) {
      m.x = s.sx / s.weight;
      m.y = s.sy / s.weight;
    } else {
      m.x = expected[i].x;
      m.y = expected[i].y;
    }
    m.power = total > 0.0 ? std::clamp(s.weight / total, 0.0, 1.0) : 0.0;
    m.phase = std::arg(sample_bilinear(field, m.x, m.y));
    if (m.phase >= std::numbers::pi) {
      m.phase = -std::numbers::pi;
    }
  }
  return out;
}

} // namespace twz::optics
