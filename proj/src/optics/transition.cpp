#include "twz/optics/transition.hpp"

#include <cmath>

namespace twz::optics {

std::pair<double, double> transition_weights(double elapsed_ms, double response_time_ms) {
  if (!(response_time_ms > 0.0)) {
    throw Error("transition: response time must be positive");
  }
  if (!(elapsed_ms >= 0.0)) {
    throw Error("transition: elapsed time must be non-negative");
  }
  const double old_weight = std::exp(-elapsed_ms / response_time_ms);
  return {old_weight, -std::expm1(-elapsed_ms / response_time_ms)};
}

ComplexField transition_field(const TransitionSpec& spec, std::size_t m) {
  const auto [a, b] = transition_weights(spec.elapsed_ms, spec.response_time_ms);
  const ComplexField e1 = analytic_tweezer_field(spec.from, spec.waist, m);
  const ComplexField e2 = analytic_tweezer_field(spec.to, spec.waist, m);
  ComplexField out(m);
  auto o = out.values();
  auto v1 = e1.values();
  auto v2 = e2.values();
  for (std::size_t i = 0; i < o.size(); ++i) {
    o[i] = a * v1[i] + b * v2[i];
  }
  return out;
}

} // namespace twz::optics
