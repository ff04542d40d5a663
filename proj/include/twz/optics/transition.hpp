#pragma once

#include "twz/optics/tweezer.hpp"

#include <utility>
#include <vector>

namespace twz::optics {

/// One SLM refresh: the old tweezer set fades out with response time T while
/// the new one fades in.
struct TransitionSpec {
  double response_time_ms = 1.0;
  double elapsed_ms = 0.0;
  std::vector<TweezerTarget> from;
  std::vector<TweezerTarget> to;
  double waist = 2.5;
};

/// (e^{-t/T}, 1 - e^{-t/T}). Throws unless T > 0 and t >= 0.
[[nodiscard]] std::pair<double, double> transition_weights(double elapsed_ms,
                                                           double response_time_ms);

/// E(r, t) = e^{-t/T}·E₁(r) + (1 - e^{-t/T})·E₂(r), with E₁ and E₂ the
/// Gaussian tweezer fields (phases included) of the two sets.
[[nodiscard]] ComplexField transition_field(const TransitionSpec& spec, std::size_t m);

} // namespace twz::optics
