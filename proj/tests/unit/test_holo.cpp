#include "twz/core/rng.hpp"
#include "twz/core/stats.hpp"
#include "twz/holo/superposition.hpp"
#include "twz/holo/synthesis.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace twz;
using namespace twz::holo;
using optics::cdouble;

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<TweezerTarget> grid_targets(int side, double pitch, double center) {
  std::vector<TweezerTarget> t;
  const double origin = center - pitch * (side - 1) / 2.0;
  for (int j = 0; j < side; ++j) {
    for (int i = 0; i < side; ++i) {
      t.push_back({origin + pitch * i, origin + pitch * j, std::nullopt, 1.0});
    }
  }
  return t;
}

} // namespace

TEST(Superposition, MatchesDirectSum) {
  const std::size_t n = 16;
  const std::size_t m = 64;
  const std::vector<RampTerm> terms = {
      {40.3, 21.7, {1.0, 0.0}}, {12.0, 50.5, {0.0, -0.5}}, {33.25, 33.75, {0.3, 0.4}}};
  const auto s = superpose_ramps(terms, n, m);
  double worst = 0.0;
  double scale = 0.0;
  for (std::size_t v = 0; v < n; ++v) {
    for (std::size_t u = 0; u < n; ++u) {
      const double up = static_cast<double>(u) - n / 2.0;
      const double vp = static_cast<double>(v) - n / 2.0;
      cdouble direct{};
      for (const RampTerm& t : terms) {
        const double arg = 2.0 * kPi * (up * (t.x - m / 2.0) + vp * (t.y - m / 2.0)) / m;
        direct += t.coefficient * std::polar(1.0, arg);
      }
      worst = std::max(worst, std::abs(s(u, v) - direct));
      scale = std::max(scale, std::abs(direct));
    }
  }
  EXPECT_LT(worst / scale, 1e-8);
}

TEST(Superposition, SingleTermIsPureRamp) {
  const std::vector<RampTerm> terms = {{70.0, 64.0, {1.0, 0.0}}};
  const optics::PhaseGrid h = superposition_hologram(terms, 16, 128);
  // Shift of 6 pixels at M = 128: neighbouring SLM pixels differ by 2π·6/128.
  for (std::size_t u = 1; u < 16; ++u) {
    EXPECT_NEAR(wrap_phase(h(u, 3) - h(u - 1, 3)), 2.0 * kPi * 6.0 / 128.0, 1e-8);
  }
}

TEST(Synthesis, EmptyAndUnspecified) {
  SynthesisConfig cfg;
  cfg.slm_size = 32;
  EXPECT_THROW((void)wgs({}, cfg), EmptyTargets);
  EXPECT_THROW((void)synthesize_pinned({}, cfg), EmptyTargets);
  const std::vector<TweezerTarget> t = {{128.0, 128.0, 0.0, 1.0}, {140.0, 128.0, std::nullopt, 1.0}};
  EXPECT_THROW((void)synthesize_pinned(t, cfg), UnspecifiedPhase);
}

TEST(Synthesis, UniformityOfList) {
  const std::vector<double> p = {1.0, 1.0, 1.0};
  EXPECT_DOUBLE_EQ(uniformity(p), 0.0);
  const std::vector<double> q = {1.0, 3.0};
  EXPECT_DOUBLE_EQ(uniformity(q), 0.5);
  EXPECT_THROW((void)uniformity(std::span<const double>{}), Error);
}

TEST(Synthesis, WgsSmallArrayIsUniform) {
  SynthesisConfig cfg;
  cfg.slm_size = 64;
  cfg.oversample = 4;
  cfg.iterations = 50;
  const auto targets = grid_targets(5, 24.0, 128.0);
  const SynthesisResult r = wgs(targets, cfg);
  EXPECT_LT(r.report.uniformity, 0.01);
  EXPECT_TRUE(r.report.converged);
  EXPECT_GT(r.report.efficiency, 0.5);
  EXPECT_EQ(r.report.measurements.size(), targets.size());
}

TEST(Synthesis, WgsIsDeterministic) {
  SynthesisConfig cfg;
  cfg.slm_size = 32;
  cfg.oversample = 4;
  cfg.iterations = 10;
  cfg.seed = 9;
  const auto targets = grid_targets(3, 20.0, 64.0);
  EXPECT_EQ(wgs(targets, cfg).hologram, wgs(targets, cfg).hologram);
}

TEST(Synthesis, PinnedHitsScatteredTargets) {
  SynthesisConfig cfg;
  cfg.slm_size = 64;
  cfg.oversample = 8;
  cfg.iterations = 1;
  Rng rng = make_rng(11);
  std::vector<TweezerTarget> targets;
  while (targets.size() < 16) {
    const double x = uniform(rng, 136.0, 376.0);
    const double y = uniform(rng, 136.0, 376.0);
    bool clear = true;
    for (const TweezerTarget& t : targets) {
      clear = clear && std::hypot(t.x - x, t.y - y) >= 24.0;
    }
    if (clear) {
      targets.push_back({x, y, uniform(rng, -kPi, kPi), 1.0});
    }
  }
  const SynthesisResult r = synthesize_pinned(targets, cfg);
  ASSERT_EQ(r.report.measurements.size(), targets.size());
  std::vector<double> dx;
  std::vector<double> dphi;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    dx.push_back(r.report.measurements[i].x - targets[i].x);
    dx.push_back(r.report.measurements[i].y - targets[i].y);
    dphi.push_back(circular_diff(r.report.measurements[i].phase, *targets[i].phase));
  }
  EXPECT_LT(stddev(dx), 0.15);
  EXPECT_LT(circular_stddev(dphi), 0.2);
}

TEST(Synthesis, ExtractPhasesOfPureRamp) {
  const std::size_t n = 32;
  const std::size_t s = 4;
  const std::vector<RampTerm> terms = {{80.0, 64.0, std::polar(1.0, 0.7)}};
  const optics::PhaseGrid h = superposition_hologram(terms, n, n * s);
  const std::vector<cdouble> at = {{80.0, 64.0}, {20.0, 20.0}};
  const auto ph = extract_phases(h, at, s);
  ASSERT_EQ(ph.size(), 2U);
  EXPECT_FALSE(ph[0].low_power);
  EXPECT_NEAR(circular_diff(ph[0].phase, 0.7), 0.0, 1e-6);
  const std::vector<cdouble> off = {{-1.0, 3.0}};
  EXPECT_THROW((void)extract_phases(h, off, s), Error);
}
