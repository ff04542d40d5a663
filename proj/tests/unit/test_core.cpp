#include "twz/core/binary_io.hpp"
#include "twz/core/error.hpp"
#include "twz/core/geometry.hpp"
#include "twz/core/parallel.hpp"
#include "twz/core/rng.hpp"
#include "twz/core/stats.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace twz;

TEST(Phase, WrapsIntoHalfOpenRange) {
  EXPECT_DOUBLE_EQ(wrap_phase(std::numbers::pi), -std::numbers::pi);
  EXPECT_DOUBLE_EQ(wrap_phase(-std::numbers::pi), -std::numbers::pi);
  EXPECT_NEAR(wrap_phase(3 * std::numbers::pi + 0.5), -std::numbers::pi + 0.5, 1e-12);
  Rng rng = make_rng(1);
  for (int i = 0; i < 10000; ++i) {
    const double a = uniform(rng, -100.0, 100.0);
    const double w = wrap_phase(a);
    ASSERT_GE(w, -std::numbers::pi);
    ASSERT_LT(w, std::numbers::pi);
    ASSERT_NEAR(std::remainder(a - w, 2 * std::numbers::pi), 0.0, 1e-9);
  }
}

TEST(Phase, CircularDiffIsShortestArc) {
  EXPECT_NEAR(circular_diff(3.0, -3.0), 2 * std::numbers::pi - 6.0, 1e-12);
  EXPECT_NEAR(circular_diff(-3.0, 3.0), 6.0 - 2 * std::numbers::pi, 1e-12);
}

TEST(Stats, PopulationStddev) {
  const std::vector<double> v{2, 4, 4, 4, 5, 5, 7, 9};
  EXPECT_DOUBLE_EQ(mean(v), 5.0);
  EXPECT_DOUBLE_EQ(stddev(v), 2.0);
}

TEST(Stats, CircularStatistics) {
  const std::vector<double> same(5, 1.25);
  EXPECT_NEAR(circular_stddev(same), 0.0, 1e-7);
  // Angles straddling the cut average to the cut, not to zero.
  const std::vector<double> cut{std::numbers::pi - 0.1, -std::numbers::pi + 0.1};
  EXPECT_NEAR(std::abs(circular_mean(cut)), std::numbers::pi, 1e-12);
  // Small spread: circular std approaches the linear std.
  const std::vector<double> small{-0.01, 0.0, 0.01};
  EXPECT_NEAR(circular_stddev(small), stddev(small), 1e-6);
}

TEST(Stats, WilsonInterval) {
  const auto [lo, hi] = wilson_interval(0, 10);
  EXPECT_DOUBLE_EQ(lo, 0.0);
  EXPECT_NEAR(hi, 0.27753, 1e-5);
  const auto [lo2, hi2] = wilson_interval(50, 100);
  EXPECT_NEAR(lo2, 0.40383, 1e-5);
  EXPECT_NEAR(hi2, 0.59617, 1e-5);
}

TEST(Rng, StreamsAreReproducibleAndDistinct) {
  Rng a = make_rng(7, 3, 1);
  Rng b = make_rng(7, 3, 1);
  Rng c = make_rng(7, 3, 2);
  Rng d = make_rng(7, 4, 1);
  const auto x = a();
  EXPECT_EQ(x, b());
  EXPECT_NE(x, c());
  EXPECT_NE(x, d());
}

TEST(Rng, UniformIndexAndNormalMoments) {
  Rng rng = make_rng(11);
  std::vector<int> counts(5, 0);
  std::vector<double> z;
  for (int i = 0; i < 50000; ++i) {
    ++counts[uniform_index(rng, 5)];
    z.push_back(standard_normal(rng));
  }
  for (const int c : counts) {
    EXPECT_NEAR(c, 10000, 400);
  }
  EXPECT_NEAR(mean(z), 0.0, 0.02);
  EXPECT_NEAR(stddev(z), 1.0, 0.02);
}

TEST(BinaryIo, LittleEndianLayout) {
  ByteWriter w;
  w.put_u16(0x0102);
  w.put_u32(0x03040506);
  w.put_f32(1.0F);
  const std::vector<std::uint8_t> expected{0x02, 0x01, 0x06, 0x05, 0x04, 0x03,
                                           0x00, 0x00, 0x80, 0x3F};
  EXPECT_EQ(w.bytes(), expected);
  ByteReader r(expected);
  EXPECT_EQ(r.get_u16(), 0x0102);
  EXPECT_EQ(r.get_u32(), 0x03040506U);
  EXPECT_EQ(r.get_f32(), 1.0F);
  try {
    (void)r.get_u8();
    FAIL() << "read past the end";
  } catch (const FormatError& e) {
    EXPECT_EQ(e.kind(), FormatError::Kind::Truncation);
  }
}

TEST(Geometry, RotationAboutCenter) {
  const Vec2 p = rotate({2.0, 1.0}, {1.0, 1.0}, std::numbers::pi / 2);
  EXPECT_NEAR(p.x, 1.0, 1e-15);
  EXPECT_NEAR(p.y, 2.0, 1e-15);
}

TEST(Parallel, ResultsIndependentOfWorkers) {
  std::vector<double> one(1000);
  std::vector<double> many(1000);
  set_worker_count(1);
  parallel_for(one.size(), [&](std::size_t i) { one[i] = std::sin(static_cast<double>(i)); });
  set_worker_count(4);
  parallel_for(many.size(), [&](std::size_t i) { many[i] = std::sin(static_cast<double>(i)); });
  set_worker_count(0);
  EXPECT_EQ(one, many);
}

TEST(Parallel, PropagatesExceptions) {
  set_worker_count(3);
  EXPECT_THROW(parallel_for(50,
                            [](std::size_t i) {
                              if (i == 17) {
                                throw Error("boom");
                              }
                            }),
               Error);
  set_worker_count(0);
}
