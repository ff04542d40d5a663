#include "twz/core/error.hpp"
#include "twz/core/stats.hpp"
#include "twz/match/lattice.hpp"
#include "twz/transport/dynamics.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <numeric>

using namespace twz;
using namespace twz::transport;

TEST(Physics, ParameterValidation) {
  PhysicsParams p;
  EXPECT_NO_THROW(p.validate());
  p.theta = -0.1;
  EXPECT_THROW(p.validate(), Error);
  p = {};
  p.steps_per_period = 4;
  EXPECT_THROW(p.validate(), Error);
  p = {};
  p.refresh_ms = 0.0;
  EXPECT_THROW(p.validate(), Error);
  p = {};
  EXPECT_NEAR(p.model_time(p.trap_period_ms), std::numbers::pi, 1e-15);
}

TEST(Thermal, MomentsMatchHarmonicEquipartition) {
  const double theta = 0.1;
  std::vector<double> x;
  std::vector<double> v;
  Rng rng = make_rng(3);
  for (int i = 0; i < 20000; ++i) {
    const AtomState a = sample_thermal(theta, rng);
    x.push_back(a.position.x);
    x.push_back(a.position.y);
    v.push_back(a.velocity.x);
    v.push_back(a.velocity.y);
    ASSERT_TRUE(a.alive);
  }
  EXPECT_NEAR(stddev(x) * stddev(x), theta / 4.0, 0.03 * theta / 4.0);
  EXPECT_NEAR(stddev(v) * stddev(v), theta, 0.03 * theta);
  EXPECT_EQ(sample_thermal(theta, 5, 2).position, sample_thermal(theta, 5, 2).position);
}

TEST(Dynamics, StaticTrapHoldsAndConservesEnergy) {
  PhysicsParams p;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const AtomState a = sample_thermal(p.theta, 11, s);
    const AtomState b = evolve_step(a, {0, 0}, 0.0, {0, 0}, 0.0, p);
    EXPECT_TRUE(b.alive);
    EXPECT_LT(dist(b.position, {0, 0}), 1.0);
    EXPECT_NEAR(b.energy, a.energy, 1e-4);
  }
}

TEST(Survival, ZeroMotionKeepsEveryAtom) {
  const std::vector<double> zero = {0.0};
  const auto cells = survival_curve(zero, zero, {}, {200, 10, 1});
  ASSERT_EQ(cells.size(), 1U);
  EXPECT_EQ(cells[0].survived, cells[0].n);
  EXPECT_EQ(cells[0].p, 1.0);
  EXPECT_LT(cells[0].ci_lo, 1.0);
  EXPECT_EQ(cells[0].ci_hi, 1.0);
}

TEST(Survival, FiveWaistJumpLosesTheEnsemble) {
  const std::vector<double> dr = {5.0};
  const std::vector<double> dphi = {0.0};
  const auto cells = survival_curve(dr, dphi, {}, {200, 1, 2});
  EXPECT_LT(cells[0].p, 0.1);
}

TEST(Survival, SmallStepsBeatLargeOnes) {
  const std::vector<double> dr = {0.05, 2.0};
  const std::vector<double> dphi = {0.0};
  const auto cells = survival_curve(dr, dphi, {}, {100, 4, 4});
  ASSERT_EQ(cells.size(), 2U);
  EXPECT_GT(cells[0].p, cells[1].p);
  EXPECT_EQ(cells[0].dr, 0.05);
}

TEST(Survival, FewSamplesThrow) {
  const std::vector<double> g = {0.0};
  EXPECT_THROW((void)survival_curve(g, g, {}, {99, 10, 0}), Error);
}

TEST(Survival, CsvHeader) {
  const std::vector<SurvivalCell> cells = {{0.5, 0.1, 100, 90, 0.9, 0.8, 0.95}};
  const std::string csv = survival_to_csv(cells);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "dr,dphi,n,survived,p,ci_lo,ci_hi");
  EXPECT_NE(csv.find("0.5,0.1,100,90,0.900000"), std::string::npos);
}

TEST(Logistic, RecoversCoefficients) {
  const LogisticSurvival truth{4.0, -3.0, -2.0};
  std::vector<SurvivalCell> cells;
  for (double dr = 0.0; dr <= 2.0; dr += 0.25) {
    for (double dphi = 0.0; dphi <= 2.0; dphi += 0.5) {
      SurvivalCell c;
      c.dr = dr;
      c.dphi = dphi;
      c.n = 1000000;
      c.survived = static_cast<std::size_t>(std::lround(c.n * truth.probability(dr, dphi)));
      c.p = static_cast<double>(c.survived) / c.n;
      cells.push_back(c);
    }
  }
  const LogisticSurvival fit = fit_logistic(cells);
  EXPECT_NEAR(fit.b0, truth.b0, 0.05);
  EXPECT_NEAR(fit.b1, truth.b1, 0.05);
  EXPECT_NEAR(fit.b2, truth.b2, 0.05);
}

TEST(Logistic, AllSurviveStillConverges) {
  std::vector<SurvivalCell> cells = {{0.0, 0.0, 100, 100, 1.0, 0.96, 1.0},
                                     {0.5, 0.0, 100, 100, 1.0, 0.96, 1.0}};
  const LogisticSurvival fit = fit_logistic(cells);
  EXPECT_TRUE(std::isfinite(fit.b0));
  EXPECT_GT(fit.probability(0.0, 0.0), 0.95);
}

TEST(Loading, BernoulliOccupancy) {
  const match::SiteLattice l = match::square_lattice(40, 1.0, {0, 0});
  const auto none = load(l, 0.0, 1);
  const auto all = load(l, 1.0, 1);
  EXPECT_EQ(std::accumulate(none.begin(), none.end(), 0), 0);
  EXPECT_EQ(std::accumulate(all.begin(), all.end(), 0), 1600);
  const auto some = load(l, 0.65, 7);
  const double frac = std::accumulate(some.begin(), some.end(), 0) / 1600.0;
  EXPECT_NEAR(frac, 0.65, 0.05);
  EXPECT_EQ(some, load(l, 0.65, 7));
  EXPECT_THROW((void)load(l, 1.5, 1), Error);
}
