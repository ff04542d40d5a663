#include "twz/core/parallel.hpp"
#include "twz/dataset/protocol.hpp"
#include "twz/engine/assemble.hpp"
#include "twz/engine/scenario.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

using namespace twz;
using namespace twz::engine;

namespace {

Scenario small(std::size_t n, std::size_t reservoir, std::size_t trials) {
  Scenario s;
  s.name = "small";
  s.geometry.n = n;
  s.reservoir_n = reservoir;
  s.trials = trials;
  s.seed = 5;
  s.imaging_error = 0.0;
  s.survival.model = "perfect";
  return s;
}

// Restores the default worker pool when a test ends.
struct WorkerGuard {
  ~WorkerGuard() { set_worker_count(0); }
};

// A generator that always fails like a dead backend.
class DeadBackend final : public holo::HologramGenerator {
public:
  optics::PhaseGrid generate(std::span<const optics::TweezerTarget> /*t*/) override {
    throw dataset::BackendError(std::nullopt, "backend closed the connection");
  }
  [[nodiscard]] std::string name() const override { return "dead"; }
};

} // namespace

TEST(Scenario, DefaultsValidateAndRoundTrip) {
  const Scenario s = small(6, 10, 2);
  EXPECT_NO_THROW(s.validate());
  const Scenario back = scenario_from_json(scenario_to_json(s));
  EXPECT_EQ(scenario_to_json(back), scenario_to_json(s));
}

TEST(Scenario, StrictKeysAndRanges) {
  EXPECT_THROW((void)scenario_from_json(R"({"schema_version": 1, "bogus": 3})"), ConfigError);
  EXPECT_THROW((void)scenario_from_json(R"({"schema_version": 1, "survival": {"modle": "x"}})"),
               ConfigError);
  EXPECT_THROW((void)scenario_from_json(R"({"schema_version": 2})"), ConfigError);
  EXPECT_THROW((void)scenario_from_json(R"({"schema_version": 1, "loading": 1.5})"), ConfigError);
  EXPECT_THROW((void)scenario_from_json("{not json"), ConfigError);
  EXPECT_THROW((void)load_scenario("/nonexistent/scenario.json"), ConfigError);
  try {
    (void)load_scenario("/nonexistent/scenario.json");
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("scenario not found"), std::string::npos);
  }
}

TEST(Scenario, Overrides) {
  const Scenario s = small(6, 10, 2);
  const Scenario o = apply_overrides(s, {{"survival.model", "per_round"},
                                         {"survival.per_round", "0.97"},
                                         {"trials", "7"},
                                         {"name", "renamed"}});
  EXPECT_EQ(o.survival.model, "per_round");
  EXPECT_EQ(o.survival.per_round, 0.97);
  EXPECT_EQ(o.trials, 7U);
  EXPECT_EQ(o.name, "renamed");
  EXPECT_THROW((void)apply_overrides(s, {{"no.such.key", "1"}}), ConfigError);
  EXPECT_THROW((void)apply_overrides(s, {{"survival.model", "psychic"}}), ConfigError);
}

TEST(Scenario, TwistIsARotation) {
  Scenario s = small(5, 7, 1);
  s.geometry.kind = Geometry::Kind::Layered;
  s.geometry.layers = 3;
  s.geometry.twist_deg = 20.0;
  const auto layers = build_layers(s);
  ASSERT_EQ(layers.size(), 3U);
  for (std::size_t l = 0; l < 3; ++l) {
    const double angle = static_cast<double>(l) * 20.0 * std::numbers::pi / 180.0;
    ASSERT_EQ(layers[l].targets.size(), 25U);
    for (std::size_t i = 0; i < 25; ++i) {
      const match::Site& base = layers[0].targets.sites[i];
      const match::Site& site = layers[l].targets.sites[i];
      const double c = std::cos(angle);
      const double sn = std::sin(angle);
      EXPECT_NEAR(site.x, c * base.x - sn * base.y, 1e-9);
      EXPECT_NEAR(site.y, sn * base.x + c * base.y, 1e-9);
      EXPECT_EQ(site.layer, static_cast<int>(l));
    }
  }
}

TEST(Assemble, PerfectSurvivalFillsEveryTarget) {
  const RunReport r = assemble(small(6, 10, 4));
  ASSERT_EQ(r.trials.size(), 4U);
  EXPECT_EQ(r.failed_trials, 0U);
  for (const TrialReport& t : r.trials) {
    EXPECT_EQ(t.filling, 1.0);
    EXPECT_EQ(t.placed, 36U);
    EXPECT_EQ(t.lost, 0U);
    EXPECT_GE(t.steps, 20U);
  }
  EXPECT_EQ(r.mean_filling, 1.0);
  EXPECT_EQ(r.std_filling, 0.0);
}

TEST(Assemble, LayeredScenarioNeedsTheLayeredEntryPoint) {
  Scenario s = small(3, 5, 1);
  s.geometry.kind = Geometry::Kind::Layered;
  s.geometry.layers = 2;
  EXPECT_THROW((void)assemble(s), ConfigError);
  EXPECT_NO_THROW((void)assemble_3d(s));
}

TEST(Assemble, ReportIsIndependentOfWorkerCount) {
  WorkerGuard guard;
  Scenario s = small(10, 14, 6);
  s.survival.model = "per_round";
  s.survival.per_round = 0.98;
  s.imaging_error = 0.01;
  s.rounds = 2;
  s.reserve = 8;
  s.trace = true;
  set_worker_count(1);
  const std::string one = report_to_json(assemble(s));
  set_worker_count(3);
  const std::string three = report_to_json(assemble(s));
  EXPECT_EQ(one, three);
  EXPECT_NE(one.find("\"trace\""), std::string::npos);
}

TEST(Assemble, SingleLayerThreeDimensionalRunMatchesPlanarRun) {
  Scenario s = small(6, 9, 3);
  s.survival.model = "per_round";
  s.survival.per_round = 0.97;
  EXPECT_EQ(report_to_json(assemble_3d(s)), report_to_json(assemble(s)));
}

TEST(Assemble, LayersKeepTheirOwnAtoms) {
  Scenario s = small(4, 6, 2);
  s.geometry.kind = Geometry::Kind::Layered;
  s.geometry.layers = 3;
  s.geometry.twist_deg = 20.0;
  s.trace = true;
  const RunReport r = assemble_3d(s);
  const auto layers = build_layers(s);
  for (const TrialReport& t : r.trials) {
    EXPECT_EQ(t.targets, 48U);
    for (const AtomFate& f : t.trace) {
      EXPECT_LT(f.site, layers[static_cast<std::size_t>(f.layer)].reservoir.size());
      if (f.fate == "placed") {
        EXPECT_LT(f.target, static_cast<long>(layers[static_cast<std::size_t>(f.layer)].targets.size()));
      }
    }
  }
}

TEST(Assemble, TooFewAtomsFailsTheTrial) {
  Scenario s = small(6, 6, 2);
  const RunReport r = assemble(s);
  EXPECT_EQ(r.failed_trials, 2U);
  EXPECT_FALSE(r.warnings.empty());
  for (const TrialReport& t : r.trials) {
    EXPECT_TRUE(t.failed);
    ASSERT_FALSE(t.flags.empty());
    EXPECT_NE(t.flags[0].find("insufficient atoms"), std::string::npos);
  }
}

TEST(Assemble, SecondRoundNeverLowersFilling) {
  Scenario one = small(10, 16, 6);
  one.survival.model = "per_round";
  one.survival.per_round = 0.95;
  Scenario two = one;
  two.rounds = 2;
  two.reserve = 12;
  const RunReport a = assemble(one);
  const RunReport b = assemble(two);
  for (std::size_t t = 0; t < a.trials.size(); ++t) {
    EXPECT_GE(b.trials[t].filling, a.trials[t].filling) << "trial " << t;
  }
  EXPECT_GT(b.mean_filling, a.mean_filling);
}

TEST(Assemble, PerRoundWarningIsStated) {
  Scenario s = small(4, 7, 1);
  s.survival.model = "per_round";
  const RunReport r = assemble(s);
  bool stated = false;
  for (const std::string& w : r.warnings) {
    stated = stated || w.find("calibrated input parameter") != std::string::npos;
  }
  EXPECT_TRUE(stated);
}

TEST(Assemble, DeadBackendFailsTrialsWithProtocolFlag) {
  Scenario s = small(3, 5, 2);
  RunOptions o;
  o.generator = [] { return std::make_unique<DeadBackend>(); };
  const RunReport r = assemble(s, o);
  EXPECT_EQ(r.failed_trials, 2U);
  for (const TrialReport& t : r.trials) {
    ASSERT_FALSE(t.flags.empty());
    EXPECT_EQ(t.flags[0].rfind("protocol error: ", 0), 0U);
  }
}

TEST(Assemble, VerifiedHologramsAndFrames) {
  Scenario s = small(3, 5, 1);
  s.generator.backend = "classical-pinned";
  s.generator.slm_size = 64;
  s.spacing_px = 48.0;
  s.min_steps = 4;
  s.constraints.max_step = 48.0;
  const std::string dir = ::testing::TempDir() + "/twz_frames";
  std::filesystem::remove_all(dir);
  TimingReport timing;
  RunOptions o;
  o.frames_dir = dir;
  o.timing = &timing;
  const RunReport r = assemble(s, o);
  ASSERT_EQ(r.trials.size(), 1U);
  ASSERT_EQ(r.trials[0].verify.size(), 1U);
  const LayerVerify& v = r.trials[0].verify[0];
  EXPECT_GT(v.steps_checked, 0U);
  EXPECT_TRUE(std::isfinite(v.target_position_error));
  EXPECT_LE(v.target_position_error, v.max_position_error);
  EXPECT_TRUE(std::filesystem::exists(dir + "/round1_step0001.pgm"));
  EXPECT_GT(timing.steps, 0U);
  EXPECT_GT(timing.makespan_ms(), 0.0);
  EXPECT_NE(timing_to_json(timing).find("makespan_ms"), std::string::npos);
}

TEST(Assemble, CsvHeader) {
  const RunReport r = assemble(small(4, 7, 2));
  const std::string csv = report_to_csv(r);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "trial,filling,placed,targets,lost,steps,round2_moves,failed");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
}

TEST(Makespan, PipelinedStages) {
  EXPECT_NEAR(makespan_ms(5.0, 2.6, 2.6, 1.0, 20, 0.0), 59.6, 1e-12);
  EXPECT_LT(makespan_ms(5.0, 2.6, 2.6, 1.0, 20, 0.0), 60.0);
  EXPECT_NEAR(makespan_ms(5.0, 2.6, 0.5, 1.0, 20, 3.0), 30.6, 1e-12);
  TimingReport t{1.0, 2.0, 3.0, 4.0, 0.5, 10};
  EXPECT_NEAR(t.makespan_ms(), 1.0 + 2.0 + 40.0 + 0.5, 1e-12);
}
