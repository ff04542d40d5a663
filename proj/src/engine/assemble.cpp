#include "twz/engine/assemble.hpp"

#include "twz/core/parallel.hpp"
#include "twz/core/rng.hpp"
#include "twz/core/stats.hpp"
#include "twz/dataset/protocol.hpp"
#include "twz/match/matching.hpp"
#include "twz/optics/propagate.hpp"
#include "twz/traj/plan.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numbers>

#include <fmt/format.h>
#include <json.hpp>

namespace twz::engine {

using optics::cdouble;
using Clock = std::chrono::steady_clock;

double makespan_ms(double t_match, double t_holo_first, double t_holo, double t_refresh,
                   std::size_t steps, double t_final) noexcept {
  return t_match + t_holo_first + static_cast<double>(steps) * std::max(t_holo, t_refresh) +
         t_final;
}

double TimingReport::makespan_ms() const noexcept {
  return engine::makespan_ms(t_match_ms, t_holo_first_ms, t_holo_ms, t_refresh_ms, steps,
                             t_final_ms);
}

holo::SynthesisConfig synthesis_config(const Scenario& s) {
  holo::SynthesisConfig c;
  c.slm_size = s.generator.slm_size;
  c.oversample = s.generator.oversample;
  c.iterations = s.generator.iterations;
  c.seed = s.seed;
  c.waist = s.waist_px;
  return c;
}

GeneratorFactory make_generator_factory(const Scenario& s) {
  const holo::SynthesisConfig cfg = synthesis_config(s);
  if (s.generator.backend == "classical-pinned") {
    return [cfg] { return std::make_unique<holo::PinnedGenerator>(cfg); };
  }
  if (s.generator.backend == "classical-wgs") {
    return [cfg] { return std::make_unique<holo::WgsGenerator>(cfg); };
  }
  if (s.generator.backend == "external") {
    const std::string endpoint = s.generator.endpoint;
    const std::chrono::milliseconds timeout(s.generator.timeout_ms);
    return [endpoint, timeout] {
      return std::make_unique<dataset::RemoteGenerator>(dataset::open_backend(endpoint), timeout);
    };
  }
  return nullptr;
}

void write_pgm(const std::string& path, const optics::ComplexField& field) {
  double peak = 0.0;
  for (const cdouble v : field.values()) {
    peak = std::max(peak, std::norm(v));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error("cannot write " + path);
  }
  out << "P5\n" << field.size() << ' ' << field.size() << "\n255\n";
  std::vector<char> row(field.size());
  for (std::size_t y = 0; y < field.size(); ++y) {
    for (std::size_t x = 0; x < field.size(); ++x) {
      const double v = peak > 0.0 ? std::norm(field(x, y)) / peak : 0.0;
      row[x] = static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * v)));
    }
    out.write(row.data(), static_cast<std::streamsize>(row.size()));
  }
}

namespace {

enum class Kind { Matched, Reserve, Hold };

/// One tweezer of a round's plan.
struct Track {
  std::size_t layer = 0;
  Kind kind = Kind::Matched;
  std::size_t site = 0;    // reservoir site
  std::size_t target = 0;  // target index (Matched and Hold)
};

struct Layer {
  const LayerGeometry* geo = nullptr;
  std::vector<Vec2> res_pos;
  std::vector<Vec2> tgt_pos;
  std::vector<std::uint8_t> actual;
  std::vector<std::uint8_t> observed;
  std::vector<double> target_phase;
  std::vector<double> site_phase;
  std::vector<std::uint8_t> at_target;   // target holds an atom
  std::vector<long> occupant;            // site index at each target, -1 if none
  std::vector<std::uint8_t> in_reserve;  // site kept as a reserve trap and still holds its atom
  std::vector<std::uint8_t> reserve_trap;
  std::vector<std::string> fate;
  std::vector<long> fate_target;
  std::vector<int> fate_round;
};

struct Context {
  const Scenario& s;
  const std::vector<LayerGeometry>& geo;
  std::optional<transport::LogisticSurvival> logistic;
  double center = 0.0;
  holo::SynthesisConfig syn;
  optics::RealGrid aperture;
  std::vector<optics::PhaseGrid> fresnel;
};

Vec2 to_px(const Context& c, Vec2 p) {
  return {c.center + c.s.spacing_px * p.x, c.center + c.s.spacing_px * p.y};
}

/// Generates (and optionally verifies) every step's hologram of one round.
class HologramStage {
public:
  HologramStage(const Context& c, holo::HologramGenerator* gen, TrialReport& report,
                std::string frames_dir, std::vector<double>* step_ms)
      : c_(c), gen_(gen), report_(report), frames_(std::move(frames_dir)), step_ms_(step_ms) {}

  void run(const traj::StepPlan& plan, const std::vector<Track>& tracks, int round) {
    if (gen_ == nullptr) {
      return;
    }
    const std::size_t layers = c_.geo.size();
    for (std::size_t k = 1; k < plan.frames.size(); ++k) {
      std::vector<std::vector<optics::TweezerTarget>> per_layer(layers);
      for (std::size_t i = 0; i < tracks.size(); ++i) {
        const traj::Tweezer& t = plan.frames[k][i];
        per_layer[tracks[i].layer].push_back(
            {t.position.x, t.position.y, t.phase, t.amplitude});
      }
      const auto t0 = Clock::now();
      const optics::PhaseGrid h = compose(per_layer);
      if (step_ms_ != nullptr) {
        step_ms_->push_back(std::chrono::duration<double, std::milli>(Clock::now() - t0).count());
      }
      if (c_.s.generator.verify) {
        verify(h, per_layer, k, round);
      }
    }
  }

private:
  optics::PhaseGrid compose(const std::vector<std::vector<optics::TweezerTarget>>& per_layer) {
    const std::size_t n = c_.syn.slm_size;
    std::vector<optics::PhaseGrid> holos;
    for (const auto& layer : per_layer) {
      holos.push_back(layer.empty() ? optics::PhaseGrid(n) : gen_->generate(layer));
      if (holos.back().size() != n) {
        throw dataset::BackendError(std::nullopt,
                                    fmt::format("backend returned a {}x{} hologram, expected {}",
                                                holos.back().size(), holos.back().size(), n));
      }
    }
    if (holos.size() == 1 && c_.s.fresnel(0) == 0.0) {
      return holos.front();
    }
    std::vector<cdouble> sum(n * n);
    for (std::size_t l = 0; l < holos.size(); ++l) {
      if (per_layer[l].empty()) {
        continue;
      }
      const optics::PhaseGrid shifted = optics::compose(holos[l], c_.fresnel[l]);
      for (std::size_t v = 0; v < n; ++v) {
        for (std::size_t u = 0; u < n; ++u) {
          sum[v * n + u] += std::polar(1.0, shifted(u, v));
        }
      }
    }
    std::vector<double> arg(n * n);
    for (std::size_t i = 0; i < sum.size(); ++i) {
      arg[i] = std::arg(sum[i]);
    }
    return optics::PhaseGrid::from_radians(n, arg);
  }

  void verify(const optics::PhaseGrid& h,
              const std::vector<std::vector<optics::TweezerTarget>>& per_layer, std::size_t k,
              int round) {
    optics::MeasureOptions mo = c_.syn.measure;
    mo.throw_on_missing = false;
    for (std::size_t l = 0; l < per_layer.size(); ++l) {
      if (per_layer[l].empty()) {
        continue;
      }
      const optics::ComplexField field =
          optics::propagate_at_defocus(h, c_.s.fresnel(l), c_.aperture, c_.syn.oversample);
      if (l == 0 && !frames_.empty()) {
        write_pgm(fmt::format("{}/round{}_step{:04d}.pgm", frames_, round, k), field);
      }
      LayerVerify& v = report_.verify[l];
      ++v.steps_checked;
      double worst = 0.0;
      try {
        const auto meas = optics::measure_tweezers(field, per_layer[l], mo);
        for (std::size_t i = 0; i < meas.size(); ++i) {
          worst = std::max(worst, meas[i].missing
                                      ? std::numeric_limits<double>::infinity()
                                      : std::hypot(meas[i].x - per_layer[l][i].x,
                                                   meas[i].y - per_layer[l][i].y));
        }
      } catch (const Error& e) {
        report_.flags.push_back(
            fmt::format("round {} step {} layer {}: not verified ({})", round, k, l, e.what()));
        continue;
      }
      v.max_position_error = std::max(v.max_position_error, worst);
      v.target_position_error = worst;
      if (worst > c_.s.generator.verify_tolerance) {
        ++v.steps_over_tolerance;
      }
    }
  }

  const Context& c_;
  holo::HologramGenerator* gen_;
  TrialReport& report_;
  std::string frames_;
  std::vector<double>* step_ms_;
};

/// Decides which moving tweezers keep their atom.
std::vector<std::uint8_t> survival(const Context& c, const traj::StepPlan& plan,
                                   const std::vector<traj::Move>& moves, std::size_t trial,
                                   int round, Rng& rng) {
  const std::string& model = c.s.survival.model;
  const double steps = static_cast<double>(plan.steps);
  std::vector<std::uint8_t> alive(moves.size(), 1);
  std::vector<std::size_t> dynamic;
  for (std::size_t i = 0; i < moves.size(); ++i) {
    const traj::Move& m = moves[i];
    const double dr = dist(m.from, m.to) / steps;
    const double dphi = std::abs(traj::phase_gap(m.phase_from, m.phase_to)) / steps;
    if (dr == 0.0 && dphi == 0.0) {
      continue;
    }
    if (model == "per_round") {
      alive[i] = bernoulli(rng, c.s.survival.per_round) ? 1 : 0;
    } else if (model == "logistic") {
      const double p = std::pow(c.logistic->probability(dr / c.s.waist_px, dphi),
                                steps / static_cast<double>(c.s.survival.calibration_steps));
      alive[i] = bernoulli(rng, p) ? 1 : 0;
    } else if (model == "dynamics") {
      dynamic.push_back(i);
    }
  }
  if (!dynamic.empty()) {
    parallel_for(dynamic.size(), [&](std::size_t d) {
      const std::size_t i = dynamic[d];
      std::vector<transport::Waypoint> path(plan.frames.size());
      for (std::size_t k = 0; k < path.size(); ++k) {
        const traj::Tweezer& t = plan.frames[k][i];
        path[k] = {(1.0 / c.s.waist_px) * t.position, t.phase};
      }
      Rng r = make_rng(c.s.seed, (trial << 8U) | static_cast<std::uint64_t>(round), 1000 + i);
      transport::AtomState a = transport::sample_thermal(c.s.physics.theta, r);
      a.position += path.front().position;
      alive[i] = transport::evolve_path(a, path, c.s.physics).alive ? 1 : 0;
    });
  }
  return alive;
}

std::vector<std::uint8_t> corrupt(const std::vector<std::uint8_t>& truth, double eps, Rng& rng) {
  std::vector<std::uint8_t> out(truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool flip = eps > 0.0 && bernoulli(rng, eps);
    out[i] = static_cast<std::uint8_t>(flip ? 1 - truth[i] : truth[i]);
  }
  return out;
}

void set_fate(Layer& l, std::size_t site, const char* fate, long target, int round) {
  l.fate[site] = fate;
  l.fate_target[site] = target;
  l.fate_round[site] = round;
}

struct TrialTiming {
  double match_ms = 0.0;
  std::vector<double> step_ms;
  std::size_t steps = 0;
};

TrialReport run_trial(const Context& c, std::size_t trial, holo::HologramGenerator* gen,
                      const std::string& frames_dir, TrialTiming* timing) {
  const Scenario& s = c.s;
  TrialReport rep;
  rep.trial = trial;
  rep.verify.resize(c.geo.size());
  Rng load_rng = make_rng(s.seed, trial, 0);
  Rng image_rng = make_rng(s.seed, trial, 1);
  Rng survive_rng = make_rng(s.seed, trial, 2);
  Rng phase_rng = make_rng(s.seed, trial, 3);

  std::vector<Layer> layers(c.geo.size());
  for (std::size_t li = 0; li < layers.size(); ++li) {
    Layer& l = layers[li];
    l.geo = &c.geo[li];
    l.res_pos = l.geo->reservoir.positions();
    l.tgt_pos = l.geo->targets.positions();
    l.actual.resize(l.res_pos.size());
    for (auto& a : l.actual) {
      a = bernoulli(load_rng, s.loading) ? 1 : 0;
    }
    l.observed = corrupt(l.actual, s.imaging_error, image_rng);
    l.target_phase.resize(l.tgt_pos.size());
    for (double& p : l.target_phase) {
      p = uniform(phase_rng, -std::numbers::pi, std::numbers::pi);
    }
    l.site_phase.resize(l.res_pos.size());
    for (double& p : l.site_phase) {
      p = uniform(phase_rng, -std::numbers::pi, std::numbers::pi);
    }
    l.at_target.assign(l.tgt_pos.size(), 0);
    l.occupant.assign(l.tgt_pos.size(), -1);
    l.in_reserve.assign(l.res_pos.size(), 0);
    l.reserve_trap.assign(l.res_pos.size(), 0);
    l.fate.assign(l.res_pos.size(), "");
    l.fate_target.assign(l.res_pos.size(), -1);
    l.fate_round.assign(l.res_pos.size(), 1);
    for (std::size_t i = 0; i < l.res_pos.size(); ++i) {
      if (l.actual[i] != 0) {
        set_fate(l, i, l.observed[i] != 0 ? "discarded" : "unseen", -1, 1);
      }
    }
    rep.targets += l.tgt_pos.size();
  }

  // Round 1: match every layer on its own, then plan all layers together.
  std::vector<Track> tracks;
  std::vector<traj::Move> moves;
  const auto t_match = Clock::now();
  for (std::size_t li = 0; li < layers.size(); ++li) {
    Layer& l = layers[li];
    std::vector<std::size_t> seen_sites;
    std::vector<Vec2> atoms;
    for (std::size_t i = 0; i < l.res_pos.size(); ++i) {
      if (l.observed[i] != 0) {
        seen_sites.push_back(i);
        atoms.push_back(l.res_pos[i]);
      }
    }
    match::Assignment a;
    try {
      if (s.matching == "exact") {
        a = match::exact_match(atoms, l.tgt_pos);
      } else {
        match::BlockMatchOptions bo;
        bo.block_size = s.block_size;
        bo.seed = s.seed + trial;
        a = match::block_match(atoms, l.tgt_pos, bo);
      }
    } catch (const match::InsufficientAtoms& e) {
      rep.failed = true;
      rep.flags.push_back(fmt::format("layer {}: {}", li, e.what()));
      return rep;
    }
    if (s.decollide) {
      match::DecollideOptions d;
      d.clearance = s.clearance;
      a = match::decollide(a, atoms, l.tgt_pos, d);
      if (!a.collisions.empty()) {
        rep.flags.push_back(
            fmt::format("layer {}: {} unresolved path collisions", li, a.collisions.size()));
      }
    }
    const match::ReserveSelection sel = match::select_reserve(atoms, l.tgt_pos, a, s.reserve);
    for (std::size_t j = 0; j < a.atom_for_target.size(); ++j) {
      const std::size_t site = seen_sites[a.atom_for_target[j]];
      if (c.geo[li].reservoir.sites[site].layer != c.geo[li].targets.sites[j].layer) {
        throw CrossLayerAssignment(fmt::format("site {} on layer {} matched to a target on layer {}",
                                               site, c.geo[li].reservoir.sites[site].layer,
                                               c.geo[li].targets.sites[j].layer));
      }
      tracks.push_back({li, Kind::Matched, site, j});
      moves.push_back({to_px(c, l.res_pos[site]), to_px(c, l.tgt_pos[j]), l.site_phase[site],
                       l.target_phase[j], 1.0});
    }
    for (const std::size_t r : sel.reserved) {
      const std::size_t site = seen_sites[r];
      l.reserve_trap[site] = 1;
      tracks.push_back({li, Kind::Reserve, site, 0});
      const Vec2 p = to_px(c, l.res_pos[site]);
      moves.push_back({p, p, l.site_phase[site], l.site_phase[site], 1.0});
    }
  }
  if (timing != nullptr) {
    timing->match_ms = std::chrono::duration<double, std::milli>(Clock::now() - t_match).count();
  }

  const traj::StepPlan plan = traj::plan(moves, s.constraints, s.min_steps);
  rep.steps = plan.steps;
  if (timing != nullptr) {
    timing->steps = plan.steps;
  }
  HologramStage stage(c, gen, rep, frames_dir, timing != nullptr ? &timing->step_ms : nullptr);
  stage.run(plan, tracks, 1);
  const std::vector<std::uint8_t> alive = survival(c, plan, moves, trial, 1, survive_rng);
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    const Track& t = tracks[i];
    Layer& l = layers[t.layer];
    if (l.actual[t.site] == 0) {
      continue;
    }
    if (alive[i] == 0) {
      set_fate(l, t.site, "lost_transport", -1, 1);
      ++rep.lost;
    } else if (t.kind == Kind::Matched) {
      l.at_target[t.target] = 1;
      l.occupant[t.target] = static_cast<long>(t.site);
      set_fate(l, t.site, "placed", static_cast<long>(t.target), 1);
    } else {
      l.in_reserve[t.site] = 1;
      set_fate(l, t.site, "reserve", -1, 1);
    }
  }

  if (s.rounds == 2) {
    Rng image2 = make_rng(s.seed, trial, 4);
    Rng survive2 = make_rng(s.seed, trial, 5);
    std::vector<Track> tracks2;
    std::vector<traj::Move> moves2;
    for (std::size_t li = 0; li < layers.size(); ++li) {
      Layer& l = layers[li];
      const std::vector<std::uint8_t> seen_t = corrupt(l.at_target, s.imaging_error, image2);
      const std::vector<std::uint8_t> seen_r = corrupt(l.in_reserve, s.imaging_error, image2);
      std::vector<std::size_t> defects;
      std::vector<Vec2> defect_pos;
      for (std::size_t j = 0; j < l.tgt_pos.size(); ++j) {
        if (seen_t[j] == 0) {
          defects.push_back(j);
          defect_pos.push_back(l.tgt_pos[j]);
        } else {
          tracks2.push_back({li, Kind::Hold, 0, j});
          const Vec2 p = to_px(c, l.tgt_pos[j]);
          moves2.push_back({p, p, l.target_phase[j], l.target_phase[j], 1.0});
        }
      }
      std::vector<std::size_t> spares;
      std::vector<Vec2> spare_pos;
      for (std::size_t i = 0; i < l.res_pos.size(); ++i) {
        if (l.reserve_trap[i] != 0 && seen_r[i] != 0) {
          spares.push_back(i);
          spare_pos.push_back(l.res_pos[i]);
        }
      }
      if (defects.empty() || spares.empty()) {
        continue;
      }
      std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (spare, defect)
      if (spares.size() >= defects.size()) {
        const match::Assignment a = match::exact_match(spare_pos, defect_pos);
        for (std::size_t j = 0; j < defects.size(); ++j) {
          pairs.emplace_back(a.atom_for_target[j], j);
        }
      } else {
        const match::Assignment a = match::exact_match(defect_pos, spare_pos);
        for (std::size_t r = 0; r < spares.size(); ++r) {
          pairs.emplace_back(r, a.atom_for_target[r]);
        }
      }
      for (const auto& [r, d] : pairs) {
        const std::size_t site = spares[r];
        const std::size_t j = defects[d];
        tracks2.push_back({li, Kind::Matched, site, j});
        moves2.push_back({to_px(c, l.res_pos[site]), to_px(c, l.tgt_pos[j]), l.site_phase[site],
                          l.target_phase[j], 1.0});
      }
    }
    std::size_t movers = 0;
    for (const Track& t : tracks2) {
      movers += t.kind == Kind::Matched ? 1 : 0;
    }
    rep.round2_moves = movers;
    if (movers > 0) {
      const traj::StepPlan plan2 = traj::plan(moves2, s.constraints, s.min_steps);
      stage.run(plan2, tracks2, 2);
      const std::vector<std::uint8_t> alive2 = survival(c, plan2, moves2, trial, 2, survive2);
      for (std::size_t i = 0; i < tracks2.size(); ++i) {
        const Track& t = tracks2[i];
        if (t.kind != Kind::Matched) {
          continue;
        }
        Layer& l = layers[t.layer];
        if (l.in_reserve[t.site] == 0) {
          continue;
        }
        l.in_reserve[t.site] = 0;
        if (alive2[i] == 0) {
          set_fate(l, t.site, "lost_transport", -1, 2);
          ++rep.lost;
        } else if (l.at_target[t.target] != 0) {
          // The target was misread as empty: two atoms in one trap are both lost.
          const auto other = static_cast<std::size_t>(l.occupant[t.target]);
          set_fate(l, other, "collision", -1, 2);
          set_fate(l, t.site, "collision", -1, 2);
          l.at_target[t.target] = 0;
          l.occupant[t.target] = -1;
        } else {
          l.at_target[t.target] = 1;
          l.occupant[t.target] = static_cast<long>(t.site);
          set_fate(l, t.site, "placed", static_cast<long>(t.target), 2);
        }
      }
    }
  }

  for (std::size_t li = 0; li < layers.size(); ++li) {
    const Layer& l = layers[li];
    for (const std::uint8_t v : l.at_target) {
      rep.placed += v;
    }
    for (std::size_t i = 0; i < l.fate.size(); ++i) {
      if (l.fate[i].empty()) {
        continue;
      }
      ++rep.fates[l.fate[i]];
      if (s.trace) {
        rep.trace.push_back(
            {static_cast<int>(li), i, l.fate[i], l.fate_target[i], l.fate_round[i]});
      }
    }
    const LayerVerify& v = rep.verify[li];
    if (v.steps_over_tolerance > 0) {
      rep.flags.push_back(fmt::format("layer {}: {} of {} verified steps exceed {} px", li,
                                      v.steps_over_tolerance, v.steps_checked,
                                      s.generator.verify_tolerance));
    }
  }
  rep.filling = rep.targets > 0 ? static_cast<double>(rep.placed) / static_cast<double>(rep.targets)
                                : 0.0;
  return rep;
}

RunReport run(const Scenario& s, const RunOptions& options) {
  s.validate();
  const std::vector<LayerGeometry> geo = build_layers(s);
  Context c{s, geo, std::nullopt, 0.0, synthesis_config(s), {}, {}};
  c.center = static_cast<double>(c.syn.expanded_size()) / 2.0;

  RunReport r;
  r.scenario = s.name;
  r.seed = s.seed;
  r.rounds = s.rounds;
  r.survival_model = s.survival.model;

  std::size_t targets = 0;
  std::size_t sites = 0;
  for (const LayerGeometry& g : geo) {
    targets += g.targets.size();
    sites += g.reservoir.size();
  }
  if (static_cast<double>(sites) * s.loading < 1.1 * static_cast<double>(targets)) {
    r.warnings.push_back(fmt::format(
        "reservoir of {} sites at loading {} expects fewer than 1.1x the {} targets", sites,
        s.loading, targets));
  }
  if (s.survival.model == "per_round") {
    r.warnings.push_back(
        "per-round survival is a calibrated input parameter, not derived from first principles");
  }
  if (s.survival.model == "logistic") {
    transport::SurvivalOptions so;
    so.samples = s.survival.calibration_samples;
    so.steps_per_move = s.survival.calibration_steps;
    so.seed = s.seed;
    const auto cells = transport::survival_curve(s.survival.calibration_dr,
                                                 s.survival.calibration_dphi, s.physics, so);
    c.logistic = transport::fit_logistic(cells);
    r.calibration = c.logistic;
  }

  GeneratorFactory factory = options.generator ? options.generator : make_generator_factory(s);
  if (factory) {
    c.aperture = optics::make_aperture(c.syn.slm_size, c.syn.aperture);
    for (std::size_t l = 0; l < geo.size(); ++l) {
      c.fresnel.push_back(optics::fresnel_phase(c.syn.slm_size, s.fresnel(l)));
    }
  }
  if (!options.frames_dir.empty()) {
    std::filesystem::create_directories(options.frames_dir);
  }

  r.trials.resize(s.trials);
  TrialTiming first;
  const auto one = [&](std::size_t t, holo::HologramGenerator* gen) {
    try {
      r.trials[t] = run_trial(c, t, gen, t == 0 ? options.frames_dir : std::string(),
                              t == 0 ? &first : nullptr);
    } catch (const dataset::BackendError& e) {
      r.trials[t] = TrialReport{};
      r.trials[t].trial = t;
      r.trials[t].failed = true;
      r.trials[t].flags.push_back(std::string("protocol error: ") + e.what());
    } catch (const dataset::ProtocolError& e) {
      r.trials[t] = TrialReport{};
      r.trials[t].trial = t;
      r.trials[t].failed = true;
      r.trials[t].flags.push_back(std::string("protocol error: ") + e.what());
    }
  };
  const bool shared = s.generator.backend == "external" && !options.generator;
  if (!factory) {
    parallel_for(s.trials, [&](std::size_t t) { one(t, nullptr); });
  } else if (shared) {
    std::unique_ptr<holo::HologramGenerator> gen;
    try {
      gen = factory();
    } catch (const Error& e) {
      throw dataset::BackendError(std::nullopt, std::string("cannot open backend: ") + e.what());
    }
    for (std::size_t t = 0; t < s.trials; ++t) {
      one(t, gen.get());
    }
  } else {
    parallel_for(s.trials, [&](std::size_t t) {
      const std::unique_ptr<holo::HologramGenerator> gen = factory();
      one(t, gen.get());
    });
  }

  std::vector<double> fills;
  for (const TrialReport& t : r.trials) {
    if (t.failed) {
      ++r.failed_trials;
    } else {
      fills.push_back(t.filling);
    }
  }
  if (!fills.empty()) {
    r.mean_filling = mean(fills);
    r.std_filling = stddev(fills);
  }
  if (options.timing != nullptr) {
    TimingReport& tm = *options.timing;
    tm = {};
    tm.t_match_ms = first.match_ms;
    tm.steps = first.steps;
    tm.t_refresh_ms = s.physics.refresh_ms;
    if (!first.step_ms.empty()) {
      tm.t_holo_first_ms = first.step_ms.front();
      tm.t_holo_ms = mean(first.step_ms);
    }
  }
  return r;
}

} // namespace

RunReport assemble(const Scenario& s, const RunOptions& options) {
  if (s.layer_count() != 1) {
    throw ConfigError("assemble handles single-layer scenarios; use assemble3d");
  }
  return run(s, options);
}

RunReport assemble_3d(const Scenario& s, const RunOptions& options) { return run(s, options); }

std::string report_to_json(const RunReport& r) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["scenario"] = r.scenario;
  j["seed"] = r.seed;
  j["rounds"] = r.rounds;
  j["survival_model"] = r.survival_model;
  if (r.calibration) {
    j["calibration"] = {{"b0", r.calibration->b0}, {"b1", r.calibration->b1},
                        {"b2", r.calibration->b2}};
  }
  j["warnings"] = r.warnings;
  j["trials"] = r.trials.size();
  j["failed_trials"] = r.failed_trials;
  j["filling"] = {{"mean", r.mean_filling}, {"std", r.std_filling}};
  ordered_json per = ordered_json::array();
  for (const TrialReport& t : r.trials) {
    ordered_json o;
    o["trial"] = t.trial;
    o["filling"] = t.filling;
    o["placed"] = t.placed;
    o["targets"] = t.targets;
    o["lost"] = t.lost;
    o["steps"] = t.steps;
    o["round2_moves"] = t.round2_moves;
    o["failed"] = t.failed;
    o["flags"] = t.flags;
    ordered_json f = ordered_json::object();
    for (const auto& [k, v] : t.fates) {
      f[k] = v;
    }
    o["fates"] = f;
    ordered_json ver = ordered_json::array();
    for (const LayerVerify& v : t.verify) {
      ver.push_back({{"steps_checked", v.steps_checked},
                     {"steps_over_tolerance", v.steps_over_tolerance},
                     {"max_position_error", v.max_position_error},
                     {"target_position_error", v.target_position_error}});
    }
    o["verify"] = ver;
    if (!t.trace.empty()) {
      ordered_json tr = ordered_json::array();
      for (const AtomFate& a : t.trace) {
        tr.push_back({{"layer", a.layer}, {"site", a.site}, {"fate", a.fate},
                      {"target", a.target}, {"round", a.round}});
      }
      o["trace"] = tr;
    }
    per.push_back(o);
  }
  j["per_trial"] = per;
  return j.dump(2) + "\n";
}

std::string report_to_csv(const RunReport& r) {
  std::string out = "trial,filling,placed,targets,lost,steps,round2_moves,failed\n";
  for (const TrialReport& t : r.trials) {
    out += fmt::format("{},{:.6f},{},{},{},{},{},{}\n", t.trial, t.filling, t.placed, t.targets,
                       t.lost, t.steps, t.round2_moves, t.failed ? 1 : 0);
  }
  return out;
}

std::string timing_to_json(const TimingReport& t) {
  nlohmann::ordered_json j;
  j["t_match_ms"] = t.t_match_ms;
  j["t_holo_first_ms"] = t.t_holo_first_ms;
  j["t_holo_ms"] = t.t_holo_ms;
  j["t_refresh_ms"] = t.t_refresh_ms;
  j["t_final_ms"] = t.t_final_ms;
  j["steps"] = t.steps;
  j["makespan_ms"] = t.makespan_ms();
  return j.dump(2) + "\n";
}

} // namespace twz::engine
