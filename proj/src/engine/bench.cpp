#include "twz/engine/bench.hpp"

#include "twz/core/error.hpp"
#include "twz/core/rng.hpp"
#include "twz/holo/synthesis.hpp"
#include "twz/match/lattice.hpp"
#include "twz/match/matching.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

namespace twz::engine {

namespace {

using Clock = std::chrono::steady_clock;

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

} // namespace

std::vector<BenchRow> benchmark_scaling(const BenchOptions& o) {
  if (o.sizes.empty() || o.repetitions == 0) {
    throw Error("benchmark needs at least one size and one repetition");
  }
  holo::SynthesisConfig cfg;
  cfg.slm_size = o.slm_size;
  cfg.oversample = o.oversample;
  cfg.iterations = 1;
  cfg.seed = o.seed;
  const double m = static_cast<double>(cfg.expanded_size());
  holo::PinnedGenerator generator(cfg);

  std::vector<BenchRow> rows;
  for (const std::size_t n : o.sizes) {
    const auto side = static_cast<std::size_t>(
        std::lround(std::sqrt(static_cast<double>(n) / o.loading)));
    const auto tside = static_cast<std::size_t>(std::floor(static_cast<double>(side) * 45.0 / 62.0));
    if (side == 0 || tside == 0) {
      throw Error(fmt::format("benchmark size {} is too small", n));
    }
    const auto reservoir = match::square_lattice(side, 1.0, {0.0, 0.0}).positions();
    const auto targets = match::square_lattice(tside, 1.0, {0.0, 0.0}).positions();

    BenchRow row;
    row.atoms = n;
    row.targets = targets.size();
    std::vector<double> crit;
    std::vector<double> wall;
    for (std::size_t r = 0; r < o.repetitions; ++r) {
      Rng rng = make_rng(o.seed, n, r);
      std::vector<Vec2> atoms;
      for (const Vec2 p : reservoir) {
        if (bernoulli(rng, o.loading)) {
          atoms.push_back(p);
        }
      }
      if (atoms.size() < targets.size()) {
        continue;
      }
      match::BlockMatchOptions bo;
      bo.block_size = o.block_size;
      bo.seed = o.seed + r;
      match::BlockMatchStats stats;
      const auto t0 = Clock::now();
      (void)match::block_match(atoms, targets, bo, &stats);
      wall.push_back(ms_since(t0));
      crit.push_back(1e3 * stats.critical_path_seconds());
    }
    if (crit.empty()) {
      throw Error(fmt::format("no repetition at size {} loaded enough atoms", n));
    }
    row.match_ms = median(crit);
    row.match_wall_ms = median(wall);

    // n traps on a square inside the central 80% of the grid
    const auto qside = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
    const double pitch = std::min(24.0, 0.8 * m / static_cast<double>(qside));
    Rng prng = make_rng(o.seed, n, 1000);
    std::vector<optics::TweezerTarget> traps;
    for (std::size_t i = 0; i < n; ++i) {
      const double x = m / 2.0 + pitch * (static_cast<double>(i % qside) - 0.5 * static_cast<double>(qside - 1));
      const double y = m / 2.0 + pitch * (static_cast<double>(i / qside) - 0.5 * static_cast<double>(qside - 1));
      traps.push_back({x, y, uniform(prng, -std::numbers::pi, std::numbers::pi), 1.0});
    }
    (void)generator.generate(traps);
    std::vector<double> holo;
    for (std::size_t r = 0; r < o.repetitions; ++r) {
      const auto t0 = Clock::now();
      (void)generator.generate(traps);
      holo.push_back(ms_since(t0));
    }
    row.holo_ms = median(holo);
    row.refresh_ms = o.refresh_ms;
    row.makespan_ms = makespan_ms(row.match_ms, row.holo_ms, row.holo_ms, row.refresh_ms, o.steps, 0.0);
    rows.push_back(row);
  }
  return rows;
}

std::string bench_to_csv(const std::vector<BenchRow>& rows) {
  std::string out = "atoms,targets,match_ms,match_wall_ms,holo_ms,refresh_ms,makespan_ms\n";
  for (const BenchRow& r : rows) {
    out += fmt::format("{},{},{:.4f},{:.4f},{:.4f},{:.4f},{:.4f}\n", r.atoms, r.targets, r.match_ms,
                       r.match_wall_ms, r.holo_ms, r.refresh_ms, r.makespan_ms);
  }
  return out;
}

} // namespace twz::engine
