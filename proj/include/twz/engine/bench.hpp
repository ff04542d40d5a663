#pragma once

#include "twz/engine/assemble.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace twz::engine {

struct BenchOptions {
  std::vector<std::size_t> sizes{1024, 4096};
  std::size_t repetitions = 5;
  /// Fixed expanded grid is slm_size·oversample.
  std::size_t slm_size = 256;
  std::size_t oversample = 8;
  double loading = 0.65;
  /// Lattice units per matching block.
  double block_size = 10.0;
  double refresh_ms = 1.0;
  /// Steps in the makespan model.
  std::size_t steps = 20;
  std::uint64_t seed = 0;
};

struct BenchRow {
  std::size_t atoms = 0;
  std::size_t targets = 0;
  /// Median block-matching critical path.
  double match_ms = 0.0;
  /// Median wall time of the whole matching call.
  double match_wall_ms = 0.0;
  /// Median per-step hologram generation (pinned, one refinement pass).
  double holo_ms = 0.0;
  double refresh_ms = 0.0;
  double makespan_ms = 0.0;
};

[[nodiscard]] std::vector<BenchRow> benchmark_scaling(const BenchOptions& options);

[[nodiscard]] std::string bench_to_csv(const std::vector<BenchRow>& rows);

} // namespace twz::engine
