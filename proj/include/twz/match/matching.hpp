#pragma once

#include "twz/match/assignment.hpp"

#include <cstdint>

namespace twz::match {

/// Minimum Σd² assignment of targets to atoms (shortest augmenting path).
/// Among equal-cost optima the pairing whose atom sequence, read in target
/// order, is lexicographically smallest is returned. Integer coordinates give
/// exact costs.
[[nodiscard]] Assignment exact_match(std::span<const Vec2> atoms, std::span<const Vec2> targets);

struct BlockMatchStats {
  std::size_t blocks = 0;
  /// Atoms handed across block boundaries.
  std::size_t borrowed = 0;
  /// Binning and the block-level transport plan (sequential).
  double setup_seconds = 0.0;
  /// Longest chain of dependent atom hand-overs between blocks.
  double handover_critical_seconds = 0.0;
  double max_block_seconds = 0.0;
  double sum_block_seconds = 0.0;
  double merge_seconds = 0.0;
  /// Wall time of the whole call on this machine.
  double wall_seconds = 0.0;

  /// Latency with one worker per block: sequential setup, the longest
  /// hand-over chain, the slowest block and the merge.
  [[nodiscard]] double critical_path_seconds() const noexcept {
    return setup_seconds + handover_critical_seconds + max_block_seconds + merge_seconds;
  }
};

struct BlockMatchOptions {
  /// Block edge in the same units as the coordinates.
  double block_size = 10.0;
  std::uint64_t seed = 0;
};

/// Tiles the plane into block_size² blocks. Blocks with more targets than
/// atoms borrow atoms from neighbouring blocks along a block-level transport
/// plan (a chain of hand-overs between adjacent blocks, each giving the atoms
/// nearest the receiver); every block is then solved exactly and
/// independently on the worker pool.
[[nodiscard]] Assignment block_match(std::span<const Vec2> atoms, std::span<const Vec2> targets,
                                     const BlockMatchOptions& options,
                                     BlockMatchStats* stats = nullptr);

struct DecollideOptions {
  /// Minimum allowed distance between two simultaneously moving atoms.
  double clearance = 1.0;
  int max_passes = 20;
  /// Swaps may raise the cost to at most (1 + epsilon)·input cost.
  double epsilon = 0.05;
};

/// Minimum over τ ∈ [0, 1] of |pᵢ(τ) - pⱼ(τ)| for straight moves a→t and b→u
/// sharing the interpolation parameter.
[[nodiscard]] double min_separation(Vec2 a, Vec2 t, Vec2 b, Vec2 u) noexcept;

/// Pairwise target swaps that remove near-collisions and shorten the longest
/// path; unresolved collisions end up in Assignment::collisions.
[[nodiscard]] Assignment decollide(const Assignment& input, std::span<const Vec2> atoms,
                                   std::span<const Vec2> targets, const DecollideOptions& options);

/// Target pairs whose paths come closer than the clearance.
[[nodiscard]] std::vector<std::pair<std::size_t, std::size_t>>
find_collisions(const Assignment& a, std::span<const Vec2> atoms, std::span<const Vec2> targets,
                double clearance);

struct ReserveSelection {
  /// Atom indices, in target order.
  std::vector<std::size_t> matched;
  /// Unmatched atoms kept in place, nearest first.
  std::vector<std::size_t> reserved;
  /// Unmatched atoms whose traps are switched off, ascending.
  std::vector<std::size_t> discarded;
};

/// Keeps the `reserve_count` unmatched atoms nearest to any target (ties by
/// index). Unmatched atoms sitting on a target site are never reserved, since
/// their trap would coincide with a target trap. The count is clamped to what
/// is available.
[[nodiscard]] ReserveSelection select_reserve(std::span<const Vec2> atoms,
                                              std::span<const Vec2> targets,
                                              const Assignment& assignment,
                                              std::size_t reserve_count);

} // namespace twz::match
