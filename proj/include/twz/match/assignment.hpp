#pragma once

#include "twz/core/error.hpp"
#include "twz/core/geometry.hpp"

#include <span>
#include <string>
#include <utility>
#include <vector>

namespace twz::match {

class InsufficientAtoms : public Error {
public:
  InsufficientAtoms(std::size_t atoms, std::size_t targets)
      : Error("insufficient atoms: " + std::to_string(atoms) + " atoms for " +
              std::to_string(targets) + " targets"),
        atoms_(atoms), targets_(targets) {}
  [[nodiscard]] std::size_t atoms() const noexcept { return atoms_; }
  [[nodiscard]] std::size_t targets() const noexcept { return targets_; }

private:
  std::size_t atoms_;
  std::size_t targets_;
};

/// Injective map from targets to atoms covering every target.
struct Assignment {
  /// atom_for_target[j] is the atom index sent to target j.
  std::vector<std::size_t> atom_for_target;
  /// Σ d² in pixels².
  double cost = 0.0;
  /// max d in pixels.
  double longest = 0.0;
  /// Target pairs whose simultaneous paths still come closer than the
  /// clearance after decollide.
  std::vector<std::pair<std::size_t, std::size_t>> collisions;

  /// (atom, target) pairs sorted by target index.
  [[nodiscard]] std::vector<std::pair<std::size_t, std::size_t>> pairs() const;
};

/// Recomputes cost and longest from positions.
void recompute_metrics(Assignment& a, std::span<const Vec2> atoms, std::span<const Vec2> targets);

/// Throws unless every target has a distinct, in-range atom.
void check_assignment(const Assignment& a, std::size_t atom_count, std::size_t target_count);

/// CSV with header "atom_index,target_index,d2", one row per target.
[[nodiscard]] std::string assignment_to_csv(const Assignment& a, std::span<const Vec2> atoms,
                                            std::span<const Vec2> targets);
[[nodiscard]] Assignment assignment_from_csv(const std::string& csv, std::span<const Vec2> atoms,
                                             std::span<const Vec2> targets);

} // namespace twz::match
