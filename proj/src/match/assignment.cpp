#include "twz/match/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <sstream>

namespace twz::match {

std::vector<std::pair<std::size_t, std::size_t>> Assignment::pairs() const {
  std::vector<std::pair<std::size_t, std::size_t>> p;
  p.reserve(atom_for_target.size());
  for (std::size_t j = 0; j < atom_for_target.size(); ++j) {
    p.emplace_back(atom_for_target[j], j);
  }
  return p;
}

void recompute_metrics(Assignment& a, std::span<const Vec2> atoms, std::span<const Vec2> targets) {
  double cost = 0.0;
  double longest2 = 0.0;
  for (std::size_t j = 0; j < a.atom_for_target.size(); ++j) {
    const double d2 = dist2(atoms[a.atom_for_target[j]], targets[j]);
    cost += d2;
    longest2 = std::max(longest2, d2);
  }
  a.cost = cost;
  a.longest = std::sqrt(longest2);
}

void check_assignment(const Assignment& a, std::size_t atom_count, std::size_t target_count) {
  if (a.atom_for_target.size() != target_count) {
    throw Error("assignment does not cover every target");
  }
  std::vector<std::uint8_t> used(atom_count, 0);
  for (const std::size_t atom : a.atom_for_target) {
    if (atom >= atom_count) {
      throw Error("assignment references atom " + std::to_string(atom) + " out of range");
    }
    if (used[atom] != 0) {
      throw Error("atom " + std::to_string(atom) + " assigned twice");
    }
    used[atom] = 1;
  }
}

std::string assignment_to_csv(const Assignment& a, std::span<const Vec2> atoms,
                              std::span<const Vec2> targets) {
  std::string out = "atom_index,target_index,d2\n";
  for (std::size_t j = 0; j < a.atom_for_target.size(); ++j) {
    out += fmt::format("{},{},{}\n", a.atom_for_target[j], j,
                       dist2(atoms[a.atom_for_target[j]], targets[j]));
  }
  return out;
}

Assignment assignment_from_csv(const std::string& csv, std::span<const Vec2> atoms,
                               std::span<const Vec2> targets) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line) || line.rfind("atom_index,target_index,d2", 0) != 0) {
    throw FormatError(FormatError::Kind::BadMagic, "assignment CSV: missing header");
  }
  Assignment a;
  constexpr std::size_t unset = static_cast<std::size_t>(-1);
  a.atom_for_target.assign(targets.size(), unset);
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") {
      continue;
    }
    std::size_t atom = 0;
    std::size_t target = 0;
    char c1 = 0;
    char c2 = 0;
    double d2 = 0.0;
    std::istringstream ls(line);
    if (!(ls >> atom >> c1 >> target >> c2 >> d2) || c1 != ',' || c2 != ',' ||
        target >= targets.size() || atom >= atoms.size() || a.atom_for_target[target] != unset) {
      throw FormatError(FormatError::Kind::Malformed, "assignment CSV: bad row \"" + line + "\"");
    }
    a.atom_for_target[target] = atom;
  }
  if (std::find(a.atom_for_target.begin(), a.atom_for_target.end(), unset) !=
      a.atom_for_target.end()) {
    throw FormatError(FormatError::Kind::Malformed, "assignment CSV: uncovered target");
  }
  check_assignment(a, atoms.size(), targets.size());
  recompute_metrics(a, atoms, targets);
  return a;
}

} // namespace twz::match
