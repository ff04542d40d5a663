#include "twz/match/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace twz::match {

double min_separation(Vec2 a, Vec2 t, Vec2 b, Vec2 u) noexcept {
  const Vec2 r0 = a - b;
  const Vec2 dr = (t - a) - (u - b);
  const double dd = norm2(dr);
  double tau = 0.0;
  if (dd > 0.0) {
    tau = std::clamp(-dot(r0, dr) / dd, 0.0, 1.0);
  }
  return norm(r0 + tau * dr);
}

namespace {

struct Box {
  double x0, x1, y0, y1;
};

class PathSet {
public:
  PathSet(const Assignment& a, std::span<const Vec2> atoms, std::span<const Vec2> targets,
          double clearance)
      : atom_(a.atom_for_target), atoms_(atoms), targets_(targets), clearance_(clearance) {}

  [[nodiscard]] Vec2 from(std::size_t j) const { return atoms_[atom_[j]]; }
  [[nodiscard]] Vec2 to(std::size_t j) const { return targets_[j]; }
  [[nodiscard]] double d2(std::size_t j) const { return dist2(from(j), to(j)); }
  [[nodiscard]] std::size_t size() const noexcept { return atom_.size(); }
  [[nodiscard]] const std::vector<std::size_t>& atoms() const noexcept { return atom_; }

  [[nodiscard]] Box box(std::size_t j) const {
    const Vec2 p = from(j);
    const Vec2 q = to(j);
    return {std::min(p.x, q.x) - clearance_, std::max(p.x, q.x) + clearance_,
            std::min(p.y, q.y) - clearance_, std::max(p.y, q.y) + clearance_};
  }

  [[nodiscard]] bool collide(std::size_t j, std::size_t k) const {
    const Box a = box(j);
    const Box b = box(k);
    if (a.x1 < b.x0 || b.x1 < a.x0 || a.y1 < b.y0 || b.y1 < a.y0) {
      return false;
    }
    return min_separation(from(j), to(j), from(k), to(k)) < clearance_;
  }

  /// Collisions of paths j and k with every path, the pair itself counted once.
  [[nodiscard]] std::size_t involvement(std::size_t j, std::size_t k) const {
    std::size_t count = 0;
    for (std::size_t o = 0; o < size(); ++o) {
      if (o != j && collide(j, o)) {
        ++count;
      }
      if (o != k && o != j && collide(k, o)) {
        ++count;
      }
    }
    return count;
  }

  void swap_atoms(std::size_t j, std::size_t k) { std::swap(atom_[j], atom_[k]); }

  [[nodiscard]] std::vector<std::pair<std::size_t, std::size_t>> all_collisions() const {
    std::vector<std::size_t> order(size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<Box> boxes(size());
    for (std::size_t j = 0; j < size(); ++j) {
      boxes[j] = box(j);
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return boxes[a].x0 < boxes[b].x0 || (boxes[a].x0 == boxes[b].x0 && a < b);
    });
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t p = 0; p < order.size(); ++p) {
      const std::size_t j = order[p];
      for (std::size_t q = p + 1; q < order.size(); ++q) {
        const std::size_t k = order[q];
        if (boxes[k].x0 > boxes[j].x1) {
          break;
        }
        if (collide(j, k)) {
          out.emplace_back(std::min(j, k), std::max(j, k));
        }
      }
    }
    std::sort(out.begin(), out.end());
    return out;
  }

private:
  std::vector<std::size_t> atom_;
  std::span<const Vec2> atoms_;
  std::span<const Vec2> targets_;
  double clearance_;
};

} // namespace

std::vector<std::pair<std::size_t, std::size_t>>
find_collisions(const Assignment& a, std::span<const Vec2> atoms, std::span<const Vec2> targets,
                double clearance) {
  return PathSet(a, atoms, targets, clearance).all_collisions();
}

Assignment decollide(const Assignment& input, std::span<const Vec2> atoms,
                     std::span<const Vec2> targets, const DecollideOptions& options) {
  check_assignment(input, atoms.size(), targets.size());
  PathSet paths(input, atoms, targets, options.clearance);
  Assignment tmp = input;
  recompute_metrics(tmp, atoms, targets);
  const double budget = (1.0 + options.epsilon) * tmp.cost;
  double cost = tmp.cost;

  // Cost after exchanging the atoms of paths j and k.
  const auto swapped_cost = [&](std::size_t j, std::size_t k) {
    const Vec2 aj = paths.from(j);
    const Vec2 ak = paths.from(k);
    return cost - paths.d2(j) - paths.d2(k) + dist2(ak, paths.to(j)) + dist2(aj, paths.to(k));
  };

  for (int pass = 0; pass < options.max_passes; ++pass) {
    bool changed = false;

    // Swaps that reduce the number of collisions the two paths take part in.
    for (const auto& [j, k] : paths.all_collisions()) {
      if (!paths.collide(j, k)) {
        continue;
      }
      const double next = swapped_cost(j, k);
      if (next > budget) {
        continue;
      }
      const std::size_t before = paths.involvement(j, k);
      paths.swap_atoms(j, k);
      if (paths.involvement(j, k) < before) {
        cost = next;
        changed = true;
      } else {
        paths.swap_atoms(j, k);
      }
    }

    // Swaps that shorten the longest path without adding collisions.
    for (;;) {
      std::size_t longest = 0;
      for (std::size_t j = 1; j < paths.size(); ++j) {
        if (paths.d2(j) > paths.d2(longest)) {
          longest = j;
        }
      }
      if (paths.size() == 0) {
        break;
      }
      const double top = paths.d2(longest);
      std::size_t best = paths.size();
      double best_top = top;
      for (std::size_t k = 0; k < paths.size(); ++k) {
        if (k == longest) {
          continue;
        }
        const double dj = dist2(paths.from(k), paths.to(longest));
        const double dk = dist2(paths.from(longest), paths.to(k));
        const double pair_top = std::max(dj, dk);
        if (pair_top >= best_top) {
          continue;
        }
        const double next = swapped_cost(longest, k);
        if (next > budget || dj + dk > (1.0 + options.epsilon) * (top + paths.d2(k))) {
          continue;
        }
        const std::size_t before = paths.involvement(longest, k);
        paths.swap_atoms(longest, k);
        const bool ok = paths.involvement(longest, k) <= before;
        paths.swap_atoms(longest, k);
        if (ok) {
          best = k;
          best_top = pair_top;
        }
      }
      if (best == paths.size()) {
        break;
      }
      cost = swapped_cost(longest, best);
      paths.swap_atoms(longest, best);
      changed = true;
    }

    if (!changed) {
      break;
    }
  }

  Assignment out;
  out.atom_for_target = paths.atoms();
  recompute_metrics(out, atoms, targets);
  out.collisions = paths.all_collisions();
  return out;
}

ReserveSelection select_reserve(std::span<const Vec2> atoms, std::span<const Vec2> targets,
                                const Assignment& assignment, std::size_t reserve_count) {
  ReserveSelection sel;
  sel.matched = assignment.atom_for_target;
  std::vector<std::uint8_t> used(atoms.size(), 0);
  for (const std::size_t a : assignment.atom_for_target) {
    used[a] = 1;
  }
  std::vector<std::pair<double, std::size_t>> ranked;
  std::vector<std::size_t> blocked;
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    if (used[i] != 0) {
      continue;
    }
    double nearest = std::numeric_limits<double>::infinity();
    for (const Vec2& t : targets) {
      nearest = std::min(nearest, dist2(atoms[i], t));
    }
    if (nearest < 1e-12) {
      blocked.push_back(i);
    } else {
      ranked.emplace_back(nearest, i);
    }
  }
  std::sort(ranked.begin(), ranked.end());
  const std::size_t keep = std::min(reserve_count, ranked.size());
  for (std::size_t r = 0; r < ranked.size(); ++r) {
    (r < keep ? sel.reserved : sel.discarded).push_back(ranked[r].second);
  }
  sel.discarded.insert(sel.discarded.end(), blocked.begin(), blocked.end());
  std::sort(sel.discarded.begin(), sel.discarded.end());
  return sel;
}

} // namespace twz::match
