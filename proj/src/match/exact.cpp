#include "twz/match/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace twz::match {

namespace {

bool all_integer(std::span<const Vec2> pts) {
  return std::all_of(pts.begin(), pts.end(), [](const Vec2& p) {
    return p.x == std::floor(p.x) && p.y == std::floor(p.y) && std::abs(p.x) < 1e7 &&
           std::abs(p.y) < 1e7;
  });
}

struct Duals {
  std::vector<double> u;     // rows (targets), 1-based
  std::vector<double> v;     // columns (atoms), 1-based
  std::vector<std::size_t> p; // p[j] = row matched to column j, 0 = free
};

/// Shortest augmenting path with potentials; rows are targets, columns atoms.
Duals solve(std::span<const Vec2> atoms, std::span<const Vec2> targets) {
  const std::size_t n = targets.size();
  const std::size_t m = atoms.size();
  constexpr double inf = std::numeric_limits<double>::infinity();
  Duals d;
  d.u.assign(n + 1, 0.0);
  d.v.assign(m + 1, 0.0);
  d.p.assign(m + 1, 0);
  std::vector<std::size_t> way(m + 1, 0);
  std::vector<double> minv(m + 1);
  std::vector<std::uint8_t> used(m + 1);
  std::vector<std::size_t> used_list;
  used_list.reserve(m + 1);
  // Warm start: row minima as row potentials and a greedy matching on the
  // resulting zero-cost edges. Free columns keep v = 0, as required for the
  // rectangular optimality conditions.
  std::vector<std::uint8_t> row_done(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    const Vec2 t = targets[i - 1];
    double best = inf;
    std::size_t arg = 0;
    for (std::size_t j = 1; j <= m; ++j) {
      const double c = dist2(t, atoms[j - 1]);
      if (c < best || (c == best && d.p[arg] != 0 && d.p[j] == 0)) {
        best = c;
        arg = j;
      }
    }
    d.u[i] = best;
    if (d.p[arg] == 0) {
      d.p[arg] = i;
      row_done[i] = 1;
    }
  }
  for (std::size_t i = 1; i <= n; ++i) {
    if (row_done[i] != 0) {
      continue;
    }
    d.p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    used_list.clear();
    do {
      used[j0] = 1;
      used_list.push_back(j0);
      const std::size_t i0 = d.p[j0];
      const Vec2 t = targets[i0 - 1];
      const double ui = d.u[i0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j] != 0) {
          continue;
        }
        const double cur = dist2(t, atoms[j - 1]) - ui - d.v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (const std::size_t j : used_list) {
        d.u[d.p[j]] += delta;
        d.v[j] -= delta;
      }
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j] == 0) {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (d.p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      d.p[j0] = d.p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  return d;
}

/// Walks rows in order and gives each the smallest atom index that still
/// admits an optimal completion, keeping earlier rows fixed. Optimal
/// assignments are exactly the row-perfect matchings on tight edges that
/// cover every column with negative potential (the set R).
class LexPass {
public:
  LexPass(std::span<const Vec2> atoms, std::span<const Vec2> targets, const Duals& d)
      : n_(targets.size()), m_(atoms.size()), row_adj_(n_), col_adj_(m_), in_r_(m_, 0),
        col_(n_), row_(m_, kFree), seen_row_(n_, 0), seen_col_(m_, 0), from_(std::max(n_, m_)) {
    double scale = 0.0;
    for (std::size_t j = 1; j <= m_; ++j) {
      scale = std::max(scale, std::abs(d.v[j]));
    }
    for (std::size_t i = 1; i <= n_; ++i) {
      scale = std::max(scale, std::abs(d.u[i]));
    }
    const bool exact = all_integer(atoms) && all_integer(targets);
    const double tol = exact ? 0.0 : 1e-9 * (1.0 + scale);
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = 0; j < m_; ++j) {
        if (dist2(targets[i], atoms[j]) - d.u[i + 1] - d.v[j + 1] <= tol) {
          row_adj_[i].push_back(j);
          col_adj_[j].push_back(i);
        }
      }
    }
    for (std::size_t j = 0; j < m_; ++j) {
      in_r_[j] = d.v[j + 1] < -tol ? 1 : 0;
      if (d.p[j + 1] != 0) {
        col_[d.p[j + 1] - 1] = j;
        row_[j] = d.p[j + 1] - 1;
      }
    }
  }

  std::vector<std::size_t> run() {
    for (std::size_t i = 0; i < n_; ++i) {
      for (const std::size_t j : row_adj_[i]) {
        if (j >= col_[i]) {
          break;
        }
        if (try_move(i, j)) {
          break;
        }
      }
    }
    return col_;
  }

private:
  static constexpr std::size_t kFree = static_cast<std::size_t>(-1);

  bool try_move(std::size_t i, std::size_t j) {
    const std::size_t k = row_[j];
    if (k != kFree && k < i) {
      return false;
    }
    const auto saved_col = col_;
    const auto saved_row = row_;
    const std::size_t a = col_[i];
    row_[a] = kFree;
    col_[i] = j;
    row_[j] = i;
    if (k != kFree && !rematch_row(k, i)) {
      col_ = saved_col;
      row_ = saved_row;
      return false;
    }
    if (in_r_[a] != 0 && row_[a] == kFree && !recover_column(a, i)) {
      col_ = saved_col;
      row_ = saved_row;
      return false;
    }
    return true;
  }

  /// Augmenting path from the unmatched row k through rows > fixed.
  bool rematch_row(std::size_t k, std::size_t fixed) {
    std::fill(seen_row_.begin(), seen_row_.end(), 0);
    std::fill(seen_col_.begin(), seen_col_.end(), 0);
    std::vector<std::size_t> queue{k};
    seen_row_[k] = 1;
    for (std::size_t q = 0; q < queue.size(); ++q) {
      const std::size_t r = queue[q];
      for (const std::size_t c : row_adj_[r]) {
        if (seen_col_[c] != 0) {
          continue;
        }
        const std::size_t owner = row_[c];
        if (owner != kFree && owner <= fixed) {
          continue;
        }
        seen_col_[c] = 1;
        from_[c] = r;
        if (owner == kFree) {
          // Flip the path back to k.
          std::size_t col = c;
          std::size_t row = r;
          while (true) {
            const std::size_t prev = col_[row];
            col_[row] = col;
            row_[col] = row;
            if (row == k) {
              break;
            }
            col = prev;
            row = from_[col];
          }
          return true;
        }
        if (seen_row_[owner] == 0) {
          seen_row_[owner] = 1;
          queue.push_back(owner);
        }
      }
    }
    return false;
  }

  /// Even alternating path that re-covers column a and uncovers a column
  /// outside R instead.
  bool recover_column(std::size_t a, std::size_t fixed) {
    std::fill(seen_col_.begin(), seen_col_.end(), 0);
    std::vector<std::size_t> queue{a};
    seen_col_[a] = 1;
    for (std::size_t q = 0; q < queue.size(); ++q) {
      const std::size_t c = queue[q];
      for (const std::size_t r : col_adj_[c]) {
        if (r <= fixed) {
          continue;
        }
        const std::size_t next = col_[r];
        if (seen_col_[next] != 0) {
          continue;
        }
        seen_col_[next] = 1;
        from_[next] = c;
        if (in_r_[next] == 0) {
          // Shift along the path: each row takes the column it was reached from.
          std::vector<std::pair<std::size_t, std::size_t>> moves;
          for (std::size_t col = next; col != a; col = from_[col]) {
            moves.emplace_back(row_[col], from_[col]);
          }
          row_[next] = kFree;
          for (const auto& [row, col] : moves) {
            col_[row] = col;
            row_[col] = row;
          }
          return true;
        }
        queue.push_back(next);
      }
    }
    return false;
  }

  std::size_t n_;
  std::size_t m_;
  std::vector<std::vector<std::size_t>> row_adj_;
  std::vector<std::vector<std::size_t>> col_adj_;
  std::vector<std::uint8_t> in_r_;
  std::vector<std::size_t> col_;
  std::vector<std::size_t> row_;
  std::vector<std::uint8_t> seen_row_;
  std::vector<std::uint8_t> seen_col_;
  std::vector<std::size_t> from_;
};

} // namespace

Assignment exact_match(std::span<const Vec2> atoms, std::span<const Vec2> targets) {
  if (atoms.size() < targets.size()) {
    throw InsufficientAtoms(atoms.size(), targets.size());
  }
  Assignment a;
  if (!targets.empty()) {
    const Duals d = solve(atoms, targets);
    a.atom_for_target = LexPass(atoms, targets, d).run();
  }
  recompute_metrics(a, atoms, targets);
  return a;
}

} // namespace twz::match
