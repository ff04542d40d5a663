#include "twz/match/matching.hpp"

#include "twz/core/parallel.hpp"
#include "twz/core/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>

namespace twz::match {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Tiling {
  double x0 = 0.0;
  double y0 = 0.0;
  double size = 1.0;
  std::size_t nx = 1;
  std::size_t ny = 1;

  [[nodiscard]] std::size_t block_of(const Vec2& p) const {
    const auto bx = std::min(nx - 1, static_cast<std::size_t>(std::floor((p.x - x0) / size)));
    const auto by = std::min(ny - 1, static_cast<std::size_t>(std::floor((p.y - y0) / size)));
    return by * nx + bx;
  }
  /// Squared distance from p to the closed square of block b.
  [[nodiscard]] double box_distance2(const Vec2& p, std::size_t b) const {
    const double lx = x0 + size * static_cast<double>(b % nx);
    const double ly = y0 + size * static_cast<double>(b / nx);
    const double dx = std::max({lx - p.x, 0.0, p.x - (lx + size)});
    const double dy = std::max({ly - p.y, 0.0, p.y - (ly + size)});
    return dx * dx + dy * dy;
  }
};

Tiling make_tiling(std::span<const Vec2> atoms, std::span<const Vec2> targets, double size) {
  double x0 = std::numeric_limits<double>::infinity();
  double y0 = x0;
  double x1 = -x0;
  double y1 = -x0;
  for (const auto pts : {atoms, targets}) {
    for (const Vec2& p : pts) {
      x0 = std::min(x0, p.x);
      y0 = std::min(y0, p.y);
      x1 = std::max(x1, p.x);
      y1 = std::max(y1, p.y);
    }
  }
  Tiling t;
  t.x0 = x0;
  t.y0 = y0;
  t.size = size;
  t.nx = static_cast<std::size_t>(std::floor((x1 - x0) / size)) + 1;
  t.ny = static_cast<std::size_t>(std::floor((y1 - y0) / size)) + 1;
  return t;
}

/// Number of shortest-path rounds; the batch size grows with the total
/// deficit so the planning cost does not.
constexpr long long kBatches = 128;

/// Edge between block `a` and its east (dir 0) or north (dir 1) neighbour.
struct FlowEdge {
  std::size_t a = 0;
  std::size_t b = 0;
  /// Net atoms moved a→b (negative: b→a).
  long long flow = 0;
};

/// Convex (quadratic per edge) transport of surplus atoms into deficit blocks
/// by successive shortest paths in batches. Flow k across one boundary costs
/// k², the continuum cost of shifting a uniform density by a displacement
/// proportional to the flux.
std::vector<FlowEdge> plan_transport(const Tiling& t, std::span<const long long> balance,
                                     std::uint64_t seed) {
  const std::size_t nb = t.nx * t.ny;
  std::vector<FlowEdge> edges;
  std::vector<std::vector<std::pair<std::size_t, bool>>> adj(nb);
  for (std::size_t b = 0; b < nb; ++b) {
    const std::size_t bx = b % t.nx;
    const std::size_t by = b / t.nx;
    if (bx + 1 < t.nx) {
      edges.push_back({b, b + 1, 0});
    }
    if (by + 1 < t.ny) {
      edges.push_back({b, b + t.nx, 0});
    }
  }
  for (std::size_t e = 0; e < edges.size(); ++e) {
    adj[edges[e].a].emplace_back(e, true);
    adj[edges[e].b].emplace_back(e, false);
  }
  std::vector<long long> surplus(nb);
  std::vector<long long> deficit(nb);
  long long total_deficit = 0;
  for (std::size_t b = 0; b < nb; ++b) {
    surplus[b] = std::max(0LL, balance[b]);
    deficit[b] = std::max(0LL, -balance[b]);
    total_deficit += deficit[b];
  }
  if (total_deficit == 0) {
    return edges;
  }
  const long long batch = std::max(1LL, (total_deficit + kBatches - 1) / kBatches);

  // Seeded tie order among equally distant deficit blocks.
  std::vector<std::size_t> rank(nb);
  {
    std::vector<std::size_t> perm(nb);
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng = make_rng(seed, 0xB10C);
    for (std::size_t i = nb; i > 1; --i) {
      std::swap(perm[i - 1], perm[uniform_index(rng, i)]);
    }
    for (std::size_t i = 0; i < nb; ++i) {
      rank[perm[i]] = i;
    }
  }

  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(nb);
  std::vector<double> potential(nb, 0.0);
  std::vector<std::size_t> via(nb);
  std::vector<std::size_t> origin(nb);
  std::vector<std::uint8_t> done(nb);
  const auto step_cost = [&](const FlowEdge& e, bool forward) {
    const auto f = static_cast<double>(forward ? e.flow : -e.flow);
    const auto g = static_cast<double>(batch);
    return (f + g) * (f + g) - f * f;
  };
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  while (total_deficit > 0) {
    // Dijkstra on reduced costs from every block that still has surplus.
    std::fill(dist.begin(), dist.end(), inf);
    std::fill(done.begin(), done.end(), 0);
    double base = inf;
    for (std::size_t b = 0; b < nb; ++b) {
      if (surplus[b] > 0) {
        base = std::min(base, potential[b]);
      }
    }
    for (std::size_t b = 0; b < nb; ++b) {
      if (surplus[b] > 0) {
        dist[b] = potential[b] - base;
        origin[b] = b;
        via[b] = static_cast<std::size_t>(-1);
        heap.emplace(dist[b], b);
      }
    }
    while (!heap.empty()) {
      const auto [d, b] = heap.top();
      heap.pop();
      if (done[b] != 0) {
        continue;
      }
      done[b] = 1;
      for (const auto& [e, from_a] : adj[b]) {
        const std::size_t to = from_a ? edges[e].b : edges[e].a;
        // Partial batches can leave tiny negative reduced costs; clamp them.
        const double reduced =
            std::max(0.0, step_cost(edges[e], from_a) + potential[b] - potential[to]);
        if (d + reduced < dist[to]) {
          dist[to] = d + reduced;
          via[to] = e;
          origin[to] = origin[b];
          heap.emplace(dist[to], to);
        }
      }
    }
    std::size_t sink = nb;
    double sink_cost = inf;
    for (std::size_t b = 0; b < nb; ++b) {
      if (deficit[b] == 0 || dist[b] == inf) {
        continue;
      }
      const double true_cost = dist[b] - potential[b];
      if (sink == nb || true_cost < sink_cost ||
          (true_cost == sink_cost && rank[b] < rank[sink])) {
        sink = b;
        sink_cost = true_cost;
      }
    }
    if (sink == nb) {
      break;
    }
    double reach = 0.0;
    for (std::size_t b = 0; b < nb; ++b) {
      if (dist[b] < inf) {
        reach = std::max(reach, dist[b]);
      }
    }
    for (std::size_t b = 0; b < nb; ++b) {
      potential[b] += dist[b] < inf ? dist[b] : reach;
    }
    const std::size_t source = origin[sink];
    const long long amount = std::min({batch, deficit[sink], surplus[source]});
    for (std::size_t b = sink; b != source;) {
      FlowEdge& e = edges[via[b]];
      if (e.b == b) {
        e.flow += amount;
        b = e.a;
      } else {
        e.flow -= amount;
        b = e.b;
      }
    }
    deficit[sink] -= amount;
    surplus[source] -= amount;
    total_deficit -= amount;
  }
  return edges;
}

} // namespace

Assignment block_match(std::span<const Vec2> atoms, std::span<const Vec2> targets,
                       const BlockMatchOptions& options, BlockMatchStats* stats) {
  if (atoms.size() < targets.size()) {
    throw InsufficientAtoms(atoms.size(), targets.size());
  }
  if (!(options.block_size > 0.0)) {
    throw Error("block size must be positive");
  }
  Assignment result;
  BlockMatchStats st;
  const auto t_start = Clock::now();
  if (targets.empty()) {
    recompute_metrics(result, atoms, targets);
    if (stats != nullptr) {
      *stats = st;
    }
    return result;
  }

  const Tiling tiling = make_tiling(atoms, targets, options.block_size);
  const std::size_t nb = tiling.nx * tiling.ny;
  std::vector<std::vector<std::size_t>> block_targets(nb);
  std::vector<std::vector<std::size_t>> pool(nb);
  for (std::size_t j = 0; j < targets.size(); ++j) {
    block_targets[tiling.block_of(targets[j])].push_back(j);
  }
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    pool[tiling.block_of(atoms[i])].push_back(i);
  }
  std::vector<long long> balance(nb);
  for (std::size_t b = 0; b < nb; ++b) {
    balance[b] = static_cast<long long>(pool[b].size()) -
                 static_cast<long long>(block_targets[b].size());
  }
  const std::vector<FlowEdge> edges = plan_transport(tiling, balance, options.seed);
  st.setup_seconds = seconds_since(t_start);

  // Hand atoms over in topological order of the flow so a block forwards
  // only after it has received.
  std::vector<std::vector<std::pair<std::size_t, long long>>> out(nb);
  std::vector<std::size_t> indegree(nb, 0);
  for (const FlowEdge& e : edges) {
    if (e.flow > 0) {
      out[e.a].emplace_back(e.b, e.flow);
      ++indegree[e.b];
    } else if (e.flow < 0) {
      out[e.b].emplace_back(e.a, -e.flow);
      ++indegree[e.a];
    }
  }
  std::vector<std::size_t> order;
  order.reserve(nb);
  for (std::size_t b = 0; b < nb; ++b) {
    if (indegree[b] == 0) {
      order.push_back(b);
    }
  }
  for (std::size_t q = 0; q < order.size(); ++q) {
    for (const auto& [to, k] : out[order[q]]) {
      if (--indegree[to] == 0) {
        order.push_back(to);
      }
    }
  }
  for (std::size_t b = 0; b < nb; ++b) {
    if (indegree[b] != 0) {
      order.push_back(b); // only reachable through a flow cycle
    }
  }
  // Each hand-over is a task that can start once all inflows have arrived;
  // ready[b] tracks the earliest finish along the flow DAG.
  std::vector<double> ready(nb, 0.0);
  for (const std::size_t b : order) {
    const auto t_block = Clock::now();
    for (const auto& [to, k] : out[b]) {
      auto& from = pool[b];
      std::vector<std::pair<double, std::size_t>> keyed;
      keyed.reserve(from.size());
      for (const std::size_t atom : from) {
        keyed.emplace_back(tiling.box_distance2(atoms[atom], to), atom);
      }
      std::sort(keyed.begin(), keyed.end());
      const auto give = std::min(static_cast<std::size_t>(k), keyed.size());
      for (std::size_t g = 0; g < give; ++g) {
        pool[to].push_back(keyed[g].second);
      }
      st.borrowed += give;
      from.clear();
      for (std::size_t g = give; g < keyed.size(); ++g) {
        from.push_back(keyed[g].second);
      }
    }
    const double finish = ready[b] + seconds_since(t_block);
    for (const auto& [to, k] : out[b]) {
      ready[to] = std::max(ready[to], finish);
    }
    st.handover_critical_seconds = std::max(st.handover_critical_seconds, finish);
  }
  const auto t_topup = Clock::now();
  // A block can still be short only if the flow left a cycle; top it up with
  // the globally nearest spare atoms.
  {
    std::vector<std::size_t> spare_block(atoms.size(), nb);
    for (std::size_t b = 0; b < nb; ++b) {
      for (const std::size_t atom : pool[b]) {
        spare_block[atom] = b;
      }
    }
    for (std::size_t b = 0; b < nb; ++b) {
      while (pool[b].size() < block_targets[b].size()) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t pick = atoms.size();
        for (std::size_t o = 0; o < nb; ++o) {
          if (pool[o].size() <= block_targets[o].size()) {
            continue;
          }
          for (const std::size_t atom : pool[o]) {
            const double d = tiling.box_distance2(atoms[atom], b);
            if (d < best) {
              best = d;
              pick = atom;
            }
          }
        }
        auto& src = pool[spare_block[pick]];
        src.erase(std::find(src.begin(), src.end(), pick));
        pool[b].push_back(pick);
        spare_block[pick] = b;
        ++st.borrowed;
      }
    }
  }
  for (auto& p : pool) {
    std::sort(p.begin(), p.end());
  }
  st.blocks = nb;
  st.setup_seconds += seconds_since(t_topup);

  std::vector<std::vector<std::size_t>> local(nb);
  std::vector<double> block_seconds(nb, 0.0);
  parallel_for(nb, [&](std::size_t b) {
    if (block_targets[b].empty()) {
      return;
    }
    const auto t0 = Clock::now();
    std::vector<Vec2> pa;
    std::vector<Vec2> pt;
    pa.reserve(pool[b].size());
    pt.reserve(block_targets[b].size());
    for (const std::size_t i : pool[b]) {
      pa.push_back(atoms[i]);
    }
    for (const std::size_t j : block_targets[b]) {
      pt.push_back(targets[j]);
    }
    local[b] = exact_match(pa, pt).atom_for_target;
    block_seconds[b] = seconds_since(t0);
  });

  const auto t_merge = Clock::now();
  result.atom_for_target.assign(targets.size(), 0);
  for (std::size_t b = 0; b < nb; ++b) {
    for (std::size_t k = 0; k < block_targets[b].size(); ++k) {
      result.atom_for_target[block_targets[b][k]] = pool[b][local[b][k]];
    }
    st.max_block_seconds = std::max(st.max_block_seconds, block_seconds[b]);
    st.sum_block_seconds += block_seconds[b];
  }
  recompute_metrics(result, atoms, targets);
  st.merge_seconds = seconds_since(t_merge);
  st.wall_seconds = seconds_since(t_start);
  if (stats != nullptr) {
    *stats = st;
  }
  return result;
}

} // namespace twz::match
