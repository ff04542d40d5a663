#include "twz/core/rng.hpp"
#include "twz/match/lattice.hpp"
#include "twz/match/matching.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <limits>

using namespace twz;
using namespace twz::match;

namespace {

// Enumerates every injective target -> atom map in lexicographic order of the
// atom sequence and keeps the first strict minimum.
struct BruteForce {
  std::span<const Vec2> atoms;
  std::span<const Vec2> targets;
  std::vector<std::size_t> current;
  std::vector<bool> used;
  std::vector<std::size_t> best;
  double best_cost = std::numeric_limits<double>::infinity();

  void run(std::size_t j, double cost) {
    if (j == targets.size()) {
      if (cost < best_cost) {
        best_cost = cost;
        best = current;
      }
      return;
    }
    for (std::size_t a = 0; a < atoms.size(); ++a) {
      if (!used[a]) {
        used[a] = true;
        current.push_back(a);
        run(j + 1, cost + dist2(atoms[a], targets[j]));
        current.pop_back();
        used[a] = false;
      }
    }
  }
};

std::vector<Vec2> random_points(Rng& rng, std::size_t n, int range) {
  std::vector<Vec2> p;
  for (std::size_t i = 0; i < n; ++i) {
    p.push_back({static_cast<double>(uniform_index(rng, range)),
                 static_cast<double>(uniform_index(rng, range))});
  }
  return p;
}

struct Scene {
  std::vector<Vec2> atoms;
  std::vector<Vec2> targets;
};

Scene loaded_scene(std::uint64_t seed, std::size_t side, std::size_t target_side, double p) {
  Rng rng = make_rng(seed);
  Scene s;
  for (std::size_t j = 0; j < side; ++j) {
    for (std::size_t i = 0; i < side; ++i) {
      if (uniform(rng, 0.0, 1.0) < p) {
        s.atoms.push_back({static_cast<double>(i), static_cast<double>(j)});
      }
    }
  }
  const std::size_t off = (side - target_side) / 2;
  for (std::size_t j = 0; j < target_side; ++j) {
    for (std::size_t i = 0; i < target_side; ++i) {
      s.targets.push_back({static_cast<double>(off + i), static_cast<double>(off + j)});
    }
  }
  return s;
}

} // namespace

TEST(ExactMatch, AgreesWithBruteForce) {
  Rng rng = make_rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t t = 1 + uniform_index(rng, 6);
    const std::size_t a = t + uniform_index(rng, 3);
    const auto atoms = random_points(rng, a, 6);
    const auto targets = random_points(rng, t, 6);
    BruteForce bf{atoms, targets, {}, std::vector<bool>(a, false), {}};
    bf.run(0, 0.0);
    const Assignment got = exact_match(atoms, targets);
    ASSERT_EQ(got.cost, bf.best_cost) << "trial " << trial;
    ASSERT_EQ(got.atom_for_target, bf.best) << "trial " << trial;
  }
}

TEST(ExactMatch, TieBreakIsLexicographic) {
  // Two atoms equidistant from two targets: both pairings cost the same.
  const std::vector<Vec2> atoms = {{0, 0}, {2, 0}};
  const std::vector<Vec2> targets = {{1, 1}, {1, -1}};
  const Assignment a = exact_match(atoms, targets);
  EXPECT_EQ(a.atom_for_target, (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(a.cost, 4.0);
  EXPECT_EQ(a.longest, std::sqrt(2.0));
}

TEST(ExactMatch, InsufficientAtoms) {
  const std::vector<Vec2> atoms = {{0, 0}};
  const std::vector<Vec2> targets = {{1, 1}, {2, 2}};
  try {
    (void)exact_match(atoms, targets);
    FAIL();
  } catch (const InsufficientAtoms& e) {
    EXPECT_EQ(e.atoms(), 1U);
    EXPECT_EQ(e.targets(), 2U);
  }
  EXPECT_THROW((void)block_match(atoms, targets, {}), InsufficientAtoms);
}

TEST(ExactMatch, EmptyTargets) {
  const std::vector<Vec2> atoms = {{0, 0}};
  const Assignment a = exact_match(atoms, {});
  EXPECT_TRUE(a.atom_for_target.empty());
  EXPECT_EQ(a.cost, 0.0);
}

TEST(BlockMatch, ValidAndNearOptimal) {
  for (std::uint64_t seed = 1; seed <= 2; ++seed) {
    const Scene s = loaded_scene(seed, 62, 45, 0.65);
    const Assignment exact = exact_match(s.atoms, s.targets);
    BlockMatchStats stats;
    const Assignment block = block_match(s.atoms, s.targets, {10.0, seed}, &stats);
    EXPECT_NO_THROW(check_assignment(block, s.atoms.size(), s.targets.size()));
    EXPECT_GE(block.cost, exact.cost);
    EXPECT_LE(block.cost, 1.10 * exact.cost) << "seed " << seed;
    EXPECT_GT(stats.blocks, 1U);
    EXPECT_LE(stats.critical_path_seconds(), stats.wall_seconds + stats.sum_block_seconds);
  }
}

TEST(BlockMatch, Deterministic) {
  const Scene s = loaded_scene(9, 25, 18, 0.65);
  const Assignment a = block_match(s.atoms, s.targets, {8.0, 3});
  const Assignment b = block_match(s.atoms, s.targets, {8.0, 3});
  EXPECT_EQ(a.atom_for_target, b.atom_for_target);
}

TEST(MinSeparation, MatchesDenseSampling) {
  Rng rng = make_rng(21);
  for (int k = 0; k < 200; ++k) {
    const Vec2 a{uniform(rng, -5, 5), uniform(rng, -5, 5)};
    const Vec2 t{uniform(rng, -5, 5), uniform(rng, -5, 5)};
    const Vec2 b{uniform(rng, -5, 5), uniform(rng, -5, 5)};
    const Vec2 u{uniform(rng, -5, 5), uniform(rng, -5, 5)};
    double sampled = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 20000; ++i) {
      const double tau = i / 20000.0;
      sampled = std::min(sampled, dist(a + tau * (t - a), b + tau * (u - b)));
    }
    const double exact = min_separation(a, t, b, u);
    EXPECT_LE(exact, sampled + 1e-12);
    EXPECT_NEAR(exact, sampled, 1e-3);
  }
}

TEST(MinSeparation, HeadOnCrossing) {
  EXPECT_NEAR(min_separation({0, 0}, {2, 0}, {2, 0}, {0, 0}), 0.0, 1e-12);
  EXPECT_NEAR(min_separation({0, 0}, {1, 0}, {0, 1}, {1, 1}), 1.0, 1e-12);
}

TEST(Decollide, RemovesCrossingAndStaysWithinBudget) {
  // Crossed diagonal moves through a common midpoint; swapping is no more
  // expensive and separates them.
  const std::vector<Vec2> atoms = {{0, 0}, {0, 2}};
  const std::vector<Vec2> targets = {{2, 2}, {2, 0}};
  Assignment crossed;
  crossed.atom_for_target = {0, 1};
  recompute_metrics(crossed, atoms, targets);
  ASSERT_FALSE(find_collisions(crossed, atoms, targets, 1.0).empty());
  const Assignment fixed = decollide(crossed, atoms, targets, {1.0, 20, 0.05});
  EXPECT_TRUE(fixed.collisions.empty());
  EXPECT_LE(fixed.cost, 1.05 * crossed.cost);
  EXPECT_NO_THROW(check_assignment(fixed, 2, 2));
}

TEST(Decollide, PropertiesOnRandomScenes) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Scene s = loaded_scene(seed, 14, 9, 0.65);
    const Assignment exact = exact_match(s.atoms, s.targets);
    const Assignment d = decollide(exact, s.atoms, s.targets, {0.5, 20, 0.05});
    EXPECT_NO_THROW(check_assignment(d, s.atoms.size(), s.targets.size()));
    EXPECT_LE(d.cost, 1.05 * exact.cost + 1e-9);
    EXPECT_EQ(d.collisions, find_collisions(d, s.atoms, s.targets, 0.5));
  }
}

TEST(Reserve, NearestUnmatchedAtomsAreKept) {
  const std::vector<Vec2> atoms = {{0, 0}, {5, 0}, {1, 0}, {9, 0}, {3, 0}};
  const std::vector<Vec2> targets = {{0, 0}};
  const Assignment a = exact_match(atoms, targets);
  const ReserveSelection r = select_reserve(atoms, targets, a, 2);
  EXPECT_EQ(r.matched, (std::vector<std::size_t>{0}));
  EXPECT_EQ(r.reserved, (std::vector<std::size_t>{2, 4}));
  EXPECT_EQ(r.discarded, (std::vector<std::size_t>{1, 3}));
  const ReserveSelection all = select_reserve(atoms, targets, a, 10);
  EXPECT_EQ(all.reserved.size(), 4U);
  EXPECT_TRUE(all.discarded.empty());
}

TEST(Reserve, AtomOnTargetSiteIsNeverReserved) {
  const std::vector<Vec2> atoms = {{0, 0}, {1, 0}, {4, 0}};
  const std::vector<Vec2> targets = {{1, 0}, {8, 0}};
  Assignment a;
  a.atom_for_target = {0, 2};
  recompute_metrics(a, atoms, targets);
  const ReserveSelection r = select_reserve(atoms, targets, a, 1);
  EXPECT_TRUE(r.reserved.empty());
  EXPECT_EQ(r.discarded, (std::vector<std::size_t>{1}));
}

TEST(Assignment, CsvRoundTrip) {
  const std::vector<Vec2> atoms = {{0, 0}, {3, 4}, {1, 1}};
  const std::vector<Vec2> targets = {{0, 1}, {0, 0}};
  const Assignment a = exact_match(atoms, targets);
  const std::string csv = assignment_to_csv(a, atoms, targets);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "atom_index,target_index,d2");
  const Assignment b = assignment_from_csv(csv, atoms, targets);
  EXPECT_EQ(b.atom_for_target, a.atom_for_target);
  EXPECT_EQ(b.cost, a.cost);
  EXPECT_THROW((void)assignment_from_csv("atom_index,target_index,d2\n0,0,1\n0,1,0\n", atoms,
                                         targets),
               Error);
}

TEST(Assignment, CheckRejectsBadMaps) {
  Assignment a;
  a.atom_for_target = {0, 0};
  EXPECT_THROW(check_assignment(a, 3, 2), Error);
  a.atom_for_target = {0, 5};
  EXPECT_THROW(check_assignment(a, 3, 2), Error);
  a.atom_for_target = {0};
  EXPECT_THROW(check_assignment(a, 3, 2), Error);
}

TEST(Lattice, SquareCentring) {
  const SiteLattice l = square_lattice(4, 2.0, {10.0, 20.0});
  ASSERT_EQ(l.size(), 16U);
  EXPECT_EQ(l.sites[0], (Site{8.0, 18.0, 0}));
  EXPECT_EQ(l.sites[1], (Site{10.0, 18.0, 0}));
  EXPECT_EQ(l.sites[4], (Site{8.0, 20.0, 0}));
  EXPECT_NO_THROW(l.validate());
}

TEST(Lattice, TextRoundTripAndValidation) {
  SiteLattice l = square_lattice(3, 1.0, {0.0, 0.0}, 1);
  l.layers = 2;
  const SiteLattice back = parse_lattice(format_lattice(l), 1.0);
  EXPECT_EQ(back.sites, l.sites);
  const SiteLattice parsed = parse_lattice("# comment\n\n0 0 0\n1.5 2 1\n", 1.0);
  ASSERT_EQ(parsed.size(), 2U);
  EXPECT_EQ(parsed.sites[1], (Site{1.5, 2.0, 1}));
  EXPECT_EQ(parsed.layer_indices(1), (std::vector<std::size_t>{1}));
  SiteLattice dup;
  dup.sites = {{0, 0, 0}, {0, 0, 0}};
  EXPECT_THROW(dup.validate(), Error);
  SiteLattice bad_spacing = l;
  bad_spacing.spacing = 0.0;
  EXPECT_THROW(bad_spacing.validate(), Error);
  EXPECT_THROW((void)parse_lattice("0 zero 0\n", 1.0), Error);
}
