#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "ard/box_graph.hpp"

using namespace ard;

namespace {

PiecewiseMap square() { return PiecewiseMap::continuous({Branch::power(0.0, 1.0, {2.0})}); }

PiecewiseMap doubling() {
  return PiecewiseMap::lorenz(Branch::affine(0.0, 0.5, 2.0, 0.0), Branch::affine(0.5, 1.0, 2.0, -1.0));
}

PiecewiseMap logistic() {
  return PiecewiseMap::continuous({Branch::logistic(0.0, 0.5, 4.0), Branch::logistic(0.5, 1.0, 4.0)});
}

std::vector<std::size_t> succ_of(const TransitionGraph& g, std::size_t k) {
  auto s = g.successors(k);
  return {s.begin(), s.end()};
}

// Path of exactly `steps` edges inside n starting at k, by plain enumeration.
bool has_path(const TransitionGraph& g, const BoxSet& n, std::size_t k, std::size_t steps, bool forward) {
  if (!n.contains(k)) return false;
  if (steps == 0) return true;
  auto next = forward ? g.successors(k) : g.predecessors(k);
  for (auto j : next)
    if (has_path(g, n, j, steps - 1, forward)) return true;
  return false;
}

BoxSet brute_inv_m(const TransitionGraph& g, const BoxSet& n, std::size_t m) {
  BoxSet out(g.size());
  for (std::size_t k = 0; k < g.size(); ++k)
    if (has_path(g, n, k, m, true) && has_path(g, n, k, m, false)) out.insert(k);
  return out;
}

TransitionGraph random_graph(std::mt19937_64& rng, std::size_t n, double p) {
  std::bernoulli_distribution edge(p);
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t j = 0; j < n; ++j)
      if (edge(rng)) edges.emplace_back(k, j);
  return TransitionGraph::from_edges(n, edges);
}

BoxSet random_set(std::mt19937_64& rng, std::size_t n, double p) {
  std::bernoulli_distribution in(p);
  BoxSet s(n);
  for (std::size_t k = 0; k < n; ++k)
    if (in(rng)) s.insert(k);
  return s;
}

}  // namespace

TEST(BoxCover, RejectsNonPowerOfTwo) {
  EXPECT_THROW(BoxCover(100), UsageError);
  EXPECT_THROW(BoxCover(1), UsageError);
  EXPECT_NO_THROW(BoxCover(2));
}

TEST(BoxCover, BoxesAndIndex) {
  BoxCover c(4);
  EXPECT_EQ(c.box(1), (Interval{0.25, 0.5}));
  EXPECT_EQ(c.index_of(0.3), 1u);
  EXPECT_EQ(c.index_of(1.0), 3u);
}

TEST(BoxSet, AlgebraAndIntervals) {
  auto a = BoxSet::of(8, {0, 1, 5});
  auto b = BoxSet::of(8, {1, 2});
  EXPECT_EQ(a & b, BoxSet::of(8, {1}));
  EXPECT_EQ(a | b, BoxSet::of(8, {0, 1, 2, 5}));
  EXPECT_EQ(a - b, BoxSet::of(8, {0, 5}));
  EXPECT_EQ(a.complement().count(), 5u);
  EXPECT_EQ(BoxSet::of(8, {3}).dilate(), BoxSet::of(8, {2, 3, 4}));
  auto u = a.to_intervals();
  ASSERT_EQ(u.size(), 2u);
  EXPECT_EQ(u.intervals()[0], (Interval{0.0, 0.25}));
  EXPECT_EQ(u.intervals()[1], (Interval{0.625, 0.75}));
  EXPECT_TRUE(BoxSet::of(8, {1}).subset_of(a));
}

TEST(BuildGraph, Examples) {
  auto d = build_graph(doubling(), 4);
  EXPECT_EQ(succ_of(d, 0), (std::vector<std::size_t>{0, 1}));
  auto s = build_graph(square(), 4);
  EXPECT_EQ(succ_of(s, 0), (std::vector<std::size_t>{0}));
  EXPECT_EQ(succ_of(s, 3), (std::vector<std::size_t>{2, 3}));
}

TEST(BuildGraph, OuterApproximation) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (const auto& f : {square(), logistic()}) {
    for (std::size_t n : {64u, 256u}) {
      auto g = build_graph(f, n);
      const BoxCover& c = g.cover();
      for (int i = 0; i < 10000; ++i) {
        double x = unit(rng);
        double y = f.eval(x);
        std::size_t k = c.index_of(x), j = c.index_of(y);
        EXPECT_TRUE(g.has_edge(k, j)) << "x=" << x << " n=" << n;
      }
    }
  }
}

TEST(BuildGraph, DumpEdges) {
  std::ostringstream os;
  dump_edges(build_graph(square(), 2), os);
  EXPECT_EQ(os.str(), "0 -> 0\n1 -> 0\n1 -> 1\n");
}

TEST(InvM, Examples) {
  auto cycle = TransitionGraph::from_edges(2, {{0, 1}, {1, 0}});
  EXPECT_EQ(inv_m(cycle, BoxSet(2, true), 1), BoxSet(2, true));
  auto edge = TransitionGraph::from_edges(2, {{0, 1}});
  EXPECT_TRUE(inv_m(edge, BoxSet(2, true), 1).empty());
  EXPECT_TRUE(inv_m(cycle, BoxSet(2), 3).empty());
}

TEST(Inv, Examples) {
  auto g = TransitionGraph::from_edges(4, {{0, 0}, {0, 1}, {1, 2}, {2, 2}, {3, 3}});
  EXPECT_EQ(inv(g, BoxSet(4, true)), BoxSet(4, true));
  EXPECT_EQ(inv(g, BoxSet::of(4, {0, 1})), BoxSet::of(4, {0}));
  EXPECT_EQ(inv(g, BoxSet::of(4, {1, 2})), BoxSet::of(4, {2}));
  EXPECT_TRUE(inv(g, BoxSet::of(4, {1})).empty());
}

TEST(InvM, MatchesPathEnumeration) {
  std::mt19937_64 rng(32);
  for (int trial = 0; trial < 200; ++trial) {
    auto g = random_graph(rng, 8, 0.2);
    auto n = random_set(rng, 8, 0.7);
    for (std::size_t m = 0; m <= 5; ++m) EXPECT_EQ(inv_m(g, n, m), brute_inv_m(g, n, m));
    // paths of length |N| must revisit a box, so they extend forever
    EXPECT_EQ(inv(g, n), brute_inv_m(g, n, 8));
  }
}

TEST(InvM, AntitoneInMAndMonotoneInN) {
  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 100; ++trial) {
    auto g = random_graph(rng, 16, 0.15);
    auto n = random_set(rng, 16, 0.7);
    auto sub = n & random_set(rng, 16, 0.8);
    for (std::size_t m = 0; m < 6; ++m) {
      EXPECT_TRUE(inv_m(g, n, m + 1).subset_of(inv_m(g, n, m)));
      EXPECT_TRUE(inv_m(g, sub, m).subset_of(inv_m(g, n, m)));
    }
    auto core = inv(g, n);
    EXPECT_TRUE(core.subset_of(inv_m(g, n, 6)));
    EXPECT_EQ(inv_m(g, core, 1), core);
    EXPECT_EQ(inv(g, core), core);
  }
}

TEST(Inv, RefinementShrinksCore) {
  // Inv of the preimage-closed set [0, 1/4] for x^2 at two resolutions.
  auto coarse = build_graph(square(), 64);
  auto fine = build_graph(square(), 128);
  auto a = inv(coarse, BoxSet::from_intervals(coarse.cover(), IntervalUnion::single(0.0, 0.25)));
  auto b = inv(fine, BoxSet::from_intervals(fine.cover(), IntervalUnion::single(0.0, 0.25)));
  EXPECT_TRUE(subset(b.to_intervals(), a.to_intervals(), 1e-12));
}

TEST(IsIsolating, Examples) {
  auto g = build_graph(square(), 64);
  auto full = is_isolating(g, BoxSet(64, true));
  EXPECT_FALSE(full.isolating);
  EXPECT_TRUE(full.whole_cover);
  auto near_zero = BoxSet::from_intervals(g.cover(), IntervalUnion::single(0.0, 0.25 + 1.0 / 128));
  EXPECT_TRUE(is_isolating(g, near_zero).isolating);
  EXPECT_TRUE(is_isolating(g, BoxSet(64)).isolating);
}

TEST(IsIsolating, BoundaryWitness) {
  // Inv of {0,1} is {0,1}, and box 1 touches the exterior box 2.
  auto g = TransitionGraph::from_edges(4, {{0, 1}, {1, 0}, {2, 2}, {3, 3}});
  auto r = is_isolating(g, BoxSet::of(4, {0, 1}));
  EXPECT_FALSE(r.isolating);
  ASSERT_TRUE(r.witness.has_value());
  EXPECT_EQ(*r.witness, 1u);
}

TEST(Reach, Examples) {
  auto g = build_graph(doubling(), 8);
  EXPECT_TRUE(reach(g, BoxSet::of(8, {3}), Direction::backward).full());
  auto s = build_graph(square(), 8);
  auto fwd = reach(s, BoxSet::of(8, {4}), Direction::forward);
  EXPECT_TRUE(fwd.contains(0));
  EXPECT_FALSE(fwd.contains(7));
  auto within = reach_within(s, BoxSet::of(8, {4}), BoxSet::of(8, {2, 3, 4}), Direction::forward);
  EXPECT_EQ(within, BoxSet::of(8, {2, 3, 4}));
}

TEST(RecurrentComponents, SquareHasTwoFixedPointComponents) {
  for (std::size_t n : {64u, 128u, 256u}) {
    auto g = build_graph(square(), n);
    auto comps = morse_components(g);
    ASSERT_EQ(comps.size(), 2u) << "n=" << n;
    // sources first: the repelling end at 1, then the attracting end at 0
    EXPECT_TRUE(comps[0].contains(n - 1));
    EXPECT_TRUE(comps[1].contains(0));
  }
}

TEST(RecurrentComponents, ComponentsPersistUnderRefinement) {
  auto coarse = morse_components(build_graph(square(), 64));
  auto fine = morse_components(build_graph(square(), 256));
  ASSERT_EQ(coarse.size(), fine.size());
  for (std::size_t i = 0; i < coarse.size(); ++i) {
    auto overlap = intersect(coarse[i].to_intervals(), fine[i].to_intervals());
    EXPECT_GT(overlap.measure(), 0.0);
  }
}

TEST(RecurrentComponents, DoublingIsOneComponent) {
  auto comps = recurrent_components(build_graph(doubling(), 64));
  ASSERT_EQ(comps.size(), 1u);
  EXPECT_TRUE(comps[0].full());
}

TEST(RecurrentComponents, AcyclicGraphHasNone) {
  auto g = TransitionGraph::from_edges(4, {{0, 1}, {1, 2}, {2, 3}});
  EXPECT_TRUE(recurrent_components(g).empty());
}

TEST(StrongComponents, PartitionTheRegion) {
  std::mt19937_64 rng(34);
  for (int trial = 0; trial < 50; ++trial) {
    auto g = random_graph(rng, 16, 0.12);
    auto region = random_set(rng, 16, 0.8);
    std::size_t total = 0;
    for (const auto& comp : strong_components(g, region)) {
      total += comp.size();
      for (auto a : comp)
        for (auto b : comp) {
          EXPECT_TRUE(reach_within(g, BoxSet::of(16, {a}), region, Direction::forward).contains(b));
        }
    }
    EXPECT_EQ(total, region.count());
  }
}
