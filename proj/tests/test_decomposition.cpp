#include <gtest/gtest.h>

#include <random>

#include "ard/decomposition.hpp"
#include "ard/map_io.hpp"

using namespace ard;

namespace {

PiecewiseMap square() { return PiecewiseMap::continuous({Branch::power(0.0, 1.0, {2.0})}); }

PiecewiseMap doubling() {
  return PiecewiseMap::lorenz(Branch::affine(0.0, 0.5, 2.0, 0.0), Branch::affine(0.5, 1.0, 2.0, -1.0));
}

PiecewiseMap bundled(const std::string& name) { return load_map(std::string(ARD_MAPS_DIR) + "/" + name + ".json"); }

// Orbit of [a,b] = [0.35, 0.65] under x -> 1.3x + 0.35 (x < 1/2), 1.3x - 0.65 (x > 1/2),
// pushed through the two affine pieces by hand until it closes up.
IntervalUnion beta13_orbit() {
  std::vector<Interval> pieces{{0.35, 0.65}};
  std::vector<Interval> frontier = pieces;
  for (int step = 0; step < 4; ++step) {
    std::vector<Interval> next;
    for (auto iv : frontier) {
      if (iv.lo < 0.5) next.push_back({1.3 * iv.lo + 0.35, 1.3 * std::min(iv.hi, 0.5) + 0.35});
      if (iv.hi > 0.5) next.push_back({1.3 * std::max(iv.lo, 0.5) - 0.65, 1.3 * iv.hi - 0.65});
    }
    for (auto& iv : next) iv = {std::clamp(iv.lo, 0.0, 1.0), std::clamp(iv.hi, 0.0, 1.0)};
    pieces.insert(pieces.end(), next.begin(), next.end());
    frontier = next;
  }
  return IntervalUnion::normalize(pieces);
}

void expect_chain_properties(const PiecewiseMap& f, const ARChain& ch) {
  const double w = ch.box_width;
  const std::size_t m = ch.level_count();
  for (std::size_t i = 1; i <= m; ++i) {
    EXPECT_TRUE(subset(ch.attracting(i), ch.attracting(i - 1), 1e-12));
    EXPECT_GT(hausdorff(ch.attracting(i - 1), ch.attracting(i)), w);
    if (i < m) {
      EXPECT_TRUE(subset(ch.repelling(i), ch.repelling(i + 1), 1e-12));
    }
    const auto& r = ch.repelling(i);
    EXPECT_LE(hausdorff(f.image(r), r), 2 * w) << "level " << i;
    EXPECT_TRUE(subset(f.preimage(r), dilate(r, 2 * w), 1e-12)) << "level " << i;
    EXPECT_TRUE(subset(f.image(ch.attracting(i)), dilate(ch.attracting(i), 2 * w), 1e-12));
  }
  for (std::size_t i = 0; i < ch.morse_sets.size(); ++i) {
    for (std::size_t j = i + 1; j < ch.morse_sets.size(); ++j) {
      EXPECT_LE(intersect(ch.morse_sets[i], ch.morse_sets[j]).measure(), 1e-12);
    }
  }
  IntervalUnion covered = unite(ch.morse_union(), ch.overlap());
  for (const auto& c : ch.connecting_regions) covered = unite(covered, c);
  IntervalUnion missing = complement(covered);
  EXPECT_LE(missing.measure(), 1e-12);
}

}  // namespace

TEST(MaximalAttracting, SquareShrinksToZero) {
  RefinedCover cover(square(), 256);
  auto a = maximal_proper_attracting_set(square(), IntervalUnion::full(), cover);
  ASSERT_TRUE(a.has_value());
  EXPECT_LE(hausdorff(a->attracting, IntervalUnion::point(0.0)), 1.0 / 256);
  EXPECT_TRUE(subset(IntervalUnion::single(0.0, 1.0 - 1.0 / 256), a->basin, 1e-12));
  auto r = repelling_set(square(), a->attracting, cover);
  EXPECT_LE(hausdorff(r, IntervalUnion::point(1.0)), 1.0 / 256);
}

TEST(MaximalAttracting, DoublingHasNone) {
  RefinedCover cover(doubling(), 256);
  EXPECT_FALSE(maximal_proper_attracting_set(doubling(), IntervalUnion::full(), cover).has_value());
}

TEST(MaximalAttracting, LorenzMatchesRenormalizationOrbit) {
  auto f = bundled("lorenz_beta13");
  RefinedCover cover(f, 512);
  auto a = maximal_proper_attracting_set(f, IntervalUnion::full(), cover);
  ASSERT_TRUE(a.has_value());
  EXPECT_LE(hausdorff(a->attracting, beta13_orbit()), 4.0 / 512);
}

TEST(Chain, Square) {
  auto ch = leveled_decomposition(square(), kDefaultMaxDepth, 256);
  ASSERT_EQ(ch.level_count(), 1u);
  EXPECT_FALSE(ch.truncated);
  EXPECT_FALSE(ch.transitive());
  EXPECT_LE(hausdorff(ch.attracting(1), IntervalUnion::point(0.0)), 1.0 / 256);
  EXPECT_LE(hausdorff(ch.repelling(1), IntervalUnion::point(1.0)), 1.0 / 256);
  ASSERT_EQ(ch.morse_sets.size(), 2u);
  EXPECT_LE(hausdorff(ch.morse_sets[0], IntervalUnion::point(1.0)), 1.0 / 256);
  EXPECT_LE(hausdorff(ch.morse_sets[1], IntervalUnion::point(0.0)), 1.0 / 256);
  EXPECT_TRUE(ch.overlap().empty());
  expect_chain_properties(square(), ch);
}

TEST(Chain, DoublingIsTransitive) {
  auto ch = leveled_decomposition(doubling(), kDefaultMaxDepth, 256);
  EXPECT_EQ(ch.level_count(), 0u);
  EXPECT_TRUE(ch.transitive());
  EXPECT_EQ(ch.attractor, IntervalUnion::full());
  ASSERT_EQ(ch.morse_sets.size(), 1u);
  EXPECT_EQ(ch.morse_sets[0], IntervalUnion::full());
}

TEST(Chain, LorenzOnceRenormalizable) {
  auto f = bundled("lorenz_beta13");
  for (std::size_t depth : {1u, 8u}) {
    auto ch = leveled_decomposition(f, depth, 512);
    ASSERT_EQ(ch.level_count(), 1u);
    EXPECT_FALSE(ch.truncated);
    EXPECT_LE(hausdorff(ch.attracting(1), beta13_orbit()), 4.0 / 512);
    expect_chain_properties(f, ch);
  }
}

TEST(Chain, TwiceRenormalizableAtFineResolution) {
  auto f = bundled("lorenz_beta115");
  auto ch = leveled_decomposition(f, kDefaultMaxDepth, 1024);
  EXPECT_EQ(ch.level_count(), 2u);
  expect_chain_properties(f, ch);
}

TEST(Chain, DepthCapSetsTruncated) {
  auto f = bundled("lorenz_beta115");
  auto ch = leveled_decomposition(f, 1, 1024);
  EXPECT_EQ(ch.level_count(), 1u);
  EXPECT_TRUE(ch.truncated);
  auto none = leveled_decomposition(square(), 0, 256);
  EXPECT_EQ(none.level_count(), 0u);
  EXPECT_TRUE(none.truncated);
  EXPECT_FALSE(none.transitive());
}

TEST(Chain, ResolutionErrorCarriesLevel) {
  auto f = bundled("lorenz_beta115");
  try {
    leveled_decomposition(f, kDefaultMaxDepth, 512);
    FAIL() << "expected a resolution error";
  } catch (const ResolutionError& e) {
    EXPECT_EQ(e.level(), 2u);
  }
}

TEST(ClassifyAlpha, Examples) {
  auto sq = leveled_decomposition(square(), kDefaultMaxDepth, 256);
  EXPECT_EQ(classify_alpha(sq, 0.5), AlphaClass::repeller(1));
  EXPECT_EQ(classify_alpha(sq, 0.0), AlphaClass::whole());
  auto d = leveled_decomposition(doubling(), kDefaultMaxDepth, 256);
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(classify_alpha(d, unit(rng)), AlphaClass::whole());
}

TEST(ClassifyAlpha, LorenzRegions) {
  auto ch = leveled_decomposition(bundled("lorenz_beta13"), kDefaultMaxDepth, 512);
  EXPECT_EQ(classify_alpha(ch, 0.5), AlphaClass::whole());
  EXPECT_EQ(classify_alpha(ch, 0.27), AlphaClass::repeller(1));
  EXPECT_FALSE(classify_alpha(ch, ch.attracting(1).intervals()[0].hi).definite());
}

TEST(ClassifyAlpha, Labels) {
  EXPECT_EQ(AlphaClass::whole().label(1), "X");
  EXPECT_EQ(AlphaClass::repeller(1).label(1), "R1");
  EXPECT_EQ(AlphaClass::overlap(1).label(1), "overlap(R1|X)");
  EXPECT_EQ(AlphaClass::overlap(1).label(2), "overlap(R1|R2)");
  EXPECT_EQ(AlphaClass::whole().alpha_index(2), 3u);
}

TEST(AlphaEstimate, SquareRootChainTendsToOne) {
  auto est = alpha_limit_estimate(square(), 0.5, 20, 4096);
  EXPECT_LE(hausdorff(est, IntervalUnion::point(1.0)), 1e-3);
  EXPECT_LE(hausdorff(alpha_limit_estimate(square(), 1.0, 5, 16), IntervalUnion::point(1.0)), 1.0 / 4096);
}

TEST(AlphaEstimate, DoublingIsDense) {
  auto est = alpha_limit_estimate(doubling(), 0.5, 12, 4096);
  EXPECT_LE(hausdorff(est, IntervalUnion::full()), std::pow(2.0, -10));
}

TEST(AlphaEstimate, TreeDiesReportsDepth) {
  auto contraction = PiecewiseMap::continuous({Branch::affine(0.0, 1.0, 0.5, 0.25)});
  try {
    alpha_limit_estimate(contraction, 0.3, 5, 16);
    FAIL() << "expected the preimage tree to die";
  } catch (const PreimageTreeDiedError& e) {
    EXPECT_EQ(e.last_nonempty_depth(), 1u);  // 0.3 <- 0.1 <- nothing
  }
  EXPECT_THROW(alpha_limit_estimate(square(), 0.5, 0, 16), DomainError);
}

TEST(AlphaEstimate, MatchesRepellerOffTheAttractor) {
  auto f = bundled("lorenz_beta13");
  auto ch = leveled_decomposition(f, kDefaultMaxDepth, 256);
  const double w = ch.box_width;
  for (double x : {0.22, 0.27, 0.3, 0.72, 0.75}) {
    ASSERT_EQ(classify_alpha(ch, x), AlphaClass::repeller(1)) << x;
    EXPECT_LE(hausdorff(alpha_limit_estimate(f, x, 16, 2048), ch.repelling(1)), 5 * w) << x;
  }
}
