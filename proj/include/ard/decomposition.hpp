/** \file
 * decomposition.hpp: leveled attracting/repelling decomposition of a
 * piecewise-monotone map, Morse sets, and alpha-limit classification.
 *
 * Everything is computed on a pair of covers (n and 2n boxes). Each level is
 * extracted on both; the two outer approximations must agree to within four
 * coarse boxes, and the reported sets are their intersection (which is still
 * an outer approximation of the true set).
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ard/box_graph.hpp"
#include "ard/errors.hpp"
#include "ard/interval_set.hpp"
#include "ard/map_model.hpp"

namespace ard {

inline constexpr std::size_t kDefaultMaxDepth = 8;

/// Transition graphs of one map at n and 2n boxes.
class RefinedCover {
 public:
  RefinedCover(const PiecewiseMap& f, std::size_t n_boxes)
      : coarse_(build_graph(f, n_boxes)), fine_(build_graph(f, 2 * n_boxes)) {}

  const TransitionGraph& coarse() const { return coarse_; }
  const TransitionGraph& fine() const { return fine_; }
  std::size_t n_boxes() const { return coarse_.size(); }
  double box_width() const { return coarse_.cover().width(); }

 private:
  TransitionGraph coarse_;
  TransitionGraph fine_;
};

// ---------------------------------------------------------------------------
// Graph-level building blocks

/// Largest proper forward-invariant candidate inside `ambient`: the forward
/// closure of every Morse component except the top (source) ones. Returns
/// nullopt when the ambient holds a single Morse component, i.e. the map is
/// transitive there at this resolution.
inline std::optional<BoxSet> extract_attracting(const TransitionGraph& g, const BoxSet& ambient) {
  std::vector<BoxSet> comps = morse_components(g, ambient);
  if (comps.size() <= 1) return std::nullopt;
  BoxSet lower(g.size());
  for (std::size_t j = 0; j < comps.size(); ++j) {
    bool reached = false;
    for (std::size_t i = 0; i < comps.size() && !reached; ++i) {
      if (i == j) continue;
      BoxSet r = reach_within(g, comps[i], ambient, Direction::forward);
      reached = !(r & comps[j]).empty();
    }
    if (reached) lower |= comps[j];
  }
  if (lower.empty()) {
    throw InconsistencyError(
        "several incomparable Morse components: the map has more than one attractor");
  }
  return reach_within(g, lower, ambient, Direction::forward);
}

/// Dual repeller of a forward-invariant box set: Inv of its complement.
inline BoxSet repelling_boxes(const TransitionGraph& g, const BoxSet& attracting) {
  BoxSet r = inv(g, attracting.complement());
  if (r.empty()) {
    throw InconsistencyError("repelling set is empty: the attracting set is the whole space");
  }
  return r;
}

// ---------------------------------------------------------------------------
// Interval-level operations

struct AttractingSet {
  IntervalUnion attracting;
  IntervalUnion basin;  ///< outer approximation of B(A)
};

namespace detail {

inline IntervalUnion refine_intersect(const IntervalUnion& coarse, const IntervalUnion& fine,
                                      double width, std::size_t level, const char* what) {
  double gap = hausdorff(coarse, fine);
  if (gap > 4.0 * width) {
    std::ostringstream os;
    os << what << " at level " << level << " moves by " << gap
       << " under refinement (more than 4 box widths): resolution too coarse";
    throw ResolutionError(os.str(), level);
  }
  IntervalUnion both = intersect(coarse, fine);
  if (both.empty()) {
    std::ostringstream os;
    os << what << " approximations at level " << level << " do not overlap";
    throw ResolutionError(os.str(), level);
  }
  return both;
}

}  // namespace detail

inline std::optional<AttractingSet> maximal_proper_attracting_set(const PiecewiseMap& f,
                                                                  const IntervalUnion& ambient,
                                                                  const RefinedCover& cover) {
  (void)f;
  BoxSet amb_c = BoxSet::from_intervals(cover.coarse().cover(), ambient);
  BoxSet amb_f = BoxSet::from_intervals(cover.fine().cover(), ambient);
  auto a_c = extract_attracting(cover.coarse(), amb_c);
  auto a_f = extract_attracting(cover.fine(), amb_f);
  if (!a_c && !a_f) return std::nullopt;
  if (a_c.has_value() != a_f.has_value()) {
    throw ResolutionError("transitivity verdict changes under refinement", 1);
  }
  const double w = cover.box_width();
  IntervalUnion a = detail::refine_intersect(a_c->to_intervals(), a_f->to_intervals(), w, 1,
                                             "attracting set");
  IntervalUnion basin_c = reach(cover.coarse(), *a_c, Direction::backward).to_intervals();
  IntervalUnion basin_f = reach(cover.fine(), *a_f, Direction::backward).to_intervals();
  return AttractingSet{a, intersect(basin_c, basin_f)};
}

/// Points whose orbit never enters the basin of `attracting`, computed as the
/// invariant part of the complement of the attracting boxes.
inline IntervalUnion repelling_set(const PiecewiseMap& f, const IntervalUnion& attracting,
                                   const RefinedCover& cover) {
  (void)f;
  BoxSet a_c = reach(cover.coarse(), BoxSet::from_intervals(cover.coarse().cover(), attracting),
                     Direction::forward);
  BoxSet a_f = reach(cover.fine(), BoxSet::from_intervals(cover.fine().cover(), attracting),
                     Direction::forward);
  BoxSet r_c = repelling_boxes(cover.coarse(), a_c);
  BoxSet r_f = repelling_boxes(cover.fine(), a_f);
  return detail::refine_intersect(r_c.to_intervals(), r_f.to_intervals(), cover.box_width(), 1,
                                  "repelling set");
}

// ---------------------------------------------------------------------------
// The chain

struct ARLevel {
  std::size_t index = 0;
  IntervalUnion attracting;  ///< A_i
  IntervalUnion repelling;   ///< R_i
  IntervalUnion basin;       ///< outer approximation of B(A_i): closure of X \ R_i
  IntervalUnion overlap;     ///< L_i = A_i cap R_i
  BoxSet attracting_boxes;   ///< A_i on the coarse cover
  BoxSet repelling_boxes;    ///< R_i on the coarse cover
  double refinement_gap_attracting = 0.0;
  double refinement_gap_repelling = 0.0;
};

struct ARChain {
  std::vector<ARLevel> levels;
  bool truncated = false;
  std::size_t n_boxes = 0;
  double box_width = 0.0;
  IntervalUnion attractor = IntervalUnion::full();
  std::vector<IntervalUnion> morse_sets;          ///< M_0 .. M_m
  std::vector<IntervalUnion> connecting_regions;  ///< C_0 .. C_{m-1}
  std::vector<double> attracting_gaps;            ///< hausdorff(A_{i-1}, A_i)

  std::size_t level_count() const { return levels.size(); }
  bool transitive() const { return levels.empty() && !truncated; }

  /// Sets closer than this to a set boundary are classified as ambiguous.
  double classification_slack() const { return box_width / 4.0; }

  /// A_0 = X.
  IntervalUnion attracting(std::size_t i) const {
    return i == 0 ? IntervalUnion::full() : levels.at(i - 1).attracting;
  }
  /// R_0 = empty, R_{m+1} = X.
  IntervalUnion repelling(std::size_t i) const {
    if (i == 0) return {};
    if (i > levels.size()) return IntervalUnion::full();
    return levels[i - 1].repelling;
  }
  IntervalUnion overlap() const {
    IntervalUnion all;
    for (const auto& lv : levels) all = unite(all, lv.overlap);
    return all;
  }
  IntervalUnion morse_union() const {
    IntervalUnion all;
    for (const auto& m : morse_sets) all = unite(all, m);
    return all;
  }
};

inline ARChain leveled_decomposition(const PiecewiseMap& f, std::size_t max_depth,
                                     const RefinedCover& cover) {
  (void)f;
  ARChain chain;
  chain.n_boxes = cover.n_boxes();
  chain.box_width = cover.box_width();
  const double w = chain.box_width;
  const TransitionGraph& gc = cover.coarse();
  const TransitionGraph& gf = cover.fine();
  BoxSet amb_c(gc.size(), true);
  BoxSet amb_f(gf.size(), true);

  for (std::size_t level = 1;; ++level) {
    auto a_c = extract_attracting(gc, amb_c);
    auto a_f = extract_attracting(gf, amb_f);
    if (!a_c && !a_f) break;
    if (a_c.has_value() != a_f.has_value()) {
      std::ostringstream os;
      os << "transitivity verdict at level " << level << " changes under refinement";
      throw ResolutionError(os.str(), level);
    }
    if (level > max_depth) {
      chain.truncated = true;
      break;
    }
    BoxSet r_c = inv(gc, a_c->complement());
    BoxSet r_f = inv(gf, a_f->complement());
    if (r_c.empty() || r_f.empty()) {
      std::ostringstream os;
      os << "repelling set at level " << level << " is empty";
      throw InconsistencyError(os.str());
    }
    ARLevel lv;
    lv.index = level;
    IntervalUnion ac = a_c->to_intervals(), af = a_f->to_intervals();
    IntervalUnion rc = r_c.to_intervals(), rf = r_f.to_intervals();
    lv.refinement_gap_attracting = hausdorff(ac, af);
    lv.refinement_gap_repelling = hausdorff(rc, rf);
    lv.attracting = detail::refine_intersect(ac, af, w, level, "attracting set");
    lv.repelling = detail::refine_intersect(rc, rf, w, level, "repelling set");
    lv.basin = complement(lv.repelling);
    lv.overlap = intersect(lv.attracting, lv.repelling);
    lv.attracting_boxes = *a_c;
    lv.repelling_boxes = r_c;
    chain.attracting_gaps.push_back(hausdorff(chain.attracting(level - 1), lv.attracting));
    chain.levels.push_back(std::move(lv));
    amb_c = *a_c;
    amb_f = *a_f;
  }

  const std::size_t m = chain.level_count();
  chain.attractor = chain.attracting(m);
  for (std::size_t i = 0; i <= m; ++i) {
    chain.morse_sets.push_back(intersect(chain.attracting(i), chain.repelling(i + 1)));
  }
  for (std::size_t j = 0; j < m; ++j) {
    chain.connecting_regions.push_back(
        difference(chain.attracting(j), unite(chain.attracting(j + 1), chain.repelling(j + 1))));
  }
  return chain;
}

inline ARChain leveled_decomposition(const PiecewiseMap& f, std::size_t max_depth,
                                     std::size_t n_boxes) {
  return leveled_decomposition(f, max_depth, RefinedCover(f, n_boxes));
}

// ---------------------------------------------------------------------------
// Alpha-limit classification

enum class AlphaKind { whole_space, repeller, connecting, overlap, unresolved };

/// alpha(x) as determined by the chain.
///  - whole_space: alpha(x) = X
///  - repeller(i), connecting(i): alpha(x) = R_i (connecting: x lies on C_{i-1})
///  - overlap(i): two legitimate answers, R_i (x regarded in R_i) and
///    R_{i+1} (x regarded in A_i); R_{m+1} = X
///  - unresolved: x lies in the last computed A of a depth-capped chain
struct AlphaClass {
  AlphaKind kind = AlphaKind::whole_space;
  std::size_t level = 0;

  static AlphaClass whole() { return {AlphaKind::whole_space, 0}; }
  static AlphaClass repeller(std::size_t i) { return {AlphaKind::repeller, i}; }
  static AlphaClass connecting(std::size_t i) { return {AlphaKind::connecting, i}; }
  static AlphaClass overlap(std::size_t i) { return {AlphaKind::overlap, i}; }
  static AlphaClass unresolved(std::size_t i) { return {AlphaKind::unresolved, i}; }

  bool definite() const {
    return kind == AlphaKind::whole_space || kind == AlphaKind::repeller ||
           kind == AlphaKind::connecting;
  }
  /// Index of the alpha-limit set in R_1 .. R_m, X (= m + 1).
  std::size_t alpha_index(std::size_t m) const {
    return kind == AlphaKind::whole_space ? m + 1 : level;
  }

  std::string label(std::size_t m) const {
    switch (kind) {
      case AlphaKind::whole_space:
        return "X";
      case AlphaKind::repeller:
      case AlphaKind::connecting:
        return "R" + std::to_string(level);
      case AlphaKind::overlap:
        return "overlap(R" + std::to_string(level) + "|" +
               (level + 1 > m ? std::string("X") : "R" + std::to_string(level + 1)) + ")";
      case AlphaKind::unresolved:
        return "unresolved";
    }
    return "";
  }

  friend bool operator==(const AlphaClass&, const AlphaClass&) = default;
};

inline AlphaClass classify_alpha(const ARChain& chain, double x) {
  const std::size_t m = chain.level_count();
  if (m == 0) return chain.truncated ? AlphaClass::unresolved(0) : AlphaClass::whole();
  const double slack = chain.classification_slack();

  for (std::size_t i = 1; i <= m; ++i) {
    const auto& l = chain.levels[i - 1].overlap;
    if (!l.empty() && distance_point(x, l) < slack) return AlphaClass::overlap(i);
  }

  std::size_t k = 0;  // deepest A_k holding x
  while (k < m && membership(x, chain.attracting(k + 1), Membership::closed)) ++k;

  // boundary of A_{k+1} from outside, or of A_k from inside
  if (k < m && distance_point(x, chain.attracting(k + 1)) < slack) {
    return AlphaClass::overlap(k + 1);
  }
  if (k >= 1) {
    IntervalUnion outside = complement(chain.attracting(k));
    if (!outside.empty() && distance_point(x, outside) < slack) return AlphaClass::overlap(k);
  }
  if (k == m) return chain.truncated ? AlphaClass::unresolved(m) : AlphaClass::whole();
  return AlphaClass::repeller(k + 1);
}

// ---------------------------------------------------------------------------
// Empirical alpha-limit set from the preimage tree

struct AlphaEstimateOptions {
  std::size_t closure_boxes = 4096;
  double tol_inv = kDefaultTolInv;
};

/// Iterates preimages for `depth` generations (each generation thinned to at
/// most `cap` points spread evenly in sorted order) and returns the box
/// closure of the deepest quarter of the generations.
inline IntervalUnion alpha_limit_estimate(const PiecewiseMap& f, double x, std::size_t depth,
                                          std::size_t cap, AlphaEstimateOptions opts = {}) {
  if (depth < 1) throw DomainError("alpha_limit_estimate needs depth >= 1");
  if (cap < 1) throw DomainError("alpha_limit_estimate needs cap >= 1");
  const std::size_t keep_from = depth - std::max<std::size_t>(1, depth / 4) + 1;
  std::vector<double> gen{x};
  std::vector<double> kept;
  for (std::size_t k = 1; k <= depth; ++k) {
    std::vector<double> next;
    for (double y : gen) {
      auto pre = f.preimages(y, opts.tol_inv);
      next.insert(next.end(), pre.begin(), pre.end());
    }
    std::sort(next.begin(), next.end());
    next.erase(std::unique(next.begin(), next.end(),
                           [&](double a, double b) { return std::abs(a - b) <= 10 * opts.tol_inv; }),
               next.end());
    if (next.empty()) {
      std::ostringstream os;
      os << "preimage tree of " << x << " dies after depth " << k - 1;
      throw PreimageTreeDiedError(os.str(), k - 1);
    }
    if (next.size() > cap) {
      std::vector<double> thinned;
      thinned.reserve(cap);
      for (std::size_t i = 0; i < cap; ++i) {
        std::size_t idx = cap == 1 ? next.size() / 2 : (i * (next.size() - 1)) / (cap - 1);
        thinned.push_back(next[idx]);
      }
      next = std::move(thinned);
    }
    gen = std::move(next);
    if (k >= keep_from) kept.insert(kept.end(), gen.begin(), gen.end());
  }
  BoxCover closure(opts.closure_boxes);
  std::vector<Interval> boxes;
  boxes.reserve(kept.size());
  for (double p : kept) boxes.push_back(closure.box(closure.index_of(p)));
  return IntervalUnion::normalize(std::move(boxes));
}

}  // namespace ard
