/** \file
 * box_graph.hpp: combinatorial outer approximation of a map on a uniform
 * dyadic cover of [0,1], with the combinatorial invariant-set operators
 * (Inv^m, Inv, isolation test, reachability, recurrent components).
 *
 * Box k is [k/n, (k+1)/n). Points are assigned to boxes half-open, except
 * that the last box also owns 1.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <utility>
#include <vector>

#include "ard/errors.hpp"
#include "ard/interval_set.hpp"
#include "ard/map_model.hpp"

namespace ard {

class BoxCover {
 public:
  explicit BoxCover(std::size_t n_boxes) : n_(n_boxes) {
    if (n_boxes < 2 || (n_boxes & (n_boxes - 1)) != 0) {
      throw UsageError("box count must be a power of two >= 2");
    }
  }

  std::size_t size() const { return n_; }
  double width() const { return 1.0 / static_cast<double>(n_); }
  Interval box(std::size_t k) const {
    return {static_cast<double>(k) / n_, static_cast<double>(k + 1) / n_};
  }
  std::size_t index_of(double x) const {
    double v = std::floor(std::clamp(x, 0.0, 1.0) * static_cast<double>(n_));
    return std::min(n_ - 1, static_cast<std::size_t>(v));
  }

  friend bool operator==(const BoxCover&, const BoxCover&) = default;

 private:
  std::size_t n_;
};

class BoxSet {
 public:
  BoxSet() = default;
  explicit BoxSet(std::size_t n, bool filled = false) : flags_(n, filled ? 1 : 0) {}

  static BoxSet of(std::size_t n, std::initializer_list<std::size_t> members) {
    BoxSet s(n);
    for (auto k : members) s.insert(k);
    return s;
  }

  /// Boxes meeting u in a set of positive length, or containing one of its
  /// degenerate (point) pieces.
  static BoxSet from_intervals(const BoxCover& cover, const IntervalUnion& u) {
    BoxSet s(cover.size());
    const double n = static_cast<double>(cover.size());
    for (const auto& iv : u) {
      if (iv.length() <= kDefaultEpsGeom) {
        std::size_t k = cover.index_of(iv.lo);
        s.insert(k);
        // a point on a grid line sits in both neighbouring closed boxes
        double v = iv.lo * n;
        if (std::abs(v - std::round(v)) < 1e-9 && k > 0 && std::round(v) == static_cast<double>(k)) {
          s.insert(k - 1);
        }
        continue;
      }
      auto first = static_cast<std::size_t>(std::floor(iv.lo * n));
      auto last = static_cast<std::size_t>(std::max(0.0, std::ceil(iv.hi * n) - 1.0));
      first = std::min(first, cover.size() - 1);
      last = std::min(last, cover.size() - 1);
      for (std::size_t k = first; k <= last; ++k) s.insert(k);
    }
    return s;
  }

  std::size_t universe() const { return flags_.size(); }
  bool contains(std::size_t k) const { return flags_[k] != 0; }
  void insert(std::size_t k) { flags_[k] = 1; }
  void erase(std::size_t k) { flags_[k] = 0; }
  std::size_t count() const {
    return static_cast<std::size_t>(std::count(flags_.begin(), flags_.end(), 1));
  }
  bool empty() const { return count() == 0; }
  bool full() const { return count() == flags_.size(); }

  std::vector<std::size_t> members() const {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < flags_.size(); ++k) {
      if (flags_[k]) out.push_back(k);
    }
    return out;
  }

  BoxSet complement() const {
    BoxSet out(*this);
    for (auto& f : out.flags_) f = f ? 0 : 1;
    return out;
  }

  /// Adds r neighbouring boxes on each side of every member.
  BoxSet dilate(std::size_t r = 1) const {
    BoxSet out(*this);
    const std::size_t n = flags_.size();
    for (std::size_t k = 0; k < n; ++k) {
      if (!flags_[k]) continue;
      std::size_t lo = k >= r ? k - r : 0;
      std::size_t hi = std::min(n - 1, k + r);
      for (std::size_t j = lo; j <= hi; ++j) out.flags_[j] = 1;
    }
    return out;
  }

  IntervalUnion to_intervals() const {
    std::vector<Interval> pieces;
    const double n = static_cast<double>(flags_.size());
    for (std::size_t k = 0; k < flags_.size(); ++k) {
      if (!flags_[k]) continue;
      std::size_t end = k;
      while (end + 1 < flags_.size() && flags_[end + 1]) ++end;
      pieces.push_back({static_cast<double>(k) / n, static_cast<double>(end + 1) / n});
      k = end;
    }
    return IntervalUnion::normalize(std::move(pieces));
  }

  BoxSet& operator&=(const BoxSet& o) {
    for (std::size_t k = 0; k < flags_.size(); ++k) flags_[k] &= o.flags_[k];
    return *this;
  }
  BoxSet& operator|=(const BoxSet& o) {
    for (std::size_t k = 0; k < flags_.size(); ++k) flags_[k] |= o.flags_[k];
    return *this;
  }
  BoxSet& operator-=(const BoxSet& o) {
    for (std::size_t k = 0; k < flags_.size(); ++k) flags_[k] &= static_cast<uint8_t>(!o.flags_[k]);
    return *this;
  }
  friend BoxSet operator&(BoxSet a, const BoxSet& b) { return a &= b; }
  friend BoxSet operator|(BoxSet a, const BoxSet& b) { return a |= b; }
  friend BoxSet operator-(BoxSet a, const BoxSet& b) { return a -= b; }
  friend bool operator==(const BoxSet&, const BoxSet&) = default;

  bool subset_of(const BoxSet& o) const {
    for (std::size_t k = 0; k < flags_.size(); ++k) {
      if (flags_[k] && !o.flags_[k]) return false;
    }
    return true;
  }

 private:
  std::vector<uint8_t> flags_;
};

class TransitionGraph {
 public:
  TransitionGraph(BoxCover cover, std::vector<std::vector<std::uint32_t>> successors)
      : cover_(cover), succ_(std::move(successors)), pred_(succ_.size()) {
    if (succ_.size() != cover_.size()) throw DomainError("adjacency size does not match cover");
    for (auto& row : succ_) {
      std::sort(row.begin(), row.end());
      row.erase(std::unique(row.begin(), row.end()), row.end());
    }
    for (std::uint32_t k = 0; k < succ_.size(); ++k) {
      for (auto j : succ_[k]) {
        if (j >= succ_.size()) throw DomainError("edge target outside the cover");
        pred_[j].push_back(k);
      }
    }
  }

  static TransitionGraph from_edges(std::size_t n,
                                    const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
    std::vector<std::vector<std::uint32_t>> succ(n);
    for (auto [k, j] : edges) succ.at(k).push_back(static_cast<std::uint32_t>(j));
    return TransitionGraph(BoxCover(n), std::move(succ));
  }

  const BoxCover& cover() const { return cover_; }
  std::size_t size() const { return succ_.size(); }
  std::span<const std::uint32_t> successors(std::size_t k) const { return succ_[k]; }
  std::span<const std::uint32_t> predecessors(std::size_t k) const { return pred_[k]; }
  bool has_edge(std::size_t k, std::size_t j) const {
    return std::binary_search(succ_[k].begin(), succ_[k].end(), static_cast<std::uint32_t>(j));
  }
  std::size_t edge_count() const {
    std::size_t total = 0;
    for (const auto& row : succ_) total += row.size();
    return total;
  }

 private:
  BoxCover cover_;
  std::vector<std::vector<std::uint32_t>> succ_;
  std::vector<std::vector<std::uint32_t>> pred_;
};

namespace detail {

// Grid coordinate v = y * n, snapped onto an integer when within rounding noise.
inline double snap_grid(double v) {
  double r = std::round(v);
  return std::abs(v - r) <= 1e-9 ? r : v;
}

}  // namespace detail

/// Edges k -> j for every box j met by the exact per-branch image of box k.
/// Images respect the half-open box convention, so the relation contains
/// every true transition x -> f(x).
inline TransitionGraph build_graph(const PiecewiseMap& f, std::size_t n_boxes) {
  BoxCover cover(n_boxes);
  const double n = static_cast<double>(n_boxes);
  const auto last = static_cast<long>(n_boxes) - 1;
  std::vector<std::vector<std::uint32_t>> succ(n_boxes);
  for (std::size_t k = 0; k < n_boxes; ++k) {
    const Interval box = cover.box(k);
    for (const auto& b : f.branches()) {
      double lo = std::max(box.lo, b.domain().lo);
      double hi = std::min(box.hi, b.domain().hi);
      if (hi - lo <= 0.0) continue;
      // lo always belongs to this branch; hi only when it is the point 1
      // (half-open boxes and half-open branch domains).
      double ylo = b(lo);
      double yhi = b(hi);
      bool hi_attained = hi >= 1.0;
      if (!b.increasing()) {
        std::swap(ylo, yhi);
        hi_attained = true;  // the largest value comes from lo
      }
      double vlo = detail::snap_grid(std::clamp(ylo, 0.0, 1.0) * n);
      double vhi = detail::snap_grid(std::clamp(yhi, 0.0, 1.0) * n);
      long jlo = static_cast<long>(std::floor(vlo));
      long jhi = hi_attained ? static_cast<long>(std::floor(vhi))
                             : static_cast<long>(std::ceil(vhi)) - 1;
      jlo = std::clamp(jlo, 0L, last);
      jhi = std::clamp(std::max(jhi, jlo), 0L, last);
      for (long j = jlo; j <= jhi; ++j) succ[k].push_back(static_cast<std::uint32_t>(j));
    }
  }
  return TransitionGraph(cover, std::move(succ));
}

enum class Direction { forward, backward };

inline BoxSet reach(const TransitionGraph& g, const BoxSet& s, Direction dir) {
  BoxSet seen = s;
  std::vector<std::size_t> stack = s.members();
  while (!stack.empty()) {
    std::size_t k = stack.back();
    stack.pop_back();
    auto next = dir == Direction::forward ? g.successors(k) : g.predecessors(k);
    for (auto j : next) {
      if (!seen.contains(j)) {
        seen.insert(j);
        stack.push_back(j);
      }
    }
  }
  return seen;
}

/// Reachability restricted to paths that stay inside `within`.
inline BoxSet reach_within(const TransitionGraph& g, const BoxSet& s, const BoxSet& within,
                           Direction dir) {
  BoxSet seen = s & within;
  std::vector<std::size_t> stack = seen.members();
  while (!stack.empty()) {
    std::size_t k = stack.back();
    stack.pop_back();
    auto next = dir == Direction::forward ? g.successors(k) : g.predecessors(k);
    for (auto j : next) {
      if (within.contains(j) && !seen.contains(j)) {
        seen.insert(j);
        stack.push_back(j);
      }
    }
  }
  return seen;
}

namespace detail {

// Boxes of n that start a path of `steps` edges inside n.
inline BoxSet path_core(const TransitionGraph& g, const BoxSet& n, std::size_t steps,
                        Direction dir) {
  BoxSet current = n;
  for (std::size_t s = 0; s < steps; ++s) {
    BoxSet next(n.universe());
    bool changed = false;
    for (auto k : current.members()) {
      auto nbrs = dir == Direction::forward ? g.successors(k) : g.predecessors(k);
      bool ok = std::any_of(nbrs.begin(), nbrs.end(),
                            [&](std::uint32_t j) { return current.contains(j); });
      if (ok) {
        next.insert(k);
      } else {
        changed = true;
      }
    }
    current = std::move(next);
    if (!changed) break;
  }
  return current;
}

// Boxes of n admitting an infinite path inside n: peel boxes without a
// neighbour in the set until nothing changes.
inline BoxSet infinite_core(const TransitionGraph& g, const BoxSet& n, Direction dir) {
  BoxSet current = n;
  std::vector<std::size_t> live_count(n.universe(), 0);
  std::vector<std::size_t> queue;
  for (auto k : n.members()) {
    auto nbrs = dir == Direction::forward ? g.successors(k) : g.predecessors(k);
    for (auto j : nbrs) live_count[k] += n.contains(j) ? 1 : 0;
    if (live_count[k] == 0) queue.push_back(k);
  }
  while (!queue.empty()) {
    std::size_t k = queue.back();
    queue.pop_back();
    if (!current.contains(k)) continue;
    current.erase(k);
    auto back = dir == Direction::forward ? g.predecessors(k) : g.successors(k);
    for (auto j : back) {
      if (current.contains(j) && --live_count[j] == 0) queue.push_back(j);
    }
  }
  return current;
}

}  // namespace detail

/// Boxes of n with an orbit segment of m steps forward and m steps backward in n.
inline BoxSet inv_m(const TransitionGraph& g, const BoxSet& n, std::size_t m) {
  return detail::path_core(g, n, m, Direction::forward) &
         detail::path_core(g, n, m, Direction::backward);
}

/// Boxes of n lying on a bi-infinite path inside n.
inline BoxSet inv(const TransitionGraph& g, const BoxSet& n) {
  return detail::infinite_core(g, n, Direction::forward) &
         detail::infinite_core(g, n, Direction::backward);
}

struct IsolationResult {
  bool isolating = false;
  std::optional<std::size_t> witness;  ///< boundary box of Inv N, when one exists
  bool whole_cover = false;            ///< N is the entire cover
};

/// Inv N must sit in the combinatorial interior of N: each of its boxes has
/// both neighbours in N (the ends of [0,1] count as members). N equal to the
/// whole cover is never isolating, since it leaves no exterior to isolate from.
inline IsolationResult is_isolating(const TransitionGraph& g, const BoxSet& n) {
  if (n.full()) return {false, std::nullopt, true};
  BoxSet core = inv(g, n);
  const std::size_t size = n.universe();
  for (auto k : core.members()) {
    bool left_in = k == 0 || n.contains(k - 1);
    bool right_in = k + 1 == size || n.contains(k + 1);
    if (!left_in || !right_in) return {false, k, false};
  }
  return {true, std::nullopt, false};
}

/// Strongly connected components of the subgraph induced on `within`
/// (iterative Tarjan). Components come out sinks first.
inline std::vector<std::vector<std::size_t>> strong_components(const TransitionGraph& g,
                                                               const BoxSet& within) {
  const std::size_t n = g.size();
  constexpr std::size_t kUnset = static_cast<std::size_t>(-1);
  std::vector<std::size_t> index(n, kUnset), low(n, 0);
  std::vector<bool> on_stack(n, false);
  std::vector<std::size_t> stack;
  std::vector<std::vector<std::size_t>> comps;
  std::size_t counter = 0;
  struct Frame {
    std::size_t node;
    std::size_t edge;
  };
  for (std::size_t root = 0; root < n; ++root) {
    if (!within.contains(root) || index[root] != kUnset) continue;
    std::vector<Frame> call{{root, 0}};
    index[root] = low[root] = counter++;
    stack.push_back(root);
    on_stack[root] = true;
    while (!call.empty()) {
      Frame& fr = call.back();
      auto succ = g.successors(fr.node);
      if (fr.edge < succ.size()) {
        std::size_t j = succ[fr.edge++];
        if (!within.contains(j)) continue;
        if (index[j] == kUnset) {
          index[j] = low[j] = counter++;
          stack.push_back(j);
          on_stack[j] = true;
          call.push_back({j, 0});
        } else if (on_stack[j]) {
          low[fr.node] = std::min(low[fr.node], index[j]);
        }
        continue;
      }
      std::size_t v = fr.node;
      call.pop_back();
      if (!call.empty()) low[call.back().node] = std::min(low[call.back().node], low[v]);
      if (low[v] == index[v]) {
        std::vector<std::size_t> comp;
        std::size_t w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = false;
          comp.push_back(w);
        } while (w != v);
        std::sort(comp.begin(), comp.end());
        comps.push_back(std::move(comp));
      }
    }
  }
  return comps;
}

namespace detail {

inline bool is_recurrent(const TransitionGraph& g, const std::vector<std::size_t>& comp) {
  return comp.size() > 1 || g.has_edge(comp[0], comp[0]);
}

// Sorts components so that a component precedes every component it reaches;
// ties are broken by smallest box index.
inline std::vector<BoxSet> order_by_reachability(const TransitionGraph& g,
                                                 std::vector<BoxSet> comps,
                                                 const BoxSet& within) {
  const std::size_t c = comps.size();
  std::vector<std::vector<bool>> reaches(c, std::vector<bool>(c, false));
  for (std::size_t i = 0; i < c; ++i) {
    BoxSet r = reach_within(g, comps[i], within, Direction::forward);
    for (std::size_t j = 0; j < c; ++j) {
      if (i != j && !(r & comps[j]).empty()) reaches[i][j] = true;
    }
  }
  std::vector<std::size_t> indeg(c, 0);
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t j = 0; j < c; ++j) indeg[j] += reaches[i][j] ? 1 : 0;
  std::vector<BoxSet> ordered;
  std::vector<bool> done(c, false);
  for (std::size_t step = 0; step < c; ++step) {
    std::size_t pick = c;
    for (std::size_t i = 0; i < c; ++i) {
      if (!done[i] && indeg[i] == 0) {
        pick = i;
        break;
      }
    }
    if (pick == c) break;  // cycle; callers merge mutually reachable sets first
    done[pick] = true;
    ordered.push_back(comps[pick]);
    for (std::size_t j = 0; j < c; ++j) indeg[j] -= reaches[pick][j] ? 1 : 0;
  }
  return ordered;
}

}  // namespace detail

/// Nontrivial strongly connected components (size > 1 or a self-loop),
/// ordered by reachability: sources first.
inline std::vector<BoxSet> recurrent_components(const TransitionGraph& g,
                                                std::optional<BoxSet> within = std::nullopt) {
  BoxSet region = within ? *within : BoxSet(g.size(), true);
  std::vector<BoxSet> comps;
  for (const auto& comp : strong_components(g, region)) {
    if (!detail::is_recurrent(g, comp)) continue;
    BoxSet s(g.size());
    for (auto k : comp) s.insert(k);
    comps.push_back(std::move(s));
  }
  return detail::order_by_reachability(g, std::move(comps), region);
}

/// Recurrent components with cover-adjacent pieces fused: at finite
/// resolution a single Morse set can split into neighbouring components
/// (e.g. boxes next to a repelling fixed point acquire spurious self-loops).
/// Components that become mutually reachable after fusing are fused too.
inline std::vector<BoxSet> morse_components(const TransitionGraph& g,
                                            std::optional<BoxSet> within = std::nullopt) {
  BoxSet region = within ? *within : BoxSet(g.size(), true);
  std::vector<BoxSet> comps;
  for (const auto& comp : strong_components(g, region)) {
    if (!detail::is_recurrent(g, comp)) continue;
    BoxSet s(g.size());
    for (auto k : comp) s.insert(k);
    comps.push_back(std::move(s));
  }
  // union-find over components
  std::vector<std::size_t> parent(comps.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  auto fuse = [&](std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[std::max(a, b)] = std::min(a, b);
    return true;
  };
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<std::size_t> owner(g.size(), kNone);
  for (std::size_t i = 0; i < comps.size(); ++i)
    for (auto k : comps[i].members()) owner[k] = i;
  for (std::size_t k = 0; k + 1 < g.size(); ++k) {
    if (owner[k] != kNone && owner[k + 1] != kNone) fuse(owner[k], owner[k + 1]);
  }
  auto collect = [&] {
    std::vector<BoxSet> merged;
    std::vector<std::size_t> slot(comps.size(), kNone);
    for (std::size_t i = 0; i < comps.size(); ++i) {
      std::size_t r = find(i);
      if (slot[r] == kNone) {
        slot[r] = merged.size();
        merged.emplace_back(g.size());
      }
      merged[slot[r]] |= comps[i];
    }
    return merged;
  };
  for (bool changed = true; changed;) {
    changed = false;
    std::vector<BoxSet> merged = collect();
    std::vector<BoxSet> fwd;
    for (const auto& m : merged) fwd.push_back(reach_within(g, m, region, Direction::forward));
    // map merged index back to a representative component
    std::vector<std::size_t> rep;
    {
      std::vector<std::size_t> seen;
      for (std::size_t i = 0; i < comps.size(); ++i) {
        std::size_t r = find(i);
        if (std::find(seen.begin(), seen.end(), r) == seen.end()) {
          seen.push_back(r);
          rep.push_back(r);
        }
      }
    }
    for (std::size_t a = 0; a < merged.size(); ++a) {
      for (std::size_t b = a + 1; b < merged.size(); ++b) {
        if (!(fwd[a] & merged[b]).empty() && !(fwd[b] & merged[a]).empty()) {
          changed |= fuse(rep[a], rep[b]);
        }
      }
    }
  }
  return detail::order_by_reachability(g, collect(), region);
}

/// Edge list, one "k -> j" pair per line.
inline void dump_edges(const TransitionGraph& g, std::ostream& os) {
  for (std::size_t k = 0; k < g.size(); ++k) {
    for (auto j : g.successors(k)) os << k << " -> " << j << '\n';
  }
}

}  // namespace ard
