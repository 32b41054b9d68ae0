/** \file
 * interval_set.hpp: canonical finite unions of closed subintervals of [0,1].
 *
 * Every set the library reasons about (attracting sets, repelling sets,
 * Morse sets, basins) is stored as an IntervalUnion. Values are immutable
 * after construction; all operations are pure.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ard/errors.hpp"

namespace ard {

inline constexpr double kDefaultEpsGeom = 1e-12;

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double length() const { return hi - lo; }
  double midpoint() const { return 0.5 * (lo + hi); }
  friend bool operator==(const Interval&, const Interval&) = default;
};

class IntervalUnion {
 public:
  IntervalUnion() = default;

  /// Sorts and merges; pieces separated by a gap <= eps are fused.
  /// Throws DomainError on lo > hi or endpoints outside [0,1].
  static IntervalUnion normalize(std::vector<Interval> raw,
                                 double eps = kDefaultEpsGeom) {
    for (auto& iv : raw) {
      if (!std::isfinite(iv.lo) || !std::isfinite(iv.hi)) {
        throw DomainError("interval endpoint is not finite");
      }
      if (iv.lo > iv.hi + eps) {
        std::ostringstream os;
        os << "interval (" << iv.lo << ", " << iv.hi << ") has lo > hi";
        throw DomainError(os.str());
      }
      if (iv.lo < -eps || iv.hi > 1.0 + eps) {
        std::ostringstream os;
        os << "interval (" << iv.lo << ", " << iv.hi << ") leaves [0,1]";
        throw DomainError(os.str());
      }
      iv.lo = std::clamp(iv.lo, 0.0, 1.0);
      iv.hi = std::clamp(std::max(iv.hi, iv.lo), 0.0, 1.0);
    }
    std::sort(raw.begin(), raw.end(), [](const Interval& a, const Interval& b) {
      return a.lo < b.lo || (a.lo == b.lo && a.hi < b.hi);
    });
    std::vector<Interval> merged;
    merged.reserve(raw.size());
    for (const auto& iv : raw) {
      if (!merged.empty() && iv.lo <= merged.back().hi + eps) {
        merged.back().hi = std::max(merged.back().hi, iv.hi);
      } else {
        merged.push_back(iv);
      }
    }
    return IntervalUnion(std::move(merged));
  }

  static IntervalUnion single(double lo, double hi,
                              double eps = kDefaultEpsGeom) {
    return normalize({{lo, hi}}, eps);
  }
  static IntervalUnion point(double x) { return single(x, x); }
  static IntervalUnion full() { return IntervalUnion({{0.0, 1.0}}); }

  const std::vector<Interval>& intervals() const { return parts_; }
  bool empty() const { return parts_.empty(); }
  std::size_t size() const { return parts_.size(); }
  auto begin() const { return parts_.begin(); }
  auto end() const { return parts_.end(); }

  double measure() const {
    double total = 0.0;
    for (const auto& iv : parts_) total += iv.length();
    return total;
  }

  double max_component_length() const {
    double best = 0.0;
    for (const auto& iv : parts_) best = std::max(best, iv.length());
    return best;
  }

  double lower() const { return parts_.front().lo; }
  double upper() const { return parts_.back().hi; }

  friend bool operator==(const IntervalUnion&, const IntervalUnion&) = default;

 private:
  explicit IntervalUnion(std::vector<Interval> parts) : parts_(std::move(parts)) {}

  std::vector<Interval> parts_;
};

enum class SetOp { unite, intersect, difference };

namespace detail {

inline IntervalUnion intersect_impl(const IntervalUnion& u,
                                    const IntervalUnion& v, double eps) {
  std::vector<Interval> out;
  auto i = u.begin();
  auto j = v.begin();
  while (i != u.end() && j != v.end()) {
    double lo = std::max(i->lo, j->lo);
    double hi = std::min(i->hi, j->hi);
    if (lo <= hi + eps) out.push_back({lo, std::max(lo, hi)});
    if (i->hi < j->hi) {
      ++i;
    } else {
      ++j;
    }
  }
  return IntervalUnion::normalize(std::move(out), eps);
}

// Closure of u \ v.
inline IntervalUnion difference_impl(const IntervalUnion& u,
                                     const IntervalUnion& v, double eps) {
  std::vector<Interval> out;
  for (const auto& piece : u) {
    const bool degenerate = piece.length() <= eps;
    double cursor = piece.lo;
    bool covered_to_end = false;
    for (const auto& cut : v) {
      if (cut.hi < cursor - eps) continue;
      if (cut.lo > piece.hi + eps) break;
      if (degenerate) {
        covered_to_end = true;
        break;
      }
      if (cut.lo - cursor > eps) out.push_back({cursor, std::min(cut.lo, piece.hi)});
      cursor = std::max(cursor, cut.hi);
      if (cursor >= piece.hi - eps) {
        covered_to_end = true;
        break;
      }
    }
    if (degenerate) {
      if (!covered_to_end) out.push_back(piece);
      continue;
    }
    if (!covered_to_end && piece.hi - cursor > eps) out.push_back({cursor, piece.hi});
  }
  return IntervalUnion::normalize(std::move(out), eps);
}

}  // namespace detail

inline IntervalUnion set_algebra(SetOp kind, const IntervalUnion& u,
                                 const IntervalUnion& v,
                                 double eps = kDefaultEpsGeom) {
  switch (kind) {
    case SetOp::unite: {
      std::vector<Interval> all(u.begin(), u.end());
      all.insert(all.end(), v.begin(), v.end());
      return IntervalUnion::normalize(std::move(all), eps);
    }
    case SetOp::intersect:
      return detail::intersect_impl(u, v, eps);
    case SetOp::difference:
      return detail::difference_impl(u, v, eps);
  }
  return {};
}

inline IntervalUnion unite(const IntervalUnion& u, const IntervalUnion& v,
                           double eps = kDefaultEpsGeom) {
  return set_algebra(SetOp::unite, u, v, eps);
}
inline IntervalUnion intersect(const IntervalUnion& u, const IntervalUnion& v,
                               double eps = kDefaultEpsGeom) {
  return set_algebra(SetOp::intersect, u, v, eps);
}
inline IntervalUnion difference(const IntervalUnion& u, const IntervalUnion& v,
                                double eps = kDefaultEpsGeom) {
  return set_algebra(SetOp::difference, u, v, eps);
}
/// Closure of [0,1] \ u.
inline IntervalUnion complement(const IntervalUnion& u,
                                double eps = kDefaultEpsGeom) {
  return difference(IntervalUnion::full(), u, eps);
}

/// Closed r-neighbourhood of u, clipped to [0,1].
inline IntervalUnion dilate(const IntervalUnion& u, double r,
                            double eps = kDefaultEpsGeom) {
  std::vector<Interval> out;
  for (const auto& iv : u) {
    out.push_back({std::max(0.0, iv.lo - r), std::min(1.0, iv.hi + r)});
  }
  return IntervalUnion::normalize(std::move(out), eps);
}

inline double distance_point(double x, const IntervalUnion& s) {
  if (s.empty()) throw UndefinedDistanceError("distance to an empty set");
  // First interval whose hi >= x; the nearest piece is it or its predecessor.
  const auto& parts = s.intervals();
  auto it = std::lower_bound(parts.begin(), parts.end(), x,
                             [](const Interval& iv, double v) { return iv.hi < v; });
  double best = std::numeric_limits<double>::infinity();
  if (it != parts.end()) best = std::min(best, std::max(0.0, it->lo - x));
  if (it != parts.begin()) best = std::min(best, x - std::prev(it)->hi);
  return best;
}

namespace detail {

// sup_{x in u} d(x, v): d(., v) is piecewise linear, so the sup over each
// piece of u sits at an endpoint or at the midpoint of a gap of v.
inline double directed_hausdorff(const IntervalUnion& u, const IntervalUnion& v) {
  double worst = 0.0;
  const auto& gaps = v.intervals();
  for (const auto& piece : u) {
    worst = std::max(worst, distance_point(piece.lo, v));
    worst = std::max(worst, distance_point(piece.hi, v));
    for (std::size_t k = 0; k + 1 < gaps.size(); ++k) {
      double mid = 0.5 * (gaps[k].hi + gaps[k + 1].lo);
      if (mid >= piece.lo && mid <= piece.hi) {
        worst = std::max(worst, distance_point(mid, v));
      }
    }
  }
  return worst;
}

}  // namespace detail

inline double hausdorff(const IntervalUnion& u, const IntervalUnion& v) {
  if (u.empty() || v.empty()) {
    throw UndefinedDistanceError("Hausdorff distance involving an empty set");
  }
  return std::max(detail::directed_hausdorff(u, v), detail::directed_hausdorff(v, u));
}

enum class Membership { closed, interior };

/// Interior is taken relative to X = [0,1]: a piece touching 0 (or 1)
/// contains that endpoint in its interior.
inline bool membership(double x, const IntervalUnion& s, Membership mode,
                       double eps = kDefaultEpsGeom) {
  for (const auto& iv : s) {
    if (mode == Membership::closed) {
      if (x >= iv.lo - eps && x <= iv.hi + eps) return true;
    } else {
      bool left_ok = iv.lo <= 0.0 ? x >= 0.0 : x > iv.lo + eps;
      bool right_ok = iv.hi >= 1.0 ? x <= 1.0 : x < iv.hi - eps;
      if (left_ok && right_ok) return true;
    }
  }
  return false;
}

/// u is contained in the slack-neighbourhood of v.
inline bool subset(const IntervalUnion& u, const IntervalUnion& v,
                   double slack = kDefaultEpsGeom) {
  if (u.empty()) return true;
  if (v.empty()) return false;
  return detail::directed_hausdorff(u, v) <= slack;
}

inline void to_json(nlohmann::json& j, const IntervalUnion& s) {
  j = nlohmann::json::array();
  for (const auto& iv : s) j.push_back({iv.lo, iv.hi});
}

inline void from_json(const nlohmann::json& j, IntervalUnion& s) {
  if (!j.is_array()) throw SchemaError("interval_union", "expected an array of [lo, hi] pairs");
  std::vector<Interval> raw;
  for (const auto& pair : j) {
    if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number() ||
        !pair[1].is_number()) {
      throw SchemaError("interval_union", "expected [lo, hi] numeric pair");
    }
    raw.push_back({pair[0].get<double>(), pair[1].get<double>()});
  }
  s = IntervalUnion::normalize(std::move(raw));
}

}  // namespace ard
