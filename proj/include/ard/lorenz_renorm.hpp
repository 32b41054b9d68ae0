/** \file
 * lorenz_renorm.hpp: renormalization of expansive Lorenz maps.
 *
 * A renormalization is a pair of return times (l, r) and an interval
 * [a, b] around c with b = f^l(c-), a = f^r(c+), such that the first return
 * map to [a, b] is f^l on [a, c) and f^r on (c, b], and is again a Lorenz map.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <utility>
#include <vector>

#include "ard/box_graph.hpp"
#include "ard/errors.hpp"
#include "ard/interval_set.hpp"
#include "ard/map_model.hpp"

namespace ard {

inline constexpr std::size_t kDefaultMaxReturn = 64;

struct RenormResult {
  double a1 = 0.0;
  double b1 = 1.0;
  std::size_t l = 1;  ///< return time left of c
  std::size_t r = 1;  ///< return time right of c
  std::size_t max_return = kDefaultMaxReturn;
  /// First return map rescaled to [0,1]; present when every branch of f is affine.
  std::optional<PiecewiseMap> renormalized;
  double slope_left = 0.0;  ///< (f^l)' when affine, else 0
  double slope_right = 0.0;

  bool degenerate() const { return a1 <= 0.0 && b1 >= 1.0; }
};

namespace detail {

inline double orbit_of_critical(const PiecewiseMap& f, Side side, std::size_t k, bool& ok) {
  const double c = *f.critical_point();
  ok = true;
  double x = f.eval(c, side);
  for (std::size_t j = 1; j < k; ++j) {
    if (std::abs(x - c) <= f.eps()) {
      ok = false;
      return x;
    }
    x = f.eval(x);
  }
  return x;
}

struct ReturnLeg {
  bool ok = false;
  double end = 0.0;    ///< image of the free endpoint after the full return
  double slope = 1.0;  ///< product of affine slopes along the leg
  double shift = 0.0;  ///< f^k(x) = slope * x + shift when affine
  bool affine = true;
};

// Pushes [lo, hi] forward `steps` times. Every intermediate image must avoid
// c in its interior and stay out of the open interval (a, b).
inline ReturnLeg push_leg(const PiecewiseMap& f, double lo, double hi, std::size_t steps,
                          double a, double b, bool left_leg) {
  const double c = *f.critical_point();
  const double eps = f.eps();
  ReturnLeg leg;
  for (std::size_t j = 0; j < steps; ++j) {
    if (j > 0) {
      if (lo < c - eps && hi > c + eps) return leg;
      if (std::max(lo, a) < std::min(hi, b) - eps) return leg;
    }
    const Branch& br = f.branches()[hi <= c + eps ? 0 : 1];
    if (const auto* p = std::get_if<AffineParams>(&br.params())) {
      leg.slope *= p->slope;
      leg.shift = p->slope * leg.shift + p->intercept;
    } else {
      leg.affine = false;
    }
    double nlo = br(lo);
    double nhi = br(hi);
    lo = std::clamp(nlo, 0.0, 1.0);
    hi = std::clamp(nhi, 0.0, 1.0);
  }
  leg.ok = true;
  leg.end = left_leg ? lo : hi;
  return leg;
}

}  // namespace detail

/// Smallest (l + r, l) admitting the first-return structure with l, r <= max_return.
inline std::optional<RenormResult> detect_renormalization(const PiecewiseMap& f,
                                                          std::size_t max_return = kDefaultMaxReturn) {
  if (!f.is_lorenz()) throw DomainError("renormalization needs a Lorenz map");
  if (max_return == 0) return std::nullopt;
  const double c = *f.critical_point();
  const double eps = f.eps();

  std::vector<std::optional<double>> bs(max_return + 1), as(max_return + 1);
  for (std::size_t k = 1; k <= max_return; ++k) {
    bool ok = false;
    double v = detail::orbit_of_critical(f, Side::left, k, ok);
    if (!ok) break;
    bs[k] = v;
  }
  for (std::size_t k = 1; k <= max_return; ++k) {
    bool ok = false;
    double v = detail::orbit_of_critical(f, Side::right, k, ok);
    if (!ok) break;
    as[k] = v;
  }

  for (std::size_t total = 2; total <= 2 * max_return; ++total) {
    for (std::size_t l = 1; l < total; ++l) {
      const std::size_t r = total - l;
      if (l > max_return || r > max_return || !bs[l] || !as[r]) continue;
      const double b = *bs[l];
      const double a = *as[r];
      if (!(a < c - eps && b > c + eps)) continue;
      if (a <= eps && b >= 1.0 - eps) continue;  // whole interval

      auto left = detail::push_leg(f, a, c, l, a, b, true);
      if (!left.ok || left.end < a - 1e3 * eps) continue;
      auto right = detail::push_leg(f, c, b, r, a, b, false);
      if (!right.ok || right.end > b + 1e3 * eps) continue;

      RenormResult res;
      res.a1 = a;
      res.b1 = b;
      res.l = l;
      res.r = r;
      res.max_return = max_return;
      if (left.affine && right.affine) {
        res.slope_left = left.slope;
        res.slope_right = right.slope;
        const double w = b - a;
        const double cc = (c - a) / w;
        // t -> (F(a + t w) - a) / w for F(x) = s x + k
        auto rescale = [&](const detail::ReturnLeg& g, double lo, double hi) {
          return Branch::affine(lo, hi, g.slope, (g.slope * a + g.shift - a) / w);
        };
        try {
          res.renormalized = PiecewiseMap::lorenz(rescale(left, 0.0, cc), rescale(right, cc, 1.0));
        } catch (const DomainError&) {
          continue;
        }
      }
      return res;
    }
  }
  return std::nullopt;
}

/// First return of x in [a1, b1] (x != c), in original coordinates.
inline double return_map(const PiecewiseMap& f, const RenormResult& r, double x) {
  const double c = *f.critical_point();
  if (x < r.a1 - f.eps() || x > r.b1 + f.eps()) throw DomainError("return_map: x outside [a1, b1]");
  Side side = x < c ? Side::left : Side::right;
  std::size_t steps = x < c ? r.l : r.r;
  double y = f.eval(x, side);
  for (std::size_t j = 1; j < steps; ++j) y = f.eval(y);
  return y;
}

struct RenormAttracting {
  IntervalUnion set;
  bool stabilized = false;
  std::size_t steps = 0;
};

/// orb[a1, b1]: union of images up to `horizon`, stopping once an image adds nothing.
inline RenormAttracting attracting_set_from_renorm(const PiecewiseMap& f, const RenormResult& r,
                                                   std::size_t horizon) {
  RenormAttracting out;
  out.set = IntervalUnion::single(r.a1, r.b1);
  for (std::size_t k = 1; k <= horizon; ++k) {
    IntervalUnion next = unite(out.set, f.image(out.set));
    out.steps = k;
    if (hausdorff(next, out.set) <= f.eps()) {
      out.set = std::move(next);
      out.stabilized = true;
      return out;
    }
    out.set = std::move(next);
  }
  return out;
}

namespace detail {

// Relatively open pieces of [0,1]: a piece with lo <= 0 (hi >= 1) contains 0 (1).
inline std::vector<Interval> merge_open(std::vector<Interval> v, double eps) {
  std::sort(v.begin(), v.end(), [](const Interval& x, const Interval& y) { return x.lo < y.lo; });
  std::vector<Interval> out;
  for (const auto& iv : v) {
    if (iv.hi - iv.lo <= eps) continue;
    if (!out.empty() && iv.lo < out.back().hi - eps) {
      out.back().hi = std::max(out.back().hi, iv.hi);
    } else {
      out.push_back(iv);
    }
  }
  return out;
}

}  // namespace detail

/// Box outer approximation of E1 = X minus the union of f^{-k}(a1, b1), k <= depth.
inline IntervalUnion invariant_set_E(const PiecewiseMap& f, const RenormResult& r,
                                     std::size_t depth, std::size_t n_boxes) {
  BoxCover cover(n_boxes);
  const double eps = f.eps();
  std::vector<Interval> layer{{r.a1, r.b1}};
  std::vector<Interval> all = layer;
  for (std::size_t k = 0; k < depth && !layer.empty(); ++k) {
    std::vector<Interval> next;
    for (const auto& br : f.branches()) {
      const Interval im = br.image();
      for (const auto& iv : layer) {
        double lo = std::max(iv.lo, im.lo);
        double hi = std::min(iv.hi, im.hi);
        if (hi - lo <= eps) continue;
        // clipped by the image: the preimage runs to the domain end
        double x0 = lo <= im.lo ? (br.increasing() ? br.domain().lo : br.domain().hi)
                                : br.inverse(lo);
        double x1 = hi >= im.hi ? (br.increasing() ? br.domain().hi : br.domain().lo)
                                : br.inverse(hi);
        next.push_back({std::min(x0, x1), std::max(x0, x1)});
      }
    }
    layer = detail::merge_open(std::move(next), eps);
    all.insert(all.end(), layer.begin(), layer.end());
    all = detail::merge_open(std::move(all), eps);
  }

  std::vector<Interval> kept;
  for (std::size_t k = 0; k < cover.size(); ++k) {
    const Interval box = cover.box(k);
    bool inside = false;
    for (const auto& u : all) {
      bool lo_ok = u.lo <= 0.0 ? true : u.lo < box.lo;
      bool hi_ok = u.hi >= 1.0 ? true : u.hi > box.hi;
      if (lo_ok && hi_ok) {
        inside = true;
        break;
      }
    }
    if (!inside) kept.push_back(box);
  }
  return IntervalUnion::normalize(std::move(kept));
}

struct EPoints {
  std::optional<double> minus;  ///< sup of E below c
  std::optional<double> plus;   ///< inf of E above c
};

inline EPoints e_points(const IntervalUnion& e, double c) {
  EPoints out;
  for (const auto& iv : e) {
    if (iv.lo < c) out.minus = std::min(iv.hi, c);
    if (iv.hi > c && !out.plus) out.plus = std::max(iv.lo, c);
  }
  return out;
}

struct FirstReturnCheck {
  std::size_t samples = 0;
  std::size_t skipped = 0;    ///< orbit met c exactly
  std::size_t violations = 0;
  double worst_excursion = 0.0;  ///< largest distance of a return point from [a1, b1]
};

/// Pointwise check of the first-return property on evenly spaced samples.
inline FirstReturnCheck verify_first_return(const PiecewiseMap& f, const RenormResult& r,
                                            std::size_t samples = 500) {
  FirstReturnCheck out;
  const double c = *f.critical_point();
  const double eps = f.eps();
  const double slack = 1e-9;
  for (std::size_t i = 0; i < samples; ++i) {
    double x = r.a1 + (r.b1 - r.a1) * (static_cast<double>(i) + 0.5) / static_cast<double>(samples);
    if (std::abs(x - c) <= eps) {
      ++out.skipped;
      continue;
    }
    ++out.samples;
    const std::size_t steps = x < c ? r.l : r.r;
    try {
      double y = x;
      bool bad = false;
      for (std::size_t j = 1; j <= steps; ++j) {
        y = f.eval(y);
        if (j < steps && y > r.a1 + slack && y < r.b1 - slack) bad = true;
      }
      double excursion = std::max({0.0, r.a1 - y, y - r.b1});
      out.worst_excursion = std::max(out.worst_excursion, excursion);
      if (bad || excursion > slack) ++out.violations;
    } catch (const AmbiguousCriticalPointError&) {
      --out.samples;
      ++out.skipped;
    }
  }
  return out;
}

}  // namespace ard
