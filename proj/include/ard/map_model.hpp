/** \file
 * map_model.hpp: piecewise-monotone self-maps of [0,1].
 *
 * A map is an ordered list of strictly monotone branches whose domains tile
 * [0,1]. Two kinds are supported: continuous maps (adjacent branches agree
 * at shared endpoints) and Lorenz maps (two increasing branches split at a
 * critical point c, carrying separate one-sided limits c- and c+).
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "ard/errors.hpp"
#include "ard/interval_set.hpp"

namespace ard {

inline constexpr double kDefaultTolInv = 1e-12;

enum class Orientation { increasing, decreasing };

struct AffineParams {
  double slope = 1.0;
  double intercept = 0.0;
};

// scale * |x - shift|^exponent + offset
struct PowerParams {
  double exponent = 1.0;
  double scale = 1.0;
  double offset = 0.0;
  double shift = 0.0;
};

// r * x * (1 - x)
struct LogisticParams {
  double r = 4.0;
};

using BranchParams = std::variant<AffineParams, PowerParams, LogisticParams>;

class Branch {
 public:
  /// Validates strict monotonicity (sampled finite differences must match
  /// the declared orientation) and that the image lies in [0,1].
  Branch(Interval domain, BranchParams params, Orientation declared,
         double eps = kDefaultEpsGeom)
      : domain_(domain), params_(params), orientation_(declared) {
    if (!(domain.lo >= 0.0 && domain.hi <= 1.0 && domain.lo < domain.hi)) {
      throw DomainError("branch domain must be a nondegenerate subinterval of [0,1]");
    }
    validate(eps);
  }

  static Branch affine(double lo, double hi, double slope, double intercept) {
    return Branch({lo, hi}, AffineParams{slope, intercept},
                  slope >= 0 ? Orientation::increasing : Orientation::decreasing);
  }
  static Branch power(double lo, double hi, PowerParams p) {
    Orientation o = formula(p, hi) >= formula(p, lo) ? Orientation::increasing
                                                     : Orientation::decreasing;
    return Branch({lo, hi}, p, o);
  }
  static Branch logistic(double lo, double hi, double r) {
    LogisticParams p{r};
    Orientation o = formula(p, hi) >= formula(p, lo) ? Orientation::increasing
                                                     : Orientation::decreasing;
    return Branch({lo, hi}, p, o);
  }

  double operator()(double x) const {
    return std::visit([x](const auto& p) { return formula(p, x); }, params_);
  }

  const Interval& domain() const { return domain_; }
  const BranchParams& params() const { return params_; }
  Orientation orientation() const { return orientation_; }
  bool increasing() const { return orientation_ == Orientation::increasing; }

  Interval image() const { return image_of({domain_.lo, domain_.hi}); }

  /// Image of a subinterval of the domain (monotone, so endpoints suffice).
  Interval image_of(Interval part) const {
    double a = (*this)(part.lo);
    double b = (*this)(part.hi);
    return {std::clamp(std::min(a, b), 0.0, 1.0), std::clamp(std::max(a, b), 0.0, 1.0)};
  }

  /// Branch inverse by bisection; y is clamped to the image first and image
  /// endpoints map to the matching domain endpoint exactly.
  double inverse(double y, double tol = kDefaultTolInv) const {
    double lo = domain_.lo;
    double hi = domain_.hi;
    const Interval im = image();
    y = std::clamp(y, im.lo, im.hi);
    const bool inc = increasing();
    if (y == im.lo) return inc ? domain_.lo : domain_.hi;
    if (y == im.hi) return inc ? domain_.hi : domain_.lo;
    for (int it = 0; it < 200 && hi - lo > tol * 0.5; ++it) {
      double mid = 0.5 * (lo + hi);
      double v = (*this)(mid);
      if ((v < y) == inc) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    return 0.5 * (lo + hi);
  }

 private:
  static double formula(const AffineParams& p, double x) { return p.slope * x + p.intercept; }
  static double formula(const PowerParams& p, double x) {
    return p.scale * std::pow(std::abs(x - p.shift), p.exponent) + p.offset;
  }
  static double formula(const LogisticParams& p, double x) { return p.r * x * (1.0 - x); }

  void validate(double eps) const {
    constexpr int kSamples = 64;
    double prev = (*this)(domain_.lo);
    for (int k = 1; k <= kSamples; ++k) {
      double x = domain_.lo + (domain_.hi - domain_.lo) * k / kSamples;
      double v = (*this)(x);
      double diff = v - prev;
      bool ok = increasing() ? diff > 0.0 : diff < 0.0;
      if (!ok) {
        std::ostringstream os;
        os << "branch on [" << domain_.lo << ", " << domain_.hi << "] is not strictly "
           << (increasing() ? "increasing" : "decreasing") << " near x=" << x;
        throw DomainError(os.str());
      }
      prev = v;
    }
    double a = (*this)(domain_.lo);
    double b = (*this)(domain_.hi);
    if (std::min(a, b) < -eps || std::max(a, b) > 1.0 + eps) {
      std::ostringstream os;
      os << "branch on [" << domain_.lo << ", " << domain_.hi << "] has image ["
         << std::min(a, b) << ", " << std::max(a, b) << "] outside [0,1]";
      throw DomainError(os.str());
    }
  }

  Interval domain_;
  BranchParams params_;
  Orientation orientation_;
};

enum class MapKind { continuous, lorenz };
enum class Side { left, right, automatic };

struct Orbit {
  std::vector<double> points;
  std::size_t length() const { return points.size(); }
};

class PiecewiseMap {
 public:
  static PiecewiseMap continuous(std::vector<Branch> branches,
                                 double eps = kDefaultEpsGeom) {
    PiecewiseMap f(MapKind::continuous, std::move(branches), eps);
    for (std::size_t i = 0; i + 1 < f.branches_.size(); ++i) {
      double x = f.branches_[i].domain().hi;
      double left = f.branches_[i](x);
      double right = f.branches_[i + 1](x);
      if (std::abs(left - right) > 1e3 * eps) {
        std::ostringstream os;
        os << "continuous map: branches " << i << " and " << i + 1 << " disagree at x=" << x
           << " (" << left << " vs " << right << ")";
        throw DomainError(os.str());
      }
    }
    return f;
  }

  /// Left branch on [0,c], right branch on [c,1]; both increasing.
  static PiecewiseMap lorenz(Branch left, Branch right, double eps = kDefaultEpsGeom) {
    if (!left.increasing() || !right.increasing()) {
      throw DomainError("lorenz map: both branches must be increasing");
    }
    return PiecewiseMap(MapKind::lorenz, {std::move(left), std::move(right)}, eps);
  }

  MapKind kind() const { return kind_; }
  bool is_lorenz() const { return kind_ == MapKind::lorenz; }
  std::optional<double> critical_point() const { return critical_; }
  const std::vector<Branch>& branches() const { return branches_; }
  double eps() const { return eps_; }

  double eval(double x, Side side = Side::automatic) const {
    if (x < -eps_ || x > 1.0 + eps_) throw DomainError("eval: x outside [0,1]");
    x = std::clamp(x, 0.0, 1.0);
    if (critical_ && std::abs(x - *critical_) <= eps_) {
      switch (side) {
        case Side::left:
          return clamp01(branches_[0](*critical_));
        case Side::right:
          return clamp01(branches_[1](*critical_));
        case Side::automatic:
          throw AmbiguousCriticalPointError("eval at the critical point needs a side", 0);
      }
    }
    return clamp01(branch_for(x)(x));
  }

  Orbit iterate(double x, std::size_t n) const {
    Orbit orbit;
    orbit.points.reserve(n + 1);
    orbit.points.push_back(x);
    for (std::size_t k = 0; k < n; ++k) {
      try {
        x = eval(x);
      } catch (const AmbiguousCriticalPointError&) {
        std::ostringstream os;
        os << "orbit hits the critical point at index " << k;
        throw AmbiguousCriticalPointError(os.str(), k);
      }
      orbit.points.push_back(x);
    }
    return orbit;
  }

  /// One solution per branch whose (closed) image contains y; sorted, deduplicated.
  std::vector<double> preimages(double y, double tol = kDefaultTolInv) const {
    std::vector<double> out;
    for (const auto& b : branches_) {
      Interval im = b.image();
      if (y >= im.lo - eps_ && y <= im.hi + eps_) out.push_back(b.inverse(y, tol));
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end(),
                          [tol](double a, double b) { return std::abs(a - b) <= 10 * tol; }),
              out.end());
    return out;
  }

  IntervalUnion image(const IntervalUnion& s) const {
    std::vector<Interval> pieces;
    for (const auto& b : branches_) {
      for (const auto& iv : s) {
        double lo = std::max(iv.lo, b.domain().lo);
        double hi = std::min(iv.hi, b.domain().hi);
        if (lo > hi + eps_) continue;
        pieces.push_back(b.image_of({lo, std::max(lo, hi)}));
      }
    }
    return IntervalUnion::normalize(std::move(pieces), eps_);
  }

  IntervalUnion preimage(const IntervalUnion& s, double tol = kDefaultTolInv) const {
    std::vector<Interval> pieces;
    for (const auto& b : branches_) {
      Interval im = b.image();
      for (const auto& iv : s) {
        double lo = std::max(iv.lo, im.lo);
        double hi = std::min(iv.hi, im.hi);
        if (lo > hi + eps_) continue;
        double x0 = b.inverse(lo, tol);
        double x1 = b.inverse(std::max(lo, hi), tol);
        pieces.push_back({std::min(x0, x1), std::max(x0, x1)});
      }
    }
    return IntervalUnion::normalize(std::move(pieces), eps_);
  }

 private:
  PiecewiseMap(MapKind kind, std::vector<Branch> branches, double eps)
      : kind_(kind), branches_(std::move(branches)), eps_(eps) {
    if (branches_.empty()) throw DomainError("map needs at least one branch");
    std::sort(branches_.begin(), branches_.end(), [](const Branch& a, const Branch& b) {
      return a.domain().lo < b.domain().lo;
    });
    if (std::abs(branches_.front().domain().lo) > eps ||
        std::abs(branches_.back().domain().hi - 1.0) > eps) {
      throw DomainError("branch domains must cover [0,1]");
    }
    for (std::size_t i = 0; i + 1 < branches_.size(); ++i) {
      if (std::abs(branches_[i].domain().hi - branches_[i + 1].domain().lo) > eps) {
        throw DomainError("branch domains must partition [0,1] without gaps or overlaps");
      }
    }
    if (kind == MapKind::lorenz && branches_.size() != 2) {
      throw DomainError("lorenz map needs exactly two branches");
    }
    if (kind == MapKind::lorenz) critical_ = branches_[0].domain().hi;
  }

  static double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

  const Branch& branch_for(double x) const {
    // Half-open domains [lo, hi); the last branch also owns 1.
    for (std::size_t i = 0; i + 1 < branches_.size(); ++i) {
      if (x < branches_[i].domain().hi) return branches_[i];
    }
    return branches_.back();
  }

  MapKind kind_;
  std::vector<Branch> branches_;
  std::optional<double> critical_;
  double eps_;
};

}  // namespace ard
