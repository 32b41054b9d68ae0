/** \file
 * lyapunov.hpp: Lyapunov functions for an A-R pair and for the weak Morse
 * decomposition of a leveled chain.
 *
 *   g(x) = sum_{i<m} P_i(x) / (d(x, M_i) + 2^i P_i(x)),  P_i = prod_{j != i} d(x, M_j)
 *   h(x) = sup_{n >= 0} g(f^n x)
 *   V(x) = (e - 1) sum_k e^{-(k+1)} h(f^k x)
 *
 * g takes the value 1/2^i on M_i (i < m) and 0 on M_m. V carries the
 * (e - 1) normalization so that the same levels hold for V.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ard/decomposition.hpp"
#include "ard/errors.hpp"
#include "ard/interval_set.hpp"
#include "ard/map_model.hpp"

namespace ard {

/// Where the series for V starts: k >= 0 (current point) or k >= 1.
enum class SeriesStart { current, next };

struct LyapunovOptions {
  std::size_t sup_horizon = 200;    ///< N_h
  std::size_t series_horizon = 40;  ///< N_V
  std::optional<double> eps_overlap;  ///< defaults to the chain's box width
  SeriesStart series_start = SeriesStart::current;
};

struct LyapunovValue {
  double value = 0.0;
  double error_bound = 0.0;
};

/// g along an orbit buffer, with h as the suffix maximum.
struct OrbitProfile {
  std::vector<double> points;
  std::vector<double> g;
  std::vector<double> h;
};

inline double g_pair(double x, const IntervalUnion& a, const IntervalUnion& r, double eps_overlap = 0.0) {
  const double da = distance_point(x, a);
  const double dr = distance_point(x, r);
  if (da + dr <= eps_overlap || (da <= eps_overlap && dr <= eps_overlap) || da + dr == 0.0) {
    std::ostringstream os;
    os << "g undefined at x=" << x << ": within " << eps_overlap << " of both sets";
    throw OnOverlapError(os.str(), 0);
  }
  return da / (da + dr);
}

class LyapunovEvaluator {
 public:
  LyapunovEvaluator(std::vector<IntervalUnion> morse_sets, IntervalUnion overlap, double eps_overlap,
                    LyapunovOptions opts = {})
      : morse_(std::move(morse_sets)), overlap_(std::move(overlap)), eps_(eps_overlap), opts_(opts) {
    if (opts_.series_horizon < 1 || opts_.sup_horizon < opts_.series_horizon) {
      throw DomainError("Lyapunov horizons need N_h >= N_V >= 1");
    }
    if (morse_.empty()) throw DomainError("Lyapunov evaluator needs at least one Morse set");
    for (const auto& m : morse_) {
      if (m.empty()) throw DomainError("Morse sets must be nonempty");
    }
  }

  static LyapunovEvaluator from_chain(const ARChain& chain, LyapunovOptions opts = {}) {
    double eps = opts.eps_overlap.value_or(chain.box_width);
    return LyapunovEvaluator(chain.morse_sets, chain.overlap(), eps, opts);
  }

  /// Attractor-repeller pair: M_0 = R, M_1 = A.
  static LyapunovEvaluator from_pair(const IntervalUnion& a, const IntervalUnion& r, double eps_overlap,
                                     LyapunovOptions opts = {}) {
    return LyapunovEvaluator({r, a}, intersect(a, r), eps_overlap, opts);
  }

  std::size_t level_count() const { return morse_.size() - 1; }
  bool degenerate() const { return level_count() == 0; }
  const std::vector<IntervalUnion>& morse_sets() const { return morse_; }
  const IntervalUnion& overlap() const { return overlap_; }
  double eps_overlap() const { return eps_; }
  const LyapunovOptions& options() const { return opts_; }
  double tail_bound() const { return std::exp(-static_cast<double>(opts_.series_horizon)); }
  static double normalizer() { return std::exp(1.0) - 1.0; }

  double g(double x) const {
    const std::size_t m = level_count();
    if (m == 0) return 0.0;
    std::vector<double> d(m + 1);
    std::size_t near = 0;
    for (std::size_t i = 0; i <= m; ++i) {
      d[i] = distance_point(x, morse_[i]);
      if (d[i] <= eps_) ++near;
    }
    if (near >= 2 || (!overlap_.empty() && distance_point(x, overlap_) <= eps_)) {
      std::ostringstream os;
      os << "g undefined at x=" << x << ": within " << eps_ << " of the overlap set";
      throw OnOverlapError(os.str(), 0);
    }
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      double p = 1.0;
      for (std::size_t j = 0; j <= m; ++j) {
        if (j != i) p *= d[j];
      }
      if (p == 0.0) continue;
      total += p / (d[i] + std::ldexp(p, static_cast<int>(i)));
    }
    return total;
  }

  /// Orbit of x with `extra` additional points beyond N_h + N_V.
  OrbitProfile profile(const PiecewiseMap& f, double x, std::size_t extra = 0) const {
    OrbitProfile p;
    const std::size_t len = opts_.sup_horizon + opts_.series_horizon + extra;
    if (degenerate()) {
      p.points.assign(1, x);
      p.g.assign(len + 1, 0.0);
      p.h.assign(len + 1, 0.0);
      return p;
    }
    p.points = f.iterate(x, len).points;
    p.g.resize(p.points.size());
    for (std::size_t k = 0; k < p.points.size(); ++k) {
      try {
        p.g[k] = g(p.points[k]);
      } catch (const OnOverlapError& e) {
        throw OnOverlapError(e.what(), k);
      }
    }
    p.h.resize(p.g.size());
    double run = 0.0;
    for (std::size_t k = p.g.size(); k-- > 0;) {
      run = std::max(run, p.g[k]);
      p.h[k] = run;
    }
    return p;
  }

  /// V at the orbit point with index `start` of a profile.
  double v_from_profile(const OrbitProfile& p, std::size_t start = 0) const {
    const std::size_t nv = opts_.series_horizon;
    double sum = 0.0;
    if (opts_.series_start == SeriesStart::current) {
      for (std::size_t k = 0; k <= nv; ++k) sum += std::exp(-static_cast<double>(k + 1)) * p.h.at(start + k);
    } else {
      for (std::size_t k = 1; k <= nv; ++k) sum += std::exp(-static_cast<double>(k)) * p.h.at(start + k);
    }
    return normalizer() * sum;
  }

  double h(const PiecewiseMap& f, double x) const { return profile(f, x).h.front(); }

  LyapunovValue v(const PiecewiseMap& f, double x) const {
    if (degenerate()) return {0.0, 0.0};
    return {v_from_profile(profile(f, x)), tail_bound()};
  }

 private:
  std::vector<IntervalUnion> morse_;
  IntervalUnion overlap_;
  double eps_;
  LyapunovOptions opts_;
};

inline double g_morse(double x, const LyapunovEvaluator& ev) { return ev.g(x); }
inline double h_value(const PiecewiseMap& f, double x, const LyapunovEvaluator& ev) { return ev.h(f, x); }
inline LyapunovValue v_value(const PiecewiseMap& f, double x, const LyapunovEvaluator& ev) {
  return ev.v(f, x);
}

// ---------------------------------------------------------------------------
// Readback of alpha(x) from V(x)

inline double level_tolerance(const LyapunovEvaluator& ev) { return ev.tail_bound() + 1e-9; }

inline AlphaClass alpha_from_v(double v, const LyapunovEvaluator& ev) {
  const std::size_t m = ev.level_count();
  const double tol = level_tolerance(ev);
  if (std::abs(v) <= tol) return AlphaClass::whole();
  for (std::size_t j = 0; j < m; ++j) {
    if (std::abs(v - std::ldexp(1.0, -static_cast<int>(j))) <= tol) return AlphaClass::repeller(j + 1);
  }
  for (std::size_t j = 0; j < m; ++j) {
    const double top = std::ldexp(1.0, -static_cast<int>(j));
    const double bottom = j + 1 == m ? 0.0 : std::ldexp(1.0, -static_cast<int>(j + 1));
    if (v > bottom + tol && v < top - tol) return AlphaClass::connecting(j + 1);
  }
  std::ostringstream os;
  os << "V=" << v << " lies in no level band and no open gap";
  throw AmbiguousLevelError(os.str());
}

/// Band label of a V value: "level:j", "zero", "gap:j" or "ambiguous".
inline std::string level_band(double v, const LyapunovEvaluator& ev) {
  try {
    AlphaClass a = alpha_from_v(v, ev);
    switch (a.kind) {
      case AlphaKind::whole_space:
        return "zero";
      case AlphaKind::repeller:
        return "level:" + std::to_string(a.level - 1);
      case AlphaKind::connecting:
        return "gap:" + std::to_string(a.level - 1);
      default:
        return "ambiguous";
    }
  } catch (const AmbiguousLevelError&) {
    return "ambiguous";
  }
}

// ---------------------------------------------------------------------------
// Checks

struct MonotoneReport {
  std::size_t samples = 0;
  std::size_t steps = 0;
  std::size_t violations = 0;         ///< V(x) - V(f^n x) <= -tolerance, independent evaluation
  std::size_t shared_violations = 0;  ///< V(x) < V(f x) on one orbit buffer
  std::size_t overlap_skips = 0;
  double min_decrement = std::numeric_limits<double>::infinity();
  double tolerance = 0.0;
};

namespace detail {

inline std::vector<double> sample_union(const std::vector<IntervalUnion>& regions, std::size_t count,
                                        std::mt19937_64& rng) {
  std::vector<Interval> pieces;
  std::vector<double> weights;
  for (const auto& r : regions) {
    for (const auto& iv : r) {
      if (iv.length() > 0.0) {
        pieces.push_back(iv);
        weights.push_back(iv.length());
      }
    }
  }
  std::vector<double> out;
  if (pieces.empty()) return out;
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  out.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    const Interval& iv = pieces[pick(rng)];
    out.push_back(iv.lo + unit(rng) * iv.length());
  }
  return out;
}

}  // namespace detail

/// V decreases along orbits started in the connecting regions of the chain.
inline MonotoneReport verify_monotone(const PiecewiseMap& f, const LyapunovEvaluator& ev, const ARChain& chain,
                                      std::size_t samples, std::size_t steps, std::uint64_t seed) {
  MonotoneReport rep;
  rep.steps = steps;
  rep.tolerance = ev.tail_bound();
  if (ev.degenerate()) return rep;
  std::mt19937_64 rng(seed);
  std::vector<double> xs = detail::sample_union(chain.connecting_regions, samples, rng);
  for (double x : xs) {
    try {
      OrbitProfile p = ev.profile(f, x, steps);
      const double v0 = ev.v_from_profile(p, 0);
      double prev = v0;
      for (std::size_t n = 1; n <= steps; ++n) {
        const double shared = ev.v_from_profile(p, n);
        if (shared > prev) ++rep.shared_violations;
        prev = shared;
        const double indep = ev.v(f, p.points[n]).value;
        const double dec = v0 - indep;
        rep.min_decrement = std::min(rep.min_decrement, dec);
        if (dec <= -rep.tolerance) ++rep.violations;
      }
      ++rep.samples;
    } catch (const OnOverlapError&) {
      ++rep.overlap_skips;
    } catch (const AmbiguousCriticalPointError&) {
      ++rep.overlap_skips;
    }
  }
  return rep;
}

struct LevelSetReport {
  std::size_t g_checked = 0;
  std::size_t v_checked = 0;
  std::size_t skipped = 0;
  double g_worst = 0.0;
  double v_worst = 0.0;
};

/// g (and V, for points whose orbit stays in the set over the horizon) on
/// evenly spaced points of each Morse set plus the piece endpoints.
inline LevelSetReport check_level_sets(const PiecewiseMap& f, const LyapunovEvaluator& ev,
                                       std::size_t per_set = 100) {
  LevelSetReport rep;
  const std::size_t m = ev.level_count();
  if (m == 0) return rep;
  for (std::size_t i = 0; i <= m; ++i) {
    const IntervalUnion& set = ev.morse_sets()[i];
    const double level = i == m ? 0.0 : std::ldexp(1.0, -static_cast<int>(i));
    std::vector<double> xs;
    for (const auto& iv : set) {
      xs.push_back(iv.lo);
      xs.push_back(iv.hi);
    }
    const double total = set.measure();
    if (total > 0.0) {
      for (std::size_t k = 0; k < per_set; ++k) {
        double t = total * (static_cast<double>(k) + 0.5) / static_cast<double>(per_set);
        for (const auto& iv : set) {
          if (t <= iv.length()) {
            xs.push_back(iv.lo + t);
            break;
          }
          t -= iv.length();
        }
      }
    }
    for (double x : xs) {
      try {
        OrbitProfile p = ev.profile(f, x);
        rep.g_worst = std::max(rep.g_worst, std::abs(p.g.front() - level));
        ++rep.g_checked;
        const std::size_t horizon = ev.options().series_horizon + 1;
        bool stays = true;
        for (std::size_t k = 0; k < std::min(horizon + ev.options().sup_horizon, p.points.size()); ++k) {
          if (!membership(p.points[k], set, Membership::closed)) {
            stays = false;
            break;
          }
        }
        if (stays) {
          rep.v_worst = std::max(rep.v_worst, std::abs(ev.v_from_profile(p) - level));
          ++rep.v_checked;
        }
      } catch (const Error&) {
        ++rep.skipped;
      }
    }
  }
  return rep;
}

/// Largest jump of V between neighbouring points of a uniform grid with `intervals` steps.
inline double continuity_modulus(const PiecewiseMap& f, const LyapunovEvaluator& ev, std::size_t intervals) {
  double worst = 0.0;
  std::optional<double> prev;
  for (std::size_t k = 0; k <= intervals; ++k) {
    double x = static_cast<double>(k) / static_cast<double>(intervals);
    try {
      double v = ev.v(f, x).value;
      if (prev) worst = std::max(worst, std::abs(v - *prev));
      prev = v;
    } catch (const Error&) {
      prev.reset();
    }
  }
  return worst;
}

// ---------------------------------------------------------------------------
// CSV dump

inline constexpr const char* kCsvHeader = "x,g,h,V,level_band,alpha_class";

/// samples + 1 rows on the uniform grid k / samples.
inline void write_lyapunov_csv(std::ostream& os, const PiecewiseMap& f, const LyapunovEvaluator& ev,
                               std::size_t samples) {
  os << kCsvHeader << '\n';
  const std::size_t m = ev.level_count();
  const auto old_precision = os.precision(17);
  for (std::size_t k = 0; k <= samples; ++k) {
    const double x = samples == 0 ? 0.0 : static_cast<double>(k) / static_cast<double>(samples);
    os << x << ',';
    try {
      OrbitProfile p = ev.profile(f, x);
      const double v = ev.degenerate() ? 0.0 : ev.v_from_profile(p);
      std::string alpha;
      try {
        alpha = alpha_from_v(v, ev).label(m);
      } catch (const AmbiguousLevelError&) {
        alpha = "ambiguous";
      }
      os << p.g.front() << ',' << p.h.front() << ',' << v << ',' << level_band(v, ev) << ',' << alpha << '\n';
    } catch (const Error&) {
      os << "nan,nan,nan,undefined,undefined\n";
    }
  }
  os.precision(old_precision);
}

}  // namespace ard
