/** \file
 * pipeline.hpp: end-to-end analysis of one map.
 *
 * run_pipeline builds the refined cover, the leveled chain, the
 * renormalization cross-check (Lorenz maps) and the Lyapunov evaluator, then
 * runs every verification suite. Errors raised by a stage are recorded in
 * the report instead of escaping.
 */
#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ard/box_graph.hpp"
#include "ard/decomposition.hpp"
#include "ard/errors.hpp"
#include "ard/interval_set.hpp"
#include "ard/lorenz_renorm.hpp"
#include "ard/lyapunov.hpp"
#include "ard/map_io.hpp"
#include "ard/map_model.hpp"

namespace ard {

inline constexpr const char* kReportSchemaVersion = "1.0";

struct RunConfig {
  std::filesystem::path map_file;
  std::size_t n_boxes = 256;
  std::size_t max_depth = kDefaultMaxDepth;
  std::size_t max_return = kDefaultMaxReturn;
  std::size_t sup_horizon = 200;
  std::size_t series_horizon = 40;
  std::size_t samples = 1000;
  std::uint64_t seed = 20240611;
  std::optional<std::filesystem::path> report_path;
  std::optional<std::filesystem::path> csv_path;
  std::optional<std::filesystem::path> graph_dump_path;

  // Fixed suite parameters.
  std::size_t monotone_steps = 5;
  std::size_t alpha_depth = 20;
  std::size_t alpha_cap = 4096;
  std::size_t alpha_points_per_region = 50;
  std::size_t e_depth = 16;

  void validate() const {
    BoxCover check(n_boxes);
    (void)check;
    if (max_depth == 0) throw UsageError("--depth must be positive");
    if (max_return == 0) throw UsageError("--max-return must be positive");
    if (series_horizon == 0) throw UsageError("--series-horizon must be positive");
    if (sup_horizon < series_horizon) throw UsageError("--sup-horizon must be >= --series-horizon");
    if (samples == 0) throw UsageError("--samples must be positive");
  }
};

struct SuiteResult {
  std::string name;
  bool applicable = true;
  bool passed = false;
  std::size_t checked = 0;
  std::optional<double> worst;      ///< worst observed value of the checked quantity
  std::optional<double> threshold;  ///< pass iff worst <= threshold (when both set)
  std::string note;
  nlohmann::ordered_json details = nlohmann::ordered_json::object();
};

struct ErrorEntry {
  std::string stage;
  std::string type;
  std::string message;
};

struct Report {
  RunConfig config;
  nlohmann::ordered_json map_json;
  std::optional<ARChain> chain;
  std::optional<RenormResult> renorm;
  bool renorm_searched = false;
  nlohmann::ordered_json renorm_json;
  nlohmann::ordered_json lyapunov_json;
  std::vector<SuiteResult> suites;
  std::vector<ErrorEntry> errors;

  bool passed() const {
    if (!errors.empty()) return false;
    for (const auto& s : suites) {
      if (!s.passed) return false;
    }
    return true;
  }

  const SuiteResult* suite(const std::string& name) const {
    for (const auto& s : suites) {
      if (s.name == name) return &s;
    }
    return nullptr;
  }

  nlohmann::ordered_json to_json(std::optional<std::string> generated_at = std::nullopt) const;
};

// ---------------------------------------------------------------------------

namespace detail {

inline nlohmann::ordered_json union_json(const IntervalUnion& u) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& iv : u) j.push_back({iv.lo, iv.hi});
  return j;
}

inline std::string error_type(const std::exception& e) {
  if (dynamic_cast<const ResolutionError*>(&e)) return "resolution";
  if (dynamic_cast<const InconsistencyError*>(&e)) return "inconsistency";
  if (dynamic_cast<const OnOverlapError*>(&e)) return "on_overlap";
  if (dynamic_cast<const AmbiguousCriticalPointError*>(&e)) return "critical_point";
  if (dynamic_cast<const PreimageTreeDiedError*>(&e)) return "preimage_tree_died";
  if (dynamic_cast<const AmbiguousLevelError*>(&e)) return "ambiguous_level";
  if (dynamic_cast<const UndefinedDistanceError*>(&e)) return "undefined_distance";
  if (dynamic_cast<const DomainError*>(&e)) return "domain";
  return "internal";
}

inline SuiteResult skipped_suite(const std::string& name, const std::string& why) {
  SuiteResult s;
  s.name = name;
  s.applicable = false;
  s.passed = true;
  s.note = why;
  return s;
}

inline SuiteResult failed_suite(const std::string& name, const std::string& why) {
  SuiteResult s;
  s.name = name;
  s.passed = false;
  s.note = why;
  return s;
}

inline void finish_threshold(SuiteResult& s) {
  if (s.worst && s.threshold) s.passed = s.passed && *s.worst <= *s.threshold;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Suites

namespace suites {

inline SuiteResult outer_approximation(const PiecewiseMap& f, const RefinedCover& cover, std::uint64_t seed) {
  SuiteResult s;
  s.name = "outer_approximation";
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::size_t missing = 0;
  for (const TransitionGraph* g : {&cover.coarse(), &cover.fine()}) {
    for (int i = 0; i < 10000; ++i) {
      double x = unit(rng);
      double y;
      try {
        y = f.eval(x);
      } catch (const AmbiguousCriticalPointError&) {
        continue;
      }
      ++s.checked;
      if (!g->has_edge(g->cover().index_of(x), g->cover().index_of(y))) ++missing;
    }
  }
  s.passed = missing == 0;
  s.details["missing_edges"] = missing;
  return s;
}

inline SuiteResult inv_identity(const RefinedCover& cover, const ARChain& chain) {
  SuiteResult s;
  s.name = "inv_identity";
  const TransitionGraph& g = cover.coarse();
  std::vector<BoxSet> ns{BoxSet(g.size(), true)};
  for (const auto& lv : chain.levels) ns.push_back(lv.attracting_boxes.complement());
  std::size_t bad_limit = 0, bad_antitone = 0, bad_fixed = 0, bad_invariance = 0, bad_refine = 0;
  for (const auto& n : ns) {
    const BoxSet core = inv(g, n);
    if (!(inv_m(g, n, g.size() + 1) == core)) ++bad_limit;
    for (std::size_t m = 1; m <= g.size(); m *= 2) {
      if (!inv_m(g, n, m + 1).subset_of(inv_m(g, n, m))) ++bad_antitone;
    }
    if (!(inv_m(g, core, 1) == core)) ++bad_fixed;
    for (auto k : core.members()) {
      bool fwd = false, bwd = false;
      for (auto j : g.successors(k)) fwd = fwd || core.contains(j);
      for (auto j : g.predecessors(k)) bwd = bwd || core.contains(j);
      if (!fwd || !bwd) ++bad_invariance;
    }
    const BoxSet fine_n = BoxSet::from_intervals(cover.fine().cover(), n.to_intervals());
    const BoxSet fine_core = inv(cover.fine(), fine_n);
    if (!fine_core.empty() && !core.empty() &&
        !subset(fine_core.to_intervals(), core.to_intervals(), 1e-12)) {
      ++bad_refine;
    }
    if (!fine_core.empty() && core.empty()) ++bad_refine;
    ++s.checked;
  }
  s.details["limit_mismatches"] = bad_limit;
  s.details["antitone_violations"] = bad_antitone;
  s.details["fixed_point_violations"] = bad_fixed;
  s.details["invariance_violations"] = bad_invariance;
  s.details["refinement_violations"] = bad_refine;
  s.passed = bad_limit + bad_antitone + bad_fixed + bad_invariance + bad_refine == 0;
  return s;
}

inline SuiteResult nesting(const ARChain& chain) {
  SuiteResult s;
  s.name = "nesting";
  const std::size_t m = chain.level_count();
  if (m == 0) return detail::skipped_suite(s.name, "transitive: no levels");
  const double w = chain.box_width;
  double worst = 0.0;
  double smallest_step = 1.0;
  for (std::size_t i = 0; i < m; ++i) {
    // A_{i+1} inside A_i
    const IntervalUnion a_outer = chain.attracting(i), a_inner = chain.attracting(i + 1);
    worst = std::max(worst, detail::directed_hausdorff(a_inner, a_outer));
    smallest_step = std::min(smallest_step, hausdorff(a_outer, a_inner));
    // R_{i+1} inside R_{i+2}
    const IntervalUnion r_inner = chain.repelling(i + 1), r_outer = chain.repelling(i + 2);
    worst = std::max(worst, detail::directed_hausdorff(r_inner, r_outer));
    smallest_step = std::min(smallest_step, hausdorff(r_outer, r_inner));
    s.checked += 2;
  }
  s.details["smallest_step"] = smallest_step;
  s.passed = smallest_step > w;
  if (!s.passed) s.note = "consecutive levels closer than one box width";
  s.worst = worst;
  s.threshold = w;
  detail::finish_threshold(s);
  return s;
}

inline SuiteResult attracting_invariance(const PiecewiseMap& f, const ARChain& chain) {
  SuiteResult s;
  s.name = "attracting_invariance";
  if (chain.level_count() == 0) return detail::skipped_suite(s.name, "transitive: no levels");
  double worst = 0.0;
  for (const auto& lv : chain.levels) {
    worst = std::max(worst, detail::directed_hausdorff(f.image(lv.attracting), lv.attracting));
    ++s.checked;
  }
  s.passed = true;
  s.worst = worst;
  s.threshold = chain.box_width;
  detail::finish_threshold(s);
  return s;
}

inline SuiteResult repelling_bi_invariance(const PiecewiseMap& f, const ARChain& chain) {
  SuiteResult s;
  s.name = "repelling_bi_invariance";
  if (chain.level_count() == 0) return detail::skipped_suite(s.name, "transitive: no levels");
  const double w = chain.box_width;
  double worst_image = 0.0, worst_pre = 0.0;
  for (const auto& lv : chain.levels) {
    worst_image = std::max(worst_image, hausdorff(f.image(lv.repelling), lv.repelling));
    IntervalUnion pre = f.preimage(lv.repelling);
    if (!pre.empty()) worst_pre = std::max(worst_pre, detail::directed_hausdorff(pre, lv.repelling));
    ++s.checked;
  }
  s.details["image_hausdorff"] = worst_image;
  s.details["preimage_excess"] = worst_pre;
  s.worst = std::max(worst_image, worst_pre);
  s.threshold = 2 * w;
  s.passed = true;
  detail::finish_threshold(s);
  return s;
}

inline SuiteResult morse_disjoint(const ARChain& chain) {
  SuiteResult s;
  s.name = "morse_disjoint";
  double worst = 0.0;
  for (std::size_t i = 0; i < chain.morse_sets.size(); ++i) {
    for (std::size_t j = i + 1; j < chain.morse_sets.size(); ++j) {
      worst = std::max(worst, intersect(chain.morse_sets[i], chain.morse_sets[j]).measure());
      ++s.checked;
    }
  }
  s.passed = true;
  s.worst = worst;
  s.threshold = 1e-12;
  detail::finish_threshold(s);
  return s;
}

inline SuiteResult cover_suite(const ARChain& chain) {
  SuiteResult s;
  s.name = "cover";
  IntervalUnion all = unite(chain.morse_union(), chain.overlap());
  for (const auto& c : chain.connecting_regions) all = unite(all, c);
  double gap = all.empty() ? 1.0 : detail::directed_hausdorff(IntervalUnion::full(), all);
  s.checked = 1;
  s.details["uncovered_gap"] = gap;
  double ar_overlap = 0.0;
  if (chain.level_count() >= 1) {
    const auto& lv = chain.levels.front();
    IntervalUnion three = unite(unite(lv.attracting, lv.repelling), chain.connecting_regions.front());
    gap = std::max(gap, detail::directed_hausdorff(IntervalUnion::full(), three));
    ar_overlap = intersect(lv.attracting, lv.repelling).measure();
    s.details["level1_ar_interior_overlap"] = ar_overlap;
  }
  s.passed = ar_overlap <= 1e-12;
  s.worst = gap;
  s.threshold = chain.box_width;
  detail::finish_threshold(s);
  return s;
}

inline SuiteResult overlap_meager(const ARChain& chain) {
  SuiteResult s;
  s.name = "overlap_meager";
  IntervalUnion l = chain.overlap();
  s.checked = chain.level_count();
  s.details["overlap"] = detail::union_json(l);
  s.passed = true;
  s.worst = l.max_component_length();
  s.threshold = 2 * chain.box_width;
  detail::finish_threshold(s);
  return s;
}

inline SuiteResult alpha_limits(const PiecewiseMap& f, const ARChain& chain, const RunConfig& cfg) {
  SuiteResult s;
  s.name = "alpha_limits";
  const std::size_t m = chain.level_count();
  const double w = chain.box_width;
  std::mt19937_64 rng(cfg.seed + 1);
  std::size_t misclassified = 0, died = 0, skipped = 0;
  double worst = 0.0;
  nlohmann::ordered_json regions = nlohmann::ordered_json::array();

  auto run_region = [&](const IntervalUnion& region, std::size_t points, std::size_t depth,
                        const IntervalUnion& target, std::size_t index) {
    std::vector<double> xs = detail::sample_union({region}, points, rng);
    double region_worst = 0.0;
    for (double x : xs) {
      AlphaClass c = classify_alpha(chain, x);
      if (!c.definite()) {
        ++skipped;
        continue;
      }
      if (c.alpha_index(m) != index) ++misclassified;
      try {
        IntervalUnion est = alpha_limit_estimate(f, x, depth, cfg.alpha_cap);
        region_worst = std::max(region_worst, hausdorff(est, target));
        ++s.checked;
      } catch (const PreimageTreeDiedError&) {
        ++died;
      }
    }
    worst = std::max(worst, region_worst);
    nlohmann::ordered_json r;
    r["alpha_index"] = index;
    r["hausdorff_worst"] = region_worst;
    regions.push_back(r);
  };

  if (m == 0) {
    run_region(IntervalUnion::full(), 5, 12, IntervalUnion::full(), 1);
  } else {
    for (std::size_t i = 1; i <= m; ++i) {
      IntervalUnion region = difference(chain.attracting(i - 1), chain.attracting(i));
      if (region.empty()) continue;
      run_region(region, cfg.alpha_points_per_region, cfg.alpha_depth, chain.repelling(i), i);
    }
  }
  s.details["regions"] = regions;
  s.details["misclassified"] = misclassified;
  s.details["preimage_tree_died"] = died;
  s.details["ambiguous_skipped"] = skipped;
  s.passed = misclassified == 0 && s.checked > 0;
  s.worst = worst;
  s.threshold = 5 * w;
  detail::finish_threshold(s);
  return s;
}

inline SuiteResult isolating_neighborhoods(const RefinedCover& cover, const ARChain& chain) {
  SuiteResult s;
  s.name = "isolating_neighborhoods";
  if (chain.level_count() == 0) return detail::skipped_suite(s.name, "transitive: no levels");
  const TransitionGraph& g = cover.coarse();
  std::size_t failures = 0;
  nlohmann::ordered_json per = nlohmann::ordered_json::array();
  for (const auto& lv : chain.levels) {
    if (!lv.overlap.empty()) continue;
    BoxSet na = lv.attracting_boxes.dilate(1);
    BoxSet nr = lv.repelling_boxes.dilate(1);
    IsolationResult ia = is_isolating(g, na);
    IsolationResult ir = is_isolating(g, nr);
    nlohmann::ordered_json e;
    e["level"] = lv.index;
    e["attracting"] = ia.isolating;
    e["repelling"] = ir.isolating;
    per.push_back(e);
    failures += (ia.isolating ? 0 : 1) + (ir.isolating ? 0 : 1);
    s.checked += 2;
  }
  if (s.checked == 0) return detail::skipped_suite(s.name, "every level has a nonempty overlap");
  s.details["levels"] = per;
  s.passed = failures == 0;
  return s;
}

inline SuiteResult lyapunov_levels(const PiecewiseMap& f, const LyapunovEvaluator& ev, const ARChain& chain,
                                   std::size_t grid) {
  SuiteResult s;
  s.name = "lyapunov_levels";
  if (ev.degenerate()) {
    s.passed = true;
    s.note = "degenerate (transitive): V is identically 0";
    return s;
  }
  LevelSetReport lr = check_level_sets(f, ev);
  const double tail = ev.tail_bound();
  double v_min = 0.0, v_max = 0.0, pair_gap = 0.0;
  std::size_t bounded_checked = 0;
  std::optional<LyapunovEvaluator> pair;
  if (ev.level_count() == 1) {
    pair = LyapunovEvaluator::from_pair(chain.levels[0].attracting, chain.levels[0].repelling, ev.eps_overlap(),
                                        ev.options());
  }
  for (std::size_t k = 0; k <= grid; ++k) {
    double x = static_cast<double>(k) / static_cast<double>(grid);
    try {
      double v = ev.v(f, x).value;
      v_min = std::min(v_min, v);
      v_max = std::max(v_max, v);
      ++bounded_checked;
      if (pair) {
        const auto& lv = chain.levels[0];
        pair_gap = std::max(pair_gap, std::abs(ev.g(x) - g_pair(x, lv.attracting, lv.repelling)));
      }
    } catch (const Error&) {
    }
  }
  s.checked = lr.g_checked + lr.v_checked + bounded_checked;
  s.details["g_level_worst"] = lr.g_worst;
  s.details["v_level_worst"] = lr.v_worst;
  s.details["v_level_checked"] = lr.v_checked;
  s.details["v_min"] = v_min;
  s.details["v_max"] = v_max;
  if (pair) s.details["pair_agreement_worst"] = pair_gap;
  s.passed = lr.g_worst <= 1e-9 && lr.v_worst <= tail + 1e-9 && v_min >= 0.0 && v_max <= 1.0 + tail &&
             pair_gap <= 1e-12;
  return s;
}

inline SuiteResult lyapunov_monotone(const PiecewiseMap& f, const LyapunovEvaluator& ev, const ARChain& chain,
                                     const RunConfig& cfg) {
  SuiteResult s;
  s.name = "lyapunov_monotone";
  if (ev.degenerate()) {
    s.passed = true;
    s.note = "degenerate (transitive): V is identically 0";
    return s;
  }
  MonotoneReport mr = verify_monotone(f, ev, chain, cfg.samples, cfg.monotone_steps, cfg.seed + 2);
  s.checked = mr.samples;
  s.details["steps"] = mr.steps;
  s.details["violations"] = mr.violations;
  s.details["shared_buffer_violations"] = mr.shared_violations;
  s.details["overlap_skips"] = mr.overlap_skips;
  s.details["min_decrement"] = std::isfinite(mr.min_decrement) ? nlohmann::ordered_json(mr.min_decrement)
                                                                 : nlohmann::ordered_json(nullptr);
  s.details["tolerance"] = mr.tolerance;
  s.passed = mr.violations == 0 && mr.shared_violations == 0;
  return s;
}

inline SuiteResult lyapunov_continuity(const PiecewiseMap& f, const LyapunovEvaluator& ev, const ARChain& chain,
                                       std::size_t grid) {
  SuiteResult s;
  s.name = "lyapunov_continuity";
  if (ev.degenerate()) return detail::skipped_suite(s.name, "degenerate (transitive)");
  if (!chain.overlap().empty()) return detail::skipped_suite(s.name, "overlap set is nonempty");
  double coarse = continuity_modulus(f, ev, grid);
  double fine = continuity_modulus(f, ev, 2 * grid);
  s.checked = 3 * grid + 2;
  s.details["modulus"] = coarse;
  s.details["modulus_half_spacing"] = fine;
  s.passed = true;
  s.worst = fine;
  s.threshold = coarse + 1e-12;
  detail::finish_threshold(s);
  return s;
}

inline SuiteResult alpha_readback(const PiecewiseMap& f, const LyapunovEvaluator& ev, const ARChain& chain,
                                  std::size_t samples, std::uint64_t seed) {
  SuiteResult s;
  s.name = "alpha_readback";
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t m = chain.level_count();
  std::size_t disagree = 0, excluded = 0;
  for (std::size_t i = 0; i < samples; ++i) {
    double x = unit(rng);
    AlphaClass c = classify_alpha(chain, x);
    if (!c.definite()) {
      ++excluded;
      continue;
    }
    try {
      double v = ev.v(f, x).value;
      AlphaClass a = alpha_from_v(v, ev);
      ++s.checked;
      if (a.alpha_index(ev.level_count()) != c.alpha_index(m)) ++disagree;
    } catch (const Error&) {
      ++excluded;
    }
  }
  s.details["disagreements"] = disagree;
  s.details["excluded"] = excluded;
  s.passed = disagree == 0 && s.checked > 0;
  return s;
}

inline SuiteResult renorm_consistency(const PiecewiseMap& f, const ARChain& chain,
                                      const std::optional<RenormResult>& r, const RunConfig& cfg) {
  SuiteResult s;
  s.name = "renorm_consistency";
  if (!f.is_lorenz()) return detail::skipped_suite(s.name, "not a Lorenz map");
  const double w = chain.box_width;
  if (!r) {
    if (chain.level_count() == 0 && !chain.truncated) {
      s.applicable = true;
      s.passed = true;
      s.note = "no renormalization within the search bound; chain is transitive";
      return s;
    }
    return detail::failed_suite(s.name, "chain has levels but no renormalization was found within the bound");
  }
  if (chain.level_count() == 0) return detail::failed_suite(s.name, "renormalizable map but the chain is transitive");
  RenormAttracting orb = attracting_set_from_renorm(f, *r, 4 * chain.n_boxes);
  IntervalUnion e = invariant_set_E(f, *r, cfg.e_depth, chain.n_boxes);
  const auto& lv = chain.levels.front();
  double da = hausdorff(orb.set, lv.attracting);
  double de = e.empty() ? 1.0 : hausdorff(e, lv.repelling);
  s.checked = 2;
  s.details["attracting_hausdorff"] = da;
  s.details["repelling_hausdorff"] = de;
  s.details["orbit_stabilized"] = orb.stabilized;
  bool expansive = true;
  if (r->renormalized) {
    for (const auto& b : r->renormalized->branches()) expansive = expansive && b.increasing();
  }
  s.details["renormalized_is_lorenz"] = expansive;
  s.passed = orb.stabilized && expansive;
  s.worst = std::max(da, de);
  s.threshold = 4 * w;
  detail::finish_threshold(s);
  return s;
}

inline SuiteResult first_return(const PiecewiseMap& f, const std::optional<RenormResult>& r) {
  SuiteResult s;
  s.name = "first_return";
  if (!f.is_lorenz()) return detail::skipped_suite(s.name, "not a Lorenz map");
  if (!r) return detail::skipped_suite(s.name, "no renormalization within the search bound");
  FirstReturnCheck fr = verify_first_return(f, *r, 500);
  s.checked = fr.samples;
  s.details["violations"] = fr.violations;
  s.details["skipped"] = fr.skipped;
  s.details["worst_excursion"] = fr.worst_excursion;
  s.passed = fr.violations == 0;
  return s;
}

}  // namespace suites

// ---------------------------------------------------------------------------

inline const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names{
      "outer_approximation", "inv_identity", "nesting", "attracting_invariance",
      "repelling_bi_invariance", "morse_disjoint", "cover", "overlap_meager",
      "alpha_limits", "isolating_neighborhoods", "lyapunov_levels", "lyapunov_monotone",
      "lyapunov_continuity", "alpha_readback", "renorm_consistency", "first_return"};
  return names;
}

inline nlohmann::ordered_json chain_json(const ARChain& chain) {
  nlohmann::ordered_json j;
  j["level_count"] = chain.level_count();
  j["transitive"] = chain.transitive();
  j["status"] = chain.transitive() ? "transitive" : (chain.truncated ? "truncated" : "decomposed");
  j["truncated"] = chain.truncated;
  j["n_boxes"] = chain.n_boxes;
  j["box_width"] = chain.box_width;
  j["approximation"] = {{"attracting", "outer"}, {"repelling", "outer"}, {"basin", "inner"}};
  j["levels"] = nlohmann::ordered_json::array();
  for (const auto& lv : chain.levels) {
    nlohmann::ordered_json l;
    l["index"] = lv.index;
    l["attracting"] = detail::union_json(lv.attracting);
    l["repelling"] = detail::union_json(lv.repelling);
    l["basin"] = detail::union_json(lv.basin);
    l["overlap"] = detail::union_json(lv.overlap);
    l["refinement_gap_attracting"] = lv.refinement_gap_attracting;
    l["refinement_gap_repelling"] = lv.refinement_gap_repelling;
    j["levels"].push_back(l);
  }
  j["attractor"] = detail::union_json(chain.attractor);
  j["morse_sets"] = nlohmann::ordered_json::array();
  for (const auto& m : chain.morse_sets) j["morse_sets"].push_back(detail::union_json(m));
  j["connecting_regions"] = nlohmann::ordered_json::array();
  for (const auto& c : chain.connecting_regions) j["connecting_regions"].push_back(detail::union_json(c));
  j["attracting_gaps"] = chain.attracting_gaps;
  return j;
}

inline nlohmann::ordered_json Report::to_json(std::optional<std::string> generated_at) const {
  nlohmann::ordered_json j;
  j["schema_version"] = kReportSchemaVersion;
  j["generated_at"] = generated_at ? nlohmann::ordered_json(*generated_at) : nlohmann::ordered_json(nullptr);
  nlohmann::ordered_json c;
  c["map"] = config.map_file.filename().string();
  c["boxes"] = config.n_boxes;
  c["depth"] = config.max_depth;
  c["max_return"] = config.max_return;
  c["sup_horizon"] = config.sup_horizon;
  c["series_horizon"] = config.series_horizon;
  c["samples"] = config.samples;
  c["seed"] = config.seed;
  j["config"] = c;
  j["map"] = map_json;
  j["chain"] = chain ? chain_json(*chain) : nlohmann::ordered_json(nullptr);
  j["renormalization"] = renorm_json;
  j["lyapunov"] = lyapunov_json;
  j["suites"] = nlohmann::ordered_json::array();
  for (const auto& s : suites) {
    nlohmann::ordered_json e;
    e["name"] = s.name;
    e["applicable"] = s.applicable;
    e["passed"] = s.passed;
    e["checked"] = s.checked;
    e["worst"] = s.worst ? nlohmann::ordered_json(*s.worst) : nlohmann::ordered_json(nullptr);
    e["threshold"] = s.threshold ? nlohmann::ordered_json(*s.threshold) : nlohmann::ordered_json(nullptr);
    if (s.worst && s.threshold) e["margin"] = *s.threshold - *s.worst;
    if (!s.note.empty()) e["note"] = s.note;
    e["details"] = s.details;
    j["suites"].push_back(e);
  }
  j["errors"] = nlohmann::ordered_json::array();
  for (const auto& e : errors) j["errors"].push_back({{"stage", e.stage}, {"type", e.type}, {"message", e.message}});
  j["passed"] = passed();
  return j;
}

/// Runs every stage on an already-loaded map.
inline Report run_pipeline(const PiecewiseMap& f, const RunConfig& cfg) {
  cfg.validate();
  Report rep;
  rep.config = cfg;
  rep.map_json = map_to_json(f);

  auto record = [&rep](const std::string& stage, const std::exception& e) {
    rep.errors.push_back({stage, detail::error_type(e), e.what()});
  };
  auto run_suite = [&rep](const std::string& name, const std::function<SuiteResult()>& body) {
    try {
      rep.suites.push_back(body());
    } catch (const std::exception& e) {
      rep.suites.push_back(detail::failed_suite(name, std::string(detail::error_type(e)) + ": " + e.what()));
    }
  };

  std::optional<RefinedCover> cover;
  try {
    cover.emplace(f, cfg.n_boxes);
    rep.chain = leveled_decomposition(f, cfg.max_depth, *cover);
  } catch (const std::exception& e) {
    record("decomposition", e);
  }

  if (f.is_lorenz()) {
    rep.renorm_searched = true;
    try {
      rep.renorm = detect_renormalization(f, cfg.max_return);
    } catch (const std::exception& e) {
      record("renormalization", e);
    }
    nlohmann::ordered_json r;
    r["max_return"] = cfg.max_return;
    r["found"] = rep.renorm.has_value();
    if (rep.renorm) {
      r["a1"] = rep.renorm->a1;
      r["b1"] = rep.renorm->b1;
      r["l"] = rep.renorm->l;
      r["r"] = rep.renorm->r;
      try {
        IntervalUnion e = invariant_set_E(f, *rep.renorm, cfg.e_depth, cfg.n_boxes);
        EPoints ep = e_points(e, *f.critical_point());
        r["e1_minus"] = ep.minus ? nlohmann::ordered_json(*ep.minus) : nlohmann::ordered_json(nullptr);
        r["e1_plus"] = ep.plus ? nlohmann::ordered_json(*ep.plus) : nlohmann::ordered_json(nullptr);
        const double w = 1.0 / static_cast<double>(cfg.n_boxes);
        r["endpoint_contact"] = (ep.minus && std::abs(*ep.minus - rep.renorm->a1) <= w) ||
                                (ep.plus && std::abs(*ep.plus - rep.renorm->b1) <= w);
      } catch (const std::exception& e) {
        record("renormalization", e);
      }
      r["piecewise_linear"] = rep.renorm->renormalized.has_value();
      if (rep.renorm->renormalized) {
        r["slopes"] = {rep.renorm->slope_left, rep.renorm->slope_right};
        r["renormalized_map"] = map_to_json(*rep.renorm->renormalized);
      }
    }
    rep.renorm_json = r;
  } else {
    rep.renorm_json = nullptr;
  }

  if (!rep.chain) {
    for (const auto& name : suite_names()) {
      rep.suites.push_back(detail::failed_suite(name, "decomposition failed"));
    }
    rep.lyapunov_json = nullptr;
    return rep;
  }
  const ARChain& chain = *rep.chain;

  LyapunovOptions lo;
  lo.sup_horizon = cfg.sup_horizon;
  lo.series_horizon = cfg.series_horizon;
  std::optional<LyapunovEvaluator> ev;
  try {
    ev.emplace(LyapunovEvaluator::from_chain(chain, lo));
  } catch (const std::exception& e) {
    record("lyapunov", e);
  }

  run_suite("outer_approximation", [&] { return suites::outer_approximation(f, *cover, cfg.seed); });
  run_suite("inv_identity", [&] { return suites::inv_identity(*cover, chain); });
  run_suite("nesting", [&] { return suites::nesting(chain); });
  run_suite("attracting_invariance", [&] { return suites::attracting_invariance(f, chain); });
  run_suite("repelling_bi_invariance", [&] { return suites::repelling_bi_invariance(f, chain); });
  run_suite("morse_disjoint", [&] { return suites::morse_disjoint(chain); });
  run_suite("cover", [&] { return suites::cover_suite(chain); });
  run_suite("overlap_meager", [&] { return suites::overlap_meager(chain); });
  run_suite("alpha_limits", [&] { return suites::alpha_limits(f, chain, cfg); });
  run_suite("isolating_neighborhoods", [&] { return suites::isolating_neighborhoods(*cover, chain); });
  if (ev) {
    run_suite("lyapunov_levels", [&] { return suites::lyapunov_levels(f, *ev, chain, cfg.samples); });
    run_suite("lyapunov_monotone", [&] { return suites::lyapunov_monotone(f, *ev, chain, cfg); });
    run_suite("lyapunov_continuity", [&] { return suites::lyapunov_continuity(f, *ev, chain, cfg.samples); });
    run_suite("alpha_readback", [&] { return suites::alpha_readback(f, *ev, chain, cfg.samples, cfg.seed + 3); });
  } else {
    for (const char* name : {"lyapunov_levels", "lyapunov_monotone", "lyapunov_continuity", "alpha_readback"}) {
      rep.suites.push_back(detail::failed_suite(name, "Lyapunov evaluator unavailable"));
    }
  }
  run_suite("renorm_consistency", [&] { return suites::renorm_consistency(f, chain, rep.renorm, cfg); });
  run_suite("first_return", [&] { return suites::first_return(f, rep.renorm); });

  nlohmann::ordered_json ly;
  if (ev) {
    ly["degenerate"] = ev->degenerate();
    if (ev->degenerate()) ly["status"] = "degenerate (transitive)";
    ly["sup_horizon"] = cfg.sup_horizon;
    ly["series_horizon"] = cfg.series_horizon;
    ly["tail_bound"] = ev->tail_bound();
    ly["normalizer"] = LyapunovEvaluator::normalizer();
    ly["eps_overlap"] = ev->eps_overlap();
    ly["series_start"] = "current";
    std::size_t defined = 0, undefined = 0;
    double vmin = 1.0, vmax = 0.0;
    std::map<std::string, std::size_t> bands;
    for (std::size_t k = 0; k <= cfg.samples; ++k) {
      double x = static_cast<double>(k) / static_cast<double>(cfg.samples);
      try {
        double v = ev->v(f, x).value;
        ++defined;
        vmin = std::min(vmin, v);
        vmax = std::max(vmax, v);
        ++bands[level_band(v, *ev)];
      } catch (const Error&) {
        ++undefined;
      }
    }
    ly["grid_points"] = cfg.samples + 1;
    ly["defined"] = defined;
    ly["undefined"] = undefined;
    ly["v_min"] = defined ? nlohmann::ordered_json(vmin) : nlohmann::ordered_json(nullptr);
    ly["v_max"] = defined ? nlohmann::ordered_json(vmax) : nlohmann::ordered_json(nullptr);
    nlohmann::ordered_json b = nlohmann::ordered_json::object();
    for (const auto& [name, count] : bands) b[name] = count;
    ly["bands"] = b;
  }
  rep.lyapunov_json = ev ? ly : nlohmann::ordered_json(nullptr);
  return rep;
}

inline Report run_pipeline(const RunConfig& cfg) {
  cfg.validate();
  return run_pipeline(load_map(cfg.map_file), cfg);
}

// ---------------------------------------------------------------------------
// Emission

inline std::string utc_timestamp() {
  std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

namespace detail {

inline std::filesystem::path temp_sibling(const std::filesystem::path& target) {
  auto tmp = target;
  tmp += ".tmp";
  return tmp;
}

inline std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

// Writes through a temp file in the same directory, then renames.
inline void atomic_write(const std::filesystem::path& target, const std::function<void(std::ostream&)>& body) {
  const auto tmp = temp_sibling(target);
  {
    std::ofstream out = open_for_write(tmp);
    body(out);
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw IoError("write failed for " + target.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, target, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move report into place at " + target.string());
  }
}

inline void check_writable(const std::filesystem::path& target) {
  auto dir = target.parent_path();
  if (dir.empty()) dir = ".";
  if (!std::filesystem::is_directory(dir)) throw IoError("output directory does not exist: " + dir.string());
  const auto tmp = temp_sibling(target);
  { std::ofstream probe = open_for_write(tmp); }
  std::error_code ec;
  std::filesystem::remove(tmp, ec);
}

}  // namespace detail

inline std::string report_text(const Report& rep, std::optional<std::string> generated_at) {
  return rep.to_json(std::move(generated_at)).dump(2) + "\n";
}

/// Writes the report, the CSV and the edge dump requested by the config.
/// Every target is probed before anything is written.
inline void emit(const Report& rep, const PiecewiseMap& f, const RunConfig& cfg,
                 std::optional<std::string> generated_at = utc_timestamp()) {
  for (const auto& p : {cfg.report_path, cfg.csv_path, cfg.graph_dump_path}) {
    if (p) detail::check_writable(*p);
  }
  if (cfg.csv_path) {
    if (!rep.chain) throw IoError("no chain available for the CSV dump");
    LyapunovOptions lo;
    lo.sup_horizon = cfg.sup_horizon;
    lo.series_horizon = cfg.series_horizon;
    LyapunovEvaluator ev = LyapunovEvaluator::from_chain(*rep.chain, lo);
    detail::atomic_write(*cfg.csv_path, [&](std::ostream& os) { write_lyapunov_csv(os, f, ev, cfg.samples); });
  }
  if (cfg.graph_dump_path) {
    TransitionGraph g = build_graph(f, cfg.n_boxes);
    detail::atomic_write(*cfg.graph_dump_path, [&](std::ostream& os) { dump_edges(g, os); });
  }
  if (cfg.report_path) {
    const std::string text = report_text(rep, std::move(generated_at));
    detail::atomic_write(*cfg.report_path, [&](std::ostream& os) { os << text; });
  }
}

}  // namespace ard
