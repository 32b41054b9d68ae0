/** \file
 * map_io.hpp: JSON map definitions.
 *
 *   { "kind": "continuous" | "lorenz",
 *     "critical_point": c,                       (lorenz only)
 *     "branches": [ { "domain": [l, r],
 *                     "type": "affine" | "power" | "logistic",
 *                     "params": { ... },
 *                     "orientation": "inc" | "dec" } ] }
 *
 * affine params: slope, intercept.
 * power params: exponent, scale (1), offset (0), shift (0).
 * logistic params: r.
 */
#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "ard/errors.hpp"
#include "ard/map_model.hpp"

namespace ard {

namespace detail {

inline double number_field(const nlohmann::json& obj, const std::string& key,
                           const std::string& path) {
  if (!obj.contains(key)) throw SchemaError(path + "." + key, "missing required number");
  if (!obj[key].is_number()) throw SchemaError(path + "." + key, "expected a number");
  return obj[key].get<double>();
}

inline double number_field_or(const nlohmann::json& obj, const std::string& key,
                              const std::string& path, double fallback) {
  if (!obj.contains(key)) return fallback;
  return number_field(obj, key, path);
}

inline Branch parse_branch(const nlohmann::json& j, const std::string& path) {
  if (!j.is_object()) throw SchemaError(path, "expected an object");
  if (!j.contains("domain") || !j["domain"].is_array() || j["domain"].size() != 2 ||
      !j["domain"][0].is_number() || !j["domain"][1].is_number()) {
    throw SchemaError(path + ".domain", "expected [lo, hi]");
  }
  Interval domain{j["domain"][0].get<double>(), j["domain"][1].get<double>()};

  if (!j.contains("type") || !j["type"].is_string()) {
    throw SchemaError(path + ".type", "expected \"affine\", \"power\" or \"logistic\"");
  }
  const std::string type = j["type"].get<std::string>();
  const nlohmann::json params = j.value("params", nlohmann::json::object());
  const std::string ppath = path + ".params";
  if (!params.is_object()) throw SchemaError(ppath, "expected an object");

  BranchParams bp;
  if (type == "affine") {
    bp = AffineParams{number_field(params, "slope", ppath), number_field(params, "intercept", ppath)};
  } else if (type == "power") {
    bp = PowerParams{number_field(params, "exponent", ppath),
                     number_field_or(params, "scale", ppath, 1.0),
                     number_field_or(params, "offset", ppath, 0.0),
                     number_field_or(params, "shift", ppath, 0.0)};
  } else if (type == "logistic") {
    bp = LogisticParams{number_field(params, "r", ppath)};
  } else {
    throw SchemaError(path + ".type", "unknown branch type \"" + type + "\"");
  }

  if (!j.contains("orientation") || !j["orientation"].is_string()) {
    throw SchemaError(path + ".orientation", "expected \"inc\" or \"dec\"");
  }
  const std::string orient = j["orientation"].get<std::string>();
  Orientation o;
  if (orient == "inc") {
    o = Orientation::increasing;
  } else if (orient == "dec") {
    o = Orientation::decreasing;
  } else {
    throw SchemaError(path + ".orientation", "expected \"inc\" or \"dec\"");
  }
  try {
    return Branch(domain, bp, o);
  } catch (const DomainError& e) {
    throw SchemaError(path, e.what());
  }
}

}  // namespace detail

inline PiecewiseMap map_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw SchemaError("map", "expected an object");
  if (!j.contains("kind") || !j["kind"].is_string()) {
    throw SchemaError("kind", "expected \"continuous\" or \"lorenz\"");
  }
  const std::string kind = j["kind"].get<std::string>();
  if (kind != "continuous" && kind != "lorenz") {
    throw SchemaError("kind", "expected \"continuous\" or \"lorenz\"");
  }
  if (!j.contains("branches") || !j["branches"].is_array() || j["branches"].empty()) {
    throw SchemaError("branches", "expected a nonempty array");
  }
  std::vector<Branch> branches;
  for (std::size_t i = 0; i < j["branches"].size(); ++i) {
    branches.push_back(
        detail::parse_branch(j["branches"][i], "branches[" + std::to_string(i) + "]"));
  }
  try {
    if (kind == "continuous") return PiecewiseMap::continuous(std::move(branches));
    if (branches.size() != 2) throw SchemaError("branches", "lorenz map needs exactly two branches");
    double c = detail::number_field(j, "critical_point", "map");
    PiecewiseMap f = PiecewiseMap::lorenz(branches[0], branches[1]);
    if (std::abs(*f.critical_point() - c) > 1e-9) {
      throw SchemaError("critical_point", "does not match the shared branch endpoint");
    }
    return f;
  } catch (const DomainError& e) {
    throw SchemaError("branches", e.what());
  }
}

inline PiecewiseMap load_map(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open map file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError("map", std::string("invalid JSON: ") + e.what());
  }
  return map_from_json(j);
}

inline nlohmann::ordered_json map_to_json(const PiecewiseMap& f) {
  nlohmann::ordered_json j;
  j["kind"] = f.is_lorenz() ? "lorenz" : "continuous";
  if (f.critical_point()) j["critical_point"] = *f.critical_point();
  j["branches"] = nlohmann::ordered_json::array();
  for (const auto& b : f.branches()) {
    nlohmann::ordered_json bj;
    bj["domain"] = {b.domain().lo, b.domain().hi};
    std::visit(
        [&bj](const auto& p) {
          using P = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<P, AffineParams>) {
            bj["type"] = "affine";
            bj["params"] = {{"slope", p.slope}, {"intercept", p.intercept}};
          } else if constexpr (std::is_same_v<P, PowerParams>) {
            bj["type"] = "power";
            bj["params"] = {{"exponent", p.exponent}, {"scale", p.scale},
                            {"offset", p.offset}, {"shift", p.shift}};
          } else {
            bj["type"] = "logistic";
            bj["params"] = {{"r", p.r}};
          }
        },
        b.params());
    bj["orientation"] = b.increasing() ? "inc" : "dec";
    j["branches"].push_back(bj);
  }
  return j;
}

}  // namespace ard
