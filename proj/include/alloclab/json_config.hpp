// SPDX-License-Identifier: Apache-2.0
//
// JSON (de)serialization for families and scheme configurations.
//
// Family, as a string or an object:
//   "poisson" | "geometric" | "binomial(M)" | "binomial:M"
//   {"name": "mix", "coeffs": [1, 2, 0.5], "radius": "inf"}   (radius: number or "inf")
//
// Scheme:
//   {"colours": [{"family": <family>, "n": 20000, "theta": null}, ...], "N": 20000}
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "alloclab/common.hpp"
#include "alloclab/power_series.hpp"
#include "alloclab/scheme.hpp"

namespace alloclab {

/// Parses a builtin family spec string.  Throws ValidationError for unknown
/// names.
inline PowerSeriesFamily parse_family_spec(const std::string& spec) {
  if (spec == "poisson") return PowerSeriesFamily::poisson();
  if (spec == "geometric") return PowerSeriesFamily::geometric();
  const auto parse_trials = [&](std::size_t start, std::size_t end) {
    int trials = 0;
    try {
      trials = std::stoi(spec.substr(start, end - start));
    } catch (const std::exception&) {
      throw ValidationError("family spec '" + spec + "': bad trial count");
    }
    return PowerSeriesFamily::binomial(trials);
  };
  if (spec.rfind("binomial(", 0) == 0 && spec.back() == ')') {
    return parse_trials(9, spec.size() - 1);
  }
  if (spec.rfind("binomial:", 0) == 0) {
    return parse_trials(9, spec.size());
  }
  throw ValidationError("family spec '" + spec +
                        "': expected poisson, geometric or binomial(M)");
}

inline PowerSeriesFamily family_from_json(const nlohmann::json& j) {
  if (j.is_string()) return parse_family_spec(j.get<std::string>());
  if (!j.is_object()) {
    throw ValidationError("family JSON must be a spec string or an object");
  }
  if (!j.contains("name") || !j.contains("coeffs")) {
    throw ValidationError("family object needs 'name' and 'coeffs'");
  }
  const auto name = j.at("name").get<std::string>();
  const auto coeffs = j.at("coeffs").get<std::vector<double>>();
  double radius = std::numeric_limits<double>::infinity();
  if (j.contains("radius") && !j.at("radius").is_null()) {
    const auto& r = j.at("radius");
    if (r.is_string()) {
      if (r.get<std::string>() != "inf") {
        throw ValidationError("family '" + name +
                              "': radius must be a number or \"inf\"");
      }
    } else {
      radius = r.get<double>();
    }
  }
  return PowerSeriesFamily::from_coefficients(name, coeffs, radius);
}

/// Canonical JSON for a family (builtins as spec strings, customs as the
/// full object).  Used for config fingerprints, so it must be deterministic.
inline nlohmann::json family_to_json(const PowerSeriesFamily& f) {
  if (f.kind() != PowerSeriesFamily::Kind::custom) return f.name();
  const std::vector<double>* coeffs = f.coefficient_vector();
  if (!coeffs) {
    throw ValidationError("family '" + f.name() +
                          "': callback-defined families cannot be serialized");
  }
  nlohmann::json j;
  j["name"] = f.name();
  j["coeffs"] = *coeffs;
  if (std::isfinite(f.radius())) {
    j["radius"] = f.radius();
  } else {
    j["radius"] = "inf";
  }
  return j;
}

/// Colours plus box count, before theta fitting.
struct SchemeSpec {
  std::vector<ColourSpec> colours;
  std::int64_t boxes = 0;
};

inline SchemeSpec scheme_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("colours") || !j.contains("N")) {
    throw ValidationError("scheme JSON needs 'colours' and 'N'");
  }
  SchemeSpec spec;
  spec.boxes = j.at("N").get<std::int64_t>();
  for (const auto& cj : j.at("colours")) {
    ColourSpec c{family_from_json(cj.at("family")), cj.at("n").get<std::int64_t>(),
                 std::nullopt};
    if (cj.contains("theta") && !cj.at("theta").is_null()) {
      c.theta = cj.at("theta").get<double>();
    }
    spec.colours.push_back(std::move(c));
  }
  if (spec.colours.empty()) {
    throw ValidationError("scheme JSON: 'colours' must be non-empty");
  }
  return spec;
}

inline nlohmann::json scheme_to_json(const std::vector<ColourSpec>& colours,
                                     std::int64_t boxes) {
  nlohmann::json j;
  j["N"] = boxes;
  auto arr = nlohmann::json::array();
  for (const auto& c : colours) {
    nlohmann::json cj;
    cj["family"] = family_to_json(c.family);
    cj["n"] = c.balls;
    if (c.theta) {
      cj["theta"] = *c.theta;
    } else {
      cj["theta"] = nullptr;
    }
    arr.push_back(std::move(cj));
  }
  j["colours"] = std::move(arr);
  return j;
}

}  // namespace alloclab
