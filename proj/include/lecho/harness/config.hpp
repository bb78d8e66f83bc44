#pragma once

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "lecho/analysis/fit.hpp"
#include "lecho/analysis/sweep.hpp"
#include "lecho/classical/backend.hpp"
#include "lecho/core/error.hpp"
#include "lecho/noise/field.hpp"
#include "lecho/noise/spec.hpp"
#include "lecho/quantum/echo.hpp"
#include "lecho/quantum/wavefunction.hpp"

namespace lecho::harness {

using nlohmann::json;

inline constexpr int config_format_version = 1;

/// Every accepted key with its default. A null default marks an optional
/// value whose type is listed in nullable_types(); it is resolved at load
/// time and the resolved value is written back.
inline json config_defaults() {
  return json::parse(R"({
    "format_version": 1,
    "model": {
      "backend": "standard_map",
      "K": 10.0,
      "N": 1024,
      "hbar_eff": null,
      "n_scatterers": 64,
      "width": 0.5,
      "box": 8.0,
      "speed": 1.0,
      "mass": 1.0,
      "scatterer_seed": 1
    },
    "packet": {"sigma": 0.2, "r0": [1.0, 0.0], "p0": [1.0, 0.0]},
    "perturbation": {
      "variance": 0.0,
      "xi0": 1.0,
      "tau0": 0.5,
      "spatial_kind": "gaussian",
      "temporal_kind": "gaussian",
      "dimension": 1
    },
    "ensemble": {
      "n_realizations": 50,
      "n_initial_conditions": 1,
      "average": "realizations",
      "master_seed": 1
    },
    "time": {
      "n_kicks": 50,
      "T_end": 20.0,
      "substeps": 0,
      "field_dt": 0.0,
      "field_points": 0
    },
    "lyapunov": {
      "lambda": null,
      "n_orbits": 64,
      "n_steps": 20000,
      "renorm_interval": 1
    },
    "analysis": {
      "v": null,
      "fit_upper": 0.9,
      "floor_factor": 10.0,
      "floor_min": 0.01,
      "r2_threshold": 0.98,
      "model": "automatic",
      "convention_factor": 1.0,
      "input": null
    },
    "sweep": {"axis": "perturbation.variance", "values": []},
    "output": {"directory": "out", "save_fields": 1}
  })");
}

inline const std::map<std::string, std::string>& nullable_types() {
  static const std::map<std::string, std::string> t = {
      {"model.hbar_eff", "number"}, {"lyapunov.lambda", "number"}, {"analysis.v", "number"},
      {"analysis.input", "string"}};
  return t;
}

namespace detail {

inline std::string type_name(const json& j) {
  if (j.is_number_integer() || j.is_number_unsigned()) return "integer";
  if (j.is_number()) return "number";
  return j.type_name();
}

inline void schema_error(const std::string& path, const std::string& expected, const json& got) {
  throw Error(Errc::schema_violation,
              "config " + path + ": expected " + expected + ", got " + type_name(got) + " (" + got.dump() + ")");
}

/// Overlays `user` on `base` in place; keys absent from base are rejected.
inline void merge_strict(json& base, const json& user, const std::string& prefix) {
  if (!user.is_object()) schema_error(prefix.empty() ? "<root>" : prefix, "object", user);
  for (const auto& [key, value] : user.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!base.contains(key)) throw Error(Errc::schema_violation, "config: unknown field '" + path + "'");
    json& slot = base[key];
    if (slot.is_object()) {
      merge_strict(slot, value, path);
    } else if (slot.is_null()) {
      const auto& types = nullable_types();
      const auto it = types.find(path);
      const std::string want = it == types.end() ? "null" : it->second;
      const bool ok = value.is_null() || (want == "number" && value.is_number()) || (want == "string" && value.is_string());
      if (!ok) schema_error(path, want + " or null", value);
      slot = value;
    } else if (slot.is_number_integer() || slot.is_number_unsigned()) {
      if (!(value.is_number_integer() || value.is_number_unsigned())) schema_error(path, "integer", value);
      if (slot.is_number_unsigned() && value.is_number_integer() && value.get<long long>() < 0) {
        schema_error(path, "non-negative integer", value);
      }
      slot = value;
    } else if (slot.is_number()) {
      if (!value.is_number()) schema_error(path, "number", value);
      slot = value.get<double>();
    } else if (slot.is_string()) {
      if (!value.is_string()) schema_error(path, "string", value);
      slot = value;
    } else if (slot.is_boolean()) {
      if (!value.is_boolean()) schema_error(path, "boolean", value);
      slot = value;
    } else if (slot.is_array()) {
      if (!value.is_array()) schema_error(path, "array of numbers", value);
      for (const auto& e : value) {
        if (!e.is_number()) schema_error(path, "array of numbers", value);
      }
      slot = value;
    }
  }
}

/// Runs a module check and rethrows its error as a precondition naming the module.
template <class Fn>
void check_module(const std::string& module, Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    throw Error(Errc::precondition, "precondition violated in " + module + ": " + e.what());
  }
}

}  // namespace detail

/// Applies one `key=value` override to a raw config document. The value is
/// parsed as JSON when possible, else taken as a string.
inline void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw Error(Errc::invalid_argument, "override '" + assignment + "' is not key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw Error(Errc::invalid_argument, "override key '" + key + "' has an empty component");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      break;
    }
    node = &(*node)[part];
    if (!node->is_object() && !node->is_null()) {
      throw Error(Errc::schema_violation, "override key '" + key + "' descends into a non-object");
    }
    start = dot + 1;
  }
}

struct LyapunovSettings {
  std::optional<double> lambda;  ///< given; else estimated with Benettin
  std::size_t n_orbits = 64;
  std::size_t n_steps = 20000;
  std::size_t renorm_interval = 1;
};

/// Validated experiment description.
struct ExperimentConfig {
  json resolved;  ///< defaults filled and derived values made explicit
  std::string backend;
  double K = 10.0;
  std::size_t N = 1024;
  double hbar_eff = 0.0;
  std::size_t n_scatterers = 64;
  double width = 0.5, box = 8.0, speed = 1.0, mass = 1.0;
  std::uint64_t scatterer_seed = 1;
  double T_end = 20.0;
  quantum::EchoConfig echo;  ///< spec, packet, ensemble and time settings
  LyapunovSettings lyapunov;
  double v = 0.0;
  analysis::FitOptions fit;
  double convention_factor = 1.0;
  std::optional<std::string> input;
  std::string sweep_axis;
  std::vector<double> sweep_values;
  std::string out_dir;
  std::size_t save_fields = 1;

  noise::PerturbationSpec& spec() { return echo.spec; }
  const noise::PerturbationSpec& spec() const { return echo.spec; }
  bool quantum_backend() const { return backend == "standard_map"; }

  classical::Backend make_backend() const {
    if (quantum_backend()) return classical::StandardMap{K};
    return classical::make_lorentz2d(classical::random_centers(n_scatterers, box, scatterer_seed), width, box, speed, mass);
  }
};

namespace detail {

inline analysis::ModelChoice model_choice_from_string(const std::string& s) {
  if (s == "automatic") return analysis::ModelChoice::automatic;
  if (s == "single_exponential") return analysis::ModelChoice::single_exponential;
  if (s == "composite") return analysis::ModelChoice::composite;
  throw Error(Errc::schema_violation, "config analysis.model: expected automatic|single_exponential|composite, got '" + s + "'");
}

inline Point point_from(const json& a, const std::string& path, int dim) {
  if (a.size() < static_cast<std::size_t>(dim) || a.size() > 2) {
    throw Error(Errc::schema_violation, "config " + path + ": expected 1 or 2 components covering the dimension");
  }
  Point p{0.0, 0.0};
  for (std::size_t i = 0; i < a.size(); ++i) p[i] = a[i].get<double>();
  return p;
}

}  // namespace detail

/// Builds a validated config from a raw document (after overrides). Physics
/// preconditions of the modules that will consume each section are checked
/// here, and a violation names the module rule.
inline ExperimentConfig parse_config(const json& user) {
  json doc = config_defaults();
  detail::merge_strict(doc, user, "");
  if (doc["format_version"].get<int>() != config_format_version) {
    throw Error(Errc::schema_violation, "config format_version: expected " + std::to_string(config_format_version));
  }

  ExperimentConfig c;
  const json& m = doc["model"];
  c.backend = m["backend"].get<std::string>();
  if (c.backend != "standard_map" && c.backend != "lorentz2d") {
    throw Error(Errc::schema_violation, "config model.backend: expected standard_map|lorentz2d, got '" + c.backend + "'");
  }
  c.K = m["K"].get<double>();
  c.N = m["N"].get<std::size_t>();
  c.n_scatterers = m["n_scatterers"].get<std::size_t>();
  c.width = m["width"].get<double>();
  c.box = m["box"].get<double>();
  c.speed = m["speed"].get<double>();
  c.mass = m["mass"].get<double>();
  c.scatterer_seed = m["scatterer_seed"].get<std::uint64_t>();

  // perturbation: static kinds carry an infinite scale, so an explicit
  // finite scale alongside a static kind is the mismatch error
  const json& pj = doc["perturbation"];
  const json* up = user.contains("perturbation") ? &user["perturbation"] : nullptr;
  noise::PerturbationSpec spec;
  detail::check_module("noise.PerturbationSpec", [&] {
    spec.variance = pj["variance"].get<double>();
    spec.spatial_kind = noise::correlator_kind_from_string(pj["spatial_kind"].get<std::string>());
    spec.temporal_kind = noise::correlator_kind_from_string(pj["temporal_kind"].get<std::string>());
    spec.dimension = pj["dimension"].get<int>();
    const bool xi_given = up && up->contains("xi0");
    const bool tau_given = up && up->contains("tau0");
    spec.xi0 = spec.spatially_static() && !xi_given ? noise::PerturbationSpec::infinite : pj["xi0"].get<double>();
    spec.tau0 = spec.temporally_static() && !tau_given ? noise::PerturbationSpec::infinite : pj["tau0"].get<double>();
    spec.validate();
  });
  if (spec.spatially_static()) doc["perturbation"]["xi0"] = nullptr;
  if (spec.temporally_static()) doc["perturbation"]["tau0"] = nullptr;

  const json& e = doc["ensemble"];
  const json& t = doc["time"];
  const json& pk = doc["packet"];
  quantum::EchoConfig& q = c.echo;
  q.N = c.N;
  q.K = c.K;
  q.spec = spec;
  q.packet.sigma = pk["sigma"].get<double>();
  q.packet.r0 = detail::point_from(pk["r0"], "packet.r0", spec.dimension);
  q.packet.p0 = detail::point_from(pk["p0"], "packet.p0", spec.dimension);
  q.n_kicks = t["n_kicks"].get<std::size_t>();
  q.n_realizations = e["n_realizations"].get<std::size_t>();
  q.n_initial = e["n_initial_conditions"].get<std::size_t>();
  detail::check_module("quantum.ensemble_echo", [&] { q.mode = quantum::average_mode_from_string(e["average"].get<std::string>()); });
  q.master_seed = e["master_seed"].get<std::uint64_t>();
  q.substeps = t["substeps"].get<int>();
  q.field_dt = t["field_dt"].get<double>();
  q.field_points = t["field_points"].get<std::size_t>();
  c.T_end = t["T_end"].get<double>();
  if (!(c.T_end > 0.0)) throw Error(Errc::schema_violation, "config time.T_end: expected a positive number");
  if (q.substeps < 0) throw Error(Errc::schema_violation, "config time.substeps: expected a non-negative integer");

  if (c.quantum_backend()) {
    detail::check_module("quantum.init_gaussian_packet", [&] { quantum::init_gaussian_packet(q.packet, q.N); });
    detail::check_module("quantum.ensemble_echo", [&] { q.validate(); });
    detail::check_module("quantum.KickedPropagator", [&] {
      const int s = q.resolved_substeps();
      if (s != 1 && s % 2 != 0) throw Error(Errc::invalid_argument, "substeps must be 1 or even");
    });
    c.hbar_eff = quantum::torus_hbar(c.N);
    if (!m["hbar_eff"].is_null() && std::abs(m["hbar_eff"].get<double>() / c.hbar_eff - 1.0) > 1e-12) {
      throw Error(Errc::precondition, "precondition violated in quantum.torus_hbar: model.hbar_eff must equal 2 pi / N on the torus");
    }
    doc["model"]["hbar_eff"] = c.hbar_eff;
    doc["time"]["substeps"] = q.resolved_substeps();
    const noise::FieldGrid g = q.field_grid();
    doc["time"]["field_points"] = g.points;
    doc["time"]["field_dt"] = g.dt;
  } else {
    detail::check_module("classical.make_lorentz2d", [&] { (void)c.make_backend(); });
    if (spec.dimension != 2) {
      throw Error(Errc::precondition, "precondition violated in noise.make_field: lorentz2d needs a 2-D perturbation");
    }
    c.hbar_eff = m["hbar_eff"].is_null() ? 1.0 : m["hbar_eff"].get<double>();
    if (!(c.hbar_eff > 0.0)) throw Error(Errc::schema_violation, "config model.hbar_eff: expected a positive number");
    doc["model"]["hbar_eff"] = c.hbar_eff;
  }

  const json& l = doc["lyapunov"];
  if (!l["lambda"].is_null()) c.lyapunov.lambda = l["lambda"].get<double>();
  c.lyapunov.n_orbits = l["n_orbits"].get<std::size_t>();
  c.lyapunov.n_steps = l["n_steps"].get<std::size_t>();
  c.lyapunov.renorm_interval = l["renorm_interval"].get<std::size_t>();

  const json& a = doc["analysis"];
  // typical speed: mean |p| on the chaotic torus, the launch speed for lorentz2d
  c.v = a["v"].is_null() ? (c.quantum_backend() ? std::numbers::pi / 2.0 : c.speed) : a["v"].get<double>();
  if (!(c.v > 0.0)) throw Error(Errc::schema_violation, "config analysis.v: expected a positive number");
  doc["analysis"]["v"] = c.v;
  c.fit.upper = a["fit_upper"].get<double>();
  c.fit.floor_factor = a["floor_factor"].get<double>();
  c.fit.floor_min = a["floor_min"].get<double>();
  c.fit.r2_threshold = a["r2_threshold"].get<double>();
  c.fit.model = detail::model_choice_from_string(a["model"].get<std::string>());
  c.convention_factor = a["convention_factor"].get<double>();
  if (!a["input"].is_null()) c.input = a["input"].get<std::string>();

  c.sweep_axis = doc["sweep"]["axis"].get<std::string>();
  c.sweep_values = doc["sweep"]["values"].get<std::vector<double>>();
  if (std::find(analysis::sweep_axes().begin(), analysis::sweep_axes().end(), c.sweep_axis) == analysis::sweep_axes().end()) {
    throw Error(Errc::schema_violation, "config sweep.axis: unknown axis '" + c.sweep_axis + "'");
  }
  c.out_dir = doc["output"]["directory"].get<std::string>();
  c.save_fields = doc["output"]["save_fields"].get<std::size_t>();
  c.resolved = std::move(doc);
  return c;
}

/// Reads a JSON config file, applies `key=value` overrides and validates.
inline ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {}) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "load_config: cannot open '" + path + "'");
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw Error(Errc::schema_violation, "load_config: '" + path + "' is not valid JSON");
  for (const auto& o : overrides) apply_override(doc, o);
  return parse_config(doc);
}

}  // namespace lecho::harness
