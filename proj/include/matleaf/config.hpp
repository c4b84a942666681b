// Run configuration: a single JSON document with model, numerics and output
// blocks. Unknown keys are rejected; every default is materialised on
// serialisation so reports carry the full configuration.
#pragma once

#include "matleaf/distribution.hpp"
#include "matleaf/foliation.hpp"
#include "matleaf/material.hpp"
#include "matleaf/response.hpp"

#include <json.hpp>

#include <cstdint>
#include <cstdlib>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace matleaf {

using json = nlohmann::json;

struct ModelConfig {
  std::string profile = "monotone";
  double s = 0.5;
  double c = 0.125;
  std::string junction = "cubic";
  std::vector<std::pair<double, double>> table;
  Vec3 center = Vec3::Zero();
  double radius = 1.0;
  std::string derivative = "analytic";
};

struct NumericsConfig {
  int f_samples = 6;
  std::optional<std::uint64_t> seed;
  std::optional<double> svd_tol;
  double fd_step = 1e-5;
  int ansatz_degree = 1;
  std::optional<double> neighborhood_radius;
  int neighborhood_points = 20;
  double flow_step = 1e-2;
  int n_steps = 2000;
  int decompose_steps = 300;
  double leaf_tol = 5e-3;
  double merge_tol = 2e-2;
  double accept_tol = 1e-6;
  int grid = 9;
  int seed_grid = 7;
  double grid_extent = 0.9;
  std::string mode = "germ";
};

struct OutputConfig {
  std::string path;
  std::string format = "both";
};

struct RunConfig {
  ModelConfig model;
  NumericsConfig numerics;
  OutputConfig output;

  std::uint64_t seed() const {
    if (!numerics.seed) throw Error(ErrorKind::InvalidConfig, "numerics.seed is required");
    return *numerics.seed;
  }

  double resolved_svd_tol() const {
    if (numerics.svd_tol) return *numerics.svd_tol;
    return model.derivative == "analytic" ? kAnalyticSvdTol : kFiniteDifferenceSvdTol;
  }

  double resolved_neighborhood_radius() const {
    return numerics.neighborhood_radius.value_or(0.05 * model.radius);
  }
};

namespace detail {

inline void reject_unknown(const json& obj, const std::set<std::string>& allowed,
                           const std::string& prefix) {
  if (!obj.is_object()) throw Error(ErrorKind::InvalidConfig, "'" + prefix + "' must be an object");
  for (const auto& item : obj.items()) {
    if (!allowed.count(item.key())) {
      throw Error(ErrorKind::InvalidConfig, "unknown key '" + prefix + "." + item.key() + "'");
    }
  }
}

template <class T>
void read(const json& obj, const char* key, T& out, const std::string& prefix) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorKind::InvalidConfig, "invalid value for '" + prefix + "." + key + "'");
  }
}

template <class T>
void read_optional(const json& obj, const char* key, std::optional<T>& out,
                   const std::string& prefix) {
  if (!obj.contains(key) || obj.at(key).is_null()) return;
  T value{};
  read(obj, key, value, prefix);
  out = value;
}

inline void require_positive(double v, const std::string& key) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw Error(ErrorKind::InvalidConfig, "'" + key + "' must be positive");
  }
}

}  // namespace detail

inline void validate(const RunConfig& cfg) {
  static const std::set<std::string> profiles{"constant", "monotone", "plateau", "wiggle", "table"};
  if (!profiles.count(cfg.model.profile)) {
    throw Error(ErrorKind::InvalidConfig, "invalid value for 'model.profile'");
  }
  if (cfg.model.junction != "cubic" && cfg.model.junction != "exponential") {
    throw Error(ErrorKind::InvalidConfig, "invalid value for 'model.junction'");
  }
  if (cfg.model.derivative != "analytic" && cfg.model.derivative != "fd") {
    throw Error(ErrorKind::InvalidConfig, "invalid value for 'model.derivative'");
  }
  if (cfg.model.profile == "table" && cfg.model.table.size() < 2) {
    throw Error(ErrorKind::InvalidConfig, "'model.table' needs at least two samples");
  }
  detail::require_positive(cfg.model.radius, "model.radius");
  if (cfg.model.profile == "plateau") detail::require_positive(cfg.model.s, "model.s");
  const auto& n = cfg.numerics;
  if (n.f_samples < FSampler::kMinCount) {
    throw Error(ErrorKind::InvalidConfig, "'numerics.f_samples' must be >= 4");
  }
  if (n.svd_tol) detail::require_positive(*n.svd_tol, "numerics.svd_tol");
  detail::require_positive(n.fd_step, "numerics.fd_step");
  if (n.neighborhood_radius) detail::require_positive(*n.neighborhood_radius, "numerics.neighborhood_radius");
  detail::require_positive(n.flow_step, "numerics.flow_step");
  detail::require_positive(n.leaf_tol, "numerics.leaf_tol");
  detail::require_positive(n.merge_tol, "numerics.merge_tol");
  detail::require_positive(n.accept_tol, "numerics.accept_tol");
  if (n.ansatz_degree < 0 || n.ansatz_degree > 2) {
    throw Error(ErrorKind::InvalidConfig, "'numerics.ansatz_degree' must be 0, 1 or 2");
  }
  if (n.neighborhood_points < 1) throw Error(ErrorKind::InvalidConfig, "'numerics.neighborhood_points' must be >= 1");
  if (n.n_steps < 0) throw Error(ErrorKind::InvalidConfig, "'numerics.n_steps' must be >= 0");
  if (n.decompose_steps < 0) throw Error(ErrorKind::InvalidConfig, "'numerics.decompose_steps' must be >= 0");
  if (n.grid < 1) throw Error(ErrorKind::InvalidConfig, "'numerics.grid' must be >= 1");
  if (n.seed_grid < 1) throw Error(ErrorKind::InvalidConfig, "'numerics.seed_grid' must be >= 1");
  if (!(n.grid_extent > 0.0 && n.grid_extent < 1.0)) {
    throw Error(ErrorKind::InvalidConfig, "'numerics.grid_extent' must lie in (0, 1)");
  }
  if (n.mode != "germ" && n.mode != "pointwise") {
    throw Error(ErrorKind::InvalidConfig, "invalid value for 'numerics.mode'");
  }
  if (cfg.output.format != "json" && cfg.output.format != "csv" && cfg.output.format != "both") {
    throw Error(ErrorKind::InvalidConfig, "invalid value for 'output.format'");
  }
}

/// Parses a config document. The seed may be absent here; it is checked
/// when a command needs it (CLI flag and MATLEAF_SEED are fallbacks).
inline RunConfig config_from_json(const json& doc) {
  RunConfig cfg;
  detail::reject_unknown(doc, {"model", "numerics", "output"}, "config");
  if (doc.contains("model")) {
    const json& m = doc.at("model");
    detail::reject_unknown(m, {"profile", "s", "c", "junction", "table", "center", "radius", "derivative"}, "model");
    detail::read(m, "profile", cfg.model.profile, "model");
    detail::read(m, "s", cfg.model.s, "model");
    detail::read(m, "c", cfg.model.c, "model");
    detail::read(m, "junction", cfg.model.junction, "model");
    detail::read(m, "table", cfg.model.table, "model");
    std::vector<double> center{0.0, 0.0, 0.0};
    detail::read(m, "center", center, "model");
    if (center.size() != 3) throw Error(ErrorKind::InvalidConfig, "invalid value for 'model.center'");
    cfg.model.center = Vec3(center[0], center[1], center[2]);
    detail::read(m, "radius", cfg.model.radius, "model");
    detail::read(m, "derivative", cfg.model.derivative, "model");
  }
  if (doc.contains("numerics")) {
    const json& n = doc.at("numerics");
    detail::reject_unknown(n, {"f_samples", "seed", "svd_tol", "fd_step", "ansatz_degree",
                               "neighborhood_radius", "neighborhood_points", "flow_step", "n_steps",
                               "decompose_steps", "leaf_tol", "merge_tol", "accept_tol", "grid",
                               "seed_grid", "grid_extent", "mode"},
                           "numerics");
    auto& o = cfg.numerics;
    detail::read(n, "f_samples", o.f_samples, "numerics");
    detail::read_optional(n, "seed", o.seed, "numerics");
    detail::read_optional(n, "svd_tol", o.svd_tol, "numerics");
    detail::read(n, "fd_step", o.fd_step, "numerics");
    detail::read(n, "ansatz_degree", o.ansatz_degree, "numerics");
    detail::read_optional(n, "neighborhood_radius", o.neighborhood_radius, "numerics");
    detail::read(n, "neighborhood_points", o.neighborhood_points, "numerics");
    detail::read(n, "flow_step", o.flow_step, "numerics");
    detail::read(n, "n_steps", o.n_steps, "numerics");
    detail::read(n, "decompose_steps", o.decompose_steps, "numerics");
    detail::read(n, "leaf_tol", o.leaf_tol, "numerics");
    detail::read(n, "merge_tol", o.merge_tol, "numerics");
    detail::read(n, "accept_tol", o.accept_tol, "numerics");
    detail::read(n, "grid", o.grid, "numerics");
    detail::read(n, "seed_grid", o.seed_grid, "numerics");
    detail::read(n, "grid_extent", o.grid_extent, "numerics");
    detail::read(n, "mode", o.mode, "numerics");
  }
  if (doc.contains("output")) {
    const json& o = doc.at("output");
    detail::reject_unknown(o, {"path", "format"}, "output");
    detail::read(o, "path", cfg.output.path, "output");
    detail::read(o, "format", cfg.output.format, "output");
  }
  validate(cfg);
  return cfg;
}

inline RunConfig config_from_string(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::InvalidConfig, std::string("malformed JSON: ") + e.what());
  }
  return config_from_json(doc);
}

/// Fully materialised form (defaults resolved).
inline json config_to_json(const RunConfig& cfg) {
  json model = {{"profile", cfg.model.profile},
                {"s", cfg.model.s},
                {"c", cfg.model.c},
                {"junction", cfg.model.junction},
                {"center", {cfg.model.center[0], cfg.model.center[1], cfg.model.center[2]}},
                {"radius", cfg.model.radius},
                {"derivative", cfg.model.derivative}};
  if (!cfg.model.table.empty()) model["table"] = cfg.model.table;
  const auto& n = cfg.numerics;
  json numerics = {{"f_samples", n.f_samples},
                   {"seed", n.seed ? json(*n.seed) : json(nullptr)},
                   {"svd_tol", cfg.resolved_svd_tol()},
                   {"fd_step", n.fd_step},
                   {"ansatz_degree", n.ansatz_degree},
                   {"neighborhood_radius", cfg.resolved_neighborhood_radius()},
                   {"neighborhood_points", n.neighborhood_points},
                   {"flow_step", n.flow_step},
                   {"n_steps", n.n_steps},
                   {"decompose_steps", n.decompose_steps},
                   {"leaf_tol", n.leaf_tol},
                   {"merge_tol", n.merge_tol},
                   {"accept_tol", n.accept_tol},
                   {"grid", n.grid},
                   {"seed_grid", n.seed_grid},
                   {"grid_extent", n.grid_extent},
                   {"mode", n.mode}};
  json output = {{"path", cfg.output.path}, {"format", cfg.output.format}};
  return {{"model", model}, {"numerics", numerics}, {"output", output}};
}

// Builders from a validated config.

inline ScalarProfile make_profile(const ModelConfig& m) {
  if (m.profile == "constant") return ScalarProfile::constant();
  if (m.profile == "monotone") return ScalarProfile::monotone();
  if (m.profile == "plateau") {
    return ScalarProfile::plateau(
        m.s, m.junction == "exponential" ? PlateauJunction::Exponential : PlateauJunction::Cubic);
  }
  if (m.profile == "wiggle") return ScalarProfile::wiggle(m.c);
  return ScalarProfile::table(m.table);
}

inline ResponseModel make_model(const RunConfig& cfg) {
  return ResponseModel::radial(BodyDomain(cfg.model.center, cfg.model.radius),
                               make_profile(cfg.model), cfg.model.derivative == "analytic",
                               cfg.numerics.fd_step);
}

inline FiberParams make_fiber_params(const RunConfig& cfg) {
  FiberParams fp;
  fp.sampler = FSampler(cfg.numerics.f_samples, cfg.seed());
  fp.ansatz.degree = cfg.numerics.ansatz_degree;
  fp.ansatz.neighborhood_radius = cfg.resolved_neighborhood_radius();
  fp.ansatz.n_points = cfg.numerics.neighborhood_points;
  fp.kernel.svd_tol = cfg.resolved_svd_tol();
  return fp;
}

inline FiberMode make_mode(const RunConfig& cfg) {
  return cfg.numerics.mode == "pointwise" ? FiberMode::Pointwise : FiberMode::Germ;
}

inline IsoSearchOptions make_iso_options(const RunConfig& cfg) {
  IsoSearchOptions o;
  o.accept_tol = cfg.numerics.accept_tol;
  o.seed = cfg.seed() + 7;
  return o;
}

inline TraceParams make_trace_params(const RunConfig& cfg) {
  TraceParams tp;
  tp.mode = make_mode(cfg);
  tp.n_steps = cfg.numerics.n_steps;
  tp.step = cfg.numerics.flow_step * cfg.model.radius;
  tp.seed = cfg.seed();
  tp.fiber = make_fiber_params(cfg);
  return tp;
}

inline DecomposeParams make_decompose_params(const RunConfig& cfg) {
  DecomposeParams dp;
  dp.seeds = GridSpec{cfg.numerics.seed_grid, cfg.numerics.grid_extent};
  dp.trace = make_trace_params(cfg);
  dp.trace.n_steps = cfg.numerics.decompose_steps;
  dp.leaf_tol = cfg.numerics.leaf_tol;
  dp.merge_tol = cfg.numerics.merge_tol;
  dp.iso = make_iso_options(cfg);
  return dp;
}

}  // namespace matleaf
