// Batch front end: subcommands over a RunConfig, JSON/CSV reports and the
// exit-code contract (0 ok, 1 invalid input, 2 numerical failure).
#pragma once

#include "matleaf/config.hpp"
#include "matleaf/report.hpp"
#include "matleaf/verify.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace matleaf::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 1;
inline constexpr int kExitNumerical = 2;

struct CommandResult {
  int exit_code = kExitOk;
  json report;
  std::string csv;
  std::string message;
};

inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::OutsideDomain:
    case ErrorKind::NotComposable:
    case ErrorKind::AnchorMismatch:
    case ErrorKind::InvalidArgument:
    case ErrorKind::InvalidConfig:
    case ErrorKind::SingularJet:
      return kExitInvalid;
    default:
      return kExitNumerical;
  }
}

/// Seed precedence: command-line flag, config file, MATLEAF_SEED.
inline void resolve_seed(RunConfig& cfg, std::optional<std::uint64_t> flag, const char* env) {
  if (flag) {
    cfg.numerics.seed = flag;
    return;
  }
  if (cfg.numerics.seed) return;
  if (env && *env) {
    try {
      std::size_t used = 0;
      const std::string text(env);
      const auto v = std::stoull(text, &used);
      if (used != text.size()) throw std::invalid_argument(text);
      cfg.numerics.seed = v;
      return;
    } catch (const std::exception&) {
      throw Error(ErrorKind::InvalidConfig, "MATLEAF_SEED is not an unsigned integer");
    }
  }
  throw Error(ErrorKind::InvalidConfig,
              "numerics.seed is required (config, --seed or MATLEAF_SEED)");
}

inline CommandResult cmd_rank(const RunConfig& cfg) {
  const ResponseModel model = make_model(cfg);
  const GridSpec grid{cfg.numerics.grid, cfg.numerics.grid_extent};
  const RankMap map = rank_map(model, grid, make_mode(cfg), make_fiber_params(cfg));
  CommandResult out;
  out.report = make_report("rank", cfg, to_json(map));
  std::ostringstream csv;
  write_rank_csv(csv, map);
  out.csv = csv.str();
  if (map.unstable_count * 100 > static_cast<int>(map.points.size())) {
    out.exit_code = kExitNumerical;
    out.message = "RankUnstable at " + std::to_string(map.unstable_count) + " of " +
                  std::to_string(map.points.size()) + " grid points";
  }
  return out;
}

inline CommandResult cmd_leaf(const RunConfig& cfg, const Vec3& at) {
  const ResponseModel model = make_model(cfg);
  model.body().require(at);
  const Leaf leaf = leaf_trace(model, at, make_trace_params(cfg));
  CommandResult out;
  out.report = make_report("leaf", cfg, to_json(leaf));
  std::ostringstream csv;
  write_leaf_csv(csv, {{0, &leaf.cloud}});
  out.csv = csv.str();
  return out;
}

inline CommandResult cmd_decompose(const RunConfig& cfg) {
  const ResponseModel model = make_model(cfg);
  const DecompositionReport rep = decompose(model, make_decompose_params(cfg));
  CommandResult out;
  out.report = make_report("decompose", cfg, to_json(rep));
  std::vector<std::pair<int, const std::vector<Vec3>*>> clouds;
  for (const LeafSummary& l : rep.leaves) clouds.emplace_back(l.id, &l.cloud);
  std::ostringstream csv;
  write_leaf_csv(csv, clouds);
  out.csv = csv.str();
  return out;
}

inline CommandResult cmd_find_iso(const RunConfig& cfg, const Vec3& from, const Vec3& to) {
  const ResponseModel model = make_model(cfg);
  const auto res = find_material_isomorphism(model, from, to, make_fiber_params(cfg).sampler,
                                             make_iso_options(cfg));
  CommandResult out;
  json result = to_json(res);
  result["from"] = to_json(from);
  result["to"] = to_json(to);
  out.report = make_report("find-iso", cfg, result);
  if (res.failure) {
    out.exit_code = kExitNumerical;
    out.message = std::string(to_string(*res.failure)) + ": every start collapsed";
  }
  return out;
}

inline CommandResult cmd_symmetry(const RunConfig& cfg, const Vec3& at, const Mat3& Q) {
  const ResponseModel model = make_model(cfg);
  const auto chk = symmetry_check(model, at, Q, make_fiber_params(cfg).sampler, cfg.numerics.accept_tol);
  CommandResult out;
  out.report = make_report("symmetry", cfg,
                           {{"at", to_json(at)},
                            {"Q", to_json(Q)},
                            {"is_symmetry", chk.is_isomorphism},
                            {"residual", chk.residual}});
  return out;
}

inline CommandResult cmd_verify(const RunConfig& cfg, const VerifyOptions& opt = {}) {
  const VerifyReport rep = run_verify(cfg, opt);
  CommandResult out;
  out.report = make_report("verify", cfg, to_json(rep));
  if (!rep.all_pass()) {
    out.exit_code = kExitNumerical;
    const PropertyResult* bad = rep.first_failure();
    out.message = "property failed: " + bad->name + " (" + bad->counterexample + ")";
  }
  return out;
}

namespace detail {

inline std::vector<double> parse_numbers(const std::string& text, std::size_t count, const std::string& flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Error(ErrorKind::InvalidArgument, "--" + flag + " expects " + std::to_string(count) + " numbers");
    }
  }
  if (out.size() != count) {
    throw Error(ErrorKind::InvalidArgument, "--" + flag + " expects " + std::to_string(count) + " numbers");
  }
  return out;
}

inline Vec3 parse_point(const std::string& text, const std::string& flag) {
  const auto v = parse_numbers(text, 3, flag);
  return Vec3(v[0], v[1], v[2]);
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::InvalidConfig, "cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::InvalidArgument, "cannot write '" + path + "'");
  out << text;
}

}  // namespace detail

struct Overrides {
  std::string config_path;
  std::optional<std::string> profile;
  std::optional<double> s;
  std::optional<double> c;
  std::optional<double> radius;
  std::optional<int> grid;
  std::optional<std::string> mode;
  std::optional<std::string> derivative;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

inline RunConfig build_config(const Overrides& o, const char* env_seed) {
  RunConfig cfg = o.config_path.empty() ? RunConfig{} : config_from_string(detail::read_file(o.config_path));
  if (o.profile) cfg.model.profile = *o.profile;
  if (o.s) cfg.model.s = *o.s;
  if (o.c) cfg.model.c = *o.c;
  if (o.radius) cfg.model.radius = *o.radius;
  if (o.grid) cfg.numerics.grid = *o.grid;
  if (o.mode) cfg.numerics.mode = *o.mode;
  if (o.derivative) cfg.model.derivative = *o.derivative;
  if (o.out) cfg.output.path = *o.out;
  resolve_seed(cfg, o.seed, env_seed);
  validate(cfg);
  return cfg;
}

/// Full command-line entry point. Reports go to `out` unless an output path
/// is configured; diagnostics go to `err`.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Material groupoids, material distributions and leaf decompositions of a ball body"};
  app.require_subcommand(1);
  Overrides o;
  std::string at, from, to, q;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "JSON run configuration");
    sub->add_option("--profile", o.profile, "constant | monotone | plateau | wiggle | table");
    sub->add_option("--s", o.s, "plateau radius");
    sub->add_option("--c", o.c, "wiggle centre");
    sub->add_option("--radius", o.radius, "body radius");
    sub->add_option("--grid", o.grid, "grid points per axis");
    sub->add_option("--mode", o.mode, "pointwise | germ");
    sub->add_option("--derivative", o.derivative, "analytic | fd");
    sub->add_option("--seed", o.seed, "random seed");
    sub->add_option("--out", o.out, "output path prefix");
  };
  CLI::App* rank = app.add_subcommand("rank", "fibre dimensions over a grid");
  CLI::App* leaf = app.add_subcommand("leaf", "trace the leaf through a point");
  CLI::App* dec = app.add_subcommand("decompose", "leaf decomposition of the body");
  CLI::App* iso = app.add_subcommand("find-iso", "search a material isomorphism");
  CLI::App* sym = app.add_subcommand("symmetry", "test a material symmetry");
  CLI::App* ver = app.add_subcommand("verify", "run the invariant suite");
  for (CLI::App* sub : {rank, leaf, dec, iso, sym, ver}) add_common(sub);
  leaf->add_option("--at", at, "seed point x,y,z")->required();
  iso->add_option("--from", from, "source point x,y,z")->required();
  iso->add_option("--to", to, "target point x,y,z")->required();
  sym->add_option("--at", at, "point x,y,z")->required();
  sym->add_option("--q", q, "nine matrix entries, row-major")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kExitOk;
    }
    err << "error: " << e.what() << '\n';
    return kExitInvalid;
  }

  try {
    const RunConfig cfg = build_config(o, std::getenv("MATLEAF_SEED"));
    CommandResult res;
    if (*rank) res = cmd_rank(cfg);
    else if (*leaf) res = cmd_leaf(cfg, detail::parse_point(at, "at"));
    else if (*dec) res = cmd_decompose(cfg);
    else if (*iso) res = cmd_find_iso(cfg, detail::parse_point(from, "from"), detail::parse_point(to, "to"));
    else if (*sym) {
      const auto e = detail::parse_numbers(q, 9, "q");
      Mat3 Q;
      for (int i = 0; i < 9; ++i) Q(i / 3, i % 3) = e[static_cast<std::size_t>(i)];
      res = cmd_symmetry(cfg, detail::parse_point(at, "at"), Q);
    } else {
      res = cmd_verify(cfg);
    }

    const std::string body = res.report.dump(2) + "\n";
    const std::string& fmt = cfg.output.format;
    if (cfg.output.path.empty()) {
      out << body;
    } else {
      if (fmt != "csv") detail::write_file(cfg.output.path + ".json", body);
      if (fmt != "json" && !res.csv.empty()) detail::write_file(cfg.output.path + ".csv", res.csv);
    }
    if (!res.message.empty()) err << res.message << '\n';
    return res.exit_code;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
}

}  // namespace matleaf::cli
