// JSON and CSV serialisation of results. Reports carry no timestamps, so
// identical inputs give identical bytes.
#pragma once

#include "matleaf/config.hpp"

#include <iomanip>
#include <ostream>
#include <sstream>

namespace matleaf {

inline json to_json(const Vec3& p) { return json::array({p[0], p[1], p[2]}); }

inline json to_json(const Mat3& m) {
  json rows = json::array();
  for (int i = 0; i < 3; ++i) rows.push_back(json::array({m(i, 0), m(i, 1), m(i, 2)}));
  return rows;
}

inline json to_json(const SubspaceBasis& s) {
  json cols = json::array();
  for (int j = 0; j < s.dim; ++j) {
    json col = json::array();
    for (int i = 0; i < s.ambient_dim; ++i) col.push_back(s.basis(i, j));
    cols.push_back(col);
  }
  return {{"ambient_dim", s.ambient_dim}, {"dim", s.dim}, {"basis", cols}};
}

inline json to_json(const DistributionFiber& f) {
  return {{"point", to_json(f.point)},
          {"mode", to_string(f.mode)},
          {"full_dim", f.full.dim},
          {"base_dim", f.base.dim},
          {"isotropy_dim", f.isotropy_dim()},
          {"full", to_json(f.full)},
          {"base", to_json(f.base)},
          {"warnings", f.warnings}};
}

inline json to_json(const RankMap& map) {
  json strata = json::array();
  for (const RankStratum& s : map.strata) {
    strata.push_back({{"base_dim", s.base_dim},
                      {"points", s.points},
                      {"min_radius", s.min_radius},
                      {"max_radius", s.max_radius}});
  }
  json dims = json::array();
  for (std::size_t i = 0; i < map.points.size(); ++i) {
    dims.push_back({{"point", to_json(map.points[i])},
                    {"full_dim", map.full_dim[i]},
                    {"base_dim", map.base_dim[i]},
                    {"unstable", static_cast<bool>(map.unstable[i])}});
  }
  return {{"mode", to_string(map.mode)},
          {"grid_points", map.points.size()},
          {"unstable_points", map.unstable_count},
          {"strata", strata},
          {"points", dims}};
}

inline json to_json(const Leaf& leaf) {
  return {{"seed", to_json(leaf.seed)},
          {"est_dim", leaf.est_dim},
          {"base_dim", leaf.base_dim},
          {"label", leaf.invariant_label ? json(*leaf.invariant_label) : json(nullptr)},
          {"cloud_points", leaf.cloud.size()},
          {"rejected_steps", leaf.rejected_steps},
          {"collapsed", leaf.collapsed}};
}

inline json to_json(const MaterialIsoResult& r) {
  json out = {{"found", r.found},
              {"P", to_json(r.P)},
              {"residual", r.residual},
              {"orthogonality_defect", (r.P * r.P.transpose() - Mat3::Identity()).norm()},
              {"iterations", r.iterations},
              {"starts_tried", r.starts_tried}};
  out["failure"] = r.failure ? json(to_string(*r.failure)) : json(nullptr);
  return out;
}

inline json to_json(const UniformityReport& u) {
  json out = {{"uniform", u.uniform}, {"points", u.points}, {"pairs_checked", u.pairs_checked}};
  if (u.witness) {
    out["witness"] = {{"from", to_json(u.witness->from)},
                      {"to", to_json(u.witness->to)},
                      {"residual", u.witness->residual}};
  } else {
    out["witness"] = nullptr;
  }
  return out;
}

inline json to_json(const DecompositionReport& r) {
  json leaves = json::array();
  json flags = json::array();
  for (const LeafSummary& l : r.leaves) {
    leaves.push_back({{"id", l.id},
                      {"seed", to_json(l.seed)},
                      {"est_dim", l.est_dim},
                      {"base_dim", l.base_dim},
                      {"label", l.label ? json(*l.label) : json(nullptr)},
                      {"isotropy_dim", l.isotropy_dim},
                      {"groupoid_dim", l.groupoid_dim},
                      {"rank_constant", l.rank_constant},
                      {"iso_pairs_found", l.iso_pairs_found},
                      {"iso_pairs_checked", l.iso_pairs_checked},
                      {"smoothly_uniform", l.smoothly_uniform},
                      {"assigned_points", l.assigned_points},
                      {"beta_fibre_points",
                       l.beta_fibre_points ? json(*l.beta_fibre_points) : json(nullptr)},
                      {"cloud_points", l.cloud.size()}});
    flags.push_back(l.smoothly_uniform);
  }
  return {{"leaves", leaves},
          {"uniform", r.uniformity.uniform},
          {"uniformity", to_json(r.uniformity)},
          {"smoothly_uniform_leaves", flags},
          {"sample_points", r.points.size()},
          {"assignment", r.assignment},
          {"conflicts", r.conflicts},
          {"notes", r.notes}};
}

inline json make_report(const std::string& command, const RunConfig& cfg, json result) {
  return {{"command", command}, {"config", config_to_json(cfg)}, {"result", std::move(result)}};
}

namespace detail {

inline std::string csv_number(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace detail

inline void write_rank_csv(std::ostream& os, const RankMap& map) {
  os << "x,y,z,full_dim,base_dim\n";
  for (std::size_t i = 0; i < map.points.size(); ++i) {
    const Vec3& p = map.points[i];
    os << detail::csv_number(p[0]) << ',' << detail::csv_number(p[1]) << ','
       << detail::csv_number(p[2]) << ',' << map.full_dim[i] << ',' << map.base_dim[i] << '\n';
  }
}

inline void write_leaf_csv(std::ostream& os, const std::vector<std::pair<int, const std::vector<Vec3>*>>& leaves) {
  os << "x,y,z,leaf_id\n";
  for (const auto& [id, cloud] : leaves) {
    for (const Vec3& p : *cloud) {
      os << detail::csv_number(p[0]) << ',' << detail::csv_number(p[1]) << ','
         << detail::csv_number(p[2]) << ',' << id << '\n';
    }
  }
}

}  // namespace matleaf
