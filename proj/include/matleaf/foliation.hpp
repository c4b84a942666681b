// Leaves of the characteristic foliation (in the jet groupoid) and of its
// base projection (in the body), traced as orbits of composed flows of
// admissible left-invariant fields, plus the body-wide decomposition.
#pragma once

#include "matleaf/distribution.hpp"
#include "matleaf/flow.hpp"
#include "matleaf/jet_groupoid.hpp"
#include "matleaf/material.hpp"
#include "matleaf/response.hpp"
#include "matleaf/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace matleaf {

/// Source of random field combinations. Draws are recorded so a trace can
/// be replayed exactly.
class ControlStream {
 public:
  explicit ControlStream(std::uint64_t seed) : rng_(seed) {}
  explicit ControlStream(std::vector<VecX> replay) : replay_(std::move(replay)), replaying_(true) {}

  VecX next(int dim) {
    if (replaying_) {
      if (cursor_ >= replay_.size()) {
        throw Error(ErrorKind::InvalidArgument, "control replay exhausted");
      }
      const VecX& c = replay_[cursor_++];
      if (c.size() != dim) throw Error(ErrorKind::InvalidArgument, "control replay size mismatch");
      recorded_.push_back(c);
      return c;
    }
    VecX c = random_unit_vector(rng_, dim);
    recorded_.push_back(c);
    return c;
  }

  const std::vector<VecX>& recorded() const noexcept { return recorded_; }

 private:
  std::mt19937_64 rng_{0};
  std::vector<VecX> replay_;
  std::size_t cursor_ = 0;
  bool replaying_ = false;
  std::vector<VecX> recorded_;
};

struct TraceParams {
  FiberMode mode = FiberMode::Germ;
  int n_steps = 2000;
  double step = 1e-2;
  std::uint64_t seed = 1;
  FiberParams fiber{};
  int max_rejections = 100;
  /// Nearest neighbours per local tangent cloud.
  int knn = 15;
  double dim_rel_tol = 1e-3;
  /// Reject steps that land where the base rank differs from the seed's.
  bool lock_stratum = true;
  /// After this many consecutive rejections the walk restarts from an
  /// earlier cloud point (reachable by the inverse flows).
  int backtrack_after = 10;
};

struct Leaf {
  Vec3 seed = Vec3::Zero();
  int est_dim = 0;
  /// Base fibre dimension at the seed.
  int base_dim = 0;
  std::vector<Vec3> cloud;
  std::optional<double> invariant_label;
  std::vector<VecX> controls;
  int rejected_steps = 0;
  bool collapsed = false;
};

struct CharLeaf {
  Jet1 seed;
  std::vector<Jet1> cloud;
  Vec3 target_point;
  std::vector<VecX> controls;
  int rejected_steps = 0;
};

/// Median over probe points of the numerical rank of the covariance of the
/// k nearest cloud points.
inline int estimate_leaf_dimension(const std::vector<Vec3>& cloud, int knn, double rel_tol,
                                   int max_probes = 100) {
  const int n = static_cast<int>(cloud.size());
  if (n < 2) return 0;
  const int k = std::min(knn, n);
  const int stride = std::max(1, n / max_probes);
  std::vector<int> ranks;
  std::vector<std::pair<double, int>> dist(static_cast<std::size_t>(n));
  for (int p = 0; p < n; p += stride) {
    for (int i = 0; i < n; ++i) dist[static_cast<std::size_t>(i)] = {(cloud[i] - cloud[p]).squaredNorm(), i};
    std::nth_element(dist.begin(), dist.begin() + (k - 1), dist.end());
    Vec3 mean = Vec3::Zero();
    for (int i = 0; i < k; ++i) mean += cloud[dist[i].second];
    mean /= k;
    Mat3 cov = Mat3::Zero();
    for (int i = 0; i < k; ++i) {
      const Vec3 d = cloud[dist[i].second] - mean;
      cov += d * d.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Mat3> es(cov / k);
    const Vec3 ev = es.eigenvalues();
    const double top = ev.maxCoeff();
    int rank = 0;
    if (top > 0.0) {
      for (int i = 0; i < 3; ++i) rank += ev[i] > rel_tol * top ? 1 : 0;
    }
    ranks.push_back(rank);
  }
  std::nth_element(ranks.begin(), ranks.begin() + ranks.size() / 2, ranks.end());
  return ranks[ranks.size() / 2];
}

namespace detail {

inline FiberParams trace_fiber_params(const TraceParams& params) {
  FiberParams fp = params.fiber;
  fp.kernel.check_stability = false;
  fp.kernel.check_ansatz = false;
  return fp;
}

/// Local admissible fields around the current point.
struct LocalFrame {
  std::optional<GermSolution> germ;
  DistributionFiber fiber;
};

inline LocalFrame local_frame(const ResponseModel& model, const Vec3& x, FiberMode mode,
                              const FiberParams& fp) {
  LocalFrame frame;
  if (mode == FiberMode::Germ) {
    frame.germ = germ_solution(model, x, fp.ansatz, fp.sampler, fp.kernel);
    frame.fiber = frame.germ->fiber();
  } else {
    frame.fiber = pointwise_kernel(model, x, fp.sampler, fp.kernel);
  }
  return frame;
}

/// Deterministic restart point, independent of the control stream so that
/// replays reproduce it.
inline std::size_t restart_index(std::size_t cloud_size, int consecutive) {
  const auto k = static_cast<std::size_t>(consecutive);
  return (k * 7919u + cloud_size * 104729u) % cloud_size;
}

inline bool room_for_frame(const ResponseModel& model, const Vec3& x, const FiberParams& fp) {
  if (!x.allFinite() || !model.body().contains(x)) return false;
  return germ_radius(model.body(), x, fp.ansatz) > 1e-6 * model.body().radius();
}

}  // namespace detail

/// Traces the leaf of the body-material foliation through x0.
inline Leaf leaf_trace(const ResponseModel& model, const Vec3& x0, const TraceParams& params,
                       std::optional<std::vector<VecX>> replay = std::nullopt) {
  model.body().require(x0);
  const FiberParams fp = detail::trace_fiber_params(params);
  ControlStream controls = replay ? ControlStream(std::move(*replay)) : ControlStream(params.seed);

  Leaf leaf;
  leaf.seed = x0;
  leaf.cloud.push_back(x0);
  if (model.radial_profile()) leaf.invariant_label = (x0 - model.body().center()).norm();

  detail::LocalFrame frame = detail::local_frame(model, x0, params.mode, fp);
  const int dim = frame.fiber.base.dim;
  leaf.base_dim = dim;
  if (dim == 0) {
    leaf.collapsed = true;
    return leaf;
  }

  Vec3 x = x0;
  int consecutive = 0;
  for (int step = 0; step < params.n_steps;) {
    const VecX c = controls.next(dim);
    const Vec3 target = frame.fiber.base.basis * c;

    Vec3 next;
    if (frame.germ) {
      const VecX coeffs = frame.germ->field_through(target, 0, 3);
      const GermSolution& sol = *frame.germ;
      next = rk4_step(x, params.step,
                      [&](const Vec3& p) -> Vec3 { return sol.field_value(coeffs, p).head<3>(); });
    } else {
      next = rk4_step(x, params.step, [&](const Vec3& p) -> Vec3 {
        if (!model.body().contains(p)) return Vec3::Zero();
        const auto f = pointwise_kernel(model, p, fp.sampler, fp.kernel);
        return f.base.basis * (f.base.basis.transpose() * target);
      });
    }

    bool accept = detail::room_for_frame(model, next, fp);
    detail::LocalFrame next_frame;
    if (accept) {
      next_frame = detail::local_frame(model, next, params.mode, fp);
      if (params.lock_stratum && next_frame.fiber.base.dim != dim) accept = false;
    }
    if (!accept) {
      ++leaf.rejected_steps;
      if (++consecutive >= params.max_rejections) {
        throw Error(ErrorKind::StepOutsideBody, "too many consecutive rejected steps");
      }
      if (consecutive % params.backtrack_after == 0) {
        const std::size_t idx = detail::restart_index(leaf.cloud.size(), consecutive);
        x = leaf.cloud[idx];
        frame = detail::local_frame(model, x, params.mode, fp);
      }
      continue;
    }
    consecutive = 0;
    x = next;
    frame = std::move(next_frame);
    leaf.cloud.push_back(x);
    ++step;
  }
  leaf.controls = controls.recorded();
  leaf.est_dim = estimate_leaf_dimension(leaf.cloud, params.knn, params.dim_rel_tol);
  if (leaf.invariant_label) {
    double sum = 0.0;
    for (const Vec3& p : leaf.cloud) sum += (p - model.body().center()).norm();
    leaf.invariant_label = sum / static_cast<double>(leaf.cloud.size());
  }
  return leaf;
}

struct CharTraceParams {
  TraceParams trace{};
  /// Allow motion of the source point (fields with v != 0).
  bool move_base = true;
  /// Allow jet motion at fixed v (isotropy directions).
  bool move_isotropy = true;
};

namespace detail {

using CharState = Eigen::Matrix<double, 12, 1>;

inline CharState pack(const Vec3& x, const Mat3& F) {
  CharState s;
  s.head<3>() = x;
  for (int i = 0; i < 9; ++i) s[3 + i] = F(i / 3, i % 3);
  return s;
}

inline Mat3 unpack_F(const CharState& s) {
  Mat3 F;
  for (int i = 0; i < 9; ++i) F(i / 3, i % 3) = s[3 + i];
  return F;
}

}  // namespace detail

/// Traces the leaf of the characteristic foliation through g0 by integrating
/// x' = v(x), y' = 0, F' = F lam(x) along germ-solved admissible fields.
/// The target is never integrated, so every jet has target(g0) exactly.
inline CharLeaf char_leaf_trace(const ResponseModel& model, const Jet1& g0,
                                const CharTraceParams& params,
                                std::optional<std::vector<VecX>> replay = std::nullopt) {
  model.body().require(g0.source());
  const TraceParams& tp = params.trace;
  FiberParams fp = detail::trace_fiber_params(tp);
  ControlStream controls = replay ? ControlStream(std::move(*replay)) : ControlStream(tp.seed);

  CharLeaf leaf{g0, {g0}, g0.target(), {}, 0};
  if (!params.move_base && !params.move_isotropy) return leaf;

  auto frame = germ_solution(model, g0.source(), fp.ansatz, fp.sampler, fp.kernel);
  const int base_dim = frame.fiber().base.dim;
  const SubspaceBasis iso = isotropy_from_fiber(frame.fiber());
  if (frame.fiber().full.dim == 0) return leaf;

  Vec3 x = g0.source();
  Mat3 F = g0.F();
  int consecutive = 0;
  for (int step = 0; step < tp.n_steps;) {
    const VecX u = controls.next(kDirDim);
    Vec12 w;
    if (!params.move_base) {
      w.head<3>().setZero();
      w.tail<9>() = iso.basis * (iso.basis.transpose() * u.tail<9>());
    } else {
      const MatX& Q = frame.fiber().full.basis;
      w = Q * (Q.transpose() * u);
      if (!params.move_isotropy) {
        // Keep only the part whose lam carries no isotropy component.
        w.tail<9>() -= iso.basis * (iso.basis.transpose() * w.tail<9>());
      }
    }
    const double wn = w.norm();
    bool accept = wn > 1e-12;
    detail::CharState next;
    if (accept) {
      w /= wn;
      const VecX coeffs = frame.field_through(w, 0, kDirDim);
      const bool freeze = !params.move_base;
      next = rk4_step(detail::pack(x, F), tp.step,
                      [&](const detail::CharState& s) -> detail::CharState {
                        const Vec3 p = s.head<3>();
                        const Vec12 val = frame.field_value(coeffs, freeze ? x : p);
                        const Mat3 lam = LeftInvariantDirection::from_vector(val).lam;
                        const Mat3 dF = detail::unpack_F(s) * lam;
                        return detail::pack(freeze ? Vec3::Zero() : Vec3(val.head<3>()), dF);
                      });
      if (freeze) next.head<3>() = x;
    }
    std::optional<GermSolution> next_frame;
    Vec3 nx = accept ? Vec3(next.head<3>()) : x;
    if (accept && params.move_base) {
      accept = detail::room_for_frame(model, nx, fp);
      if (accept) {
        next_frame = germ_solution(model, nx, fp.ansatz, fp.sampler, fp.kernel);
        if (tp.lock_stratum && next_frame->fiber().base.dim != base_dim) accept = false;
      }
    }
    if (!accept) {
      ++leaf.rejected_steps;
      if (++consecutive >= tp.max_rejections) {
        throw Error(ErrorKind::StepOutsideBody, "too many consecutive rejected steps");
      }
      if (consecutive % tp.backtrack_after == 0 && params.move_base) {
        const std::size_t idx = detail::restart_index(leaf.cloud.size(), consecutive);
        x = leaf.cloud[idx].source();
        F = leaf.cloud[idx].F();
        frame = germ_solution(model, x, fp.ansatz, fp.sampler, fp.kernel);
      }
      continue;
    }
    consecutive = 0;
    x = nx;
    F = detail::unpack_F(next);
    if (next_frame) frame = std::move(*next_frame);
    leaf.cloud.emplace_back(x, leaf.target_point, F);
    ++step;
  }
  leaf.controls = controls.recorded();
  return leaf;
}

/// g . leaf: left translation of every jet of a characteristic leaf.
inline CharLeaf left_translate_leaf(const Jet1& g, const CharLeaf& leaf) {
  if (!same_point(leaf.target_point, g.source())) {
    throw Error(ErrorKind::AnchorMismatch, "leaf target differs from source(g)");
  }
  CharLeaf out{left_translate(g, leaf.seed), {}, g.target(), leaf.controls, leaf.rejected_steps};
  out.cloud.reserve(leaf.cloud.size());
  for (const Jet1& h : leaf.cloud) out.cloud.push_back(left_translate(g, h));
  return out;
}

struct DecomposeParams {
  GridSpec seeds{7, 0.9};
  TraceParams trace{};
  double leaf_tol = 5e-3;
  double merge_tol = 2e-2;
  int pairs_per_leaf = 5;
  IsoSearchOptions iso{};
  /// Count grid points materially isomorphic to each leaf seed.
  bool sample_beta_fibres = true;
};

struct LeafSummary {
  int id = 0;
  Vec3 seed = Vec3::Zero();
  int est_dim = 0;
  int base_dim = 0;
  std::optional<double> label;
  int isotropy_dim = 0;
  int groupoid_dim = 0;
  bool rank_constant = false;
  int iso_pairs_found = 0;
  int iso_pairs_checked = 0;
  bool smoothly_uniform = false;
  int assigned_points = 0;
  /// Grid points materially isomorphic to the seed (membership sample of
  /// the target fibre of the material groupoid), when sampled.
  std::optional<int> beta_fibre_points;
  std::vector<Vec3> cloud;
};

struct DecompositionReport {
  std::vector<LeafSummary> leaves;
  std::vector<Vec3> points;
  std::vector<int> assignment;
  UniformityReport uniformity;
  std::vector<std::string> notes;
  int conflicts = 0;
};

namespace detail {

inline double cloud_distance(const std::vector<Vec3>& cloud, const Vec3& p) {
  double best = std::numeric_limits<double>::infinity();
  for (const Vec3& q : cloud) best = std::min(best, (q - p).squaredNorm());
  return std::sqrt(best);
}

inline double cloud_cloud_distance(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  double best = std::numeric_limits<double>::infinity();
  for (const Vec3& p : a)
    for (const Vec3& q : b) best = std::min(best, (q - p).squaredNorm());
  return std::sqrt(best);
}

/// A full-dimensional leaf is open, so a segment that stays inside the body
/// and inside the rank-`dim` stratum never leaves it.
inline bool segment_in_stratum(const ResponseModel& model, const Vec3& a, const Vec3& b, int dim,
                               const FiberParams& fp) {
  const double spacing = 0.5 * germ_radius(model.body(), a, fp.ansatz);
  const int pieces = std::max(1, static_cast<int>(std::ceil((b - a).norm() / std::max(spacing, 1e-3))));
  for (int i = 1; i < pieces; ++i) {
    const Vec3 q = a + (b - a) * (static_cast<double>(i) / pieces);
    if (!room_for_frame(model, q, fp)) return false;
    if (germ_fiber(model, q, fp.ansatz, fp.sampler, fp.kernel).base.dim != dim) return false;
  }
  return true;
}

inline bool lex_less(const Vec3& a, const Vec3& b) {
  return std::lexicographical_compare(a.data(), a.data() + 3, b.data(), b.data() + 3);
}

}  // namespace detail

/// Covers the seed grid by traced leaves and reports per-leaf structure.
inline DecompositionReport decompose(const ResponseModel& model, const DecomposeParams& params) {
  const bool radial = model.radial_profile().has_value();
  const Vec3 c = model.body().center();
  const FiberParams fp = detail::trace_fiber_params(params.trace);

  DecompositionReport report;
  report.points = grid_points(model.body(), params.seeds);
  std::sort(report.points.begin(), report.points.end(), detail::lex_less);
  report.assignment.assign(report.points.size(), -1);

  auto label_leaf = [&](const LeafSummary& l) { return radial && l.est_dim < 3 && l.label; };

  for (std::size_t i = 0; i < report.points.size(); ++i) {
    const Vec3& p = report.points[i];
    const int base_here = germ_fiber(model, p, fp.ansatz, fp.sampler, fp.kernel).base.dim;
    int match = -1;
    double match_dist = std::numeric_limits<double>::infinity();
    int matches = 0;
    for (const LeafSummary& l : report.leaves) {
      if (l.base_dim != base_here) continue;
      double d;
      if (label_leaf(l)) {
        d = std::abs((p - c).norm() - *l.label);
        if (d > params.leaf_tol) continue;
      } else if (l.est_dim == 3 && l.base_dim == 3) {
        d = (p - l.seed).norm();
        if (!detail::segment_in_stratum(model, p, l.seed, 3, fp)) continue;
      } else {
        d = detail::cloud_distance(l.cloud, p);
        if (d > params.merge_tol) continue;
      }
      ++matches;
      if (d < match_dist) {
        match_dist = d;
        match = l.id;
      }
    }
    if (matches > 1) {
      ++report.conflicts;
      report.notes.push_back("AssignmentConflict: grid point " + std::to_string(i) +
                             " matched several leaves; assigned to the nearest");
    }
    if (match < 0) {
      TraceParams tp = params.trace;
      tp.seed = params.trace.seed + i;
      Leaf traced = leaf_trace(model, p, tp);
      LeafSummary s;
      s.id = static_cast<int>(report.leaves.size());
      s.seed = p;
      s.est_dim = traced.collapsed ? 0 : traced.est_dim;
      s.base_dim = traced.base_dim;
      if (s.est_dim < 3) s.label = traced.invariant_label;
      s.cloud = std::move(traced.cloud);
      if (!label_leaf(s)) {
        for (LeafSummary& l : report.leaves) {
          if (label_leaf(l) || l.est_dim != s.est_dim || l.base_dim != s.base_dim) continue;
          if (detail::cloud_cloud_distance(l.cloud, s.cloud) <= params.merge_tol) {
            l.cloud.insert(l.cloud.end(), s.cloud.begin(), s.cloud.end());
            match = l.id;
            break;
          }
        }
      }
      if (match < 0) {
        match = s.id;
        report.leaves.push_back(std::move(s));
      }
    }
    report.assignment[i] = match;
    ++report.leaves[static_cast<std::size_t>(match)].assigned_points;
  }

  for (LeafSummary& l : report.leaves) {
    const DistributionFiber seed_fiber = germ_fiber(model, l.seed, fp.ansatz, fp.sampler, fp.kernel);
    l.isotropy_dim = seed_fiber.isotropy_dim();
    l.groupoid_dim = 2 * l.est_dim + l.isotropy_dim;

    std::mt19937_64 rng(params.trace.seed * 31 + static_cast<std::uint64_t>(l.id));
    std::uniform_int_distribution<std::size_t> pick(0, l.cloud.size() - 1);
    l.rank_constant = true;
    for (int k = 0; k < 5; ++k) {
      const Vec3& q = l.cloud[pick(rng)];
      if (germ_fiber(model, q, fp.ansatz, fp.sampler, fp.kernel).base.dim != l.base_dim) {
        l.rank_constant = false;
      }
    }
    for (int k = 0; k < params.pairs_per_leaf; ++k) {
      const Vec3& a = l.cloud[pick(rng)];
      const Vec3& b = l.cloud[pick(rng)];
      ++l.iso_pairs_checked;
      if (find_material_isomorphism(model, a, b, fp.sampler, params.iso).found) ++l.iso_pairs_found;
    }
    l.smoothly_uniform = l.rank_constant && l.iso_pairs_found == l.iso_pairs_checked;

    if (params.sample_beta_fibres) {
      int members = 0;
      for (const Vec3& q : report.points) {
        if (find_material_isomorphism(model, l.seed, q, fp.sampler, params.iso).found) ++members;
      }
      l.beta_fibre_points = members;
    }
  }

  report.uniformity = uniformity_report(model, params.seeds, fp.sampler, params.iso);
  report.notes.push_back(
      "smooth uniformity per leaf: constant base rank over sampled leaf points and material "
      "isomorphisms found between sampled point pairs");
  if (params.sample_beta_fibres) {
    report.notes.push_back(
        "beta_fibre_points counts grid points materially isomorphic to the leaf seed; it is "
        "reported alongside the traced leaf without deciding whether they coincide");
  }
  for (const LeafSummary& l : report.leaves) {
    if (l.est_dim != l.base_dim) {
      report.notes.push_back("leaf " + std::to_string(l.id) + ": estimated dimension " +
                             std::to_string(l.est_dim) + " differs from base rank " +
                             std::to_string(l.base_dim) + " at the seed");
    }
  }
  return report;
}

}  // namespace matleaf
