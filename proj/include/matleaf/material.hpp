// Material isomorphisms, material symmetries and uniformity verdicts.
//
// A jet P from X to Y is a material isomorphism when
//   W(X, F P) = W(Y, F)   for every deformation gradient F.
// The universal quantifier is replaced by a seeded FSampler, so a positive
// answer is a "not falsified on these samples" verdict.
#pragma once

#include "matleaf/jet_groupoid.hpp"
#include "matleaf/response.hpp"
#include "matleaf/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <vector>

namespace matleaf {

struct MaterialIsoResult {
  bool found = false;
  Mat3 P = Mat3::Identity();
  /// Max over F samples of the Frobenius mismatch.
  double residual = std::numeric_limits<double>::infinity();
  int iterations = 0;
  int starts_tried = 0;
  /// Set when every start collapsed to a singular candidate.
  std::optional<ErrorKind> failure;
};

struct IsoCheck {
  bool is_isomorphism = false;
  double residual = 0.0;
};

struct IsoSearchOptions {
  double accept_tol = 1e-6;
  int max_iterations = 200;
  int random_starts = 4;
  std::uint64_t seed = 7;
};

namespace detail {

inline double iso_residual(const ResponseModel& model, const Vec3& x, const Vec3& y, const Mat3& P,
                           const FSampler& sampler) {
  double worst = 0.0;
  for (const Mat3& F : sampler.samples()) {
    const double r = (model.evaluate(x, F * P) - model.evaluate(y, F)).norm();
    worst = std::max(worst, std::isfinite(r) ? r : std::numeric_limits<double>::infinity());
  }
  return worst;
}

struct LmOutcome {
  Mat3 P;
  double cost;
  int iterations;
  bool collapsed;
};

/// Damped Gauss-Newton (Levenberg-Marquardt) on sum_F |W(x, F P) - W(y, F)|^2.
inline LmOutcome minimise_iso(const ResponseModel& model, const Vec3& x, const Vec3& y,
                              const FSampler& sampler, Mat3 P, const IsoSearchOptions& opts) {
  const auto& Fs = sampler.samples();
  const int m = 9 * static_cast<int>(Fs.size());
  std::vector<Mat3> targets;
  targets.reserve(Fs.size());
  for (const Mat3& F : Fs) targets.push_back(model.evaluate(y, F));

  auto residual = [&](const Mat3& Pc, VecX& r) {
    r.resize(m);
    for (std::size_t k = 0; k < Fs.size(); ++k) {
      const Mat3 d = model.evaluate(x, Fs[k] * Pc) - targets[k];
      for (int e = 0; e < 9; ++e) r[9 * static_cast<int>(k) + e] = d(e / 3, e % 3);
    }
    return r.squaredNorm();
  };

  VecX r;
  double cost = residual(P, r);
  double damping = 1e-3;
  const double target_cost = 0.01 * opts.accept_tol * opts.accept_tol;
  int it = 0;
  for (; it < opts.max_iterations && cost > target_cost; ++it) {
    if (std::abs(P.determinant()) < 1e-8) return {P, cost, it, true};
    const Mat3 Pinv = P.inverse();
    MatX J(m, 9);
    for (int e = 0; e < 9; ++e) {
      Mat3 E = Mat3::Zero();
      E(e / 3, e % 3) = 1.0;
      LeftInvariantDirection dir;
      dir.lam = Pinv * E;
      for (std::size_t k = 0; k < Fs.size(); ++k) {
        const Mat3 dW = model.differentiate(x, Fs[k] * P, dir);
        for (int q = 0; q < 9; ++q) J(9 * static_cast<int>(k) + q, e) = dW(q / 3, q % 3);
      }
    }
    const MatX JtJ = J.transpose() * J;
    const VecX grad = J.transpose() * r;
    if (grad.norm() < 1e-15) break;
    bool improved = false;
    for (int attempt = 0; attempt < 12; ++attempt) {
      MatX A = JtJ;
      A.diagonal().array() += damping * (1.0 + JtJ.diagonal().array());
      const VecX step = A.ldlt().solve(-grad);
      Mat3 trial = P;
      for (int e = 0; e < 9; ++e) trial(e / 3, e % 3) += step[e];
      VecX rt;
      const double ct = residual(trial, rt);
      if (std::isfinite(ct) && ct < cost) {
        const double gain = cost - ct;
        P = trial;
        r = std::move(rt);
        cost = ct;
        damping = std::max(damping / 3.0, 1e-12);
        improved = true;
        if (gain < 1e-14 * cost) it = opts.max_iterations;  // stalled
        break;
      }
      damping *= 4.0;
    }
    if (!improved) break;
  }
  return {P, cost, it, std::abs(P.determinant()) < 1e-8};
}

}  // namespace detail

inline IsoCheck is_material_isomorphism(const ResponseModel& model, const Jet1& P,
                                        const FSampler& sampler, double tol) {
  if (!(tol > 0.0)) throw Error(ErrorKind::InvalidArgument, "tolerance must be positive");
  model.body().require(P.source());
  model.body().require(P.target());
  IsoCheck out;
  out.residual = detail::iso_residual(model, P.source(), P.target(), P.F(), sampler);
  out.is_isomorphism = out.residual <= tol;
  return out;
}

/// Material symmetry test at X: a material isomorphism from X to X.
inline IsoCheck symmetry_check(const ResponseModel& model, const Vec3& x, const Mat3& Q,
                               const FSampler& sampler, double tol) {
  return is_material_isomorphism(model, Jet1(x, x, Q), sampler, tol);
}

/// Starting candidates: identity, quarter turns about each axis, then seeded
/// random orthogonal matrices.
inline std::vector<Mat3> iso_search_starts(const IsoSearchOptions& opts) {
  std::vector<Mat3> starts{Mat3::Identity()};
  for (int axis = 0; axis < 3; ++axis) starts.push_back(axis_rotation(axis, M_PI / 2.0));
  std::mt19937_64 rng(opts.seed);
  for (int i = 0; i < opts.random_starts; ++i) starts.push_back(random_orthogonal(rng));
  return starts;
}

/// Multi-start least-squares search for a material isomorphism X -> Y.
/// Among accepted optima the one closest to the identity is reported.
inline MaterialIsoResult find_material_isomorphism(const ResponseModel& model, const Vec3& x,
                                                   const Vec3& y, const FSampler& sampler,
                                                   const IsoSearchOptions& opts = {}) {
  model.body().require(x);
  model.body().require(y);
  MaterialIsoResult best;
  int collapsed = 0;
  const auto starts = iso_search_starts(opts);
  for (const Mat3& start : starts) {
    const auto run = detail::minimise_iso(model, x, y, sampler, start, opts);
    ++best.starts_tried;
    best.iterations += run.iterations;
    if (run.collapsed) {
      ++collapsed;
      continue;
    }
    const double res = detail::iso_residual(model, x, y, run.P, sampler);
    const bool accepted = res <= opts.accept_tol;
    bool take = false;
    if (accepted && !best.found) {
      take = true;
    } else if (accepted && best.found) {
      take = (run.P - Mat3::Identity()).norm() < (best.P - Mat3::Identity()).norm();
    } else if (!best.found) {
      take = res < best.residual;
    }
    if (take) {
      best.P = run.P;
      best.residual = res;
      best.found = accepted;
    }
  }
  if (collapsed == static_cast<int>(starts.size())) {
    best.found = false;
    best.failure = ErrorKind::SingularCandidate;
  }
  return best;
}

/// Regular grid of points in the body: n per axis over the cube of half-width
/// extent * radius, keeping points with |p - c| < extent * radius.
struct GridSpec {
  int n = 7;
  double extent = 0.9;
};

inline std::vector<Vec3> grid_points(const BodyDomain& body, const GridSpec& spec) {
  if (spec.n < 1) throw Error(ErrorKind::InvalidArgument, "grid needs n >= 1");
  if (!(spec.extent > 0.0 && spec.extent < 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "grid extent must lie in (0, 1)");
  }
  const double half = spec.extent * body.radius();
  std::vector<Vec3> out;
  for (int i = 0; i < spec.n; ++i) {
    for (int j = 0; j < spec.n; ++j) {
      for (int k = 0; k < spec.n; ++k) {
        auto coord = [&](int idx) {
          return spec.n == 1 ? 0.0 : -half + 2.0 * half * idx / (spec.n - 1);
        };
        const Vec3 offset(coord(i), coord(j), coord(k));
        if (offset.norm() < half + 1e-12 * half) out.push_back(body.center() + offset);
      }
    }
  }
  return out;
}

struct UniformityReport {
  bool uniform = true;
  int points = 0;
  int pairs_checked = 0;
  struct Witness {
    Vec3 from;
    Vec3 to;
    double residual;
  };
  std::optional<Witness> witness;
};

/// Transitivity over a sampled grid: every grid point must be reachable from
/// the first one (composition then connects every pair).
inline UniformityReport uniformity_report(const ResponseModel& model, const GridSpec& grid,
                                          const FSampler& sampler,
                                          const IsoSearchOptions& opts = {}) {
  const auto pts = grid_points(model.body(), grid);
  UniformityReport report;
  report.points = static_cast<int>(pts.size());
  if (pts.empty()) return report;
  const Vec3& base = pts.front();
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const auto res = find_material_isomorphism(model, base, pts[i], sampler, opts);
    ++report.pairs_checked;
    if (!res.found) {
      report.uniform = false;
      report.witness = UniformityReport::Witness{base, pts[i], res.residual};
      break;
    }
  }
  return report;
}

}  // namespace matleaf
