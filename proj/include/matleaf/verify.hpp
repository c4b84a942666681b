// Invariant suite: every structural property of the library checked on
// seeded samples, with measured residuals.
#pragma once

#include "matleaf/config.hpp"
#include "matleaf/report.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <functional>
#include <iomanip>
#include <sstream>

namespace matleaf {

struct PropertyResult {
  std::string name;
  bool pass = true;
  bool applicable = true;
  int samples = 0;
  double measured = 0.0;
  double bound = 0.0;
  std::string counterexample;
};

struct VerifyReport {
  std::vector<PropertyResult> properties;

  bool all_pass() const {
    return std::all_of(properties.begin(), properties.end(),
                       [](const PropertyResult& p) { return p.pass; });
  }

  const PropertyResult* first_failure() const {
    for (const auto& p : properties)
      if (!p.pass) return &p;
    return nullptr;
  }
};

struct VerifyOptions {
  int groupoid_tuples = 1000;
  int derivative_samples = 100;
  int kernel_points = 50;
  int coherence_points = 10;
  int fiber_points = 10;
  int rotations = 50;
  int iso_triples = 5;
  int char_steps = 100;
  int equivariance_pairs = 10;
  int equivariance_steps = 40;
  int stratum_steps = 300;
  /// Steps for the radial conservation trace; 0 uses numerics.n_steps.
  int conservation_steps = 0;
};

/// Closed-form kernel of TW at an identity for a radial model:
/// {(v, lam) : f'(t) <X - c, v> = 0, f(t) (lam + lam^T) = 0}.
inline SubspaceBasis radial_kernel_oracle(const ResponseModel& model, const Vec3& x) {
  const auto& profile = model.radial_profile();
  if (!profile) throw Error(ErrorKind::InvalidArgument, "oracle needs a radial model");
  const Vec3 d = x - model.body().center();
  const double t = d.squaredNorm();
  MatX cols(kDirDim, 0);
  auto add = [&](const Vec12& w) {
    cols.conservativeResize(Eigen::NoChange, cols.cols() + 1);
    cols.col(cols.cols() - 1) = w;
  };
  const bool v_constrained = profile->derivative(t) != 0.0 && d.norm() > 0.0;
  for (int i = 0; i < 3; ++i) {
    Vec3 e = Vec3::Unit(i);
    if (v_constrained) e -= d * (d.dot(e) / d.squaredNorm());
    Vec12 w = Vec12::Zero();
    w.head<3>() = e;
    add(w);
  }
  if (profile->value(t) != 0.0) {
    for (const auto& [i, j] : {std::pair{0, 1}, std::pair{0, 2}, std::pair{1, 2}}) {
      Vec12 w = Vec12::Zero();
      w[3 + 3 * i + j] = 1.0;
      w[3 + 3 * j + i] = -1.0;
      add(w);
    }
  } else {
    for (int k = 0; k < 9; ++k) add(Vec12::Unit(3 + k));
  }
  return orthonormal_range(cols, 1e-12);
}

/// Size of the radial constraint term 2 |f'(t)| |X - c| that separates
/// the two kernel regimes.
inline double radial_constraint_scale(const ResponseModel& model, const Vec3& x) {
  const Vec3 d = x - model.body().center();
  return 2.0 * std::abs(model.radial_profile()->derivative(d.squaredNorm())) * d.norm();
}

/// Points where the oracle is decidable numerically: the radial term is
/// either exactly zero or at least `band`.
inline bool oracle_admissible(const ResponseModel& model, const Vec3& x, double band) {
  const double s = radial_constraint_scale(model, x);
  return s == 0.0 || s >= band;
}

inline double oracle_band(const ResponseModel& model) {
  return model.has_analytic_derivative() ? 1e-4 : 1e-2;
}

namespace detail {

inline Jet1 random_jet(std::mt19937_64& rng, const BodyDomain& body, const Vec3& source) {
  const Vec3 target = random_point_in_ball(rng, body.center(), 0.95 * body.radius());
  return Jet1(source, target, FSampler::draw(rng));
}

inline std::string point_text(const Vec3& p) {
  std::ostringstream os;
  os << std::setprecision(6) << "(" << p[0] << ", " << p[1] << ", " << p[2] << ")";
  return os.str();
}

inline double max_entry_diff(const Mat3& a, const Mat3& b) { return (a - b).cwiseAbs().maxCoeff(); }

class Recorder {
 public:
  Recorder(std::string name, double bound) { r_.name = std::move(name), r_.bound = bound; }

  void sample(double value, const std::function<std::string()>& where) {
    ++r_.samples;
    r_.measured = std::max(r_.measured, std::isfinite(value) ? value : HUGE_VAL);
    if (!(value <= r_.bound) && r_.pass) {
      r_.pass = false;
      r_.counterexample = where();
    }
  }

  void fail(const std::string& why) {
    ++r_.samples;
    if (r_.pass) r_.counterexample = why;
    r_.pass = false;
  }

  void count() { ++r_.samples; }

  PropertyResult done() { return std::move(r_); }

  static PropertyResult not_applicable(std::string name, std::string why) {
    PropertyResult r;
    r.name = std::move(name);
    r.applicable = false;
    r.counterexample = std::move(why);
    return r;
  }

 private:
  PropertyResult r_;
};

inline std::vector<Vec3> sample_points(const BodyDomain& body, int n, std::uint64_t seed,
                                       double min_frac = 0.05, double max_frac = 0.95) {
  std::mt19937_64 rng(seed);
  std::vector<Vec3> out;
  while (static_cast<int>(out.size()) < n) {
    const Vec3 p = random_point_in_ball(rng, body.center(), max_frac * body.radius());
    if ((p - body.center()).norm() >= min_frac * body.radius()) out.push_back(p);
  }
  return out;
}

inline std::vector<Vec3> admissible_points(const ResponseModel& model, int n, std::uint64_t seed,
                                           double band) {
  std::mt19937_64 rng(seed);
  const BodyDomain& body = model.body();
  std::vector<Vec3> out;
  while (static_cast<int>(out.size()) < n) {
    const Vec3 p = random_point_in_ball(rng, body.center(), 0.95 * body.radius());
    if ((p - body.center()).norm() >= 0.05 * body.radius() && oracle_admissible(model, p, band)) {
      out.push_back(p);
    }
  }
  return out;
}

inline MatX stacked_constraints(const ResponseModel& model, const Jet1& at,
                                const std::vector<Mat3>& Fs) {
  MatX A(9 * static_cast<int>(Fs.size()), kDirDim);
  for (int j = 0; j < kDirDim; ++j) {
    const auto dir = LeftInvariantDirection::from_vector(Vec12::Unit(j));
    for (std::size_t k = 0; k < Fs.size(); ++k) {
      const Mat3 D = directional_derivative(model, Jet1(at.source(), at.target(), at.F() * Fs[k]), dir);
      const double w = 1.0 / (1.0 + (at.F() * Fs[k]).squaredNorm());
      for (int e = 0; e < 9; ++e) A(9 * static_cast<int>(k) + e, j) = w * D(e / 3, e % 3);
    }
  }
  return A;
}

inline double containment_residual(const SubspaceBasis& inner, const SubspaceBasis& outer) {
  if (inner.dim == 0) return 0.0;
  const MatX r = inner.basis - outer.basis * (outer.basis.transpose() * inner.basis);
  return r.cwiseAbs().maxCoeff();
}

inline double base_projection_residual(const DistributionFiber& f) {
  const SubspaceBasis vpart = orthonormal_range(f.full.basis.topRows(3), kValueTol);
  if (vpart.dim != f.base.dim) return HUGE_VAL;
  if (f.base.dim == 0) return 0.0;
  const MatX r = f.full.basis.topRows(3) - f.base.basis * (f.base.basis.transpose() * f.full.basis.topRows(3));
  return r.cwiseAbs().maxCoeff();
}

/// A radius fraction along the x-axis where the radial constraint is active,
/// for tracing base flows that should stay on spheres.
inline std::optional<Vec3> active_radial_seed(const ResponseModel& model) {
  if (!model.radial_profile()) return std::nullopt;
  for (double frac : {0.5, 0.7, 0.3, 0.8}) {
    const Vec3 p = model.body().center() + Vec3(frac * model.body().radius(), 0.0, 0.0);
    if (radial_constraint_scale(model, p) >= 1e-2) return p;
  }
  return std::nullopt;
}

}  // namespace detail

// Groupoid laws on seeded composable tuples.
inline std::vector<PropertyResult> verify_groupoid(const BodyDomain& body, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  detail::Recorder assoc("groupoid.associativity", 1e-12);
  detail::Recorder ends("groupoid.source_target", 0.0);
  detail::Recorder ident("groupoid.identity", 1e-12);
  detail::Recorder inv("groupoid.inverse", 1e-12);
  detail::Recorder anch("groupoid.anchor", 0.0);
  detail::Recorder transl("groupoid.left_translation_bijective", 1e-12);
  auto pt = [&] { return random_point_in_ball(rng, body.center(), 0.95 * body.radius()); };
  for (int i = 0; i < n; ++i) {
    const Jet1 k = detail::random_jet(rng, body, pt());
    const Jet1 h = detail::random_jet(rng, body, k.target());
    const Jet1 g = detail::random_jet(rng, body, h.target());
    const auto where = [&] { return "tuple " + std::to_string(i) + " at " + detail::point_text(k.source()); };

    const Jet1 left = compose(g, compose(h, k));
    const Jet1 right = compose(compose(g, h), k);
    const bool same_points = same_point(left.source(), right.source()) && same_point(left.target(), right.target());
    assoc.sample(same_points ? detail::max_entry_diff(left.F(), right.F()) : HUGE_VAL, where);

    const Jet1 gh = compose(g, h);
    ends.sample(same_point(gh.source(), h.source()) && same_point(gh.target(), g.target()) ? 0.0 : 1.0, where);

    const Jet1 r = compose(g, identity(body, g.source()));
    const Jet1 l = compose(identity(body, g.target()), g);
    const bool id_points = same_point(r.source(), g.source()) && same_point(r.target(), g.target()) &&
                           same_point(l.source(), g.source()) && same_point(l.target(), g.target());
    ident.sample(id_points ? std::max(detail::max_entry_diff(r.F(), g.F()), detail::max_entry_diff(l.F(), g.F()))
                           : HUGE_VAL,
                 where);

    const Jet1 gi = invert(g);
    const Jet1 a = compose(gi, g);
    const Jet1 b = compose(g, gi);
    const bool inv_points = same_point(a.source(), g.source()) && same_point(a.target(), g.source()) &&
                            same_point(b.source(), g.target()) && same_point(b.target(), g.target());
    inv.sample(inv_points ? std::max(detail::max_entry_diff(a.F(), Mat3::Identity()),
                                     detail::max_entry_diff(b.F(), Mat3::Identity()))
                          : HUGE_VAL,
               where);

    const auto [src, tgt] = anchor(gh);
    anch.sample(same_point(src, h.source()) && same_point(tgt, g.target()) ? 0.0 : 1.0, where);

    const Jet1 back = left_translate(gi, left_translate(g, h));
    transl.sample(same_point(back.source(), h.source()) && same_point(back.target(), h.target())
                      ? detail::max_entry_diff(back.F(), h.F())
                      : HUGE_VAL,
                  where);
  }
  return {assoc.done(), ends.done(), ident.done(), inv.done(), anch.done(), transl.done()};
}

// Response functional: derivative accuracy, linearity, identity value and
// independence of the target point.
inline std::vector<PropertyResult> verify_response(const ResponseModel& model, const VerifyOptions& opt,
                                                   std::uint64_t seed) {
  std::vector<PropertyResult> out;
  std::mt19937_64 rng(seed);
  const BodyDomain& body = model.body();
  const ResponseModel fd = model.without_analytic_derivative();

  if (model.has_analytic_derivative()) {
    detail::Recorder agree("response.analytic_vs_fd", 1e-6);
    for (int i = 0; i < opt.derivative_samples; ++i) {
      const Vec3 x = random_point_in_ball(rng, body.center(), 0.95 * body.radius());
      const Mat3 F = FSampler::draw(rng);
      const auto dir = LeftInvariantDirection::from_vector(random_unit_vector(rng, kDirDim));
      const Jet1 g(x, x, F);
      const Mat3 a = directional_derivative(model, g, dir);
      const Mat3 b = directional_derivative(fd, g, dir);
      const double scaled = (a - b).cwiseAbs().maxCoeff() / (1.0 + a.cwiseAbs().maxCoeff());
      agree.sample(scaled, [&] { return "X = " + detail::point_text(x); });
    }
    out.push_back(agree.done());

    detail::Recorder lin("response.linearity", 1e-8);
    std::uniform_real_distribution<double> coef(-2.0, 2.0);
    for (int i = 0; i < opt.derivative_samples; ++i) {
      const Vec3 x = random_point_in_ball(rng, body.center(), 0.95 * body.radius());
      const Jet1 g(x, x, FSampler::draw(rng));
      const VecX d1 = random_unit_vector(rng, kDirDim);
      const VecX d2 = random_unit_vector(rng, kDirDim);
      const double a = coef(rng), b = coef(rng);
      const VecX combo = a * d1 + b * d2;
      const Mat3 lhs = directional_derivative(model, g, LeftInvariantDirection::from_vector(combo));
      const Mat3 rhs = a * directional_derivative(model, g, LeftInvariantDirection::from_vector(d1)) +
                       b * directional_derivative(model, g, LeftInvariantDirection::from_vector(d2));
      lin.sample((lhs - rhs).norm() / std::max(1.0, rhs.norm()), [&] { return "X = " + detail::point_text(x); });
    }
    out.push_back(lin.done());
  } else {
    out.push_back(detail::Recorder::not_applicable("response.analytic_vs_fd", "model has no analytic derivative"));
    out.push_back(detail::Recorder::not_applicable("response.linearity", "checked in analytic mode only"));
  }

  if (model.radial_profile()) {
    detail::Recorder zero("response.identity_value_zero", 0.0);
    for (int i = 0; i < opt.derivative_samples; ++i) {
      const Vec3 x = random_point_in_ball(rng, body.center(), 0.95 * body.radius());
      zero.sample(eval(model, identity(body, x)).cwiseAbs().maxCoeff(), [&] { return "X = " + detail::point_text(x); });
    }
    out.push_back(zero.done());
  } else {
    out.push_back(detail::Recorder::not_applicable("response.identity_value_zero", "not a radial model"));
  }

  const auto ti = check_translation_invariance(model, opt.derivative_samples, seed + 1);
  PropertyResult t;
  t.name = "response.target_independence";
  t.samples = ti.samples;
  t.measured = ti.max_deviation;
  t.pass = ti.pass;
  if (!t.pass) t.counterexample = "evaluation depends on the target point";
  out.push_back(t);
  return out;
}

// Material isomorphisms: rotations are symmetries, accepted isomorphisms
// compose and invert, more F samples never lower the residual.
inline std::vector<PropertyResult> verify_material(const ResponseModel& model, const FSampler& sampler,
                                                   const IsoSearchOptions& iso, const VerifyOptions& opt,
                                                   std::uint64_t seed) {
  std::vector<PropertyResult> out;
  std::mt19937_64 rng(seed);
  const BodyDomain& body = model.body();
  const double tau = iso.accept_tol;
  if (!model.radial_profile()) {
    out.push_back(detail::Recorder::not_applicable("material.rotations_are_symmetries", "not a radial model"));
    out.push_back(detail::Recorder::not_applicable("material.composition_closure", "not a radial model"));
    out.push_back(detail::Recorder::not_applicable("material.inverse_closure", "not a radial model"));
  } else {
    detail::Recorder sym("material.rotations_are_symmetries", tau);
    const Vec3 x = random_point_in_ball(rng, body.center(), 0.9 * body.radius());
    for (int i = 0; i < opt.rotations; ++i) {
      const Mat3 Q = random_orthogonal(rng);
      sym.sample(symmetry_check(model, x, Q, sampler, tau).residual, [&] { return "X = " + detail::point_text(x); });
    }
    out.push_back(sym.done());

    detail::Recorder comp("material.composition_closure", 2.0 * tau);
    detail::Recorder inv("material.inverse_closure", tau);
    for (int i = 0; i < opt.iso_triples; ++i) {
      const Vec3 a = random_point_in_ball(rng, body.center(), 0.9 * body.radius());
      const Vec3 d = a - body.center();
      const Vec3 b = body.center() + random_orthogonal(rng) * d;
      const Vec3 c = body.center() + random_orthogonal(rng) * d;
      const auto where = [&] { return "X = " + detail::point_text(a); };
      const auto P = find_material_isomorphism(model, a, b, sampler, iso);
      const auto R = find_material_isomorphism(model, b, c, sampler, iso);
      if (!P.found || !R.found) {
        comp.fail("no isomorphism found between points of equal radius near " + detail::point_text(a));
        continue;
      }
      const Jet1 composite = compose(Jet1(b, c, R.P), Jet1(a, b, P.P));
      comp.sample(is_material_isomorphism(model, composite, sampler, 2.0 * tau).residual, where);
      const Mat3 Q = random_orthogonal(rng);
      const Jet1 exact(a, body.center() + Q * d, Q);
      inv.sample(is_material_isomorphism(model, invert(exact), sampler, tau).residual, where);
    }
    out.push_back(comp.done());
    out.push_back(inv.done());
  }

  detail::Recorder mono("material.residual_monotone_in_samples", 0.0);
  const FSampler more = sampler.doubled();
  for (int i = 0; i < opt.iso_triples; ++i) {
    const Vec3 a = random_point_in_ball(rng, body.center(), 0.9 * body.radius());
    const Vec3 b = random_point_in_ball(rng, body.center(), 0.9 * body.radius());
    const Jet1 P(a, b, FSampler::draw(rng));
    const double r6 = is_material_isomorphism(model, P, sampler, 1.0).residual;
    const double r12 = is_material_isomorphism(model, P, more, 1.0).residual;
    mono.sample(r12 >= r6 ? 0.0 : r6 - r12, [&] { return "X = " + detail::point_text(a); });
  }
  out.push_back(mono.done());
  return out;
}

// Distribution fibres against closed forms and against each other.
inline std::vector<PropertyResult> verify_distribution(const ResponseModel& model, FiberMode mode,
                                                       const FiberParams& fp, const VerifyOptions& opt,
                                                       std::uint64_t seed) {
  std::vector<PropertyResult> out;
  const bool analytic = model.has_analytic_derivative();
  const double tol = resolve_svd_tol(model, fp.kernel);
  const double band = oracle_band(model);
  KernelOptions plain = fp.kernel;
  plain.check_stability = false;

  if (model.radial_profile()) {
    detail::Recorder oracle("distribution.analytic_kernel_oracle", analytic ? 1e-6 : 1e-4);
    for (const Vec3& x : detail::admissible_points(model, opt.kernel_points, seed, band)) {
      const auto f = pointwise_kernel(model, x, fp.sampler, fp.kernel);
      oracle.sample(max_principal_angle(f.full, radial_kernel_oracle(model, x)),
                    [&] { return "X = " + detail::point_text(x); });
    }
    out.push_back(oracle.done());

    detail::Recorder coh("distribution.left_invariance_coherence", analytic ? 1e-8 : 1e-4);
    std::mt19937_64 rng(seed + 1);
    for (const Vec3& x : detail::admissible_points(model, opt.coherence_points, seed + 2, band)) {
      const Jet1 moved = detail::random_jet(rng, model.body(), x);
      const auto at_identity = nullspace(detail::stacked_constraints(model, Jet1(x, x, Mat3::Identity()),
                                                                     fp.sampler.samples()), tol);
      const auto translated = nullspace(detail::stacked_constraints(model, moved, fp.sampler.samples()), tol);
      coh.sample(max_principal_angle(at_identity, translated), [&] { return "X = " + detail::point_text(x); });
    }
    out.push_back(coh.done());
  } else {
    out.push_back(detail::Recorder::not_applicable("distribution.analytic_kernel_oracle", "not a radial model"));
    out.push_back(detail::Recorder::not_applicable("distribution.left_invariance_coherence", "not a radial model"));
  }

  detail::Recorder sub("distribution.germ_within_pointwise", 1e-6);
  detail::Recorder proj("distribution.base_projection", 1e-10);
  detail::Recorder stab("distribution.sampler_stability", 0.0);
  const auto pts = detail::sample_points(model.body(), opt.fiber_points, seed + 3);
  for (const Vec3& x : pts) {
    const auto where = [&] { return "X = " + detail::point_text(x); };
    const auto pw = pointwise_kernel(model, x, fp.sampler, plain);
    const auto germ = germ_solution(model, x, fp.ansatz, fp.sampler, plain);
    const auto& gf = germ.fiber();
    double r = gf.full.dim <= pw.full.dim ? detail::containment_residual(gf.full, pw.full) : HUGE_VAL;
    if (model.radial_profile() && oracle_admissible(model, x, band) &&
        radial_constraint_scale(model, x) > 0.0) {
      // Strictly inside a stratum: pointwise rank is constant nearby.
      bool interior = true;
      for (int i = 0; i < 3 && interior; ++i) {
        for (double sgn : {-2.0, 2.0}) {
          const Vec3 q = x + sgn * germ.eta() * Vec3::Unit(i);
          if (!model.body().contains(q) ||
              pointwise_kernel(model, q, fp.sampler, plain).full.dim != pw.full.dim) {
            interior = false;
            break;
          }
        }
      }
      if (interior && gf.full.dim != pw.full.dim) r = HUGE_VAL;
    }
    sub.sample(r, where);
    proj.sample(std::max(detail::base_projection_residual(pw), detail::base_projection_residual(gf)), where);

    FiberParams once = fp;
    once.kernel.check_stability = false;
    FiberParams twice = once;
    twice.sampler = FSampler(2 * fp.sampler.count(), fp.sampler.seed());
    const auto a = compute_fiber(model, x, mode, once);
    const auto b = compute_fiber(model, x, mode, twice);
    stab.sample(a.full.dim == b.full.dim && a.base.dim == b.base.dim ? 0.0 : 1.0, where);
  }
  out.push_back(sub.done());
  out.push_back(proj.done());
  out.push_back(stab.done());

  if (model.radial_profile()) {
    detail::Recorder iso("distribution.isotropy_exponentials_are_symmetries", 1e-6);
    std::mt19937_64 rng(seed + 4);
    const Vec3 x = pts.front();
    const SubspaceBasis alg = isotropy_algebra(model, x, mode, fp);
    std::normal_distribution<double> normal;
    for (int i = 0; i < 20 && alg.dim > 0; ++i) {
      VecX c(alg.dim);
      for (int k = 0; k < alg.dim; ++k) c[k] = normal(rng);
      const Mat3 Q = to_mat3(alg.basis * c).exp();
      iso.sample(symmetry_check(model, x, Q, fp.sampler, 1e-6).residual, [&] { return "X = " + detail::point_text(x); });
    }
    if (alg.dim == 0) iso.fail("empty isotropy algebra at " + detail::point_text(x));
    out.push_back(iso.done());
  }
  return out;
}

// Leaves: fixed targets, equivariance, strata, isotropy closure and
// conservation of the radial invariant.
inline std::vector<PropertyResult> verify_foliation(const ResponseModel& model, const TraceParams& base,
                                                    const VerifyOptions& opt, std::uint64_t seed) {
  std::vector<PropertyResult> out;
  const BodyDomain& body = model.body();
  const Vec3 c = body.center();
  const double r = body.radius();
  const Vec3 x0 = detail::active_radial_seed(model).value_or(c + Vec3(0.5 * r, 0.0, 0.0));

  CharTraceParams cp;
  cp.trace = base;
  cp.trace.n_steps = opt.char_steps;
  cp.trace.seed = seed;
  {
    const CharLeaf leaf = char_leaf_trace(model, identity(body, x0), cp);
    detail::Recorder beta("foliation.beta_constancy", 0.0);
    detail::Recorder drift("foliation.char_orthogonality_drift", 1e-4);
    for (const Jet1& g : leaf.cloud) {
      const auto where = [&] { return "jet with source " + detail::point_text(g.source()); };
      beta.sample(same_point(g.target(), leaf.target_point) ? 0.0 : 1.0, where);
      drift.sample((g.F() * g.F().transpose() - Mat3::Identity()).norm(), where);
    }
    out.push_back(beta.done());
    if (model.radial_profile()) {
      out.push_back(drift.done());
    } else {
      out.push_back(detail::Recorder::not_applicable("foliation.char_orthogonality_drift", "not a radial model"));
    }
  }

  {
    detail::Recorder eq("foliation.equivariance", 1e-6);
    std::mt19937_64 rng(seed + 1);
    CharTraceParams ep = cp;
    ep.trace.n_steps = opt.equivariance_steps;
    for (int i = 0; i < opt.equivariance_pairs; ++i) {
      const Vec3 a = random_point_in_ball(rng, c, 0.8 * r);
      const Jet1 h = detail::random_jet(rng, body, a);
      const Jet1 g = detail::random_jet(rng, body, h.target());
      ep.trace.seed = seed + 100 + static_cast<std::uint64_t>(i);
      const CharLeaf from_h = char_leaf_trace(model, h, ep);
      const CharLeaf translated = left_translate_leaf(g, from_h);
      const CharLeaf from_gh = char_leaf_trace(model, compose(g, h), ep, from_h.controls);
      const auto where = [&] { return "pair " + std::to_string(i) + " from " + detail::point_text(a); };
      if (translated.cloud.size() != from_gh.cloud.size()) {
        eq.fail("cloud sizes differ for " + where());
        continue;
      }
      double worst = 0.0;
      for (std::size_t k = 0; k < translated.cloud.size(); ++k) {
        const Jet1& p = translated.cloud[k];
        const Jet1& q = from_gh.cloud[k];
        worst = std::max({worst, (p.source() - q.source()).cwiseAbs().maxCoeff(),
                          (p.target() - q.target()).cwiseAbs().maxCoeff(), detail::max_entry_diff(p.F(), q.F())});
      }
      eq.sample(worst, where);
    }
    out.push_back(eq.done());
  }

  {
    detail::Recorder strat("foliation.leaf_in_stratum", 0.0);
    TraceParams tp = base;
    tp.n_steps = opt.stratum_steps;
    const FiberParams fp = detail::trace_fiber_params(tp);
    for (double frac : {0.2, 0.4, 0.7}) {
      const Vec3 s = c + Vec3(frac * r, 0.0, 0.0);
      tp.seed = seed + 7;
      const Leaf leaf = leaf_trace(model, s, tp);
      const int at_seed = compute_fiber(model, s, tp.mode, fp).base.dim;
      strat.sample(leaf.est_dim == at_seed ? 0.0 : 1.0, [&] {
        return "leaf from " + detail::point_text(s) + " has dimension " + std::to_string(leaf.est_dim) +
               ", base rank " + std::to_string(at_seed);
      });
    }
    out.push_back(strat.done());
  }

  if (model.radial_profile()) {
    CharTraceParams ip = cp;
    ip.move_base = false;
    const CharLeaf leaf = char_leaf_trace(model, identity(body, x0), ip);
    detail::Recorder closure("foliation.isotropy_closure", 2e-4);
    const std::size_t n = leaf.cloud.size();
    const std::size_t stride = std::max<std::size_t>(1, n / 20);
    for (std::size_t i = 0; i < n; i += stride) {
      const Jet1& a = leaf.cloud[i];
      if (!same_point(a.source(), x0) || !same_point(a.target(), x0)) {
        closure.fail("isotropy jet left the point " + detail::point_text(x0));
        continue;
      }
      const Mat3 ai = invert(a).F();
      closure.sample((ai * ai.transpose() - Mat3::Identity()).norm(), [] { return std::string("inverse"); });
      for (std::size_t j = 0; j < n; j += stride) {
        const Mat3 p = compose(a, leaf.cloud[j]).F();
        closure.sample((p * p.transpose() - Mat3::Identity()).norm(),
                       [&] { return "product of jets " + std::to_string(i) + " and " + std::to_string(j); });
      }
    }
    out.push_back(closure.done());
  } else {
    out.push_back(detail::Recorder::not_applicable("foliation.isotropy_closure", "not a radial model"));
  }

  const auto seed_pt = detail::active_radial_seed(model);
  if (seed_pt) {
    TraceParams tp = base;
    if (opt.conservation_steps > 0) tp.n_steps = opt.conservation_steps;
    tp.seed = seed + 11;
    const Leaf leaf = leaf_trace(model, *seed_pt, tp);
    detail::Recorder cons("foliation.radial_conservation", 1e-3);
    const double r0 = (*seed_pt - c).norm();
    for (const Vec3& p : leaf.cloud) {
      cons.sample(std::abs((p - c).norm() - r0), [&] { return "cloud point " + detail::point_text(p); });
    }
    out.push_back(cons.done());
  } else {
    out.push_back(detail::Recorder::not_applicable("foliation.radial_conservation",
                                                   "no point with an active radial constraint"));
  }
  return out;
}

inline PropertyResult verify_config_round_trip(const RunConfig& cfg) {
  PropertyResult r;
  r.name = "cli.config_round_trip";
  r.samples = 1;
  const json once = config_to_json(cfg);
  const json twice = config_to_json(config_from_json(once));
  r.pass = once == twice && config_to_json(config_from_string(once.dump())) == once;
  if (!r.pass) r.counterexample = "re-serialised config differs";
  return r;
}

inline VerifyReport run_verify(const RunConfig& cfg, const VerifyOptions& opt = {}) {
  const ResponseModel model = make_model(cfg);
  const std::uint64_t seed = cfg.seed();
  const FiberParams fp = make_fiber_params(cfg);
  VerifyReport report;
  // A group that throws is recorded as one failed property.
  auto add = [&](const char* group, const std::function<std::vector<PropertyResult>()>& run) {
    try {
      for (auto& p : run()) report.properties.push_back(std::move(p));
    } catch (const Error& e) {
      PropertyResult r;
      r.name = std::string(group) + ".completed";
      r.pass = false;
      r.samples = 1;
      r.counterexample = e.what();
      report.properties.push_back(std::move(r));
    }
  };
  add("groupoid", [&] { return verify_groupoid(model.body(), opt.groupoid_tuples, seed); });
  add("response", [&] { return verify_response(model, opt, seed + 1); });
  add("material", [&] { return verify_material(model, fp.sampler, make_iso_options(cfg), opt, seed + 2); });
  add("distribution", [&] { return verify_distribution(model, make_mode(cfg), fp, opt, seed + 3); });
  add("foliation", [&] { return verify_foliation(model, make_trace_params(cfg), opt, seed + 4); });
  report.properties.push_back(verify_config_round_trip(cfg));
  return report;
}

inline json to_json(const VerifyReport& r) {
  json props = json::array();
  for (const PropertyResult& p : r.properties) {
    json e = {{"name", p.name},
              {"pass", p.pass},
              {"applicable", p.applicable},
              {"samples", p.samples},
              {"measured", std::isfinite(p.measured) ? json(p.measured) : json("inf")},
              {"bound", p.bound}};
    e["counterexample"] = p.counterexample.empty() ? json(nullptr) : json(p.counterexample);
    props.push_back(e);
  }
  const PropertyResult* bad = r.first_failure();
  return {{"all_pass", r.all_pass()},
          {"properties", props},
          {"first_failure", bad ? json(bad->name + ": " + bad->counterexample) : json(nullptr)}};
}

}  // namespace matleaf
