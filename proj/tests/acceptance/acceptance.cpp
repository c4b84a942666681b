// Acceptance suite: one line per criterion, nonzero exit if any fails.
#include "matleaf/cli.hpp"
#include "support.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>

using namespace matleaf;

namespace {

const BodyDomain kBall(Vec3::Zero(), 1.0);

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail << "first failure: " << what << "; ";
    pass = pass && ok;
  }
};

RunConfig base_config(const std::string& profile) {
  RunConfig cfg;
  cfg.model.profile = profile;
  cfg.numerics.seed = 1;
  return cfg;
}

oracle::Profile closed_form(const std::string& profile) {
  if (profile == "constant") return oracle::constant();
  if (profile == "monotone") return oracle::monotone();
  if (profile == "plateau") return oracle::plateau_cubic(0.5);
  return oracle::wiggle(0.125);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string pt(const Vec3& p) { return "(" + fmt(p[0]) + "," + fmt(p[1]) + "," + fmt(p[2]) + ")"; }

// 1. Monotone profile: germ fibres R^2 x o(3) off the centre.
Outcome fibres_monotone() {
  Outcome o;
  const RunConfig cfg = base_config("monotone");
  const auto model = make_model(cfg);
  const auto fp = make_fiber_params(cfg);
  oracle::Gen gen(101);
  int good = 0;
  for (int i = 0; i < 50; ++i) {
    const Vec3 x = gen.point_with_radius(0.05, 0.95);
    const auto f = germ_fiber(model, x, fp.ansatz, fp.sampler, fp.kernel);
    const bool ok = f.full.dim == 5 && f.base.dim == 2;
    good += ok;
    o.require(ok, "X=" + pt(x) + " gives " + std::to_string(f.full.dim) + "/" + std::to_string(f.base.dim));
  }
  o.detail << good << "/50 points with full 5, base 2";
  return o;
}

// 2. Plateau: R^3 x o(3) inside, R^2 x o(3) outside, two strata.
Outcome fibres_plateau() {
  Outcome o;
  const RunConfig cfg = base_config("plateau");
  const auto model = make_model(cfg);
  const auto fp = make_fiber_params(cfg);
  oracle::Gen gen(102);
  int inside = 0, outside = 0;
  for (int i = 0; i < 20; ++i) {
    const Vec3 x = gen.point_with_radius(0.0, 0.45);
    const auto f = germ_fiber(model, x, fp.ansatz, fp.sampler, fp.kernel);
    const bool ok = f.full.dim == 6 && f.base.dim == 3;
    inside += ok;
    o.require(ok, "inner X=" + pt(x));
  }
  for (int i = 0; i < 20; ++i) {
    const Vec3 x = gen.point_with_radius(0.55, 0.95);
    const auto f = germ_fiber(model, x, fp.ansatz, fp.sampler, fp.kernel);
    const bool ok = f.full.dim == 5 && f.base.dim == 2;
    outside += ok;
    o.require(ok, "outer X=" + pt(x));
  }
  o.detail << inside << "/20 inner 6/3, " << outside << "/20 outer 5/2";
  for (int n : {9, 11}) {
    const auto map = rank_map(model, GridSpec{n, cfg.numerics.grid_extent}, FiberMode::Germ, fp);
    std::vector<int> dims;
    for (const auto& s : map.strata) dims.push_back(s.base_dim);
    std::sort(dims.begin(), dims.end());
    o.require(dims == std::vector<int>{2, 3}, "grid " + std::to_string(n) + " strata");
    o.detail << ", grid " << n << ": " << map.strata.size() << " strata";
  }
  return o;
}

// 3. Leaf geometry from the traced clouds.
Outcome leaf_geometry() {
  Outcome o;
  {
    const RunConfig cfg = base_config("monotone");
    const Leaf leaf = leaf_trace(make_model(cfg), Vec3(0.5, 0, 0), make_trace_params(cfg));
    double dev = 0.0;
    for (const Vec3& p : leaf.cloud) dev = std::max(dev, std::abs(p.norm() - 0.5));
    o.require(leaf.est_dim == 2, "monotone est_dim " + std::to_string(leaf.est_dim));
    o.require(dev <= 1e-3, "monotone radial deviation " + fmt(dev));
    o.require(leaf.cloud.size() >= 2000, "monotone cloud size " + std::to_string(leaf.cloud.size()));
    o.detail << "monotone est_dim " << leaf.est_dim << ", max |r-0.5| " << fmt(dev) << " over "
             << leaf.cloud.size() << " points";
  }
  {
    const RunConfig cfg = base_config("plateau");
    const Leaf leaf = leaf_trace(make_model(cfg), Vec3(0.2, 0, 0), make_trace_params(cfg));
    double rmax = 0.0;
    for (const Vec3& p : leaf.cloud) rmax = std::max(rmax, p.norm());
    o.require(leaf.est_dim == 3, "plateau est_dim " + std::to_string(leaf.est_dim));
    o.require(rmax < 0.5 + 1e-3, "plateau max radius " + fmt(rmax));
    o.detail << "; plateau est_dim " << leaf.est_dim << ", max r " << fmt(rmax);
  }
  return o;
}

// 4. Wiggle: isomorphic where f takes equal values, not otherwise.
Outcome wiggle_isomorphism() {
  Outcome o;
  const RunConfig cfg = base_config("wiggle");
  const auto model = make_model(cfg);
  const auto fp = make_fiber_params(cfg);
  const oracle::Profile f = oracle::wiggle(0.125);
  o.require(std::abs(f.f(0.09) - f.f(0.16)) < 1e-15, "oracle f(0.09) = f(0.16)");
  const auto yes = find_material_isomorphism(model, Vec3(0.3, 0, 0), Vec3(0.4, 0, 0), fp.sampler, make_iso_options(cfg));
  const double ortho = (yes.P * yes.P.transpose() - Mat3::Identity()).norm();
  o.require(yes.found && yes.residual <= 1e-6, "0.3 -> 0.4 residual " + fmt(yes.residual));
  o.require(ortho <= 1e-5, "0.3 -> 0.4 |PP^T - I| " + fmt(ortho));
  const auto no = find_material_isomorphism(model, Vec3(0.3, 0, 0), Vec3(0.5, 0, 0), fp.sampler, make_iso_options(cfg));
  o.require(!no.found && no.residual >= 1e-3, "0.3 -> 0.5 residual " + fmt(no.residual));
  o.detail << "0.3->0.4 residual " << fmt(yes.residual) << ", |PP^T-I| " << fmt(ortho) << "; 0.3->0.5 best residual "
           << fmt(no.residual) << " after " << no.starts_tried << " starts";
  return o;
}

// Points where the closed-form regime is numerically decidable: the radial
// term 2|f'(t)||X| is either exactly zero or at least `band`.
std::vector<Vec3> decidable_points(const oracle::Profile& f, int n, std::uint64_t seed, double band) {
  oracle::Gen gen(seed);
  std::vector<Vec3> out;
  while (static_cast<int>(out.size()) < n) {
    const Vec3 x = gen.point_with_radius(0.05, 0.95);
    const double term = 2.0 * std::abs(f.df(x.squaredNorm())) * x.norm();
    if (term == 0.0 || term >= band) out.push_back(x);
  }
  return out;
}

// 5. Pointwise kernel against the closed form, and FD against analytic.
Outcome kernel_oracle() {
  Outcome o;
  double worst = 0.0, worst_fd = 0.0;
  int points = 0, fd_points = 0;
  for (const std::string profile : {"constant", "monotone", "plateau", "wiggle"}) {
    const RunConfig cfg = base_config(profile);
    const auto model = make_model(cfg);
    const auto fd = model.without_analytic_derivative();
    const auto fp = make_fiber_params(cfg);
    const oracle::Profile f = closed_form(profile);
    for (const Vec3& x : decidable_points(f, 50, 500, 1e-4)) {
      const auto k = pointwise_kernel(model, x, fp.sampler, fp.kernel);
      const double angle = std::asin(std::min(1.0, oracle::subspace_gap(oracle::radial_kernel(f, x), k.full.basis)));
      worst = std::max(worst, angle);
      ++points;
      o.require(angle <= 1e-6, profile + " X=" + pt(x) + " angle " + fmt(angle));
    }
    for (const Vec3& x : decidable_points(f, 50, 600, 1e-2)) {
      const auto a = pointwise_kernel(model, x, fp.sampler, fp.kernel);
      const auto b = pointwise_kernel(fd, x, fp.sampler, fp.kernel);
      o.require(a.full.dim == b.full.dim && a.base.dim == b.base.dim, profile + " FD dimension at X=" + pt(x));
      const double angle = std::asin(std::min(1.0, oracle::subspace_gap(a.full.basis, b.full.basis)));
      worst_fd = std::max(worst_fd, angle);
      ++fd_points;
      o.require(angle <= 1e-4, profile + " FD angle " + fmt(angle));
    }
  }
  o.detail << points << " points, max angle " << fmt(worst) << "; FD " << fd_points << " points, max angle "
           << fmt(worst_fd);
  return o;
}

// 6. Groupoid laws on composable tuples.
Outcome groupoid_laws() {
  Outcome o;
  oracle::Gen gen(606);
  double worst = 0.0;
  auto jet_from = [&](const Vec3& source) { return Jet1(source, gen.point_in_ball(0.95), gen.matrix()); };
  for (int i = 0; i < 1000; ++i) {
    const Jet1 k = jet_from(gen.point_in_ball(0.95));
    const Jet1 h = jet_from(k.target());
    const Jet1 g = jet_from(h.target());
    const Jet1 l = compose(g, compose(h, k));
    const Jet1 r = compose(compose(g, h), k);
    o.require(l.source() == r.source() && l.target() == r.target(), "associativity points");
    worst = std::max(worst, (l.F() - r.F()).cwiseAbs().maxCoeff());

    const Jet1 gh = compose(g, h);
    const auto [a, b] = anchor(gh);
    o.require(a == h.source() && b == g.target(), "anchor of a product");

    const Jet1 ri = compose(g, identity(kBall, g.source()));
    const Jet1 li = compose(identity(kBall, g.target()), g);
    o.require(ri.source() == g.source() && li.target() == g.target(), "identity points");
    worst = std::max({worst, (ri.F() - g.F()).cwiseAbs().maxCoeff(), (li.F() - g.F()).cwiseAbs().maxCoeff()});

    const Jet1 gi = invert(g);
    const Jet1 e1 = compose(gi, g);
    const Jet1 e2 = compose(g, gi);
    o.require(e1.source() == g.source() && e1.target() == g.source() && e2.source() == g.target() &&
                  e2.target() == g.target(),
              "inverse points");
    worst = std::max({worst, (e1.F() - Mat3::Identity()).cwiseAbs().maxCoeff(),
                      (e2.F() - Mat3::Identity()).cwiseAbs().maxCoeff()});
  }
  o.require(worst <= 1e-12, "max entry deviation " + fmt(worst));
  o.detail << "1000 tuples, max entry deviation " << fmt(worst);
  return o;
}

// 7. Replayed-control equivariance and fixed targets of characteristic leaves.
Outcome equivariance() {
  Outcome o;
  const RunConfig cfg = base_config("monotone");
  const auto model = make_model(cfg);
  CharTraceParams cp;
  cp.trace = make_trace_params(cfg);
  cp.trace.n_steps = 100;
  oracle::Gen gen(707);
  double worst = 0.0;
  std::size_t jets = 0;
  bool beta = true;
  for (int i = 0; i < 10; ++i) {
    const Jet1 h(gen.point_in_ball(0.8), gen.point_in_ball(0.9), gen.matrix());
    const Jet1 g(h.target(), gen.point_in_ball(0.9), gen.matrix());
    cp.trace.seed = 1000 + static_cast<std::uint64_t>(i);
    const CharLeaf from_h = char_leaf_trace(model, h, cp);
    const CharLeaf moved = left_translate_leaf(g, from_h);
    const CharLeaf from_gh = char_leaf_trace(model, compose(g, h), cp, from_h.controls);
    o.require(moved.cloud.size() == from_gh.cloud.size(), "cloud sizes differ in pair " + std::to_string(i));
    for (std::size_t k = 0; k < std::min(moved.cloud.size(), from_gh.cloud.size()); ++k) {
      const Jet1& p = moved.cloud[k];
      const Jet1& q = from_gh.cloud[k];
      worst = std::max({worst, (p.source() - q.source()).cwiseAbs().maxCoeff(),
                        (p.target() - q.target()).cwiseAbs().maxCoeff(), (p.F() - q.F()).cwiseAbs().maxCoeff()});
    }
    for (const CharLeaf* leaf : {&from_h, &from_gh}) {
      for (const Jet1& j : leaf->cloud) beta = beta && j.target() == leaf->target_point;
      jets += leaf->cloud.size();
    }
  }
  o.require(worst <= 1e-6, "per-entry deviation " + fmt(worst));
  o.require(beta, "a traced jet changed its target");
  o.detail << "10 pairs, max per-entry deviation " << fmt(worst) << "; " << jets << " jets with exact targets";
  return o;
}

// 8. Uniformity verdicts and smooth uniformity of every leaf.
Outcome uniformity() {
  Outcome o;
  for (const std::string profile : {"constant", "monotone", "plateau", "wiggle"}) {
    const RunConfig cfg = base_config(profile);
    const auto model = make_model(cfg);
    const auto rep = decompose(model, make_decompose_params(cfg));
    int flagged = 0;
    for (const auto& l : rep.leaves) flagged += l.smoothly_uniform;
    o.require(flagged == static_cast<int>(rep.leaves.size()), profile + " has a leaf not smoothly uniform");
    o.detail << profile << ": " << rep.leaves.size() << " leaves, " << flagged << " smoothly uniform, uniform "
             << (rep.uniformity.uniform ? "true" : "false");
    if (profile == "constant") {
      o.require(rep.uniformity.uniform, "constant profile not uniform");
    } else if (profile == "monotone" || profile == "plateau") {
      o.require(!rep.uniformity.uniform, profile + " reported uniform");
      o.require(rep.uniformity.witness.has_value(), profile + " has no witness");
      if (rep.uniformity.witness) {
        // Best residual over orthogonal P: |f(X) - f(Y)| max |F F^T - I|.
        const oracle::Profile f = closed_form(profile);
        const auto& w = *rep.uniformity.witness;
        const FiberParams fp = make_fiber_params(cfg);
        double scale = 0.0;
        for (const Mat3& F : fp.sampler.samples()) {
          scale = std::max(scale, (F * F.transpose() - Mat3::Identity()).norm());
        }
        const double closed = std::abs(f.f(w.from.squaredNorm()) - f.f(w.to.squaredNorm())) * scale;
        o.require(closed > cfg.numerics.accept_tol, profile + " witness residual " + fmt(closed));
        o.detail << ", witness residual " << fmt(closed);
      }
    }
    o.detail << "; ";
  }
  return o;
}

// 9. Byte-identical reports across runs.
Outcome determinism() {
  Outcome o;
  const RunConfig cfg = base_config("monotone");
  const std::string v1 = cli::cmd_verify(cfg).report.dump(2);
  const std::string v2 = cli::cmd_verify(cfg).report.dump(2);
  const std::string d1 = cli::cmd_decompose(cfg).report.dump(2);
  const std::string d2 = cli::cmd_decompose(cfg).report.dump(2);
  o.require(v1 == v2, "verify reports differ");
  o.require(d1 == d2, "decompose reports differ");
  o.detail << "verify " << v1.size() << " bytes " << (v1 == v2 ? "identical" : "different") << ", decompose "
           << d1.size() << " bytes " << (d1 == d2 ? "identical" : "different");
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"fibre dimensions, monotone profile", fibres_monotone},
      {"fibre dimensions and strata, plateau profile", fibres_plateau},
      {"leaf geometry", leaf_geometry},
      {"material isomorphisms, wiggle profile", wiggle_isomorphism},
      {"analytic kernel oracle", kernel_oracle},
      {"groupoid laws", groupoid_laws},
      {"leaf equivariance and fixed targets", equivariance},
      {"uniformity verdicts", uniformity},
      {"determinism of reports", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "exception: " << e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << i + 1 << ": " << criteria[i].first << " ["
              << o.detail.str() << "] (" << fmt(secs) << " s)" << std::endl;
  }
  std::cout << (failed == 0 ? "all acceptance criteria passed" : std::to_string(failed) + " criteria failed")
            << std::endl;
  return failed == 0 ? 0 : 1;
}
