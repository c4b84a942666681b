#include "matleaf/foliation.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

using namespace matleaf;

namespace {

const BodyDomain kBall(Vec3::Zero(), 1.0);

ResponseModel monotone() { return ResponseModel::radial(kBall, ScalarProfile::monotone()); }
ResponseModel plateau() { return ResponseModel::radial(kBall, ScalarProfile::plateau(0.5)); }

TraceParams short_trace(int steps, std::uint64_t seed = 1) {
  TraceParams tp;
  tp.n_steps = steps;
  tp.seed = seed;
  return tp;
}

}  // namespace

TEST(Rk4, ExactForCubicPolynomialFlow) {
  // y' = 3 t^2 written autonomously as (y, t)' = (3 t^2, 1).
  using S = Eigen::Vector2d;
  const S y = rk4_step(S(0.0, 0.0), 0.5, [](const S& s) { return S(3 * s[1] * s[1], 1.0); });
  EXPECT_NEAR(y[0], 0.125, 1e-15);
}

TEST(Rk4, FourthOrderOnRotation) {
  using S = Eigen::Vector2d;
  auto field = [](const S& s) { return S(-s[1], s[0]); };
  double errs[2];
  for (int k = 0; k < 2; ++k) {
    const int n = 50 * (k + 1);
    S y(1, 0);
    for (int i = 0; i < n; ++i) y = rk4_step(y, 1.0 / n, field);
    errs[k] = (y - S(std::cos(1.0), std::sin(1.0))).norm();
  }
  EXPECT_NEAR(errs[0] / errs[1], 16.0, 1.0);
}

TEST(LeafDimension, RecoversSyntheticClouds) {
  oracle::Gen gen(3);
  std::vector<Vec3> line, plane, ball;
  for (int i = 0; i < 400; ++i) {
    line.push_back(Vec3(gen.uniform(-1, 1), 0, 0));
    plane.push_back(Vec3(gen.uniform(-1, 1), gen.uniform(-1, 1), 0));
    ball.push_back(gen.point_in_ball(1.0));
  }
  EXPECT_EQ(estimate_leaf_dimension(line, 15, 1e-3), 1);
  EXPECT_EQ(estimate_leaf_dimension(plane, 15, 1e-3), 2);
  EXPECT_EQ(estimate_leaf_dimension(ball, 15, 1e-3), 3);
  EXPECT_EQ(estimate_leaf_dimension({Vec3::Zero()}, 15, 1e-3), 0);
}

TEST(LeafTrace, MonotoneStaysOnSphere) {
  const Leaf leaf = leaf_trace(monotone(), Vec3(0.5, 0, 0), short_trace(300));
  EXPECT_EQ(leaf.est_dim, 2);
  EXPECT_EQ(leaf.cloud.front(), Vec3(0.5, 0, 0));
  ASSERT_TRUE(leaf.invariant_label.has_value());
  EXPECT_NEAR(*leaf.invariant_label, 0.5, 1e-3);
  for (const Vec3& p : leaf.cloud) EXPECT_LE(std::abs(p.norm() - 0.5), 1e-3);
}

TEST(LeafTrace, PlateauInteriorIsThreeDimensional) {
  const Leaf leaf = leaf_trace(plateau(), Vec3(0.2, 0, 0), short_trace(300));
  EXPECT_EQ(leaf.est_dim, 3);
  for (const Vec3& p : leaf.cloud) EXPECT_LT(p.norm(), 0.5 + 1e-3);
}

TEST(LeafTrace, CollapsedFibreGivesPointLeaf) {
  const Leaf leaf = leaf_trace(monotone(), Vec3::Zero(), short_trace(100));
  EXPECT_TRUE(leaf.collapsed);
  EXPECT_EQ(leaf.est_dim, 0);
  ASSERT_EQ(leaf.cloud.size(), 1u);
  EXPECT_EQ(leaf.cloud[0], Vec3::Zero());
}

TEST(LeafTrace, ReplayIsExact) {
  const Leaf a = leaf_trace(monotone(), Vec3(0.3, 0.2, 0), short_trace(60, 5));
  const Leaf b = leaf_trace(monotone(), Vec3(0.3, 0.2, 0), short_trace(60, 99), a.controls);
  ASSERT_EQ(a.cloud.size(), b.cloud.size());
  for (std::size_t i = 0; i < a.cloud.size(); ++i) EXPECT_EQ(a.cloud[i], b.cloud[i]);
}

TEST(LeafTrace, OutsideBodyThrows) {
  EXPECT_THROW(leaf_trace(monotone(), Vec3(1.5, 0, 0), short_trace(10)), Error);
}

TEST(CharTrace, TargetFixedAndRotationsPreserved) {
  CharTraceParams cp;
  cp.trace = short_trace(100);
  const Vec3 x(0.5, 0, 0);
  const CharLeaf leaf = char_leaf_trace(monotone(), identity(kBall, x), cp);
  EXPECT_EQ(leaf.target_point, x);
  for (const Jet1& g : leaf.cloud) {
    EXPECT_EQ(g.target(), x);
    EXPECT_NEAR(g.source().norm(), 0.5, 1e-3);
    EXPECT_LE((g.F() * g.F().transpose() - Mat3::Identity()).norm(), 1e-4);
  }
}

TEST(CharTrace, FrozenModelGivesSingleJet) {
  CharTraceParams cp;
  cp.trace = short_trace(50);
  cp.move_base = false;
  cp.move_isotropy = false;
  const Jet1 g0 = identity(kBall, Vec3(0.1, 0, 0));
  const CharLeaf leaf = char_leaf_trace(ResponseModel::radial(kBall, ScalarProfile::constant()), g0, cp);
  ASSERT_EQ(leaf.cloud.size(), 1u);
  EXPECT_EQ(leaf.cloud[0].source(), g0.source());
}

TEST(CharTrace, IsotropyTraceStaysAtPoint) {
  CharTraceParams cp;
  cp.trace = short_trace(50);
  cp.move_base = false;
  const Vec3 x(0.2, 0.3, 0);
  const CharLeaf leaf = char_leaf_trace(monotone(), identity(kBall, x), cp);
  EXPECT_GT(leaf.cloud.size(), 1u);
  for (const Jet1& g : leaf.cloud) {
    EXPECT_EQ(g.source(), x);
    EXPECT_EQ(g.target(), x);
  }
}

TEST(CharTraceProperty, EquivarianceUnderLeftTranslation) {
  oracle::Gen gen(77);
  CharTraceParams cp;
  cp.trace = short_trace(30);
  for (int i = 0; i < 4; ++i) {
    const Jet1 h(gen.point_in_ball(0.8), gen.point_in_ball(0.9), gen.matrix());
    const Jet1 g(h.target(), gen.point_in_ball(0.9), gen.matrix());
    cp.trace.seed = 10 + i;
    const CharLeaf lh = char_leaf_trace(monotone(), h, cp);
    const CharLeaf moved = left_translate_leaf(g, lh);
    const CharLeaf lgh = char_leaf_trace(monotone(), compose(g, h), cp, lh.controls);
    EXPECT_EQ(moved.target_point, g.target());
    ASSERT_EQ(moved.cloud.size(), lgh.cloud.size());
    for (std::size_t k = 0; k < moved.cloud.size(); ++k) {
      EXPECT_LE((moved.cloud[k].source() - lgh.cloud[k].source()).cwiseAbs().maxCoeff(), 1e-6);
      EXPECT_LE((moved.cloud[k].F() - lgh.cloud[k].F()).cwiseAbs().maxCoeff(), 1e-6);
    }
  }
}

TEST(CharTrace, TranslateByIdentityIsNoOp) {
  CharTraceParams cp;
  cp.trace = short_trace(20);
  const Vec3 x(0.4, 0, 0);
  const CharLeaf leaf = char_leaf_trace(monotone(), identity(kBall, x), cp);
  const CharLeaf same = left_translate_leaf(identity(kBall, x), leaf);
  ASSERT_EQ(same.cloud.size(), leaf.cloud.size());
  for (std::size_t k = 0; k < leaf.cloud.size(); ++k) EXPECT_EQ(same.cloud[k].F(), leaf.cloud[k].F());
}

TEST(CharTrace, TranslateRejectsAnchorMismatch) {
  CharTraceParams cp;
  cp.trace = short_trace(5);
  const CharLeaf leaf = char_leaf_trace(monotone(), identity(kBall, Vec3(0.4, 0, 0)), cp);
  try {
    left_translate_leaf(identity(kBall, Vec3(0.1, 0, 0)), leaf);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::AnchorMismatch);
  }
}

TEST(Decompose, MonotoneSpheres) {
  DecomposeParams dp;
  dp.seeds = GridSpec{5, 0.9};
  dp.trace = short_trace(200);
  dp.sample_beta_fibres = false;
  const auto rep = decompose(monotone(), dp);
  ASSERT_FALSE(rep.leaves.empty());
  for (const auto& l : rep.leaves) {
    if (l.seed.norm() < 0.05) continue;
    EXPECT_EQ(l.est_dim, 2);
    EXPECT_EQ(l.isotropy_dim, 3);
    EXPECT_EQ(l.groupoid_dim, 7);
    ASSERT_TRUE(l.label.has_value());
    EXPECT_TRUE(l.smoothly_uniform);
  }
  for (std::size_t i = 0; i < rep.points.size(); ++i) {
    const auto& l = rep.leaves[static_cast<std::size_t>(rep.assignment[i])];
    if (l.label) EXPECT_NEAR(rep.points[i].norm(), *l.label, 5e-3);
  }
  EXPECT_FALSE(rep.uniformity.uniform);
}
