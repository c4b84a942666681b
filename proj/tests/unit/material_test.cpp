#include "matleaf/material.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

using namespace matleaf;

namespace {

const BodyDomain kBall(Vec3::Zero(), 1.0);
const FSampler kSampler(6, 11);

}  // namespace

TEST(Material, StretchIsNotASymmetry) {
  const auto model = ResponseModel::radial(kBall, ScalarProfile::monotone());
  Mat3 Q = Mat3::Identity();
  Q(0, 0) = 2.0;
  EXPECT_FALSE(symmetry_check(model, Vec3(0.5, 0, 0), Q, kSampler, 1e-6).is_isomorphism);
}

TEST(MaterialProperty, RotationsAndReflectionsAreSymmetries) {
  oracle::Gen gen(3);
  for (const auto& profile : {ScalarProfile::monotone(), ScalarProfile::plateau(0.5), ScalarProfile::wiggle(0.125)}) {
    const auto model = ResponseModel::radial(kBall, profile);
    for (int i = 0; i < 50; ++i) {
      Mat3 Q = gen.rotation();
      if (i % 2) Q.col(1) *= -1.0;
      const auto chk = symmetry_check(model, gen.point_in_ball(0.9), Q, kSampler, 1e-6);
      EXPECT_TRUE(chk.is_isomorphism);
      EXPECT_LE(chk.residual, 1e-12);
    }
  }
}

TEST(Material, ResidualMatchesClosedForm) {
  // With P = I the mismatch is |f(x) - f(y)| |F F^T - I|.
  const auto model = ResponseModel::radial(kBall, ScalarProfile::monotone());
  const Vec3 x(0.3, 0, 0), y(0, 0.6, 0);
  double expected = 0.0;
  for (const Mat3& F : kSampler.samples()) {
    expected = std::max(expected, std::abs(0.09 - 0.36) * (F * F.transpose() - Mat3::Identity()).norm());
  }
  EXPECT_NEAR(is_material_isomorphism(model, Jet1(x, y, Mat3::Identity()), kSampler, 1e-6).residual, expected,
              1e-13);
}

TEST(Material, FindsIsomorphismOnSphere) {
  const auto model = ResponseModel::radial(kBall, ScalarProfile::monotone());
  const auto res = find_material_isomorphism(model, Vec3(0.5, 0, 0), Vec3(0, 0, 0.5), kSampler);
  ASSERT_TRUE(res.found);
  EXPECT_LE(res.residual, 1e-6);
  EXPECT_LE((res.P * res.P.transpose() - Mat3::Identity()).norm(), 1e-5);
}

TEST(Material, IdentityPreferredAtSamePoint) {
  const auto model = ResponseModel::radial(kBall, ScalarProfile::monotone());
  const auto res = find_material_isomorphism(model, Vec3(0.5, 0, 0), Vec3(0.5, 0, 0), kSampler);
  ASSERT_TRUE(res.found);
  EXPECT_LE((res.P - Mat3::Identity()).norm(), 1e-6);
}

TEST(Material, WiggleEqualValuesAreIsomorphic) {
  const auto model = ResponseModel::radial(kBall, ScalarProfile::wiggle(0.125));
  const auto yes = find_material_isomorphism(model, Vec3(0.3, 0, 0), Vec3(0.4, 0, 0), kSampler);
  EXPECT_TRUE(yes.found);
  const auto no = find_material_isomorphism(model, Vec3(0.3, 0, 0), Vec3(0.5, 0, 0), kSampler);
  EXPECT_FALSE(no.found);
  EXPECT_GE(no.residual, 1e-3);
  EXPECT_EQ(no.starts_tried, 8);
}

TEST(Material, SearchStartsAreDeterministic) {
  const auto a = iso_search_starts({});
  const auto b = iso_search_starts({});
  ASSERT_EQ(a.size(), 8u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i], b[i]);
    EXPECT_LE((a[i] * a[i].transpose() - Mat3::Identity()).norm(), 1e-12);
  }
}

TEST(MaterialProperty, ClosureUnderCompositionAndInverse) {
  oracle::Gen gen(41);
  const auto model = ResponseModel::radial(kBall, ScalarProfile::wiggle(0.125));
  for (int i = 0; i < 5; ++i) {
    const Vec3 a = gen.point_in_ball(0.9);
    const Vec3 b = gen.rotation() * a;
    const Vec3 c = gen.rotation() * a;
    const auto P = find_material_isomorphism(model, a, b, kSampler);
    const auto R = find_material_isomorphism(model, b, c, kSampler);
    ASSERT_TRUE(P.found && R.found);
    const Jet1 comp = compose(Jet1(b, c, R.P), Jet1(a, b, P.P));
    EXPECT_TRUE(is_material_isomorphism(model, comp, kSampler, 2e-6).is_isomorphism);
    EXPECT_TRUE(is_material_isomorphism(model, invert(Jet1(a, b, P.P)), kSampler, 2e-6).is_isomorphism);
  }
}

TEST(MaterialProperty, MoreSamplesNeverLowerResidual) {
  oracle::Gen gen(42);
  const auto model = ResponseModel::radial(kBall, ScalarProfile::monotone());
  for (int i = 0; i < 30; ++i) {
    const Jet1 P(gen.point_in_ball(0.9), gen.point_in_ball(0.9), gen.matrix());
    EXPECT_GE(is_material_isomorphism(model, P, kSampler.doubled(), 1.0).residual,
              is_material_isomorphism(model, P, kSampler, 1.0).residual);
  }
}

TEST(Material, GridPointsStayInsideExtent) {
  const auto pts = grid_points(kBall, GridSpec{7, 0.9});
  EXPECT_EQ(pts.size(), 123u);
  for (const Vec3& p : pts) EXPECT_LT(p.norm(), 0.9 + 1e-12);
}

TEST(Material, UniformityVerdicts) {
  const GridSpec grid{3, 0.9};
  const auto constant = uniformity_report(ResponseModel::radial(kBall, ScalarProfile::constant()), grid, kSampler);
  EXPECT_TRUE(constant.uniform);
  EXPECT_FALSE(constant.witness.has_value());

  const auto monotone = uniformity_report(ResponseModel::radial(kBall, ScalarProfile::monotone()), grid, kSampler);
  EXPECT_FALSE(monotone.uniform);
  ASSERT_TRUE(monotone.witness.has_value());
  EXPECT_GT(std::abs(monotone.witness->from.squaredNorm() - monotone.witness->to.squaredNorm()), 1e-6);
}

TEST(Material, NonPositiveToleranceRejected) {
  const auto model = ResponseModel::radial(kBall, ScalarProfile::monotone());
  EXPECT_THROW(symmetry_check(model, Vec3(0.1, 0, 0), Mat3::Identity(), kSampler, 0.0), Error);
}
