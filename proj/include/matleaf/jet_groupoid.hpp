// The 1-jet groupoid of a single-chart body: arrows are (source, target, F)
// with F the invertible Jacobian in chart coordinates.
#pragma once

#include "matleaf/types.hpp"

#include <cmath>
#include <sstream>
#include <utility>

namespace matleaf {

inline constexpr double kMinJetDet = 1e-12;

/// Open ball in chart coordinates.
class BodyDomain {
 public:
  BodyDomain() = default;
  BodyDomain(Vec3 center, double radius) : center_(std::move(center)), radius_(radius) {
    if (!(radius > 0.0) || !std::isfinite(radius) || !center_.allFinite()) {
      throw Error(ErrorKind::InvalidArgument, "body radius must be positive and finite");
    }
  }

  const Vec3& center() const noexcept { return center_; }
  double radius() const noexcept { return radius_; }

  bool contains(const Vec3& x) const { return (x - center_).norm() < radius_; }

  /// Distance from x to the boundary sphere (negative outside).
  double clearance(const Vec3& x) const { return radius_ - (x - center_).norm(); }

  void require(const Vec3& x) const {
    if (!x.allFinite() || !contains(x)) {
      std::ostringstream os;
      os << "point (" << x[0] << ", " << x[1] << ", " << x[2] << ") is outside the body";
      throw Error(ErrorKind::OutsideDomain, os.str());
    }
  }

 private:
  Vec3 center_ = Vec3::Zero();
  double radius_ = 1.0;
};

/// A 1-jet j^1 phi from `source` to `target`; `F` is D phi(source).
class Jet1 {
 public:
  Jet1(Vec3 source, Vec3 target, Mat3 F)
      : source_(std::move(source)), target_(std::move(target)), F_(std::move(F)) {
    if (!source_.allFinite() || !target_.allFinite() || !F_.allFinite()) {
      throw Error(ErrorKind::NonFinite, "jet coordinates must be finite");
    }
    if (!(std::abs(F_.determinant()) > kMinJetDet)) {
      throw Error(ErrorKind::SingularJet, "jet matrix is singular");
    }
  }

  /// Builds a jet and checks both endpoints against the body.
  static Jet1 in_body(const BodyDomain& body, const Vec3& source, const Vec3& target,
                      const Mat3& F) {
    body.require(source);
    body.require(target);
    return Jet1(source, target, F);
  }

  const Vec3& source() const noexcept { return source_; }
  const Vec3& target() const noexcept { return target_; }
  const Mat3& F() const noexcept { return F_; }

 private:
  Vec3 source_;
  Vec3 target_;
  Mat3 F_;
};

/// Value at an identity of a left-invariant field: base velocity v and jet
/// velocity lam in gl(3).
struct LeftInvariantDirection {
  Vec3 v = Vec3::Zero();
  Mat3 lam = Mat3::Zero();

  Vec12 to_vector() const {
    Vec12 out;
    out.head<3>() = v;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) out[3 + 3 * i + j] = lam(i, j);
    return out;
  }

  static LeftInvariantDirection from_vector(const Eigen::Ref<const VecX>& w) {
    LeftInvariantDirection d;
    d.v = w.head<3>();
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) d.lam(i, j) = w[3 + 3 * i + j];
    return d;
  }
};

inline Jet1 identity(const BodyDomain& body, const Vec3& x) {
  body.require(x);
  return Jet1(x, x, Mat3::Identity());
}

/// g . h, defined when source(g) == target(h) exactly.
inline Jet1 compose(const Jet1& g, const Jet1& h) {
  if (!same_point(g.source(), h.target())) {
    throw Error(ErrorKind::NotComposable, "source(g) != target(h)");
  }
  return Jet1(h.source(), g.target(), g.F() * h.F());
}

inline Jet1 invert(const Jet1& g) {
  if (!(std::abs(g.F().determinant()) > kMinJetDet)) {
    throw Error(ErrorKind::SingularJet, "cannot invert a singular jet");
  }
  return Jet1(g.target(), g.source(), g.F().inverse());
}

/// L_g : beta^{-1}(alpha(g)) -> beta^{-1}(beta(g)).
inline Jet1 left_translate(const Jet1& g, const Jet1& h) {
  if (!same_point(h.target(), g.source())) {
    throw Error(ErrorKind::AnchorMismatch, "h is not in the target fibre over source(g)");
  }
  return compose(g, h);
}

/// (alpha, beta) = (source, target).
inline std::pair<Vec3, Vec3> anchor(const Jet1& g) { return {g.source(), g.target()}; }

}  // namespace matleaf
