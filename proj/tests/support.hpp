// Test-side oracles and generators, written against the closed forms rather
// than library internals.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <random>

namespace oracle {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using MatX = Eigen::MatrixXd;

struct Profile {
  std::function<double(double)> f;
  std::function<double(double)> df;
};

inline Profile constant() { return {[](double) { return 1.0; }, [](double) { return 0.0; }}; }
inline Profile monotone() { return {[](double t) { return 1.0 + t; }, [](double) { return 1.0; }}; }
inline Profile wiggle(double c) {
  return {[c](double t) { return (t - c) * (t - c) + 1.0; }, [c](double t) { return 2.0 * (t - c); }};
}
inline Profile plateau_cubic(double s) {
  const double s2 = s * s;
  return {[s2](double t) { return t <= s2 ? 1.0 : 1.0 + std::pow(t - s2, 3); },
          [s2](double t) { return t <= s2 ? 0.0 : 3.0 * (t - s2) * (t - s2); }};
}

inline Mat3 W(const Profile& p, const Vec3& x, const Mat3& F) {
  return p.f(x.squaredNorm()) * (F * F.transpose() - Mat3::Identity());
}

/// Kernel of (v, lam) -> d/dt W(x + t v, F(I + t lam)) for every F:
/// v orthogonal to x when f'(|x|^2) x != 0, lam skew when f != 0.
inline MatX radial_kernel(const Profile& p, const Vec3& x) {
  const double t = x.squaredNorm();
  MatX cols(12, 0);
  auto push = [&](const Eigen::Matrix<double, 12, 1>& w) {
    cols.conservativeResize(Eigen::NoChange, cols.cols() + 1);
    cols.col(cols.cols() - 1) = w;
  };
  const bool constrained = p.df(t) != 0.0 && x.norm() > 0.0;
  // v-part: an orthonormal basis of x-perp or of R^3.
  if (constrained) {
    const Vec3 n = x.normalized();
    Vec3 a = std::abs(n[0]) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
    const Vec3 e1 = (a - n * n.dot(a)).normalized();
    const Vec3 e2 = n.cross(e1);
    for (const Vec3& e : {e1, e2}) {
      Eigen::Matrix<double, 12, 1> w = Eigen::Matrix<double, 12, 1>::Zero();
      w.head<3>() = e;
      push(w);
    }
  } else {
    for (int i = 0; i < 3; ++i) push(Eigen::Matrix<double, 12, 1>::Unit(i));
  }
  const double r = 1.0 / std::sqrt(2.0);
  for (auto [i, j] : {std::pair{0, 1}, std::pair{0, 2}, std::pair{1, 2}}) {
    Eigen::Matrix<double, 12, 1> w = Eigen::Matrix<double, 12, 1>::Zero();
    w[3 + 3 * i + j] = r;
    w[3 + 3 * j + i] = -r;
    push(w);
  }
  return cols;
}

/// sin of the largest principal angle between column spans of orthonormal
/// A and B (1 when the dimensions differ).
inline double subspace_gap(const MatX& A, const MatX& B) {
  if (A.cols() != B.cols()) return 1.0;
  if (A.cols() == 0) return 0.0;
  const MatX r = B - A * (A.transpose() * B);
  return Eigen::JacobiSVD<MatX>(r).singularValues()[0];
}

struct Gen {
  std::mt19937_64 rng;
  explicit Gen(std::uint64_t seed) : rng(seed) {}

  double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); }

  Vec3 point_in_ball(double radius) {
    for (;;) {
      Vec3 p(uniform(-1, 1), uniform(-1, 1), uniform(-1, 1));
      if (p.norm() < 1.0) return radius * p;
    }
  }

  Vec3 point_with_radius(double lo, double hi) {
    Vec3 d(uniform(-1, 1), uniform(-1, 1), uniform(-1, 1));
    while (d.norm() < 1e-3) d = Vec3(uniform(-1, 1), uniform(-1, 1), uniform(-1, 1));
    return uniform(lo, hi) * d.normalized();
  }

  Mat3 matrix(double min_det = 0.1) {
    for (;;) {
      Mat3 m;
      for (int k = 0; k < 9; ++k) m(k / 3, k % 3) = uniform(-1, 1);
      if (std::abs(m.determinant()) >= min_det) return m;
    }
  }

  Mat3 rotation() {
    Eigen::HouseholderQR<Mat3> qr(matrix());
    Mat3 q = qr.householderQ();
    if (q.determinant() < 0) q.col(0) *= -1.0;
    return q;
  }
};

}  // namespace oracle
