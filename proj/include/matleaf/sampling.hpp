// Seeded samplers: deformation gradients, points in balls, rotations.
#pragma once

#include "matleaf/types.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace matleaf {

/// Finite stand-in for "every deformation gradient F": entries uniform in
/// [-1, 1], rejected unless |det F| >= 0.1.
class FSampler {
 public:
  static constexpr int kMinCount = 4;
  static constexpr double kMinDet = 0.1;

  explicit FSampler(int count = 6, std::uint64_t seed = 1) : count_(count), seed_(seed) {
    if (count_ < kMinCount) throw Error(ErrorKind::InvalidArgument, "F sampler needs count >= 4");
    std::mt19937_64 rng(seed_);
    samples_.reserve(static_cast<std::size_t>(count_));
    while (static_cast<int>(samples_.size()) < count_) samples_.push_back(draw(rng));
  }

  /// One deformation gradient from the sampler's distribution.
  static Mat3 draw(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> entry(-1.0, 1.0);
    for (;;) {
      Mat3 F;
      for (int k = 0; k < 9; ++k) F(k / 3, k % 3) = entry(rng);
      if (std::abs(F.determinant()) >= kMinDet) return F;
    }
  }

  int count() const noexcept { return count_; }
  std::uint64_t seed() const noexcept { return seed_; }
  const std::vector<Mat3>& samples() const noexcept { return samples_; }

  /// Same seed, twice the count; the first `count()` samples coincide.
  FSampler doubled() const { return FSampler(2 * count_, seed_); }

 private:
  int count_;
  std::uint64_t seed_;
  std::vector<Mat3> samples_;
};

inline Vec3 random_unit_vector(std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  for (;;) {
    Vec3 v(normal(rng), normal(rng), normal(rng));
    const double n = v.norm();
    if (n > 1e-8) return v / n;
  }
}

inline VecX random_unit_vector(std::mt19937_64& rng, int dim) {
  std::normal_distribution<double> normal;
  for (;;) {
    VecX v(dim);
    for (int i = 0; i < dim; ++i) v[i] = normal(rng);
    const double n = v.norm();
    if (n > 1e-8) return v / n;
  }
}

/// Uniform sample in the ball of radius `radius` about `center`.
inline Vec3 random_point_in_ball(std::mt19937_64& rng, const Vec3& center, double radius) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (;;) {
    Vec3 p(unit(rng), unit(rng), unit(rng));
    if (p.squaredNorm() < 1.0) return center + radius * p;
  }
}

/// Haar-ish random orthogonal matrix (QR of a Gaussian matrix, sign-fixed).
inline Mat3 random_orthogonal(std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Mat3 A;
  for (int k = 0; k < 9; ++k) A(k / 3, k % 3) = normal(rng);
  Eigen::HouseholderQR<Mat3> qr(A);
  Mat3 Q = qr.householderQ();
  const Mat3 R = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int i = 0; i < 3; ++i) {
    if (R(i, i) < 0.0) Q.col(i) *= -1.0;
  }
  return Q;
}

inline Mat3 axis_rotation(int axis, double angle) {
  return Eigen::AngleAxisd(angle, Vec3::Unit(axis)).toRotationMatrix();
}

inline Mat3 skew(const Vec3& w) {
  Mat3 S;
  S << 0.0, -w[2], w[1], w[2], 0.0, -w[0], -w[1], w[0], 0.0;
  return S;
}

}  // namespace matleaf
