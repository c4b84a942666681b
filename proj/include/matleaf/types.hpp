// Core value types and the error type shared by every matleaf module.
#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace matleaf {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

/// Direction space R^3 (+) gl(3), flattened as (v0,v1,v2, lam row-major).
inline constexpr int kDirDim = 12;
using Vec12 = Eigen::Matrix<double, kDirDim, 1>;

enum class ErrorKind {
  OutsideDomain,
  NotComposable,
  SingularJet,
  NonFinite,
  RankUnstable,
  SingularCandidate,
  StepOutsideBody,
  AnchorMismatch,
  InvalidArgument,
  InvalidConfig,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::OutsideDomain: return "OutsideDomain";
    case ErrorKind::NotComposable: return "NotComposable";
    case ErrorKind::SingularJet: return "SingularJet";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::RankUnstable: return "RankUnstable";
    case ErrorKind::SingularCandidate: return "SingularCandidate";
    case ErrorKind::StepOutsideBody: return "StepOutsideBody";
    case ErrorKind::AnchorMismatch: return "AnchorMismatch";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Exact coordinate equality; composability never uses a tolerance.
inline bool same_point(const Vec3& a, const Vec3& b) {
  return a[0] == b[0] && a[1] == b[1] && a[2] == b[2];
}

inline bool all_finite(const Eigen::Ref<const MatX>& m) { return m.allFinite(); }

}  // namespace matleaf
