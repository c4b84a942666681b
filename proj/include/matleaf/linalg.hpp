// Subspace utilities: SVD nullspaces, orthonormal ranges, principal angles.
#pragma once

#include "matleaf/types.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace matleaf {

/// Orthonormal basis (columns of `basis`) of a subspace of R^ambient_dim.
struct SubspaceBasis {
  int ambient_dim = 0;
  int dim = 0;
  MatX basis;
  double tol_used = 0.0;
  std::vector<double> singular_values;

  static SubspaceBasis empty(int ambient) {
    SubspaceBasis s;
    s.ambient_dim = ambient;
    s.basis = MatX::Zero(ambient, 0);
    return s;
  }

  /// Orthogonal projector onto the subspace.
  MatX projector() const { return basis * basis.transpose(); }
};

/// Null space of A with relative singular-value threshold rel_tol * sigma_max.
inline SubspaceBasis nullspace(const Eigen::Ref<const MatX>& A, double rel_tol) {
  const int n = static_cast<int>(A.cols());
  SubspaceBasis out;
  out.ambient_dim = n;
  if (A.rows() == 0) {
    out.dim = n;
    out.basis = MatX::Identity(n, n);
    return out;
  }
  // Tall systems are reduced to their R factor first; the singular values
  // and right singular vectors are unchanged.
  MatX reduced;
  if (A.rows() > n) {
    Eigen::HouseholderQR<MatX> qr(A);
    reduced = qr.matrixQR().topRows(n).triangularView<Eigen::Upper>();
  } else {
    reduced = A;
  }
  Eigen::BDCSVD<MatX> svd(reduced, Eigen::ComputeFullV);
  const VecX& sv = svd.singularValues();
  const double smax = sv.size() > 0 ? sv[0] : 0.0;
  out.tol_used = rel_tol * smax;
  out.singular_values.assign(sv.data(), sv.data() + sv.size());
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i) {
    if (sv[i] > out.tol_used && sv[i] > 0.0) ++rank;
  }
  out.dim = n - rank;
  out.basis = svd.matrixV().rightCols(out.dim);
  return out;
}

/// Orthonormal basis of the column space of M; singular values at or below
/// abs_tol count as zero.
inline SubspaceBasis orthonormal_range(const Eigen::Ref<const MatX>& M, double abs_tol) {
  SubspaceBasis out;
  out.ambient_dim = static_cast<int>(M.rows());
  out.tol_used = abs_tol;
  if (M.cols() == 0 || M.rows() == 0) {
    out.basis = MatX::Zero(M.rows(), 0);
    return out;
  }
  Eigen::JacobiSVD<MatX> svd(M, Eigen::ComputeFullU);
  const VecX& sv = svd.singularValues();
  out.singular_values.assign(sv.data(), sv.data() + sv.size());
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i) {
    if (sv[i] > abs_tol) ++rank;
  }
  out.dim = rank;
  out.basis = svd.matrixU().leftCols(rank);
  return out;
}

/// Largest principal angle (radians) between two subspaces of equal
/// dimension; pi/2 when dimensions differ.
inline double max_principal_angle(const Eigen::Ref<const MatX>& A, const Eigen::Ref<const MatX>& B) {
  if (A.cols() != B.cols() || A.rows() != B.rows()) return M_PI / 2.0;
  if (A.cols() == 0) return 0.0;
  // sin of the largest angle is the spectral norm of the residual of B
  // after projecting onto span(A).
  const MatX residual = B - A * (A.transpose() * B);
  Eigen::JacobiSVD<MatX> svd(residual);
  const double s = std::min(1.0, svd.singularValues()[0]);
  return std::asin(s);
}

inline double max_principal_angle(const SubspaceBasis& a, const SubspaceBasis& b) {
  if (a.dim != b.dim) return M_PI / 2.0;
  return max_principal_angle(a.basis, b.basis);
}

/// Largest deviation of the columns of Q from orthonormality.
inline double orthonormality_defect(const Eigen::Ref<const MatX>& Q) {
  if (Q.cols() == 0) return 0.0;
  return (Q.transpose() * Q - MatX::Identity(Q.cols(), Q.cols())).cwiseAbs().maxCoeff();
}

}  // namespace matleaf
