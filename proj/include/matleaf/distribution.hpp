// Material distribution at identities as the kernel of TW over left-invariant
// directions, and its projection to the body.
//
// Two modes:
//  * pointwise: kernel of (v, lam) -> TW at (X, X, F) for the sampled F;
//    an upper bound for the true fibre.
//  * germ: kernel over polynomial coefficient fields x -> (v(x), lam(x))
//    constrained on a neighbourhood of X; the fibre is the span of the
//    values at X of the admissible fields.
#pragma once

#include "matleaf/jet_groupoid.hpp"
#include "matleaf/linalg.hpp"
#include "matleaf/material.hpp"
#include "matleaf/response.hpp"
#include "matleaf/sampling.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace matleaf {

enum class FiberMode { Pointwise, Germ };

inline const char* to_string(FiberMode m) { return m == FiberMode::Germ ? "germ" : "pointwise"; }

struct DistributionFiber {
  Vec3 point = Vec3::Zero();
  SubspaceBasis full;  // ambient 12: (v, lam)
  SubspaceBasis base;  // ambient 3
  FiberMode mode = FiberMode::Pointwise;
  std::vector<std::string> warnings;

  int isotropy_dim() const { return full.dim - base.dim; }
};

/// Polynomial ansatz for germs of admissible fields, in the scaled variable
/// u = (x - X) / eta.
struct GermAnsatz {
  int degree = 1;
  /// Neighbourhood radius; <= 0 means 0.05 * body radius.
  double neighborhood_radius = 0.0;
  int n_points = 20;
};

struct KernelOptions {
  /// Relative SVD threshold; unset means 1e-8 (analytic) or 1e-4 (finite
  /// differences).
  std::optional<double> svd_tol;
  /// Recompute with twice the F samples and fail on a dimension change.
  bool check_stability = true;
  /// Compare the degree-1 fibre against degree 2 (germ mode only).
  bool check_ansatz = false;
};

inline constexpr double kAnalyticSvdTol = 1e-8;
inline constexpr double kFiniteDifferenceSvdTol = 1e-4;
/// Singular values of evaluated orthonormal kernel fields below this count
/// as zero when forming fibre values.
inline constexpr double kValueTol = 1e-6;

inline double resolve_svd_tol(const ResponseModel& model, const KernelOptions& opts) {
  if (opts.svd_tol) return *opts.svd_tol;
  return model.has_analytic_derivative() ? kAnalyticSvdTol : kFiniteDifferenceSvdTol;
}

namespace detail {

/// The 9k x 12 linear map dir -> [TW(g_k)(dir)]_k at g_k = (x, x, F_k), rows
/// of each F scaled by 1 / (1 + |F|^2), compressed to its R factor (same
/// Gram matrix, at most 12 rows).
inline MatX constraint_block(const ResponseModel& model, const Vec3& x,
                             const std::vector<Mat3>& Fs) {
  const int rows = 9 * static_cast<int>(Fs.size());
  MatX M(rows, kDirDim);
  for (int c = 0; c < kDirDim; ++c) {
    Vec12 e = Vec12::Zero();
    e[c] = 1.0;
    const auto dir = LeftInvariantDirection::from_vector(e);
    for (std::size_t k = 0; k < Fs.size(); ++k) {
      const double w = 1.0 / (1.0 + Fs[k].squaredNorm());
      const Mat3 d = model.differentiate(x, Fs[k], dir);
      for (int q = 0; q < 9; ++q) M(9 * static_cast<int>(k) + q, c) = w * d(q / 3, q % 3);
    }
  }
  if (!M.allFinite()) throw Error(ErrorKind::NonFinite, "constraint system is not finite");
  Eigen::HouseholderQR<MatX> qr(M);
  const int r = std::min(rows, kDirDim);
  return qr.matrixQR().topRows(r).triangularView<Eigen::Upper>();
}

inline int monomial_count(int degree) {
  switch (degree) {
    case 0: return 1;
    case 1: return 4;
    case 2: return 10;
    default: throw Error(ErrorKind::InvalidArgument, "ansatz degree must be 0, 1 or 2");
  }
}

inline VecX monomials(const Vec3& u, int degree) {
  VecX m(monomial_count(degree));
  m[0] = 1.0;
  if (degree >= 1) m.segment<3>(1) = u;
  if (degree >= 2) {
    int idx = 4;
    for (int i = 0; i < 3; ++i)
      for (int j = i; j < 3; ++j) m[idx++] = u[i] * u[j];
  }
  return m;
}

/// Builds a fibre (full and base) from the values at X of a spanning set.
inline DistributionFiber fiber_from_values(const Vec3& x, const MatX& values, FiberMode mode,
                                           double svd_tol, std::vector<double> sv) {
  DistributionFiber fiber;
  fiber.point = x;
  fiber.mode = mode;
  fiber.full = orthonormal_range(values, kValueTol);
  fiber.full.tol_used = svd_tol;
  fiber.full.singular_values = std::move(sv);
  fiber.base = orthonormal_range(fiber.full.basis.topRows(3), kValueTol);
  return fiber;
}

inline std::uint64_t neighbourhood_seed(std::uint64_t seed) { return seed ^ 0x9e3779b97f4a7c15ULL; }

}  // namespace detail

inline DistributionFiber pointwise_kernel(const ResponseModel& model, const Vec3& x,
                                          const FSampler& sampler, const KernelOptions& opts = {}) {
  model.body().require(x);
  const double tol = resolve_svd_tol(model, opts);
  auto solve = [&](const FSampler& s) {
    return nullspace(detail::constraint_block(model, x, s.samples()), tol);
  };
  SubspaceBasis kernel = solve(sampler);
  if (opts.check_stability) {
    const SubspaceBasis twice = solve(sampler.doubled());
    if (twice.dim != kernel.dim) {
      throw Error(ErrorKind::RankUnstable, "pointwise kernel dimension changes with F samples");
    }
  }
  DistributionFiber fiber;
  fiber.point = x;
  fiber.mode = FiberMode::Pointwise;
  fiber.full = kernel;
  fiber.base = orthonormal_range(kernel.basis.topRows(3), kValueTol);
  return fiber;
}

/// Germ solve: admissible polynomial fields about X plus the fibre they span.
class GermSolution {
 public:
  GermSolution(DistributionFiber fiber, MatX fields, Vec3 center, double eta, int degree)
      : fiber_(std::move(fiber)),
        fields_(std::move(fields)),
        center_(std::move(center)),
        eta_(eta),
        degree_(degree) {}

  const DistributionFiber& fiber() const noexcept { return fiber_; }
  /// Orthonormal kernel basis; column j holds the coefficients of field j,
  /// laid out as [monomial][component].
  const MatX& fields() const noexcept { return fields_; }
  const Vec3& center() const noexcept { return center_; }
  double eta() const noexcept { return eta_; }
  int degree() const noexcept { return degree_; }

  /// (v(x), lam(x)) of the field with coefficient vector `coeffs`.
  Vec12 field_value(const VecX& coeffs, const Vec3& x) const {
    const VecX m = detail::monomials((x - center_) / eta_, degree_);
    Vec12 out = Vec12::Zero();
    for (int i = 0; i < m.size(); ++i) out += m[i] * coeffs.segment<kDirDim>(kDirDim * i);
    return out;
  }

  /// Least-norm admissible field whose value at the centre has the given
  /// components. `rows` selects which of the 12 components are prescribed.
  VecX field_through(const VecX& value, int first_row, int n_rows) const {
    if (fields_.cols() == 0) return VecX::Zero(fields_.rows());
    const MatX E = fields_.middleRows(first_row, n_rows);
    Eigen::JacobiSVD<MatX> svd(E, Eigen::ComputeThinU | Eigen::ComputeThinV);
    svd.setThreshold(kValueTol / std::max(1e-300, svd.singularValues().size() > 0
                                                      ? svd.singularValues()[0]
                                                      : 1.0));
    const VecX y = svd.solve(value);
    return fields_ * y;
  }

 private:
  DistributionFiber fiber_;
  MatX fields_;
  Vec3 center_;
  double eta_;
  int degree_;
};

inline double germ_radius(const BodyDomain& body, const Vec3& x, const GermAnsatz& ansatz) {
  double eta = ansatz.neighborhood_radius > 0.0 ? ansatz.neighborhood_radius : 0.05 * body.radius();
  return std::min(eta, 0.5 * body.clearance(x));
}

namespace detail {

inline GermSolution solve_germ(const ResponseModel& model, const Vec3& x, const GermAnsatz& ansatz,
                               const FSampler& sampler, double tol) {
  const int nm = monomial_count(ansatz.degree);
  const int unknowns = nm * kDirDim;
  const double eta = germ_radius(model.body(), x, ansatz);
  if (!(eta > 0.0)) throw Error(ErrorKind::OutsideDomain, "no room for a neighbourhood");
  const int m = std::max(ansatz.n_points, ansatz.degree >= 2 ? 2 * nm : 0);
  std::mt19937_64 rng(neighbourhood_seed(sampler.seed()));
  MatX A(m * kDirDim, unknowns);
  A.setZero();
  int row = 0;
  for (int j = 0; j < m; ++j) {
    const Vec3 u = random_point_in_ball(rng, Vec3::Zero(), 1.0);
    const Vec3 xj = x + eta * u;
    const MatX R = constraint_block(model, xj, sampler.samples());
    const VecX mono = monomials(u, ansatz.degree);
    for (int i = 0; i < nm; ++i) {
      A.block(row, kDirDim * i, R.rows(), kDirDim) = mono[i] * R;
    }
    row += static_cast<int>(R.rows());
  }
  const SubspaceBasis kernel = nullspace(A.topRows(row), tol);
  const MatX values = kernel.basis.topRows(kDirDim);
  DistributionFiber fiber =
      fiber_from_values(x, values, FiberMode::Germ, kernel.tol_used, kernel.singular_values);
  return GermSolution(std::move(fiber), kernel.basis, x, eta, ansatz.degree);
}

}  // namespace detail

inline void validate(const GermAnsatz& ansatz) {
  if (ansatz.degree < 0 || ansatz.degree > 2) {
    throw Error(ErrorKind::InvalidArgument, "ansatz degree must be 0, 1 or 2");
  }
  if (ansatz.n_points < 1) throw Error(ErrorKind::InvalidArgument, "ansatz needs n_points >= 1");
  if (!(ansatz.neighborhood_radius >= 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "neighbourhood radius must be non-negative");
  }
}

/// Germ solve with the full set of checks; the returned solution also
/// carries the admissible fields used for flows.
inline GermSolution germ_solution(const ResponseModel& model, const Vec3& x,
                                  const GermAnsatz& ansatz, const FSampler& sampler,
                                  const KernelOptions& opts = {}) {
  model.body().require(x);
  validate(ansatz);
  const double tol = resolve_svd_tol(model, opts);
  GermSolution sol = detail::solve_germ(model, x, ansatz, sampler, tol);
  if (opts.check_stability) {
    const GermSolution twice = detail::solve_germ(model, x, ansatz, sampler.doubled(), tol);
    if (twice.fiber().full.dim != sol.fiber().full.dim ||
        twice.fiber().base.dim != sol.fiber().base.dim) {
      throw Error(ErrorKind::RankUnstable, "germ fibre dimension changes with F samples");
    }
  }
  if (opts.check_ansatz && ansatz.degree == 1) {
    GermAnsatz quad = ansatz;
    quad.degree = 2;
    const GermSolution q = detail::solve_germ(model, x, quad, sampler, tol);
    if (q.fiber().full.dim != sol.fiber().full.dim || q.fiber().base.dim != sol.fiber().base.dim) {
      DistributionFiber fiber = sol.fiber();
      fiber.warnings.push_back("AnsatzTooSmall: degree-2 fibre dimension differs from degree 1");
      sol = GermSolution(std::move(fiber), sol.fields(), sol.center(), sol.eta(), sol.degree());
    }
  }
  return sol;
}

inline DistributionFiber germ_fiber(const ResponseModel& model, const Vec3& x,
                                    const GermAnsatz& ansatz, const FSampler& sampler,
                                    const KernelOptions& opts = {}) {
  return germ_solution(model, x, ansatz, sampler, opts).fiber();
}

struct FiberParams {
  FSampler sampler{6, 1};
  GermAnsatz ansatz{};
  KernelOptions kernel{};
};

inline DistributionFiber compute_fiber(const ResponseModel& model, const Vec3& x, FiberMode mode,
                                       const FiberParams& params) {
  return mode == FiberMode::Germ ? germ_fiber(model, x, params.ansatz, params.sampler, params.kernel)
                                 : pointwise_kernel(model, x, params.sampler, params.kernel);
}

/// {lam : (0, lam) in the full fibre}, as a subspace of gl(3) = R^9
/// (row-major entries).
inline SubspaceBasis isotropy_from_fiber(const DistributionFiber& fiber) {
  const MatX& Q = fiber.full.basis;
  if (Q.cols() == 0) return SubspaceBasis::empty(9);
  // Combinations of the fibre basis with vanishing v-part.
  Eigen::JacobiSVD<MatX> svd(Q.topRows(3), Eigen::ComputeFullV);
  int rank = 0;
  for (int i = 0; i < svd.singularValues().size(); ++i) {
    if (svd.singularValues()[i] > kValueTol) ++rank;
  }
  const MatX combos = svd.matrixV().rightCols(Q.cols() - rank);
  return orthonormal_range(Q.bottomRows(9) * combos, kValueTol);
}

inline SubspaceBasis isotropy_algebra(const ResponseModel& model, const Vec3& x, FiberMode mode,
                                      const FiberParams& params) {
  return isotropy_from_fiber(compute_fiber(model, x, mode, params));
}

inline Mat3 to_mat3(const Eigen::Ref<const VecX>& w9) {
  Mat3 m;
  for (int i = 0; i < 9; ++i) m(i / 3, i % 3) = w9[i];
  return m;
}

struct RankStratum {
  int base_dim = 0;
  int points = 0;
  double min_radius = 0.0;
  double max_radius = 0.0;
};

struct RankMap {
  FiberMode mode = FiberMode::Germ;
  std::vector<Vec3> points;
  std::vector<int> full_dim;
  std::vector<int> base_dim;
  std::vector<bool> unstable;
  std::vector<RankStratum> strata;
  int unstable_count = 0;
};

/// Fibre dimensions on a grid, with connected components (6-neighbour grid
/// adjacency) of constant base dimension as strata. Unstable points keep the
/// dimensions of the single-sample solve and are flagged.
inline RankMap rank_map(const ResponseModel& model, const GridSpec& grid, FiberMode mode,
                        const FiberParams& params) {
  RankMap map;
  map.mode = mode;
  const int n = grid.n;
  const double half = grid.extent * model.body().radius();
  std::map<std::array<int, 3>, int> index;
  std::vector<std::array<int, 3>> cells;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        auto coord = [&](int idx) { return n == 1 ? 0.0 : -half + 2.0 * half * idx / (n - 1); };
        const Vec3 offset(coord(i), coord(j), coord(k));
        if (offset.norm() >= half + 1e-12 * half) continue;
        index[{i, j, k}] = static_cast<int>(map.points.size());
        cells.push_back({i, j, k});
        map.points.push_back(model.body().center() + offset);
      }
  for (const Vec3& p : map.points) {
    FiberParams local = params;
    bool unstable = false;
    DistributionFiber fiber;
    try {
      fiber = compute_fiber(model, p, mode, local);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::RankUnstable) throw;
      unstable = true;
      local.kernel.check_stability = false;
      fiber = compute_fiber(model, p, mode, local);
    }
    map.full_dim.push_back(fiber.full.dim);
    map.base_dim.push_back(fiber.base.dim);
    map.unstable.push_back(unstable);
    if (unstable) ++map.unstable_count;
  }
  // Strata by flood fill.
  std::vector<int> label(map.points.size(), -1);
  for (std::size_t s = 0; s < map.points.size(); ++s) {
    if (label[s] >= 0) continue;
    RankStratum stratum;
    stratum.base_dim = map.base_dim[s];
    stratum.min_radius = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> stack{s};
    label[s] = static_cast<int>(map.strata.size());
    while (!stack.empty()) {
      const std::size_t cur = stack.back();
      stack.pop_back();
      ++stratum.points;
      const double r = (map.points[cur] - model.body().center()).norm();
      stratum.min_radius = std::min(stratum.min_radius, r);
      stratum.max_radius = std::max(stratum.max_radius, r);
      const auto c = cells[cur];
      for (int axis = 0; axis < 3; ++axis) {
        for (int delta : {-1, 1}) {
          auto nb = c;
          nb[axis] += delta;
          auto it = index.find(nb);
          if (it == index.end()) continue;
          const auto other = static_cast<std::size_t>(it->second);
          if (label[other] >= 0 || map.base_dim[other] != stratum.base_dim) continue;
          label[other] = label[s];
          stack.push_back(other);
        }
      }
    }
    map.strata.push_back(stratum);
  }
  return map;
}

}  // namespace matleaf
