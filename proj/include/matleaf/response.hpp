// Response functionals W(X, F) valued in gl(3) and their derivatives along
// left-invariant directions.
#pragma once

#include "matleaf/jet_groupoid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace matleaf {

enum class ProfileKind { Constant, Monotone, Plateau, Wiggle, User };

/// Smoothing used past the plateau edge t = s^2.
enum class PlateauJunction {
  Cubic,        // f = 1 + (t - s^2)^3
  Exponential,  // f = 1 + exp(-1 / (t - s^2))
};

inline const char* to_string(ProfileKind kind) {
  switch (kind) {
    case ProfileKind::Constant: return "constant";
    case ProfileKind::Monotone: return "monotone";
    case ProfileKind::Plateau: return "plateau";
    case ProfileKind::Wiggle: return "wiggle";
    case ProfileKind::User: return "user";
  }
  return "unknown";
}

inline const char* to_string(PlateauJunction j) {
  return j == PlateauJunction::Cubic ? "cubic" : "exponential";
}

/// Scalar profile f(t), t = |X|^2, with its derivative.
class ScalarProfile {
 public:
  using Fn = std::function<double(double)>;

  static ScalarProfile constant() { return ScalarProfile(ProfileKind::Constant); }
  static ScalarProfile monotone() { return ScalarProfile(ProfileKind::Monotone); }

  static ScalarProfile plateau(double s, PlateauJunction junction = PlateauJunction::Cubic) {
    if (!(s > 0.0) || !std::isfinite(s)) {
      throw Error(ErrorKind::InvalidArgument, "plateau radius s must be positive");
    }
    ScalarProfile p(ProfileKind::Plateau);
    p.param_ = s;
    p.junction_ = junction;
    return p;
  }

  static ScalarProfile wiggle(double c) {
    if (!std::isfinite(c)) throw Error(ErrorKind::InvalidArgument, "wiggle centre must be finite");
    ScalarProfile p(ProfileKind::Wiggle);
    p.param_ = c;
    return p;
  }

  static ScalarProfile user(Fn f, Fn df, std::string name = "user") {
    if (!f || !df) throw Error(ErrorKind::InvalidArgument, "user profile needs f and f'");
    ScalarProfile p(ProfileKind::User);
    p.f_ = std::move(f);
    p.df_ = std::move(df);
    p.name_ = std::move(name);
    return p;
  }

  /// C^1 cubic Hermite interpolant through (t_i, f_i) with finite-difference
  /// slopes; constant extrapolation outside the table.
  static ScalarProfile table(std::vector<std::pair<double, double>> samples) {
    if (samples.size() < 2) throw Error(ErrorKind::InvalidArgument, "table needs >= 2 samples");
    std::sort(samples.begin(), samples.end());
    for (std::size_t i = 1; i < samples.size(); ++i) {
      if (!(samples[i].first > samples[i - 1].first)) {
        throw Error(ErrorKind::InvalidArgument, "table abscissae must be distinct");
      }
    }
    auto tab = std::make_shared<Table>(std::move(samples));
    ScalarProfile p = user([tab](double t) { return tab->value(t); },
                           [tab](double t) { return tab->slope(t); }, "table");
    p.table_ = tab->points;
    return p;
  }

  ProfileKind kind() const noexcept { return kind_; }
  double param() const noexcept { return param_; }
  PlateauJunction junction() const noexcept { return junction_; }
  const std::string& name() const noexcept { return name_; }
  const std::vector<std::pair<double, double>>& table_points() const noexcept { return table_; }

  double value(double t) const {
    switch (kind_) {
      case ProfileKind::Constant: return 1.0;
      case ProfileKind::Monotone: return 1.0 + t;
      case ProfileKind::Plateau: {
        const double u = t - param_ * param_;
        if (u <= 0.0) return 1.0;
        return junction_ == PlateauJunction::Cubic ? 1.0 + u * u * u : 1.0 + std::exp(-1.0 / u);
      }
      case ProfileKind::Wiggle: return (t - param_) * (t - param_) + 1.0;
      case ProfileKind::User: return f_(t);
    }
    return 0.0;
  }

  double derivative(double t) const {
    switch (kind_) {
      case ProfileKind::Constant: return 0.0;
      case ProfileKind::Monotone: return 1.0;
      case ProfileKind::Plateau: {
        const double u = t - param_ * param_;
        if (u <= 0.0) return 0.0;
        return junction_ == PlateauJunction::Cubic ? 3.0 * u * u : std::exp(-1.0 / u) / (u * u);
      }
      case ProfileKind::Wiggle: return 2.0 * (t - param_);
      case ProfileKind::User: return df_(t);
    }
    return 0.0;
  }

 private:
  struct Table {
    explicit Table(std::vector<std::pair<double, double>> pts) : points(std::move(pts)) {
      const std::size_t n = points.size();
      slopes.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t lo = i == 0 ? 0 : i - 1;
        const std::size_t hi = i + 1 == n ? n - 1 : i + 1;
        slopes[i] = (points[hi].second - points[lo].second) / (points[hi].first - points[lo].first);
      }
    }

    std::size_t segment(double t) const {
      auto it = std::upper_bound(points.begin(), points.end(), t,
                                 [](double x, const auto& p) { return x < p.first; });
      const auto idx = static_cast<std::size_t>(it - points.begin());
      return std::clamp<std::size_t>(idx, 1, points.size() - 1) - 1;
    }

    double value(double t) const {
      if (t <= points.front().first) return points.front().second;
      if (t >= points.back().first) return points.back().second;
      const std::size_t i = segment(t);
      const double h = points[i + 1].first - points[i].first;
      const double s = (t - points[i].first) / h;
      const double h00 = 2 * s * s * s - 3 * s * s + 1, h10 = s * s * s - 2 * s * s + s;
      const double h01 = -2 * s * s * s + 3 * s * s, h11 = s * s * s - s * s;
      return h00 * points[i].second + h10 * h * slopes[i] + h01 * points[i + 1].second +
             h11 * h * slopes[i + 1];
    }

    double slope(double t) const {
      if (t <= points.front().first || t >= points.back().first) return 0.0;
      const std::size_t i = segment(t);
      const double h = points[i + 1].first - points[i].first;
      const double s = (t - points[i].first) / h;
      const double d00 = 6 * s * s - 6 * s, d10 = 3 * s * s - 4 * s + 1;
      const double d01 = -6 * s * s + 6 * s, d11 = 3 * s * s - 2 * s;
      return (d00 * points[i].second + d01 * points[i + 1].second) / h + d10 * slopes[i] +
             d11 * slopes[i + 1];
    }

    std::vector<std::pair<double, double>> points;
    std::vector<double> slopes;
  };

  explicit ScalarProfile(ProfileKind kind) : kind_(kind), name_(to_string(kind)) {}

  ProfileKind kind_;
  double param_ = 0.0;
  PlateauJunction junction_ = PlateauJunction::Cubic;
  Fn f_;
  Fn df_;
  std::string name_;
  std::vector<std::pair<double, double>> table_;
};

/// W evaluated from (source, F) only: the target point never enters, so the
/// response does not depend on the final point.
class ResponseModel {
 public:
  using Evaluator = std::function<Mat3(const Vec3&, const Mat3&)>;
  using Derivative = std::function<Mat3(const Vec3&, const Mat3&, const LeftInvariantDirection&)>;

  static constexpr double kDefaultFdStep = 1e-5;

  ResponseModel(BodyDomain body, Evaluator evaluator, std::optional<Derivative> derivative = {},
                double fd_step = kDefaultFdStep)
      : body_(std::move(body)),
        evaluator_(std::move(evaluator)),
        derivative_(std::move(derivative)),
        fd_step_(fd_step) {
    if (!evaluator_) throw Error(ErrorKind::InvalidArgument, "response model needs an evaluator");
    if (!(fd_step_ > 0.0)) throw Error(ErrorKind::InvalidArgument, "fd_step must be positive");
  }

  /// f(|X|^2) (F F^T - I). With `analytic == false` the derivative falls back
  /// to central differences.
  static ResponseModel radial(BodyDomain body, ScalarProfile profile, bool analytic = true,
                              double fd_step = kDefaultFdStep) {
    const Vec3 c = body.center();
    auto eval = [profile, c](const Vec3& x, const Mat3& F) -> Mat3 {
      const double t = (x - c).squaredNorm();
      return profile.value(t) * (F * F.transpose() - Mat3::Identity());
    };
    std::optional<Derivative> deriv;
    if (analytic) {
      deriv = [profile, c](const Vec3& x, const Mat3& F, const LeftInvariantDirection& d) -> Mat3 {
        const Vec3 r = x - c;
        const double t = r.squaredNorm();
        const Mat3 strain = F * F.transpose() - Mat3::Identity();
        return profile.derivative(t) * 2.0 * r.dot(d.v) * strain +
               profile.value(t) * F * (d.lam + d.lam.transpose()) * F.transpose();
      };
    }
    ResponseModel model(std::move(body), std::move(eval), std::move(deriv), fd_step);
    model.profile_ = std::move(profile);
    return model;
  }

  const BodyDomain& body() const noexcept { return body_; }
  double fd_step() const noexcept { return fd_step_; }
  bool has_analytic_derivative() const noexcept { return derivative_.has_value(); }
  /// Set for the built-in radial family.
  const std::optional<ScalarProfile>& radial_profile() const noexcept { return profile_; }

  Mat3 evaluate(const Vec3& x, const Mat3& F) const { return evaluator_(x, F); }

  Mat3 differentiate(const Vec3& x, const Mat3& F, const LeftInvariantDirection& d) const {
    if (derivative_) return (*derivative_)(x, F, d);
    const double h = fd_step_;
    const Mat3 plus = evaluator_(x + h * d.v, F * (Mat3::Identity() + h * d.lam));
    const Mat3 minus = evaluator_(x - h * d.v, F * (Mat3::Identity() - h * d.lam));
    return (plus - minus) / (2.0 * h);
  }

  /// Same evaluator with the central-difference derivative.
  ResponseModel without_analytic_derivative() const {
    ResponseModel copy = *this;
    copy.derivative_.reset();
    return copy;
  }

 private:
  BodyDomain body_;
  Evaluator evaluator_;
  std::optional<Derivative> derivative_;
  double fd_step_;
  std::optional<ScalarProfile> profile_;
};

inline Mat3 eval(const ResponseModel& model, const Jet1& g) {
  model.body().require(g.source());
  return model.evaluate(g.source(), g.F());
}

/// d/dt W(x + t v, F (I + t lam)) at t = 0, i.e. TW applied to the
/// left-invariant field through (v, lam) at g.
inline Mat3 directional_derivative(const ResponseModel& model, const Jet1& g,
                                   const LeftInvariantDirection& dir) {
  if (!dir.v.allFinite() || !dir.lam.allFinite()) {
    throw Error(ErrorKind::NonFinite, "direction must be finite");
  }
  Mat3 out = model.differentiate(g.source(), g.F(), dir);
  if (!out.allFinite()) throw Error(ErrorKind::NonFinite, "derivative is not finite");
  return out;
}

struct TranslationInvarianceReport {
  bool pass = true;
  int samples = 0;
  double max_deviation = 0.0;
};

/// Checks that an evaluator on jets ignores the target point, by moving the
/// target of random jets around the body.
inline TranslationInvarianceReport check_translation_invariance(
    const BodyDomain& body, const std::function<Mat3(const Jet1&)>& on_jets, int n_samples,
    std::uint64_t seed) {
  if (n_samples < 1) throw Error(ErrorKind::InvalidArgument, "n_samples must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  auto point = [&] {
    for (;;) {
      Vec3 p(unit(rng), unit(rng), unit(rng));
      if (p.norm() < 0.95) return Vec3(body.center() + body.radius() * p);
    }
  };
  TranslationInvarianceReport report;
  report.samples = n_samples;
  for (int i = 0; i < n_samples; ++i) {
    Mat3 F;
    do {
      for (int k = 0; k < 9; ++k) F(k / 3, k % 3) = unit(rng);
    } while (std::abs(F.determinant()) < 0.1);
    const Vec3 x = point();
    const Jet1 a(x, point(), F);
    const Jet1 b(x, point(), F);
    const double dev = (on_jets(a) - on_jets(b)).norm();
    report.max_deviation = std::max(report.max_deviation, dev);
  }
  report.pass = report.max_deviation == 0.0;
  return report;
}

inline TranslationInvarianceReport check_translation_invariance(const ResponseModel& model,
                                                                int n_samples, std::uint64_t seed) {
  return check_translation_invariance(
      model.body(), [&model](const Jet1& g) { return eval(model, g); }, n_samples, seed);
}

}  // namespace matleaf
