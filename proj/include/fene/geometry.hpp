#ifndef FENE_GEOMETRY_HPP_
#define FENE_GEOMETRY_HPP_

// Geometry of the configuration ball B(0, sqrt(b)), the FENE weight
// rho = b - |m|^2, the equilibrium density and the radial flux.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "fene/errors.hpp"

namespace fene {

/// Point or vector in R^n, n <= 3, stored without heap allocation.
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, 3, 1>;
/// n x n matrix, n <= 3.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, 3, 3>;

inline constexpr double kTraceTolerance = 1e-12;

/// Velocity gradient kappa(t). Every sampled value is traceless.
class KappaSchedule {
 public:
  enum class Kind { kZero, kConstant, kShear, kCorotational, kTable };

  static KappaSchedule zero(int n) { return KappaSchedule(Kind::kZero, n, {}, {}, 0.0); }

  static KappaSchedule constant(const Mat& k) {
    KappaSchedule s(Kind::kConstant, static_cast<int>(k.rows()), {0.0}, {k}, 0.0);
    s.validate();
    return s;
  }

  /// kappa_{12} = rate, all other entries zero.
  static KappaSchedule shear(int n, double rate) {
    Mat k = Mat::Zero(n, n);
    k(0, 1) = rate;
    return KappaSchedule(Kind::kShear, n, {0.0}, {k}, rate);
  }

  /// Antisymmetric rotation in the (m1, m2) plane.
  static KappaSchedule corotational(int n, double rate) {
    Mat k = Mat::Zero(n, n);
    k(0, 1) = rate;
    k(1, 0) = -rate;
    return KappaSchedule(Kind::kCorotational, n, {0.0}, {k}, rate);
  }

  /// Piecewise-linear interpolation of (t, matrix) samples, held constant
  /// outside the table range. Times must be strictly increasing.
  static KappaSchedule table(std::vector<double> times, std::vector<Mat> values) {
    if (times.empty() || times.size() != values.size()) {
      throw ConfigError("kappa table needs matching, non-empty time and matrix lists");
    }
    for (std::size_t i = 1; i < times.size(); ++i) {
      if (!(times[i] > times[i - 1])) throw ConfigError("kappa table times must increase strictly");
    }
    const int n = static_cast<int>(values.front().rows());
    KappaSchedule s(Kind::kTable, n, std::move(times), std::move(values), 0.0);
    s.validate();
    return s;
  }

  Kind kind() const noexcept { return kind_; }
  int dim() const noexcept { return n_; }
  double rate() const noexcept { return rate_; }
  bool is_constant() const noexcept { return kind_ != Kind::kTable || times_.size() == 1; }

  Mat at(double t) const {
    if (kind_ == Kind::kZero) return Mat::Zero(n_, n_);
    if (kind_ != Kind::kTable || times_.size() == 1) return values_.front();
    if (t <= times_.front()) return values_.front();
    if (t >= times_.back()) return values_.back();
    const auto it = std::upper_bound(times_.begin(), times_.end(), t);
    const std::size_t hi = static_cast<std::size_t>(it - times_.begin());
    const std::size_t lo = hi - 1;
    const double s = (t - times_[lo]) / (times_[hi] - times_[lo]);
    return (1.0 - s) * values_[lo] + s * values_[hi];
  }

  /// max over [0, horizon] of the spectral norm. Exact for the piecewise-linear
  /// table up to the convexity of the norm (vertices dominate).
  double sup_norm(double horizon) const {
    double best = 0.0;
    if (kind_ == Kind::kZero) return 0.0;
    std::vector<double> probe = {0.0, horizon};
    for (double t : times_) {
      if (t >= 0.0 && t <= horizon) probe.push_back(t);
    }
    for (double t : probe) {
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(Eigen::MatrixXd(at(t)));
      best = std::max(best, svd.singularValues()(0));
    }
    return best;
  }

  const std::vector<double>& times() const noexcept { return times_; }
  const std::vector<Mat>& values() const noexcept { return values_; }

 private:
  KappaSchedule(Kind kind, int n, std::vector<double> times, std::vector<Mat> values, double rate)
      : kind_(kind), n_(n), times_(std::move(times)), values_(std::move(values)), rate_(rate) {}

  void validate() const {
    for (const Mat& k : values_) {
      if (k.rows() != n_ || k.cols() != n_) throw ConfigError("kappa matrix has wrong shape");
      if (std::abs(k.trace()) > kTraceTolerance) {
        std::ostringstream os;
        os << "kappa must be traceless (|Tr kappa| = " << std::abs(k.trace()) << ")";
        throw ConfigError(os.str());
      }
      if (!k.allFinite()) throw ConfigError("kappa has non-finite entries");
    }
  }

  Kind kind_;
  int n_;
  std::vector<double> times_;
  std::vector<Mat> values_;
  double rate_;
};

/// Problem instance: dimension n, extension parameter b, kappa(t), horizon T.
class ModelParams {
 public:
  ModelParams(int n, double b, KappaSchedule kappa, double horizon)
      : n_(n), b_(b), kappa_(std::move(kappa)), horizon_(horizon) {
    if (n != 2 && n != 3) throw ConfigError("dimension n must be 2 or 3");
    if (!(b > 2.0)) {
      std::ostringstream os;
      os << "condition b>2 violated (b = " << b << ")";
      throw ConfigError(os.str());
    }
    if (!(horizon > 0.0)) throw ConfigError("horizon T must be positive");
    if (kappa_.dim() != n) throw ConfigError("kappa dimension does not match n");
  }

  int n() const noexcept { return n_; }
  double b() const noexcept { return b_; }
  double sqrt_b() const noexcept { return std::sqrt(b_); }
  double horizon() const noexcept { return horizon_; }
  const KappaSchedule& kappa() const noexcept { return kappa_; }
  Mat kappa_at(double t) const { return kappa_.at(t); }

  /// Exponent of the transformed W-problem weight.
  double beta() const noexcept { return 2.0 - 0.5 * b_; }

 private:
  int n_;
  double b_;
  KappaSchedule kappa_;
  double horizon_;
};

namespace detail {
inline void require_in_ball(const ModelParams& p, const Vec& m) {
  if (m.size() != p.n()) throw DomainError("point has wrong dimension");
  const double r2 = m.squaredNorm();
  // A relative slack admits boundary points produced by sqrt(b) * unit vectors.
  if (r2 > p.b() * (1.0 + 1e-14)) {
    std::ostringstream os;
    os << "point outside closed ball: |m|^2 = " << r2 << " > b = " << p.b();
    throw DomainError(os.str());
  }
}
}  // namespace detail

inline double rho(const ModelParams& p, const Vec& m) {
  detail::require_in_ball(p, m);
  return std::max(0.0, p.b() - m.squaredNorm());
}

/// Euclidean distance to the sphere |m| = sqrt(b).
inline double dist(const ModelParams& p, const Vec& m) {
  detail::require_in_ball(p, m);
  return std::max(0.0, p.sqrt_b() - m.norm());
}

/// -(H b / 2) log(1 - |m|^2 / b), singular on the boundary.
inline double fene_potential(const ModelParams& p, const Vec& m, double H) {
  detail::require_in_ball(p, m);
  const double s = 1.0 - m.squaredNorm() / p.b();
  if (!(s > 0.0)) throw DomainError("FENE potential is singular at |m|^2 = b");
  return -0.5 * H * p.b() * std::log(s);
}

/// c(t,m) = 2 m.kappa(t) m + n (b/2 - 1).
inline double reaction_coefficient(const ModelParams& p, double t, const Vec& m) {
  detail::require_in_ball(p, m);
  const Mat k = p.kappa_at(t);
  return 2.0 * m.dot(k * m) + p.n() * (0.5 * p.b() - 1.0);
}

/// Radial flux (b m f / (2 rho) - kappa m f + grad f / 2) . m / |m|.
inline double flux(const ModelParams& p, double f, const Vec& grad_f, double t, const Vec& m) {
  detail::require_in_ball(p, m);
  const double r = m.norm();
  if (r == 0.0) throw DomainError("flux has no radial direction at m = 0");
  const double rh = p.b() - m.squaredNorm();
  if (!(rh > 0.0)) throw DomainError("flux is evaluated at interior points only");
  const Vec nu = m / r;
  const Mat k = p.kappa_at(t);
  const Vec v = (p.b() * f / (2.0 * rh)) * m - f * (k * m) + 0.5 * grad_f;
  return v.dot(nu);
}

/// Lebesgue measure of the unit sphere S^{n-1}.
inline double sphere_area(int n) {
  return n == 2 ? 2.0 * std::numbers::pi : 4.0 * std::numbers::pi;
}

/// f^eq = Z^{-1} rho^{b/2}.
class EquilibriumField {
 public:
  EquilibriumField(const ModelParams& p, double Z) : b_(p.b()), n_(p.n()), Z_(Z) {
    if (!(Z > 0.0) || !std::isfinite(Z)) {
      throw NumericalError("equilibrium normalization", "Z must be positive and finite");
    }
  }

  double Z() const noexcept { return Z_; }

  double operator()(const Vec& m) const {
    const double rh = std::max(0.0, b_ - m.squaredNorm());
    return std::pow(rh, 0.5 * b_) / Z_;
  }

  Vec gradient(const Vec& m) const {
    const double rh = std::max(0.0, b_ - m.squaredNorm());
    return (-b_ * std::pow(rh, 0.5 * b_ - 1.0) / Z_) * m;
  }

 private:
  double b_;
  int n_;
  double Z_;
};

}  // namespace fene

#endif  // FENE_GEOMETRY_HPP_
