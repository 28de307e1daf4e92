#ifndef FENE_QUADRATURE_HPP_
#define FENE_QUADRATURE_HPP_

#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "fene/errors.hpp"
#include "fene/geometry.hpp"

namespace fene {

/// Value and derivative of the Jacobi polynomial P_n^{(alpha,beta)}(x).
struct JacobiValue {
  double value;
  double derivative;
};

namespace detail {

/// P_n^{(a,b)}(x) by the three-term recurrence.
inline double jacobi_p(int n, double a, double b, double x) {
  if (n == 0) return 1.0;
  double p_prev = 1.0;
  double p = 0.5 * (a - b) + 0.5 * (a + b + 2.0) * x;
  for (int k = 2; k <= n; ++k) {
    const double s = 2.0 * k + a + b;
    const double c1 = 2.0 * k * (k + a + b) * (s - 2.0);
    const double c2 = (s - 1.0) * (s * (s - 2.0) * x + a * a - b * b);
    const double c3 = 2.0 * (k + a - 1.0) * (k + b - 1.0) * s;
    const double next = (c2 * p - c3 * p_prev) / c1;
    p_prev = p;
    p = next;
  }
  return p;
}

}  // namespace detail

inline JacobiValue jacobi(int n, double alpha, double beta, double x) {
  const double v = detail::jacobi_p(n, alpha, beta, x);
  const double d =
      n == 0 ? 0.0 : 0.5 * (n + alpha + beta + 1.0) * detail::jacobi_p(n - 1, alpha + 1.0, beta + 1.0, x);
  return {v, d};
}

/// Gauss-Jacobi rule on [-1, 1] for the weight (1-x)^alpha (1+x)^beta.
struct GaussJacobiRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Golub-Welsch eigenvalues polished by Newton on P_N, weights from the
/// closed-form Christoffel numbers. Exact for polynomials of degree 2N-1.
inline GaussJacobiRule gauss_jacobi(int N, double alpha, double beta) {
  if (N < 1) throw ConfigError("Gauss-Jacobi rule needs at least one node");
  if (!(alpha > -1.0) || !(beta > -1.0)) {
    throw ConfigError("Gauss-Jacobi exponents must exceed -1");
  }
  const double ab = alpha + beta;
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(N, N);
  for (int k = 0; k < N; ++k) {
    const double s = 2.0 * k + ab;
    J(k, k) = (k == 0) ? (beta - alpha) / (ab + 2.0) : (beta * beta - alpha * alpha) / (s * (s + 2.0));
    if (k + 1 < N) {
      const int j = k + 1;
      const double sj = 2.0 * j + ab;
      double off;
      if (j == 1) {
        off = 4.0 * (1.0 + alpha) * (1.0 + beta) / ((2.0 + ab) * (2.0 + ab) * (3.0 + ab));
      } else {
        off = 4.0 * j * (j + alpha) * (j + beta) * (j + ab) / (sj * sj * (sj + 1.0) * (sj - 1.0));
      }
      J(k, j) = J(j, k) = std::sqrt(off);
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J, Eigen::EigenvaluesOnly);
  GaussJacobiRule rule;
  rule.nodes.resize(N);
  rule.weights.resize(N);
  const double log_c = (ab + 1.0) * std::log(2.0) + std::lgamma(N + alpha + 1.0) +
                       std::lgamma(N + beta + 1.0) - std::lgamma(N + ab + 1.0) - std::lgamma(N + 1.0);
  for (int i = 0; i < N; ++i) {
    double x = es.eigenvalues()(i);
    for (int it = 0; it < 8; ++it) {
      const JacobiValue jv = jacobi(N, alpha, beta, x);
      const double dx = jv.value / jv.derivative;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const JacobiValue jv = jacobi(N, alpha, beta, x);
    rule.nodes[i] = x;
    rule.weights[i] = std::exp(log_c) / ((1.0 - x * x) * jv.derivative * jv.derivative);
  }
  return rule;
}

/// Tensor rule on a ball of radius sqrt(radius_sq) for integrands against
/// (radius_sq - |m|^2)^mu dm. Radial part: Gauss-Jacobi in u = r^2. Angular
/// part: equispaced (n = 2) or Gauss-Legendre x equispaced (n = 3).
class QuadratureRule {
 public:
  static QuadratureRule ball(int n, double b, double mu, int n_radial, int n_angular) {
    return QuadratureRule(n, b, mu, n_radial, n_angular);
  }

  /// Unweighted rule on B(0, radius).
  static QuadratureRule sub_ball(int n, double radius, int n_radial, int n_angular) {
    return QuadratureRule(n, radius * radius, 0.0, n_radial, n_angular);
  }

  int dim() const noexcept { return n_; }
  double mu() const noexcept { return mu_; }
  double radius_sq() const noexcept { return radius_sq_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  const std::vector<Vec>& nodes() const noexcept { return nodes_; }
  const Vec& node(std::size_t i) const { return nodes_[i]; }
  const std::vector<double>& weights() const noexcept { return weights_; }
  double weight(std::size_t i) const { return weights_[i]; }
  /// radius_sq - |m_i|^2; equals rho when radius_sq = b.
  double base(std::size_t i) const { return base_[i]; }
  const std::vector<double>& radial_nodes() const noexcept { return radial_nodes_; }
  const std::vector<double>& radial_weights() const noexcept { return radial_weights_; }
  const std::vector<double>& angular_weights() const noexcept { return angular_weights_; }
  /// Total polynomial degree in m integrated exactly against the weight.
  int order() const noexcept { return order_; }
  int n_radial() const noexcept { return n_radial_; }
  int n_angular() const noexcept { return n_angular_; }

 private:
  QuadratureRule(int n, double radius_sq, double mu, int n_radial, int n_angular)
      : n_(n), mu_(mu), radius_sq_(radius_sq), n_radial_(n_radial), n_angular_(n_angular) {
    if (n != 2 && n != 3) throw ConfigError("quadrature supports n = 2 or 3");
    if (n_radial < 1 || n_angular < 1) throw ConfigError("quadrature resolution must be >= 1");
    if (!(mu > -1.0)) throw ConfigError("weight exponent mu must exceed -1");
    const double half = 0.5 * radius_sq;
    const double jac_beta = 0.5 * n - 1.0;
    const GaussJacobiRule gj = gauss_jacobi(n_radial, mu, jac_beta);
    const double scale = 0.5 * std::pow(half, mu + 0.5 * n);
    for (int i = 0; i < n_radial; ++i) {
      const double u = half * (1.0 + gj.nodes[i]);
      radial_nodes_.push_back(std::sqrt(u));
      radial_weights_.push_back(scale * gj.weights[i]);
    }
    std::vector<Vec> dirs;
    if (n == 2) {
      for (int j = 0; j < n_angular; ++j) {
        const double th = 2.0 * std::numbers::pi * (j + 0.5) / n_angular;
        Vec d(2);
        d << std::cos(th), std::sin(th);
        dirs.push_back(d);
        angular_weights_.push_back(2.0 * std::numbers::pi / n_angular);
      }
      order_ = std::min(n_angular - 1, 4 * n_radial - 2);
    } else {
      const int n_polar = (n_angular + 1) / 2;
      const GaussJacobiRule gl = gauss_jacobi(n_polar, 0.0, 0.0);
      for (int a = 0; a < n_polar; ++a) {
        const double ct = gl.nodes[a];
        const double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
        for (int j = 0; j < n_angular; ++j) {
          const double ph = 2.0 * std::numbers::pi * (j + 0.5) / n_angular;
          Vec d(3);
          d << st * std::cos(ph), st * std::sin(ph), ct;
          dirs.push_back(d);
          angular_weights_.push_back(gl.weights[a] * 2.0 * std::numbers::pi / n_angular);
        }
      }
      order_ = std::min({n_angular - 1, 2 * n_polar - 1, 4 * n_radial - 2});
    }
    for (int i = 0; i < n_radial; ++i) {
      for (std::size_t j = 0; j < dirs.size(); ++j) {
        nodes_.push_back(radial_nodes_[i] * dirs[j]);
        weights_.push_back(radial_weights_[i] * angular_weights_[j]);
        base_.push_back(std::max(0.0, radius_sq - radial_nodes_[i] * radial_nodes_[i]));
      }
    }
  }

  int n_;
  double mu_;
  double radius_sq_;
  int n_radial_;
  int n_angular_;
  int order_ = 0;
  std::vector<double> radial_nodes_;
  std::vector<double> radial_weights_;
  std::vector<double> angular_weights_;
  std::vector<Vec> nodes_;
  std::vector<double> weights_;
  std::vector<double> base_;
};

/// Surface rule on the sphere |m| = r for integrals dS.
class TraceRule {
 public:
  TraceRule(int n, double r, int n_points) : r_(r) {
    if (!(r > 0.0)) throw DomainError("trace radius must be positive");
    if (n_points < 1) throw ConfigError("trace rule needs at least one point");
    if (n == 2) {
      for (int j = 0; j < n_points; ++j) {
        const double th = 2.0 * std::numbers::pi * (j + 0.5) / n_points;
        Vec m(2);
        m << r * std::cos(th), r * std::sin(th);
        nodes_.push_back(m);
        weights_.push_back(2.0 * std::numbers::pi * r / n_points);
      }
    } else if (n == 3) {
      const int n_polar = (n_points + 1) / 2;
      const GaussJacobiRule gl = gauss_jacobi(n_polar, 0.0, 0.0);
      for (int a = 0; a < n_polar; ++a) {
        const double ct = gl.nodes[a];
        const double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
        for (int j = 0; j < n_points; ++j) {
          const double ph = 2.0 * std::numbers::pi * (j + 0.5) / n_points;
          Vec m(3);
          m << r * st * std::cos(ph), r * st * std::sin(ph), r * ct;
          nodes_.push_back(m);
          weights_.push_back(r * r * gl.weights[a] * 2.0 * std::numbers::pi / n_points);
        }
      }
    } else {
      throw ConfigError("trace rule supports n = 2 or 3");
    }
  }

  double radius() const noexcept { return r_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  const std::vector<Vec>& nodes() const noexcept { return nodes_; }
  const std::vector<double>& weights() const noexcept { return weights_; }

 private:
  double r_;
  std::vector<Vec> nodes_;
  std::vector<double> weights_;
};

}  // namespace fene

#endif  // FENE_QUADRATURE_HPP_
