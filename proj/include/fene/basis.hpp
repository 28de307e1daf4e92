#ifndef FENE_BASIS_HPP_
#define FENE_BASIS_HPP_

// Galerkin basis of functions vanishing on the sphere |m| = sqrt(b):
//
//   phi_{j,k}(m) = rho^p * r^k P_j^{(2p+e, k)}(2 r^2 / b - 1) * {cos, sin}(k theta)
//
// with e the weight exponent of the space L^2_e. The Jacobi parameters make
// the mass matrix in L^2_e diagonal; every function is normalized to unit
// L^2_e norm on the rule it is built on.

#include <cmath>
#include <complex>
#include <limits>
#include <memory>
#include <sstream>
#include <vector>

#include <Eigen/Dense>

#include "fene/errors.hpp"
#include "fene/geometry.hpp"
#include "fene/quadrature.hpp"

namespace fene {

struct BasisSpec {
  double exponent = 0.0;  ///< weight exponent e of L^2_e / H^1_e (beta or gamma)
  int K_r = 7;            ///< radial functions per angular mode
  int K_theta = 7;        ///< highest angular mode
  /// Boundary vanishing power p; NaN selects the default p = 1 - e.
  double vanishing_power = std::numeric_limits<double>::quiet_NaN();

  double power() const { return std::isnan(vanishing_power) ? 1.0 - exponent : vanishing_power; }
  /// Rule exponent under which every bilinear form of the basis is polynomial.
  double rule_exponent() const { return 2.0 * power() - 2.0 + exponent; }
};

/// Values and gradients of the basis at the nodes of one rule (nodes x L).
struct Tabulation {
  Eigen::MatrixXd values;
  std::vector<Eigen::MatrixXd> grads;  ///< one matrix per coordinate direction
};

class BasisSet {
 public:
  enum class Trig { kCos, kSin };
  struct Index {
    int j;
    int k;
    Trig trig;
  };

  BasisSet(const ModelParams& p, const BasisSpec& spec, const QuadratureRule& q)
      : b_(p.b()), n_(p.n()), spec_(spec) {
    if (p.n() != 2) throw ConfigError("Galerkin basis is implemented for n = 2 only");
    if (spec.K_r < 1 || spec.K_theta < 0) throw ConfigError("basis needs K_r >= 1 and K_theta >= 0");
    if (!(spec.exponent < 1.0)) throw ConfigError("basis exponent must be < 1 for a zero trace");
    const double pw = spec.power();
    if (!(pw > 0.0)) throw ConfigError("basis vanishing power must be positive");
    if (!(2.0 * pw - 2.0 + spec.exponent > -1.0)) {
      throw ConfigError("basis functions would have infinite H^1 norm for this exponent");
    }
    if (std::abs(q.mu() - spec.rule_exponent()) > 1e-14 || std::abs(q.radius_sq() - b_) > 1e-14 * b_) {
      std::ostringstream os;
      os << "exponent mismatch: basis needs rule exponent " << spec.rule_exponent() << ", got " << q.mu();
      throw ConfigError(os.str());
    }
    jac_alpha_ = 2.0 * pw + spec.exponent;
    for (int k = 0; k <= spec.K_theta; ++k) {
      for (int t = 0; t < (k == 0 ? 1 : 2); ++t) {
        for (int j = 0; j < spec.K_r; ++j) index_.push_back({j, k, t == 0 ? Trig::kCos : Trig::kSin});
      }
    }
    scale_ = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(index_.size()));
    Tabulation tab = tabulate(q);
    // Mass diagonal under the rule, then normalize.
    const double shift = spec.exponent - q.mu();
    Eigen::VectorXd w(q.size());
    for (std::size_t i = 0; i < q.size(); ++i) w(i) = q.weight(i) * std::pow(q.base(i), shift);
    for (Eigen::Index c = 0; c < tab.values.cols(); ++c) {
      const double nrm2 = (tab.values.col(c).array().square() * w.array()).sum();
      if (!(nrm2 > 0.0) || !std::isfinite(nrm2)) {
        throw NumericalError("basis construction", "basis function with zero or non-finite norm");
      }
      scale_(c) = 1.0 / std::sqrt(nrm2);
    }
  }

  int size() const noexcept { return static_cast<int>(index_.size()); }
  const BasisSpec& spec() const noexcept { return spec_; }
  double exponent() const noexcept { return spec_.exponent; }
  double power() const noexcept { return spec_.power(); }
  double b() const noexcept { return b_; }
  const std::vector<Index>& indices() const noexcept { return index_; }

  /// Values (size L) and gradients (n x L) at one interior point.
  void evaluate(const Vec& m, Eigen::Ref<Eigen::VectorXd> values, Eigen::Ref<Eigen::MatrixXd> grads) const {
    const double x1 = m(0), x2 = m(1);
    const double u = x1 * x1 + x2 * x2;
    const double rh = b_ - u;
    if (!(rh > 0.0)) {
      if (u > b_ * (1.0 + 1e-14)) throw DomainError("basis evaluated outside the ball");
      // On the sphere every function vanishes; gradients are reported as zero.
      values.setZero();
      grads.setZero();
      return;
    }
    const double pw = power();
    const double rp = std::pow(rh, pw);
    const double drp = -2.0 * pw * std::pow(rh, pw - 1.0);  // d(rho^p)/dm = drp * m
    const double xi = 2.0 * u / b_ - 1.0;
    const std::complex<double> z(x1, x2);
    std::complex<double> zk(1.0, 0.0);     // z^k
    std::complex<double> zk1(0.0, 0.0);    // k z^{k-1}
    std::vector<double> pv(spec_.K_r), pd(spec_.K_r);
    int col = 0;
    for (int k = 0; k <= spec_.K_theta; ++k) {
      if (k > 0) {
        zk1 = static_cast<double>(k) * zk;
        zk *= z;
      }
      jacobi_family(xi, k, pv, pd);
      for (int t = 0; t < (k == 0 ? 1 : 2); ++t) {
        double Z, Zx, Zy;
        if (t == 0) {
          Z = zk.real();
          Zx = zk1.real();
          Zy = -zk1.imag();
        } else {
          Z = zk.imag();
          Zx = zk1.imag();
          Zy = zk1.real();
        }
        for (int j = 0; j < spec_.K_r; ++j, ++col) {
          const double R = pv[j];
          const double dR = pd[j] * 4.0 / b_;  // grad R = dR * m
          const double s = scale_(col);
          values(col) = s * rp * R * Z;
          const double common = s * (rp * Z * dR + drp * R * Z);
          grads(0, col) = s * rp * R * Zx + common * x1;
          grads(1, col) = s * rp * R * Zy + common * x2;
        }
      }
    }
  }

  Tabulation tabulate(const QuadratureRule& q) const { return tabulate(q.nodes()); }

  Tabulation tabulate(const std::vector<Vec>& nodes) const {
    const Eigen::Index L = size();
    const Eigen::Index N = static_cast<Eigen::Index>(nodes.size());
    Tabulation tab;
    tab.values.resize(N, L);
    tab.grads.assign(n_, Eigen::MatrixXd(N, L));
    Eigen::VectorXd v(L);
    Eigen::MatrixXd g(n_, L);
    for (Eigen::Index i = 0; i < N; ++i) {
      evaluate(nodes[static_cast<std::size_t>(i)], v, g);
      tab.values.row(i) = v.transpose();
      for (int a = 0; a < n_; ++a) tab.grads[a].row(i) = g.row(a);
    }
    return tab;
  }

  /// sum_i d_i phi_i(m) and its gradient.
  double field(const Eigen::VectorXd& coeffs, const Vec& m, Vec* grad = nullptr) const {
    Eigen::VectorXd v(size());
    Eigen::MatrixXd g(n_, size());
    evaluate(m, v, g);
    if (grad) *grad = g * coeffs;
    return v.dot(coeffs);
  }

 private:
  /// P_j^{(alpha, k)}(x) and d/dx for j < K_r.
  void jacobi_family(double x, int k, std::vector<double>& v, std::vector<double>& d) const {
    const double a = jac_alpha_;
    const double bb = static_cast<double>(k);
    auto fill = [&](double aa, double bj, std::vector<double>& out, int count) {
      if (count <= 0) return;
      out[0] = 1.0;
      if (count == 1) return;
      out[1] = 0.5 * (aa - bj) + 0.5 * (aa + bj + 2.0) * x;
      for (int n = 2; n < count; ++n) {
        const double s = 2.0 * n + aa + bj;
        const double c1 = 2.0 * n * (n + aa + bj) * (s - 2.0);
        const double c2 = (s - 1.0) * (s * (s - 2.0) * x + aa * aa - bj * bj);
        const double c3 = 2.0 * (n + aa - 1.0) * (n + bj - 1.0) * s;
        out[n] = (c2 * out[n - 1] - c3 * out[n - 2]) / c1;
      }
    };
    fill(a, bb, v, spec_.K_r);
    std::vector<double> shifted(spec_.K_r, 0.0);
    fill(a + 1.0, bb + 1.0, shifted, spec_.K_r - 1);
    d[0] = 0.0;
    for (int j = 1; j < spec_.K_r; ++j) d[j] = 0.5 * (j + a + bb + 1.0) * shifted[j - 1];
  }

  double b_;
  int n_;
  BasisSpec spec_;
  double jac_alpha_ = 0.0;
  std::vector<Index> index_;
  Eigen::VectorXd scale_;
};

}  // namespace fene

#endif  // FENE_BASIS_HPP_
