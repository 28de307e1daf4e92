#ifndef FENE_GALERKIN_HPP_
#define FENE_GALERKIN_HPP_

// Weighted Galerkin discretization of
//
//   d_t w rho^e - (1/2) div(grad w rho^e) + (beta - e) m.grad w rho^{e-1}
//       + kappa m.grad w rho^e - c w rho^{e-1} = h,   w = 0 on the sphere,
//
// for e = beta (the W-problem) or e = gamma (the relaxed-boundary problem).

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <sstream>
#include <vector>

#include <Eigen/Dense>

#include "fene/basis.hpp"
#include "fene/errors.hpp"
#include "fene/geometry.hpp"
#include "fene/quadrature.hpp"
#include "fene/weighted_spaces.hpp"

namespace fene {

struct QuadratureResolution {
  int n_radial = 64;
  int n_angular = 64;
};

/// Matrices of the bilinear forms at one time t (rows: test, columns: trial).
struct AssembledOperator {
  double t = 0.0;
  Eigen::MatrixXd M;   ///< <phi_i, phi_j>_{L^2_e}
  Eigen::MatrixXd S;   ///< (1/2) int grad phi_i . grad phi_j rho^e
  Eigen::MatrixXd D;   ///< int kappa(t) m . grad phi_i phi_j rho^e
  Eigen::MatrixXd R;   ///< int c(t, m) phi_i phi_j rho^{e-1}
  Eigen::MatrixXd D0;  ///< (beta - e) int m . grad phi_i phi_j rho^{e-1}; zero when e = beta

  /// Generator of the homogeneous problem: M d' + A d = h.
  Eigen::MatrixXd A() const { return S + D + D0 - R; }
  /// Form L (or L_0) without the reaction term.
  Eigen::MatrixXd L() const { return S + D + D0; }
  /// Gram matrix of the H^1_e inner product.
  Eigen::MatrixXd H1() const { return 2.0 * S + M; }
};

/// Basis, rule and the time-independent pieces of every bilinear form.
class GalerkinSystem {
 public:
  GalerkinSystem(ModelParams params, const BasisSpec& spec, QuadratureResolution res = {})
      : params_(std::move(params)),
        rule_(QuadratureRule::ball(params_.n(), params_.b(), spec.rule_exponent(), res.n_radial, res.n_angular)),
        basis_(std::make_shared<BasisSet>(params_, spec, rule_)),
        tab_(basis_->tabulate(rule_)) {
    const int n = params_.n();
    const std::size_t N = rule_.size();
    const double e = spec.exponent;
    w_e_.resize(static_cast<Eigen::Index>(N));
    w_em1_.resize(static_cast<Eigen::Index>(N));
    for (std::size_t i = 0; i < N; ++i) {
      const double rh = rule_.base(i);
      w_e_(i) = rule_.weight(i) * std::pow(rh, e - rule_.mu());
      w_em1_(i) = rule_.weight(i) * std::pow(rh, e - 1.0 - rule_.mu());
    }
    const Eigen::MatrixXd& V = tab_.values;
    auto gram = [&](const Eigen::VectorXd& w, const Eigen::MatrixXd& left, const Eigen::MatrixXd& right) {
      return Eigen::MatrixXd(left.transpose() * (right.array().colwise() * w.array()).matrix());
    };
    M_ = gram(w_e_, V, V);
    M_ = 0.5 * (M_ + M_.transpose());
    S_ = Eigen::MatrixXd::Zero(V.cols(), V.cols());
    for (int a = 0; a < n; ++a) S_ += 0.5 * gram(w_e_, tab_.grads[a], tab_.grads[a]);
    S_ = 0.5 * (S_ + S_.transpose());
    G_em1_ = gram(w_em1_, V, V);
    G_em1_ = 0.5 * (G_em1_ + G_em1_.transpose());
    Eigen::MatrixXd coord(static_cast<Eigen::Index>(N), n);
    for (std::size_t i = 0; i < N; ++i) coord.row(static_cast<Eigen::Index>(i)) = rule_.node(i).transpose();
    drift_.assign(static_cast<std::size_t>(n * n), Eigen::MatrixXd());
    react_.assign(static_cast<std::size_t>(n * n), Eigen::MatrixXd());
    for (int a = 0; a < n; ++a) {
      for (int c = 0; c < n; ++c) {
        // D_ac: int m_c d_a phi_i phi_j rho^e, so kappa m . grad = sum kappa_ac m_c d_a.
        const Eigen::VectorXd wm = w_e_.array() * coord.col(c).array();
        drift_[idx(a, c)] = gram(wm, V, tab_.grads[a]);
        if (c >= a) {
          const Eigen::VectorXd wmm = w_em1_.array() * coord.col(a).array() * coord.col(c).array();
          react_[idx(a, c)] = gram(wmm, V, V);
        } else {
          react_[idx(a, c)] = react_[idx(c, a)];
        }
      }
    }
    const double deg = params_.beta() - e;
    D0_ = Eigen::MatrixXd::Zero(V.cols(), V.cols());
    if (deg != 0.0) {
      for (int a = 0; a < n; ++a) {
        const Eigen::VectorXd wm = w_em1_.array() * coord.col(a).array();
        D0_ += deg * gram(wm, V, tab_.grads[a]);
      }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M_, Eigen::EigenvaluesOnly);
    const double lmin = es.eigenvalues().minCoeff();
    const double lmax = es.eigenvalues().maxCoeff();
    gram_condition_ = lmin > 0.0 ? lmax / lmin : std::numeric_limits<double>::infinity();
    if (!(lmin > 0.0) || gram_condition_ > 1e12) {
      std::ostringstream os;
      os << "Gram matrix condition number " << gram_condition_;
      throw NumericalError("basis rank", os.str());
    }
    mass_llt_.compute(M_);
  }

  const ModelParams& params() const noexcept { return params_; }
  const QuadratureRule& rule() const noexcept { return rule_; }
  const BasisSet& basis() const noexcept { return *basis_; }
  std::shared_ptr<const BasisSet> basis_ptr() const noexcept { return basis_; }
  const Tabulation& tabulation() const noexcept { return tab_; }
  int size() const noexcept { return basis_->size(); }
  double exponent() const noexcept { return basis_->exponent(); }
  double gram_condition() const noexcept { return gram_condition_; }
  const Eigen::MatrixXd& mass() const noexcept { return M_; }
  const Eigen::MatrixXd& stiffness() const noexcept { return S_; }
  /// Gram matrix in L^2_{e-1}.
  const Eigen::MatrixXd& gram_em1() const noexcept { return G_em1_; }
  /// Quadrature weights times rho^{e - mu}: integrate F rho^e as w_e . F(nodes).
  const Eigen::VectorXd& weights_e() const noexcept { return w_e_; }
  const Eigen::VectorXd& weights_em1() const noexcept { return w_em1_; }

  AssembledOperator assemble(double t) const {
    const int n = params_.n();
    const Mat k = params_.kappa_at(t);
    AssembledOperator op;
    op.t = t;
    op.M = M_;
    op.S = S_;
    op.D0 = D0_;
    op.D = Eigen::MatrixXd::Zero(M_.rows(), M_.cols());
    op.R = (n * (0.5 * params_.b() - 1.0)) * G_em1_;
    for (int a = 0; a < n; ++a) {
      for (int c = 0; c < n; ++c) {
        if (k(a, c) == 0.0) continue;
        op.D += k(a, c) * drift_[idx(a, c)];
        op.R += 2.0 * k(a, c) * react_[idx(a, c)];
      }
    }
    return op;
  }

  /// Coefficients of the L^2_e projection of w0.
  template <class F>
  Eigen::VectorXd project(const F& w0) const {
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(size());
    Eigen::VectorXd vals(static_cast<Eigen::Index>(rule_.size()));
    for (std::size_t i = 0; i < rule_.size(); ++i) vals(static_cast<Eigen::Index>(i)) = w0(rule_.node(i));
    rhs = tab_.values.transpose() * (vals.array() * w_e_.array()).matrix();
    return mass_llt_.solve(rhs);
  }

  /// ||d||_M = ||sum d_i phi_i||_{L^2_e}.
  double norm_L2(const Eigen::VectorXd& d) const { return std::sqrt(std::max(0.0, d.dot(M_ * d))); }
  double norm_H1(const Eigen::VectorXd& d) const {
    return std::sqrt(std::max(0.0, d.dot(M_ * d) + 2.0 * d.dot(S_ * d)));
  }

 private:
  std::size_t idx(int a, int c) const { return static_cast<std::size_t>(a * params_.n() + c); }

  ModelParams params_;
  QuadratureRule rule_;
  std::shared_ptr<BasisSet> basis_;
  Tabulation tab_;
  Eigen::VectorXd w_e_, w_em1_;
  Eigen::MatrixXd M_, S_, G_em1_, D0_;
  std::vector<Eigen::MatrixXd> drift_, react_;
  Eigen::LLT<Eigen::MatrixXd> mass_llt_;
  double gram_condition_ = 0.0;
};

/// Constants of C1 ||w||_{H^1}^2 <= L[w,w] + C2 ||w||_{L^2}^2 on the discrete space.
struct GardingConstants {
  double C1 = 0.0;
  double C2 = 0.0;
  bool certified = false;
};

/// Smallest generalized eigenvalue of (sym L + C2 M, H^1 Gram), scanning C2
/// over {0} and the ladder 2^k / 16 until the eigenvalue reaches `floor`.
inline double garding_c1(const AssembledOperator& op, double C2) {
  const Eigen::MatrixXd L = op.L();
  const Eigen::MatrixXd K = 0.5 * (L + L.transpose()) + C2 * op.M;
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(K, op.H1(), Eigen::EigenvaluesOnly);
  return ges.eigenvalues().minCoeff();
}

inline GardingConstants garding_constants(const AssembledOperator& op, double floor = 0.05) {
  GardingConstants out;
  std::vector<double> ladder = {0.0};
  for (int k = 0; k <= 40; ++k) ladder.push_back(std::ldexp(1.0, k) / 16.0);
  for (double c2 : ladder) {
    const double c1 = garding_c1(op, c2);
    if (c1 >= floor) {
      out.C1 = c1;
      out.C2 = c2;
      out.certified = true;
      return out;
    }
  }
  out.C2 = ladder.back();
  out.C1 = garding_c1(op, out.C2);
  return out;
}

/// One Crank-Nicolson step of M d' + A d = h with A, h at the midpoint.
inline Eigen::VectorXd crank_nicolson_step(const Eigen::MatrixXd& M, const Eigen::MatrixXd& A_mid,
                                           const Eigen::VectorXd& h_mid, const Eigen::VectorXd& d, double dt) {
  if (!(dt > 0.0)) throw ConfigError("time step must be positive");
  const Eigen::MatrixXd lhs = M + 0.5 * dt * A_mid;
  const Eigen::VectorXd rhs = (M - 0.5 * dt * A_mid) * d + dt * h_mid;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(lhs);
  const Eigen::VectorXd out = lu.solve(rhs);
  if (!out.allFinite() || (lhs * out - rhs).norm() > 1e-9 * std::max(1.0, rhs.norm())) {
    throw NumericalError("linear solve", "singular Crank-Nicolson system M + dt/2 A");
  }
  return out;
}

/// Constants of the discrete energy estimate for M d' + L d = h under
/// L >= -C2 M: with a = C2 dt / 2 and g = (1 + a) / (1 - a),
///   ||d_{k+1}||_M <= g ||d_k||_M + dt ||h_k||_{M^{-1}} / (1 - a),
/// hence sup_k ||d_k||_M <= C (||d_0||_M + sup_k ||h_k||_{M^{-1}}).
struct EnergyBound {
  double growth = 1.0;  ///< g
  double constant = 1.0;  ///< C over the whole horizon
};

inline EnergyBound energy_bound(double C2, double dt, int steps) {
  const double a = 0.5 * C2 * dt;
  if (!(a < 1.0)) throw ConfigError("time step too large for the energy bound (C2 dt >= 2)");
  EnergyBound e;
  e.growth = (1.0 + a) / (1.0 - a);
  e.constant = std::pow(e.growth, steps) * std::max(1.0, steps * dt / (1.0 - a));
  return e;
}

/// ||h||_{M^{-1}} = sqrt(h^T M^{-1} h), the dual norm of the L^2 pairing.
inline double dual_norm(const Eigen::LLT<Eigen::MatrixXd>& M, const Eigen::VectorXd& h) {
  return std::sqrt(std::max(0.0, h.dot(M.solve(h))));
}

/// Coefficient time series with the basis that reconstructs w(t, m).
struct SolutionTrajectory {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> coeffs;
  std::shared_ptr<const GalerkinSystem> system;

  double dt() const { return times.size() > 1 ? times[1] - times[0] : 0.0; }
  double w(std::size_t k, const Vec& m, Vec* grad = nullptr) const {
    return system->basis().field(coeffs[k], m, grad);
  }
};

/// Right-hand side h at the midpoint of step k, (t_k + t_{k+1}) / 2.
using Forcing = std::function<Eigen::VectorXd(std::size_t step, double t_mid)>;

enum class Reaction { kFolded, kExcluded };

/// Crank-Nicolson over [t0, t1] in `steps` equal steps. The reaction c w rho^{e-1}
/// is part of A when folded; otherwise only the form L is implicit.
inline SolutionTrajectory integrate(std::shared_ptr<const GalerkinSystem> sys, const Eigen::VectorXd& d0,
                                    double t0, double t1, int steps, const Forcing& forcing = {},
                                    Reaction reaction = Reaction::kFolded) {
  if (steps < 1) throw ConfigError("number of time steps must be >= 1");
  if (d0.size() != sys->size()) throw ConfigError("initial coefficients have wrong size");
  const double dt = (t1 - t0) / steps;
  SolutionTrajectory traj;
  traj.system = sys;
  traj.times.reserve(static_cast<std::size_t>(steps) + 1);
  traj.coeffs.reserve(static_cast<std::size_t>(steps) + 1);
  traj.times.push_back(t0);
  traj.coeffs.push_back(d0);
  const bool frozen = sys->params().kappa().is_constant();
  std::optional<Eigen::PartialPivLU<Eigen::MatrixXd>> lu;
  Eigen::MatrixXd lhs, rhs_mat;
  const Eigen::MatrixXd& M = sys->mass();
  for (int k = 0; k < steps; ++k) {
    const double tm = t0 + (k + 0.5) * dt;
    if (!lu || !frozen) {
      const AssembledOperator op = sys->assemble(tm);
      const Eigen::MatrixXd A = reaction == Reaction::kFolded ? op.A() : op.L();
      lhs = M + 0.5 * dt * A;
      rhs_mat = M - 0.5 * dt * A;
      lu.emplace(lhs);
    }
    Eigen::VectorXd rhs = rhs_mat * traj.coeffs.back();
    if (forcing) rhs += dt * forcing(static_cast<std::size_t>(k), tm);
    Eigen::VectorXd next = lu->solve(rhs);
    if (!next.allFinite() || (lhs * next - rhs).norm() > 1e-9 * std::max(1.0, rhs.norm())) {
      throw NumericalError("linear solve", "singular Crank-Nicolson system M + dt/2 A");
    }
    traj.times.push_back(t0 + (k + 1) * dt);
    traj.coeffs.push_back(std::move(next));
  }
  return traj;
}

/// Diagnostics of one continuation window of the fixed-point iteration.
struct PicardWindow {
  double t0 = 0.0;
  double t1 = 0.0;
  int iterations = 0;
  double contraction = 0.0;  ///< largest measured iterate ratio once contracting
  std::vector<double> distances;
};

struct PicardResult {
  SolutionTrajectory trajectory;
  std::vector<PicardWindow> windows;
  int halvings = 0;
  double max_contraction = 0.0;
};

struct PicardOptions {
  int window_steps = 0;  ///< initial window length in time steps; 0 means the whole horizon
  double tolerance = 1e-10;
  double ratio_threshold = 0.9;
  int max_iterations = 400;
};

/// Fixed point of w -> U-solve(h = c w rho^{e-1}) on successive windows.
/// Each window is halved until three consecutive iterate ratios fall below
/// the threshold; the fixed point then satisfies the folded Crank-Nicolson
/// scheme exactly.
inline PicardResult picard_solve(std::shared_ptr<const GalerkinSystem> sys, const Eigen::VectorXd& d0, double T,
                                 int steps, PicardOptions opt = {}) {
  if (steps < 1) throw ConfigError("number of time steps must be >= 1");
  const double dt = T / steps;
  PicardResult out;
  out.trajectory.system = sys;
  out.trajectory.times.push_back(0.0);
  out.trajectory.coeffs.push_back(d0);
  int window = opt.window_steps > 0 ? std::min(opt.window_steps, steps) : steps;
  int done = 0;
  while (done < steps) {
    const int len = std::min(window, steps - done);
    const double ta = done * dt;
    const double tb = (done + len) * dt;
    const Eigen::VectorXd u0 = out.trajectory.coeffs.back();
    const double scale = std::max(1.0, sys->norm_L2(u0));
    std::vector<Eigen::VectorXd> prev(static_cast<std::size_t>(len) + 1, u0);
    PicardWindow pw;
    pw.t0 = ta;
    pw.t1 = tb;
    bool converged = false;
    bool contracting = false;
    int below = 0;
    double last_dist = -1.0;
    for (int it = 0; it < opt.max_iterations; ++it) {
      Forcing h = [&](std::size_t k, double tm) -> Eigen::VectorXd {
        const AssembledOperator op = sys->assemble(tm);
        return op.R * (0.5 * (prev[k] + prev[k + 1]));
      };
      SolutionTrajectory next = integrate(sys, u0, ta, tb, len, h, Reaction::kExcluded);
      double dist = 0.0;
      for (int k = 0; k <= len; ++k) {
        dist = std::max(dist, sys->norm_L2(next.coeffs[static_cast<std::size_t>(k)] - prev[static_cast<std::size_t>(k)]));
      }
      pw.distances.push_back(dist);
      prev = std::move(next.coeffs);
      pw.iterations = it + 1;
      if (dist <= opt.tolerance * scale) {
        converged = true;
        break;
      }
      if (last_dist > 0.0) {
        const double ratio = dist / last_dist;
        if (ratio < opt.ratio_threshold) {
          ++below;
          if (contracting || below >= 3) pw.contraction = std::max(pw.contraction, ratio);
          if (below >= 3) contracting = true;
        } else if (!contracting) {
          break;
        } else if (ratio >= 1.0) {
          break;
        }
      }
      last_dist = dist;
    }
    if (!converged || !contracting) {
      if (converged && pw.iterations <= 4) {
        // Converged before three ratios could be measured: trivially contracting.
        contracting = true;
      } else {
        if (len == 1) {
          throw NumericalError("picard contraction", "fixed-point map does not contract on a single step");
        }
        window = std::max(1, len / 2);
        ++out.halvings;
        continue;
      }
    }
    for (int k = 1; k <= len; ++k) {
      out.trajectory.times.push_back((done + k) * dt);
      out.trajectory.coeffs.push_back(prev[static_cast<std::size_t>(k)]);
    }
    out.max_contraction = std::max(out.max_contraction, pw.contraction);
    out.windows.push_back(std::move(pw));
    done += len;
  }
  return out;
}

}  // namespace fene

#endif  // FENE_GALERKIN_HPP_
