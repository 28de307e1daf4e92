#ifndef FENE_SCENARIOS_HPP_
#define FENE_SCENARIOS_HPP_

// End-to-end drivers: the density solve through f = w rho, positivity
// certificates, the relaxed-boundary construction f = (w + g) rho and the
// threshold sweep over b.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fene/basis.hpp"
#include "fene/errors.hpp"
#include "fene/galerkin.hpp"
#include "fene/geometry.hpp"
#include "fene/quadrature.hpp"
#include "fene/weighted_spaces.hpp"

namespace fene {

struct Resolution {
  int K_r = 10;
  int K_theta = 10;
  int n_radial = 64;
  int n_angular = 64;
  int n_steps = 200;

  /// Doubles basis degrees, quadrature and the number of steps.
  Resolution doubled() const { return {2 * K_r, 2 * K_theta, 2 * n_radial, 2 * n_angular, 2 * n_steps}; }

  /// Defaults for the relaxed-boundary problem, whose solution is only
  /// algebraically smooth at the boundary and needs more radial degrees.
  static Resolution relaxed() { return {28, 4, 64, 64, 200}; }

  void validate() const {
    if (K_r < 1 || K_theta < 1 || n_radial < 1 || n_angular < 1 || n_steps < 1) {
      throw ConfigError("resolution values must all be >= 1");
    }
  }
};

inline std::shared_ptr<const GalerkinSystem> make_system(const ModelParams& p, double exponent, const Resolution& r) {
  r.validate();
  BasisSpec spec;
  spec.exponent = exponent;
  spec.K_r = r.K_r;
  spec.K_theta = r.K_theta;
  return std::make_shared<const GalerkinSystem>(p, spec, QuadratureResolution{r.n_radial, r.n_angular});
}

// ---------------------------------------------------------------------------
// Initial data

struct InitialData {
  std::string name;
  ScalarField f;  ///< density f0(m)
};

namespace initial {

inline InitialData equilibrium(const ModelParams& p) {
  const QuadratureRule q = QuadratureRule::ball(p.n(), p.b(), 0.5 * p.b(), 16, 16);
  const EquilibriumField eq = equilibrium(p, q);
  return {"equilibrium", [eq](const Vec& m) { return eq(m); }};
}

/// f^eq (1 + A m_1 / sqrt(b)).
inline InitialData perturbed(const ModelParams& p, double amplitude) {
  const QuadratureRule q = QuadratureRule::ball(p.n(), p.b(), 0.5 * p.b(), 16, 16);
  const EquilibriumField eq = equilibrium(p, q);
  const double sb = p.sqrt_b();
  return {"perturbed", [eq, amplitude, sb](const Vec& m) { return eq(m) * (1.0 + amplitude * m(0) / sb); }};
}

/// rho^{b/2} exp(-a |m - c|^2), scaled to unit mass.
inline InitialData bump(const ModelParams& p, double sharpness, const Vec& center) {
  if (center.size() != p.n() || center.squaredNorm() >= p.b()) throw ConfigError("bump center must lie inside the ball");
  if (!(sharpness > 0.0)) throw ConfigError("bump sharpness must be positive");
  const double b = p.b();
  auto raw = [b, sharpness, center](const Vec& m) {
    const double rh = std::max(0.0, b - m.squaredNorm());
    return std::pow(rh, 0.5 * b) * std::exp(-sharpness * (m - center).squaredNorm());
  };
  const QuadratureRule q = QuadratureRule::ball(p.n(), b, 0.0, 96, 128);
  const double mass = integrate_weighted(raw, 0.0, q);
  return {"bump", [raw, mass](const Vec& m) { return raw(m) / mass; }};
}

inline InitialData zero() {
  return {"zero", [](const Vec&) { return 0.0; }};
}

/// f^eq (1 - 2 m_1 / sqrt(b)): negative on the half-disk m_1 > sqrt(b)/2.
inline InitialData negative(const ModelParams& p) {
  InitialData d = perturbed(p, -2.0);
  d.name = "negative";
  return d;
}

/// rho * sum_i c_i phi_i over a coarse beta-basis with seeded normal coefficients.
inline InitialData random(const ModelParams& p, unsigned seed, int K_r = 3, int K_theta = 3) {
  BasisSpec spec;
  spec.exponent = p.beta();
  spec.K_r = K_r;
  spec.K_theta = K_theta;
  const QuadratureRule q = QuadratureRule::ball(p.n(), p.b(), spec.rule_exponent(), 32, 32);
  auto basis = std::make_shared<BasisSet>(p, spec, q);
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::VectorXd c(basis->size());
  for (Eigen::Index i = 0; i < c.size(); ++i) c(i) = nd(gen);
  const double b = p.b();
  return {"random", [basis, c, b](const Vec& m) { return std::max(0.0, b - m.squaredNorm()) * basis->field(c, m); }};
}

}  // namespace initial

/// Radial profile of int_{|m|=r} f^2 rho^{-b/2} dS near the boundary. The
/// weighted norm is finite when it decays slower than d^{-1}.
inline void check_admissible(const ModelParams& p, const InitialData& f0) {
  const std::vector<double> d = boundary_ladder(p.sqrt_b(), 3, 14);
  std::vector<double> v;
  for (double dk : d) {
    const double r = p.sqrt_b() - dk;
    const double s = circle_trace_norm(
        p, [&](const Vec& m) { return f0.f(m) * std::pow(p.b() - m.squaredNorm(), -0.25 * p.b()); }, r, 128);
    if (!std::isfinite(s)) throw ConfigError("initial density '" + f0.name + "' is not finite near the boundary");
    v.push_back(s * s);
  }
  const double vmax = *std::max_element(v.begin(), v.end());
  if (vmax == 0.0) return;
  const double slope = decay_exponent(d, v, d.size() - 6);
  if (std::isfinite(slope) && slope <= -0.95) {
    std::ostringstream os;
    os << "initial density '" << f0.name << "' has infinite L^2_{-b/2} norm (boundary profile ~ d^" << slope << ")";
    throw ConfigError(os.str());
  }
}

// ---------------------------------------------------------------------------
// Trajectories of the density

/// Boundary forcing g(t, m) = scale * tau(t) * P(m).
class Lift {
 public:
  enum class Shape { kZero, kRadius2, kRadius4, kQuadrupole };
  enum class Profile { kLinear, kQuadratic, kConstant };

  Lift() = default;
  Lift(Shape shape, Profile profile, double scale) : shape_(shape), profile_(profile), scale_(scale) {}

  /// Library entries: "t|m|^2", "t^2|m|^2", "t|m|^4", "t(m1^2-m2^2)", "0".
  static Lift named(const std::string& name, double scale = 1.0) {
    if (name == "t|m|^2") return {Shape::kRadius2, Profile::kLinear, scale};
    if (name == "t^2|m|^2") return {Shape::kRadius2, Profile::kQuadratic, scale};
    if (name == "t|m|^4") return {Shape::kRadius4, Profile::kLinear, scale};
    if (name == "t(m1^2-m2^2)") return {Shape::kQuadrupole, Profile::kLinear, scale};
    if (name == "|m|^2") return {Shape::kRadius2, Profile::kConstant, scale};
    if (name == "0") return {Shape::kZero, Profile::kLinear, scale};
    throw ConfigError("unknown forcing g '" + name + "'");
  }

  bool is_zero() const { return shape_ == Shape::kZero || scale_ == 0.0; }
  double tau(double t) const {
    switch (profile_) {
      case Profile::kLinear: return t;
      case Profile::kQuadratic: return t * t;
      case Profile::kConstant: return 1.0;
    }
    return 0.0;
  }
  double dtau(double t) const {
    switch (profile_) {
      case Profile::kLinear: return 1.0;
      case Profile::kQuadratic: return 2.0 * t;
      case Profile::kConstant: return 0.0;
    }
    return 0.0;
  }
  /// Spatial factor P(m) and its gradient.
  double shape(const Vec& m, Vec* grad = nullptr) const {
    const double u = m.squaredNorm();
    switch (shape_) {
      case Shape::kZero:
        if (grad) *grad = Vec::Zero(m.size());
        return 0.0;
      case Shape::kRadius2:
        if (grad) *grad = 2.0 * m;
        return u;
      case Shape::kRadius4:
        if (grad) *grad = 4.0 * u * m;
        return u * u;
      case Shape::kQuadrupole: {
        if (grad) {
          *grad = Vec::Zero(m.size());
          (*grad)(0) = 2.0 * m(0);
          (*grad)(1) = -2.0 * m(1);
        }
        return m(0) * m(0) - m(1) * m(1);
      }
    }
    return 0.0;
  }
  double operator()(double t, const Vec& m, Vec* grad = nullptr) const {
    const double s = scale_ * tau(t);
    const double v = shape(m, grad);
    if (grad) *grad *= s;
    return s * v;
  }
  double scale() const noexcept { return scale_; }

 private:
  Shape shape_ = Shape::kZero;
  Profile profile_ = Profile::kLinear;
  double scale_ = 0.0;
};

/// f(t_k, m) = (w_k(m) + g(t_k, m)) rho(m) with w_k from a Galerkin trajectory.
struct DensityTrajectory {
  SolutionTrajectory w;
  Lift lift;

  const std::vector<double>& times() const { return w.times; }
  std::size_t size() const { return w.times.size(); }
  const ModelParams& params() const { return w.system->params(); }

  double f(std::size_t k, const Vec& m, Vec* grad = nullptr) const {
    const double b = params().b();
    const double rh = std::max(0.0, b - m.squaredNorm());
    Vec gw, gg;
    double v = w.w(k, m, grad ? &gw : nullptr);
    if (!lift.is_zero()) {
      v += lift(w.times[k], m, grad ? &gg : nullptr);
      if (grad) gw += gg;
    }
    if (grad) *grad = rh * gw - 2.0 * v * m;
    return v * rh;
  }

  /// Values and gradients of f at a fixed node set (tabulation of the basis on those nodes).
  struct Nodal {
    Eigen::VectorXd f;
    std::vector<Eigen::VectorXd> grad;
  };
  Nodal nodal(std::size_t k, const std::vector<Vec>& nodes, const Tabulation& tab) const {
    const int n = params().n();
    const double b = params().b();
    Nodal out;
    const Eigen::VectorXd wv = tab.values * w.coeffs[k];
    std::vector<Eigen::VectorXd> gw(static_cast<std::size_t>(n));
    for (int a = 0; a < n; ++a) gw[static_cast<std::size_t>(a)] = tab.grads[static_cast<std::size_t>(a)] * w.coeffs[k];
    out.f.resize(wv.size());
    out.grad.assign(static_cast<std::size_t>(n), Eigen::VectorXd(wv.size()));
    Vec gg;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const Eigen::Index ii = static_cast<Eigen::Index>(i);
      const Vec& m = nodes[i];
      const double rh = std::max(0.0, b - m.squaredNorm());
      double v = wv(ii);
      Vec gv(n);
      for (int a = 0; a < n; ++a) gv(a) = gw[static_cast<std::size_t>(a)](ii);
      if (!lift.is_zero()) {
        v += lift(w.times[k], m, &gg);
        gv += gg;
      }
      out.f(ii) = v * rh;
      for (int a = 0; a < n; ++a) out.grad[static_cast<std::size_t>(a)](ii) = rh * gv(a) - 2.0 * v * m(a);
    }
    return out;
  }
};

/// Radii, distances and ||f d^{-1}||_{L^2(|m| = r)} along the boundary ladder.
struct TraceProfile {
  std::vector<double> radius;
  std::vector<double> distance;
  std::vector<double> value;
  BoundaryLimit limit;
  double decay_exponent = std::numeric_limits<double>::quiet_NaN();
};

template <class F>
TraceProfile trace_profile(const ModelParams& p, const F& field, int n_points = 256) {
  TraceProfile out;
  out.distance = boundary_ladder(p.sqrt_b());
  for (double d : out.distance) {
    const double r = p.sqrt_b() - d;
    out.radius.push_back(r);
    out.value.push_back(circle_trace_norm(p, [&](const Vec& m) { return field(m) / (p.sqrt_b() - m.norm()); }, r, n_points));
  }
  out.limit = extrapolate_boundary_limit(out.distance, out.value);
  out.decay_exponent = decay_exponent(out.distance, out.value, 6);
  return out;
}

// ---------------------------------------------------------------------------
// Weak residual

/// Test functions (R^2 - |m|^2)^3 m_1^i m_2^j, i + j <= degree, supported in B(0, R).
class WeakResidual {
 public:
  WeakResidual(const ModelParams& p, double radius_fraction = 0.9, int degree = 3, int n_radial = 48,
               int n_angular = 64)
      : p_(p),
        R2_(radius_fraction * radius_fraction * p.b()),
        rule_(QuadratureRule::sub_ball(p.n(), radius_fraction * p.sqrt_b(), n_radial, n_angular)) {
    if (p.n() != 2) throw ConfigError("weak residual harness is implemented for n = 2");
    if (!(radius_fraction > 0.0 && radius_fraction < 1.0)) throw ConfigError("test support must lie inside the ball");
    for (int i = 0; i <= degree; ++i) {
      for (int j = 0; i + j <= degree; ++j) exps_.push_back({i, j});
    }
    const std::size_t N = rule_.size();
    psi_.assign(exps_.size(), Eigen::VectorXd(static_cast<Eigen::Index>(N)));
    dpsi_.assign(exps_.size(), std::vector<Eigen::VectorXd>(2, Eigen::VectorXd(static_cast<Eigen::Index>(N))));
    for (std::size_t t = 0; t < exps_.size(); ++t) {
      const auto [i, j] = exps_[t];
      for (std::size_t q = 0; q < N; ++q) {
        const Eigen::Index qq = static_cast<Eigen::Index>(q);
        const Vec& m = rule_.node(q);
        const double s = R2_ - m.squaredNorm();
        const double mono = std::pow(m(0), i) * std::pow(m(1), j);
        const double d0 = i == 0 ? 0.0 : i * std::pow(m(0), i - 1) * std::pow(m(1), j);
        const double d1 = j == 0 ? 0.0 : j * std::pow(m(0), i) * std::pow(m(1), j - 1);
        psi_[t](qq) = s * s * s * mono;
        dpsi_[t][0](qq) = s * s * s * d0 - 6.0 * s * s * m(0) * mono;
        dpsi_[t][1](qq) = s * s * s * d1 - 6.0 * s * s * m(1) * mono;
      }
      double h1 = 0.0;
      for (std::size_t q = 0; q < N; ++q) {
        const Eigen::Index qq = static_cast<Eigen::Index>(q);
        h1 += rule_.weight(q) * (psi_[t](qq) * psi_[t](qq) + dpsi_[t][0](qq) * dpsi_[t][0](qq) +
                                 dpsi_[t][1](qq) * dpsi_[t][1](qq));
      }
      psi_norm_.push_back(std::sqrt(h1));
    }
  }

  /// max over steps and tests of |R_k(psi)| / (||psi||_{H^1} * max_k ||f_k||_{H^1(B_R)}),
  /// where R_k is the weak form over one Crank-Nicolson step at the midpoint.
  double operator()(const DensityTrajectory& traj) const {
    const std::size_t K = traj.size();
    if (K < 2) return 0.0;
    const Tabulation tab = traj.w.system->basis().tabulate(rule_.nodes());
    std::vector<DensityTrajectory::Nodal> vals;
    vals.reserve(K);
    double scale = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      vals.push_back(traj.nodal(k, rule_.nodes(), tab));
      double h1 = 0.0;
      for (std::size_t q = 0; q < rule_.size(); ++q) {
        const Eigen::Index qq = static_cast<Eigen::Index>(q);
        h1 += rule_.weight(q) * (vals.back().f(qq) * vals.back().f(qq) + vals.back().grad[0](qq) * vals.back().grad[0](qq) +
                                 vals.back().grad[1](qq) * vals.back().grad[1](qq));
      }
      scale = std::max(scale, std::sqrt(h1));
    }
    if (scale == 0.0) return 0.0;
    const double b = p_.b();
    double worst = 0.0;
    for (std::size_t k = 0; k + 1 < K; ++k) {
      const double dt = traj.times()[k + 1] - traj.times()[k];
      const Mat kap = p_.kappa_at(0.5 * (traj.times()[k] + traj.times()[k + 1]));
      for (std::size_t t = 0; t < exps_.size(); ++t) {
        CompensatedSum s;
        for (std::size_t q = 0; q < rule_.size(); ++q) {
          const Eigen::Index qq = static_cast<Eigen::Index>(q);
          const Vec& m = rule_.node(q);
          const double rh = b - m.squaredNorm();
          const double fb = 0.5 * (vals[k].f(qq) + vals[k + 1].f(qq));
          const double g0 = 0.5 * (vals[k].grad[0](qq) + vals[k + 1].grad[0](qq));
          const double g1 = 0.5 * (vals[k].grad[1](qq) + vals[k + 1].grad[1](qq));
          const Vec km = kap * m;
          const double dp0 = dpsi_[t][0](qq), dp1 = dpsi_[t][1](qq);
          const double mdp = m(0) * dp0 + m(1) * dp1;
          const double val = (vals[k + 1].f(qq) - vals[k].f(qq)) / dt * psi_[t](qq) -
                             fb * (km(0) * dp0 + km(1) * dp1) + b * fb * mdp / (2.0 * rh) + 0.5 * (g0 * dp0 + g1 * dp1);
          s.add(rule_.weight(q) * val);
        }
        worst = std::max(worst, std::abs(s.value()) / psi_norm_[t]);
      }
    }
    return worst / scale;
  }

 private:
  ModelParams p_;
  double R2_;
  QuadratureRule rule_;
  std::vector<std::pair<int, int>> exps_;
  std::vector<Eigen::VectorXd> psi_;
  std::vector<std::vector<Eigen::VectorXd>> dpsi_;
  std::vector<double> psi_norm_;
};

inline double weak_residual(const DensityTrajectory& traj, double radius_fraction = 0.9, int degree = 3) {
  return WeakResidual(traj.params(), radius_fraction, degree)(traj);
}

/// ||f_1(t_k) - f_2(t_k)||_{L^2(B(0, R))} with R = radius_fraction * sqrt(b).
inline double interior_distance(const DensityTrajectory& a, std::size_t ka, const DensityTrajectory& b, std::size_t kb,
                                double radius_fraction = 0.9, int n_radial = 48, int n_angular = 64) {
  const ModelParams& p = a.params();
  const QuadratureRule q = QuadratureRule::sub_ball(p.n(), radius_fraction * p.sqrt_b(), n_radial, n_angular);
  return norm_L2_mu([&](const Vec& m) { return a.f(ka, m) - b.f(kb, m); }, 0.0, q);
}

// ---------------------------------------------------------------------------
// Density solve

struct FPFProblem {
  ModelParams params;
  InitialData f0;
  Resolution resolution;
};

struct FPFReport {
  std::vector<double> times;
  std::vector<double> mass;
  std::vector<double> min_f;
  std::vector<double> norm_f;        ///< ||f||_{L^2_{-b/2}} from nodal f
  std::vector<double> norm_w;        ///< ||w||_{L^2_beta} from coefficients
  std::vector<double> norm_w_h1;     ///< ||w||_{H^1_beta}
  std::vector<double> identity_defect;  ///< | ||f||^2_{L^2_{-b/2}} - ||w||^2_{L^2_beta} | / ||w||^2
  std::vector<double> perturbation;  ///< ||w - w_eq||_{L^2_beta}, kappa = 0 only
  TraceProfile trace;                ///< final time
  GardingConstants garding;
  double mass_drift = 0.0;
  double min_value = 0.0;
  double C_emp = 0.0;
  double norm_drift = 0.0;  ///< max_k | ||f_k|| - ||f_0|| | / ||f_0||
  double weak_residual = 0.0;
  double gram_condition = 0.0;
  double projection_error = 0.0;  ///< ||w0 - P w0||_{L^2_beta} / ||w0||
  int basis_size = 0;
};

struct FPFResult {
  DensityTrajectory trajectory;
  FPFReport report;
};

/// Garding constants of the form L at sampled times; the largest C2 is kept.
inline GardingConstants garding_over_horizon(const GalerkinSystem& sys, int samples = 5) {
  const double T = sys.params().horizon();
  const int count = sys.params().kappa().is_constant() ? 1 : samples;
  GardingConstants out;
  bool first = true;
  for (int s = 0; s < count; ++s) {
    const double t = count == 1 ? 0.0 : T * s / (count - 1);
    const GardingConstants g = garding_constants(sys.assemble(t));
    if (first || g.C2 > out.C2 || (g.C2 == out.C2 && g.C1 < out.C1)) out = g;
    out.certified = (first ? true : out.certified) && g.certified;
    first = false;
  }
  return out;
}

struct SolveOptions {
  bool weak_residual = true;
  bool trace_profile = true;
  bool garding = true;
};

inline FPFResult solve_fpf(const FPFProblem& prob, const SolveOptions& opt = {}) {
  const ModelParams& p = prob.params;
  check_admissible(p, prob.f0);
  auto sys = make_system(p, p.beta(), prob.resolution);
  const QuadratureRule& q = sys->rule();
  const double b = p.b();
  const std::size_t N = q.size();

  Eigen::VectorXd w0_nodes(static_cast<Eigen::Index>(N));
  for (std::size_t i = 0; i < N; ++i) {
    const double rh = q.base(i);
    w0_nodes(static_cast<Eigen::Index>(i)) = prob.f0.f(q.node(i)) / rh;
  }
  if (!w0_nodes.allFinite()) throw ConfigError("initial density is not finite at quadrature nodes");
  const Eigen::VectorXd& we = sys->weights_e();
  const Eigen::VectorXd d0 =
      sys->mass().llt().solve(sys->tabulation().values.transpose() * (w0_nodes.array() * we.array()).matrix());

  FPFResult res;
  res.trajectory.w = integrate(sys, d0, 0.0, p.horizon(), prob.resolution.n_steps);
  FPFReport& rep = res.report;
  rep.basis_size = sys->size();
  rep.gram_condition = sys->gram_condition();
  {
    const double n0 = std::sqrt((w0_nodes.array().square() * we.array()).sum());
    const Eigen::VectorXd diff = w0_nodes - sys->tabulation().values * d0;
    const double e0 = std::sqrt((diff.array().square() * we.array()).sum());
    rep.projection_error = n0 > 0.0 ? e0 / n0 : e0;
  }

  // Nodal weights for mass (int w rho) and the f-norm (int f^2 rho^{-b/2}).
  Eigen::VectorXd w_mass(static_cast<Eigen::Index>(N)), w_fnorm(static_cast<Eigen::Index>(N)), rhos(static_cast<Eigen::Index>(N));
  for (std::size_t i = 0; i < N; ++i) {
    const Eigen::Index ii = static_cast<Eigen::Index>(i);
    rhos(ii) = q.base(i);
    w_mass(ii) = q.weight(i) * std::pow(q.base(i), 1.0 - q.mu());
    w_fnorm(ii) = q.weight(i) * std::pow(q.base(i), -0.5 * b - q.mu());
  }
  const Eigen::VectorXd mass_vec = sys->tabulation().values.transpose() * w_mass;
  const bool relaxing = p.kappa().kind() == KappaSchedule::Kind::kZero;
  Eigen::VectorXd d_eq;
  if (relaxing) {
    // Steady state with the same mass: multiple of rho^{b/2 - 1}, the first basis function.
    d_eq = Eigen::VectorXd::Zero(sys->size());
    d_eq(0) = mass_vec.dot(d0) / mass_vec(0);
  }

  const auto& traj = res.trajectory.w;
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    const Eigen::VectorXd& d = traj.coeffs[k];
    const Eigen::VectorXd wv = sys->tabulation().values * d;
    const Eigen::VectorXd fv = wv.array() * rhos.array();
    rep.times.push_back(traj.times[k]);
    rep.mass.push_back(mass_vec.dot(d));
    rep.min_f.push_back(fv.minCoeff());
    const double nf2 = (fv.array().square() * w_fnorm.array()).sum();
    const double nw = sys->norm_L2(d);
    rep.norm_f.push_back(std::sqrt(std::max(0.0, nf2)));
    rep.norm_w.push_back(nw);
    rep.norm_w_h1.push_back(sys->norm_H1(d));
    rep.identity_defect.push_back(nw > 0.0 ? std::abs(nf2 - nw * nw) / (nw * nw) : std::abs(nf2));
    if (relaxing) rep.perturbation.push_back(sys->norm_L2(d - d_eq));
  }
  const double m0 = rep.mass.front();
  for (double m : rep.mass) {
    rep.mass_drift = std::max(rep.mass_drift, m0 != 0.0 ? std::abs(m - m0) / std::abs(m0) : std::abs(m - m0));
  }
  rep.min_value = *std::min_element(rep.min_f.begin(), rep.min_f.end());
  const double n0 = rep.norm_f.front();
  for (double v : rep.norm_f) {
    rep.C_emp = std::max(rep.C_emp, n0 > 0.0 ? v / n0 : 0.0);
    rep.norm_drift = std::max(rep.norm_drift, n0 > 0.0 ? std::abs(v - n0) / n0 : std::abs(v - n0));
  }
  for (double x : rep.mass) {
    if (!std::isfinite(x)) throw NumericalError("finite mass", "mass series contains a non-finite value");
  }
  if (opt.garding) rep.garding = garding_over_horizon(*sys);
  if (opt.trace_profile) {
    const std::size_t kT = traj.times.size() - 1;
    rep.trace = trace_profile(p, [&](const Vec& m) { return res.trajectory.f(kT, m); });
  }
  if (opt.weak_residual) rep.weak_residual = weak_residual(res.trajectory);
  return res;
}

// ---------------------------------------------------------------------------
// Positivity

struct MaximumPrincipleCert {
  double alpha = 0.0;
  double K = 0.0;
  double sup_bound = 0.0;  ///< interval bound of sup c over the ball
  double sup_grid = 0.0;   ///< max of c over the sampling grid
  bool certified = false;
};

/// c(m) = -K rho^2 + alpha [n b + (2 alpha + 2 - n - b) |m|^2] + (b - 2 alpha) rho m.kappa m.
inline double certificate_function(const ModelParams& p, double alpha, double K, const Mat& kappa, const Vec& m) {
  const double u = m.squaredNorm();
  const double rh = p.b() - u;
  const int n = p.n();
  return -K * rh * rh + alpha * (n * p.b() + (2.0 * alpha + 2.0 - n - p.b()) * u) +
         (p.b() - 2.0 * alpha) * rh * m.dot(kappa * m);
}

namespace detail {
/// max of a u^2 + b u + c over [lo, hi].
inline double quadratic_max(double a, double b, double c, double lo, double hi) {
  auto f = [&](double u) { return (a * u + b) * u + c; };
  double best = std::max(f(lo), f(hi));
  if (a < 0.0) {
    const double u = -b / (2.0 * a);
    if (u > lo && u < hi) best = std::max(best, f(u));
  }
  return best;
}
}  // namespace detail

/// Upper bound of c over the ball from m.kappa m <= lambda |m|^2 with
/// lambda = sup_t lambda_max(sym kappa(t)), then a polar-grid check of c itself.
inline MaximumPrincipleCert certify(const ModelParams& p, double alpha, double K, int grid = 64) {
  const double b = p.b();
  const int n = p.n();
  if (!(alpha > 0.0) || !(alpha < 0.5 * b - 1.0)) {
    std::ostringstream os;
    os << "certificate requires 0 < alpha < b/2 - 1 (alpha = " << alpha << ", b = " << b << ")";
    throw ConfigError(os.str());
  }
  if (!(K > 0.0)) throw ConfigError("certificate requires K > 0");
  std::vector<double> probe = {0.0, p.horizon()};
  for (double t : p.kappa().times()) {
    if (t > 0.0 && t < p.horizon()) probe.push_back(t);
  }
  double lam = 0.0;
  for (double t : probe) {
    const Mat k = p.kappa_at(t);
    const Eigen::MatrixXd sym = 0.5 * (Eigen::MatrixXd(k) + Eigen::MatrixXd(k).transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
    lam = std::max(lam, es.eigenvalues().maxCoeff());
  }
  // -K (b - u)^2 + alpha n b + alpha (2 alpha + 2 - n - b) u + (b - 2 alpha) lam u (b - u)
  const double s = b - 2.0 * alpha;
  const double qa = -K - s * lam;
  const double qb = 2.0 * K * b + alpha * (2.0 * alpha + 2.0 - n - b) + s * lam * b;
  const double qc = -K * b * b + alpha * n * b;
  MaximumPrincipleCert c;
  c.alpha = alpha;
  c.K = K;
  c.sup_bound = detail::quadratic_max(qa, qb, qc, 0.0, b);
  c.sup_grid = -std::numeric_limits<double>::infinity();
  for (double t : probe) {
    const Mat k = p.kappa_at(t);
    for (int i = 0; i <= grid; ++i) {
      const double r = p.sqrt_b() * i / grid;
      for (int j = 0; j < 4 * grid; ++j) {
        const double th = 2.0 * std::numbers::pi * j / (4 * grid);
        Vec m = Vec::Zero(n);
        m(0) = r * std::cos(th);
        m(1) = r * std::sin(th);
        c.sup_grid = std::max(c.sup_grid, certificate_function(p, alpha, K, k, m));
      }
    }
  }
  c.certified = c.sup_bound < 0.0 && c.sup_grid < 0.0;
  return c;
}

/// Search alpha over (b/2 - 1)/2, halving, and K over 1, 2, 4, ...
inline MaximumPrincipleCert positivity_certificate(const ModelParams& p) {
  const double amax = 0.5 * p.b() - 1.0;
  for (int ia = 1; ia <= 20; ++ia) {
    const double alpha = amax * std::ldexp(1.0, -ia);
    for (int ik = 0; ik <= 30; ++ik) {
      const MaximumPrincipleCert c = certify(p, alpha, std::ldexp(1.0, ik));
      if (c.certified) return c;
    }
  }
  std::ostringstream os;
  os << "no (alpha, K) certificate found for b = " << p.b() << ", sup|kappa| = " << p.kappa().sup_norm(p.horizon());
  throw NumericalError("positivity certificate", os.str());
}

struct PositivityReport {
  double min_value = 0.0;
  double time_of_min = 0.0;
  double min_initial = 0.0;
  bool negative_initial = false;
  bool pass = false;
};

/// Min of f over the quadrature nodes of the solve and all stored times.
inline PositivityReport check_positivity(const FPFResult& r, double tol = 1e-6) {
  PositivityReport out;
  const auto& mins = r.report.min_f;
  const auto it = std::min_element(mins.begin(), mins.end());
  out.min_value = *it;
  out.time_of_min = r.report.times[static_cast<std::size_t>(it - mins.begin())];
  out.min_initial = mins.front();
  out.negative_initial = mins.front() < -tol;
  out.pass = out.min_value >= -tol;
  return out;
}

// ---------------------------------------------------------------------------
// Relaxed boundary condition: f = (w + g) rho with w in the gamma-weighted space

struct NonUniqueProblem {
  ModelParams params;
  Lift g;
  std::optional<double> gamma;  ///< default: midpoint of (max{beta, -1}, 1)
  Resolution resolution;

  double gamma_value() const {
    const double lo = std::max(params.beta(), -1.0);
    return gamma ? *gamma : 0.5 * (lo + 1.0);
  }
};

struct NonUniqueReport {
  double gamma = 0.0;
  std::vector<double> times;
  std::vector<double> interior_norm;  ///< ||f(t)||_{L^2(B(0, 0.9 sqrt b))}
  std::vector<double> norm_w;
  TraceProfile trace;                 ///< final time
  GardingConstants garding;
  double weak_residual = 0.0;
  double initial_norm = 0.0;          ///< ||f(0)||_{L^2(B)}
  int basis_size = 0;
};

struct NonUniqueResult {
  DensityTrajectory trajectory;
  NonUniqueReport report;
};

/// <h, phi_j> for the forcing produced by the lift g; h(t) = s [tau' a + tau (b + sum kappa_ac K_ac)].
class LiftForcing {
 public:
  LiftForcing(const GalerkinSystem& sys, const Lift& g, int n_radial, int n_angular) : g_(g) {
    const ModelParams& p = sys.params();
    const int n = p.n();
    const double gam = sys.exponent();
    const double beta = p.beta();
    const QuadratureRule q = QuadratureRule::ball(n, p.b(), 0.0, n_radial, n_angular);
    const Tabulation tab = sys.basis().tabulate(q);
    const Eigen::Index L = sys.size();
    a_ = Eigen::VectorXd::Zero(L);
    b_ = Eigen::VectorXd::Zero(L);
    K_.assign(static_cast<std::size_t>(n * n), Eigen::VectorXd::Zero(L));
    n_ = n;
    if (g.is_zero()) return;
    const double c0 = n * (0.5 * p.b() - 1.0);
    Eigen::VectorXd ca(q.size()), cb(q.size());
    std::vector<Eigen::VectorXd> ck(static_cast<std::size_t>(n * n), Eigen::VectorXd(q.size()));
    std::vector<Eigen::VectorXd> cg(static_cast<std::size_t>(n), Eigen::VectorXd(q.size()));
    Vec gp;
    for (std::size_t i = 0; i < q.size(); ++i) {
      const Eigen::Index ii = static_cast<Eigen::Index>(i);
      const Vec& m = q.node(i);
      const double rh = q.base(i);
      const double w = q.weight(i);
      const double P = g.shape(m, &gp);
      const double rg = std::pow(rh, gam);
      const double rg1 = std::pow(rh, gam - 1.0);
      ca(ii) = -w * P * rg;
      cb(ii) = w * (-(beta - gam) * m.dot(gp) * rg1 + c0 * P * rg1);
      for (int a = 0; a < n; ++a) {
        cg[static_cast<std::size_t>(a)](ii) = -0.5 * w * gp(a) * rg;
        for (int c = 0; c < n; ++c) {
          ck[static_cast<std::size_t>(a * n + c)](ii) = w * (-m(c) * gp(a) * rg + 2.0 * m(a) * m(c) * P * rg1);
        }
      }
    }
    a_ = tab.values.transpose() * ca;
    b_ = tab.values.transpose() * cb;
    for (int a = 0; a < n; ++a) b_ += tab.grads[static_cast<std::size_t>(a)].transpose() * cg[static_cast<std::size_t>(a)];
    for (std::size_t j = 0; j < ck.size(); ++j) K_[j] = tab.values.transpose() * ck[j];
  }

  Eigen::VectorXd operator()(const ModelParams& p, double t) const {
    Eigen::VectorXd h = g_.dtau(t) * a_ + g_.tau(t) * b_;
    const Mat k = p.kappa_at(t);
    for (int a = 0; a < n_; ++a) {
      for (int c = 0; c < n_; ++c) {
        if (k(a, c) != 0.0) h += g_.tau(t) * k(a, c) * K_[static_cast<std::size_t>(a * n_ + c)];
      }
    }
    return g_.scale() * h;
  }

 private:
  Lift g_;
  int n_ = 2;
  Eigen::VectorXd a_, b_;
  std::vector<Eigen::VectorXd> K_;
};

inline NonUniqueResult solve_nonunique(const NonUniqueProblem& prob, const SolveOptions& opt = {}) {
  const ModelParams& p = prob.params;
  const double lo = std::max(p.beta(), -1.0);
  const double gam = prob.gamma_value();
  if (!(gam > lo && gam < 1.0)) {
    std::ostringstream os;
    os << "gamma = " << gam << " outside the window (" << lo << ", 1)";
    throw ConfigError(os.str());
  }
  {
    // g(0, .) must vanish.
    const QuadratureRule q = QuadratureRule::ball(p.n(), p.b(), 0.0, 8, 16);
    for (const Vec& m : q.nodes()) {
      if (prob.g(0.0, m) != 0.0) throw ConfigError("forcing g must vanish at t = 0");
    }
  }
  auto sys = make_system(p, gam, prob.resolution);
  const LiftForcing forcing(*sys, prob.g, prob.resolution.n_radial, prob.resolution.n_angular);
  const Eigen::VectorXd d0 = Eigen::VectorXd::Zero(sys->size());
  NonUniqueResult res;
  res.trajectory.lift = prob.g;
  res.trajectory.w = integrate(sys, d0, 0.0, p.horizon(), prob.resolution.n_steps,
                               [&](std::size_t, double tm) { return forcing(p, tm); });
  NonUniqueReport& rep = res.report;
  rep.gamma = gam;
  rep.basis_size = sys->size();
  const QuadratureRule inner = QuadratureRule::sub_ball(p.n(), 0.9 * p.sqrt_b(), 48, 64);
  const Tabulation tab = sys->basis().tabulate(inner.nodes());
  for (std::size_t k = 0; k < res.trajectory.size(); ++k) {
    const auto nod = res.trajectory.nodal(k, inner.nodes(), tab);
    double s = 0.0;
    for (std::size_t i = 0; i < inner.size(); ++i) s += inner.weight(i) * nod.f(static_cast<Eigen::Index>(i)) * nod.f(static_cast<Eigen::Index>(i));
    rep.times.push_back(res.trajectory.times()[k]);
    rep.interior_norm.push_back(std::sqrt(s));
    rep.norm_w.push_back(sys->norm_L2(res.trajectory.w.coeffs[k]));
  }
  {
    const QuadratureRule whole = QuadratureRule::ball(p.n(), p.b(), 0.0, 32, 32);
    rep.initial_norm = norm_L2_mu([&](const Vec& m) { return res.trajectory.f(0, m); }, 0.0, whole);
  }
  if (opt.garding) rep.garding = garding_over_horizon(*sys);
  if (opt.trace_profile) {
    const std::size_t kT = res.trajectory.size() - 1;
    rep.trace = trace_profile(p, [&](const Vec& m) { return res.trajectory.f(kT, m); });
  }
  if (opt.weak_residual) rep.weak_residual = weak_residual(res.trajectory);
  return res;
}

// ---------------------------------------------------------------------------
// Families over the basis

/// Largest and smallest of a per-function ratio over the basis.
struct FamilyBound {
  double max_ratio = 0.0;
  double min_ratio = std::numeric_limits<double>::infinity();
};

/// ||phi||_{L^2_{mu-2}} / ||phi||_{H^1_mu} over a beta-basis.
inline FamilyBound embedding_family(const ModelParams& p, double mu, const Resolution& r) {
  auto sys = make_system(p, p.beta(), r);
  const QuadratureRule& q = sys->rule();
  const Tabulation& tab = sys->tabulation();
  if (mu - 2.0 <= -1.0 && !(p.beta() < 1.0)) throw ConfigError("embedding family needs a vanishing basis");
  Eigen::VectorXd wl(q.size()), wr(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) {
    wl(static_cast<Eigen::Index>(i)) = q.weight(i) * std::pow(q.base(i), mu - 2.0 - q.mu());
    wr(static_cast<Eigen::Index>(i)) = q.weight(i) * std::pow(q.base(i), mu - q.mu());
  }
  FamilyBound out;
  for (Eigen::Index c = 0; c < tab.values.cols(); ++c) {
    const Eigen::ArrayXd v2 = tab.values.col(c).array().square();
    Eigen::ArrayXd g2 = Eigen::ArrayXd::Zero(v2.size());
    for (const auto& g : tab.grads) g2 += g.col(c).array().square();
    const double lhs = std::sqrt((v2 * wl.array()).sum());
    const double rhs = std::sqrt(((v2 + g2) * wr.array()).sum());
    out.max_ratio = std::max(out.max_ratio, lhs / rhs);
    out.min_ratio = std::min(out.min_ratio, lhs / rhs);
  }
  return out;
}

/// max over F = rho phi_i of max(a/c, c/a) with a = ||F||_{H^1_{-b/2}}, c = ||F / rho^{b/2}||_{H^1_{b/2}}.
inline FamilyBound equivalence_family(const ModelParams& p, const Resolution& r) {
  auto sys = make_system(p, p.beta(), r);
  const QuadratureRule& q = sys->rule();
  const Tabulation& tab = sys->tabulation();
  const double hb = 0.5 * p.b();
  const int n = p.n();
  FamilyBound out;
  const Eigen::Index N = static_cast<Eigen::Index>(q.size());
  for (Eigen::Index c = 0; c < tab.values.cols(); ++c) {
    CompensatedSum sa, sc;
    for (Eigen::Index i = 0; i < N; ++i) {
      const std::size_t ii = static_cast<std::size_t>(i);
      const Vec& m = q.node(ii);
      const double rh = q.base(ii);
      const double phi = tab.values(i, c);
      // F = rho phi, grad F = rho grad phi - 2 phi m; psi = F rho^{-b/2}.
      double gF2 = 0.0, gpsi2 = 0.0;
      const double psi = phi * std::pow(rh, 1.0 - hb);
      for (int a = 0; a < n; ++a) {
        const double gphi = tab.grads[static_cast<std::size_t>(a)](i, c);
        const double gF = rh * gphi - 2.0 * phi * m(a);
        const double gpsi = std::pow(rh, 1.0 - hb) * gphi - 2.0 * (1.0 - hb) * phi * std::pow(rh, -hb) * m(a);
        gF2 += gF * gF;
        gpsi2 += gpsi * gpsi;
      }
      const double F = rh * phi;
      sa.add(q.weight(ii) * std::pow(rh, -hb - q.mu()) * (gF2 + F * F));
      sc.add(q.weight(ii) * std::pow(rh, hb - q.mu()) * (gpsi2 + psi * psi));
    }
    const double a = std::sqrt(sa.value());
    const double cc = std::sqrt(sc.value());
    const double ratio = std::max(a / cc, cc / a);
    out.max_ratio = std::max(out.max_ratio, ratio);
    out.min_ratio = std::min(out.min_ratio, ratio);
  }
  return out;
}

/// Left side and integrated-by-parts right side of
/// int m.grad(u^2) rho^{gamma-1} = -int u^2 (n rho^{gamma-1} + 2 (1 - gamma) |m|^2 rho^{gamma-2}).
struct RadialSignPair {
  double lhs;
  double rhs;
};

inline RadialSignPair radial_sign_pair(const GalerkinSystem& sys, const Eigen::VectorXd& coeffs) {
  const QuadratureRule& q = sys.rule();
  const Tabulation& tab = sys.tabulation();
  const double gam = sys.exponent();
  const int n = sys.params().n();
  const Eigen::VectorXd u = tab.values * coeffs;
  std::vector<Eigen::VectorXd> gu;
  for (const auto& g : tab.grads) gu.push_back(g * coeffs);
  CompensatedSum l, r;
  for (std::size_t i = 0; i < q.size(); ++i) {
    const Eigen::Index ii = static_cast<Eigen::Index>(i);
    const Vec& m = q.node(i);
    const double rh = q.base(i);
    double mg = 0.0;
    for (int a = 0; a < n; ++a) mg += m(a) * gu[static_cast<std::size_t>(a)](ii);
    const double w = q.weight(i);
    l.add(w * 2.0 * u(ii) * mg * std::pow(rh, gam - 1.0 - q.mu()));
    r.add(-w * u(ii) * u(ii) *
          (n * std::pow(rh, gam - 1.0 - q.mu()) + 2.0 * (1.0 - gam) * m.squaredNorm() * std::pow(rh, gam - 2.0 - q.mu())));
  }
  return {l.value(), r.value()};
}

// ---------------------------------------------------------------------------
// Threshold sweep

struct SweepRow {
  double b = 0.0;
  std::string status;  ///< "ok" or "rejected: ..."
  double beta = std::numeric_limits<double>::quiet_NaN();
  double decay_exponent = std::numeric_limits<double>::quiet_NaN();
  double expected_exponent = std::numeric_limits<double>::quiet_NaN();
  double trace_limit = std::numeric_limits<double>::quiet_NaN();
  double equivalence_bound = std::numeric_limits<double>::quiet_NaN();
  TraceProfile profile;
};

/// Equilibrium trace profile ||f^eq d^{-1}||_{L^2(|m| = r)} and its decay exponent per b.
inline std::vector<SweepRow> threshold_sweep(const std::vector<double>& bs, int n = 2,
                                             std::optional<Resolution> equivalence = std::nullopt) {
  std::vector<SweepRow> rows;
  for (double b : bs) {
    SweepRow row;
    row.b = b;
    try {
      const ModelParams p(n, b, KappaSchedule::zero(n), 1.0);
      const InitialData eq = initial::equilibrium(p);
      row.profile = trace_profile(p, eq.f);
      row.beta = p.beta();
      row.decay_exponent = row.profile.decay_exponent;
      row.expected_exponent = 0.5 * b - 1.0;
      row.trace_limit = row.profile.limit.value;
      if (equivalence) row.equivalence_bound = equivalence_family(p, *equivalence).max_ratio;
      row.status = "ok";
    } catch (const ConfigError& e) {
      row.status = std::string("rejected: ") + (std::string(e.what()).find("b>2") != std::string::npos
                                                    ? "condition b>2"
                                                    : e.what());
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace fene

#endif  // FENE_SCENARIOS_HPP_
