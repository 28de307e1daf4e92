#ifndef FENE_WEIGHTED_SPACES_HPP_
#define FENE_WEIGHTED_SPACES_HPP_

// Integration against rho^mu on the ball, weighted Sobolev norms, traces on
// spheres |m| = r and their boundary limits.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "fene/errors.hpp"
#include "fene/geometry.hpp"
#include "fene/quadrature.hpp"

namespace fene {

using ScalarField = std::function<double(const Vec&)>;
using VectorField = std::function<Vec(const Vec&)>;

/// Neumaier-compensated running sum; the summation order is fixed by the caller.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// Sum_i w_i rho_i^{mu - q.mu} F(m_i). Exact for polynomial F of degree
/// <= q.order() whenever mu - q.mu is a non-negative integer.
template <class F>
double integrate_weighted(const F& field, double mu, const QuadratureRule& q) {
  CompensatedSum s;
  const double shift = mu - q.mu();
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double v = field(q.node(i));
    const double w = shift == 0.0 ? q.weight(i) : q.weight(i) * std::pow(q.base(i), shift);
    s.add(w * v);
  }
  const double out = s.value();
  if (!std::isfinite(out)) {
    throw NumericalError("integrate_weighted", "integrand produced a non-finite value");
  }
  return out;
}

template <class F>
double norm_L2_mu(const F& field, double mu, const QuadratureRule& q) {
  return std::sqrt(integrate_weighted([&](const Vec& m) { double v = field(m); return v * v; }, mu, q));
}

/// (int (|grad F|^2 + F^2) rho^mu dm)^{1/2}.
template <class F, class G>
double norm_H1_mu(const F& field, const G& grad, double mu, const QuadratureRule& q) {
  return std::sqrt(integrate_weighted(
      [&](const Vec& m) {
        const double v = field(m);
        return grad(m).squaredNorm() + v * v;
      },
      mu, q));
}

/// Normalization of f^eq by quadrature.
inline EquilibriumField equilibrium(const ModelParams& p, const QuadratureRule& q) {
  if (std::abs(q.radius_sq() - p.b()) > 1e-14 * p.b() || q.dim() != p.n()) {
    throw ConfigError("equilibrium: quadrature rule does not match the model ball");
  }
  const double Z = integrate_weighted([](const Vec&) { return 1.0; }, 0.5 * p.b(), q);
  return EquilibriumField(p, Z);
}

/// (int_{|m|=r} F^2 dS)^{1/2}.
template <class F>
double circle_trace_norm(const ModelParams& p, const F& field, double r, int n_points = 256) {
  if (!(r > 0.0) || !(r < p.sqrt_b())) throw DomainError("trace radius must lie in (0, sqrt(b))");
  const TraceRule tr(p.n(), r, n_points);
  CompensatedSum s;
  for (std::size_t i = 0; i < tr.size(); ++i) {
    const double v = field(tr.nodes()[i]);
    s.add(tr.weights()[i] * v * v);
  }
  return std::sqrt(s.value());
}

/// Distance ladder d_k = sqrt(b) 2^{-k}, k = 3..18 (radii sqrt(b)(1 - 2^{-k})).
inline std::vector<double> boundary_ladder(double sqrt_b, int k_min = 3, int k_max = 18) {
  std::vector<double> d;
  for (int k = k_min; k <= k_max; ++k) d.push_back(sqrt_b * std::ldexp(1.0, -k));
  return d;
}

/// Limit of a sampled quantity as d -> 0 along the ladder.
struct BoundaryLimit {
  double value = 0.0;
  bool converged = false;
  bool diverged = false;
  int level = 0;  ///< number of Aitken sweeps used
  double spread = 0.0;
  std::vector<double> distances;
  std::vector<double> samples;
};

namespace detail {
inline std::vector<double> aitken(const std::vector<double>& v, double scale) {
  std::vector<double> out;
  const double noise = 64.0 * std::numeric_limits<double>::epsilon() * scale;
  for (std::size_t k = 2; k < v.size(); ++k) {
    const double d1 = v[k - 1] - v[k - 2];
    const double d2 = v[k] - v[k - 1];
    const double den = d2 - d1;
    if (std::abs(d2) <= noise || std::abs(den) <= noise) {
      out.push_back(v[k]);
    } else {
      out.push_back(v[k] - d2 * d2 / den);
    }
  }
  return out;
}
}  // namespace detail

/// Geometric-ladder extrapolation: repeated Aitken sweeps remove power-law
/// corrections d^s. Converged when the last three estimates of some sweep
/// level agree to rel_tol * max|samples|.
inline BoundaryLimit extrapolate_boundary_limit(std::vector<double> distances, std::vector<double> samples,
                                                double rel_tol = 1e-8) {
  BoundaryLimit out;
  out.distances = std::move(distances);
  out.samples = std::move(samples);
  const auto& v = out.samples;
  double scale = 0.0;
  for (double x : v) {
    if (!std::isfinite(x)) {
      out.diverged = true;
      out.value = std::numeric_limits<double>::infinity();
      return out;
    }
    scale = std::max(scale, std::abs(x));
  }
  if (scale == 0.0) {
    out.converged = true;
    return out;
  }
  const std::size_t n = v.size();
  if (n >= 4) {
    // Differences that keep growing toward the boundary signal a blow-up.
    int growing = 0;
    for (std::size_t k = n - 3; k < n; ++k) {
      const double d_prev = std::abs(v[k - 1] - v[k - 2]);
      const double d_cur = std::abs(v[k] - v[k - 1]);
      if (d_cur > 1e-12 * scale && d_cur >= d_prev) ++growing;
    }
    if (growing == 3) {
      out.diverged = true;
      out.value = v.back();
      return out;
    }
  }
  std::vector<double> level = v;
  double best_spread = std::numeric_limits<double>::infinity();
  for (int l = 0; l <= 3 && level.size() >= 3; ++l) {
    const std::size_t m = level.size();
    const double a = level[m - 1];
    const double spread = std::max(std::abs(a - level[m - 2]), std::abs(a - level[m - 3]));
    if (spread < best_spread) {
      best_spread = spread;
      out.value = a;
      out.level = l;
    }
    if (spread <= rel_tol * scale) {
      out.converged = true;
      out.value = a;
      out.level = l;
      best_spread = spread;
      break;
    }
    level = detail::aitken(level, scale);
  }
  out.spread = best_spread;
  return out;
}

/// Samples quantity(r) on the ladder and extrapolates to r = sqrt(b).
template <class Q>
BoundaryLimit boundary_limit(const ModelParams& p, const Q& quantity, double rel_tol = 1e-8) {
  std::vector<double> d = boundary_ladder(p.sqrt_b());
  std::vector<double> v;
  v.reserve(d.size());
  for (double dk : d) v.push_back(quantity(p.sqrt_b() - dk));
  return extrapolate_boundary_limit(std::move(d), std::move(v), rel_tol);
}

/// Boundary value of the trace map u -> u rho^{(gamma-1)/2}.
template <class F>
BoundaryLimit t0_trace_norm(const ModelParams& p, const F& field, double gamma) {
  if (!(gamma < 1.0)) throw ConfigError("T0 trace requires gamma < 1");
  const double e = 0.5 * (gamma - 1.0);
  return boundary_limit(p, [&](double r) {
    return circle_trace_norm(p, [&](const Vec& m) { return field(m) * std::pow(p.b() - m.squaredNorm(), e); }, r);
  });
}

/// Least-squares slope of log v against log d over the samples with index >= first.
inline double decay_exponent(const std::vector<double>& d, const std::vector<double>& v, std::size_t first = 0) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t cnt = 0;
  for (std::size_t i = first; i < d.size(); ++i) {
    if (!(v[i] > 0.0)) continue;
    const double x = std::log(d[i]);
    const double y = std::log(v[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++cnt;
  }
  if (cnt < 2) return std::numeric_limits<double>::quiet_NaN();
  return (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
}

/// (||F||_{L^2_{mu-2}}, ||F||_{H^1_mu}); the caller compares lhs <= C0 rhs.
struct EmbeddingPair {
  double lhs;
  double rhs;
};

template <class F, class G>
EmbeddingPair embedding_defect(const ModelParams& p, const F& field, const G& grad, double mu,
                               const QuadratureRule& q) {
  if (mu - 2.0 <= -1.0) {
    // rho^{mu-2} is not integrable up to the boundary unless F vanishes there.
    double scale = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) scale = std::max(scale, std::abs(field(q.node(i))));
    if (scale > 0.0) {
      const BoundaryLimit tr = boundary_limit(p, [&](double r) { return circle_trace_norm(p, field, r, 128); }, 1e-6);
      const double r_ref = std::sqrt(static_cast<double>(sphere_area(p.n())) * std::pow(p.sqrt_b(), p.n() - 1));
      if (tr.diverged || std::abs(tr.value) > 1e-6 * scale * r_ref) {
        throw NumericalError("embedding integrability",
                             "field does not vanish on the boundary and mu - 2 <= -1");
      }
    }
  }
  return {norm_L2_mu(field, mu - 2.0, q), norm_H1_mu(field, grad, mu, q)};
}

/// (||F||_{H^1_{-b/2}}, ||F / rho^{b/2}||_{H^1_{b/2}}).
struct EquivalencePair {
  double a;
  double c;
};

template <class F, class G>
EquivalencePair equivalence_ratio(const ModelParams& p, const F& field, const G& grad, const QuadratureRule& q) {
  if (!(p.b() > 2.0)) throw ConfigError("condition b>2 violated");
  const double hb = 0.5 * p.b();
  const double a = norm_H1_mu(field, grad, -hb, q);
  auto psi = [&](const Vec& m) { return field(m) * std::pow(p.b() - m.squaredNorm(), -hb); };
  auto grad_psi = [&](const Vec& m) -> Vec {
    const double rh = p.b() - m.squaredNorm();
    return Vec(grad(m) * std::pow(rh, -hb) + (p.b() * field(m) * std::pow(rh, -hb - 1.0)) * m);
  };
  const double c = norm_H1_mu(psi, grad_psi, hb, q);
  return {a, c};
}

}  // namespace fene

#endif  // FENE_WEIGHTED_SPACES_HPP_
