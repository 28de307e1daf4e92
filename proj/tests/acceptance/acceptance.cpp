// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fene/fene.hpp"

namespace {

using fene::KappaSchedule;
using fene::ModelParams;
using fene::Resolution;
using fene::Vec;
constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& name, double measured, const std::string& bound) {
    pass = pass && ok;
    detail << " " << name << "=" << fene::format_double(measured) << (ok ? "" : "!") << " (" << bound << ")";
  }
};

ModelParams model(double b, double shear = 0.0, double T = 1.0) {
  return ModelParams(2, b, shear == 0.0 ? KappaSchedule::zero(2) : KappaSchedule::shear(2, shear), T);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

fene::SolveOptions lean() { return fene::SolveOptions{false, false, false}; }

double rel_change(double a, double b) { return std::abs(a - b) / std::abs(b); }

void conservation(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const ModelParams p = model(4.0, 1.0);
  const auto r = fene::solve_fpf({p, fene::initial::perturbed(p, 0.3), Resolution{}}, lean());
  const double secs = seconds_since(t0);
  o.require(r.report.mass_drift < 1e-8, "mass_drift", r.report.mass_drift, "< 1e-8");
  o.require(secs < 60.0, "runtime_s", secs, "< 60");
}

void positivity(Outcome& o) {
  const ModelParams p = model(4.0, 1.0);
  const auto f0 = fene::initial::bump(p, 1.0, Vec{{0.5, 0.0}});
  const auto r1 = fene::solve_fpf({p, f0, Resolution{}}, lean());
  const auto r2 = fene::solve_fpf({p, f0, Resolution{}.doubled()}, lean());
  const auto p1 = fene::check_positivity(r1), p2 = fene::check_positivity(r2);
  o.require(!p1.negative_initial, "min_initial", p1.min_initial, ">= -1e-6");
  o.require(p1.min_value >= -1e-6, "min_default", p1.min_value, ">= -1e-6");
  o.require(p2.min_value >= -1e-8, "min_doubled", p2.min_value, ">= -1e-8");
  const auto c = fene::positivity_certificate(model(4.0));
  // Quadratic oracle on u = |m|^2 in [0, 4]: -u^2 + 6.5u - 12 has vertex value -1.4375.
  const double oracle = -12.0 + 6.5 * 6.5 / 4.0;
  o.require(c.alpha == 0.5, "alpha", c.alpha, "= 0.5");
  o.require(c.K == 1.0, "K", c.K, "= 1");
  o.require(c.certified && c.sup_bound < 0.0, "sup_c", c.sup_bound, "< 0");
  o.require(std::abs(c.sup_bound - oracle) <= 1e-12, "sup_c_vs_oracle", std::abs(c.sup_bound - oracle), "<= 1e-12");
}

void equilibrium(Outcome& o) {
  const ModelParams p = model(4.0);
  const auto r = fene::solve_fpf({p, fene::initial::equilibrium(p), Resolution{}}, lean());
  const auto& traj = r.trajectory.w;
  const double n0 = traj.system->norm_L2(traj.coeffs.front());
  double drift = 0.0;
  for (const auto& d : traj.coeffs) drift = std::max(drift, traj.system->norm_L2(d - traj.coeffs.front()) / n0);
  o.require(drift < 1e-8, "relative_drift", drift, "< 1e-8");
}

void energy(Outcome& o) {
  // At rate 1 the norm decays and C_emp = 1; rate 8 has transient growth.
  const std::vector<std::pair<double, std::vector<Resolution>>> cases = {
      {1.0, {{6, 6, 48, 48, 100}, {8, 8, 56, 56, 200}, {10, 10, 64, 64, 400}}},
      {8.0, {{8, 8, 56, 56, 200}, {10, 10, 64, 64, 400}, {12, 12, 72, 72, 800}}}};
  for (const auto& [rate, levels] : cases) {
    const ModelParams p = model(4.0, rate);
    for (unsigned seed : {11u, 12u, 13u}) {
      std::vector<double> c;
      for (const Resolution& r : levels) c.push_back(fene::solve_fpf({p, fene::initial::random(p, seed), r}, lean()).report.C_emp);
      double spread = 0.0;
      for (double v : c) spread = std::max(spread, rel_change(v, c.back()));
      const std::string tag = "[rate=" + fene::format_double(rate) + ",seed=" + std::to_string(seed) + "]";
      o.require(std::isfinite(c.back()), "C_emp" + tag, c.back(), "finite");
      o.require(spread <= 0.05, "spread" + tag, spread, "<= 0.05");
    }
  }
}

void garding(Outcome& o) {
  double c1_min = std::numeric_limits<double>::infinity();
  bool all = true;
  for (double b : {2.5, 3.0, 4.0, 6.0}) {
    for (double rate : {0.0, 1.0, 2.0}) {
      const ModelParams p = model(b, rate);
      const auto g = fene::garding_over_horizon(*fene::make_system(p, p.beta(), Resolution{}));
      all = all && g.certified && g.C1 > 0.0;
      c1_min = std::min(c1_min, g.C1);
    }
  }
  o.require(all, "certified_cases", all ? 12 : 0, "= 12");
  o.require(c1_min > 0.0, "min_C1", c1_min, "> 0");
}

void embedding(Outcome& o) {
  const ModelParams p = model(4.0);
  const Resolution lo{5, 5, 64, 64, 1};
  for (const auto& [label, mu] : {std::pair<std::string, double>{"beta", p.beta()}, {"b/2", 0.5 * p.b()}}) {
    const double c1 = fene::embedding_family(p, mu, lo).max_ratio;
    const double c2 = fene::embedding_family(p, mu, lo.doubled()).max_ratio;
    o.require(std::isfinite(c2), "C0[" + label + "]", c2, "finite");
    o.require(rel_change(c1, c2) <= 0.10, "change[" + label + "]", rel_change(c1, c2), "<= 0.10");
  }
}

void equivalence(Outcome& o) {
  const Resolution r{7, 7, 64, 64, 1};
  double prev = 0.0;
  for (double b : {4.0, 3.0, 2.5, 2.1}) {
    const double v = fene::equivalence_family(model(b), r).max_ratio;
    o.require(std::isfinite(v) && v >= prev, "bound[b=" + fene::format_double(b) + "]", v,
              b == 4.0 ? "finite" : "finite, >= previous");
    prev = v;
  }
}

void radial_sign(Outcome& o) {
  const ModelParams p = model(4.0);
  auto sys = fene::make_system(p, 0.5, Resolution{});
  std::mt19937_64 gen(2024);
  std::normal_distribution<double> nd;
  double max_lhs = -std::numeric_limits<double>::infinity(), max_rel = 0.0;
  for (int t = 0; t < 100; ++t) {
    Eigen::VectorXd d(sys->size());
    for (Eigen::Index i = 0; i < d.size(); ++i) d(i) = nd(gen);
    const auto pr = fene::radial_sign_pair(*sys, d);
    max_lhs = std::max(max_lhs, pr.lhs);
    max_rel = std::max(max_rel, std::abs(pr.lhs - pr.rhs) / std::abs(pr.rhs));
  }
  o.require(max_lhs <= 1e-10, "max_lhs", max_lhs, "<= 1e-10");
  o.require(max_rel <= 1e-9, "max_relative_mismatch", max_rel, "<= 1e-9");
}

void uniqueness(Outcome& o) {
  const ModelParams p = model(4.0, 1.0);
  const auto r = fene::solve_fpf({p, fene::initial::zero(), Resolution{}}, lean());
  o.require(r.report.norm_f.back() < 1e-12, "norm_f_T", r.report.norm_f.back(), "< 1e-12");
}

void nonuniqueness(Outcome& o) {
  const ModelParams p = model(4.0);
  const double gamma = 0.75;
  const fene::SolveOptions opt{true, true, false};
  auto pair_at = [&](const Resolution& res) {
    const auto r1 = fene::solve_nonunique({p, fene::Lift::named("t|m|^2", 1.0), gamma, res}, opt);
    const auto r2 = fene::solve_nonunique({p, fene::Lift::named("t|m|^2", 2.0), gamma, res}, opt);
    return std::pair{r1, r2};
  };
  const auto [a1, a2] = pair_at(Resolution::relaxed());
  Resolution fine = Resolution::relaxed();
  fine.K_r = 36;
  const auto [b1, b2] = pair_at(fine);
  const std::size_t kT = a1.trajectory.size() - 1;
  const double sep = fene::interior_distance(a1.trajectory, kT, a2.trajectory, kT);
  const double sep_fine = fene::interior_distance(b1.trajectory, kT, b2.trajectory, kT);
  o.require(a1.report.weak_residual < 1e-6, "residual_g1", a1.report.weak_residual, "< 1e-6");
  o.require(a2.report.weak_residual < 1e-6, "residual_g2", a2.report.weak_residual, "< 1e-6");
  o.require(a1.report.initial_norm == 0.0 && a2.report.initial_norm == 0.0, "initial_norm",
            std::max(a1.report.initial_norm, a2.report.initial_norm), "= 0");
  o.require(sep > 1e3 * fene::kSolverTolerance, "separation", sep, "> 1e-7");
  o.require(rel_change(sep, sep_fine) <= 1e-3, "separation_refinement_change", rel_change(sep, sep_fine), "<= 1e-3");
  for (const auto* r : {&a1, &a2}) {
    const std::string tag = r == &a1 ? "g1" : "g2";
    const auto& lim = r->report.trace.limit;
    const double scale = r->report.interior_norm.back();
    o.require(!lim.diverged && lim.value >= 0.1 * scale, "trace_limit_" + tag, lim.value,
              ">= 0.1 x interior " + fene::format_double(scale));
  }
  const auto eq = fene::trace_profile(p, fene::initial::equilibrium(p).f);
  o.require(std::abs(eq.decay_exponent - 1.0) <= 0.05, "equilibrium_decay_exponent", eq.decay_exponent, "1 +/- 0.05");
  o.require(std::abs(eq.limit.value) < 1e-6, "equilibrium_trace_limit", eq.limit.value, "< 1e-6");
}

void picard(Outcome& o) {
  const ModelParams p = model(4.0, 1.0);
  auto sys = fene::make_system(p, p.beta(), Resolution{});
  const auto f0 = fene::initial::random(p, 7);
  const Eigen::VectorXd d0 = sys->project([&](const Vec& m) { return f0.f(m) / fene::rho(p, m); });
  const int steps = Resolution{}.n_steps;
  const auto pic = fene::picard_solve(sys, d0, p.horizon(), steps);
  const auto dir = fene::integrate(sys, d0, 0.0, p.horizon(), steps);
  double dist = 0.0;
  for (std::size_t k = 0; k < dir.coeffs.size(); ++k) {
    dist = std::max(dist, sys->norm_L2(pic.trajectory.coeffs[k] - dir.coeffs[k]));
  }
  o.require(dist < 1e-8, "sup_t_distance", dist, "< 1e-8");
  o.require(pic.max_contraction < 0.9, "contraction", pic.max_contraction, "< 0.9");
}

void quadrature(Outcome& o) {
  double worst = 0.0;
  for (double b : {2.5, 4.0, 6.0}) {
    for (double mu : {-0.75, -0.5, 0.0, 0.5, 1.0, 2.0, 3.0}) {
      const auto q = fene::QuadratureRule::ball(2, b, mu, 24, 24);
      const double a = fene::integrate_weighted([](const Vec&) { return 1.0; }, mu, q);
      const double m2 = fene::integrate_weighted([](const Vec& m) { return m.squaredNorm(); }, mu, q);
      const double ea = kPi * std::pow(b, mu + 1) / (mu + 1);
      const double em2 = kPi * std::pow(b, mu + 2) / ((mu + 1) * (mu + 2));
      worst = std::max({worst, rel_change(a, ea), rel_change(m2, em2)});
    }
  }
  o.require(worst <= 1e-12, "max_moment_error", worst, "<= 1e-12");
  const auto q = fene::QuadratureRule::ball(2, 4.0, 2.0, 8, 8);
  const double Z = fene::integrate_weighted([](const Vec&) { return 1.0; }, 2.0, q);
  o.require(rel_change(Z, 64 * kPi / 3) <= 1e-12, "Z_error", rel_change(Z, 64 * kPi / 3), "<= 1e-12");
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria = {
      {"conservation", conservation}, {"positivity", positivity},   {"equilibrium", equilibrium},
      {"energy", energy},             {"garding", garding},         {"embedding", embedding},
      {"equivalence", equivalence},   {"radial_sign", radial_sign},               {"uniqueness", uniqueness},
      {"nonuniqueness", nonuniqueness}, {"picard", picard},         {"quadrature", quadrature}};
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " error: " << e.what();
    }
    if (!o.pass) ++failed;
    std::printf("%s %2zu %-14s%s [%.1fs]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.str().c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
