#include <cmath>
#include <numbers>
#include <random>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <gtest/gtest.h>

#include "fene/weighted_spaces.hpp"

namespace {

using fene::KappaSchedule;
using fene::ModelParams;
using fene::QuadratureRule;
using fene::Vec;
constexpr double kPi = std::numbers::pi;

ModelParams b4() { return ModelParams(2, 4.0, KappaSchedule::zero(2), 1.0); }
double one(const Vec&) { return 1.0; }

TEST(WeightedSpaces, AreaAndShiftedWeights) {
  const ModelParams p = b4();
  const auto q = QuadratureRule::ball(2, 4.0, 0.0, 16, 16);
  EXPECT_NEAR(fene::integrate_weighted(one, 0.0, q), 4 * kPi, 1e-13);
  EXPECT_NEAR(fene::integrate_weighted(one, p.beta(), q), kPi * std::pow(4.0, p.beta() + 1) / (p.beta() + 1), 1e-13);
  // F = rho^2 against rho^{-b/2}.
  const double v = fene::integrate_weighted([&](const Vec& m) { return std::pow(fene::rho(p, m), 2); }, -2.0, q);
  boost::math::quadrature::tanh_sinh<double> ts;
  const double oracle = 2 * kPi * ts.integrate([](double r) { return std::pow(4 - r * r, 0.0) * r; }, 0.0, 2.0);
  EXPECT_NEAR(v, oracle, 1e-12 * oracle);
}

TEST(WeightedSpaces, NonFiniteIntegrandReported) {
  const auto q = QuadratureRule::ball(2, 4.0, 0.0, 4, 4);
  EXPECT_THROW(fene::integrate_weighted([](const Vec&) { return std::nan(""); }, 0.0, q), fene::NumericalError);
}

TEST(WeightedSpaces, EquilibriumNormIsInverseZ) {
  const ModelParams p = b4();
  const auto q = QuadratureRule::ball(2, 4.0, 2.0, 16, 16);
  const auto feq = fene::equilibrium(p, q);
  const auto q0 = QuadratureRule::ball(2, 4.0, 0.0, 16, 16);
  const double sq = std::pow(fene::norm_L2_mu(feq, -2.0, q0), 2);
  EXPECT_NEAR(sq, 1.0 / feq.Z(), 1e-13);
  EXPECT_EQ(fene::norm_L2_mu([](const Vec&) { return 0.0; }, 0.0, q0), 0.0);
}

TEST(WeightedSpaces, H1DominatesL2) {
  const auto q = QuadratureRule::ball(2, 4.0, 0.5, 12, 16);
  std::mt19937_64 gen(3);
  std::normal_distribution<double> nd;
  for (int t = 0; t < 20; ++t) {
    const double a = nd(gen), b = nd(gen), c = nd(gen), d = nd(gen);
    auto F = [&](const Vec& m) { return a + b * m(0) + c * m(0) * m(1) + d * m(1) * m(1) * m(1); };
    auto G = [&](const Vec& m) { return Vec{{b + c * m(1), c * m(0) + 3 * d * m(1) * m(1)}}; };
    EXPECT_GE(fene::norm_H1_mu(F, G, 0.5, q), fene::norm_L2_mu(F, 0.5, q));
  }
}

TEST(WeightedSpaces, EmbeddingPairForRho) {
  const ModelParams p = b4();
  const auto q = QuadratureRule::ball(2, 4.0, 0.0, 16, 16);
  auto F = [&](const Vec& m) { return fene::rho(p, m); };
  auto G = [](const Vec& m) { return Vec(-2.0 * m); };
  const auto e = fene::embedding_defect(p, F, G, 0.0, q);
  boost::math::quadrature::tanh_sinh<double> ts;
  const double lhs2 = 2 * kPi * ts.integrate([](double r) { return r; }, 0.0, 2.0);
  const double rhs2 =
      2 * kPi * ts.integrate([](double r) { return (4 * r * r + std::pow(4 - r * r, 2)) * r; }, 0.0, 2.0);
  EXPECT_NEAR(e.lhs, std::sqrt(lhs2), 1e-12);
  EXPECT_NEAR(e.rhs, std::sqrt(rhs2), 1e-12);
  const auto z = fene::embedding_defect(p, [](const Vec&) { return 0.0; }, [](const Vec&) { return Vec::Zero(2); }, 0.0, q);
  EXPECT_EQ(z.lhs, 0.0);
  EXPECT_EQ(z.rhs, 0.0);
}

TEST(WeightedSpaces, EmbeddingRejectsNonVanishingField) {
  const ModelParams p = b4();
  const auto q = QuadratureRule::ball(2, 4.0, 0.0, 8, 8);
  EXPECT_THROW(fene::embedding_defect(p, one, [](const Vec&) { return Vec::Zero(2); }, 0.5, q), fene::NumericalError);
}

TEST(WeightedSpaces, CircleTraceNorms) {
  const ModelParams p = b4();
  EXPECT_NEAR(fene::circle_trace_norm(p, one, 1.0), std::sqrt(2 * kPi), 1e-14);
  const fene::EquilibriumField feq(p, 64 * kPi / 3);
  double prev = 1e300;
  for (int k = 1; k <= 5; ++k) {
    const double r = 2.0 - std::pow(10.0, -k);
    const double v = fene::circle_trace_norm(p, [&](const Vec& m) { return feq(m) / fene::dist(p, m); }, r);
    EXPECT_LT(v, prev);
    prev = v;
  }
  // rho / d -> 2 sqrt(b).
  const auto lim = fene::boundary_limit(
      p, [&](double r) { return fene::circle_trace_norm(p, [&](const Vec& m) { return fene::rho(p, m) / fene::dist(p, m); }, r); });
  EXPECT_FALSE(lim.diverged);
  EXPECT_NEAR(lim.value, 4.0 * std::sqrt(2 * kPi * 2.0), 1e-8);
}

TEST(WeightedSpaces, CoareaConsistency) {
  const ModelParams p = b4();
  auto F = [](const Vec& m) { return 1.0 + m(0) * m(0) - 0.5 * m(1); };
  boost::math::quadrature::tanh_sinh<double> ts;
  const double shells = ts.integrate(
      [&](double r) { return r <= 0.0 || r >= 2.0 ? 0.0 : std::pow(fene::circle_trace_norm(p, F, r, 64), 2); }, 0.0, 2.0);
  const auto q = QuadratureRule::ball(2, 4.0, 0.0, 16, 16);
  const double ball = fene::integrate_weighted([&](const Vec& m) { return F(m) * F(m); }, 0.0, q);
  EXPECT_NEAR(shells, ball, 1e-10 * ball);
}

TEST(WeightedSpaces, T0TraceOperator) {
  const ModelParams p = b4();
  const auto lr = fene::t0_trace_norm(p, [&](const Vec& m) { return fene::rho(p, m); }, 0.5);
  EXPECT_FALSE(lr.diverged);
  EXPECT_LT(std::abs(lr.value), 1e-6);
  const auto l1 = fene::t0_trace_norm(p, one, 0.0);
  EXPECT_TRUE(l1.diverged);
  EXPECT_THROW(fene::t0_trace_norm(p, one, 1.0), fene::ConfigError);
}

TEST(WeightedSpaces, EquivalenceForEquilibrium) {
  const ModelParams p = b4();
  const auto q = QuadratureRule::ball(2, 4.0, 0.0, 20, 16);
  const fene::EquilibriumField feq(p, 64 * kPi / 3);
  const auto e = fene::equivalence_ratio(p, feq, [&](const Vec& m) { return feq.gradient(m); }, q);
  // f^eq / rho^{b/2} = 1/Z, so c = Z^{-1} ||1||_{H^1_{b/2}} = Z^{-1/2}.
  EXPECT_NEAR(e.c, 1.0 / std::sqrt(feq.Z()), 1e-13);
  EXPECT_GT(e.a, 0.0);
  const auto z = fene::equivalence_ratio(p, [](const Vec&) { return 0.0; }, [](const Vec&) { return Vec::Zero(2); }, q);
  EXPECT_EQ(z.a, 0.0);
  EXPECT_EQ(z.c, 0.0);
}

TEST(WeightedSpaces, LadderExtrapolation) {
  const auto d = fene::boundary_ladder(2.0);
  ASSERT_EQ(d.size(), 16u);
  EXPECT_DOUBLE_EQ(d.front(), 0.25);
  std::vector<double> v;
  for (double x : d) v.push_back(3.0 + 0.7 * std::sqrt(x));
  const auto l = fene::extrapolate_boundary_limit(d, v);
  EXPECT_TRUE(l.converged);
  EXPECT_NEAR(l.value, 3.0, 1e-8);
  std::vector<double> blow;
  for (double x : d) blow.push_back(1.0 / x);
  EXPECT_TRUE(fene::extrapolate_boundary_limit(d, blow).diverged);
  std::vector<double> pw;
  for (double x : d) pw.push_back(2.0 * std::pow(x, 1.5));
  EXPECT_NEAR(fene::decay_exponent(d, pw), 1.5, 1e-12);
}

}  // namespace
