#include <cmath>
#include <numbers>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <gtest/gtest.h>

#include "fene/quadrature.hpp"
#include "fene/weighted_spaces.hpp"

namespace {

using fene::QuadratureRule;
using fene::Vec;
constexpr double kPi = std::numbers::pi;

double closed_rho_mu(double b, double mu) { return kPi * std::pow(b, mu + 1) / (mu + 1); }
double closed_m2_rho_mu(double b, double mu) { return kPi * std::pow(b, mu + 2) / ((mu + 1) * (mu + 2)); }

class WeightExponent : public ::testing::TestWithParam<double> {};

TEST_P(WeightExponent, ClosedFormMoments) {
  const double mu = GetParam();
  for (double b : {2.5, 4.0, 6.0}) {
    const auto q = QuadratureRule::ball(2, b, mu, 24, 24);
    const double a = fene::integrate_weighted([](const Vec&) { return 1.0; }, mu, q);
    const double m2 = fene::integrate_weighted([](const Vec& m) { return m.squaredNorm(); }, mu, q);
    EXPECT_NEAR(a, closed_rho_mu(b, mu), 1e-12 * closed_rho_mu(b, mu));
    EXPECT_NEAR(m2, closed_m2_rho_mu(b, mu), 1e-12 * closed_m2_rho_mu(b, mu));
  }
}

INSTANTIATE_TEST_SUITE_P(Quadrature, WeightExponent, ::testing::Values(-0.75, -0.5, 0.0, 0.25, 1.0, 2.0, 3.0));

TEST(Quadrature, ClosedFormsAgreeWithAdaptiveOracle) {
  boost::math::quadrature::tanh_sinh<double> ts;
  for (double mu : {-0.5, 0.0, 2.0}) {
    const double b = 4.0;
    // In v = rho the radial measure is pi dv.
    const double o = kPi * ts.integrate([&](double v) { return std::pow(v, mu); }, 0.0, b);
    EXPECT_NEAR(o, closed_rho_mu(b, mu), 1e-12 * o);
    const double o2 = kPi * ts.integrate([&](double v) { return std::pow(v, mu) * (b - v); }, 0.0, b);
    EXPECT_NEAR(o2, closed_m2_rho_mu(b, mu), 1e-12 * o2);
  }
}

TEST(Quadrature, RadialPowersAgainstBeta) {
  // int_B |m|^{2k} rho^mu dm = pi b^{k+mu+1} B(k+1, mu+1).
  for (double mu : {-0.5, 0.0, 1.5}) {
    const double b = 3.0;
    const auto q = QuadratureRule::ball(2, b, mu, 12, 4);
    for (int k = 0; k <= 2 * 12 - 1; ++k) {
      const double exact = kPi * std::pow(b, k + mu + 1) * boost::math::beta(k + 1.0, mu + 1.0);
      const double v = fene::integrate_weighted([&](const Vec& m) { return std::pow(m.squaredNorm(), k); }, mu, q);
      EXPECT_NEAR(v, exact, 1e-12 * exact) << "mu=" << mu << " k=" << k;
    }
  }
}

TEST(Quadrature, PartitionFunctionForB4) {
  const auto q = QuadratureRule::ball(2, 4.0, 2.0, 8, 8);
  const double Z = fene::integrate_weighted([](const Vec&) { return 1.0; }, 2.0, q);
  EXPECT_NEAR(Z, 64 * kPi / 3, 1e-12 * Z);
}

TEST(Quadrature, WeightsPositive) {
  for (double mu : {-0.9, 0.0, 3.0}) {
    const auto q = QuadratureRule::ball(2, 4.0, mu, 40, 16);
    for (double w : q.weights()) EXPECT_GT(w, 0.0);
    const auto q3 = QuadratureRule::ball(3, 4.0, mu, 10, 10);
    for (double w : q3.weights()) EXPECT_GT(w, 0.0);
  }
}

TEST(Quadrature, AngularExactness) {
  const auto q = QuadratureRule::ball(2, 4.0, 0.0, 16, 16);
  // m1^4 over the disk of radius 2: int r^5 cos^4 = (64/6)(3 pi / 4) = 8 pi.
  const double v = fene::integrate_weighted([](const Vec& m) { return std::pow(m(0), 4); }, 0.0, q);
  EXPECT_NEAR(v, 8 * kPi, 1e-12 * 8 * kPi);
  EXPECT_NEAR(fene::integrate_weighted([](const Vec& m) { return m(0) * m(1) * m(1); }, 0.0, q), 0.0, 1e-13);
}

TEST(Quadrature, ThreeDimensionalBall) {
  // int_B rho^mu dm = 2 pi b^{mu + 3/2} B(3/2, mu + 1).
  for (double mu : {0.0, 0.5, 2.0}) {
    const double b = 4.0;
    const auto q = QuadratureRule::ball(3, b, mu, 12, 12);
    const double exact = 2 * kPi * std::pow(b, mu + 1.5) * boost::math::beta(1.5, mu + 1.0);
    EXPECT_NEAR(fene::integrate_weighted([](const Vec&) { return 1.0; }, mu, q), exact, 1e-12 * exact);
  }
}

TEST(Quadrature, RejectsBadExponent) {
  EXPECT_THROW(QuadratureRule::ball(2, 4.0, -1.0, 8, 8), fene::ConfigError);
  EXPECT_THROW(QuadratureRule::ball(2, 4.0, 0.0, 0, 8), fene::ConfigError);
}

TEST(Quadrature, TraceRuleCircumference) {
  for (double r : {0.1, 1.0, 1.9}) {
    const fene::TraceRule tr(2, r, 64);
    double s = 0;
    for (double w : tr.weights()) s += w;
    EXPECT_NEAR(s, 2 * kPi * r, 1e-12 * 2 * kPi * r);
  }
  const fene::TraceRule t3(3, 1.5, 16);
  double s = 0;
  for (double w : t3.weights()) s += w;
  EXPECT_NEAR(s, 4 * kPi * 2.25, 1e-12 * 4 * kPi * 2.25);
}

TEST(Quadrature, JacobiRuleIntegratesWeight) {
  const auto gj = fene::gauss_jacobi(10, 0.5, -0.3);
  double s = 0;
  for (double w : gj.weights) s += w;
  // int_{-1}^{1} (1-x)^a (1+x)^b = 2^{a+b+1} B(a+1, b+1).
  EXPECT_NEAR(s, std::pow(2.0, 1.2) * boost::math::beta(1.5, 0.7), 1e-13);
}

}  // namespace
