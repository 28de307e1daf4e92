#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "fene/scenarios.hpp"

namespace {

using fene::KappaSchedule;
using fene::ModelParams;
using fene::Resolution;
using fene::Vec;

ModelParams params(double b, KappaSchedule k = KappaSchedule::zero(2), double T = 1.0) {
  return ModelParams(2, b, std::move(k), T);
}

Resolution coarse() { return Resolution{6, 4, 32, 32, 50}; }

fene::SolveOptions lean() { return fene::SolveOptions{false, false, false}; }

TEST(Scenarios, EquilibriumIsStationary) {
  const ModelParams p = params(4.0);
  fene::SolveOptions opt;
  opt.garding = false;
  const auto r = fene::solve_fpf({p, fene::initial::equilibrium(p), coarse()}, opt);
  EXPECT_LT(r.report.norm_drift, 1e-8);
  EXPECT_LT(r.report.mass_drift, 1e-12);
  EXPECT_LT(r.report.weak_residual, 1e-10);
  EXPECT_NEAR(r.report.trace.decay_exponent, 1.0, 0.05);
  const auto pos = fene::check_positivity(r);
  EXPECT_GE(pos.min_value, -1e-10);
  EXPECT_TRUE(pos.pass);
}

TEST(Scenarios, RelaxationConservesMassAndDecays) {
  const ModelParams p = params(4.0);
  const auto r = fene::solve_fpf({p, fene::initial::perturbed(p, 0.3), coarse()}, lean());
  EXPECT_LT(r.report.mass_drift, 1e-8);
  const auto& e = r.report.perturbation;
  ASSERT_EQ(e.size(), r.report.times.size());
  for (std::size_t k = 1; k < e.size(); ++k) EXPECT_LT(e[k], e[k - 1]);
}

TEST(Scenarios, NormIdentityHoldsEachStep) {
  const ModelParams p = params(4.0, KappaSchedule::shear(2, 1.0));
  const auto r = fene::solve_fpf({p, fene::initial::perturbed(p, 0.3), coarse()}, lean());
  for (double d : r.report.identity_defect) EXPECT_LT(d, 1e-10);
  for (std::size_t k = 0; k < r.report.norm_w.size(); ++k) EXPECT_GE(r.report.norm_w_h1[k], r.report.norm_w[k]);
}

TEST(Scenarios, ShearRunDefaultResolution) {
  const ModelParams p = params(4.0, KappaSchedule::shear(2, 1.0));
  fene::SolveOptions opt;
  opt.trace_profile = false;
  const auto r = fene::solve_fpf({p, fene::initial::equilibrium(p), Resolution{}}, opt);
  EXPECT_LT(r.report.mass_drift, 1e-8);
  EXPECT_LT(r.report.weak_residual, 1e-6);
  EXPECT_TRUE(r.report.garding.certified);
  EXPECT_TRUE(std::isfinite(r.report.C_emp));
  EXPECT_EQ(r.report.basis_size, 10 * 21);
}

TEST(Scenarios, TimeDependentFlow) {
  fene::Mat a = fene::Mat::Zero(2, 2), c{{0.0, 1.5}, {0.0, 0.0}};
  const ModelParams p = params(4.0, KappaSchedule::table({0.0, 1.0}, {a, c}));
  const auto r = fene::solve_fpf({p, fene::initial::perturbed(p, 0.2), coarse()}, lean());
  EXPECT_LT(r.report.mass_drift, 1e-8);
}

TEST(Scenarios, BumpStaysNonnegative) {
  const ModelParams p = params(4.0, KappaSchedule::shear(2, 1.0));
  const auto r = fene::solve_fpf({p, fene::initial::bump(p, 1.0, Vec{{0.5, 0.0}}), Resolution{}}, lean());
  const auto pos = fene::check_positivity(r);
  EXPECT_FALSE(pos.negative_initial);
  EXPECT_GE(pos.min_value, -1e-6);
  EXPECT_LT(r.report.mass_drift, 1e-8);
}

TEST(Scenarios, NegativeInitialDataIsFlagged) {
  const ModelParams p = params(4.0);
  const auto r = fene::solve_fpf({p, fene::initial::negative(p), coarse()}, lean());
  const auto pos = fene::check_positivity(r);
  EXPECT_TRUE(pos.negative_initial);
  EXPECT_LT(pos.min_initial, -1e-6);
  EXPECT_FALSE(pos.pass);
}

TEST(Scenarios, SharpBoundaryUniqueness) {
  const ModelParams p = params(4.0, KappaSchedule::shear(2, 1.0));
  const auto r = fene::solve_fpf({p, fene::initial::zero(), coarse()}, lean());
  EXPECT_LT(r.report.norm_f.back(), 1e-12);
}

TEST(Scenarios, InadmissibleDataRejected) {
  const ModelParams p = params(4.0);
  const fene::InitialData flat{"flat", [](const Vec&) { return 1.0; }};
  EXPECT_THROW(fene::solve_fpf({p, flat, coarse()}, lean()), fene::ConfigError);
  EXPECT_NO_THROW(fene::check_admissible(p, fene::initial::random(p, 3)));
}

TEST(Scenarios, CertificateForB4MatchesQuadraticOracle) {
  const ModelParams p = params(4.0);
  const auto c = fene::positivity_certificate(p);
  EXPECT_EQ(c.alpha, 0.5);
  EXPECT_EQ(c.K, 1.0);
  EXPECT_TRUE(c.certified);
  // c(u) = -u^2 + 6.5 u - 12 on [0, 4]; discriminant 42.25 - 48 < 0, vertex value -1.4375.
  EXPECT_LT(6.5 * 6.5 - 4 * 12.0, 0.0);
  EXPECT_NEAR(c.sup_bound, -12.0 + 6.5 * 6.5 / 4.0, 1e-12);
  EXPECT_LE(c.sup_grid, c.sup_bound + 1e-12);
  for (double u : {0.0, 1.0, 3.25, 4.0}) {
    const Vec m{{std::sqrt(u), 0.0}};
    EXPECT_NEAR(fene::certificate_function(p, 0.5, 1.0, fene::Mat::Zero(2, 2), m), -u * u + 6.5 * u - 12.0, 1e-12);
  }
}

TEST(Scenarios, CertificateSearch) {
  const auto c3 = fene::positivity_certificate(params(3.0));
  EXPECT_TRUE(c3.certified);
  EXPECT_LT(c3.alpha, 0.5);
  const auto cs = fene::positivity_certificate(params(4.0, KappaSchedule::shear(2, 2.0)));
  EXPECT_TRUE(cs.certified);
  EXPECT_LT(cs.sup_bound, 0.0);
  EXPECT_THROW(fene::certify(params(4.0), 1.0, 1.0), fene::ConfigError);
  EXPECT_THROW(fene::certify(params(4.0), 1.5, 1.0), fene::ConfigError);
}

TEST(Scenarios, NonUniqueZeroForcingGivesZero) {
  const ModelParams p = params(4.0);
  const auto r = fene::solve_nonunique({p, fene::Lift::named("0"), std::nullopt, Resolution{8, 2, 32, 32, 20}}, lean());
  EXPECT_EQ(r.report.gamma, 0.5);
  for (double v : r.report.interior_norm) EXPECT_EQ(v, 0.0);
}

TEST(Scenarios, NonUniqueRejections) {
  const ModelParams p = params(4.0);
  const Resolution r{4, 2, 16, 16, 4};
  EXPECT_THROW(fene::solve_nonunique({p, fene::Lift::named("t|m|^2"), 1.0, r}, lean()), fene::ConfigError);
  EXPECT_THROW(fene::solve_nonunique({p, fene::Lift::named("t|m|^2"), 0.0, r}, lean()), fene::ConfigError);
  EXPECT_THROW(fene::solve_nonunique({p, fene::Lift::named("|m|^2"), 0.5, r}, lean()), fene::ConfigError);
  EXPECT_THROW(fene::Lift::named("sin(t)"), fene::ConfigError);
}

TEST(Scenarios, NonUniqueMidpointSolution) {
  // Window midpoint gamma = 0.5 for b = 4.
  const ModelParams p = params(4.0);
  fene::SolveOptions opt;
  opt.garding = false;
  opt.trace_profile = false;
  const auto a = fene::solve_nonunique({p, fene::Lift::named("t|m|^2"), std::nullopt, Resolution::relaxed()}, opt);
  Resolution fine = Resolution::relaxed();
  fine.K_r = 36;
  const auto b = fene::solve_nonunique({p, fene::Lift::named("t|m|^2"), std::nullopt, fine}, opt);
  EXPECT_EQ(a.report.gamma, 0.5);
  EXPECT_EQ(a.report.initial_norm, 0.0);
  EXPECT_LT(a.report.weak_residual, 1e-6);
  EXPECT_GT(a.report.interior_norm.back(), 1.0);
  EXPECT_NEAR(a.report.interior_norm.back(), b.report.interior_norm.back(), 1e-4 * b.report.interior_norm.back());
}

TEST(Scenarios, NonUniqueLibraryShapes) {
  const ModelParams p = params(4.0, KappaSchedule::shear(2, 0.5));
  fene::SolveOptions opt{true, false, false};
  for (const char* g : {"t^2|m|^2", "t|m|^4", "t(m1^2-m2^2)"}) {
    const auto r = fene::solve_nonunique({p, fene::Lift::named(g), 0.75, Resolution{28, 4, 64, 64, 100}}, opt);
    EXPECT_LT(r.report.weak_residual, 1e-4) << g;
    EXPECT_GT(r.report.interior_norm.back(), 0.0) << g;
  }
}

TEST(Scenarios, ThresholdSweepExponents) {
  const auto rows = fene::threshold_sweep({2.0, 2.5, 4.0});
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].status, "rejected: condition b>2");
  EXPECT_EQ(rows[1].status, "ok");
  EXPECT_NEAR(rows[1].decay_exponent, 0.25, 0.05);
  EXPECT_NEAR(rows[2].decay_exponent, 1.0, 0.05);
  EXPECT_LT(std::abs(rows[2].trace_limit), 1e-8);
}

TEST(Scenarios, EmbeddingAndEquivalenceFamilies) {
  const ModelParams p = params(4.0);
  const Resolution r{5, 4, 32, 32, 1};
  const auto eb = fene::embedding_family(p, p.beta(), r);
  const auto eh = fene::embedding_family(p, 0.5 * p.b(), r);
  EXPECT_GT(eb.min_ratio, 0.0);
  EXPECT_TRUE(std::isfinite(eb.max_ratio));
  EXPECT_TRUE(std::isfinite(eh.max_ratio));
  double prev = 0.0;
  for (double b : {6.0, 4.0, 3.0, 2.5, 2.1}) {
    const double v = fene::equivalence_family(params(b), r).max_ratio;
    EXPECT_GE(v, 1.0);
    EXPECT_GT(v, prev);
    prev = v;
  }
}

TEST(Scenarios, WeakResidualDetectsWrongSolution) {
  // A trajectory held at perturbed data is not a solution.
  const ModelParams p = params(4.0);
  const auto r = fene::solve_fpf({p, fene::initial::perturbed(p, 0.3), coarse()}, lean());
  fene::DensityTrajectory frozen = r.trajectory;
  for (auto& c : frozen.w.coeffs) c = frozen.w.coeffs.front();
  EXPECT_GT(fene::weak_residual(frozen), 1e-3);
}

}  // namespace
