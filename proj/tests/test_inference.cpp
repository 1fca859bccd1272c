#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "teamsort/errors.hpp"
#include "teamsort/inference.hpp"

using namespace teamsort;

namespace {

EarningsProfile from_function(double (*f)(double), int points = 101) {
  EarningsProfile prof;
  for (int k = 0; k < points; ++k) {
    const double p = static_cast<double>(k) / (points - 1);
    prof.p.push_back(p);
    prof.e.push_back(f(p));
  }
  return prof;
}

const EarningsProfile& uniform_profile() {
  static const auto prof =
      EarningsProfile::from_equilibrium(EquilibriumSolution::solve(TypeDistribution::uniform(), 2, 1.0));
  return prof;
}

const EarningsProfile& beta_profile() {
  static const auto prof =
      EarningsProfile::from_equilibrium(EquilibriumSolution::solve(TypeDistribution::beta(2, 1), 2, 1.0));
  return prof;
}

double sup_error(const TypeDistribution& got, const TypeDistribution& want) {
  double worst = 0.0;
  for (int k = 0; k <= 960; ++k) {
    const double p = 0.02 + 0.96 * k / 960.0;
    worst = std::max(worst, std::abs(got.quantile(p) - want.quantile(p)));
  }
  return worst;
}

}  // namespace

TEST(EarningsShape, AffineAndConcaveCases) {
  auto lin = check_earnings_shape(from_function([](double p) { return 2.0 - p; }));
  EXPECT_TRUE(lin.monotone);
  EXPECT_TRUE(lin.convex);
  auto conc = check_earnings_shape(from_function([](double p) { return 2.0 - p * p; }));
  EXPECT_TRUE(conc.monotone);
  EXPECT_FALSE(conc.convex);
  EXPECT_LT(conc.worst_convexity, 0.0);
}

TEST(EarningsShape, ModelProfilesPass) {
  for (const auto* prof : {&uniform_profile(), &beta_profile()}) {
    const auto rep = check_earnings_shape(*prof);
    EXPECT_TRUE(rep.monotone);
    EXPECT_TRUE(rep.convex) << rep.worst_convexity << " at " << rep.convexity_location;
  }
}

TEST(Inference, UniformRoundTrip) {
  const auto r = infer_distribution(uniform_profile());
  EXPECT_EQ(r.C_w, 1.0);
  EXPECT_LE(sup_error(r.dist, TypeDistribution::uniform()), 1e-2);
  EXPECT_NEAR(r.p_low, 0.094541577788104161991, 1e-3);
  EXPECT_EQ(r.residual_curve.size(), 200u);
  EXPECT_NE(r.to_json().find("\"p_low\""), std::string::npos);
}

TEST(Inference, BetaRoundTrip) {
  const auto eq = EquilibriumSolution::solve(TypeDistribution::beta(2, 1), 2, 1.0);
  const auto r = infer_distribution(beta_profile());
  EXPECT_EQ(r.C_w, 1.0);
  EXPECT_NEAR(r.p_low, eq.p_low(), 1e-3);
  EXPECT_LE(sup_error(r.dist, TypeDistribution::beta(2, 1)), 1e-2);
}

TEST(Inference, RecoveredDistributionSatisfiesShapeAssumption) {
  const auto r = infer_distribution(uniform_profile());
  const auto rep = check_assumptions(r.dist, std::make_pair(r.p_low, 1.0 - 2.0 * r.p_low));
  EXPECT_TRUE(rep.xfx_monotone_on_middle);
}

TEST(Inference, ConstantProfileRejected) {
  EXPECT_THROW(infer_distribution(from_function([](double) { return 3.0; })), InferenceError);
  EarningsProfile tiny;
  tiny.p = {0.0, 1.0};
  tiny.e = {2.0, 1.0};
  EXPECT_THROW(infer_distribution(tiny), DomainError);
}

TEST(Inference, CsvRoundTrip) {
  const auto text = uniform_profile().to_csv();
  const auto back = EarningsProfile::parse_csv(text);
  EXPECT_EQ(back.p, uniform_profile().p);
  EXPECT_EQ(back.e, uniform_profile().e);
  EXPECT_THROW(EarningsProfile::parse_csv("p,I\n0,1\n"), FormatError);
}

TEST(InferenceOde, AgreesWithQuadratureRoute) {
  for (const auto* prof : {&uniform_profile(), &beta_profile()}) {
    const auto o = infer_distribution_ode(*prof, 1e-6);
    EXPECT_EQ(o.u_at_zero, 1.0);
    EXPECT_LE(o.sup_deviation, 5e-3);
  }
  const auto o5 = infer_distribution_ode(uniform_profile(), 1e-5);
  EXPECT_LE(o5.sup_deviation, 5e-3);
}

TEST(InferenceOde, EpsilonValidation) {
  EXPECT_THROW(infer_distribution_ode(uniform_profile(), 0.0), DomainError);
  EXPECT_THROW(infer_distribution_ode(uniform_profile(), 2e-3), DomainError);
}

TEST(InferenceOde, EpsilonSweepAwayFromOrigin) {
  for (const auto* prof : {&uniform_profile(), &beta_profile()}) {
    double lo = INFINITY, hi = -INFINITY;
    for (double eps : {1e-4, 1e-5, 1e-6}) {
      const double v = infer_distribution_ode(*prof, eps).dist.quantile(0.1);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    EXPECT_LE(hi - lo, 1e-4);
  }
}
