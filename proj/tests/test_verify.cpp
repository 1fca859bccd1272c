#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "teamsort/errors.hpp"
#include "teamsort/figure_fixture.hpp"
#include "teamsort/verify.hpp"

using namespace teamsort;

namespace {

const EquilibriumSolution& uniform2() {
  static const auto eq = EquilibriumSolution::solve(TypeDistribution::uniform(), 2);
  return eq;
}

}  // namespace

TEST(Surplus, ZeroOnMatchingSetBranches) {
  for (const auto& d : {TypeDistribution::uniform(), TypeDistribution::beta(2, 1), figure_one_distribution()}) {
    const auto eq = EquilibriumSolution::solve(d, 2, 0.4);
    for (int b = 0; b <= 2; ++b) {
      for (int k = 0; k <= 50; ++k) {
        const double p = k == 50 ? eq.p_low() : eq.p_low() * k / 50.0;
        const auto t = matching_set_point(eq, b, p);
        EXPECT_NEAR(surplus(eq, t.levels[0], t.levels[1], t.levels[2]), 0.0, 1e-9);
      }
    }
  }
}

TEST(Surplus, AnchorTripletAndOffSupportSign) {
  const auto eq = EquilibriumSolution::solve(figure_one_distribution(), 2);
  // percentile triplet (1, 1, 0): worst workers with the best project
  EXPECT_NEAR(surplus(eq, 1.0, 1.0, 0.0), 0.0, 1e-15);
  EXPECT_LE(surplus(eq, 0.0, 0.0, 1.0), 1e-12);
  const double x[] = {0.3, 0.3, 0.3};
  const auto prices = prices_of(eq);
  EXPECT_DOUBLE_EQ(surplus(prices, std::span<const double>(x, 2), 0.3), surplus(eq, 0.3, 0.3, 0.3));
}

TEST(Certificate, PassesForBaselineAndThreeWorkers) {
  struct Case {
    TypeDistribution d;
    int n_w;
    int grid;
  };
  for (const auto& c : {Case{TypeDistribution::uniform(), 2, 64}, Case{TypeDistribution::beta(2, 1), 2, 64},
                        Case{TypeDistribution::uniform(), 3, 32}, Case{TypeDistribution::beta(2, 1), 3, 32}}) {
    const auto eq = EquilibriumSolution::solve(c.d, c.n_w);
    const auto s = sample_assignment(eq, 3000, 1);
    const auto rep = verify_certificate(eq, s, c.grid);
    EXPECT_TRUE(rep.pass) << rep.to_json();
    EXPECT_LE(rep.max_surplus_on_grid, 1e-6);
    EXPECT_LE(rep.max_abs_surplus_on_support, 1e-6);
    EXPECT_LE(rep.duality_gap, 1e-3);
    EXPECT_LE(rep.quadrature_gap, 1e-8);
    EXPECT_EQ(rep.grid_points, static_cast<std::size_t>(std::pow(c.grid, c.n_w + 1)));
  }
}

TEST(Certificate, WeakDualityOnRandomFeasibleSamples) {
  const auto& eq = uniform2();
  const auto base = sample_assignment(eq, 1000, 2);
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    // permuting a column among equal-weight mixed rows keeps the marginals
    auto s = base;
    std::vector<std::size_t> mixed;
    for (std::size_t i = 0; i < s.triplets.size(); ++i) {
      if (s.triplets[i].branch == kMixedBranch) mixed.push_back(i);
    }
    auto perm = mixed;
    std::shuffle(perm.begin(), perm.end(), rng);
    for (std::size_t k = 0; k < mixed.size(); ++k) {
      s.triplets[mixed[k]].levels[2] = base.triplets[perm[k]].levels[2];
    }
    const auto rep = verify_certificate(eq, s, 16);
    EXPECT_LE(rep.primal_sample, rep.dual_value + 1e-3);
  }
}

TEST(Certificate, CorruptedWagesAreRejected) {
  const auto& eq = uniform2();
  const auto s = sample_assignment(eq, 1000, 1);
  const auto base = prices_of(eq);

  CertificateOptions up;
  up.prices = DualPrices{[base](double x) { return base.wage(x) + 0.01 * x; }, base.firm_value};
  const auto r1 = verify_certificate(eq, s, 32, up);
  EXPECT_FALSE(r1.pass);
  EXPECT_GT(r1.max_abs_surplus_on_support, 1e-4);

  CertificateOptions down;
  down.prices = DualPrices{[base](double x) { return base.wage(x) - 0.01 * x; }, base.firm_value};
  const auto r2 = verify_certificate(eq, s, 32, down);
  EXPECT_FALSE(r2.pass);
  EXPECT_GT(r2.max_surplus_on_grid, 1e-3);
  EXPECT_GT(r2.argmax[0] + r2.argmax[1], 1.0);
}

TEST(Karamata, TwoPointExample) {
  const double losses[] = {0.016, 0.004};
  const double weights[] = {1.0, 1.0};
  const double t[] = {0.25, 0.5, 1.0};
  const auto c = karamata_curve(losses, weights, t);
  EXPECT_NEAR(c.S[0], 0.25 * std::log(0.004), 1e-15);
  EXPECT_NEAR(c.S[1], 0.5 * std::log(0.004), 1e-15);
  EXPECT_NEAR(c.S[2], 0.5 * (std::log(0.004) + std::log(0.016)), 1e-15);
  EXPECT_NE(c.to_csv().find("t,S_gamma"), std::string::npos);
}

TEST(Karamata, ZeroLossesExcludedOrRejected) {
  const double losses[] = {0.0, 0.5};
  const double weights[] = {1.0, 3.0};
  const double t[] = {1.0};
  const auto c = karamata_curve(losses, weights, t);
  EXPECT_DOUBLE_EQ(c.excluded_mass, 1.0);
  EXPECT_NEAR(c.S[0], std::log(0.5), 1e-15);
  const double zeros[] = {0.0, 0.0};
  EXPECT_THROW(karamata_curve(zeros, weights, t), DomainError);
}

TEST(Karamata, MixedSampleIsLinearAndConvex) {
  const auto& eq = uniform2();
  const auto s = sample_assignment(eq, 2000, 1);
  // mixed rows only: constant loss, so S is linear
  std::vector<double> losses, weights;
  for (const auto& t : s.triplets) {
    if (t.branch != kMixedBranch) continue;
    losses.push_back(t.loss());
    weights.push_back(t.weight);
  }
  const auto grid = karamata_grid();
  const auto mixed = karamata_curve(losses, weights, grid);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    EXPECT_NEAR(mixed.S[i], grid[i] * std::log(eq.C()), 1e-12);
  }
  const auto full = karamata_curve(s, karamata_grid(100));
  for (std::size_t i = 1; i + 1 < full.S.size(); ++i) {
    EXPECT_GE(full.S[i + 1] - 2 * full.S[i] + full.S[i - 1], -1e-9);
  }
}

TEST(Karamata, GuidedAssignmentDominatesRearrangements) {
  const auto& eq = uniform2();
  const auto prob = discretize(eq, 300);
  const auto best = guided_assignment(prob, eq.p_low());
  const auto grid = karamata_grid();
  const auto rows = best.rows(prob);
  const auto top = karamata_curve(rows, grid);
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    auto a = identity_assignment(prob);
    for (auto& col : a.sigma) std::shuffle(col.begin(), col.end(), rng);
    const auto r = a.rows(prob);
    const auto c = karamata_curve(r, grid);
    for (std::size_t i = 0; i < grid.size(); ++i) EXPECT_GE(top.S[i], c.S[i] - 1e-9);
    EXPECT_NEAR(c.S.back(), top.S.back(), 1e-6);
  }
}
