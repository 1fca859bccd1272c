#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "teamsort/errors.hpp"
#include "teamsort/figure_fixture.hpp"
#include "teamsort/matchset.hpp"

using namespace teamsort;

namespace {

const EquilibriumSolution& uniform2() {
  static const auto eq = EquilibriumSolution::solve(TypeDistribution::uniform(), 2);
  return eq;
}

const EquilibriumSolution& figure1() {
  static const auto eq = EquilibriumSolution::solve(figure_one_distribution(), 2);
  return eq;
}

TypeDistribution steep_top() {
  return TypeDistribution::piecewise({{0, 0}, {0.2, 0.13}, {0.34, 0.98}, {1, 1}});
}

}  // namespace

TEST(MatchingSetPoint, BranchEndpoints) {
  const auto& eq = uniform2();
  const auto t = matching_set_point(eq, 0, 0.0);
  EXPECT_EQ(t.percentiles, (std::vector<double>{0.0, 1.0, 1.0}));
  EXPECT_EQ(t.branch, 0);
  EXPECT_EQ(branch_name(t.branch, 2), "Mx1");

  const auto c = matching_set_point(eq, 0, eq.p_low());
  EXPECT_EQ(c.percentiles[1], eq.p_high());
  EXPECT_EQ(c.percentiles[2], eq.p_high());
  EXPECT_NEAR(c.loss(), eq.C(), 1e-12);
}

TEST(MatchingSetPoint, FirmBranchOnFigureOne) {
  const auto& eq = figure1();
  const auto t = matching_set_point(eq, 2, 0.025);
  EXPECT_EQ(branch_name(2, 2), "Mz");
  EXPECT_NEAR(t.levels[0], 0.90, 1e-9);
  EXPECT_NEAR(t.levels[1], 0.90, 1e-9);
  EXPECT_NEAR(t.levels[2], 0.05, 1e-9);
}

TEST(MatchingSetPoint, Errors) {
  const auto& eq = uniform2();
  EXPECT_THROW(matching_set_point(eq, 0, eq.p_low() + 1e-6), DomainError);
  EXPECT_THROW(matching_set_point(eq, 0, -0.01), DomainError);
  EXPECT_THROW(matching_set_point(eq, kMixedBranch, 0.01), DomainError);
  EXPECT_THROW(matching_set_point(eq, 3, 0.01), DomainError);
}

TEST(MatchingSetPoint, BranchCoordinatesAndLossOrdering) {
  for (int n : {2, 3}) {
    const auto eq = EquilibriumSolution::solve(TypeDistribution::beta(2, 1), n);
    for (int b = 0; b <= n; ++b) {
      double prev = -1.0;
      for (int k = 0; k <= 100; ++k) {
        const double p = k == 100 ? eq.p_low() : eq.p_low() * k / 100.0;
        const auto t = matching_set_point(eq, b, p);
        for (int c = 0; c <= n; ++c) {
          if (c == b) {
            EXPECT_EQ(t.percentiles[c], p);
          } else {
            EXPECT_EQ(t.percentiles[c], k == 100 ? eq.p_high() : 1.0 - n * p);
          }
        }
        EXPECT_GE(t.loss(), prev - 1e-15);
        prev = t.loss();
      }
      EXPECT_NEAR(prev, eq.C(), 1e-10);
    }
  }
}

TEST(EmployableBounds, FigureOneValues) {
  const auto& eq = figure1();
  auto b = employable_bounds(eq, 0.8);
  EXPECT_NEAR(b.first, 0.1, 1e-9);
  EXPECT_NEAR(b.second, 0.8, 1e-9);
  b = employable_bounds(eq, 0.4);
  EXPECT_NEAR(b.first, 0.2, 1e-9);
  EXPECT_NEAR(b.second, 0.8, 1e-9);
  b = employable_bounds(eq, 0.1);
  EXPECT_NEAR(b.first, 0.8, 1e-9);
  EXPECT_NEAR(b.second, 0.8, 1e-9);
  EXPECT_THROW(employable_bounds(eq, 0.05), DomainError);
  EXPECT_THROW(employable_bounds(eq, 0.85), DomainError);
  const auto eq3 = EquilibriumSolution::solve(TypeDistribution::uniform(), 3);
  EXPECT_THROW(employable_bounds(eq3, 0.5), DomainError);
}

TEST(Existence, UniformHoldsWithTightLowerSide) {
  const auto rep = check_existence(uniform2());
  EXPECT_FALSE(rep.vacuous);
  EXPECT_TRUE(rep.holds);
  EXPECT_NEAR(rep.slack_lower, 0.0, 1e-8);
  EXPECT_GE(rep.slack_upper, rep.slack_lower);
  EXPECT_NEAR(rep.total_mean, -std::log(uniform2().C()), 1e-8);
}

TEST(Existence, DegenerateIsVacuous) {
  const auto eq = EquilibriumSolution::solve(steep_top(), 2);
  ASSERT_TRUE(eq.degenerate());
  const auto rep = check_existence(eq);
  EXPECT_TRUE(rep.vacuous);
}

TEST(SampleAssignment, UniformFeasibleAndMixed) {
  const auto& eq = uniform2();
  const int m = 3000;
  const auto s = sample_assignment(eq, m, 1);
  EXPECT_TRUE(s.mixing.mixed);
  EXPECT_LE(s.max_ks(eq.dist()), 0.02);
  EXPECT_LE(s.max_ks(eq.dist()), 2.0 / std::sqrt(static_cast<double>(m)));
  double total = 0.0;
  for (const auto& t : s.triplets) {
    total += t.weight;
    if (t.branch == kMixedBranch) {
      EXPECT_LE(std::abs(t.loss() - eq.C()), 1e-3 * eq.C());
    } else {
      const int b = t.branch;
      for (int c = 0; c <= 2; ++c) {
        if (c != b) EXPECT_EQ(t.percentiles[c], 1.0 - 2.0 * t.percentiles[b]);
      }
    }
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
  const auto rows = s.rows();
  EXPECT_TRUE(check_stability(rows, 1e-9).empty());
  EXPECT_TRUE(check_product_countermonotonic(rows, 1e-9).ok);
}

TEST(SampleAssignment, DeterministicForSeed) {
  const auto a = sample_assignment(uniform2(), 500, 7);
  const auto b = sample_assignment(uniform2(), 500, 7);
  EXPECT_EQ(a.to_csv(), b.to_csv());
  EXPECT_NE(a.to_csv().find("p_x1,p_x2,p_z,x1,x2,z,weight,branch"), std::string::npos);
}

TEST(SampleAssignment, ThreeWorkers) {
  const auto eq = EquilibriumSolution::solve(TypeDistribution::beta(2, 1), 3);
  const auto s = sample_assignment(eq, 2000, 3);
  EXPECT_TRUE(s.mixing.mixed);
  EXPECT_LE(s.max_ks(eq.dist()), 0.02);
  EXPECT_TRUE(check_stability(s.rows(), 1e-9).empty());
}

TEST(SampleAssignment, DegenerateHasOnlyBranches) {
  const auto eq = EquilibriumSolution::solve(steep_top(), 2);
  const auto s = sample_assignment(eq, 300, 1);
  ASSERT_FALSE(s.triplets.empty());
  for (const auto& t : s.triplets) EXPECT_NE(t.branch, kMixedBranch);
  EXPECT_EQ(s.mixing.atoms, 0u);
}

TEST(SampleAssignment, FigureOneMixedWithinBounds) {
  const auto& eq = figure1();
  const auto s = sample_assignment(eq, 2000, 5);
  ASSERT_TRUE(s.mixing.mixed);
  int mixed = 0;
  for (const auto& t : s.triplets) {
    if (t.branch != kMixedBranch) continue;
    ++mixed;
    const auto [lo, hi] = employable_bounds(eq, t.levels[2]);
    EXPECT_GE(t.levels[0], lo - 1e-12);
    EXPECT_LE(t.levels[0], hi + 1e-12);
  }
  EXPECT_GT(mixed, 0);
}

TEST(GuidedAssignment, InitialPlacesBranchesAtExtremes) {
  const auto prob = discretize(uniform2(), 10);
  const auto a = guided_initial(prob, 0.1);  // one countermonotone team per branch
  const auto rows = a.rows(prob);
  // sorted atoms: rank k is index k
  const double lo = prob.z[0];
  int branch_rows = 0;
  for (const auto& r : rows) {
    if (r[0] == lo || r[1] == lo || r[2] == lo) {
      ++branch_rows;
      for (double v : r) EXPECT_TRUE(v == lo || v >= prob.z[7]);
    }
  }
  EXPECT_EQ(branch_rows, 3);
}

TEST(GuidedAssignment, NeverBeatsOracle) {
  std::mt19937_64 rng(99);
  const auto eq = EquilibriumSolution::solve(TypeDistribution::uniform(), 2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n_s = 3 + trial % 4;
    std::vector<double> x1(n_s), x2(n_s), z(n_s);
    for (std::size_t i = 0; i < n_s; ++i) {
      x1[i] = u(rng);
      x2[i] = u(rng);
      z[i] = u(rng);
    }
    const auto prob = DiscreteProblem::make(x1, x2, z);
    const auto best = brute_force_oracle(prob);
    const auto g = guided_assignment(prob, eq.p_low());
    EXPECT_LE(g.aggregate_output, best.aggregate_output + 1e-12);
  }
}

TEST(Sampler, CsvRoundTripIsExact) {
  const auto eq = EquilibriumSolution::solve(TypeDistribution::beta(2, 1), 3);
  const auto s = sample_assignment(eq, 300, 4);
  const auto back = AssignmentSample::parse_csv(s.to_csv());
  ASSERT_EQ(back.n_w, 3);
  ASSERT_EQ(back.triplets.size(), s.triplets.size());
  for (std::size_t j = 0; j < s.triplets.size(); ++j) {
    EXPECT_EQ(back.triplets[j].levels, s.triplets[j].levels);
    EXPECT_EQ(back.triplets[j].percentiles, s.triplets[j].percentiles);
    EXPECT_EQ(back.triplets[j].weight, s.triplets[j].weight);
    EXPECT_EQ(back.triplets[j].branch, s.triplets[j].branch);
  }
  EXPECT_THROW(AssignmentSample::parse_csv("x,y\n"), FormatError);
  EXPECT_THROW(AssignmentSample::parse_csv("p_x1,p_x2,p_z,x1,x2,z,weight,branch\n0,0,0,1,1,1,1,Mq\n"),
               FormatError);
}
