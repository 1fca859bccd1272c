#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "teamsort/discrete.hpp"
#include "teamsort/equilibrium.hpp"

namespace teamsort {

// Branch b in [0, n_w) is the worker-b branch, b = n_w the firm branch.
inline constexpr int kMixedBranch = -1;
std::string branch_name(int branch, int n_w);

struct MatchTriplet {
  std::vector<double> percentiles;  // workers then firm
  std::vector<double> levels;
  int branch = kMixedBranch;
  double weight = 0.0;

  double loss() const;
};

struct MixingDiagnostics {
  bool mixed = true;
  double log_spread = 0.0;         // max - min of mixed-row log losses
  double max_relative_dev = 0.0;   // max |loss / C - 1| over mixed rows
  double rearranged_spread = 0.0;  // log spread when the rearrangement stopped
  double max_projection = 0.0;     // largest log shift applied to one coordinate
  int sweeps = 0;
  std::size_t atoms = 0;
};

struct AssignmentSample {
  int n_w = 2;
  std::uint64_t seed = 0;
  std::vector<MatchTriplet> triplets;
  MixingDiagnostics mixing;

  std::vector<Row> rows() const;
  std::vector<double> weights() const;
  // Largest weighted-empirical KS distance over all marginals.
  double max_ks(const TypeDistribution& dist) const;
  // Round-trips exactly (17 significant digits); mixing diagnostics are not stored.
  std::string to_csv() const;
  static AssignmentSample parse_csv(const std::string& text);
  static AssignmentSample load_csv(const std::string& path);
  std::string diagnostics_json() const;
};

// Branch point at percentile p of the branch's own coordinate. The closure
// p = p_low is accepted.
MatchTriplet matching_set_point(const EquilibriumSolution& eq, int branch, double p);

// Range of first-worker levels a mixed-range project z can employ (two workers).
std::pair<double, double> employable_bounds(const EquilibriumSolution& eq, double z);

struct ExistenceReport {
  bool vacuous = false;
  bool holds = true;
  double a = 0.0, b = 0.0, l = 0.0, mu = 0.0;  // per marginal, all identical here
  double lhs = 0.0;     // sum a + max l
  double total_mean = 0.0;
  double rhs = 0.0;     // sum b - max l
  double slack_lower = 0.0;
  double slack_upper = 0.0;
};

ExistenceReport check_existence(const EquilibriumSolution& eq);

struct SampleOptions {
  double tol_mix = 1e-3;
  int max_sweeps = 200;
};

AssignmentSample sample_assignment(const EquilibriumSolution& eq, int m_points, std::uint64_t seed,
                                   const SampleOptions& opts = {});

// Equal-mass discretization: n_s atoms per marginal at percentiles (j + 1/2)/n_s.
DiscreteProblem discretize(const EquilibriumSolution& eq, std::size_t n_s);

// Starting point read off the matching set: the lowest round(n_s p_low) ranks
// of each column go to countermonotone teams, the middle is paired ascending
// against descending, then the rearrangement heuristic polishes.
DiscreteAssignment guided_initial(const DiscreteProblem& prob, double p_low);
DiscreteAssignment guided_assignment(const DiscreteProblem& prob, double p_low, int max_sweeps = 200);

}  // namespace teamsort
