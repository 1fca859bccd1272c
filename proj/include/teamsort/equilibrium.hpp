#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "teamsort/dist.hpp"

namespace teamsort {

struct CutoffResult {
  double p_low = 0.0;
  double p_high = 0.0;
  double C = 0.0;
  bool degenerate = false;  // empty mixed middle, p_low = 1/(n+1)
  double residual = 0.0;    // G at the returned root
  int iterations = 0;
  std::vector<std::pair<double, double>> scan;  // (p, G(p)) bracketing curve
};

// G(p) = n log I(1 - n p) + log I(p) - (1/(1/(n+1) - p)) * int_p^{1-np} log I
double cutoff_function(const TypeDistribution& dist, int n_w, double p);
CutoffResult solve_cutoff(const TypeDistribution& dist, int n_w);

// Two-worker formulas written out directly, kept as an independent path for
// consistency checks against the general team-size code.
namespace baseline {
double cutoff_function(const TypeDistribution& dist, double p);
CutoffResult solve_cutoff(const TypeDistribution& dist);
double marginal_product(const TypeDistribution& dist, double p_low, double C, double p);
}  // namespace baseline

struct GridPoint {
  double p, I, m, w, v;
};

class EquilibriumSolution {
 public:
  // Unsolved placeholder; every evaluator throws StateError.
  EquilibriumSolution() = default;

  static EquilibriumSolution solve(const TypeDistribution& dist, int n_w, double C_w = 0.0);
  // Rebuild from stored cutoffs without re-solving (used by reload).
  static EquilibriumSolution from_parts(const TypeDistribution& dist, int n_w, double p_low,
                                        double C, double C_w, bool degenerate);
  EquilibriumSolution with_wage_constant(double C_w) const;

  bool solved() const { return state_ != nullptr; }
  const TypeDistribution& dist() const;
  int n_w() const;
  double p_low() const;
  double p_high() const;
  double C() const;
  double C_w() const;
  double C_v() const;
  double mu_z() const;
  bool degenerate() const;
  double level_low() const;   // I(p_low)
  double level_high() const;  // I(p_high)
  const AssumptionReport& assumptions() const;

  // m as a function of the percentile p, and of the level x.
  double marginal_product_at(double p) const;
  double marginal_product(double x) const;
  // Integral of m from the bottom of the support to x.
  double integral_m(double x) const;
  double integral_m() const;
  double wage(double x) const;
  double firm_value(double z) const;
  // Expectations under the common distribution.
  double expected_wage() const;
  double expected_firm_value() const;
  // Exact primal value of the matching-set assignment: mean output per firm.
  double planner_output() const;

  std::vector<GridPoint> grid(int points = 201) const;
  std::string to_json() const;
  static EquilibriumSolution from_json(const std::string& text);
  static EquilibriumSolution load_json(const std::string& path);
  void save_json(const std::string& path) const;

 private:
  struct State;
  const State& state() const;
  std::shared_ptr<const State> state_;
};

}  // namespace teamsort
