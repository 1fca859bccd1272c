#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "teamsort/discrete.hpp"
#include "teamsort/equilibrium.hpp"
#include "teamsort/matchset.hpp"

namespace teamsort {

// One firm employing one team.
struct PanelRecord {
  std::size_t firm_id = 0;
  double z = 0.0;
  std::vector<double> earnings;
  double weight = 0.0;
  std::vector<double> log_earnings;  // cached
};

struct MatchedPanel {
  int n_w = 2;
  std::vector<PanelRecord> records;

  // Adds a record and caches its log earnings; earnings must be positive.
  void add(std::size_t firm_id, double z, std::vector<double> earnings, double weight);
  double total_weight() const;
  // Replace record k by two half-weight copies.
  MatchedPanel split_record(std::size_t k) const;

  static MatchedPanel parse_csv(const std::string& text);
  static MatchedPanel load_csv(const std::string& path);
  std::string to_csv() const;
};

// Prices each sampled team with the equilibrium wage schedule.
MatchedPanel simulate_panel(const EquilibriumSolution& eq, const AssignmentSample& sample);

struct DecompositionResult {
  double total = 0.0;
  double between = 0.0;
  double within = 0.0;

  double between_share() const { return total > 0.0 ? between / total : 0.0; }
  double within_share() const { return total > 0.0 ? within / total : 0.0; }
  std::string to_json() const;
};

// Weighted law of total variance over log earnings; each worker carries
// weight theta_j / n_w.
DecompositionResult variance_decomposition(const MatchedPanel& panel);

struct CoworkerRow {
  double percentile = 0.0;       // requested, in [0, 100]
  double own_mean_log = 0.0;
  double coworker_mean_log = 0.0;
  double half_width = 0.5;       // band actually used
  std::size_t workers = 0;
  bool widened = false;
};

// Mean log coworker earnings for workers within +-0.5 percentile of each
// requested point of the individual earnings distribution (ascending).
std::vector<CoworkerRow> coworker_table(const MatchedPanel& panel, const std::vector<double>& percentiles);

struct CounterfactualOptions {
  int n_w = 2;
  std::size_t n_s = 1000;
  std::uint64_t seed = 0;
  int max_sweeps = 200;
};

struct CounterfactualResult {
  DecompositionResult decomposition;
  MatchedPanel panel;
  double aggregate_output = 0.0;
  bool stable = false;  // optimality is certified by pairwise stability only
  std::size_t stability_violations = 0;
  int sweeps = 0;
};

// Workers drawn from one distribution, projects from another, matched by the
// rearrangement heuristic on stratified samples. Wages integrate each
// worker's marginal product over skill (trapezoid), anchored at C_w.
CounterfactualResult counterfactual(const TypeDistribution& workers, const TypeDistribution& firms,
                                    double C_w, const CounterfactualOptions& opts = {});

}  // namespace teamsort
