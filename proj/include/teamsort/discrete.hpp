#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace teamsort {

// y = z (1 - x1 x2) and its complement, the expected loss x1 x2 z.
double output(double x1, double x2, double z);
double loss(double x1, double x2, double z);
// Team versions for any number of workers.
double team_output(std::span<const double> workers, double z);
double team_loss(std::span<const double> workers, double z);

// One matched team: worker levels followed by the project value as the last
// coordinate.
using Row = std::vector<double>;

struct DiscreteProblem {
  std::vector<std::vector<double>> workers;  // one column per worker slot
  std::vector<double> z;

  static DiscreteProblem make(std::vector<double> x1, std::vector<double> x2, std::vector<double> z);
  int team_size() const { return static_cast<int>(workers.size()); }
  std::size_t size() const { return z.size(); }
  void validate() const;

  static DiscreteProblem parse_csv(const std::string& text);
  static DiscreteProblem load_csv(const std::string& path);
  std::string to_csv() const;
};

enum class Objective {
  Submodular,   // minimise the summed loss (maximise output)
  Supermodular  // maximise the summed product z x1 x2 (comonotone control)
};

struct DiscreteAssignment {
  // sigma[i][s]: index into worker column i matched with firm s
  std::vector<std::vector<std::size_t>> sigma;
  double aggregate_output = 0.0;
  double aggregate_loss = 0.0;
  bool converged = true;
  int sweeps = 0;

  std::vector<Row> rows(const DiscreteProblem& prob) const;
};

// Recomputes output and loss from sigma.
void score(const DiscreteProblem& prob, DiscreteAssignment& a);
DiscreteAssignment identity_assignment(const DiscreteProblem& prob);

struct OracleLimits {
  static constexpr std::size_t two_workers = 7;
  static constexpr std::size_t three_workers = 5;
  static constexpr std::size_t larger = 4;
};

// Exhaustive search with the firm order fixed. Ties resolve to the
// lexicographically smallest (sigma_1, sigma_2, ...).
DiscreteAssignment brute_force_oracle(const DiscreteProblem& prob,
                                      Objective objective = Objective::Submodular);

struct HeuristicOptions {
  int max_sweeps = 200;
  std::uint64_t seed = 0;
  // start from this assignment instead of a seeded shuffle
  std::optional<DiscreteAssignment> initial;
};

DiscreteAssignment rearrangement_heuristic(const DiscreteProblem& prob, const HeuristicOptions& opts);
DiscreteAssignment rearrangement_heuristic(const DiscreteProblem& prob, int max_sweeps,
                                           std::uint64_t seed);

struct StabilityViolation {
  std::size_t first = 0;
  std::size_t second = 0;
  int coordinate = 0;  // index of the swapped coordinate; last = project
  double gain = 0.0;   // output gained by the swap
};

// Pairwise single-coordinate exchanges that raise output by more than tol.
std::vector<StabilityViolation> check_stability(std::span<const Row> rows, double tol = 1e-12);

struct CountermonotoneResult {
  bool ok = true;
  std::vector<int> split;  // coordinates of the failing split
  std::size_t first = 0;
  std::size_t second = 0;
};

CountermonotoneResult check_product_countermonotonic(std::span<const Row> rows, double tol = 1e-12);

struct MixingResult {
  bool mixed = true;
  double spread = 0.0;
  double min_loss = 0.0;
  double max_loss = 0.0;
};

MixingResult check_complete_mixing(std::span<const Row> rows, double tol);

// Geometric mean of the per-team losses, which is assignment invariant.
double amgm_bound(const DiscreteProblem& prob);

struct TechnologySpec {
  std::array<double, 7> phi{};
};

struct CanonicalTechnology {
  double shift_x1 = 0.0;
  double shift_x2 = 0.0;
  double shift_z = 0.0;
  double phi_x1 = 0.0;
  double phi_x2 = 0.0;
  double phi_z = 0.0;
  double phi_y = 0.0;
};

CanonicalTechnology normalize_technology(const TechnologySpec& spec);
double general_output(const TechnologySpec& spec, double x1, double x2, double z);
double canonical_output(const CanonicalTechnology& c, double x1t, double x2t, double zt);

}  // namespace teamsort
