#pragma once

#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "teamsort/dist.hpp"
#include "teamsort/equilibrium.hpp"

namespace teamsort {

// Earnings by percentile rank, best-paid (p = 0) first.
struct EarningsProfile {
  std::vector<double> p;
  std::vector<double> e;

  static EarningsProfile parse_csv(const std::string& text);
  static EarningsProfile load_csv(const std::string& path);
  std::string to_csv() const;
  // e(p) = w(I(p)) sampled on `points` evenly spaced percentiles.
  static EarningsProfile from_equilibrium(const EquilibriumSolution& eq, int points = 2001);
};

struct EarningsShapeReport {
  bool monotone = true;
  bool convex = true;
  double worst_increase = 0.0;    // largest e[k+1] - e[k] (> 0 means a violation)
  double worst_convexity = 0.0;   // most negative second divided difference
  double convexity_location = 0.0;
  std::size_t points = 0;
};

EarningsShapeReport check_earnings_shape(const EarningsProfile& profile, double tol = 1e-9);

struct InferenceResult {
  TypeDistribution dist = TypeDistribution::uniform();
  double C_w = 0.0;
  double p_low = 0.0;
  double C = 0.0;
  double residual = 0.0;
  std::vector<std::pair<double, double>> residual_curve;  // (candidate p_low, R)
  double omitted_mass = 0.0;  // bound on the integral skipped next to p = 0

  std::string to_json() const;
};

struct InferenceOptions {
  int candidates = 200;
  double candidate_lo = 0.005;
  int knots = 2001;        // knots of the returned piecewise distribution
  int cells = 4000;        // quadrature cells on [0, 1/3]
  double origin = 1e-4;    // integration starts here when the limit at 0 is unusable
};

// Two-worker inversion: earnings curve -> type distribution, C_w and p_low.
InferenceResult infer_distribution(const EarningsProfile& profile, const InferenceOptions& opts = {});

struct OdeResult {
  TypeDistribution dist = TypeDistribution::uniform();
  double p_low = 0.0;
  double epsilon = 0.0;
  int steps = 0;
  double u_at_zero = 1.0;
  double sup_deviation = 0.0;  // against the quadrature route on [0.02, 0.98]
};

// Same inversion through the (I, log u) initial value problem with I(0) = eps
// and u(0) = 1, integrated by fixed-step RK4.
OdeResult infer_distribution_ode(const EarningsProfile& profile, double epsilon, int steps = 20000,
                                 const InferenceOptions& opts = {});

}  // namespace teamsort
