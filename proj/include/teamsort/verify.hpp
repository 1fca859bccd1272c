#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "teamsort/equilibrium.hpp"
#include "teamsort/matchset.hpp"

namespace teamsort {

// Wage and firm-value schedules used as dual prices.
struct DualPrices {
  std::function<double(double)> wage;
  std::function<double(double)> firm_value;
};

DualPrices prices_of(const EquilibriumSolution& eq);

// y - sum of wages - v(z).
double surplus(const EquilibriumSolution& eq, double x1, double x2, double z);
double surplus(const DualPrices& prices, std::span<const double> workers, double z);

struct CertificateOptions {
  // Defaults follow 1e-6 * max(1, |C_w|) and 1e-3.
  std::optional<double> tol_surplus;
  double tol_gap = 1e-3;
  // Replace the equilibrium schedules (perturbation studies).
  std::optional<DualPrices> prices;
};

struct CertificateReport {
  double max_surplus_on_grid = 0.0;
  std::vector<double> argmax;  // lattice point attaining the maximum
  double max_abs_surplus_on_support = 0.0;
  double primal_sample = 0.0;     // sum of weight * y over the sample
  double dual_value = 0.0;        // n E[w] + E[v]
  double duality_gap = 0.0;       // |primal_sample - dual_value|
  double quadrature_gap = 0.0;    // exact matching-set output against the dual
  int grid_per_axis = 0;
  std::size_t grid_points = 0;
  double tol_surplus = 0.0;
  double tol_gap = 0.0;
  bool pass = false;

  std::string to_json() const;
};

CertificateReport verify_certificate(const EquilibriumSolution& eq, const AssignmentSample& sample,
                                     int grid_per_axis, const CertificateOptions& opts = {});

struct KaramataCurve {
  std::vector<double> t;
  std::vector<double> S;
  double excluded_mass = 0.0;  // weight of zero losses left out

  std::string to_csv() const;
};

// Default evaluation grid t = 0.05, 0.10, ..., 1.
std::vector<double> karamata_grid(int steps = 20);

// S(t) = integral over [0, t] of the quantile function of log loss, where the
// weights (normalized over positive losses) define the loss distribution.
KaramataCurve karamata_curve(std::span<const double> losses, std::span<const double> weights,
                             std::span<const double> t_grid);
KaramataCurve karamata_curve(std::span<const Row> rows, std::span<const double> t_grid);
KaramataCurve karamata_curve(const AssignmentSample& sample, std::span<const double> t_grid);

}  // namespace teamsort
