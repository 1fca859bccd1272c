#include "teamsort/verify.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "teamsort/errors.hpp"
#include "teamsort/numeric.hpp"

namespace teamsort {

namespace {

// E[f(X)] under the type distribution, by Gauss-Legendre over percentile cells.
double expectation(const TypeDistribution& dist, const std::function<double(double)>& f,
                   std::vector<double> breaks) {
  constexpr int kCells = 2048;
  for (int k = 0; k <= kCells; ++k) breaks.push_back(static_cast<double>(k) / kCells);
  for (double p : dist.kink_percentiles()) breaks.push_back(p);
  breaks = numeric::sorted_unique(std::move(breaks), 1e-15);
  numeric::CompensatedSum total;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    total += numeric::gauss_legendre([&](double p) { return f(dist.quantile(p)); }, breaks[i],
                                     breaks[i + 1]);
  }
  return total.value();
}

}  // namespace

DualPrices prices_of(const EquilibriumSolution& eq) {
  return {[eq](double x) { return eq.wage(x); }, [eq](double z) { return eq.firm_value(z); }};
}

double surplus(const EquilibriumSolution& eq, double x1, double x2, double z) {
  return output(x1, x2, z) - eq.wage(x1) - eq.wage(x2) - eq.firm_value(z);
}

double surplus(const DualPrices& prices, std::span<const double> workers, double z) {
  double s = team_output(workers, z) - prices.firm_value(z);
  for (double x : workers) s -= prices.wage(x);
  return s;
}

std::string CertificateReport::to_json() const {
  nlohmann::json j;
  j["max_surplus_on_grid"] = max_surplus_on_grid;
  j["argmax"] = argmax;
  j["max_abs_surplus_on_support"] = max_abs_surplus_on_support;
  j["primal_sample"] = primal_sample;
  j["dual_value"] = dual_value;
  j["duality_gap"] = duality_gap;
  j["quadrature_gap"] = quadrature_gap;
  j["grid_per_axis"] = grid_per_axis;
  j["grid_points"] = grid_points;
  j["tol_surplus"] = tol_surplus;
  j["tol_gap"] = tol_gap;
  j["pass"] = pass;
  return j.dump(2);
}

CertificateReport verify_certificate(const EquilibriumSolution& eq, const AssignmentSample& sample,
                                     int grid_per_axis, const CertificateOptions& opts) {
  if (grid_per_axis < 2) throw DomainError("grid_per_axis must be at least 2");
  const int n = eq.n_w();
  const auto& dist = eq.dist();
  const DualPrices prices = opts.prices ? *opts.prices : prices_of(eq);

  CertificateReport rep;
  rep.grid_per_axis = grid_per_axis;
  rep.tol_surplus = opts.tol_surplus.value_or(1e-6 * std::max(1.0, std::abs(eq.C_w())));
  rep.tol_gap = opts.tol_gap;

  // level-space lattice, shared by every axis
  const int G = grid_per_axis;
  std::vector<double> g(G), W(G), V(G);
  for (int k = 0; k < G; ++k) {
    g[k] = (k + 1 == G) ? dist.hi() : dist.lo() + (dist.hi() - dist.lo()) * k / (G - 1);
    W[k] = prices.wage(g[k]);
    V[k] = prices.firm_value(g[k]);
  }
  std::vector<int> idx(n + 1, 0);
  rep.max_surplus_on_grid = -INFINITY;
  std::size_t count = 0;
  while (true) {
    double prod = 1.0, wages = 0.0;
    for (int i = 0; i < n; ++i) {
      prod *= g[idx[i]];
      wages += W[idx[i]];
    }
    const double z = g[idx[n]];
    const double s = z * (1.0 - prod) - wages - V[idx[n]];
    ++count;
    if (s > rep.max_surplus_on_grid) {
      rep.max_surplus_on_grid = s;
      rep.argmax.assign(n + 1, 0.0);
      for (int c = 0; c <= n; ++c) rep.argmax[c] = g[idx[c]];
    }
    int c = 0;
    while (c <= n && ++idx[c] == G) idx[c++] = 0;
    if (c > n) break;
  }
  rep.grid_points = count;

  numeric::CompensatedSum primal;
  for (const auto& t : sample.triplets) {
    const std::span<const double> workers(t.levels.data(), n);
    const double z = t.levels[n];
    rep.max_abs_surplus_on_support =
        std::max(rep.max_abs_surplus_on_support, std::abs(surplus(prices, workers, z)));
    primal += t.weight * team_output(workers, z);
  }
  rep.primal_sample = primal.value();

  if (opts.prices) {
    const std::vector<double> breaks{eq.p_low(), eq.p_high()};
    rep.dual_value = n * expectation(dist, prices.wage, breaks) +
                     expectation(dist, prices.firm_value, breaks);
  } else {
    rep.dual_value = n * eq.expected_wage() + eq.expected_firm_value();
  }
  rep.duality_gap = std::abs(rep.primal_sample - rep.dual_value);
  rep.quadrature_gap = std::abs(eq.planner_output() - rep.dual_value);
  rep.pass = rep.max_surplus_on_grid <= rep.tol_surplus &&
             rep.max_abs_surplus_on_support <= rep.tol_surplus && rep.duality_gap <= rep.tol_gap;
  return rep;
}

std::string KaramataCurve::to_csv() const {
  std::ostringstream out;
  out << "t,S_gamma\n";
  for (std::size_t i = 0; i < t.size(); ++i) {
    out << numeric::format_number(t[i]) << ',' << numeric::format_number(S[i]) << '\n';
  }
  return out.str();
}

std::vector<double> karamata_grid(int steps) {
  std::vector<double> t(steps);
  for (int k = 1; k <= steps; ++k) t[k - 1] = static_cast<double>(k) / steps;
  return t;
}

KaramataCurve karamata_curve(std::span<const double> losses, std::span<const double> weights,
                             std::span<const double> t_grid) {
  if (losses.size() != weights.size()) throw DomainError("losses and weights differ in length");
  KaramataCurve curve;
  std::vector<std::pair<double, double>> pos;  // (log loss, weight)
  numeric::CompensatedSum mass, dropped;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    if (weights[i] < 0.0 || losses[i] < 0.0) throw DomainError("negative loss or weight");
    if (losses[i] > 0.0) {
      pos.emplace_back(std::log(losses[i]), weights[i]);
      mass += weights[i];
    } else {
      dropped += weights[i];
    }
  }
  if (pos.empty() || mass.value() <= 0.0) {
    throw DomainError("degenerate curve: no strictly positive losses");
  }
  curve.excluded_mass = dropped.value();
  std::sort(pos.begin(), pos.end());
  const double total = mass.value();

  // cumulative masses and integrals at atom boundaries
  std::vector<double> edge{0.0}, integral{0.0};
  numeric::CompensatedSum cm, ci;
  for (const auto& [l, w] : pos) {
    cm += w / total;
    ci += l * w / total;
    edge.push_back(cm.value());
    integral.push_back(ci.value());
  }
  for (double t : t_grid) {
    if (t < 0.0 || t > 1.0 + 1e-12) throw DomainError("Karamata grid must lie in [0, 1]");
    auto it = std::upper_bound(edge.begin(), edge.end(), t);
    std::size_t k = static_cast<std::size_t>(it - edge.begin()) - 1;  // edge[k] <= t
    if (k >= pos.size()) {
      curve.S.push_back(integral.back());
    } else {
      curve.S.push_back(integral[k] + (t - edge[k]) * pos[k].first);
    }
    curve.t.push_back(t);
  }
  return curve;
}

KaramataCurve karamata_curve(std::span<const Row> rows, std::span<const double> t_grid) {
  std::vector<double> losses, weights(rows.size(), 1.0);
  losses.reserve(rows.size());
  for (const auto& r : rows) {
    double l = 1.0;
    for (double v : r) l *= v;
    losses.push_back(l);
  }
  return karamata_curve(losses, weights, t_grid);
}

KaramataCurve karamata_curve(const AssignmentSample& sample, std::span<const double> t_grid) {
  std::vector<double> losses, weights;
  for (const auto& t : sample.triplets) {
    losses.push_back(t.loss());
    weights.push_back(t.weight);
  }
  return karamata_curve(losses, weights, t_grid);
}

}  // namespace teamsort
