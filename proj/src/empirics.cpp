#include "teamsort/empirics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "teamsort/errors.hpp"
#include "teamsort/numeric.hpp"

namespace teamsort {

namespace {

// Weighted worker-level view: (log earnings, weight, record index, slot).
struct Worker {
  double log_e;
  double weight;
  std::size_t record;
  int slot;
};

std::vector<Worker> flatten(const MatchedPanel& panel) {
  std::vector<Worker> out;
  const double n = panel.n_w;
  for (std::size_t j = 0; j < panel.records.size(); ++j) {
    const auto& r = panel.records[j];
    for (int i = 0; i < panel.n_w; ++i) out.push_back({r.log_earnings[i], r.weight / n, j, i});
  }
  return out;
}

std::string positivity_message(double C_w, double min_earning) {
  return "earnings must be positive for logs; smallest earning is " +
         numeric::format_number(min_earning) + ", so C_w must exceed " +
         numeric::format_number(C_w - min_earning);
}

}  // namespace

void MatchedPanel::add(std::size_t firm_id, double z, std::vector<double> earnings, double weight) {
  if (static_cast<int>(earnings.size()) != n_w) throw DomainError("record has the wrong team size");
  if (!(weight >= 0.0)) throw DomainError("record weight must be nonnegative");
  PanelRecord r;
  r.firm_id = firm_id;
  r.z = z;
  r.weight = weight;
  for (double e : earnings) {
    if (!(e > 0.0)) throw DomainError("earnings must be positive, got " + numeric::format_number(e));
    r.log_earnings.push_back(std::log(e));
  }
  r.earnings = std::move(earnings);
  records.push_back(std::move(r));
}

double MatchedPanel::total_weight() const {
  numeric::CompensatedSum s;
  for (const auto& r : records) s += r.weight;
  return s.value();
}

MatchedPanel MatchedPanel::split_record(std::size_t k) const {
  if (k >= records.size()) throw DomainError("record index out of range");
  MatchedPanel out;
  out.n_w = n_w;
  for (std::size_t j = 0; j < records.size(); ++j) {
    out.records.push_back(records[j]);
    if (j == k) {
      out.records.back().weight /= 2.0;
      out.records.push_back(out.records.back());
    }
  }
  return out;
}

MatchedPanel MatchedPanel::parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  MatchedPanel panel;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!header_seen) {
      header_seen = true;
      if (cells.size() < 4 || cells[0] != "firm_id" || cells[1] != "z" || cells.back() != "weight") {
        throw FormatError("panel CSV must start with header firm_id,z,earn_1,...,weight");
      }
      panel.n_w = static_cast<int>(cells.size()) - 3;
      continue;
    }
    if (static_cast<int>(cells.size()) != panel.n_w + 3) throw FormatError("malformed panel row: " + line);
    try {
      std::vector<double> earn;
      for (int i = 0; i < panel.n_w; ++i) earn.push_back(std::stod(cells[2 + i]));
      panel.add(std::stoull(cells[0]), std::stod(cells[1]), std::move(earn), std::stod(cells.back()));
    } catch (const DomainError&) {
      throw;
    } catch (const std::exception&) {
      throw FormatError("malformed panel row: " + line);
    }
  }
  if (!header_seen) throw FormatError("empty panel CSV");
  return panel;
}

MatchedPanel MatchedPanel::load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open panel file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str());
}

std::string MatchedPanel::to_csv() const {
  std::ostringstream out;
  out << "firm_id,z";
  for (int i = 0; i < n_w; ++i) out << ",earn_" << i + 1;
  out << ",weight\n";
  for (const auto& r : records) {
    out << r.firm_id << ',' << numeric::format_exact(r.z);
    for (double e : r.earnings) out << ',' << numeric::format_exact(e);
    out << ',' << numeric::format_exact(r.weight) << '\n';
  }
  return out.str();
}

MatchedPanel simulate_panel(const EquilibriumSolution& eq, const AssignmentSample& sample) {
  if (sample.n_w != eq.n_w()) throw DomainError("sample and equilibrium team sizes differ");
  const int n = eq.n_w();
  double min_e = INFINITY;
  std::vector<std::vector<double>> earnings;
  for (const auto& t : sample.triplets) {
    std::vector<double> e(n);
    for (int i = 0; i < n; ++i) {
      e[i] = eq.wage(t.levels[i]);
      min_e = std::min(min_e, e[i]);
    }
    earnings.push_back(std::move(e));
  }
  if (!(min_e > 0.0)) throw ConfigurationError(positivity_message(eq.C_w(), min_e));

  numeric::CompensatedSum total;
  for (const auto& t : sample.triplets) total += t.weight;
  if (!(total.value() > 0.0)) throw DomainError("sample carries no weight");
  MatchedPanel panel;
  panel.n_w = n;
  for (std::size_t j = 0; j < sample.triplets.size(); ++j) {
    const auto& t = sample.triplets[j];
    panel.add(j, t.levels[n], std::move(earnings[j]), t.weight / total.value());
  }
  return panel;
}

std::string DecompositionResult::to_json() const {
  nlohmann::json j;
  j["total"] = total;
  j["between"] = between;
  j["within"] = within;
  j["between_share"] = between_share();
  j["within_share"] = within_share();
  return j.dump(2);
}

DecompositionResult variance_decomposition(const MatchedPanel& panel) {
  if (panel.records.empty()) throw DomainError("panel has no records");
  const double W = panel.total_weight();
  if (!(W > 0.0)) throw DomainError("panel has zero total weight");
  const double n = panel.n_w;

  std::vector<double> firm_mean(panel.records.size());
  numeric::CompensatedSum mu_acc;
  for (std::size_t j = 0; j < panel.records.size(); ++j) {
    const auto& r = panel.records[j];
    firm_mean[j] = numeric::compensated_sum(r.log_earnings) / n;
    mu_acc += r.weight / W * firm_mean[j];
  }
  const double mu = mu_acc.value();

  numeric::CompensatedSum total, between, within;
  for (std::size_t j = 0; j < panel.records.size(); ++j) {
    const auto& r = panel.records[j];
    const double th = r.weight / W;
    between += th * (firm_mean[j] - mu) * (firm_mean[j] - mu);
    for (double l : r.log_earnings) {
      total += th / n * (l - mu) * (l - mu);
      within += th / n * (l - firm_mean[j]) * (l - firm_mean[j]);
    }
  }
  return {total.value(), between.value(), within.value()};
}

std::vector<CoworkerRow> coworker_table(const MatchedPanel& panel, const std::vector<double>& percentiles) {
  if (panel.records.empty()) throw DomainError("panel has no records");
  if (panel.n_w < 2) throw DomainError("coworkers need teams of at least two");
  auto workers = flatten(panel);
  std::stable_sort(workers.begin(), workers.end(),
                   [](const Worker& a, const Worker& b) { return a.log_e < b.log_e; });
  numeric::CompensatedSum mass;
  for (const auto& w : workers) mass += w.weight;
  const double W = mass.value();
  if (!(W > 0.0)) throw DomainError("panel has zero total weight");

  // midpoint percentile rank of each worker, in [0, 100]
  std::vector<double> rank(workers.size());
  numeric::CompensatedSum cum;
  for (std::size_t k = 0; k < workers.size(); ++k) {
    rank[k] = 100.0 * (cum.value() + 0.5 * workers[k].weight) / W;
    cum += workers[k].weight;
  }

  std::vector<CoworkerRow> table;
  for (double P : percentiles) {
    if (!(P >= 0.0 && P <= 100.0)) throw DomainError("percentiles must lie in [0, 100]");
    CoworkerRow row;
    row.percentile = P;
    for (double half = 0.5;; half *= 2.0) {
      numeric::CompensatedSum own, co, wsum;
      std::size_t count = 0;
      const auto lo = std::lower_bound(rank.begin(), rank.end(), P - half);
      const auto hi = std::upper_bound(rank.begin(), rank.end(), P + half);
      for (auto it = lo; it != hi; ++it) {
        const auto& w = workers[static_cast<std::size_t>(it - rank.begin())];
        const auto& rec = panel.records[w.record];
        double others = 0.0;
        for (int i = 0; i < panel.n_w; ++i) {
          if (i != w.slot) others += rec.log_earnings[i];
        }
        own += w.weight * w.log_e;
        co += w.weight * others / (panel.n_w - 1);
        wsum += w.weight;
        ++count;
      }
      if (count > 0 && wsum.value() > 0.0) {
        row.own_mean_log = own.value() / wsum.value();
        row.coworker_mean_log = co.value() / wsum.value();
        row.half_width = half;
        row.workers = count;
        row.widened = half > 0.5;
        break;
      }
      if (half > 100.0) throw DomainError("no weighted workers in the panel");
    }
    table.push_back(row);
  }
  return table;
}

CounterfactualResult counterfactual(const TypeDistribution& workers, const TypeDistribution& firms,
                                    double C_w, const CounterfactualOptions& opts) {
  if (opts.n_w < 1) throw DomainError("team size must be positive");
  if (opts.n_s < 2) throw DomainError("need at least two teams");
  const std::size_t N = opts.n_s;
  const int n = opts.n_w;

  DiscreteProblem prob;
  std::vector<double> xcol(N), zcol(N);
  for (std::size_t k = 0; k < N; ++k) {
    const double p = (static_cast<double>(k) + 0.5) / static_cast<double>(N);
    xcol[k] = workers.quantile(p);
    zcol[k] = firms.quantile(p);
  }
  prob.workers.assign(n, xcol);
  prob.z = zcol;

  HeuristicOptions hopts;
  hopts.max_sweeps = opts.max_sweeps;
  hopts.seed = opts.seed;
  const auto a = rearrangement_heuristic(prob, hopts);
  const auto rows = a.rows(prob);

  // envelope condition: w'(x) = m(x) = -z * (product of coworkers)
  struct Slot {
    double x, m;
    std::size_t team;
    int slot;
  };
  std::vector<Slot> slots;
  for (std::size_t s = 0; s < N; ++s) {
    for (int i = 0; i < n; ++i) {
      double m = -rows[s][n];
      for (int j = 0; j < n; ++j) {
        if (j != i) m *= rows[s][j];
      }
      slots.push_back({rows[s][i], m, s, i});
    }
  }
  std::stable_sort(slots.begin(), slots.end(), [](const Slot& a, const Slot& b) { return a.x < b.x; });
  std::vector<std::vector<double>> earn(N, std::vector<double>(n));
  numeric::CompensatedSum w;
  w += C_w + (slots.front().x - workers.lo()) * slots.front().m;
  double min_e = INFINITY;
  for (std::size_t k = 0; k < slots.size(); ++k) {
    if (k > 0) w += 0.5 * (slots[k].m + slots[k - 1].m) * (slots[k].x - slots[k - 1].x);
    earn[slots[k].team][slots[k].slot] = w.value();
    min_e = std::min(min_e, w.value());
  }
  if (!(min_e > 0.0)) throw ConfigurationError(positivity_message(C_w, min_e));

  CounterfactualResult res;
  res.panel.n_w = n;
  for (std::size_t s = 0; s < N; ++s) {
    res.panel.add(s, rows[s][n], earn[s], 1.0 / static_cast<double>(N));
  }
  res.decomposition = variance_decomposition(res.panel);
  res.aggregate_output = a.aggregate_output;
  res.sweeps = a.sweeps;
  res.stability_violations = check_stability(rows, 1e-12).size();
  res.stable = res.stability_violations == 0;
  return res;
}

}  // namespace teamsort
