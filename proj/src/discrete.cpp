#include "teamsort/discrete.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "teamsort/errors.hpp"
#include "teamsort/numeric.hpp"

namespace teamsort {

double output(double x1, double x2, double z) { return z * (1.0 - x1 * x2); }
double loss(double x1, double x2, double z) { return x1 * x2 * z; }

double team_loss(std::span<const double> workers, double z) {
  double v = z;
  for (double x : workers) v *= x;
  return v;
}

double team_output(std::span<const double> workers, double z) {
  double prod = 1.0;
  for (double x : workers) prod *= x;
  return z * (1.0 - prod);
}

DiscreteProblem DiscreteProblem::make(std::vector<double> x1, std::vector<double> x2,
                                      std::vector<double> z) {
  DiscreteProblem p;
  p.workers = {std::move(x1), std::move(x2)};
  p.z = std::move(z);
  p.validate();
  return p;
}

void DiscreteProblem::validate() const {
  if (workers.size() < 2) throw DomainError("team size must be at least 2");
  for (const auto& col : workers) {
    if (col.size() != z.size()) throw DomainError("worker and firm samples must have equal length");
  }
  auto check = [](double v) {
    if (!(v >= 0.0 && v <= 1.0)) throw DomainError("sample values must lie in [0, 1]");
  };
  for (const auto& col : workers) std::for_each(col.begin(), col.end(), check);
  std::for_each(z.begin(), z.end(), check);
}

DiscreteProblem DiscreteProblem::parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::string> header;
  std::vector<std::vector<double>> cols;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (header.empty()) {
      header = cells;
      if (header.size() < 3 || header.back() != "z") {
        throw FormatError("problem CSV header must be x1,x2[,...],z");
      }
      for (std::size_t i = 0; i + 1 < header.size(); ++i) {
        if (header[i] != "x" + std::to_string(i + 1)) {
          throw FormatError("problem CSV header must be x1,x2[,...],z");
        }
      }
      cols.assign(header.size(), {});
      continue;
    }
    if (cells.size() != header.size()) throw FormatError("ragged problem CSV row: " + line);
    for (std::size_t i = 0; i < cells.size(); ++i) {
      try {
        cols[i].push_back(std::stod(cells[i]));
      } catch (const std::exception&) {
        throw FormatError("malformed problem CSV value: " + cells[i]);
      }
    }
  }
  if (header.empty()) throw FormatError("empty problem CSV");
  DiscreteProblem p;
  p.z = std::move(cols.back());
  cols.pop_back();
  p.workers = std::move(cols);
  p.validate();
  return p;
}

DiscreteProblem DiscreteProblem::load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open problem file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str());
}

std::string DiscreteProblem::to_csv() const {
  std::ostringstream out;
  for (std::size_t i = 0; i < workers.size(); ++i) out << 'x' << (i + 1) << ',';
  out << "z\n";
  for (std::size_t s = 0; s < z.size(); ++s) {
    for (const auto& col : workers) out << numeric::format_exact(col[s]) << ',';
    out << numeric::format_exact(z[s]) << '\n';
  }
  return out.str();
}

std::vector<Row> DiscreteAssignment::rows(const DiscreteProblem& prob) const {
  std::vector<Row> out(prob.size());
  for (std::size_t s = 0; s < prob.size(); ++s) {
    Row r;
    for (std::size_t i = 0; i < sigma.size(); ++i) r.push_back(prob.workers[i][sigma[i][s]]);
    r.push_back(prob.z[s]);
    out[s] = std::move(r);
  }
  return out;
}

void score(const DiscreteProblem& prob, DiscreteAssignment& a) {
  numeric::CompensatedSum out, lossacc;
  std::vector<double> team(prob.team_size());
  for (std::size_t s = 0; s < prob.size(); ++s) {
    for (int i = 0; i < prob.team_size(); ++i) team[i] = prob.workers[i][a.sigma[i][s]];
    out.add(team_output(team, prob.z[s]));
    lossacc.add(team_loss(team, prob.z[s]));
  }
  a.aggregate_output = out.value();
  a.aggregate_loss = lossacc.value();
}

DiscreteAssignment identity_assignment(const DiscreteProblem& prob) {
  DiscreteAssignment a;
  a.sigma.assign(prob.team_size(), std::vector<std::size_t>(prob.size()));
  for (auto& s : a.sigma) std::iota(s.begin(), s.end(), 0);
  score(prob, a);
  return a;
}

namespace {

std::size_t oracle_limit(int team_size) {
  if (team_size == 2) return OracleLimits::two_workers;
  if (team_size == 3) return OracleLimits::three_workers;
  return OracleLimits::larger;
}

struct OracleSearch {
  const DiscreteProblem& prob;
  Objective objective;
  std::vector<std::vector<std::size_t>> perms;
  std::vector<std::size_t> choice;  // index into perms per slot
  std::vector<std::size_t> best_choice;
  std::vector<std::vector<double>> partial;  // partial products per depth
  double best = 0.0;
  bool have_best = false;

  void run(int depth) {
    const int k = prob.team_size();
    const std::size_t n = prob.size();
    const auto& col = prob.workers[depth];
    for (std::size_t pi = 0; pi < perms.size(); ++pi) {
      choice[depth] = pi;
      const auto& perm = perms[pi];
      if (depth + 1 == k) {
        double total = 0.0;
        for (std::size_t s = 0; s < n; ++s) total += partial[depth][s] * col[perm[s]];
        // minimise loss, or maximise the product sum
        const double key = objective == Objective::Submodular ? total : -total;
        const double tol = 1e-13 * std::max(1.0, std::abs(best));
        if (!have_best || key < best - tol) {
          best = key;
          best_choice = choice;
          have_best = true;
        }
      } else {
        for (std::size_t s = 0; s < n; ++s) partial[depth + 1][s] = partial[depth][s] * col[perm[s]];
        run(depth + 1);
      }
    }
  }
};

}  // namespace

DiscreteAssignment brute_force_oracle(const DiscreteProblem& prob, Objective objective) {
  prob.validate();
  const std::size_t n = prob.size();
  const std::size_t limit = oracle_limit(prob.team_size());
  if (n > limit) {
    throw CapacityError("brute-force oracle supports at most " + std::to_string(limit) +
                        " teams for team size " + std::to_string(prob.team_size()) + ", got " +
                        std::to_string(n));
  }
  if (n == 0) return identity_assignment(prob);
  OracleSearch search{prob, objective, {}, {}, {}, {}, 0.0, false};
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  do {
    search.perms.push_back(perm);
  } while (std::next_permutation(perm.begin(), perm.end()));
  search.choice.assign(prob.team_size(), 0);
  search.partial.assign(prob.team_size(), std::vector<double>(n));
  search.partial[0] = prob.z;
  search.run(0);

  DiscreteAssignment a;
  for (int i = 0; i < prob.team_size(); ++i) a.sigma.push_back(search.perms[search.best_choice[i]]);
  score(prob, a);
  return a;
}

namespace {

// Row-wise working state: idx[r][c] indexes column c (last column = firms).
struct Table {
  const DiscreteProblem& prob;
  std::vector<std::vector<std::size_t>> idx;

  double value(std::size_t r, std::size_t c) const {
    const std::size_t k = prob.workers.size();
    return c == k ? prob.z[idx[r][c]] : prob.workers[c][idx[r][c]];
  }
  double others(std::size_t r, std::size_t c) const {
    double v = 1.0;
    for (std::size_t j = 0; j < idx[r].size(); ++j) {
      if (j != c) v *= value(r, j);
    }
    return v;
  }
};

double row_loss(const Table& t, std::size_t r) {
  double v = 1.0;
  for (std::size_t j = 0; j < t.idx[r].size(); ++j) v *= t.value(r, j);
  return v;
}

double table_loss(const Table& t) {
  numeric::CompensatedSum acc;
  for (std::size_t r = 0; r < t.idx.size(); ++r) acc.add(row_loss(t, r));
  return acc.value();
}

}  // namespace

DiscreteAssignment rearrangement_heuristic(const DiscreteProblem& prob, const HeuristicOptions& opts) {
  prob.validate();
  const std::size_t n = prob.size();
  const std::size_t k = prob.workers.size();
  Table t{prob, std::vector<std::vector<std::size_t>>(n, std::vector<std::size_t>(k + 1))};
  if (opts.initial) {
    const auto& sig = opts.initial->sigma;
    if (sig.size() != k) throw DomainError("initial assignment has the wrong team size");
    for (std::size_t s = 0; s < n; ++s) {
      for (std::size_t i = 0; i < k; ++i) t.idx[s][i] = sig[i].at(s);
      t.idx[s][k] = s;
    }
  } else {
    std::mt19937_64 rng(opts.seed);
    for (std::size_t c = 0; c < k; ++c) {
      std::vector<std::size_t> perm(n);
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      for (std::size_t s = 0; s < n; ++s) t.idx[s][c] = perm[s];
    }
    for (std::size_t s = 0; s < n; ++s) t.idx[s][k] = s;
  }

  double current = table_loss(t);
  int sweeps = 0;
  bool converged = false;
  std::vector<std::size_t> order(n);
  std::vector<double> prod(n);
  std::vector<std::size_t> values(n);
  while (sweeps < opts.max_sweeps) {
    ++sweeps;
    bool changed = false;
    for (std::size_t c = 0; c <= k; ++c) {
      for (std::size_t r = 0; r < n; ++r) prod[r] = t.others(r, c);
      std::iota(order.begin(), order.end(), 0);
      // rows with the largest partner product receive the smallest values
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return prod[a] > prod[b]; });
      for (std::size_t r = 0; r < n; ++r) values[r] = t.idx[r][c];
      std::vector<std::size_t> sorted_vals = values;
      std::stable_sort(sorted_vals.begin(), sorted_vals.end(), [&](std::size_t a, std::size_t b) {
        return (c == k ? prob.z[a] : prob.workers[c][a]) < (c == k ? prob.z[b] : prob.workers[c][b]);
      });
      auto saved = values;
      for (std::size_t j = 0; j < n; ++j) t.idx[order[j]][c] = sorted_vals[j];
      const double candidate = table_loss(t);
      if (candidate < current - 1e-15 * std::max(1.0, std::abs(current))) {
        current = candidate;
        changed = true;
      } else {
        for (std::size_t r = 0; r < n; ++r) t.idx[r][c] = saved[r];
      }
    }
    if (!changed) {
      converged = true;
      break;
    }
  }

  // back to the firm-indexed permutation form
  DiscreteAssignment a;
  a.sigma.assign(k, std::vector<std::size_t>(n));
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t s = t.idx[r][k];
    for (std::size_t i = 0; i < k; ++i) a.sigma[i][s] = t.idx[r][i];
  }
  a.converged = converged;
  a.sweeps = sweeps;
  score(prob, a);
  return a;
}

DiscreteAssignment rearrangement_heuristic(const DiscreteProblem& prob, int max_sweeps,
                                           std::uint64_t seed) {
  HeuristicOptions opts;
  opts.max_sweeps = max_sweeps;
  opts.seed = seed;
  return rearrangement_heuristic(prob, opts);
}

std::vector<StabilityViolation> check_stability(std::span<const Row> rows, double tol) {
  std::vector<StabilityViolation> out;
  const std::size_t n = rows.size();
  if (n < 2) return out;
  const std::size_t k = rows[0].size();
  auto others = [&](const Row& r, std::size_t c) {
    double v = 1.0;
    for (std::size_t j = 0; j < k; ++j) {
      if (j != c) v *= r[j];
    }
    return v;
  };
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      for (std::size_t c = 0; c < k; ++c) {
        // loss falls by (x_a - x_b)(P_a - P_b) when coordinate c is swapped
        const double gain = (rows[a][c] - rows[b][c]) * (others(rows[a], c) - others(rows[b], c));
        if (gain > tol) out.push_back({a, b, static_cast<int>(c), gain});
      }
    }
  }
  return out;
}

CountermonotoneResult check_product_countermonotonic(std::span<const Row> rows, double tol) {
  CountermonotoneResult res;
  const std::size_t n = rows.size();
  if (n < 2) return res;
  const std::size_t k = rows[0].size();
  std::vector<double> pd(n), pc(n);
  std::vector<std::size_t> order(n);
  // the last coordinate always sits in the complement, so each split is
  // visited once
  const std::uint32_t half = 1u << (k - 1);
  for (std::uint32_t mask = 1; mask < half; ++mask) {
    for (std::size_t r = 0; r < n; ++r) {
      double d = 1.0, c = 1.0;
      for (std::size_t j = 0; j < k; ++j) {
        if (mask & (1u << j)) {
          d *= rows[r][j];
        } else {
          c *= rows[r][j];
        }
      }
      pd[r] = d;
      pc[r] = c;
    }
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (pd[a] != pd[b]) return pd[a] < pd[b];
      return pc[a] > pc[b];
    });
    // every earlier row with a clearly smaller D-product must carry a
    // complementary product at least as large
    std::size_t lead = 0;
    std::size_t argmin = n;
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t cur = order[j];
      while (lead < j && pd[order[lead]] < pd[cur] - tol) {
        if (argmin == n || pc[order[lead]] < pc[argmin]) argmin = order[lead];
        ++lead;
      }
      if (argmin != n && pc[cur] > pc[argmin] + tol) {
        res.ok = false;
        for (std::size_t b = 0; b < k; ++b) {
          if (mask & (1u << b)) res.split.push_back(static_cast<int>(b));
        }
        res.first = argmin;
        res.second = cur;
        return res;
      }
    }
  }
  return res;
}

MixingResult check_complete_mixing(std::span<const Row> rows, double tol) {
  MixingResult m;
  if (rows.empty()) return m;
  m.min_loss = std::numeric_limits<double>::infinity();
  m.max_loss = -std::numeric_limits<double>::infinity();
  for (const Row& r : rows) {
    double v = 1.0;
    for (double x : r) v *= x;
    m.min_loss = std::min(m.min_loss, v);
    m.max_loss = std::max(m.max_loss, v);
  }
  m.spread = m.max_loss - m.min_loss;
  m.mixed = m.spread <= tol;
  return m;
}

double amgm_bound(const DiscreteProblem& prob) {
  prob.validate();
  const std::size_t n = prob.size();
  if (n == 0) return 0.0;
  numeric::CompensatedSum logs;
  auto add = [&](double v) {
    if (v == 0.0) return false;
    logs.add(std::log(v));
    return true;
  };
  for (const auto& col : prob.workers) {
    for (double v : col) {
      if (!add(v)) return 0.0;
    }
  }
  for (double v : prob.z) {
    if (!add(v)) return 0.0;
  }
  return std::exp(logs.value() / static_cast<double>(n));
}

CanonicalTechnology normalize_technology(const TechnologySpec& spec) {
  const auto& p = spec.phi;
  for (double v : p) {
    if (!std::isfinite(v)) throw InvalidTechnologyError("technology coefficients must be finite");
  }
  if (p[0] < 0.0 || p[1] < 0.0 || p[2] < 0.0) {
    throw InvalidTechnologyError("interaction coefficients phi1..phi3 must be nonnegative");
  }
  CanonicalTechnology c;
  c.shift_x1 = p[0];
  c.shift_x2 = p[1];
  c.shift_z = p[2];
  c.phi_x1 = p[1] * p[2] - p[3];
  c.phi_x2 = p[0] * p[2] - p[4];
  c.phi_z = p[0] * p[1] - p[5];
  c.phi_y = p[0] * p[1] * p[2] - p[0] * c.phi_x1 - p[1] * c.phi_x2 - p[2] * c.phi_z - p[2] - p[6];
  return c;
}

double general_output(const TechnologySpec& spec, double x1, double x2, double z) {
  const auto& p = spec.phi;
  return z * (1.0 - x1 * x2) - p[0] * x2 * z - p[1] * x1 * z - p[2] * x1 * x2 - p[3] * x1 -
         p[4] * x2 - p[5] * z - p[6];
}

double canonical_output(const CanonicalTechnology& c, double x1t, double x2t, double zt) {
  return zt * (1.0 - x1t * x2t) + c.phi_x1 * x1t + c.phi_x2 * x2t + c.phi_z * zt + c.phi_y;
}

}  // namespace teamsort
