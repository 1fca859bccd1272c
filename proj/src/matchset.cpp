#include "teamsort/matchset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "json.hpp"
#include "teamsort/errors.hpp"
#include "teamsort/numeric.hpp"

namespace teamsort {

namespace {

// Closure slack when comparing a requested percentile against p_low.
constexpr double kClosureTol = 1e-12;

void check_branch(int branch, int n_w) {
  if (branch < 0 || branch > n_w) {
    throw DomainError("branch must be in [0, " + std::to_string(n_w) + "], got " +
                      std::to_string(branch));
  }
}

MatchTriplet make_triplet(const TypeDistribution& dist, std::vector<double> pct, int branch,
                          double weight) {
  MatchTriplet t;
  t.levels.reserve(pct.size());
  for (double p : pct) t.levels.push_back(dist.quantile(p));
  t.percentiles = std::move(pct);
  t.branch = branch;
  t.weight = weight;
  return t;
}

struct RaResult {
  std::vector<std::vector<std::size_t>> order;  // order[c][r]: atom index in column c for row r
  double spread = 0.0;
  int sweeps = 0;
};

double row_spread(const std::vector<std::vector<double>>& vals,
                  const std::vector<std::vector<std::size_t>>& ord) {
  const std::size_t rows = ord[0].size();
  double lo = INFINITY, hi = -INFINITY;
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < ord.size(); ++c) s += vals[c][ord[c][r]];
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  return hi - lo;
}

// Rearrangement on log levels: each column is re-sorted opposite to the sum
// of the other columns. Only improvements of the spread are kept.
RaResult rearrange(const std::vector<std::vector<double>>& vals, double tol, int max_sweeps,
                   std::vector<std::vector<std::size_t>> start) {
  const std::size_t cols = vals.size();
  const std::size_t rows = vals[0].size();
  RaResult res;
  res.order = std::move(start);
  res.spread = row_spread(vals, res.order);
  auto work = res.order;
  std::vector<double> others(rows);
  std::vector<std::size_t> by_others(rows);
  std::vector<std::size_t> fresh(rows);
  int sweeps = 0;
  while (res.spread > tol && sweeps < max_sweeps) {
    bool changed = false;
    for (std::size_t c = 0; c < cols; ++c) {
      std::fill(others.begin(), others.end(), 0.0);
      for (std::size_t d = 0; d < cols; ++d) {
        if (d == c) continue;
        for (std::size_t r = 0; r < rows; ++r) others[r] += vals[d][work[d][r]];
      }
      // atoms are stored ascending, so rank k is atom k
      std::iota(by_others.begin(), by_others.end(), std::size_t{0});
      std::stable_sort(by_others.begin(), by_others.end(),
                       [&](std::size_t a, std::size_t b) { return others[a] > others[b]; });
      for (std::size_t k = 0; k < rows; ++k) {
        const std::size_t r = by_others[k];
        if (vals[c][work[c][r]] != vals[c][k]) changed = true;
        fresh[r] = k;
      }
      work[c] = fresh;
    }
    ++sweeps;
    const double sp = row_spread(vals, work);
    if (sp < res.spread) {
      res.spread = sp;
      res.order = work;
    }
    if (!changed) break;
  }
  res.sweeps = sweeps;
  return res;
}

std::vector<std::vector<std::size_t>> shuffled_start(std::size_t cols, std::size_t rows,
                                                     std::uint64_t seed) {
  std::vector<std::vector<std::size_t>> order(cols, std::vector<std::size_t>(rows));
  std::mt19937_64 rng(seed);
  for (std::size_t c = 0; c < cols; ++c) {
    std::iota(order[c].begin(), order[c].end(), std::size_t{0});
    if (c > 0) std::shuffle(order[c].begin(), order[c].end(), rng);
  }
  return order;
}

}  // namespace

std::string branch_name(int branch, int n_w) {
  if (branch == kMixedBranch) return "Mixed";
  check_branch(branch, n_w);
  if (branch == n_w) return "Mz";
  return "Mx" + std::to_string(branch + 1);
}

double MatchTriplet::loss() const {
  double l = 1.0;
  for (double v : levels) l *= v;
  return l;
}

MatchTriplet matching_set_point(const EquilibriumSolution& eq, int branch, double p) {
  const int n = eq.n_w();
  if (branch == kMixedBranch) {
    throw DomainError("mixed points are not a one-parameter family");
  }
  check_branch(branch, n);
  const double pl = eq.p_low();
  if (!(p >= 0.0) || p > pl + kClosureTol) {
    std::ostringstream msg;
    msg << "percentile " << p << " outside the countermonotone range [0, " << pl << "]";
    throw DomainError(msg.str());
  }
  p = std::min(p, pl);
  // at the closure the partner percentile is p_high exactly
  const double partner = (p == pl) ? eq.p_high() : 1.0 - n * p;
  std::vector<double> pct(n + 1, partner);
  pct[branch] = p;
  return make_triplet(eq.dist(), std::move(pct), branch, 0.0);
}

std::pair<double, double> employable_bounds(const EquilibriumSolution& eq, double z) {
  if (eq.n_w() != 2) throw DomainError("employable bounds are defined for two-worker teams");
  const double lo = eq.level_low(), hi = eq.level_high();
  const double slack = 1e-12 * std::max(1.0, hi);
  if (!(z >= lo - slack && z <= hi + slack)) {
    std::ostringstream msg;
    msg << "project value " << z << " outside the mixed range [" << lo << ", " << hi << "]";
    throw DomainError(msg.str());
  }
  return {lo * hi / z, hi};
}

ExistenceReport check_existence(const EquilibriumSolution& eq) {
  ExistenceReport rep;
  const int n = eq.n_w();
  const double pl = eq.p_low(), ph = eq.p_high();
  if (eq.degenerate() || ph - pl <= 0.0) {
    rep.vacuous = true;
    return rep;
  }
  // x -> -log x on the middle; all n+1 marginals coincide
  rep.a = -std::log(eq.level_high());
  rep.b = -std::log(eq.level_low());
  rep.l = rep.b - rep.a;
  rep.mu = -eq.dist().integral_log_quantile(pl, ph) / (ph - pl);
  const double k = n + 1;
  rep.lhs = k * rep.a + rep.l;
  rep.total_mean = k * rep.mu;
  rep.rhs = k * rep.b - rep.l;
  rep.slack_lower = rep.total_mean - rep.lhs;
  rep.slack_upper = rep.rhs - rep.total_mean;
  // the lower inequality is tight at the cutoff, so allow solver-level noise
  const double tol = 1e-8 * std::max(1.0, std::abs(rep.total_mean));
  rep.holds = rep.slack_lower >= -tol && rep.slack_upper >= -tol;
  return rep;
}

std::vector<Row> AssignmentSample::rows() const {
  std::vector<Row> out;
  out.reserve(triplets.size());
  for (const auto& t : triplets) out.push_back(t.levels);
  return out;
}

std::vector<double> AssignmentSample::weights() const {
  std::vector<double> w;
  w.reserve(triplets.size());
  for (const auto& t : triplets) w.push_back(t.weight);
  return w;
}

double AssignmentSample::max_ks(const TypeDistribution& dist) const {
  double worst = 0.0;
  if (triplets.empty()) return 1.0;
  const std::size_t cols = triplets.front().levels.size();
  std::vector<std::size_t> idx(triplets.size());
  for (std::size_t c = 0; c < cols; ++c) {
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return triplets[a].levels[c] < triplets[b].levels[c];
    });
    numeric::CompensatedSum cum;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const double x = triplets[idx[k]].levels[c];
      const double F = dist.cdf(x);
      worst = std::max(worst, std::abs(cum.value() - F));
      cum += triplets[idx[k]].weight;
      // only compare the right limit once all ties are absorbed
      if (k + 1 == idx.size() || triplets[idx[k + 1]].levels[c] != x) {
        worst = std::max(worst, std::abs(cum.value() - F));
      }
    }
  }
  return worst;
}

std::string AssignmentSample::to_csv() const {
  std::ostringstream out;
  const int n = n_w;
  for (int i = 0; i < n; ++i) out << "p_x" << i + 1 << ',';
  out << "p_z,";
  for (int i = 0; i < n; ++i) out << 'x' << i + 1 << ',';
  out << "z,weight,branch\n";
  for (const auto& t : triplets) {
    for (double p : t.percentiles) out << numeric::format_exact(p) << ',';
    for (double x : t.levels) out << numeric::format_exact(x) << ',';
    out << numeric::format_exact(t.weight) << ',' << branch_name(t.branch, n) << '\n';
  }
  return out.str();
}

AssignmentSample AssignmentSample::parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  AssignmentSample s;
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
      // 2 (n + 1) coordinates plus weight and branch
      if (cells.size() < 6 || cells.size() % 2 != 0 || cells.back() != "branch" || cells[0] != "p_x1") {
        throw FormatError("sample CSV must start with header p_x1,...,p_z,x1,...,z,weight,branch");
      }
      s.n_w = static_cast<int>(cells.size() - 2) / 2 - 1;
      continue;
    }
    const std::size_t width = 2 * static_cast<std::size_t>(s.n_w + 1);
    if (cells.size() != width + 2) throw FormatError("malformed sample row: " + line);
    MatchTriplet t;
    try {
      for (std::size_t c = 0; c <= width; ++c) {
        const double v = std::stod(cells[c]);
        if (c < width / 2) {
          t.percentiles.push_back(v);
        } else if (c < width) {
          t.levels.push_back(v);
        } else {
          t.weight = v;
        }
      }
    } catch (const std::exception&) {
      throw FormatError("malformed sample row: " + line);
    }
    t.branch = -2;
    for (int b = kMixedBranch; b <= s.n_w; ++b) {
      if (branch_name(b, s.n_w) == cells.back()) t.branch = b;
    }
    if (t.branch == -2) throw FormatError("unknown branch label " + cells.back());
    s.triplets.push_back(std::move(t));
  }
  if (!header_seen) throw FormatError("empty sample CSV");
  return s;
}

AssignmentSample AssignmentSample::load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open sample file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str());
}

std::string AssignmentSample::diagnostics_json() const {
  nlohmann::json j;
  j["n_w"] = n_w;
  j["seed"] = seed;
  j["triplets"] = triplets.size();
  j["mixed"] = mixing.mixed;
  j["log_spread"] = mixing.log_spread;
  j["rearranged_spread"] = mixing.rearranged_spread;
  j["max_projection"] = mixing.max_projection;
  j["max_relative_deviation"] = mixing.max_relative_dev;
  j["sweeps"] = mixing.sweeps;
  j["atoms"] = mixing.atoms;
  return j.dump(2);
}

AssignmentSample sample_assignment(const EquilibriumSolution& eq, int m_points, std::uint64_t seed,
                                   const SampleOptions& opts) {
  if (m_points < 1) throw DomainError("m_points must be positive");
  const auto& dist = eq.dist();
  const int n = eq.n_w();
  const double pl = eq.p_low(), ph = eq.p_high();

  AssignmentSample s;
  s.n_w = n;
  s.seed = seed;

  if (pl > 0.0) {
    const int per = std::max(1, static_cast<int>(std::ceil(m_points * pl)));
    const double h = pl / per;
    for (int b = 0; b <= n; ++b) {
      for (int j = 0; j < per; ++j) {
        auto t = matching_set_point(eq, b, (j + 0.5) * h);
        t.weight = h;
        s.triplets.push_back(std::move(t));
      }
    }
  }

  const double width = ph - pl;
  if (eq.degenerate() || width <= 0.0) {
    s.mixing.atoms = 0;
    return s;
  }

  // Atoms include both ends of the middle so the extreme teams sit exactly
  // on the cutoff triplet; interior atoms split the mass equally.
  const std::size_t K =
      std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(m_points * width)));
  std::vector<double> q(K), logs(K);
  for (std::size_t k = 0; k < K; ++k) {
    q[k] = (k + 1 == K) ? ph : pl + width * static_cast<double>(k) / static_cast<double>(K - 1);
    logs[k] = dist.log_quantile(q[k]);
  }
  const std::vector<std::vector<double>> vals(n + 1, logs);
  const double tol_log = std::log1p(opts.tol_mix);
  const auto ra = rearrange(vals, tol_log, opts.max_sweeps, shuffled_start(n + 1, K, seed));

  // The rearrangement stalls at a spread of a few atom gaps. Each row's
  // residual against log C is then split evenly over its coordinates, kept
  // inside the middle range; the KS check guards the marginals.
  const double C = eq.C();
  const double target = std::log(C);
  const double lo = logs.front(), hi = logs.back();
  double worst_dev = 0.0, worst_shift = 0.0;
  const double w = width / static_cast<double>(K);
  for (std::size_t r = 0; r < K; ++r) {
    std::vector<double> lv(n + 1);
    for (int c = 0; c <= n; ++c) lv[c] = logs[ra.order[c][r]];
    const auto before = lv;
    for (int pass = 0; pass <= n; ++pass) {
      double resid = target;
      for (double v : lv) resid -= v;
      auto has_room = [&](double v) { return resid > 0.0 ? v < hi : v > lo; };
      const auto free = std::count_if(lv.begin(), lv.end(), has_room);
      if (resid == 0.0 || free == 0) break;
      const double share = resid / static_cast<double>(free);
      for (double& v : lv) {
        if (has_room(v)) v = std::clamp(v + share, lo, hi);
      }
    }
    MatchTriplet t;
    t.branch = kMixedBranch;
    t.weight = w;
    for (int c = 0; c <= n; ++c) {
      worst_shift = std::max(worst_shift, std::abs(lv[c] - before[c]));
      // endpoints map back to the exact cutoff levels
      const double x = lv[c] == lo ? eq.level_low() : lv[c] == hi ? eq.level_high() : std::exp(lv[c]);
      t.levels.push_back(x);
      t.percentiles.push_back(lv[c] == lo ? pl : lv[c] == hi ? ph : dist.cdf(x));
    }
    worst_dev = std::max(worst_dev, std::abs(t.loss() / C - 1.0));
    s.triplets.push_back(std::move(t));
  }
  s.mixing.atoms = K;
  s.mixing.sweeps = ra.sweeps;
  s.mixing.rearranged_spread = ra.spread;
  s.mixing.max_projection = worst_shift;
  double lo_sum = INFINITY, hi_sum = -INFINITY;
  for (std::size_t r = s.triplets.size() - K; r < s.triplets.size(); ++r) {
    const double l = std::log(s.triplets[r].loss());
    lo_sum = std::min(lo_sum, l);
    hi_sum = std::max(hi_sum, l);
  }
  s.mixing.log_spread = hi_sum - lo_sum;
  s.mixing.max_relative_dev = worst_dev;
  s.mixing.mixed = s.mixing.log_spread <= tol_log && worst_dev <= opts.tol_mix;
  return s;
}

DiscreteProblem discretize(const EquilibriumSolution& eq, std::size_t n_s) {
  if (n_s == 0) throw DomainError("need at least one atom per marginal");
  std::vector<double> col(n_s);
  for (std::size_t j = 0; j < n_s; ++j) {
    col[j] = eq.dist().quantile((static_cast<double>(j) + 0.5) / static_cast<double>(n_s));
  }
  DiscreteProblem prob;
  prob.workers.assign(eq.n_w(), col);
  prob.z = col;
  return prob;
}

DiscreteAssignment guided_initial(const DiscreteProblem& prob, double p_low) {
  prob.validate();
  const int n = prob.team_size();
  const std::size_t N = prob.size();
  if (!(p_low >= 0.0 && p_low <= 1.0 / (n + 1) + 1e-12)) {
    throw DomainError("p_low must lie in [0, 1/(n+1)]");
  }
  // rank -> index, per column (workers then z)
  std::vector<std::vector<std::size_t>> by_rank(n + 1, std::vector<std::size_t>(N));
  for (int c = 0; c <= n; ++c) {
    const auto& v = (c < n) ? prob.workers[c] : prob.z;
    auto& idx = by_rank[c];
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  }
  const std::size_t kb = std::min<std::size_t>(
      static_cast<std::size_t>(std::llround(p_low * static_cast<double>(N))), N / (n + 1));

  DiscreteAssignment a;
  a.sigma.assign(n, std::vector<std::size_t>(N));
  auto place = [&](const std::vector<std::size_t>& ranks) {
    const std::size_t firm = by_rank[n][ranks[n]];
    for (int i = 0; i < n; ++i) a.sigma[i][firm] = by_rank[i][ranks[i]];
  };
  std::vector<std::size_t> ranks(n + 1);
  for (int b = 0; b <= n; ++b) {
    for (std::size_t k = 0; k < kb; ++k) {
      for (int c = 0; c <= n; ++c) {
        if (c == b) {
          ranks[c] = k;
        } else {
          const std::size_t order = static_cast<std::size_t>(b < c ? b : b - 1);
          ranks[c] = N - 1 - (static_cast<std::size_t>(n) * k + order);
        }
      }
      place(ranks);
    }
  }
  const std::size_t middle = N - (n + 1) * kb;
  for (std::size_t j = 0; j < middle; ++j) {
    ranks[0] = kb + j;
    for (int c = 1; c <= n; ++c) ranks[c] = N - 1 - n * kb - j;
    place(ranks);
  }
  score(prob, a);
  return a;
}

DiscreteAssignment guided_assignment(const DiscreteProblem& prob, double p_low, int max_sweeps) {
  HeuristicOptions opts;
  opts.max_sweeps = max_sweeps;
  opts.initial = guided_initial(prob, p_low);
  return rearrangement_heuristic(prob, opts);
}

}  // namespace teamsort
