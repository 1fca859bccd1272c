#include "teamsort/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "teamsort/errors.hpp"
#include "teamsort/numeric.hpp"

namespace teamsort {

namespace {

constexpr int kScanPoints = 512;
constexpr double kScanStart = 1e-6;
constexpr double kRootTol = 1e-10;
constexpr int kCells = 4096;

std::string dump_curve(const std::vector<std::pair<double, double>>& scan) {
  std::ostringstream out;
  out << "p,G\n";
  for (const auto& [p, g] : scan) out << numeric::format_exact(p) << ',' << numeric::format_exact(g) << '\n';
  return out.str();
}

// First sign change from negative to positive on a log-spaced scan, refined
// by bisection. G vanishes at the right end by construction, so the end
// point itself is never taken as a root.
template <class Fn>
CutoffResult bracket_and_bisect(Fn G, double top) {
  CutoffResult r;
  const auto pts = numeric::log_spaced(kScanStart, top, kScanPoints);
  r.scan.reserve(kScanPoints);
  for (int k = 0; k + 1 < kScanPoints; ++k) r.scan.emplace_back(pts[k], G(pts[k]));
  r.scan.emplace_back(top, 0.0);

  for (int k = 0; k + 2 < kScanPoints; ++k) {
    const double g0 = r.scan[k].second;
    const double g1 = r.scan[k + 1].second;
    if (g0 == 0.0) {
      r.p_low = r.scan[k].first;
      r.residual = 0.0;
      return r;
    }
    if (g0 < 0.0 && g1 > 0.0) {
      const auto b = numeric::bisect(G, r.scan[k].first, r.scan[k + 1].first, kRootTol, 0.0, 400);
      if (!b.converged || std::abs(b.value) > kRootTol) {
        throw SolverError("cutoff bisection did not reach |G| <= 1e-10", dump_curve(r.scan));
      }
      r.p_low = b.root;
      r.residual = b.value;
      r.iterations = b.iterations;
      return r;
    }
  }
  // no interior crossing: negative all the way means the mixed middle is empty
  bool all_negative = true;
  for (int k = 0; k + 1 < kScanPoints; ++k) all_negative = all_negative && r.scan[k].second < 0.0;
  if (all_negative) {
    r.p_low = top;
    r.degenerate = true;
    return r;
  }
  throw SolverError("cutoff equation has no sign change on (1e-6, 1/(n+1))", dump_curve(r.scan));
}

double gl(const std::function<double(double)>& f, double a, double b) {
  return numeric::gauss_legendre(f, a, b);
}

}  // namespace

double cutoff_function(const TypeDistribution& dist, int n_w, double p) {
  if (n_w < 2) throw DomainError("team size must be at least 2");
  const double top = 1.0 / (n_w + 1);
  if (!(p > 0.0 && p <= top)) throw DomainError("cutoff argument outside (0, 1/(n+1)]");
  const double upper = 1.0 - n_w * p;
  if (upper <= p) return 0.0;
  const double L = n_w * dist.log_quantile(upper) + dist.log_quantile(p);
  return L - dist.integral_log_quantile(p, upper) / (top - p);
}

CutoffResult solve_cutoff(const TypeDistribution& dist, int n_w) {
  if (n_w < 2) throw DomainError("team size must be at least 2");
  const double top = 1.0 / (n_w + 1);
  CutoffResult r = bracket_and_bisect([&](double p) { return cutoff_function(dist, n_w, p); }, top);
  r.p_high = r.degenerate ? top : 1.0 - n_w * r.p_low;
  r.C = std::pow(dist.quantile(r.p_high), n_w) * dist.quantile(r.p_low);
  return r;
}

namespace baseline {

double cutoff_function(const TypeDistribution& dist, double p) {
  if (!(p > 0.0 && p <= 1.0 / 3.0)) throw DomainError("cutoff argument outside (0, 1/3]");
  const double upper = 1.0 - 2.0 * p;
  if (upper <= p) return 0.0;
  const double L = 2.0 * dist.log_quantile(1.0 - 2.0 * p) + dist.log_quantile(p);
  return L - dist.integral_log_quantile(p, upper) / (1.0 / 3.0 - p);
}

CutoffResult solve_cutoff(const TypeDistribution& dist) {
  CutoffResult r = bracket_and_bisect([&](double p) { return cutoff_function(dist, p); }, 1.0 / 3.0);
  r.p_high = r.degenerate ? 1.0 / 3.0 : 1.0 - 2.0 * r.p_low;
  const double top = dist.quantile(r.p_high);
  r.C = top * top * dist.quantile(r.p_low);
  return r;
}

double marginal_product(const TypeDistribution& dist, double p_low, double C, double p) {
  const double p_high = 1.0 - 2.0 * p_low;
  if (p <= p_low) {
    const double partner = dist.quantile(1.0 - 2.0 * p);
    return -partner * partner;
  }
  if (p < p_high) return -C / dist.quantile(p);
  return -dist.quantile(p) * dist.quantile((1.0 - p) / 2.0);
}

}  // namespace baseline

struct EquilibriumSolution::State {
  TypeDistribution dist = TypeDistribution::uniform();
  int n_w = 2;
  double p_low = 0.0;
  double p_high = 0.0;
  double C = 0.0;
  double C_w = 0.0;
  double C_v = 0.0;
  double mu_z = 0.0;
  bool degenerate = false;
  double x_low = 0.0;   // I(p_low)
  double x_high = 0.0;  // I(p_high)
  std::vector<double> nodes;  // level-space breakpoints
  std::vector<double> cum;    // integral of m from nodes[0] to nodes[i]
  double e_integral_m_tail = 0.0;  // integral of m (1 - F)
  double planner_loss = 0.0;
  AssumptionReport assumptions;

  double m_level(double x) const {
    if (x <= x_low) {
      const double p = dist.cdf(x);
      return -std::pow(dist.quantile(std::clamp(1.0 - n_w * p, 0.0, 1.0)), n_w);
    }
    if (x < x_high) return -C / x;
    const double p = dist.cdf(x);
    return -std::pow(x, n_w - 1) * dist.quantile(std::clamp((1.0 - p) / n_w, 0.0, 1.0));
  }

  double integral_m(double x) const {
    auto it = std::upper_bound(nodes.begin(), nodes.end(), x);
    std::size_t i = static_cast<std::size_t>(it - nodes.begin());
    i = i == 0 ? 0 : i - 1;
    if (i + 1 >= nodes.size()) i = nodes.size() - 1;
    if (x == nodes[i]) return cum[i];
    return cum[i] + gl([this](double s) { return m_level(s); }, nodes[i], x);
  }
};

namespace {

std::vector<double> percentile_breaks(const TypeDistribution& dist, int n_w, double p_low,
                                      double p_high, double upto = 1.0) {
  std::vector<double> ps;
  for (int k = 0; k <= kCells; ++k) ps.push_back(static_cast<double>(k) / kCells);
  ps.push_back(p_low);
  ps.push_back(p_high);
  for (double pj : dist.kink_percentiles()) {
    // kinks of I enter m through I(1 - n p) and I((1 - p)/n) as well
    for (double q : {pj, (1.0 - pj) / n_w, 1.0 - n_w * pj}) {
      if (q >= 0.0 && q <= 1.0) ps.push_back(q);
    }
  }
  std::vector<double> out;
  for (double p : numeric::sorted_unique(std::move(ps))) {
    if (p <= upto) out.push_back(p);
  }
  if (out.back() < upto) out.push_back(upto);
  return out;
}

}  // namespace

EquilibriumSolution EquilibriumSolution::solve(const TypeDistribution& dist, int n_w, double C_w) {
  const CutoffResult r = solve_cutoff(dist, n_w);
  return from_parts(dist, n_w, r.p_low, r.C, C_w, r.degenerate);
}

EquilibriumSolution EquilibriumSolution::from_parts(const TypeDistribution& dist, int n_w,
                                                    double p_low, double C, double C_w,
                                                    bool degenerate) {
  if (n_w < 2) throw DomainError("team size must be at least 2");
  const double top = 1.0 / (n_w + 1);
  if (!(p_low > 0.0 && p_low <= top)) throw DomainError("p_low outside (0, 1/(n+1)]");
  if (!std::isfinite(C_w)) throw DomainError("wage constant must be finite");
  auto s = std::make_shared<State>();
  s->dist = dist;
  s->n_w = n_w;
  s->p_low = p_low;
  s->p_high = degenerate ? top : 1.0 - n_w * p_low;
  s->C = C;
  s->C_w = C_w;
  s->degenerate = degenerate;
  s->x_low = dist.quantile(s->p_low);
  s->x_high = dist.quantile(s->p_high);
  s->mu_z = dist.mean();

  std::vector<double> levels;
  for (double p : percentile_breaks(dist, n_w, s->p_low, s->p_high)) levels.push_back(dist.quantile(p));
  s->nodes = numeric::sorted_unique(std::move(levels));
  s->cum.assign(s->nodes.size(), 0.0);
  numeric::CompensatedSum acc, tail;
  const State& st = *s;
  for (std::size_t i = 1; i < s->nodes.size(); ++i) {
    const double a = s->nodes[i - 1], b = s->nodes[i];
    acc.add(gl([&](double x) { return st.m_level(x); }, a, b));
    tail.add(gl([&](double x) { return st.m_level(x) * (1.0 - st.dist.cdf(x)); }, a, b));
    s->cum[i] = acc.value();
  }
  s->e_integral_m_tail = tail.value();

  // anchor: workers at the top of the support with a bottom project earn
  // zero surplus
  const double lo = dist.lo(), hi = dist.hi();
  const double w_hi = C_w + s->cum.back();
  s->C_v = lo * (1.0 - std::pow(hi, n_w)) - n_w * w_hi;

  numeric::CompensatedSum branch;
  const auto pb = percentile_breaks(dist, n_w, s->p_low, s->p_high, s->p_low);
  for (std::size_t i = 1; i < pb.size(); ++i) {
    branch.add(gl(
        [&](double p) {
          return dist.quantile(p) * std::pow(dist.quantile(std::clamp(1.0 - n_w * p, 0.0, 1.0)), n_w);
        },
        pb[i - 1], pb[i]));
  }
  s->planner_loss = (n_w + 1) * branch.value() + (s->p_high - s->p_low) * C;
  s->assumptions = check_assumptions(dist, std::make_pair(s->p_low, s->p_high), n_w);

  EquilibriumSolution out;
  out.state_ = std::move(s);
  return out;
}

EquilibriumSolution EquilibriumSolution::with_wage_constant(double C_w) const {
  const State& s = state();
  return from_parts(s.dist, s.n_w, s.p_low, s.C, C_w, s.degenerate);
}

const EquilibriumSolution::State& EquilibriumSolution::state() const {
  if (!state_) throw StateError("equilibrium has not been solved");
  return *state_;
}

const TypeDistribution& EquilibriumSolution::dist() const { return state().dist; }
int EquilibriumSolution::n_w() const { return state().n_w; }
double EquilibriumSolution::p_low() const { return state().p_low; }
double EquilibriumSolution::p_high() const { return state().p_high; }
double EquilibriumSolution::C() const { return state().C; }
double EquilibriumSolution::C_w() const { return state().C_w; }
double EquilibriumSolution::C_v() const { return state().C_v; }
double EquilibriumSolution::mu_z() const { return state().mu_z; }
bool EquilibriumSolution::degenerate() const { return state().degenerate; }
double EquilibriumSolution::level_low() const { return state().x_low; }
double EquilibriumSolution::level_high() const { return state().x_high; }
const AssumptionReport& EquilibriumSolution::assumptions() const { return state().assumptions; }

double EquilibriumSolution::marginal_product_at(double p) const {
  const State& s = state();
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("percentile outside [0, 1]");
  const int n = s.n_w;
  if (p <= s.p_low) return -std::pow(s.dist.quantile(std::clamp(1.0 - n * p, 0.0, 1.0)), n);
  if (p < s.p_high) return -s.C / s.dist.quantile(p);
  return -std::pow(s.dist.quantile(p), n - 1) * s.dist.quantile((1.0 - p) / n);
}

double EquilibriumSolution::marginal_product(double x) const {
  const State& s = state();
  if (!(x >= s.dist.lo() && x <= s.dist.hi())) throw DomainError("level outside the support");
  return s.m_level(x);
}

double EquilibriumSolution::integral_m(double x) const {
  const State& s = state();
  if (!(x >= s.dist.lo() && x <= s.dist.hi())) throw DomainError("level outside the support");
  return s.integral_m(x);
}

double EquilibriumSolution::integral_m() const { return state().cum.back(); }

double EquilibriumSolution::wage(double x) const { return state().C_w + integral_m(x); }

double EquilibriumSolution::firm_value(double z) const {
  const State& s = state();
  return s.C_v + (z - s.dist.lo()) + integral_m(z);
}

double EquilibriumSolution::expected_wage() const {
  const State& s = state();
  return s.C_w + s.e_integral_m_tail;
}

double EquilibriumSolution::expected_firm_value() const {
  const State& s = state();
  return s.C_v + (s.mu_z - s.dist.lo()) + s.e_integral_m_tail;
}

double EquilibriumSolution::planner_output() const {
  const State& s = state();
  return s.mu_z - s.planner_loss;
}

std::vector<GridPoint> EquilibriumSolution::grid(int points) const {
  std::vector<GridPoint> g;
  for (int k = 0; k < points; ++k) {
    const double p = points == 1 ? 0.0 : static_cast<double>(k) / (points - 1);
    const double x = dist().quantile(p);
    g.push_back({p, x, marginal_product_at(p), wage(x), firm_value(x)});
  }
  return g;
}

namespace {

nlohmann::json dist_to_json(const TypeDistribution& d) {
  nlohmann::json j;
  switch (d.kind()) {
    case DistKind::Uniform:
      j["kind"] = "uniform";
      j["a"] = d.params().first;
      j["b"] = d.params().second;
      break;
    case DistKind::Beta:
      j["kind"] = "beta";
      j["alpha"] = d.params().first;
      j["beta"] = d.params().second;
      break;
    case DistKind::PiecewiseLinear: {
      j["kind"] = "piecewise";
      auto arr = nlohmann::json::array();
      for (const Knot& k : d.knots()) arr.push_back({k.p, k.level});
      j["knots"] = arr;
      break;
    }
  }
  return j;
}

TypeDistribution dist_from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "uniform") return TypeDistribution::uniform(j.at("a").get<double>(), j.at("b").get<double>());
  if (kind == "beta") return TypeDistribution::beta(j.at("alpha").get<double>(), j.at("beta").get<double>());
  if (kind == "piecewise") {
    std::vector<Knot> knots;
    for (const auto& k : j.at("knots")) knots.push_back({k.at(0).get<double>(), k.at(1).get<double>()});
    return TypeDistribution::piecewise(std::move(knots));
  }
  throw FormatError("unknown distribution kind " + kind);
}

}  // namespace

std::string EquilibriumSolution::to_json() const {
  const State& s = state();
  nlohmann::json j;
  j["n_w"] = s.n_w;
  j["p_low"] = s.p_low;
  j["p_high"] = s.p_high;
  j["C"] = s.C;
  j["C_w"] = s.C_w;
  j["C_v"] = s.C_v;
  j["mu_z"] = s.mu_z;
  j["degenerate"] = s.degenerate;
  j["dist"] = dist_to_json(s.dist);
  auto arr = nlohmann::json::array();
  for (const GridPoint& g : grid()) {
    arr.push_back({{"p", g.p}, {"I", g.I}, {"m", g.m}, {"w", g.w}, {"v", g.v}});
  }
  j["grid"] = arr;
  return j.dump(1);
}

EquilibriumSolution EquilibriumSolution::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
    const auto eq = from_parts(dist_from_json(j.at("dist")), j.at("n_w").get<int>(),
                               j.at("p_low").get<double>(), j.at("C").get<double>(),
                               j.at("C_w").get<double>(), j.value("degenerate", false));
    if (j.contains("C_v") && j.at("C_v").get<double>() != eq.C_v()) {
      throw FormatError("stored C_v does not match the rebuilt equilibrium");
    }
    return eq;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed equilibrium JSON: ") + e.what());
  }
}

EquilibriumSolution EquilibriumSolution::load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open equilibrium file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

void EquilibriumSolution::save_json(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write equilibrium file " + path);
  out << to_json() << '\n';
}

}  // namespace teamsort
