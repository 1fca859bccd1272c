#include "teamsort/inference.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

// Boost 1.74's pchip calls isnan unqualified.
namespace boost::math::interpolators {
using std::isnan;
}
#include <boost/math/interpolators/pchip.hpp>

#include "json.hpp"
#include "teamsort/errors.hpp"
#include "teamsort/numeric.hpp"

namespace teamsort {

namespace {

constexpr double kThird = 1.0 / 3.0;

void validate(const EarningsProfile& prof) {
  const std::size_t n = prof.p.size();
  if (n != prof.e.size()) throw FormatError("profile columns differ in length");
  if (n < 10) throw DomainError("earnings profile needs at least 10 points");
  if (prof.p.front() != 0.0 || prof.p.back() != 1.0) {
    throw DomainError("earnings profile must span percentiles 0 to 1");
  }
  for (std::size_t k = 0; k < n; ++k) {
    if (!std::isfinite(prof.p[k]) || !std::isfinite(prof.e[k])) {
      throw DomainError("non-finite value in earnings profile");
    }
    if (k > 0 && !(prof.p[k] > prof.p[k - 1])) {
      throw DomainError("profile percentiles must be strictly increasing");
    }
  }
}

// Shape-preserving interpolant of e with its running integral.
class Earnings {
 public:
  explicit Earnings(const EarningsProfile& prof)
      : knots_(prof.p),
        spline_(std::vector<double>(prof.p), std::vector<double>(prof.e),
                end_slope(prof.p[0], prof.p[1], prof.p[2], prof.e[0], prof.e[1], prof.e[2]),
                // I(0) = 0 forces m(I(1)) = 0, so the curve is flat at p = 1
                0.0),
        e0_(prof.e.front()),
        e1_(prof.e.back()) {
    cum_.assign(knots_.size(), 0.0);
    numeric::CompensatedSum acc;
    for (std::size_t k = 1; k < knots_.size(); ++k) {
      acc += piece(knots_[k - 1], knots_[k]);
      cum_[k] = acc.value();
    }
  }

  double operator()(double p) const { return spline_(std::clamp(p, 0.0, 1.0)); }
  double prime(double p) const { return spline_.prime(std::clamp(p, 0.0, 1.0)); }
  double e0() const { return e0_; }
  double e1() const { return e1_; }

  // (e(0) - e(t)) - 2 (e(1 - 2t) - e(1)), which equals I(t) I(1-2t)^2 on the
  // lower branch when I(0) = 0.
  double omega(double t) const { return (e0_ - (*this)(t)) - 2.0 * ((*this)(1.0 - 2.0 * t) - e1_); }

  double integral(double a, double b) const { return primitive(b) - primitive(a); }

 private:
  // Three-point one-sided slope at x0 with the usual shape-preserving limits;
  // boost's default falls back to the plain secant.
  static double end_slope(double x0, double x1, double x2, double y0, double y1, double y2) {
    const double h1 = x1 - x0, h2 = x2 - x1;
    const double d1 = (y1 - y0) / h1, d2 = (y2 - y1) / h2;
    const double d = ((2.0 * h1 + h2) * d1 - h1 * d2) / (h1 + h2);
    if ((d < 0.0) != (d1 < 0.0) || d1 == 0.0) return 0.0;
    if ((d1 < 0.0) != (d2 < 0.0) && std::abs(d) > 3.0 * std::abs(d1)) return 3.0 * d1;
    return d;
  }

  double piece(double a, double b) const {
    return numeric::gauss_legendre([this](double p) { return spline_(p); }, a, b);
  }
  double primitive(double p) const {
    const auto it = std::upper_bound(knots_.begin(), knots_.end(), p);
    const std::size_t k = it == knots_.begin() ? 0 : static_cast<std::size_t>(it - knots_.begin()) - 1;
    if (k + 1 >= knots_.size()) return cum_.back();
    return cum_[k] + piece(knots_[k], p);
  }

  std::vector<double> knots_;
  boost::math::interpolators::pchip<std::vector<double>> spline_;
  double e0_, e1_;
  std::vector<double> cum_;
};

// Lower-branch quantities as functions of the percentile t in [0, 1/3).
struct BranchTable {
  std::function<double(double)> log_level;  // log I(t)
  std::function<double(double)> log_top;    // log I(1 - 2t)
  std::function<double(double)> C_at;       // I(t) I(1 - 2t)^2
  double valid_to = kThird;                 // tables are meaningful below this
};

double middle_log_integral(const Earnings& e, const BranchTable& tab, double pl) {
  const double ph = 1.0 - 2.0 * pl;
  const double C = tab.C_at(pl);
  const double base = tab.log_level(pl);
  return (ph - pl) * base - (e.integral(pl, ph) - (ph - pl) * e(pl)) / C;
}

double residual_at(const Earnings& e, const BranchTable& tab, double pl) {
  if (!(pl < tab.valid_to)) return NAN;
  const double C = tab.C_at(pl);
  if (!(C > 0.0) || !std::isfinite(C)) return NAN;
  return std::log(C) - middle_log_integral(e, tab, pl) / (kThird - pl);
}

struct CutoffSearch {
  double p_low = 0.0;
  double residual = 0.0;
  std::vector<std::pair<double, double>> curve;
};

CutoffSearch find_cutoff(const Earnings& e, const BranchTable& tab, const InferenceOptions& opts) {
  CutoffSearch out;
  auto R = [&](double pl) { return residual_at(e, tab, pl); };
  const int N = opts.candidates;
  for (int k = 0; k < N; ++k) {
    const double pl = opts.candidate_lo + (kThird - opts.candidate_lo) * k / N;
    out.curve.emplace_back(pl, R(pl));
  }
  for (std::size_t k = 1; k < out.curve.size(); ++k) {
    const auto [a, ra] = out.curve[k - 1];
    const auto [b, rb] = out.curve[k];
    if (!std::isfinite(ra) || !std::isfinite(rb)) continue;
    if ((ra < 0.0) != (rb < 0.0) || ra == 0.0) {
      const auto root = numeric::bisect(R, a, b, 1e-13, 1e-15);
      out.p_low = root.root;
      out.residual = root.value;
      return out;
    }
  }
  throw InferenceError("cutoff residual has no sign change on the candidate grid");
}

TypeDistribution assemble(const Earnings& e, const BranchTable& tab, double pl, int knots,
                          double bottom_level) {
  const double ph = 1.0 - 2.0 * pl;
  const double C = tab.C_at(pl);
  const double base = tab.log_level(pl);
  auto log_level = [&](double p) {
    if (p < pl) return tab.log_level(p);
    if (p <= ph) return base - (e(p) - e(pl)) / C;
    return tab.log_top((1.0 - p) / 2.0);
  };
  std::vector<double> ps;
  for (int k = 0; k < knots; ++k) ps.push_back(static_cast<double>(k) / (knots - 1));
  ps.push_back(pl);
  ps.push_back(ph);
  ps = numeric::sorted_unique(std::move(ps), 1e-12);
  std::vector<Knot> out;
  out.reserve(ps.size());
  for (double p : ps) {
    double level;
    if (p == 0.0) {
      level = bottom_level;
    } else if (p == 1.0) {
      level = 1.0;
    } else {
      level = std::exp(log_level(p));
    }
    if (!std::isfinite(level)) {
      throw InferenceError("recovered level is not finite at p = " + numeric::format_number(p));
    }
    if (!out.empty() && !(level > out.back().level)) {
      throw InferenceError("recovered quantile function is not increasing at p = " +
                           numeric::format_number(p));
    }
    out.push_back({p, std::min(level, 1.0)});
  }
  return TypeDistribution::piecewise(std::move(out));
}

std::vector<double> interp_grid(int cells, double lo, double hi) {
  std::vector<double> t(cells + 1);
  for (int k = 0; k <= cells; ++k) t[k] = lo + (hi - lo) * k / cells;
  t.back() = hi;
  return t;
}

double lerp_table(const std::vector<double>& t, const std::vector<double>& v, double x) {
  if (x <= t.front()) return v.front();
  if (x >= t.back()) return v.back();
  const double h = t[1] - t[0];
  std::size_t k = static_cast<std::size_t>((x - t.front()) / h);
  k = std::min(k, t.size() - 2);
  const double s = (x - t[k]) / (t[k + 1] - t[k]);
  return v[k] + s * (v[k + 1] - v[k]);
}

}  // namespace

EarningsProfile EarningsProfile::parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  EarningsProfile prof;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;
      if (line.rfind("p,earnings", 0) != 0) throw FormatError("earnings CSV must start with header p,earnings");
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw FormatError("malformed earnings row: " + line);
    try {
      prof.p.push_back(std::stod(line.substr(0, comma)));
      prof.e.push_back(std::stod(line.substr(comma + 1)));
    } catch (const std::exception&) {
      throw FormatError("malformed earnings row: " + line);
    }
  }
  if (!header_seen) throw FormatError("empty earnings CSV");
  return prof;
}

EarningsProfile EarningsProfile::load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open earnings file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str());
}

std::string EarningsProfile::to_csv() const {
  std::ostringstream out;
  out << "p,earnings\n";
  for (std::size_t k = 0; k < p.size(); ++k) {
    out << numeric::format_exact(p[k]) << ',' << numeric::format_exact(e[k]) << '\n';
  }
  return out.str();
}

EarningsProfile EarningsProfile::from_equilibrium(const EquilibriumSolution& eq, int points) {
  if (points < 10) throw DomainError("need at least 10 profile points");
  EarningsProfile prof;
  for (int k = 0; k < points; ++k) {
    const double p = (k + 1 == points) ? 1.0 : static_cast<double>(k) / (points - 1);
    prof.p.push_back(p);
    prof.e.push_back(eq.wage(eq.dist().quantile(p)));
  }
  return prof;
}

EarningsShapeReport check_earnings_shape(const EarningsProfile& profile, double tol) {
  EarningsShapeReport rep;
  const auto& p = profile.p;
  const auto& e = profile.e;
  rep.points = p.size();
  if (p.size() != e.size() || p.size() < 10) {
    rep.monotone = rep.convex = false;
    return rep;
  }
  rep.worst_increase = -INFINITY;
  for (std::size_t k = 1; k < p.size(); ++k) rep.worst_increase = std::max(rep.worst_increase, e[k] - e[k - 1]);
  // strict decrease is required: a flat profile carries no type information
  rep.monotone = rep.worst_increase < 0.0;
  const double scale = std::max(1.0, std::abs(e.front()) + std::abs(e.back()));
  for (std::size_t k = 1; k + 1 < p.size(); ++k) {
    const double left = (e[k] - e[k - 1]) / (p[k] - p[k - 1]);
    const double right = (e[k + 1] - e[k]) / (p[k + 1] - p[k]);
    const double dd = right - left;
    if (dd < rep.worst_convexity) {
      rep.worst_convexity = dd;
      rep.convexity_location = p[k];
    }
  }
  rep.convex = rep.worst_convexity >= -tol * scale;
  return rep;
}

std::string InferenceResult::to_json() const {
  nlohmann::json j;
  j["C_w"] = C_w;
  j["p_low"] = p_low;
  j["p_high"] = 1.0 - 2.0 * p_low;
  j["C"] = C;
  j["residual"] = residual;
  j["omitted_mass"] = omitted_mass;
  nlohmann::json curve = nlohmann::json::array();
  for (const auto& [p, r] : residual_curve) {
    curve.push_back({p, std::isfinite(r) ? nlohmann::json(r) : nlohmann::json(nullptr)});
  }
  j["residual_curve"] = curve;
  return j.dump(2);
}

InferenceResult infer_distribution(const EarningsProfile& profile, const InferenceOptions& opts) {
  validate(profile);
  const auto shape = check_earnings_shape(profile);
  if (!shape.monotone) throw InferenceError("earnings profile is not strictly decreasing");
  const Earnings e(profile);

  // B(t) = log I(1 - 2t) = 2 * integral over [0, t] of e'(1 - 2s) / omega(s)
  auto g = [&](double s) { return e.prime(1.0 - 2.0 * s) / e.omega(s); };
  const double o = opts.origin;
  const double g1 = g(o), g2 = g(2.0 * o);
  if (!std::isfinite(g1) || !std::isfinite(g2)) {
    throw InferenceError("singular weight omega near p = " + numeric::format_number(o));
  }
  const double g0 = 2.0 * g1 - g2;  // linear extrapolation to the origin
  InferenceResult res;
  res.omitted_mass = 2.0 * o * std::abs(g1 - g0);

  const auto t = interp_grid(opts.cells, o, kThird);
  std::vector<double> B(t.size());
  B[0] = 2.0 * o * 0.5 * (g0 + g1);
  double valid_to = kThird;
  for (std::size_t k = 1; k < t.size(); ++k) {
    if (!(e.omega(t[k]) > 0.0)) {
      valid_to = t[k - 1];
      B.resize(k);
      break;
    }
    B[k] = B[k - 1] + 2.0 * numeric::gauss_legendre(g, t[k - 1], t[k]);
  }
  auto Bat = [&, t, B](double x) {
    if (x <= o) return x * g0 * 2.0 + x * x * (g1 - g0) / o;
    const std::size_t k = std::min(B.size() - 1, static_cast<std::size_t>((x - o) / (t[1] - t[0])));
    return B[k] + 2.0 * numeric::gauss_legendre(g, t[k], x);
  };
  BranchTable tab;
  tab.valid_to = valid_to;
  tab.log_top = Bat;
  tab.C_at = [&](double x) { return e.omega(x); };
  tab.log_level = [&](double x) { return std::log(e.omega(x)) - 2.0 * Bat(x); };

  auto cut = find_cutoff(e, tab, opts);
  if (cut.p_low < o) throw InferenceError("recovered cutoff falls inside the regularized origin");
  res.p_low = cut.p_low;
  res.residual = cut.residual;
  res.residual_curve = std::move(cut.curve);
  res.C = e.omega(res.p_low);
  res.C_w = profile.e.front();
  res.dist = assemble(e, tab, res.p_low, opts.knots, 0.0);
  return res;
}

OdeResult infer_distribution_ode(const EarningsProfile& profile, double epsilon, int steps,
                                 const InferenceOptions& opts) {
  if (!(epsilon > 0.0 && epsilon <= 1e-3)) throw DomainError("epsilon must lie in (0, 1e-3]");
  if (steps < 100) throw DomainError("need at least 100 integration steps");
  validate(profile);
  if (!check_earnings_shape(profile).monotone) {
    throw InferenceError("earnings profile is not strictly decreasing");
  }
  const Earnings e(profile);

  // state (I, l = log u) with u(t) = I(1 - 2t)^2
  auto rhs = [&](double s, double I, double l) {
    const double eu = std::exp(-l);
    return std::pair<double, double>{-e.prime(s) * eu, 4.0 * e.prime(1.0 - 2.0 * s) * eu / I};
  };
  const double h = kThird / steps;
  std::vector<double> t{0.0}, Is{epsilon}, Ls{0.0};
  double I = epsilon, l = 0.0;
  for (int k = 0; k < steps - 1; ++k) {
    const double s = k * h;
    const auto [a1, b1] = rhs(s, I, l);
    const auto [a2, b2] = rhs(s + h / 2, I + h / 2 * a1, l + h / 2 * b1);
    const auto [a3, b3] = rhs(s + h / 2, I + h / 2 * a2, l + h / 2 * b2);
    const auto [a4, b4] = rhs(s + h, I + h * a3, l + h * b3);
    const double In = I + h / 6 * (a1 + 2 * a2 + 2 * a3 + a4);
    const double ln = l + h / 6 * (b1 + 2 * b2 + 2 * b3 + b4);
    if (!(In > 0.0) || !std::isfinite(In) || !std::isfinite(ln)) break;
    I = In;
    l = ln;
    t.push_back(s + h);
    Is.push_back(I);
    Ls.push_back(l);
  }
  if (t.size() < 3) throw IntegrationError("fixed-step integration rejected at the first step");

  BranchTable tab;
  tab.valid_to = t.back();
  tab.log_level = [&](double x) { return std::log(lerp_table(t, Is, x)); };
  tab.log_top = [&](double x) { return 0.5 * lerp_table(t, Ls, x); };
  tab.C_at = [&](double x) { return lerp_table(t, Is, x) * std::exp(lerp_table(t, Ls, x)); };

  const auto cut = find_cutoff(e, tab, opts);
  if (cut.p_low > t.back()) {
    throw IntegrationError("integration stopped before the cutoff at t = " + numeric::format_number(t.back()));
  }
  OdeResult res;
  res.p_low = cut.p_low;
  res.epsilon = epsilon;
  res.steps = static_cast<int>(t.size()) - 1;
  res.u_at_zero = std::exp(Ls.front());
  res.dist = assemble(e, tab, res.p_low, opts.knots, epsilon);

  const auto quad = infer_distribution(profile, opts);
  for (int k = 0; k <= 960; ++k) {
    const double p = 0.02 + 0.96 * k / 960.0;
    res.sup_deviation = std::max(res.sup_deviation, std::abs(res.dist.quantile(p) - quad.dist.quantile(p)));
  }
  return res;
}

}  // namespace teamsort
