#include "teamsort/dist.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <boost/math/distributions/beta.hpp>
#include <boost/math/policies/policy.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "teamsort/errors.hpp"
#include "teamsort/numeric.hpp"

namespace teamsort {

namespace {

using BetaPolicy = boost::math::policies::policy<
    boost::math::policies::overflow_error<boost::math::policies::ignore_error>>;
using BetaDist = boost::math::beta_distribution<double, BetaPolicy>;

// Antiderivative of log v, continuous at v = 0.
double xlogx_minus_x(double v) { return v > 0.0 ? v * std::log(v) - v : 0.0; }

// Integral of log(v0 + s (p - p0)) dp over [pa, pb] within one linear piece.
double linear_log_integral(double va, double vb, double pa, double pb) {
  const double dp = pb - pa;
  if (dp <= 0.0) return 0.0;
  const double dv = vb - va;
  if (va > 0.0 && dv <= 1e-6 * vb) {
    // log is nearly linear here; Gauss-Legendre avoids cancellation
    return numeric::gauss_legendre(
        [&](double p) { return std::log(va + dv * (p - pa) / dp); }, pa, pb);
  }
  return dp * (xlogx_minus_x(vb) - xlogx_minus_x(va)) / dv;
}

void require(bool cond, const std::string& msg) {
  if (!cond) throw DomainError(msg);
}

}  // namespace

TypeDistribution TypeDistribution::uniform(double a, double b) {
  require(std::isfinite(a) && std::isfinite(b) && 0.0 <= a && a < b && b <= 1.0,
          "uniform support must satisfy 0 <= a < b <= 1");
  TypeDistribution d;
  d.kind_ = DistKind::Uniform;
  d.a_ = a;
  d.b_ = b;
  d.lo_ = a;
  d.hi_ = b;
  d.knots_ = {{0.0, a}, {1.0, b}};
  d.cum_log_ = {0.0, linear_log_integral(a, b, 0.0, 1.0)};
  d.cum_level_ = {0.0, 0.5 * (a + b)};
  return d;
}

TypeDistribution TypeDistribution::beta(double alpha, double beta) {
  require(std::isfinite(alpha) && std::isfinite(beta) && alpha > 0.0 && beta > 0.0,
          "beta parameters must be positive");
  TypeDistribution d;
  d.kind_ = DistKind::Beta;
  d.a_ = alpha;
  d.b_ = beta;
  d.lo_ = 0.0;
  d.hi_ = 1.0;
  return d;
}

TypeDistribution TypeDistribution::piecewise(std::vector<Knot> knots) {
  require(knots.size() >= 2, "piecewise distribution needs at least two knots");
  require(knots.front().p == 0.0 && knots.back().p == 1.0,
          "piecewise knots must start at p = 0 and end at p = 1");
  for (std::size_t i = 0; i < knots.size(); ++i) {
    require(std::isfinite(knots[i].p) && std::isfinite(knots[i].level),
            "piecewise knots must be finite");
    require(knots[i].level >= 0.0 && knots[i].level <= 1.0, "piecewise levels must lie in [0, 1]");
    if (i > 0) {
      require(knots[i].p > knots[i - 1].p, "piecewise percentiles must be strictly increasing");
      require(knots[i].level > knots[i - 1].level,
              "piecewise levels must be strictly increasing");
    }
  }
  TypeDistribution d;
  d.kind_ = DistKind::PiecewiseLinear;
  d.knots_ = std::move(knots);
  d.lo_ = d.knots_.front().level;
  d.hi_ = d.knots_.back().level;
  d.cum_log_.assign(d.knots_.size(), 0.0);
  d.cum_level_.assign(d.knots_.size(), 0.0);
  numeric::CompensatedSum acc_log, acc_level;
  for (std::size_t i = 1; i < d.knots_.size(); ++i) {
    const Knot& k0 = d.knots_[i - 1];
    const Knot& k1 = d.knots_[i];
    acc_log.add(linear_log_integral(k0.level, k1.level, k0.p, k1.p));
    acc_level.add(0.5 * (k0.level + k1.level) * (k1.p - k0.p));
    d.cum_log_[i] = acc_log.value();
    d.cum_level_[i] = acc_level.value();
  }
  return d;
}

TypeDistribution TypeDistribution::parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<Knot> knots;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;
      if (line.rfind("p,I", 0) != 0) throw FormatError("distribution CSV must start with header p,I");
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw FormatError("malformed distribution row: " + line);
    try {
      knots.push_back({std::stod(line.substr(0, comma)), std::stod(line.substr(comma + 1))});
    } catch (const std::exception&) {
      throw FormatError("malformed distribution row: " + line);
    }
  }
  if (!header_seen) throw FormatError("empty distribution CSV");
  return piecewise(std::move(knots));
}

TypeDistribution TypeDistribution::load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open distribution file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str());
}

std::string TypeDistribution::to_csv() const {
  std::ostringstream out;
  out << "p,I\n";
  if (kind_ == DistKind::Beta) {
    for (int k = 0; k <= 2000; ++k) {
      const double p = k / 2000.0;
      out << numeric::format_exact(p) << ',' << numeric::format_exact(quantile(p)) << '\n';
    }
  } else {
    for (const Knot& k : knots_) {
      out << numeric::format_exact(k.p) << ',' << numeric::format_exact(k.level) << '\n';
    }
  }
  return out.str();
}

void TypeDistribution::save_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write distribution file " + path);
  out << to_csv();
}

std::string TypeDistribution::describe() const {
  switch (kind_) {
    case DistKind::Uniform:
      return "uniform(" + numeric::format_number(a_) + "," + numeric::format_number(b_) + ")";
    case DistKind::Beta:
      return "beta(" + numeric::format_number(a_) + "," + numeric::format_number(b_) + ")";
    case DistKind::PiecewiseLinear:
      return "piecewise(" + std::to_string(knots_.size()) + " knots)";
  }
  return "unknown";
}

std::size_t TypeDistribution::segment_of_p(double p) const {
  auto it = std::upper_bound(knots_.begin(), knots_.end(), p,
                             [](double v, const Knot& k) { return v < k.p; });
  std::size_t idx = static_cast<std::size_t>(it - knots_.begin());
  if (idx == 0) return 0;
  return std::min(idx - 1, knots_.size() - 2);
}

std::size_t TypeDistribution::segment_of_level(double x) const {
  auto it = std::upper_bound(knots_.begin(), knots_.end(), x,
                             [](double v, const Knot& k) { return v < k.level; });
  std::size_t idx = static_cast<std::size_t>(it - knots_.begin());
  if (idx == 0) return 0;
  return std::min(idx - 1, knots_.size() - 2);
}

double TypeDistribution::cdf(double x) const {
  if (!(x >= lo_ && x <= hi_)) throw DomainError("cdf argument outside support");
  if (kind_ == DistKind::Beta) {
    return boost::math::cdf(BetaDist(a_, b_), x);
  }
  const std::size_t s = segment_of_level(x);
  const Knot& k0 = knots_[s];
  const Knot& k1 = knots_[s + 1];
  const double p = k0.p + (x - k0.level) * (k1.p - k0.p) / (k1.level - k0.level);
  return std::clamp(p, 0.0, 1.0);
}

double TypeDistribution::pdf(double x) const {
  if (!(x >= lo_ && x <= hi_)) throw DomainError("pdf argument outside support");
  if (kind_ == DistKind::Beta) {
    return boost::math::pdf(BetaDist(a_, b_), x);
  }
  const std::size_t s = segment_of_level(x);
  const Knot& k0 = knots_[s];
  const Knot& k1 = knots_[s + 1];
  return (k1.p - k0.p) / (k1.level - k0.level);
}

double TypeDistribution::quantile(double p) const {
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("percentile outside [0, 1]");
  if (kind_ == DistKind::Beta) {
    if (p == 0.0) return 0.0;
    if (p == 1.0) return 1.0;
    return boost::math::quantile(BetaDist(a_, b_), p);
  }
  const std::size_t s = segment_of_p(p);
  const Knot& k0 = knots_[s];
  const Knot& k1 = knots_[s + 1];
  if (p == k1.p) return k1.level;
  return k0.level + (p - k0.p) * (k1.level - k0.level) / (k1.p - k0.p);
}

double TypeDistribution::log_quantile(double p) const {
  return std::log(std::max(quantile(p), kLevelFloor));
}

std::vector<double> TypeDistribution::kink_percentiles() const {
  std::vector<double> out;
  if (kind_ != DistKind::PiecewiseLinear) return out;
  for (std::size_t i = 1; i + 1 < knots_.size(); ++i) out.push_back(knots_[i].p);
  return out;
}

double TypeDistribution::knot_log_primitive(std::size_t seg, double p) const {
  const Knot& k0 = knots_[seg];
  return cum_log_[seg] + linear_log_integral(k0.level, quantile(p), k0.p, p);
}

double TypeDistribution::integral_log_quantile(double a, double b) const {
  if (!(a >= 0.0 && b <= 1.0 && a <= b)) throw DomainError("integration range outside [0, 1]");
  if (a == b) return 0.0;
  if (kind_ == DistKind::Beta) {
    const double xa = quantile(a);
    const double xb = quantile(b);
    if (xa == xb) return (b - a) * std::log(std::max(xa, kLevelFloor));
    BetaDist bd(a_, b_);
    boost::math::quadrature::tanh_sinh<double> ts;
    auto g = [&](double x) {
      if (x <= 0.0) return 0.0;
      const double v = std::log(x) * boost::math::pdf(bd, x);
      return std::isfinite(v) ? v : 0.0;
    };
    return ts.integrate(g, xa, xb, 1e-15);
  }
  const std::size_t sa = segment_of_p(a);
  const std::size_t sb = segment_of_p(b);
  if (sa == sb) {
    return linear_log_integral(quantile(a), quantile(b), a, b);
  }
  // whole segments from the cumulative table, partial ends in closed form
  const double head = cum_log_[sa + 1] - knot_log_primitive(sa, a);
  const double mid = cum_log_[sb] - cum_log_[sa + 1];
  const double tail = knot_log_primitive(sb, b) - cum_log_[sb];
  return head + mid + tail;
}

double TypeDistribution::integral_quantile(double a, double b) const {
  if (!(a >= 0.0 && b <= 1.0 && a <= b)) throw DomainError("integration range outside [0, 1]");
  if (a == b) return 0.0;
  if (kind_ == DistKind::Beta) {
    const double xa = quantile(a);
    const double xb = quantile(b);
    BetaDist bd(a_, b_);
    boost::math::quadrature::tanh_sinh<double> ts;
    auto g = [&](double x) {
      const double v = x * boost::math::pdf(bd, x);
      return std::isfinite(v) ? v : 0.0;
    };
    if (xa == xb) return (b - a) * xa;
    return ts.integrate(g, xa, xb, 1e-15);
  }
  auto primitive = [&](double p) {
    const std::size_t s = segment_of_p(p);
    const Knot& k0 = knots_[s];
    return cum_level_[s] + 0.5 * (k0.level + quantile(p)) * (p - k0.p);
  };
  return primitive(b) - primitive(a);
}

double eval(const TypeDistribution& dist, Functional what, double t) {
  switch (what) {
    case Functional::F:
      return dist.cdf(t);
    case Functional::f:
      return dist.pdf(t);
    case Functional::I:
      return dist.quantile(t);
  }
  throw DomainError("unknown functional");
}

LogLoss log_loss_L(const TypeDistribution& dist, double p, int n_w) {
  if (n_w < 2) throw DomainError("team size must be at least 2");
  const double top = 1.0 / (n_w + 1);
  if (!(p > 0.0 && p <= top + 1e-15)) throw DomainError("log loss defined for p in (0, 1/(n+1)]");
  const double x = dist.quantile(std::min(p, top));
  const double partner = dist.quantile(std::clamp(1.0 - n_w * p, 0.0, 1.0));
  if (x <= 0.0 || partner <= 0.0) {
    return {-std::numeric_limits<double>::infinity(), true};
  }
  return {n_w * std::log(partner) + std::log(x), false};
}

namespace {

constexpr int kShapeGrid = 2000;
constexpr double kShapeTol = 1e-9;

// Records a difference that should be >= 0 up to the tolerance.
void note(ShapeCheck& c, double diff, double where) {
  c.evaluated = true;
  const double violation = -diff - kShapeTol;
  if (violation > c.worst_violation) {
    c.worst_violation = violation;
    c.location = where;
  }
  c.ok = c.worst_violation <= 0.0;
}

ShapeCheck xfx_check(const TypeDistribution& dist, double p_from, double p_to, bool& floor_used) {
  ShapeCheck c;
  c.worst_violation = -kShapeTol;
  double prev = 0.0;
  bool have_prev = false;
  for (int k = 0; k < kShapeGrid; ++k) {
    const double p = (k + 0.5) / kShapeGrid;
    if (p < p_from || p > p_to) continue;
    const double x = dist.quantile(p);
    if (x < kLevelFloor) floor_used = true;
    const double g = x * dist.pdf(x);
    if (have_prev) note(c, g - prev, p);
    prev = g;
    have_prev = true;
  }
  return c;
}

}  // namespace

AssumptionReport check_assumptions(const TypeDistribution& dist,
                                   std::optional<std::pair<double, double>> cutoffs, int n_w) {
  AssumptionReport r;
  r.xfx = xfx_check(dist, 0.0, 1.0, r.level_floor_used);
  r.xfx_monotone = r.xfx.ok;

  if (cutoffs) {
    r.xfx_middle = xfx_check(dist, cutoffs->first, cutoffs->second, r.level_floor_used);
    r.xfx_monotone_on_middle = r.xfx_middle.ok;
  } else {
    r.xfx_middle.worst_violation = -kShapeTol;
  }

  // concavity of L via second differences on [eps_p, 1/(n+1)]
  ShapeCheck& cc = r.L_concavity;
  cc.worst_violation = -kShapeTol;
  const double top = 1.0 / (n_w + 1);
  const double eps_p = top / kShapeGrid;
  const double h = (top - eps_p) / (kShapeGrid - 1);
  std::vector<double> L(kShapeGrid);
  for (int k = 0; k < kShapeGrid; ++k) {
    const double p = eps_p + k * h;
    const LogLoss ll = log_loss_L(dist, std::min(p, top), n_w);
    if (ll.negative_infinity) {
      r.level_floor_used = true;
      L[k] = n_w * dist.log_quantile(std::clamp(1.0 - n_w * p, 0.0, 1.0)) + dist.log_quantile(p);
    } else {
      L[k] = ll.value;
    }
  }
  for (int k = 1; k + 1 < kShapeGrid; ++k) {
    const double second = L[k + 1] - 2.0 * L[k] + L[k - 1];
    note(cc, -second, eps_p + k * h);
  }
  r.L_concave_on_third = cc.ok;

  r.worst_violation = r.xfx.worst_violation;
  r.worst_location = r.xfx.location;
  for (const ShapeCheck* c : {&r.xfx_middle, &r.L_concavity}) {
    if (c->worst_violation > r.worst_violation) {
      r.worst_violation = c->worst_violation;
      r.worst_location = c->location;
    }
  }
  return r;
}

}  // namespace teamsort
