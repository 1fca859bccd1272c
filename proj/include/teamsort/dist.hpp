#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace teamsort {

// Floor applied before taking logs of levels that may touch zero.
inline constexpr double kLevelFloor = 1e-12;

enum class DistKind { Uniform, Beta, PiecewiseLinear };

struct Knot {
  double p = 0.0;
  double level = 0.0;
};

// A type distribution on a subset of [0, 1]. Percentile p = 0 is the best
// (lowest) type, so the inverse CDF I is increasing. Immutable once built.
class TypeDistribution {
 public:
  static TypeDistribution uniform(double a = 0.0, double b = 1.0);
  static TypeDistribution beta(double alpha, double beta);
  // Knots must start at p = 0, end at p = 1, with strictly increasing p and
  // strictly increasing levels inside [0, 1].
  static TypeDistribution piecewise(std::vector<Knot> knots);

  static TypeDistribution load_csv(const std::string& path);
  static TypeDistribution parse_csv(const std::string& text);
  void save_csv(const std::string& path) const;
  std::string to_csv() const;

  DistKind kind() const { return kind_; }
  double lo() const { return lo_; }
  double hi() const { return hi_; }
  // (a, b) for uniform, (alpha, beta) for beta.
  std::pair<double, double> params() const { return {a_, b_}; }
  const std::vector<Knot>& knots() const { return knots_; }
  std::string describe() const;

  double cdf(double x) const;
  double pdf(double x) const;
  double quantile(double p) const;

  // log I(p) with the level floored at kLevelFloor.
  double log_quantile(double p) const;
  // Percentiles in [0, 1] where I has a kink (piecewise kind only).
  std::vector<double> kink_percentiles() const;

  // Exact or high-accuracy integral of log I over [a, b] in percentile space.
  double integral_log_quantile(double a, double b) const;
  // Integral of I over [a, b] in percentile space.
  double integral_quantile(double a, double b) const;
  double mean() const { return integral_quantile(0.0, 1.0); }

 private:
  TypeDistribution() = default;
  std::size_t segment_of_p(double p) const;
  std::size_t segment_of_level(double x) const;
  double knot_log_primitive(std::size_t seg, double p) const;

  DistKind kind_ = DistKind::Uniform;
  double a_ = 0.0;
  double b_ = 1.0;
  double lo_ = 0.0;
  double hi_ = 1.0;
  std::vector<Knot> knots_;
  // cumulative integrals of log I and I at each knot (piecewise kind)
  std::vector<double> cum_log_;
  std::vector<double> cum_level_;
};

enum class Functional { F, f, I };
double eval(const TypeDistribution& dist, Functional what, double t);

struct LogLoss {
  double value = 0.0;
  bool negative_infinity = false;
};

// L(p) = n log I(1 - n p) + log I(p); n = 2 gives the two-worker loss.
LogLoss log_loss_L(const TypeDistribution& dist, double p, int n_w = 2);

struct ShapeCheck {
  bool ok = true;
  bool evaluated = false;
  double worst_violation = 0.0;  // <= 0 iff ok
  double location = 0.0;         // percentile of the worst difference
};

struct AssumptionReport {
  bool xfx_monotone = true;
  bool xfx_monotone_on_middle = true;
  bool L_concave_on_third = true;
  ShapeCheck xfx;
  ShapeCheck xfx_middle;
  ShapeCheck L_concavity;
  double worst_violation = 0.0;
  double worst_location = 0.0;
  bool level_floor_used = false;
};

AssumptionReport check_assumptions(const TypeDistribution& dist,
                                   std::optional<std::pair<double, double>> cutoffs = {},
                                   int n_w = 2);

}  // namespace teamsort
