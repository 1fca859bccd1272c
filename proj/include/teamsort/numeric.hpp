#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace teamsort::numeric {

// Neumaier compensated summation. Order independent to O(eps) for the
// magnitudes seen here, which keeps parallel or reordered reductions stable.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      comp_ += (sum_ - t) + v;
    } else {
      comp_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  CompensatedSum& operator+=(double v) {
    add(v);
    return *this;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

double compensated_sum(std::span<const double> values);

// 15-point Gauss-Legendre rule on [a, b].
double gauss_legendre(const std::function<double(double)>& f, double a, double b);

// Composite Simpson rule with `intervals` (rounded up to even) subintervals.
double simpson(const std::function<double(double)>& f, double a, double b, int intervals);

struct BisectionResult {
  double root = 0.0;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Bisection on a bracket with f(lo) and f(hi) of opposite sign. Stops when
// |f| <= f_tol or the bracket is narrower than x_tol.
BisectionResult bisect(const std::function<double(double)>& f, double lo, double hi,
                       double f_tol, double x_tol = 1e-15, int max_iter = 200);

// `count` points geometrically spaced on [lo, hi], both ends included.
std::vector<double> log_spaced(double lo, double hi, int count);

// Sorted, de-duplicated copy (values closer than `tol` are merged).
std::vector<double> sorted_unique(std::vector<double> values, double tol = 0.0);

// printf-style %.{digits}g rendering used for every text artifact.
std::string format_number(double value, int digits = 12);

// Round-trip rendering (17 significant digits) for files that are reloaded.
std::string format_exact(double value);

}  // namespace teamsort::numeric
