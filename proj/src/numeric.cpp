#include "teamsort/numeric.hpp"

#include <algorithm>
#include <cstdio>

#include <boost/math/quadrature/gauss.hpp>

namespace teamsort::numeric {

double compensated_sum(std::span<const double> values) {
  CompensatedSum acc;
  for (double v : values) acc.add(v);
  return acc.value();
}

double gauss_legendre(const std::function<double(double)>& f, double a, double b) {
  if (a == b) return 0.0;
  return boost::math::quadrature::gauss<double, 15>::integrate(f, a, b);
}

double simpson(const std::function<double(double)>& f, double a, double b, int intervals) {
  if (a == b) return 0.0;
  int n = std::max(2, intervals);
  if (n % 2 != 0) ++n;
  const double h = (b - a) / n;
  CompensatedSum acc;
  acc.add(f(a));
  acc.add(f(b));
  for (int k = 1; k < n; ++k) acc.add((k % 2 == 1 ? 4.0 : 2.0) * f(a + k * h));
  return acc.value() * h / 3.0;
}

BisectionResult bisect(const std::function<double(double)>& f, double lo, double hi,
                       double f_tol, double x_tol, int max_iter) {
  BisectionResult out;
  double f_lo = f(lo);
  double f_hi = f(hi);
  if (std::abs(f_lo) <= f_tol) return {lo, f_lo, 0, true};
  if (std::abs(f_hi) <= f_tol) return {hi, f_hi, 0, true};
  for (int it = 1; it <= max_iter; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double f_mid = f(mid);
    out = {mid, f_mid, it, false};
    if (std::abs(f_mid) <= f_tol || (hi - lo) < x_tol) {
      out.converged = true;
      return out;
    }
    if ((f_mid < 0.0) == (f_lo < 0.0)) {
      lo = mid;
      f_lo = f_mid;
    } else {
      hi = mid;
      f_hi = f_mid;
    }
  }
  return out;
}

std::vector<double> log_spaced(double lo, double hi, int count) {
  std::vector<double> out(count);
  if (count == 1) {
    out[0] = hi;
    return out;
  }
  const double a = std::log(lo);
  const double b = std::log(hi);
  for (int k = 0; k < count; ++k) out[k] = std::exp(a + (b - a) * k / (count - 1));
  out.front() = lo;
  out.back() = hi;
  return out;
}

std::vector<double> sorted_unique(std::vector<double> values, double tol) {
  std::sort(values.begin(), values.end());
  std::vector<double> out;
  out.reserve(values.size());
  for (double v : values) {
    if (out.empty() || v - out.back() > tol) out.push_back(v);
  }
  return out;
}

std::string format_number(double value, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", digits, value);
  return buf;
}

std::string format_exact(double value) { return format_number(value, 17); }

}  // namespace teamsort::numeric
