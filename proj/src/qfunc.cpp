#include "tinbc/qfunc.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace tinbc {

double qfunc(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

// Safeguarded Newton iteration on log Q(x) - log p inside a shrinking bracket.
// Working in the log domain keeps the relative error of Q(x) small deep in
// the tail where Q itself underflows towards denormals.
double qfunc_inv(double p) {
  if (!(p > 0.0 && p <= 0.5)) throw std::domain_error("qfunc_inv: p must lie in (0, 0.5]");
  if (p == 0.5) return 0.0;

  const double log_p = std::log(p);
  double lo = 0.0;
  double hi = 40.0;
  double x = std::sqrt(-2.0 * log_p);
  x = std::clamp(x - std::log(x * std::sqrt(2.0 * std::numbers::pi)) / x, 0.5, 39.0);

  for (int iter = 0; iter < 200; ++iter) {
    const double q = qfunc(x);
    const double g = std::log(q) - log_p;
    if (g > 0.0) {
      lo = x;
    } else {
      hi = x;
    }
    if (g == 0.0) return x;
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    double next = x + g * q / pdf;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= 1e-15 * std::max(1.0, x)) return next;
    x = next;
  }
  return x;
}

}  // namespace tinbc
