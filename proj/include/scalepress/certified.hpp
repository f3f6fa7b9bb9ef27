#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace scalepress {

enum class Method { Exact, Greedy, Oracle };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::Exact: return "exact";
    case Method::Greedy: return "greedy";
    case Method::Oracle: return "oracle";
  }
  return "?";
}

/// An optimum bracketed by [lower, upper], stored in log space so that
/// exp(s(eps) S_F phi) never overflows.
struct CertifiedValue {
  double log_lower = -std::numeric_limits<double>::infinity();
  double log_upper = -std::numeric_limits<double>::infinity();
  Method method = Method::Exact;
  /// Point (or window) indices attaining the bound, lowest index first on ties.
  std::optional<std::vector<std::size_t>> witness;
  /// Cover cells for p/q quantities.
  std::vector<std::vector<std::size_t>> cells;
  std::vector<std::string> warnings;

  static CertifiedValue exact_log(double log_value, Method m = Method::Exact) {
    CertifiedValue v;
    v.log_lower = v.log_upper = log_value;
    v.method = m;
    return v;
  }
  static CertifiedValue exact(double value, Method m = Method::Exact) { return exact_log(std::log(value), m); }

  double lower() const { return std::exp(log_lower); }
  double upper() const { return std::exp(log_upper); }
  /// The certified value; for exact results lower == upper.
  double value() const { return upper(); }
  double log_value() const { return log_upper; }
  bool is_exact() const { return method != Method::Greedy; }
  double width() const { return upper() - lower(); }

  bool invariants_hold() const {
    if (!(log_lower <= log_upper + 1e-12 * std::max(1.0, std::fabs(log_upper)))) return false;
    if (method != Method::Greedy) {
      const double u = upper();
      if (std::isfinite(u) && u - lower() > 1e-9 * std::max(1.0, std::fabs(u))) return false;
    }
    return true;
  }
};

/// log sum_i exp(x_i), stable.
inline double log_sum_exp(const std::vector<double>& xs) {
  if (xs.empty()) return -std::numeric_limits<double>::infinity();
  const double m = *std::max_element(xs.begin(), xs.end());
  if (!std::isfinite(m)) return m;
  double s = 0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

/// True when a and b agree within tol * max(1, |a|, |b|) on the linear scale,
/// compared through their logs.
inline bool values_agree(double log_a, double log_b, double tol = 1e-9) {
  if (log_a == log_b) return true;
  const double hi = std::max(log_a, log_b);
  if (!std::isfinite(hi)) return false;
  // |e^a - e^b| <= tol * max(1, e^hi)
  const double diff = std::exp(hi) * -std::expm1(std::min(log_a, log_b) - hi);
  return diff <= tol * std::max(1.0, std::exp(hi));
}

/// a <= b on the log scale up to tol * max(1, |b|).
inline bool log_le(double a, double b, double tol = 1e-9) { return a <= b + tol * std::max(1.0, std::fabs(b)); }

}  // namespace scalepress
