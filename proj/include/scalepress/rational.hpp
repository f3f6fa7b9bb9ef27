#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include <boost/rational.hpp>

#include "scalepress/error.hpp"

namespace scalepress {

using Rational = boost::rational<std::int64_t>;

inline double to_double(const Rational& r) {
  return static_cast<double>(r.numerator()) / static_cast<double>(r.denominator());
}

inline std::string to_string(const Rational& r) {
  if (r.denominator() == 1) return std::to_string(r.numerator());
  return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

/// Parses "a" or "a/b".
inline Rational parse_rational(const std::string& text) {
  const auto slash = text.find('/');
  try {
    if (slash == std::string::npos) return Rational(std::stoll(text));
    return Rational(std::stoll(text.substr(0, slash)), std::stoll(text.substr(slash + 1)));
  } catch (const std::exception&) {
    throw InvalidArgument("not a rational: '" + text + "'");
  }
}

/// Recovers the rational a decimal literal was meant to denote (0.4 -> 2/5) by
/// continued-fraction expansion, accepting the first convergent within 1e-15
/// relative of x. Falls back to the last convergent below max_den.
inline Rational rationalize(double x, std::int64_t max_den = 1'000'000) {
  if (!std::isfinite(x)) throw InvalidArgument("cannot rationalize a non-finite value");
  const bool negative = x < 0;
  double rem = std::fabs(x);
  std::int64_t h0 = 0, h1 = 1, k0 = 1, k1 = 0;
  const double target = std::fabs(x);
  for (int iter = 0; iter < 64; ++iter) {
    const double a_real = std::floor(rem);
    if (a_real > 9.0e15) break;
    const auto a = static_cast<std::int64_t>(a_real);
    const std::int64_t h2 = a * h1 + h0;
    const std::int64_t k2 = a * k1 + k0;
    if (k2 > max_den) break;
    h0 = h1; h1 = h2; k0 = k1; k1 = k2;
    const double approx = static_cast<double>(h1) / static_cast<double>(k1);
    if (std::fabs(approx - target) <= 1e-15 * std::max(1.0, target)) break;
    const double frac = rem - a_real;
    if (frac < 1e-300) break;
    rem = 1.0 / frac;
  }
  if (k1 == 0) throw InvalidArgument("cannot rationalize value");
  return Rational(negative ? -h1 : h1, k1);
}

}  // namespace scalepress
