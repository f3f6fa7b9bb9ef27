#pragma once

// Brute-force reference values for tiny instances. Deliberately shares no
// code with the optimizers: every quantity is an explicit enumeration over
// subsets (or a subset DP for covers) on its own d_F matrix.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "scalepress/error.hpp"
#include "scalepress/group.hpp"
#include "scalepress/rational.hpp"
#include "scalepress/system.hpp"

namespace scalepress::oracle {

inline constexpr std::size_t kOracleCap = 12;

using Matrix = std::vector<std::vector<double>>;

inline void check_cap(std::size_t n, const std::string& what) {
  if (n > kOracleCap)
    throw SizeLimitError("oracle refuses " + what + " with " + std::to_string(n) + " items (cap " +
                         std::to_string(kOracleCap) + ")");
}

/// d_F computed pointwise from generator maps.
inline Matrix dyn_distances(const FiniteGSystem& sys, const FinitePatch& F) {
  const std::size_t n = sys.size();
  Matrix m(n, std::vector<double>(n, 0.0));
  for (const auto& g : F) {
    const auto perm = sys.action(g);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) m[i][j] = std::max(m[i][j], sys.distance(perm[i], perm[j]));
  }
  return m;
}

/// k * sum_{g in F} phi(gx)
inline std::vector<double> log_weights(const FiniteGSystem& sys, const FinitePatch& F, const std::vector<double>& phi,
                                       double k) {
  std::vector<double> out(sys.size(), 0.0);
  for (const auto& g : F) {
    const auto perm = sys.action(g);
    for (std::size_t x = 0; x < sys.size(); ++x) out[x] += phi[perm[x]];
  }
  for (auto& v : out) v *= k;
  return out;
}

namespace detail {

inline double log_add(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

inline double subset_log_weight(std::uint32_t mask, const std::vector<double>& logw) {
  double s = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < logw.size(); ++i)
    if (mask >> i & 1u) s = log_add(s, logw[i]);
  return s;
}

}  // namespace detail

/// log of max over pairwise-separated subsets (d > eps) of the weight sum.
inline double separated(const Matrix& d, const std::vector<double>& logw, double eps) {
  const std::size_t n = d.size();
  check_cap(n, "separated-set enumeration");
  double best = -std::numeric_limits<double>::infinity();
  for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
    bool ok = true;
    for (std::size_t i = 0; i < n && ok; ++i)
      for (std::size_t j = i + 1; j < n && ok; ++j)
        if ((mask >> i & 1u) && (mask >> j & 1u) && !(d[i][j] > eps)) ok = false;
    if (ok) best = std::max(best, detail::subset_log_weight(mask, logw));
  }
  return best;
}

/// log of min over subsets J such that every point has a J-point within
/// d < eps (strict) or d <= eps (non-strict).
inline double spanning(const Matrix& d, const std::vector<double>& logw, double eps, bool strict) {
  const std::size_t n = d.size();
  check_cap(n, "spanning-set enumeration");
  double best = std::numeric_limits<double>::infinity();
  for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
    bool ok = true;
    for (std::size_t x = 0; x < n && ok; ++x) {
      bool hit = false;
      for (std::size_t y = 0; y < n && !hit; ++y)
        if ((mask >> y & 1u) && (strict ? d[x][y] < eps : d[x][y] <= eps)) hit = true;
      ok = hit;
    }
    if (ok) best = std::min(best, detail::subset_log_weight(mask, logw));
  }
  return best;
}

/// log of min over all covers by sets of diameter < eps of
/// sum_A sup_A w (sup = true) or sum_A inf_A w. Dynamic programme over the
/// uncovered set: some cell of an optimal cover contains its lowest point.
inline double cover(const Matrix& d, const std::vector<double>& logw, double eps, bool sup) {
  const std::size_t n = d.size();
  check_cap(n, "cover enumeration");
  const std::uint32_t full = (1u << n) - 1;
  const double anchor = *std::max_element(logw.begin(), logw.end());
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = std::exp(logw[i] - anchor);
  std::vector<double> diam(full + 1, 0.0), ext(full + 1, 0.0);
  std::vector<std::vector<std::uint32_t>> cells_with(n);
  for (std::uint32_t mask = 1; mask <= full; ++mask) {
    std::size_t hi = 31 - static_cast<std::size_t>(__builtin_clz(mask));
    const std::uint32_t rest = mask & ~(1u << hi);
    double dm = rest ? diam[rest] : 0.0;
    for (std::size_t j = 0; j < n; ++j)
      if (rest >> j & 1u) dm = std::max(dm, d[hi][j]);
    diam[mask] = dm;
    ext[mask] = rest ? (sup ? std::max(ext[rest], w[hi]) : std::min(ext[rest], w[hi])) : w[hi];
    if (dm < eps)
      for (std::size_t j = 0; j < n; ++j)
        if (mask >> j & 1u) cells_with[j].push_back(mask);
  }
  std::vector<double> f(full + 1, std::numeric_limits<double>::infinity());
  f[0] = 0;
  for (std::uint32_t u = 1; u <= full; ++u) {
    const auto low = static_cast<std::size_t>(__builtin_ctz(u));
    double best = std::numeric_limits<double>::infinity();
    for (auto cell : cells_with[low]) best = std::min(best, ext[cell] + f[u & ~cell]);
    f[u] = best;
  }
  return anchor + std::log(f[full]);
}

/// log of min total weight of centres whose open balls (d < eps) cover mu-mass
/// > 1 - delta (strict) or >= 1 - delta.
inline double partial_cover(const Matrix& d, const std::vector<Rational>& mu, const std::vector<double>& logw,
                            double eps, const Rational& delta, bool strict) {
  const std::size_t n = d.size();
  check_cap(n, "partial-cover enumeration");
  const Rational target = Rational(1) - delta;
  double best = std::numeric_limits<double>::infinity();
  for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
    Rational covered = 0;
    for (std::size_t y = 0; y < n; ++y) {
      bool in = false;
      for (std::size_t x = 0; x < n && !in; ++x)
        if ((mask >> x & 1u) && d[x][y] < eps) in = true;
      if (in) covered += mu[y];
    }
    if (strict ? covered > target : covered >= target) best = std::min(best, detail::subset_log_weight(mask, logw));
  }
  return best;
}

/// Every assignment of the window (elements in any fixed order) with
/// d(y_{tg}, t y_g) < eps; returned sorted lexicographically.
inline std::vector<std::vector<std::uint32_t>> pseudo_windows(const FiniteGSystem& sys,
                                                              const std::vector<Element>& gens,
                                                              const std::vector<Element>& window, double eps) {
  const std::size_t n = sys.size(), m = window.size();
  double total = 1;
  for (std::size_t k = 0; k < m; ++k) total *= static_cast<double>(n);
  if (total > 2e6) throw SizeLimitError("oracle refuses a window enumeration of " + std::to_string(total) + " assignments");
  struct Link {
    std::size_t from, to;
    Permutation map;
  };
  std::vector<Link> links;
  for (std::size_t a = 0; a < m; ++a)
    for (const auto& t : gens) {
      const Element tg = t + window[a];
      for (std::size_t b = 0; b < m; ++b)
        if (window[b] == tg) links.push_back({a, b, sys.action(t)});
    }
  std::vector<std::vector<std::uint32_t>> out;
  std::vector<std::uint32_t> y(m, 0);
  const auto count = static_cast<std::uint64_t>(total);
  for (std::uint64_t code = 0; code < count; ++code) {
    std::uint64_t c = code;
    for (std::size_t k = m; k-- > 0;) {
      y[k] = static_cast<std::uint32_t>(c % n);
      c /= n;
    }
    bool ok = true;
    for (const auto& l : links)
      if (!(sys.distance(y[l.to], l.map[y[l.from]]) < eps)) {
        ok = false;
        break;
      }
    if (ok) out.push_back(y);
  }
  return out;
}

/// max_{positions} d between window assignments, for PO quantities.
inline Matrix window_distances(const FiniteGSystem& sys, const std::vector<std::vector<std::uint32_t>>& windows,
                               const std::vector<std::size_t>& positions) {
  const std::size_t n = windows.size();
  Matrix m(n, std::vector<double>(n, 0.0));
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      for (auto p : positions) m[a][b] = std::max(m[a][b], sys.distance(windows[a][p], windows[b][p]));
  return m;
}

}  // namespace scalepress::oracle
