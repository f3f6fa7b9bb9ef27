#pragma once

// Reference computations written directly from the definitions, for small
// systems only. Nothing here calls into the optimizers or the library's
// oracle namespace; the action is composed from raw generator maps.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <vector>

#include "scalepress/group.hpp"
#include "scalepress/rational.hpp"
#include "scalepress/system.hpp"

namespace sptest {

using Mat = std::vector<std::vector<double>>;
using scalepress::Element;
using scalepress::FiniteGSystem;
using scalepress::FinitePatch;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// g.x by repeated application of generator maps (inverses for negative coordinates).
inline std::size_t act(const FiniteGSystem& sys, const Element& g, std::size_t x) {
  for (int a = 0; a < g.dimension(); ++a) {
    const auto& fwd = sys.generator_maps()[static_cast<std::size_t>(a)];
    for (std::int64_t k = 0; k < g.coords[static_cast<std::size_t>(a)]; ++k) x = fwd[x];
    for (std::int64_t k = 0; k < -g.coords[static_cast<std::size_t>(a)]; ++k)
      x = static_cast<std::size_t>(std::find(fwd.begin(), fwd.end(), x) - fwd.begin());
  }
  return x;
}

inline Mat dF(const FiniteGSystem& sys, const FinitePatch& F) {
  const std::size_t n = sys.size();
  Mat m(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (const auto& g : F) m[i][j] = std::max(m[i][j], sys.distance(act(sys, g, i), act(sys, g, j)));
  return m;
}

inline std::vector<double> sums(const FiniteGSystem& sys, const std::vector<double>& phi, const FinitePatch& F) {
  std::vector<double> s(sys.size(), 0.0);
  for (std::size_t x = 0; x < sys.size(); ++x)
    for (const auto& g : F) s[x] += phi[act(sys, g, x)];
  return s;
}

/// exp(k * S(x))
inline std::vector<double> weights(const std::vector<double>& S, double k) {
  std::vector<double> w;
  for (double v : S) w.push_back(std::exp(k * v));
  return w;
}

inline bool in(std::uint32_t mask, std::size_t i) { return (mask >> i) & 1u; }

inline double subset_sum(std::uint32_t mask, const std::vector<double>& w) {
  double s = 0;
  for (std::size_t i = 0; i < w.size(); ++i)
    if (in(mask, i)) s += w[i];
  return s;
}

/// max sum over sets with pairwise d > eps (d strictly above)
inline double sep(const Mat& d, const std::vector<double>& w, double eps) {
  const std::size_t n = d.size();
  double best = 0;
  for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
    bool ok = true;
    for (std::size_t i = 0; i < n && ok; ++i)
      for (std::size_t j = 0; j < i && ok; ++j)
        if (in(mask, i) && in(mask, j) && d[i][j] <= eps) ok = false;
    if (ok) best = std::max(best, subset_sum(mask, w));
  }
  return best;
}

/// min sum over sets J with every x within d < eps (or <= eps) of J
inline double spa(const Mat& d, const std::vector<double>& w, double eps, bool strict = true) {
  const std::size_t n = d.size();
  double best = kInf;
  for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
    bool ok = true;
    for (std::size_t x = 0; x < n && ok; ++x) {
      bool hit = false;
      for (std::size_t y = 0; y < n; ++y)
        if (in(mask, y) && (strict ? d[x][y] < eps : d[x][y] <= eps)) hit = true;
      ok = hit;
    }
    if (ok) best = std::min(best, subset_sum(mask, w));
  }
  return best;
}

/// min over covers by subsets of d-diameter < eps of the sum of per-cell
/// sup (or inf) of w; recursion on the lowest uncovered point.
inline double cover(const Mat& d, const std::vector<double>& w, double eps, bool sup) {
  const std::size_t n = d.size();
  const std::uint32_t full = (1u << n) - 1;
  std::vector<std::uint32_t> cells;
  std::vector<double> ext;
  for (std::uint32_t c = 1; c <= full; ++c) {
    bool small = true;
    double e = sup ? 0 : kInf;
    for (std::size_t i = 0; i < n; ++i) {
      if (!in(c, i)) continue;
      e = sup ? std::max(e, w[i]) : std::min(e, w[i]);
      for (std::size_t j = 0; j < i; ++j)
        if (in(c, j) && !(d[i][j] < eps)) small = false;
    }
    if (small) {
      cells.push_back(c);
      ext.push_back(e);
    }
  }
  std::map<std::uint32_t, double> memo;
  std::function<double(std::uint32_t)> f = [&](std::uint32_t left) -> double {
    if (left == 0) return 0.0;
    if (auto it = memo.find(left); it != memo.end()) return it->second;
    std::size_t low = 0;
    while (!in(left, low)) ++low;
    double best = kInf;
    for (std::size_t k = 0; k < cells.size(); ++k)
      if (in(cells[k], low)) best = std::min(best, ext[k] + f(left & ~cells[k]));
    return memo[left] = best;
  };
  return f(full);
}

/// min sum of centre weights whose open balls (d < eps) carry mass > 1 - delta
/// (strict) or >= 1 - delta.
inline double partial(const Mat& d, const std::vector<scalepress::Rational>& mu, const std::vector<double>& w,
                      double eps, scalepress::Rational delta, bool strict) {
  const std::size_t n = d.size();
  const scalepress::Rational need = scalepress::Rational(1) - delta;
  double best = kInf;
  for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
    scalepress::Rational m(0);
    for (std::size_t y = 0; y < n; ++y) {
      bool covered = false;
      for (std::size_t x = 0; x < n; ++x)
        if (in(mask, x) && d[x][y] < eps) covered = true;
      if (covered) m += mu[y];
    }
    if (strict ? m > need : m >= need) best = std::min(best, subset_sum(mask, w));
  }
  return best;
}

/// Every assignment of `window` with d(y_{tg}, t y_g) < eps for t in gens.
inline std::vector<std::map<Element, std::size_t>> pseudo_orbits(const FiniteGSystem& sys,
                                                                 const std::vector<Element>& gens,
                                                                 const std::vector<Element>& window, double eps) {
  const std::size_t n = sys.size(), m = window.size();
  std::vector<std::map<Element, std::size_t>> out;
  std::vector<std::size_t> y(m, 0);
  while (true) {
    std::map<Element, std::size_t> a;
    for (std::size_t k = 0; k < m; ++k) a[window[k]] = y[k];
    bool ok = true;
    for (const auto& [g, yg] : a)
      for (const auto& t : gens)
        if (auto it = a.find(t + g); it != a.end() && !(sys.distance(it->second, act(sys, t, yg)) < eps)) ok = false;
    if (ok) out.push_back(a);
    std::size_t k = 0;
    while (k < m && ++y[k] == n) y[k++] = 0;
    if (k == m) break;
  }
  return out;
}

inline std::vector<double> random_potential(std::size_t n, std::mt19937_64& rng, bool nonnegative = false) {
  std::uniform_real_distribution<double> u(nonnegative ? 0.0 : -1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

/// Distinct off-diagonal distances of a matrix, ascending.
inline std::vector<double> distance_levels(const Mat& d) {
  std::vector<double> out;
  for (std::size_t i = 0; i < d.size(); ++i)
    for (std::size_t j = 0; j < i; ++j) out.push_back(d[i][j]);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

inline bool close(double a, double b, double tol = 1e-9) { return std::fabs(a - b) <= tol * std::max(1.0, std::fabs(b)); }

}  // namespace sptest
