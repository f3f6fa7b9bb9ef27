#pragma once

// Scale functions s:(0,1) -> (0,inf) with the classes S ⊃ S* ⊃ S**, and
// grid-based diagnostics for class membership.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "scalepress/error.hpp"

namespace scalepress {

enum class ScaleKind { ConstantOne, NegLog, Power, Table };
enum class ScaleClass { S, SStar, SDoubleStar };

inline std::string to_string(ScaleKind k) {
  switch (k) {
    case ScaleKind::ConstantOne: return "constant_one";
    case ScaleKind::NegLog: return "neg_log";
    case ScaleKind::Power: return "power";
    case ScaleKind::Table: return "table";
  }
  return "?";
}

inline std::string to_string(ScaleClass c) {
  switch (c) {
    case ScaleClass::S: return "S";
    case ScaleClass::SStar: return "S*";
    case ScaleClass::SDoubleStar: return "S**";
  }
  return "?";
}

struct ClassSet {
  bool s = false, s_star = false, s_double_star = false;
  bool contains(ScaleClass c) const {
    switch (c) {
      case ScaleClass::S: return s;
      case ScaleClass::SStar: return s_star;
      case ScaleClass::SDoubleStar: return s_double_star;
    }
    return false;
  }
  bool operator==(const ClassSet&) const = default;
};

class ScaleFunction {
 public:
  static ScaleFunction constant_one() { return ScaleFunction(ScaleKind::ConstantOne, {true, true, true}); }
  static ScaleFunction neg_log() { return ScaleFunction(ScaleKind::NegLog, {true, true, true}); }
  /// eps^{-a}: non-increasing but not a scale function; kept for negative paths.
  static ScaleFunction power(double a) {
    if (!(a > 0)) throw InvalidArgument("power scale needs a > 0");
    ScaleFunction s(ScaleKind::Power, {false, false, false});
    s.exponent_ = a;
    return s;
  }
  /// Piecewise-linear in (log eps, log s); constant beyond the end points.
  static ScaleFunction table(std::vector<std::pair<double, double>> points, ClassSet declared = {}) {
    if (points.size() < 2) throw InvalidArgument("table scale needs at least two points");
    std::sort(points.begin(), points.end());
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto [e, v] = points[i];
      if (!(e > 0 && e < 1)) throw DomainError("table scale abscissa outside (0,1)");
      if (!(v > 0) || !std::isfinite(v)) throw InvalidArgument("table scale values must be positive");
      if (i && points[i - 1].first == e) throw InvalidArgument("table scale has duplicate abscissae");
    }
    ScaleFunction s(ScaleKind::Table, declared);
    s.table_ = std::move(points);
    return s;
  }

  ScaleKind kind() const { return kind_; }
  const ClassSet& declared_classes() const { return declared_; }
  double exponent() const { return exponent_; }
  const std::vector<std::pair<double, double>>& table_points() const { return table_; }
  bool is_constant_one() const { return kind_ == ScaleKind::ConstantOne; }

  double operator()(double eps) const { return eval(eps); }

  double eval(double eps) const {
    if (!(eps > 0 && eps < 1)) throw DomainError("scale function evaluated outside (0,1)");
    return eval_unchecked(eps);
  }

  /// True iff the table's values are non-increasing in eps.
  bool table_monotone() const {
    for (std::size_t i = 1; i < table_.size(); ++i)
      if (table_[i].second > table_[i - 1].second) return false;
    return true;
  }

 private:
  ScaleFunction(ScaleKind k, ClassSet declared) : kind_(k), declared_(declared) {}

  double eval_unchecked(double eps) const {
    switch (kind_) {
      case ScaleKind::ConstantOne: return 1.0;
      case ScaleKind::NegLog: return -std::log(eps);
      case ScaleKind::Power: return std::pow(eps, -exponent_);
      case ScaleKind::Table: {
        if (eps <= table_.front().first) return table_.front().second;
        if (eps >= table_.back().first) return table_.back().second;
        auto hi = std::upper_bound(table_.begin(), table_.end(), std::make_pair(eps, 0.0),
                                   [](const auto& a, const auto& b) { return a.first < b.first; });
        auto lo = hi - 1;
        const double t = (std::log(eps) - std::log(lo->first)) / (std::log(hi->first) - std::log(lo->first));
        return std::exp(std::log(lo->second) + t * (std::log(hi->second) - std::log(lo->second)));
      }
    }
    return 1.0;
  }

  ScaleKind kind_;
  ClassSet declared_;
  double exponent_ = 0;
  std::vector<std::pair<double, double>> table_;
};

/// |s(lambda eps)/s(eps) - 1| at each grid point.
inline std::vector<double> scale_property_defect(const ScaleFunction& s, double lambda,
                                                 const std::vector<double>& eps_grid) {
  if (!(lambda > 0)) throw InvalidArgument("scale_property_defect: lambda must be positive");
  std::vector<double> out;
  out.reserve(eps_grid.size());
  for (double eps : eps_grid) {
    const double scaled = lambda * eps;
    if (!(scaled > 0 && scaled < 1) || !(eps > 0 && eps < 1))
      throw DomainError("scale_property_defect: lambda*eps outside (0,1)");
    out.push_back(std::fabs(s.eval(scaled) / s.eval(eps) - 1.0));
  }
  return out;
}

/// Geometric grid from `hi` down to `lo` (inclusive), `count` points.
inline std::vector<double> geometric_grid(double hi, double lo, std::size_t count) {
  std::vector<double> out;
  if (count < 2) return {hi};
  const double r = std::pow(lo / hi, 1.0 / static_cast<double>(count - 1));
  double e = hi;
  for (std::size_t i = 0; i < count; ++i, e *= r) out.push_back(i + 1 == count ? lo : e);
  return out;
}

struct ClassReport {
  std::vector<double> defect_half;    // lambda = 1/2 at each grid point
  std::vector<double> defect_double;  // lambda = 2 where 2 eps < 1
  double trailing_defect = 0;
  bool monotone = true;
  std::vector<double> eps_log_eps_ratio;  // eps log eps / s(eps)
  ClassSet verdict;
  std::vector<std::string> mismatches;  // declared vs observed
  bool ok() const { return mismatches.empty(); }
};

inline constexpr double kScaleDefectThreshold = 0.1;
inline constexpr double kDoubleStarThreshold = 1e-4;

/// Numeric membership witness on a decreasing grid (>= 10 points, min <= 1e-6).
/// In S: trailing scale defect (lambda in {1/2, 2}) below 0.1 and
/// non-increasing over the finer half of the grid. In S*: additionally
/// non-increasing on the grid. In S**: additionally |eps log eps / s(eps)|
/// below 1e-4 at the finest point and non-increasing over the finer half.
inline ClassReport classify(const ScaleFunction& s, std::vector<double> eps_grid) {
  if (eps_grid.size() < 10) throw InvalidArgument("classify: grid needs at least 10 points");
  std::sort(eps_grid.begin(), eps_grid.end(), std::greater<>());
  if (eps_grid.back() > 1e-6) throw InvalidArgument("classify: grid must reach 1e-6");
  ClassReport rep;
  rep.defect_half = scale_property_defect(s, 0.5, eps_grid);
  for (double e : eps_grid)
    if (2 * e < 1) rep.defect_double.push_back(scale_property_defect(s, 2.0, {e}).front());
  rep.trailing_defect = std::max(rep.defect_half.back(), rep.defect_double.back());
  const std::size_t tail = eps_grid.size() / 2;
  auto tail_nonincreasing = [tail](const std::vector<double>& v) {
    for (std::size_t i = std::max<std::size_t>(tail, 1); i < v.size(); ++i)
      if (v[i] > v[i - 1] * (1 + 1e-12) + 1e-15) return false;
    return true;
  };
  const bool in_s = rep.trailing_defect < kScaleDefectThreshold && tail_nonincreasing(rep.defect_half);
  for (std::size_t i = 1; i < eps_grid.size(); ++i)
    if (s.eval(eps_grid[i]) < s.eval(eps_grid[i - 1])) rep.monotone = false;
  std::vector<double> abs_ratio;
  for (double e : eps_grid) {
    rep.eps_log_eps_ratio.push_back(e * std::log(e) / s.eval(e));
    abs_ratio.push_back(std::fabs(rep.eps_log_eps_ratio.back()));
  }
  const bool limit_ok = abs_ratio.back() < kDoubleStarThreshold && tail_nonincreasing(abs_ratio);
  rep.verdict.s = in_s;
  rep.verdict.s_star = in_s && rep.monotone;
  rep.verdict.s_double_star = rep.verdict.s_star && limit_ok;
  const auto& declared = s.declared_classes();
  for (auto c : {ScaleClass::S, ScaleClass::SStar, ScaleClass::SDoubleStar})
    if (declared.contains(c) && !rep.verdict.contains(c))
      rep.mismatches.push_back("declared " + to_string(c) + " but grid evidence disagrees");
  return rep;
}

/// Warning text when a scale cannot support reports that rely on s being
/// non-increasing (p = q arguments); empty when fine.
inline std::optional<std::string> monotonicity_warning(const ScaleFunction& s) {
  if (s.kind() == ScaleKind::Table && !s.table_monotone())
    return "table scale is not non-increasing; results relying on S* are unsupported";
  return std::nullopt;
}

}  // namespace scalepress
