#pragma once

// Weighted separated / spanning / cover quantities of a finite G-system at a
// fixed (eps, F), their per-site normalisations over a Folner prefix, and the
// finite-grid scale-pressure surrogates.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "scalepress/certified.hpp"
#include "scalepress/error.hpp"
#include "scalepress/group.hpp"
#include "scalepress/scale.hpp"
#include "scalepress/solver.hpp"
#include "scalepress/system.hpp"

namespace scalepress {

enum class Quantity { Q, P, p, q, sep, spa, Nmu, Pmu, POP, POQ };

inline std::string to_string(Quantity q) {
  switch (q) {
    case Quantity::Q: return "Q";
    case Quantity::P: return "P";
    case Quantity::p: return "p";
    case Quantity::q: return "q";
    case Quantity::sep: return "sep";
    case Quantity::spa: return "spa";
    case Quantity::Nmu: return "Nmu";
    case Quantity::Pmu: return "Pmu";
    case Quantity::POP: return "POP";
    case Quantity::POQ: return "POQ";
  }
  return "?";
}

inline std::optional<Quantity> parse_quantity(std::string_view name) {
  for (auto q : {Quantity::Q, Quantity::P, Quantity::p, Quantity::q, Quantity::sep, Quantity::spa, Quantity::Nmu,
                 Quantity::Pmu, Quantity::POP, Quantity::POQ})
    if (to_string(q) == name) return q;
  return std::nullopt;
}

/// s(eps), with the constant scale defined for every eps > 0 so that
/// zero-potential and s = 1 cells work beyond the unit interval.
inline double scale_factor(const ScaleFunction& s, double eps) {
  if (s.is_constant_one()) return 1.0;
  return s.eval(eps);
}

/// log w(x) = s(eps) S_{F,phi}(x); s is not evaluated when every sum vanishes.
inline std::vector<double> log_weights(const std::vector<double>& sums, const ScaleFunction& s, double eps) {
  std::vector<double> out(sums.size(), 0.0);
  if (std::all_of(sums.begin(), sums.end(), [](double v) { return v == 0.0; })) return out;
  const double k = scale_factor(s, eps);
  for (std::size_t i = 0; i < sums.size(); ++i) out[i] = k * sums[i];
  return out;
}

inline void require_eps(double eps) {
  if (!(eps > 0) || !std::isfinite(eps)) throw InvalidArgument("eps must be a positive finite number");
}

/// d_F stored densely up to `dense_limit` points and evaluated on demand above.
class PatchMetric {
 public:
  PatchMetric(const FiniteGSystem& sys, const FinitePatch& patch, std::size_t dense_limit = 2048)
      : n_(sys.size()), ultrametric_(sys.ultrametric()) {
    if (patch.dimension() != sys.dimension()) throw InvalidArgument("patch dimension does not match system");
    if (n_ <= dense_limit) dense_ = dyn_metric(sys, patch).matrix;
    else lazy_ = std::make_unique<LazyDynMetric>(sys, patch);
  }
  std::size_t size() const { return n_; }
  bool ultrametric() const { return ultrametric_; }
  bool dense() const { return !lazy_; }
  double operator()(std::size_t i, std::size_t j) const { return lazy_ ? (*lazy_)(i, j) : dense_[i * n_ + j]; }

 private:
  std::size_t n_;
  bool ultrametric_;
  std::vector<double> dense_;
  std::unique_ptr<LazyDynMetric> lazy_;
};

/// d_F and Birkhoff sums for one patch; shared by every eps and quantity.
struct PatchContext {
  std::int64_t label = 0;
  FinitePatch patch;
  std::shared_ptr<const PatchMetric> metric;
  std::vector<double> sums;
};

inline PatchContext make_patch_context(const FiniteGSystem& sys, const FinitePatch& patch, std::int64_t label,
                                       const Potential& phi) {
  if (phi.values.size() != sys.size()) throw InvalidArgument("potential size does not match system");
  PatchContext ctx;
  ctx.label = label;
  ctx.patch = patch;
  ctx.metric = std::make_shared<PatchMetric>(sys, patch);
  ctx.sums = birkhoff_sums(sys, phi, patch);
  return ctx;
}

// ----------------------------------------------------------- cell values

template <solver::DistanceAccessor D>
CertifiedValue separated_value(const D& dF, const std::vector<double>& sums, double eps, const ScaleFunction& s,
                               const solver::Options& opt = {}) {
  require_eps(eps);
  return solver::max_weight_packing(dF, eps, log_weights(sums, s, eps), opt, solver::Relation::LessEqual);
}

template <solver::DistanceAccessor D>
CertifiedValue spanning_value(const D& dF, const std::vector<double>& sums, double eps, const ScaleFunction& s,
                              const solver::Options& opt = {}) {
  require_eps(eps);
  return solver::min_weight_domination(dF, eps, log_weights(sums, s, eps), opt, solver::Relation::Less);
}

enum class CoverKind { Sup, Inf };  // p and q

template <solver::DistanceAccessor D>
CertifiedValue cover_value(const D& dF, const std::vector<double>& sums, double eps, const ScaleFunction& s,
                           CoverKind which, const solver::Options& opt = {}) {
  require_eps(eps);
  const auto lw = log_weights(sums, s, eps);
  return which == CoverKind::Sup ? solver::cover_sup_optimum(dF, eps, lw, opt)
                                 : solver::cover_inf_optimum(dF, eps, lw, opt);
}

inline CertifiedValue separated_value(const FiniteGSystem& sys, const FinitePatch& F, double eps,
                                      const Potential& phi, const ScaleFunction& s, const solver::Options& opt = {}) {
  const auto ctx = make_patch_context(sys, F, 0, phi);
  return separated_value(*ctx.metric, ctx.sums, eps, s, opt);
}

inline CertifiedValue spanning_value(const FiniteGSystem& sys, const FinitePatch& F, double eps,
                                     const Potential& phi, const ScaleFunction& s, const solver::Options& opt = {}) {
  const auto ctx = make_patch_context(sys, F, 0, phi);
  return spanning_value(*ctx.metric, ctx.sums, eps, s, opt);
}

inline CertifiedValue cover_values(const FiniteGSystem& sys, const FinitePatch& F, double eps, const Potential& phi,
                                   const ScaleFunction& s, CoverKind which, const solver::Options& opt = {}) {
  const auto ctx = make_patch_context(sys, F, 0, phi);
  return cover_value(*ctx.metric, ctx.sums, eps, s, which, opt);
}

inline CertifiedValue sep_count(const FiniteGSystem& sys, const FinitePatch& F, double eps,
                                const solver::Options& opt = {}) {
  return separated_value(sys, F, eps, Potential::zero(sys), ScaleFunction::constant_one(), opt);
}

inline CertifiedValue spa_count(const FiniteGSystem& sys, const FinitePatch& F, double eps,
                                const solver::Options& opt = {}) {
  return spanning_value(sys, F, eps, Potential::zero(sys), ScaleFunction::constant_one(), opt);
}

/// One of the six topological quantities at a prepared patch.
inline CertifiedValue topological_cell(const PatchContext& ctx, Quantity q, double eps, const ScaleFunction& s,
                                       const solver::Options& opt) {
  const std::vector<double> zeros(ctx.sums.size(), 0.0);
  const auto& dF = *ctx.metric;
  switch (q) {
    case Quantity::P: return separated_value(dF, ctx.sums, eps, s, opt);
    case Quantity::Q: return spanning_value(dF, ctx.sums, eps, s, opt);
    case Quantity::p: return cover_value(dF, ctx.sums, eps, s, CoverKind::Sup, opt);
    case Quantity::q: return cover_value(dF, ctx.sums, eps, s, CoverKind::Inf, opt);
    case Quantity::sep: return separated_value(dF, zeros, eps, s, opt);
    case Quantity::spa: return spanning_value(dF, zeros, eps, s, opt);
    default: throw InvalidArgument("quantity " + to_string(q) + " is not a topological cell quantity");
  }
}

// --------------------------------------------------------------- profiles

struct ProfileRow {
  std::int64_t n = 0;
  std::size_t patch_size = 0;
  double eps = 0;
  Quantity quantity = Quantity::Q;
  CertifiedValue value;
  double per_site = 0;  // log(value) / |F_n|, value = certified upper end
  double scaled = 0;    // per_site / s(eps); NaN when s(eps) is undefined
};

inline ProfileRow make_row(std::int64_t n, std::size_t patch_size, double eps, Quantity q, CertifiedValue v,
                           const ScaleFunction& s) {
  ProfileRow r;
  r.n = n;
  r.patch_size = patch_size;
  r.eps = eps;
  r.quantity = q;
  r.per_site = v.log_value() / static_cast<double>(patch_size);
  double se = std::numeric_limits<double>::quiet_NaN();
  if (s.is_constant_one() || (eps > 0 && eps < 1)) se = scale_factor(s, eps);
  r.scaled = r.per_site / se;
  r.value = std::move(v);
  return r;
}

struct PressureProfile {
  ScaleFunction scale = ScaleFunction::constant_one();
  std::vector<ProfileRow> rows;
  std::map<double, double> modulus;  // eps -> delta(eps) of the potential
  bool cover_candidates_complete = true;
  std::vector<std::string> warnings;

  bool has(Quantity q) const {
    return std::any_of(rows.begin(), rows.end(), [q](const auto& r) { return r.quantity == q; });
  }
  const ProfileRow* find(Quantity q, std::int64_t n, double eps) const {
    for (const auto& r : rows)
      if (r.quantity == q && r.n == n && r.eps == eps) return &r;
    return nullptr;
  }
  std::vector<std::int64_t> labels() const {
    std::vector<std::int64_t> out;
    for (const auto& r : rows) out.push_back(r.n);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }
  std::vector<double> eps_values() const {
    std::vector<double> out;
    for (const auto& r : rows) out.push_back(r.eps);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }
};

template <class E>
[[noreturn]] void rethrow_in_cell(const E& e, const std::string& where) {
  throw E(where + ": " + e.what());
}

/// Runs `fn` and re-raises library errors with the cell coordinates prefixed.
template <class Fn>
auto with_cell_context(const std::string& where, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const SizeLimitError& e) {
    rethrow_in_cell(e, where);
  } catch (const DomainError& e) {
    rethrow_in_cell(e, where);
  } catch (const InvalidArgument& e) {
    rethrow_in_cell(e, where);
  } catch (const InvalidSystem& e) {
    rethrow_in_cell(e, where);
  }
}

inline std::string cell_name(Quantity q, std::int64_t n, double eps) {
  return "cell (quantity=" + to_string(q) + ", n=" + std::to_string(n) + ", eps=" + std::to_string(eps) + ")";
}

inline PressureProfile pressure_profile(const FiniteGSystem& sys, const FolnerSequence& folner,
                                        const std::vector<double>& eps_grid, const Potential& phi,
                                        const ScaleFunction& s, const std::vector<Quantity>& quantities,
                                        const solver::Options& opt = {}) {
  if (eps_grid.empty()) throw InvalidArgument("pressure_profile: empty eps grid");
  PressureProfile prof;
  prof.scale = s;
  if (auto w = monotonicity_warning(s)) prof.warnings.push_back(*w);
  for (double eps : eps_grid) {
    require_eps(eps);
    prof.modulus[eps] = phi.modulus(sys, eps);
  }
  for (std::size_t k = 0; k < folner.length(); ++k) {
    const auto ctx = make_patch_context(sys, folner.patches[k], folner.labels[k], phi);
    for (double eps : eps_grid)
      for (auto q : quantities) {
        auto v = with_cell_context(cell_name(q, ctx.label, eps), [&] { return topological_cell(ctx, q, eps, s, opt); });
        if (v.method == Method::Greedy && (q == Quantity::p || q == Quantity::q))
          prof.cover_candidates_complete = false;
        for (const auto& w : v.warnings) prof.warnings.push_back(cell_name(q, ctx.label, eps) + ": " + w);
        prof.rows.push_back(make_row(ctx.label, ctx.patch.size(), eps, q, std::move(v), s));
      }
  }
  return prof;
}

// ------------------------------------------------------------- surrogates

/// Finite-grid stand-in for limsup_{eps->0} limsup_n (1/|F_n|) log X / s(eps).
struct Surrogate {
  Quantity quantity = Quantity::Q;
  std::vector<double> eps;              // ascending
  std::vector<double> limsup_n;         // per eps: max per-site over the trailing half of n
  std::vector<double> scaled;           // limsup_n / s(eps)
  std::vector<double> extrapolated;     // per eps: a + b/n fit through the last two n
  std::vector<std::vector<double>> successive_differences;  // per eps, along n
  double estimate = 0;                  // max of `scaled` over the three smallest eps
  double extrapolated_estimate = 0;     // same with `extrapolated` in place of limsup_n
};

inline Surrogate surrogate(const std::vector<ProfileRow>& rows, Quantity q, const ScaleFunction& s) {
  Surrogate out;
  out.quantity = q;
  std::map<double, std::vector<std::pair<std::int64_t, double>>> by_eps;
  for (const auto& r : rows)
    if (r.quantity == q) by_eps[r.eps].push_back({r.n, r.per_site});
  if (by_eps.empty()) throw InvalidArgument("profile has no rows for quantity " + to_string(q));
  for (auto& [eps, series] : by_eps) {
    std::sort(series.begin(), series.end());
    const std::size_t start = series.size() / 2;
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t i = start; i < series.size(); ++i) m = std::max(m, series[i].second);
    std::vector<double> diffs;
    for (std::size_t i = 1; i < series.size(); ++i) diffs.push_back(series[i].second - series[i - 1].second);
    double extra = series.back().second;
    if (series.size() >= 2) {
      const auto [n1, v1] = series[series.size() - 2];
      const auto [n2, v2] = series.back();
      extra = (static_cast<double>(n2) * v2 - static_cast<double>(n1) * v1) / static_cast<double>(n2 - n1);
    }
    double se = std::numeric_limits<double>::quiet_NaN();
    if (s.is_constant_one() || eps < 1) se = scale_factor(s, eps);
    out.eps.push_back(eps);
    out.limsup_n.push_back(m);
    out.scaled.push_back(m / se);
    out.extrapolated.push_back(extra / se);
    out.successive_differences.push_back(std::move(diffs));
  }
  const std::size_t take = std::min<std::size_t>(3, out.eps.size());
  out.estimate = *std::max_element(out.scaled.begin(), out.scaled.begin() + static_cast<long>(take));
  out.extrapolated_estimate =
      *std::max_element(out.extrapolated.begin(), out.extrapolated.begin() + static_cast<long>(take));
  return out;
}

struct PressureEstimate {
  double sp = 0;  // from Q
  std::map<Quantity, Surrogate> by_quantity;
  std::string note = "finite-grid estimate; not a limit";
};

inline PressureEstimate scale_pressure_estimate(const PressureProfile& profile) {
  if (!profile.has(Quantity::Q)) throw InvalidArgument("scale_pressure_estimate: profile has no Q rows");
  PressureEstimate est;
  for (auto q : {Quantity::Q, Quantity::P, Quantity::p, Quantity::q, Quantity::sep, Quantity::spa})
    if (profile.has(q)) est.by_quantity.emplace(q, surrogate(profile.rows, q, profile.scale));
  est.sp = est.by_quantity.at(Quantity::Q).estimate;
  return est;
}

/// Surrogate order Q <= P <= p <= q. Cellwise q <= p, and p <= e^{|F| delta s} q,
/// so at finite eps the last link can only hold up to the modulus delta(eps):
/// `slack` is the largest delta over the three smallest eps.
struct SurrogateOrder {
  double Q = 0, P = 0, p = 0, q = 0;
  double slack = 0;
  double tolerance = 1e-9;
  bool Q_le_P = false, P_le_p = false, p_le_q = false, p_le_q_literal = false;
  bool holds() const { return Q_le_P && P_le_p && p_le_q; }
};

inline SurrogateOrder surrogate_order(const PressureProfile& profile) {
  const auto est = scale_pressure_estimate(profile);
  for (auto q : {Quantity::P, Quantity::p, Quantity::q})
    if (!est.by_quantity.count(q)) throw InvalidArgument("surrogate_order needs Q, P, p and q rows");
  SurrogateOrder o;
  o.Q = est.by_quantity.at(Quantity::Q).estimate;
  o.P = est.by_quantity.at(Quantity::P).estimate;
  o.p = est.by_quantity.at(Quantity::p).estimate;
  o.q = est.by_quantity.at(Quantity::q).estimate;
  std::size_t taken = 0;
  for (const auto& [eps, delta] : profile.modulus) {
    if (taken++ == 3) break;
    o.slack = std::max(o.slack, delta);
  }
  auto le = [&](double a, double b, double extra) { return a <= b + extra + o.tolerance * std::max(1.0, std::fabs(b)); };
  o.Q_le_P = le(o.Q, o.P, 0);
  o.P_le_p = le(o.P, o.p, 0);
  o.p_le_q_literal = le(o.p, o.q, 0);
  o.p_le_q = le(o.p, o.q, o.slack);
  return o;
}

}  // namespace scalepress
