#pragma once

// Invariant measures on finite G-systems: ergodic enumeration, partition
// entropy of joins, dynamical-ball partial covers (N_mu and P_mu), the
// Gibbs-weight extremal measure, Condition A gap statistics and the
// variational report.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>
#include <boost/integer/common_factor.hpp>
#include <boost/pending/disjoint_sets.hpp>
#include <nlohmann/json.hpp>

#include "scalepress/certified.hpp"
#include "scalepress/error.hpp"
#include "scalepress/group.hpp"
#include "scalepress/pressure.hpp"
#include "scalepress/rational.hpp"
#include "scalepress/scale.hpp"
#include "scalepress/solver.hpp"
#include "scalepress/system.hpp"

namespace scalepress {

struct InvariantMeasure {
  std::vector<Rational> weights;
  bool ergodic = false;

  std::size_t size() const { return weights.size(); }
  std::vector<std::size_t> support() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < weights.size(); ++i)
      if (weights[i].numerator() != 0) out.push_back(i);
    return out;
  }
  std::vector<double> as_double() const {
    std::vector<double> out;
    for (const auto& w : weights) out.push_back(to_double(w));
    return out;
  }
  Rational total() const { return std::accumulate(weights.begin(), weights.end(), Rational(0)); }
  Rational mass(const std::vector<std::size_t>& points) const {
    Rational m = 0;
    for (auto i : points) m += weights.at(i);
    return m;
  }
  double integral(const Potential& phi) const {
    double s = 0;
    for (std::size_t i = 0; i < weights.size(); ++i)
      if (weights[i].numerator() != 0) s += to_double(weights[i]) * phi(i);
    return s;
  }
};

/// Orbits of the group generated by the generator maps, each sorted, ordered
/// by smallest member.
inline std::vector<std::vector<std::size_t>> orbits(const FiniteGSystem& sys) {
  const std::size_t n = sys.size();
  std::vector<std::size_t> rank(n, 0), parent(n);
  boost::disjoint_sets<std::size_t*, std::size_t*> sets(rank.data(), parent.data());
  for (std::size_t i = 0; i < n; ++i) sets.make_set(i);
  for (const auto& map : sys.generator_maps())
    for (std::size_t i = 0; i < n; ++i) sets.union_set(i, static_cast<std::size_t>(map[i]));
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < n; ++i) groups[sets.find_set(i)].push_back(i);
  std::vector<std::vector<std::size_t>> out;
  for (auto& [root, members] : groups) out.push_back(std::move(members));
  std::sort(out.begin(), out.end());
  return out;
}

inline std::vector<InvariantMeasure> ergodic_measures(const FiniteGSystem& sys) {
  std::vector<InvariantMeasure> out;
  for (const auto& orbit : orbits(sys)) {
    InvariantMeasure mu;
    mu.ergodic = true;
    mu.weights.assign(sys.size(), Rational(0));
    for (auto i : orbit) mu.weights[i] = Rational(1, static_cast<std::int64_t>(orbit.size()));
    out.push_back(std::move(mu));
  }
  return out;
}

/// Exact check of mu(g^{-1}A) = mu(A) for every generator, i.e. weights
/// constant along generator maps, and total mass one.
inline bool is_invariant(const FiniteGSystem& sys, const InvariantMeasure& mu) {
  if (mu.size() != sys.size() || mu.total() != Rational(1)) return false;
  for (const auto& w : mu.weights)
    if (w < 0) return false;
  for (const auto& map : sys.generator_maps())
    for (std::size_t i = 0; i < sys.size(); ++i)
      if (mu.weights[map[i]] != mu.weights[i]) return false;
  return true;
}

/// Convex combination sum_k c_k mu_k; coefficients must sum to one.
inline InvariantMeasure mixture(const std::vector<InvariantMeasure>& parts, const std::vector<Rational>& coeffs) {
  if (parts.empty() || parts.size() != coeffs.size()) throw InvalidArgument("mixture: coefficient count mismatch");
  if (std::accumulate(coeffs.begin(), coeffs.end(), Rational(0)) != Rational(1))
    throw InvalidArgument("mixture: coefficients must sum to one");
  InvariantMeasure mu;
  mu.weights.assign(parts.front().size(), Rational(0));
  std::size_t used = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    if (coeffs[k] < 0) throw InvalidArgument("mixture: negative coefficient");
    if (coeffs[k].numerator() != 0) ++used;
    for (std::size_t i = 0; i < mu.weights.size(); ++i) mu.weights[i] += coeffs[k] * parts[k].weights[i];
  }
  mu.ergodic = used == 1 && std::all_of(parts.begin(), parts.end(), [](const auto& m) { return m.ergodic; });
  return mu;
}

inline InvariantMeasure point_mass(std::size_t n, std::size_t at) {
  InvariantMeasure mu;
  mu.weights.assign(n, Rational(0));
  mu.weights.at(at) = 1;
  return mu;
}

// -------------------------------------------------------------- partitions

class Partition {
 public:
  Partition() = default;
  Partition(std::size_t points, std::vector<std::vector<std::size_t>> cells) : cell_of_(points, points) {
    if (cells.empty()) throw InvalidArgument("partition needs at least one cell");
    for (auto& c : cells) {
      if (c.empty()) throw InvalidArgument("partition has an empty cell");
      std::sort(c.begin(), c.end());
    }
    std::sort(cells.begin(), cells.end());
    for (std::size_t k = 0; k < cells.size(); ++k)
      for (auto i : cells[k]) {
        if (i >= points) throw InvalidArgument("partition cell refers to a missing point");
        if (cell_of_[i] != points) throw InvalidArgument("partition cells overlap");
        cell_of_[i] = k;
      }
    if (std::find(cell_of_.begin(), cell_of_.end(), points) != cell_of_.end())
      throw InvalidArgument("partition cells do not cover every point");
    cells_ = std::move(cells);
  }

  static Partition singletons(std::size_t points) {
    std::vector<std::vector<std::size_t>> cells;
    for (std::size_t i = 0; i < points; ++i) cells.push_back({i});
    return Partition(points, std::move(cells));
  }
  static Partition trivial(std::size_t points) {
    std::vector<std::size_t> all(points);
    std::iota(all.begin(), all.end(), 0);
    return Partition(points, {all});
  }

  std::size_t points() const { return cell_of_.size(); }
  const std::vector<std::vector<std::size_t>>& cells() const { return cells_; }
  std::size_t cell_of(std::size_t i) const { return cell_of_.at(i); }
  std::size_t size() const { return cells_.size(); }

  double diameter(const FiniteGSystem& sys) const {
    double d = 0;
    for (const auto& c : cells_)
      for (auto i : c)
        for (auto j : c) d = std::max(d, sys.distance(i, j));
    return d;
  }

  /// True when every cell of `this` lies inside a cell of `coarser`.
  bool refines(const Partition& coarser) const {
    for (const auto& c : cells_)
      for (auto i : c)
        if (coarser.cell_of(i) != coarser.cell_of(c.front())) return false;
    return true;
  }

 private:
  std::vector<std::size_t> cell_of_;
  std::vector<std::vector<std::size_t>> cells_;
};

/// The join xi_F = V_{g in F} g^{-1} xi: x and y share a cell iff gx and gy
/// share a xi-cell for every g in F.
inline Partition join(const FiniteGSystem& sys, const Partition& xi, const FinitePatch& F) {
  const auto actions = sys.patch_actions(F);
  std::map<std::vector<std::size_t>, std::vector<std::size_t>> by_signature;
  for (std::size_t x = 0; x < sys.size(); ++x) {
    std::vector<std::size_t> sig;
    sig.reserve(actions.size());
    for (const auto& a : actions) sig.push_back(xi.cell_of(a[x]));
    by_signature[sig].push_back(x);
  }
  std::vector<std::vector<std::size_t>> cells;
  for (auto& [sig, members] : by_signature) cells.push_back(std::move(members));
  return Partition(sys.size(), std::move(cells));
}

/// -sum_A m(A) log m(A) over cells, 0 log 0 = 0.
inline double shannon_entropy(const Partition& xi, const std::vector<double>& masses) {
  double h = 0;
  for (const auto& c : xi.cells()) {
    double m = 0;
    for (auto i : c) m += masses[i];
    if (m > 0) h -= m * std::log(m);
  }
  return h;
}

/// H_mu(xi_F), un-normalised.
inline double join_entropy(const FiniteGSystem& sys, const InvariantMeasure& mu, const Partition& xi,
                           const FinitePatch& F) {
  if (mu.size() != sys.size() || xi.points() != sys.size()) throw InvalidArgument("measure/partition size mismatch");
  return shannon_entropy(join(sys, xi, F), mu.as_double());
}

/// H_mu(xi_F) / |F|.
inline double partition_entropy(const FiniteGSystem& sys, const InvariantMeasure& mu, const Partition& xi,
                                const FinitePatch& F) {
  return join_entropy(sys, mu, xi, F) / static_cast<double>(F.size());
}

// --------------------------------------------------------- partial covers

enum class MassRule {
  Exceeds,  // mu(union) > 1 - delta
  AtLeast   // mu(union) >= 1 - delta
};

/// Minimum-weight family of balls {y : d_F(x,y) < eps}, centres anywhere,
/// whose union has mu-mass beyond 1 - delta. Masses are compared exactly:
/// weights are scaled to integers over a common denominator and delta is
/// read as the rational its decimal literal denotes.
template <solver::DistanceAccessor D>
CertifiedValue partial_ball_cover(const D& dF, const InvariantMeasure& mu, double eps, double delta, MassRule rule,
                                  const std::vector<double>& logw, const solver::Options& opt = {}) {
  require_eps(eps);
  if (!(delta > 0 && delta < 1)) throw InvalidArgument("delta must lie in (0,1)");
  const std::size_t n = dF.size();
  if (mu.size() != n || logw.size() != n) throw InvalidArgument("measure/weight size mismatch");
  const auto support = mu.support();
  std::int64_t lcm = 1;
  for (auto i : support) lcm = boost::integer::lcm(lcm, mu.weights[i].denominator());
  solver::PartialCoverProblem prob;
  for (auto i : support)
    prob.mass.push_back(mu.weights[i].numerator() * (lcm / mu.weights[i].denominator()));
  const Rational d = rationalize(delta);
  // covered/lcm vs (den - num)/den
  using boost::multiprecision::int128_t;
  const int128_t rhs = int128_t(d.denominator() - d.numerator()) * lcm;
  const int128_t den = d.denominator();
  const auto min_mass = static_cast<std::int64_t>(rule == MassRule::Exceeds ? rhs / den + 1 : (rhs + den - 1) / den);
  prob.min_mass = min_mass;
  const auto sw = solver::scale_weights(logw, false);
  // One candidate per distinct support-restricted ball; keep the cheapest centre.
  std::map<std::vector<std::size_t>, std::size_t> best_centre;
  for (std::size_t x = 0; x < n; ++x) {
    std::vector<std::size_t> key;
    for (std::size_t k = 0; k < support.size(); ++k)
      if (dF(x, support[k]) < eps) key.push_back(k);
    if (key.empty()) continue;
    auto [it, inserted] = best_centre.emplace(key, x);
    if (!inserted && sw.w[x] < sw.w[it->second]) it->second = x;
  }
  std::vector<std::size_t> centres;
  for (const auto& [key, x] : best_centre) {
    solver::Bitset b(support.size());
    for (auto k : key) b.set(k);
    prob.sets.push_back(std::move(b));
    prob.cost.push_back(sw.w[x]);
    centres.push_back(x);
  }
  const bool greedy = opt.mode == solver::Mode::Greedy ||
                      (opt.mode == solver::Mode::Auto && prob.sets.size() > opt.exact_size_cap);
  if (opt.mode == solver::Mode::Exact && prob.sets.size() > opt.exact_size_cap)
    throw SizeLimitError("exact partial cover over " + std::to_string(prob.sets.size()) +
                         " candidate balls exceeds the cap; use greedy mode");
  const auto res = solver::solve_partial_cover(prob, opt, greedy);
  std::vector<std::size_t> witness;
  for (auto s : res.chosen) witness.push_back(centres[s]);
  std::sort(witness.begin(), witness.end());
  CertifiedValue v;
  v.log_upper = solver::log_of_subset(logw, witness);
  v.witness = std::move(witness);
  if (res.exact) {
    v.log_lower = v.log_upper;
  } else {
    v.method = Method::Greedy;
    v.log_lower = std::min(v.log_upper, sw.anchor + std::log(res.lower_bound));
    if (!greedy) v.warnings.push_back("branch-and-bound budget exhausted; reporting greedy bracket");
  }
  return v;
}

/// N_mu(F, eps, delta): fewest dynamical balls covering mass > 1 - delta.
template <solver::DistanceAccessor D>
CertifiedValue dyn_ball_cover_count(const D& dF, const InvariantMeasure& mu, double eps, double delta,
                                    const solver::Options& opt = {}) {
  return partial_ball_cover(dF, mu, eps, delta, MassRule::Exceeds, std::vector<double>(dF.size(), 0.0), opt);
}

/// P_{mu,delta,eps,F}(phi, s): weighted partial domination of mass >= 1 - delta.
template <solver::DistanceAccessor D>
CertifiedValue measure_pressure(const D& dF, const std::vector<double>& sums, const InvariantMeasure& mu, double eps,
                                double delta, const ScaleFunction& s, const solver::Options& opt = {}) {
  return partial_ball_cover(dF, mu, eps, delta, MassRule::AtLeast, log_weights(sums, s, eps), opt);
}

inline CertifiedValue dyn_ball_cover_count(const FiniteGSystem& sys, const InvariantMeasure& mu,
                                           const FinitePatch& F, double eps, double delta,
                                           const solver::Options& opt = {}) {
  return dyn_ball_cover_count(PatchMetric(sys, F), mu, eps, delta, opt);
}

inline CertifiedValue measure_pressure(const FiniteGSystem& sys, const InvariantMeasure& mu, const FinitePatch& F,
                                       double eps, double delta, const Potential& phi, const ScaleFunction& s,
                                       const solver::Options& opt = {}) {
  return measure_pressure(PatchMetric(sys, F), birkhoff_sums(sys, phi, F), mu, eps, delta, s, opt);
}

// -------------------------------------------------------- extremal measure

struct ExtremalMeasure {
  std::vector<std::size_t> witness;  // the maximal separated set E
  std::vector<double> sigma;         // Gibbs weights on all points, zero off E
  std::vector<double> mu_avg;        // (1/|F|) sum_g sigma o g^{-1}
  Partition xi;                      // diam(xi) < eps
  double entropy = 0;                // H_sigma(xi_F)
  double energy = 0;                 // s(eps) int S_F phi d sigma
  double log_partition = 0;          // log sum_{y in E} exp(s(eps) S_F phi(y))
  double residual = 0;               // |entropy + energy - log_partition|
};

/// A partition of diameter < eps: greedy cliques of the `d < eps` graph
/// seeded at the lowest unused index.
inline Partition small_partition(const FiniteGSystem& sys, double eps) {
  const std::size_t n = sys.size();
  std::vector<char> used(n, 0);
  std::vector<std::vector<std::size_t>> cells;
  for (std::size_t i = 0; i < n; ++i) {
    if (used[i]) continue;
    std::vector<std::size_t> cell{i};
    used[i] = 1;
    for (std::size_t j = i + 1; j < n; ++j) {
      if (used[j]) continue;
      if (std::all_of(cell.begin(), cell.end(), [&](auto k) { return sys.distance(j, k) < eps; })) {
        cell.push_back(j);
        used[j] = 1;
      }
    }
    cells.push_back(std::move(cell));
  }
  return Partition(n, std::move(cells));
}

inline ExtremalMeasure extremal_measure(const FiniteGSystem& sys, const FinitePatch& F, double eps,
                                        const Potential& phi, const ScaleFunction& s,
                                        const solver::Options& opt = {}) {
  const auto ctx = make_patch_context(sys, F, 0, phi);
  const auto sep = separated_value(*ctx.metric, ctx.sums, eps, s, opt);
  if (sep.method == Method::Greedy || !sep.witness)
    throw DomainError("extremal_measure needs an exact separated witness; the search only produced a greedy bracket");
  ExtremalMeasure out;
  out.witness = *sep.witness;
  const auto lw = log_weights(ctx.sums, s, eps);
  std::vector<double> lwE;
  for (auto y : out.witness) lwE.push_back(lw[y]);
  out.log_partition = log_sum_exp(lwE);
  out.sigma.assign(sys.size(), 0.0);
  for (auto y : out.witness) out.sigma[y] = std::exp(lw[y] - out.log_partition);
  out.mu_avg.assign(sys.size(), 0.0);
  const auto actions = sys.patch_actions(F);
  for (const auto& a : actions)
    for (auto y : out.witness) out.mu_avg[a[y]] += out.sigma[y] / static_cast<double>(F.size());
  out.xi = small_partition(sys, eps);
  out.entropy = shannon_entropy(join(sys, out.xi, F), out.sigma);
  for (auto y : out.witness) out.energy += out.sigma[y] * lw[y];
  out.residual = std::fabs(out.entropy + out.energy - out.log_partition);
  return out;
}

// ------------------------------------------------------------- Condition A

struct ConditionACell {
  std::size_t measure = 0;
  double gamma = 0;
  bool partition_found = false;
  double r = 0;            // r_{mu,gamma}, capped at the diameter
  bool capped = false;     // the sup was unbounded
  std::size_t best_partition_cells = 0;
};

struct ConditionAReport {
  std::vector<ConditionACell> cells;
  std::vector<double> gamma;
  std::vector<double> r_gamma;   // inf over ergodic measures
  std::vector<double> ratio;     // s(min(r_gamma, gamma)) / s(gamma)
  std::vector<bool> clamped;     // r_gamma exceeded gamma (or was 0) and the ratio used gamma
  bool boundary_null = true;     // mu(boundary xi) = 0 holds for every cell on a finite set
  std::vector<std::string> notes;
};

namespace detail {

/// Candidate partitions: singletons and single-linkage components at every
/// realised distance level.
inline std::vector<Partition> linkage_partitions(const FiniteGSystem& sys) {
  const std::size_t n = sys.size();
  std::vector<Partition> out{Partition::singletons(n)};
  std::vector<double> levels;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) levels.push_back(sys.distance(i, j));
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  for (double t : levels) {
    std::vector<std::size_t> rank(n, 0), parent(n);
    boost::disjoint_sets<std::size_t*, std::size_t*> sets(rank.data(), parent.data());
    for (std::size_t i = 0; i < n; ++i) sets.make_set(i);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (sys.distance(i, j) <= t) sets.union_set(i, j);
    std::map<std::size_t, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < n; ++i) groups[sets.find_set(i)].push_back(i);
    std::vector<std::vector<std::size_t>> cells;
    for (auto& [r, m] : groups) cells.push_back(std::move(m));
    out.emplace_back(n, std::move(cells));
  }
  return out;
}

/// sup{r : mu(U_r(xi)) < gamma}; U_r(xi) is the set of points within d < r
/// of another cell, so the sup is the first gap value at which the mass of
/// {gap <= value} reaches gamma. nullopt when it never does.
inline std::optional<double> boundary_radius(const FiniteGSystem& sys, const Partition& xi,
                                             const std::vector<double>& mass, double gamma) {
  std::vector<std::pair<double, double>> gaps;  // (gap, mass)
  for (std::size_t x = 0; x < sys.size(); ++x) {
    if (mass[x] <= 0) continue;
    double g = std::numeric_limits<double>::infinity();
    for (std::size_t y = 0; y < sys.size(); ++y)
      if (xi.cell_of(y) != xi.cell_of(x)) g = std::min(g, sys.distance(x, y));
    gaps.push_back({g, mass[x]});
  }
  std::sort(gaps.begin(), gaps.end());
  double cum = 0;
  for (std::size_t k = 0; k < gaps.size(); ++k) {
    if (!std::isfinite(gaps[k].first)) break;
    cum += gaps[k].second;
    if (k + 1 < gaps.size() && gaps[k + 1].first == gaps[k].first) continue;
    if (cum >= gamma - 1e-12) return gaps[k].first;
  }
  return std::nullopt;
}

}  // namespace detail

inline ConditionAReport condition_a_profile(const FiniteGSystem& sys, const std::vector<double>& gamma_grid,
                                            const ScaleFunction& s) {
  ConditionAReport rep;
  const auto measures = ergodic_measures(sys);
  const auto partitions = detail::linkage_partitions(sys);
  const double diam = sys.diameter();
  for (double gamma : gamma_grid) {
    if (!(gamma > 0 && gamma < 1)) throw DomainError("condition_a_profile: gamma must lie in (0,1)");
    rep.gamma.push_back(gamma);
    double r_gamma = std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < measures.size(); ++m) {
      const auto mass = measures[m].as_double();
      ConditionACell cell;
      cell.measure = m;
      cell.gamma = gamma;
      cell.r = -1;
      for (const auto& xi : partitions) {
        if (!(xi.diameter(sys) < gamma)) continue;
        cell.partition_found = true;
        const auto r = detail::boundary_radius(sys, xi, mass, gamma);
        const double value = r ? *r : diam;
        if (!r) cell.capped = true;
        if (value > cell.r) {
          cell.r = value;
          cell.best_partition_cells = xi.size();
        }
      }
      if (!cell.partition_found) {
        rep.notes.push_back("gamma=" + std::to_string(gamma) + " is below the minimum gap; no partition qualifies");
        cell.r = 0;
      }
      r_gamma = std::min(r_gamma, cell.r);
      rep.cells.push_back(cell);
    }
    rep.r_gamma.push_back(r_gamma);
    const bool clamp = !(r_gamma > 0 && r_gamma < gamma);
    rep.clamped.push_back(clamp);
    const double at = clamp ? gamma : r_gamma;
    rep.ratio.push_back(scale_factor(s, at) / scale_factor(s, gamma));
  }
  rep.notes.push_back("every cell of a partition of a finite set is clopen, so mu(boundary) = 0 holds vacuously");
  return rep;
}

// -------------------------------------------------------- variational report

struct MeasureCell {
  std::size_t measure = 0;
  CertifiedValue pmu;                 // P_{mu,delta,eps,F}
  std::optional<CertifiedValue> n_half;    // N_mu(F, eps, delta/2)
  std::optional<CertifiedValue> n_double;  // N_mu(F, eps, 2 delta), when 2 delta < 1
  double integral = 0;                // int phi d mu
  double tau = 0;                     // max over supp mu of |S_F phi / |F| - int phi|
  bool chain = false;                 // P_mu <= Q <= P
  std::optional<bool> upper_bound;    // log P_mu <= log N(delta/2) + s |F| (int + tau)
  std::optional<bool> lower_bound;    // log P_mu >= log N(2 delta) + s |F| (int - tau)
};

struct VariationalCell {
  std::int64_t n = 0;
  std::size_t patch_size = 0;
  double eps = 0;
  CertifiedValue Q, P;
  std::vector<MeasureCell> measures;
  bool chain_holds() const {
    return std::all_of(measures.begin(), measures.end(), [](const auto& m) { return m.chain; });
  }
};

struct VariationalReport {
  double delta = 0;
  std::vector<VariationalCell> cells;
  double SP = 0;                  // surrogate from Q
  double sp = 0;                  // limsup_eps of sup_mu (per-site P_mu limsup_n) / s(eps)
  double sup_of_limits = 0;       // sup_mu of the per-measure surrogate (other order)
  std::vector<double> per_measure;
  double gap = 0;                 // SP - sp
  std::vector<std::pair<std::int64_t, double>> gap_by_n;  // at the smallest eps
  bool chain_holds = true;
  std::vector<std::string> notes;
};

inline VariationalReport variational_report(const FiniteGSystem& sys, const FolnerSequence& folner,
                                            const std::vector<double>& eps_grid, double delta, const Potential& phi,
                                            const ScaleFunction& s, const solver::Options& opt = {}) {
  if (!(delta > 0 && delta < 1)) throw InvalidArgument("delta must lie in (0,1)");
  if (eps_grid.empty()) throw InvalidArgument("variational_report: empty eps grid");
  VariationalReport rep;
  rep.delta = delta;
  const auto measures = ergodic_measures(sys);
  std::vector<ProfileRow> q_rows;
  std::vector<std::vector<ProfileRow>> mu_rows(measures.size());
  for (std::size_t k = 0; k < folner.length(); ++k) {
    const auto ctx = make_patch_context(sys, folner.patches[k], folner.labels[k], phi);
    const auto& dF = *ctx.metric;
    const double size = static_cast<double>(ctx.patch.size());
    for (double eps : eps_grid) {
      VariationalCell cell;
      cell.n = ctx.label;
      cell.patch_size = ctx.patch.size();
      cell.eps = eps;
      cell.Q = with_cell_context(cell_name(Quantity::Q, ctx.label, eps),
                                 [&] { return spanning_value(dF, ctx.sums, eps, s, opt); });
      cell.P = with_cell_context(cell_name(Quantity::P, ctx.label, eps),
                                 [&] { return separated_value(dF, ctx.sums, eps, s, opt); });
      q_rows.push_back(make_row(ctx.label, ctx.patch.size(), eps, Quantity::Q, cell.Q, s));
      const double se = phi.is_zero() ? 0.0 : scale_factor(s, eps);
      for (std::size_t m = 0; m < measures.size(); ++m) {
        MeasureCell mc;
        mc.measure = m;
        mc.pmu = with_cell_context(cell_name(Quantity::Pmu, ctx.label, eps),
                                   [&] { return measure_pressure(dF, ctx.sums, measures[m], eps, delta, s, opt); });
        mc.n_half = dyn_ball_cover_count(dF, measures[m], eps, delta / 2, opt);
        if (2 * delta < 1) mc.n_double = dyn_ball_cover_count(dF, measures[m], eps, 2 * delta, opt);
        mc.integral = measures[m].integral(phi);
        for (auto x : measures[m].support())
          mc.tau = std::max(mc.tau, std::fabs(ctx.sums[x] / size - mc.integral));
        mc.chain = log_le(mc.pmu.log_value(), cell.Q.log_value()) && log_le(cell.Q.log_value(), cell.P.log_value());
        mc.upper_bound = log_le(mc.pmu.log_value(), mc.n_half->log_value() + se * size * (mc.integral + mc.tau));
        if (mc.n_double)
          mc.lower_bound = log_le(mc.n_double->log_value() + se * size * (mc.integral - mc.tau), mc.pmu.log_value());
        mu_rows[m].push_back(make_row(ctx.label, ctx.patch.size(), eps, Quantity::Pmu, mc.pmu, s));
        cell.measures.push_back(std::move(mc));
      }
      rep.chain_holds = rep.chain_holds && cell.chain_holds();
      rep.cells.push_back(std::move(cell));
    }
  }
  const auto sq = surrogate(q_rows, Quantity::Q, s);
  rep.SP = sq.estimate;
  // sp: limsup over eps of the sup over measures, taken per eps.
  std::vector<Surrogate> per_mu;
  for (const auto& rows : mu_rows) per_mu.push_back(surrogate(rows, Quantity::Pmu, s));
  std::vector<double> sup_scaled(sq.eps.size(), -std::numeric_limits<double>::infinity());
  for (const auto& sm : per_mu) {
    for (std::size_t e = 0; e < sm.scaled.size(); ++e) sup_scaled[e] = std::max(sup_scaled[e], sm.scaled[e]);
    rep.per_measure.push_back(sm.estimate);
  }
  const std::size_t take = std::min<std::size_t>(3, sup_scaled.size());
  rep.sp = *std::max_element(sup_scaled.begin(), sup_scaled.begin() + static_cast<long>(take));
  rep.sup_of_limits = *std::max_element(rep.per_measure.begin(), rep.per_measure.end());
  rep.gap = rep.SP - rep.sp;
  const double finest = sq.eps.front();
  for (const auto& cell : rep.cells) {
    if (cell.eps != finest) continue;
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& mc : cell.measures) best = std::max(best, mc.pmu.log_value());
    rep.gap_by_n.push_back({cell.n, (cell.Q.log_value() - best) / static_cast<double>(cell.patch_size)});
  }
  rep.notes.push_back("finite-grid surrogates; the two sup/limsup orders are exploratory data only");
  rep.notes.push_back("the finite-level mass bounds are reported, not asserted");
  return rep;
}

// ------------------------------------------------------------ serialization

inline nlohmann::json measure_to_json(const InvariantMeasure& mu) {
  nlohmann::json j;
  j["ergodic"] = mu.ergodic;
  std::vector<std::string> w;
  for (const auto& r : mu.weights) w.push_back(to_string(r));
  j["weights"] = w;
  return j;
}

inline InvariantMeasure measure_from_json(const nlohmann::json& j) {
  InvariantMeasure mu;
  try {
    mu.ergodic = j.value("ergodic", false);
    for (const auto& w : j.at("weights")) mu.weights.push_back(parse_rational(w.get<std::string>()));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed measure document: ") + e.what());
  }
  return mu;
}

}  // namespace scalepress
