#pragma once

// Exact and heuristic optimizers over threshold graphs of a finite distance:
// weighted packings (separated sets), weighted dominating sets (spanning
// sets), cover optima with sup/inf cell costs, and weighted partial covers.
// Every routine returns a CertifiedValue in log space.
//
// Distances are read through any accessor with size(), operator()(i, j) and
// ultrametric(). When the accessor is ultrametric the threshold relations
// are equivalences and every optimum is a per-class max/min.

#include <algorithm>
#include <chrono>
#include <concepts>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <boost/dynamic_bitset.hpp>

#include "scalepress/certified.hpp"
#include "scalepress/error.hpp"

namespace scalepress::solver {

using Bitset = boost::dynamic_bitset<std::uint64_t>;
using Clock = std::chrono::steady_clock;

template <class D>
concept DistanceAccessor = requires(const D& d, std::size_t i) {
  { d.size() } -> std::convertible_to<std::size_t>;
  { d(i, i) } -> std::convertible_to<double>;
  { d.ultrametric() } -> std::convertible_to<bool>;
};

enum class Relation { Less, LessEqual };

inline bool related(double d, double eps, Relation r) { return r == Relation::Less ? d < eps : d <= eps; }

enum class Mode { Exact, Greedy, Auto };

inline std::string to_string(Mode m) {
  switch (m) {
    case Mode::Exact: return "exact";
    case Mode::Greedy: return "greedy";
    case Mode::Auto: return "auto";
  }
  return "?";
}

struct Options {
  Mode mode = Mode::Exact;
  std::uint64_t node_cap = 10'000'000;
  /// Largest non-ultrametric instance the exact searches accept.
  std::size_t exact_size_cap = 256;
  std::optional<Clock::time_point> deadline;
  bool allow_fast_path = true;
};

/// Node/wall-clock budget shared by one search.
class Budget {
 public:
  explicit Budget(const Options& opt) : cap_(opt.node_cap), deadline_(opt.deadline) {}
  bool tick() {
    if (exhausted_) return false;
    if (++nodes_ > cap_) exhausted_ = true;
    else if (deadline_ && (nodes_ & 1023u) == 0 && Clock::now() > *deadline_) exhausted_ = true;
    return !exhausted_;
  }
  bool exhausted() const { return exhausted_; }
  std::uint64_t nodes() const { return nodes_; }

 private:
  std::uint64_t nodes_ = 0;
  std::uint64_t cap_;
  std::optional<Clock::time_point> deadline_;
  bool exhausted_ = false;
};

enum class Plan { FastPath, Exact, Greedy };

inline Plan choose_plan(std::size_t n, bool ultrametric, const Options& opt) {
  if (ultrametric && opt.allow_fast_path) return Plan::FastPath;
  if (opt.mode == Mode::Greedy) return Plan::Greedy;
  if (n > opt.exact_size_cap) {
    if (opt.mode == Mode::Exact)
      throw SizeLimitError("exact search over " + std::to_string(n) + " points exceeds the cap of " +
                           std::to_string(opt.exact_size_cap) + "; use greedy mode");
    return Plan::Greedy;
  }
  return Plan::Exact;
}

// ---------------------------------------------------------------- helpers

template <DistanceAccessor D>
std::vector<Bitset> adjacency(const D& d, double eps, Relation rel) {
  const std::size_t n = d.size();
  std::vector<Bitset> adj(n, Bitset(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (related(d(i, j), eps, rel)) {
        adj[i].set(j);
        adj[j].set(i);
      }
  return adj;
}

/// Classes of `rel` at eps, assuming it is an equivalence (ultrametric case).
template <DistanceAccessor D>
std::vector<std::vector<std::size_t>> threshold_classes(const D& d, double eps, Relation rel) {
  std::vector<std::vector<std::size_t>> classes;
  for (std::size_t i = 0; i < d.size(); ++i) {
    bool placed = false;
    for (auto& c : classes)
      if (related(d(i, c.front()), eps, rel)) {
        c.push_back(i);
        placed = true;
        break;
      }
    if (!placed) classes.push_back({i});
  }
  return classes;
}

/// Linear weights exp(logw - anchor); anchor is the max (packings) or the
/// min (coverings) so that the optimum is >= 1 and never underflows.
struct ScaledWeights {
  double anchor = 0;
  std::vector<double> w;
};

inline ScaledWeights scale_weights(const std::vector<double>& logw, bool anchor_at_max) {
  ScaledWeights s;
  if (logw.empty()) return s;
  s.anchor = anchor_at_max ? *std::max_element(logw.begin(), logw.end()) : *std::min_element(logw.begin(), logw.end());
  for (double lw : logw) s.w.push_back(std::exp(lw - s.anchor));
  return s;
}

/// Vertices sorted by weight descending, index ascending.
inline std::vector<std::size_t> heavy_first(const std::vector<double>& w) {
  std::vector<std::size_t> order(w.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return w[a] > w[b]; });
  return order;
}

inline std::vector<std::size_t> members(const Bitset& b) {
  std::vector<std::size_t> out;
  for (auto i = b.find_first(); i != Bitset::npos; i = b.find_next(i)) out.push_back(i);
  return out;
}

inline Bitset singleton(std::size_t n, std::size_t i) {
  Bitset b(n);
  b.set(i);
  return b;
}

inline double log_of_subset(const std::vector<double>& logw, const std::vector<std::size_t>& idx) {
  std::vector<double> xs;
  for (auto i : idx) xs.push_back(logw[i]);
  return log_sum_exp(xs);
}

/// Enumerates maximal cliques of adj restricted to `within` (Bron–Kerbosch with pivot).
inline void maximal_cliques(const std::vector<Bitset>& adj, const Bitset& within,
                            const std::function<bool(const Bitset&)>& report, Budget* budget = nullptr) {
  const std::size_t n = within.size();
  std::function<bool(Bitset, Bitset, Bitset)> bk = [&](Bitset r, Bitset p, Bitset x) -> bool {
    if (budget && !budget->tick()) return false;
    if (p.none() && x.none()) return report(r);
    std::size_t pivot = Bitset::npos, best = 0;
    const Bitset px = p | x;
    for (auto u = px.find_first(); u != Bitset::npos; u = px.find_next(u)) {
      const auto c = (p & adj[u]).count();
      if (pivot == Bitset::npos || c > best) {
        pivot = u;
        best = c;
      }
    }
    const Bitset cand = p - adj[pivot];
    for (auto v = cand.find_first(); v != Bitset::npos; v = cand.find_next(v)) {
      Bitset r2 = r;
      r2.set(v);
      if (!bk(r2, p & adj[v], x & adj[v])) return false;
      p.reset(v);
      x.set(v);
    }
    return true;
  };
  bk(Bitset(n), within, Bitset(n));
}

// ------------------------------------------------- max-weight packing (P)

namespace detail {

struct PackingSearch {
  const std::vector<Bitset>& adj;
  const std::vector<double>& w;
  std::vector<std::size_t> order;
  Budget& budget;
  double best = 0;
  std::vector<std::size_t> best_set, cur;

  /// Sum of the heaviest weight of each clique in a greedy clique partition of cand.
  double clique_bound(const Bitset& cand) const {
    std::vector<Bitset> commons;
    double bound = 0;
    for (auto v : order) {
      if (!cand[v]) continue;
      bool placed = false;
      for (auto& c : commons)
        if (c[v]) {
          c &= adj[v];
          placed = true;
          break;
        }
      if (!placed) {
        commons.push_back(adj[v] & cand);
        bound += w[v];
      }
    }
    return bound;
  }

  void expand(Bitset cand, double cur_w) {
    if (!budget.tick()) return;
    if (cand.none()) {
      if (cur_w > best * (1 + 1e-12)) {
        best = cur_w;
        best_set = cur;
      }
      return;
    }
    if (cur_w + clique_bound(cand) <= best * (1 + 1e-12)) return;
    std::size_t v = 0;
    for (auto u : order)
      if (cand[u]) {
        v = u;
        break;
      }
    cur.push_back(v);
    Bitset inc = cand - adj[v];
    inc.reset(v);
    expand(std::move(inc), cur_w + w[v]);
    cur.pop_back();
    cand.reset(v);
    expand(std::move(cand), cur_w);
  }
};

inline std::vector<std::size_t> greedy_packing(const std::vector<Bitset>& adj, const std::vector<std::size_t>& order) {
  const std::size_t n = adj.size();
  Bitset blocked(n);
  std::vector<std::size_t> picked;
  for (auto v : order) {
    if (blocked[v]) continue;
    picked.push_back(v);
    blocked |= adj[v];
    blocked.set(v);
  }
  std::sort(picked.begin(), picked.end());
  return picked;
}

}  // namespace detail

/// sup of sum_{x in E} w(x) over E with pairwise d > eps (conflict: d <= eps
/// for LessEqual, d < eps for Less).
template <DistanceAccessor D>
CertifiedValue max_weight_packing(const D& d, double eps, const std::vector<double>& logw, const Options& opt,
                                  Relation conflict = Relation::LessEqual) {
  const std::size_t n = d.size();
  if (n == 0) throw InvalidArgument("packing over an empty set");
  if (logw.size() != n) throw InvalidArgument("weight vector size mismatch");
  const Plan plan = choose_plan(n, d.ultrametric(), opt);
  if (plan == Plan::FastPath) {
    std::vector<std::size_t> witness;
    for (const auto& cls : threshold_classes(d, eps, conflict)) {
      std::size_t arg = cls.front();
      for (auto i : cls)
        if (logw[i] > logw[arg]) arg = i;
      witness.push_back(arg);
    }
    std::sort(witness.begin(), witness.end());
    auto v = CertifiedValue::exact_log(log_of_subset(logw, witness));
    v.witness = std::move(witness);
    return v;
  }
  const auto sw = scale_weights(logw, true);
  const auto adj = adjacency(d, eps, conflict);
  const auto order = heavy_first(sw.w);
  Budget budget(opt);
  detail::PackingSearch search{adj, sw.w, order, budget, 0.0, {}, {}};
  const auto greedy = detail::greedy_packing(adj, order);
  double greedy_w = 0;
  for (auto i : greedy) greedy_w += sw.w[i];
  const double root_bound = search.clique_bound(Bitset(n).set());
  if (plan == Plan::Greedy) {
    CertifiedValue v;
    v.method = Method::Greedy;
    v.log_lower = log_of_subset(logw, greedy);
    v.log_upper = std::max(v.log_lower, sw.anchor + std::log(root_bound));
    v.witness = greedy;
    return v;
  }
  search.best = greedy_w;
  search.best_set = greedy;
  search.expand(Bitset(n).set(), 0.0);
  auto witness = search.best_set;
  std::sort(witness.begin(), witness.end());
  if (budget.exhausted()) {
    CertifiedValue v;
    v.method = Method::Greedy;
    v.log_lower = log_of_subset(logw, witness);
    v.log_upper = std::max(v.log_lower, sw.anchor + std::log(root_bound));
    v.witness = std::move(witness);
    v.warnings.push_back("branch-and-bound budget exhausted after " + std::to_string(budget.nodes()) +
                         " nodes; reporting greedy bracket");
    return v;
  }
  auto v = CertifiedValue::exact_log(log_of_subset(logw, witness));
  v.witness = std::move(witness);
  return v;
}

// ----------------------------------------------------- weighted set cover

struct SetCoverProblem {
  std::size_t universe = 0;
  std::vector<Bitset> sets;   // over the universe
  std::vector<double> cost;   // linear, positive
};

struct SetCoverResult {
  double cost = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> chosen;
  double lower_bound = 0;
  bool exact = false;
  std::uint64_t nodes = 0;
};

namespace detail {

struct SetCoverSearch {
  const SetCoverProblem& prob;
  std::vector<Bitset> elem_sets;  // per element: sets containing it
  Budget& budget;
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> best_choice, cur;

  SetCoverSearch(const SetCoverProblem& p, Budget& b) : prob(p), budget(b) {
    elem_sets.assign(p.universe, Bitset(p.sets.size()));
    for (std::size_t s = 0; s < p.sets.size(); ++s)
      for (auto e = p.sets[s].find_first(); e != Bitset::npos; e = p.sets[s].find_next(e)) elem_sets[e].set(s);
  }

  double min_cost(const Bitset& sets) const {
    double m = std::numeric_limits<double>::infinity();
    for (auto s = sets.find_first(); s != Bitset::npos; s = sets.find_next(s)) m = std::min(m, prob.cost[s]);
    return m;
  }

  /// Elements whose admissible set families are pairwise disjoint each need a
  /// distinct set. Returns +inf when some element cannot be covered.
  double packing_bound(const Bitset& uncovered, const Bitset& allowed) const {
    Bitset used(prob.sets.size());
    double lb = 0;
    for (auto e = uncovered.find_first(); e != Bitset::npos; e = uncovered.find_next(e)) {
      const Bitset fam = elem_sets[e] & allowed;
      if (fam.none()) return std::numeric_limits<double>::infinity();
      if (!fam.intersects(used)) {
        lb += min_cost(fam);
        used |= fam;
      }
    }
    return lb;
  }

  void search(const Bitset& uncovered, Bitset allowed, double cur_cost) {
    if (!budget.tick()) return;
    if (uncovered.none()) {
      if (cur_cost < best * (1 - 1e-12)) {
        best = cur_cost;
        best_choice = cur;
      }
      return;
    }
    if (cur_cost + packing_bound(uncovered, allowed) >= best * (1 - 1e-12)) return;
    std::size_t pick = Bitset::npos, fewest = 0;
    for (auto e = uncovered.find_first(); e != Bitset::npos; e = uncovered.find_next(e)) {
      const auto c = (elem_sets[e] & allowed).count();
      if (pick == Bitset::npos || c < fewest) {
        pick = e;
        fewest = c;
      }
    }
    auto cands = members(elem_sets[pick] & allowed);
    std::stable_sort(cands.begin(), cands.end(), [&](auto a, auto b) { return prob.cost[a] < prob.cost[b]; });
    for (auto s : cands) {
      cur.push_back(s);
      search(uncovered - prob.sets[s], allowed, cur_cost + prob.cost[s]);
      cur.pop_back();
      allowed.reset(s);
      if (budget.exhausted()) return;
    }
  }
};

inline std::vector<std::size_t> greedy_set_cover(const SetCoverProblem& prob) {
  Bitset uncovered(prob.universe);
  uncovered.set();
  std::vector<std::size_t> chosen;
  while (uncovered.any()) {
    std::size_t best = Bitset::npos;
    double best_ratio = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < prob.sets.size(); ++s) {
      const auto gain = (prob.sets[s] & uncovered).count();
      if (!gain) continue;
      const double r = prob.cost[s] / static_cast<double>(gain);
      if (r < best_ratio) {
        best_ratio = r;
        best = s;
      }
    }
    if (best == Bitset::npos) throw InternalError("set cover instance has an uncoverable element");
    chosen.push_back(best);
    uncovered -= prob.sets[best];
  }
  return chosen;
}

}  // namespace detail

inline SetCoverResult solve_set_cover(const SetCoverProblem& prob, const Options& opt, bool greedy_only) {
  Budget budget(opt);
  detail::SetCoverSearch search(prob, budget);
  Bitset all(prob.universe);
  all.set();
  Bitset allowed(prob.sets.size());
  allowed.set();
  SetCoverResult res;
  res.lower_bound = search.packing_bound(all, allowed);
  res.chosen = detail::greedy_set_cover(prob);
  res.cost = 0;
  for (auto s : res.chosen) res.cost += prob.cost[s];
  if (greedy_only) return res;
  search.best = res.cost;
  search.best_choice = res.chosen;
  search.search(all, allowed, 0.0);
  res.chosen = search.best_choice;
  res.cost = search.best;
  res.nodes = budget.nodes();
  res.exact = !budget.exhausted();
  if (res.exact) res.lower_bound = res.cost;
  return res;
}

// ------------------------------------------------ min-weight domination (Q)

/// inf of sum_{y in J} w(y) over J such that every x has y in J with rel(d(x,y), eps).
template <DistanceAccessor D>
CertifiedValue min_weight_domination(const D& d, double eps, const std::vector<double>& logw, const Options& opt,
                                     Relation rel = Relation::Less) {
  const std::size_t n = d.size();
  if (n == 0) throw InvalidArgument("domination over an empty set");
  if (logw.size() != n) throw InvalidArgument("weight vector size mismatch");
  const Plan plan = choose_plan(n, d.ultrametric(), opt);
  if (plan == Plan::FastPath) {
    std::vector<std::size_t> witness;
    for (const auto& cls : threshold_classes(d, eps, rel)) {
      std::size_t arg = cls.front();
      for (auto i : cls)
        if (logw[i] < logw[arg]) arg = i;
      witness.push_back(arg);
    }
    std::sort(witness.begin(), witness.end());
    auto v = CertifiedValue::exact_log(log_of_subset(logw, witness));
    v.witness = std::move(witness);
    return v;
  }
  const auto sw = scale_weights(logw, false);
  auto adj = adjacency(d, eps, rel);
  SetCoverProblem prob;
  prob.universe = n;
  for (std::size_t y = 0; y < n; ++y) {
    Bitset s = adj[y];
    s.set(y);
    prob.sets.push_back(std::move(s));
    prob.cost.push_back(sw.w[y]);
  }
  const auto res = solve_set_cover(prob, opt, plan == Plan::Greedy);
  auto witness = res.chosen;
  std::sort(witness.begin(), witness.end());
  CertifiedValue v;
  v.log_upper = log_of_subset(logw, witness);
  v.witness = std::move(witness);
  if (res.exact) {
    v.log_lower = v.log_upper;
    v.method = Method::Exact;
  } else {
    v.method = Method::Greedy;
    v.log_lower = std::min(v.log_upper, sw.anchor + std::log(res.lower_bound));
    if (plan == Plan::Exact)
      v.warnings.push_back("branch-and-bound budget exhausted; reporting greedy bracket");
  }
  return v;
}

// --------------------------------------------------- cover optima (p and q)

/// inf over covers by sets of d-diameter < eps of sum_A inf_{x in A} w(x).
/// Any cover can be enlarged cell-wise to maximal cliques of the `< eps`
/// graph without raising the cost, so the exact search ranges over those.
template <DistanceAccessor D>
CertifiedValue cover_inf_optimum(const D& d, double eps, const std::vector<double>& logw, const Options& opt) {
  const std::size_t n = d.size();
  if (n == 0) throw InvalidArgument("cover over an empty set");
  if (logw.size() != n) throw InvalidArgument("weight vector size mismatch");
  const Plan plan = choose_plan(n, d.ultrametric(), opt);
  if (plan == Plan::FastPath) {
    CertifiedValue v;
    std::vector<double> terms;
    for (const auto& cls : threshold_classes(d, eps, Relation::Less)) {
      double m = logw[cls.front()];
      for (auto i : cls) m = std::min(m, logw[i]);
      terms.push_back(m);
      v.cells.push_back(cls);
    }
    v.log_lower = v.log_upper = log_sum_exp(terms);
    return v;
  }
  const auto sw = scale_weights(logw, false);
  const auto adj = adjacency(d, eps, Relation::Less);
  SetCoverProblem prob;
  prob.universe = n;
  auto add_cell = [&](const Bitset& cell) {
    double c = std::numeric_limits<double>::infinity();
    for (auto i = cell.find_first(); i != Bitset::npos; i = cell.find_next(i)) c = std::min(c, sw.w[i]);
    prob.sets.push_back(cell);
    prob.cost.push_back(c);
  };
  Bitset all(n);
  all.set();
  if (plan == Plan::Exact) {
    Budget enum_budget(opt);
    maximal_cliques(adj, all, [&](const Bitset& c) { add_cell(c); return true; }, &enum_budget);
    if (enum_budget.exhausted()) throw SizeLimitError("too many maximal cliques for an exact cover search");
  } else {
    // Candidate cells: open d-balls of radius eps/2 (diameter < eps) plus one
    // greedily grown clique per point.
    const auto order = heavy_first(sw.w);
    for (std::size_t x = 0; x < n; ++x) {
      Bitset ball(n);
      for (std::size_t y = 0; y < n; ++y)
        if (d(x, y) < eps / 2) ball.set(y);
      add_cell(ball);
      Bitset clique = singleton(n, x), common = adj[x];
      for (auto y : order)
        if (common[y]) {
          clique.set(y);
          common &= adj[y];
        }
      add_cell(clique);
    }
  }
  const auto res = solve_set_cover(prob, opt, plan == Plan::Greedy);
  CertifiedValue v;
  std::vector<double> terms;
  for (auto s : res.chosen) {
    v.cells.push_back(members(prob.sets[s]));
    double m = std::numeric_limits<double>::infinity();
    for (auto i : v.cells.back()) m = std::min(m, logw[i]);
    terms.push_back(m);
  }
  v.log_upper = log_sum_exp(terms);
  if (res.exact) {
    v.log_lower = v.log_upper;
  } else {
    v.method = Method::Greedy;
    // Points pairwise >= eps apart lie in distinct cells; a cell through x
    // costs at least the lightest point within eps of x.
    Bitset blocked(n);
    double lb = 0;
    for (std::size_t x = 0; x < n; ++x) {
      if (blocked[x]) continue;
      double m = sw.w[x];
      for (auto y = adj[x].find_first(); y != Bitset::npos; y = adj[x].find_next(y)) m = std::min(m, sw.w[y]);
      lb += m;
      blocked |= adj[x];
      blocked.set(x);
    }
    v.log_lower = std::min(v.log_upper, sw.anchor + std::log(lb));
    if (plan == Plan::Exact) v.warnings.push_back("branch-and-bound budget exhausted; reporting greedy bracket");
  }
  return v;
}

namespace detail {

struct SupPartitionSearch {
  const std::vector<Bitset>& adj;
  const std::vector<double>& w;
  std::vector<std::size_t> order;
  Budget& budget;
  double best = std::numeric_limits<double>::infinity();
  std::vector<Bitset> best_cells, cur_cells;

  /// Vertices pairwise non-adjacent need distinct cells, each costing at
  /// least that vertex's weight.
  double packing_bound(const Bitset& u) const {
    Bitset blocked = ~u;
    double lb = 0;
    for (auto v : order) {
      if (blocked[v]) continue;
      lb += w[v];
      blocked |= adj[v];
      blocked.set(v);
    }
    return lb;
  }

  void search(const Bitset& u, double cur) {
    if (!budget.tick()) return;
    if (u.none()) {
      if (cur < best * (1 - 1e-12)) {
        best = cur;
        best_cells = cur_cells;
      }
      return;
    }
    if (cur + packing_bound(u) >= best * (1 - 1e-12)) return;
    std::size_t x = 0;
    for (auto v : order)
      if (u[v]) {
        x = v;
        break;
      }
    // x is the heaviest remaining point, so any cell through x costs w(x);
    // the remaining cost is monotone in the uncovered set, hence only
    // maximal cells through x need to be tried.
    const Bitset nbr = adj[x] & u;
    std::vector<Bitset> cells;
    if (nbr.none()) {
      cells.push_back(singleton(u.size(), x));
    } else {
      maximal_cliques(adj, nbr, [&](const Bitset& c) {
        Bitset cell = c;
        cell.set(x);
        cells.push_back(std::move(cell));
        return true;
      });
    }
    std::stable_sort(cells.begin(), cells.end(), [](const Bitset& a, const Bitset& b) { return a.count() > b.count(); });
    for (const auto& cell : cells) {
      cur_cells.push_back(cell);
      search(u - cell, cur + w[x]);
      cur_cells.pop_back();
      if (budget.exhausted()) return;
    }
  }
};

}  // namespace detail

/// inf over covers by sets of d-diameter < eps of sum_A sup_{x in A} w(x).
/// Shrinking cells never raises a sup-cost, so partitions into cliques of the
/// `< eps` graph are searched exhaustively.
template <DistanceAccessor D>
CertifiedValue cover_sup_optimum(const D& d, double eps, const std::vector<double>& logw, const Options& opt) {
  const std::size_t n = d.size();
  if (n == 0) throw InvalidArgument("cover over an empty set");
  if (logw.size() != n) throw InvalidArgument("weight vector size mismatch");
  const Plan plan = choose_plan(n, d.ultrametric(), opt);
  auto finish = [&](std::vector<std::vector<std::size_t>> cells) {
    CertifiedValue v;
    std::vector<double> terms;
    for (const auto& c : cells) {
      double m = -std::numeric_limits<double>::infinity();
      for (auto i : c) m = std::max(m, logw[i]);
      terms.push_back(m);
    }
    v.log_lower = v.log_upper = log_sum_exp(terms);
    v.cells = std::move(cells);
    return v;
  };
  if (plan == Plan::FastPath) return finish(threshold_classes(d, eps, Relation::Less));
  const auto sw = scale_weights(logw, true);
  const auto adj = adjacency(d, eps, Relation::Less);
  Budget budget(opt);
  detail::SupPartitionSearch search{adj, sw.w, heavy_first(sw.w), budget, std::numeric_limits<double>::infinity(), {}, {}};
  // Greedy: heaviest remaining point grows a clique through heavy neighbours.
  std::vector<Bitset> greedy_cells;
  {
    Bitset u(n);
    u.set();
    double cost = 0;
    while (u.any()) {
      std::size_t x = 0;
      for (auto v : search.order)
        if (u[v]) {
          x = v;
          break;
        }
      Bitset cell = singleton(n, x), common = adj[x] & u;
      for (auto y : search.order)
        if (common[y]) {
          cell.set(y);
          common &= adj[y];
        }
      greedy_cells.push_back(cell);
      cost += sw.w[x];
      u -= cell;
    }
    search.best = cost;
    search.best_cells = greedy_cells;
  }
  Bitset all(n);
  all.set();
  const double root_lb = search.packing_bound(all);
  if (plan == Plan::Exact) search.search(all, 0.0);
  std::vector<std::vector<std::size_t>> cells;
  for (const auto& c : search.best_cells) cells.push_back(members(c));
  auto v = finish(std::move(cells));
  if (plan == Plan::Greedy || budget.exhausted()) {
    v.method = Method::Greedy;
    v.log_lower = std::min(v.log_upper, sw.anchor + std::log(root_lb));
    if (plan == Plan::Exact) v.warnings.push_back("branch-and-bound budget exhausted; reporting greedy bracket");
  }
  return v;
}

// ---------------------------------------------- weighted partial set cover

/// Choose sets (each with a cost) so that the covered item mass reaches
/// `min_mass`; minimise total cost.
struct PartialCoverProblem {
  std::vector<std::int64_t> mass;  // per item
  std::vector<Bitset> sets;        // over items
  std::vector<double> cost;        // linear, positive
  std::int64_t min_mass = 0;
};

struct PartialCoverResult {
  double cost = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> chosen;
  double lower_bound = 0;
  bool exact = false;
};

namespace detail {

struct PartialCoverSearch {
  const PartialCoverProblem& prob;
  std::vector<std::size_t> order;  // sets by cost per full mass
  Budget& budget;
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> best_choice, cur;

  std::int64_t mass_of(const Bitset& items) const {
    std::int64_t m = 0;
    for (auto i = items.find_first(); i != Bitset::npos; i = items.find_next(i)) m += prob.mass[i];
    return m;
  }

  /// Fractional knapsack over marginal masses of sets order[k..].
  double fractional_bound(std::size_t k, const Bitset& covered, std::int64_t need) const {
    if (need <= 0) return 0;
    std::vector<std::pair<double, std::int64_t>> items;
    for (std::size_t j = k; j < order.size(); ++j) {
      const auto s = order[j];
      const auto m = mass_of(prob.sets[s] - covered);
      if (m > 0) items.push_back({prob.cost[s] / static_cast<double>(m), m});
    }
    std::sort(items.begin(), items.end());
    double lb = 0;
    for (auto [ratio, m] : items) {
      const auto take = std::min(m, need);
      lb += ratio * static_cast<double>(take);
      need -= take;
      if (need <= 0) return lb;
    }
    return std::numeric_limits<double>::infinity();
  }

  void search(std::size_t k, const Bitset& covered, std::int64_t mass, double cur_cost) {
    if (!budget.tick()) return;
    if (mass >= prob.min_mass) {
      if (cur_cost < best * (1 - 1e-12)) {
        best = cur_cost;
        best_choice = cur;
      }
      return;
    }
    if (k == order.size()) return;
    if (cur_cost + fractional_bound(k, covered, prob.min_mass - mass) >= best * (1 - 1e-12)) return;
    const auto s = order[k];
    const Bitset added = prob.sets[s] - covered;
    if (added.any()) {
      cur.push_back(s);
      search(k + 1, covered | prob.sets[s], mass + mass_of(added), cur_cost + prob.cost[s]);
      cur.pop_back();
    }
    search(k + 1, covered, mass, cur_cost);
  }
};

}  // namespace detail

inline PartialCoverResult solve_partial_cover(const PartialCoverProblem& prob, const Options& opt, bool greedy_only) {
  const std::size_t items = prob.mass.size();
  Budget budget(opt);
  detail::PartialCoverSearch search{prob, {}, budget, std::numeric_limits<double>::infinity(), {}, {}};
  search.order.resize(prob.sets.size());
  std::iota(search.order.begin(), search.order.end(), 0);
  std::stable_sort(search.order.begin(), search.order.end(), [&](auto a, auto b) {
    return prob.cost[a] / static_cast<double>(std::max<std::int64_t>(1, search.mass_of(prob.sets[a]))) <
           prob.cost[b] / static_cast<double>(std::max<std::int64_t>(1, search.mass_of(prob.sets[b])));
  });
  PartialCoverResult res;
  const Bitset none(items);
  res.lower_bound = search.fractional_bound(0, none, prob.min_mass);
  if (!std::isfinite(res.lower_bound)) throw InternalError("partial cover target exceeds total mass");
  {
    Bitset covered(items);
    std::int64_t mass = 0;
    double cost = 0;
    while (mass < prob.min_mass) {
      std::size_t best = Bitset::npos;
      double best_ratio = std::numeric_limits<double>::infinity();
      for (std::size_t s = 0; s < prob.sets.size(); ++s) {
        const auto gain = search.mass_of(prob.sets[s] - covered);
        if (gain <= 0) continue;
        const double r = prob.cost[s] / static_cast<double>(std::min(gain, prob.min_mass - mass));
        if (r < best_ratio) {
          best_ratio = r;
          best = s;
        }
      }
      res.chosen.push_back(best);
      cost += prob.cost[best];
      mass += search.mass_of(prob.sets[best] - covered);
      covered |= prob.sets[best];
    }
    res.cost = cost;
  }
  if (greedy_only) return res;
  search.best = res.cost;
  search.best_choice = res.chosen;
  search.search(0, none, 0, 0.0);
  res.chosen = search.best_choice;
  res.cost = search.best;
  res.exact = !budget.exhausted();
  if (res.exact) res.lower_bound = res.cost;
  return res;
}

}  // namespace scalepress::solver
