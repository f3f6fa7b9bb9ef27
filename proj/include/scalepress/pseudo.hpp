#pragma once

// Pseudo-orbits restricted to finite windows of Z^d, the orbit space X_0,
// truncated product distances, pseudo-orbit pressure quantities POP/POQ and
// the PSP report.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "scalepress/certified.hpp"
#include "scalepress/error.hpp"
#include "scalepress/group.hpp"
#include "scalepress/pressure.hpp"
#include "scalepress/scale.hpp"
#include "scalepress/solver.hpp"
#include "scalepress/system.hpp"

namespace scalepress {

inline constexpr std::uint64_t kDefaultEnumerationCap = 10'000'000;

/// Window elements in word-length order with an index lookup.
struct WindowLayout {
  std::vector<Element> elements;
  std::map<Element, std::size_t> index;

  explicit WindowLayout(const FinitePatch& window) : elements(window.word_ordered()) {
    for (std::size_t k = 0; k < elements.size(); ++k) index.emplace(elements[k], k);
  }
  std::size_t size() const { return elements.size(); }
  bool contains(const Element& g) const { return index.count(g) != 0; }
  std::size_t position(const Element& g) const {
    auto it = index.find(g);
    if (it == index.end()) throw InvalidArgument("element " + g.to_string() + " is outside the window");
    return it->second;
  }
};

struct PseudoOrbitWindow {
  std::shared_ptr<const WindowLayout> layout;
  std::vector<std::uint32_t> assignment;  // y_g per layout position
  double defect = 0;

  std::uint32_t at(const Element& g) const { return assignment[layout->position(g)]; }
  bool operator==(const PseudoOrbitWindow& o) const { return assignment == o.assignment; }
};

namespace detail {

struct WindowConstraint {
  std::size_t from, to;  // positions of g and tg
  std::size_t generator;
};

inline std::vector<WindowConstraint> window_constraints(const WindowLayout& layout, const std::vector<Element>& gens) {
  std::vector<WindowConstraint> out;
  for (std::size_t a = 0; a < layout.size(); ++a)
    for (std::size_t t = 0; t < gens.size(); ++t) {
      const Element tg = gens[t] + layout.elements[a];
      if (layout.contains(tg)) out.push_back({a, layout.position(tg), t});
    }
  return out;
}

}  // namespace detail

/// The generator set {g_1..g_m}: standard basis of Z^d (no inverses).
inline std::vector<Element> default_generators(const FiniteGSystem& sys) {
  return GroupModel::lattice(sys.dimension()).generators;
}

/// All assignments W -> X with d(y_{tg}, t(y_g)) < eps for every t in gens and
/// g, tg in W. Depth-first in word order of W, candidate points ascending, so
/// the output is in canonical lexicographic order.
inline std::vector<PseudoOrbitWindow> enumerate_pseudo_orbits(const FiniteGSystem& sys,
                                                              const std::vector<Element>& gens,
                                                              const FinitePatch& window, double eps,
                                                              std::uint64_t cap = kDefaultEnumerationCap) {
  require_eps(eps);
  for (const auto& t : gens)
    if (t.dimension() != sys.dimension()) throw InvalidArgument("generator dimension does not match system");
  auto layout = std::make_shared<const WindowLayout>(window);
  const auto cons = detail::window_constraints(*layout, gens);
  std::vector<Permutation> gen_maps;
  for (const auto& t : gens) gen_maps.push_back(sys.action(t));
  // Constraints checked when the later of their two positions is assigned.
  std::vector<std::vector<detail::WindowConstraint>> at(layout->size());
  for (const auto& c : cons) at[std::max(c.from, c.to)].push_back(c);
  std::vector<PseudoOrbitWindow> out;
  std::vector<std::uint32_t> y(layout->size(), 0);
  std::uint64_t nodes = 0;
  const auto n = static_cast<std::uint32_t>(sys.size());
  auto dfs = [&](auto&& self, std::size_t pos, double defect) -> void {
    if (pos == layout->size()) {
      out.push_back({layout, y, defect});
      return;
    }
    for (std::uint32_t v = 0; v < n; ++v) {
      if (++nodes > cap)
        throw SizeLimitError("pseudo-orbit enumeration exceeded the cap of " + std::to_string(cap) + " nodes");
      y[pos] = v;
      double local = defect;
      bool ok = true;
      for (const auto& c : at[pos]) {
        const double d = sys.distance(y[c.to], gen_maps[c.generator][y[c.from]]);
        if (!(d < eps)) {
          ok = false;
          break;
        }
        local = std::max(local, d);
      }
      if (ok) self(self, pos + 1, local);
    }
  };
  dfs(dfs, 0, 0.0);
  return out;
}

inline std::vector<PseudoOrbitWindow> enumerate_pseudo_orbits(const FiniteGSystem& sys, const FinitePatch& window,
                                                              double eps,
                                                              std::uint64_t cap = kDefaultEnumerationCap) {
  return enumerate_pseudo_orbits(sys, default_generators(sys), window, eps, cap);
}

/// True orbits restricted to the window: y_g = g x, one per point x (pi_0 = y_e).
inline std::vector<PseudoOrbitWindow> orbit_space(const FiniteGSystem& sys, const FinitePatch& window) {
  auto layout = std::make_shared<const WindowLayout>(window);
  std::vector<Permutation> acts;
  for (const auto& g : layout->elements) acts.push_back(sys.action(g));
  std::vector<PseudoOrbitWindow> out;
  for (std::uint32_t x = 0; x < sys.size(); ++x) {
    PseudoOrbitWindow w{layout, {}, 0.0};
    for (const auto& a : acts) w.assignment.push_back(a[x]);
    out.push_back(std::move(w));
  }
  return out;
}

/// The window F ∪ 𝔊F that carries every constraint affecting F-quantities.
inline FinitePatch constraint_window(const FinitePatch& F, const std::vector<Element>& gens) {
  FinitePatch w = F;
  for (const auto& t : gens) w = w.unite(F.translate(t));
  return w;
}

// ------------------------------------------------- PO quantities on windows

/// max_{g in F} d(x_g, y_g) between windows; a pseudometric.
class WindowMetric {
 public:
  WindowMetric(const FiniteGSystem& sys, const std::vector<PseudoOrbitWindow>& windows, const FinitePatch& F)
      : n_(windows.size()), ultrametric_(sys.ultrametric()) {
    if (windows.empty()) throw InvalidArgument("window list is empty");
    std::vector<std::size_t> pos;
    for (const auto& g : F) pos.push_back(windows.front().layout->position(g));
    matrix_.assign(n_ * n_, 0.0);
    for (std::size_t a = 0; a < n_; ++a)
      for (std::size_t b = a + 1; b < n_; ++b) {
        double m = 0;
        for (auto p : pos) m = std::max(m, sys.distance(windows[a].assignment[p], windows[b].assignment[p]));
        matrix_[a * n_ + b] = matrix_[b * n_ + a] = m;
      }
  }
  std::size_t size() const { return n_; }
  bool ultrametric() const { return ultrametric_; }
  double operator()(std::size_t i, std::size_t j) const { return matrix_[i * n_ + j]; }

 private:
  std::size_t n_;
  bool ultrametric_;
  std::vector<double> matrix_;
};

/// sum_{g in F} phi(x_g) per window.
inline std::vector<double> window_sums(const std::vector<PseudoOrbitWindow>& windows, const FinitePatch& F,
                                       const Potential& phi) {
  std::vector<double> out;
  if (windows.empty()) return out;
  std::vector<std::size_t> pos;
  for (const auto& g : F) pos.push_back(windows.front().layout->position(g));
  for (const auto& w : windows) {
    double s = 0;
    for (auto p : pos) s += phi(w.assignment[p]);
    out.push_back(s);
  }
  return out;
}

/// POP: separated means some g in F has d(x_g, y_g) > eps.
inline CertifiedValue po_separated(const FiniteGSystem& sys, const std::vector<PseudoOrbitWindow>& windows,
                                   const FinitePatch& F, double eps, const Potential& phi, const ScaleFunction& s,
                                   const solver::Options& opt = {}) {
  require_eps(eps);
  const WindowMetric dm(sys, windows, F);
  return solver::max_weight_packing(dm, eps, log_weights(window_sums(windows, F, phi), s, eps), opt,
                                    solver::Relation::LessEqual);
}

/// POQ: spanning with the non-strict relation d(x_g, y_g) <= eps for all g in F.
inline CertifiedValue po_spanning(const FiniteGSystem& sys, const std::vector<PseudoOrbitWindow>& windows,
                                  const FinitePatch& F, double eps, const Potential& phi, const ScaleFunction& s,
                                  const solver::Options& opt = {}) {
  require_eps(eps);
  const WindowMetric dm(sys, windows, F);
  return solver::min_weight_domination(dm, eps, log_weights(window_sums(windows, F, phi), s, eps), opt,
                                       solver::Relation::LessEqual);
}

// ------------------------------------------------ truncated product space

struct TruncatedProductPoint {
  std::vector<std::uint32_t> coords;  // x_{g_i}, i < N, enumeration g_0 = e, g_1, ...
  std::size_t depth() const { return coords.size(); }
};

inline TruncatedProductPoint truncate(const PseudoOrbitWindow& w, std::size_t depth) {
  const int d = w.layout->elements.front().dimension();
  TruncatedProductPoint p;
  for (const auto& g : enumerate_elements(d, depth)) p.coords.push_back(w.at(g));
  return p;
}

/// sum_{i<N} d(x_{g_i}, y_{g_i}) / 2^i
inline double truncated_distance(const FiniteGSystem& sys, const TruncatedProductPoint& a,
                                 const TruncatedProductPoint& b) {
  if (a.depth() != b.depth()) throw InvalidArgument("truncation depths differ");
  double s = 0, scale = 1;
  for (std::size_t i = 0; i < a.depth(); ++i, scale /= 2) s += sys.distance(a.coords[i], b.coords[i]) * scale;
  return s;
}

/// sum_{i >= N} diam / 2^i = diam / 2^{N-1}
inline double tail_bound(const FiniteGSystem& sys, std::size_t depth) {
  return sys.diameter() / std::ldexp(1.0, static_cast<int>(depth) - 1);
}

/// max over pseudo-orbit windows of min over orbit windows of the truncated
/// distance, plus the tail bound.
inline double hausdorff_gap(const FiniteGSystem& sys, const std::vector<PseudoOrbitWindow>& pseudo,
                            const std::vector<PseudoOrbitWindow>& orbits, std::size_t depth) {
  if (pseudo.empty() || orbits.empty()) throw InvalidArgument("hausdorff_gap: empty window list");
  if (depth < 1) throw InvalidArgument("hausdorff_gap: truncation depth must be >= 1");
  std::vector<TruncatedProductPoint> tp, to;
  for (const auto& w : pseudo) tp.push_back(truncate(w, depth));
  for (const auto& w : orbits) to.push_back(truncate(w, depth));
  double gap = 0;
  for (const auto& a : tp) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& b : to) best = std::min(best, truncated_distance(sys, a, b));
    gap = std::max(gap, best);
  }
  return gap + tail_bound(sys, depth);
}

/// (N, eps_0) for a target eta: N is the least depth with diam / 2^{N-1} < eta/3,
/// and eps_0 is the least positive d(x,y) among pairs whose
/// d_N(x,y) = max_{0<=i<=N} d(g_i x, g_i y) reaches eta/3, so d < eps_0
/// forces d_N < eta/3.
struct ShadowingScale {
  double eta = 0;
  std::size_t depth = 1;
  double eps0 = 0;
  double tail = 0;
  FinitePatch window;  // {g_0, ..., g_{N-1}}
};

inline ShadowingScale shadowing_scale(const FiniteGSystem& sys, double eta) {
  if (!(eta > 0)) throw InvalidArgument("eta must be positive");
  ShadowingScale out;
  out.eta = eta;
  const double diam = sys.diameter();
  while (!(diam / std::ldexp(1.0, static_cast<int>(out.depth) - 1) < eta / 3)) ++out.depth;
  out.tail = tail_bound(sys, out.depth);
  const auto elems = enumerate_elements(sys.dimension(), out.depth + 1);
  std::vector<Permutation> acts;
  for (const auto& g : elems) acts.push_back(sys.action(g));
  double eps0 = std::numeric_limits<double>::infinity();
  for (std::size_t x = 0; x < sys.size(); ++x)
    for (std::size_t y = x + 1; y < sys.size(); ++y) {
      double dn = 0;
      for (const auto& a : acts) dn = std::max(dn, sys.distance(a[x], a[y]));
      if (dn >= eta / 3) eps0 = std::min(eps0, sys.distance(x, y));
    }
  out.eps0 = std::isfinite(eps0) ? eps0 : (diam > 0 ? 2 * diam : 1.0);
  out.window = FinitePatch(std::vector<Element>(elems.begin(), elems.begin() + static_cast<long>(out.depth)));
  return out;
}

// -------------------------------------------------------------- PSP report

struct PseudoCell {
  std::int64_t n = 0;
  std::size_t patch_size = 0;
  double eps_pseudo = 0;
  double eps = 0;
  std::size_t windows = 0;
  std::size_t orbit_windows = 0;
  CertifiedValue POP, POQ;    // over pseudo-orbit windows
  CertifiedValue P0, Q0;      // same quantities over X_0 (true orbits)
  CertifiedValue P, Q;        // on X (d_F with the strict spanning relation)
  bool containment = false;   // POP >= P0
  bool collapsed = false;     // window set equals the orbit set
};

struct PspReport {
  std::vector<PseudoCell> cells;
  double SP = 0;              // Q surrogate on X
  double PSP = 0;             // POQ surrogate at the smallest eps_pseudo
  double POP = 0;             // POP surrogate at the smallest eps_pseudo
  double gap = 0;             // PSP - SP
  double pop_poq_gap = 0;
  bool containment_holds = true;
  bool pop_monotone = true;   // POP non-decreasing in eps_pseudo
  bool poq_monotone = true;   // POQ non-increasing in eps_pseudo
  /// Per (n, eps), per eps_pseudo ascending: per-site POP - per-site P0.
  std::map<std::pair<std::int64_t, double>, std::vector<std::pair<double, double>>> inner_gap;
  std::vector<std::string> notes;
};

inline PspReport psp_report(const FiniteGSystem& sys, const std::vector<Element>& gens, const FolnerSequence& folner,
                            const std::vector<double>& eps_grid, std::vector<double> eps_pseudo_grid,
                            const Potential& phi, const ScaleFunction& s, const solver::Options& opt = {},
                            std::uint64_t enumeration_cap = kDefaultEnumerationCap) {
  if (eps_grid.empty() || eps_pseudo_grid.empty()) throw InvalidArgument("psp_report: empty grid");
  const auto action = verify_action(sys);
  if (!action.bi_lipschitz()) throw InvalidSystem("psp_report needs bi-Lipschitz generators");
  std::sort(eps_pseudo_grid.begin(), eps_pseudo_grid.end());
  PspReport rep;
  std::vector<ProfileRow> poq_rows, pop_rows, q_rows;
  for (std::size_t k = 0; k < folner.length(); ++k) {
    const auto& F = folner.patches[k];
    const auto label = folner.labels[k];
    const auto W = constraint_window(F, gens);
    const auto orbit_ws = orbit_space(sys, W);
    const auto ctx = make_patch_context(sys, F, label, phi);
    std::map<double, std::pair<CertifiedValue, CertifiedValue>> x_side;
    for (double eps : eps_grid) {
      x_side.emplace(eps, std::make_pair(separated_value(*ctx.metric, ctx.sums, eps, s, opt),
                                         spanning_value(*ctx.metric, ctx.sums, eps, s, opt)));
      q_rows.push_back(make_row(label, F.size(), eps, Quantity::Q, x_side.at(eps).second, s));
    }
    std::map<double, std::pair<double, double>> previous;  // eps -> (POP, POQ) at the previous eps_pseudo
    for (double ep : eps_pseudo_grid) {
      const auto ws = with_cell_context("pseudo-orbit windows (n=" + std::to_string(label) +
                                            ", eps_pseudo=" + std::to_string(ep) + ")",
                                        [&] { return enumerate_pseudo_orbits(sys, gens, W, ep, enumeration_cap); });
      for (double eps : eps_grid) {
        PseudoCell c;
        c.n = label;
        c.patch_size = F.size();
        c.eps_pseudo = ep;
        c.eps = eps;
        c.windows = ws.size();
        c.orbit_windows = orbit_ws.size();
        c.POP = po_separated(sys, ws, F, eps, phi, s, opt);
        c.POQ = po_spanning(sys, ws, F, eps, phi, s, opt);
        c.P0 = po_separated(sys, orbit_ws, F, eps, phi, s, opt);
        c.Q0 = po_spanning(sys, orbit_ws, F, eps, phi, s, opt);
        c.P = x_side.at(eps).first;
        c.Q = x_side.at(eps).second;
        c.containment = log_le(c.P0.log_value(), c.POP.log_value());
        c.collapsed = ws.size() == orbit_ws.size();
        if (c.collapsed) {
          auto sorted_orbits = orbit_ws;
          std::sort(sorted_orbits.begin(), sorted_orbits.end(),
                    [](const auto& a, const auto& b) { return a.assignment < b.assignment; });
          for (std::size_t i = 0; i < ws.size(); ++i)
            if (ws[i].assignment != sorted_orbits[i].assignment) c.collapsed = false;
        }
        rep.containment_holds = rep.containment_holds && c.containment;
        if (auto it = previous.find(eps); it != previous.end()) {
          if (!log_le(it->second.first, c.POP.log_value())) rep.pop_monotone = false;
          if (!log_le(c.POQ.log_value(), it->second.second)) rep.poq_monotone = false;
        }
        previous[eps] = {c.POP.log_value(), c.POQ.log_value()};
        const double size = static_cast<double>(F.size());
        rep.inner_gap[{label, eps}].push_back({ep, (c.POP.log_value() - c.P0.log_value()) / size});
        if (ep == eps_pseudo_grid.front()) {
          poq_rows.push_back(make_row(label, F.size(), eps, Quantity::POQ, c.POQ, s));
          pop_rows.push_back(make_row(label, F.size(), eps, Quantity::POP, c.POP, s));
        }
        rep.cells.push_back(std::move(c));
      }
    }
  }
  rep.SP = surrogate(q_rows, Quantity::Q, s).estimate;
  rep.PSP = surrogate(poq_rows, Quantity::POQ, s).estimate;
  rep.POP = surrogate(pop_rows, Quantity::POP, s).estimate;
  rep.gap = rep.PSP - rep.SP;
  rep.pop_poq_gap = rep.POP - rep.PSP;
  rep.notes.push_back("inner eps_pseudo -> 0 limit taken at the smallest grid value");
  rep.notes.push_back("spanning on windows uses d <= eps; spanning on X uses d_F < eps");
  return rep;
}

// ------------------------------------------------------------ serialization

inline std::string element_key(const Element& g) {
  std::string s;
  for (std::size_t i = 0; i < g.coords.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(g.coords[i]);
  }
  return s;
}

inline nlohmann::json windows_to_json(const std::vector<PseudoOrbitWindow>& windows) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& w : windows) {
    nlohmann::json obj = nlohmann::json::object();
    for (std::size_t k = 0; k < w.layout->size(); ++k) obj[element_key(w.layout->elements[k])] = w.assignment[k];
    arr.push_back({{"assignment", obj}, {"defect", w.defect}});
  }
  return arr;
}

}  // namespace scalepress
