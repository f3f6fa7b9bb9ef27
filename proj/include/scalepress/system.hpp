#pragma once

// Finite metric G-systems: a finite point set with an exact metric matrix and
// one bijection per lattice generator. Periodic points of a subshift and
// finite rotation orbits are the canonical builders.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "scalepress/error.hpp"
#include "scalepress/group.hpp"

namespace scalepress {

using Permutation = std::vector<std::uint32_t>;

inline constexpr std::size_t kDefaultSystemSizeCap = 4096;
inline constexpr double kMetricTolerance = 1e-12;

/// Raw, unvalidated system description (what files and builders produce).
struct SystemData {
  std::size_t points = 0;
  std::vector<double> metric;                 // row-major points x points
  std::vector<Permutation> generator_maps;    // one per lattice axis
  std::vector<std::string> labels;            // optional
  std::vector<std::vector<int>> words;        // optional symbolic coordinates per point
};

/// Result of verify_action.
struct ActionReport {
  bool bijective = true;
  bool commuting = true;
  bool symmetric = true;
  bool zero_diagonal = true;
  bool positive_off_diagonal = true;
  bool triangle_checked = false;
  bool triangle = true;
  bool ultrametric = false;
  std::vector<double> lipschitz;          // per generator
  std::vector<double> inverse_lipschitz;  // per generator inverse
  bool bi_lipschitz() const {
    auto finite = [](double v) { return std::isfinite(v) && v > 0; };
    return std::all_of(lipschitz.begin(), lipschitz.end(), finite) &&
           std::all_of(inverse_lipschitz.begin(), inverse_lipschitz.end(), finite);
  }
  bool metric_ok() const {
    return symmetric && zero_diagonal && positive_off_diagonal && (!triangle_checked || triangle);
  }
};

namespace detail {

inline bool is_bijection(const Permutation& map, std::size_t n) {
  if (map.size() != n) return false;
  std::vector<char> seen(n, 0);
  for (auto v : map) {
    if (v >= n || seen[v]) return false;
    seen[v] = 1;
  }
  return true;
}

inline Permutation invert(const Permutation& map) {
  Permutation inv(map.size());
  for (std::uint32_t i = 0; i < map.size(); ++i) inv[map[i]] = i;
  return inv;
}

/// Ultrametric iff every distance equals the minimax (bottleneck) distance
/// along the minimum spanning tree. O(N^2) via Prim plus one tree walk per root.
inline bool check_ultrametric(std::size_t n, const std::vector<double>& metric) {
  if (n <= 2) return true;
  auto d = [&](std::size_t i, std::size_t j) { return metric[i * n + j]; };
  std::vector<double> best(n, std::numeric_limits<double>::infinity());
  std::vector<std::size_t> parent(n, n);
  std::vector<char> in_tree(n, 0);
  std::vector<std::vector<std::pair<std::size_t, double>>> adj(n);
  best[0] = 0;
  for (std::size_t step = 0; step < n; ++step) {
    std::size_t u = n;
    for (std::size_t v = 0; v < n; ++v)
      if (!in_tree[v] && (u == n || best[v] < best[u])) u = v;
    in_tree[u] = 1;
    if (parent[u] != n) {
      adj[u].push_back({parent[u], best[u]});
      adj[parent[u]].push_back({u, best[u]});
    }
    for (std::size_t v = 0; v < n; ++v)
      if (!in_tree[v] && d(u, v) < best[v]) {
        best[v] = d(u, v);
        parent[v] = u;
      }
  }
  std::vector<double> bottleneck(n);
  std::vector<std::size_t> stack;
  std::vector<std::size_t> from(n);
  for (std::size_t root = 0; root < n; ++root) {
    bottleneck[root] = 0;
    from[root] = n;
    stack.assign(1, root);
    while (!stack.empty()) {
      const auto u = stack.back();
      stack.pop_back();
      for (auto [v, w] : adj[u]) {
        if (v == from[u]) continue;
        from[v] = u;
        bottleneck[v] = std::max(bottleneck[u], w);
        stack.push_back(v);
      }
    }
    for (std::size_t v = 0; v < n; ++v) {
      const double dv = d(root, v);
      if (std::fabs(dv - bottleneck[v]) > kMetricTolerance * std::max(1.0, dv)) return false;
    }
  }
  return true;
}

}  // namespace detail

/// Checks the G-system invariants on raw data and measures per-generator
/// Lipschitz constants. Throws InvalidSystem on a non-bijective generator map.
/// The O(N^3) triangle check only runs for N <= triangle_limit; larger
/// metrics are accepted when verified ultrametric.
inline ActionReport verify_action(const SystemData& data, std::size_t triangle_limit = 512) {
  const std::size_t n = data.points;
  if (n == 0) throw InvalidSystem("system has no points");
  if (data.metric.size() != n * n) throw InvalidSystem("metric matrix has wrong size");
  ActionReport rep;
  for (std::size_t g = 0; g < data.generator_maps.size(); ++g) {
    if (!detail::is_bijection(data.generator_maps[g], n))
      throw InvalidSystem("generator map " + std::to_string(g) + " is not a bijection");
  }
  auto d = [&](std::size_t i, std::size_t j) { return data.metric[i * n + j]; };
  for (std::size_t i = 0; i < n; ++i) {
    if (d(i, i) != 0.0) rep.zero_diagonal = false;
    for (std::size_t j = i + 1; j < n; ++j) {
      if (d(i, j) != d(j, i)) rep.symmetric = false;
      if (!(d(i, j) > 0.0) || !std::isfinite(d(i, j))) rep.positive_off_diagonal = false;
    }
  }
  for (std::size_t a = 0; a < data.generator_maps.size(); ++a)
    for (std::size_t b = a + 1; b < data.generator_maps.size(); ++b) {
      const auto& f = data.generator_maps[a];
      const auto& g = data.generator_maps[b];
      for (std::size_t i = 0; i < n; ++i)
        if (f[g[i]] != g[f[i]]) {
          rep.commuting = false;
          break;
        }
    }
  rep.ultrametric = rep.symmetric && detail::check_ultrametric(n, data.metric);
  if (n <= triangle_limit) {
    rep.triangle_checked = true;
    for (std::size_t i = 0; i < n && rep.triangle; ++i)
      for (std::size_t j = 0; j < n && rep.triangle; ++j)
        for (std::size_t k = 0; k < n; ++k)
          if (d(i, k) > d(i, j) + d(j, k) + kMetricTolerance) {
            rep.triangle = false;
            break;
          }
  } else if (rep.ultrametric) {
    rep.triangle_checked = true;  // strong triangle inequality implies the triangle inequality
  }
  auto lipschitz_of = [&](const Permutation& map) {
    double lip = n == 1 ? 1.0 : 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j) lip = std::max(lip, d(map[i], map[j]) / d(i, j));
    return lip;
  };
  for (const auto& map : data.generator_maps) {
    rep.lipschitz.push_back(lipschitz_of(map));
    rep.inverse_lipschitz.push_back(lipschitz_of(detail::invert(map)));
  }
  return rep;
}

/// A validated finite G-system for G = Z^d (d = number of generator maps).
class FiniteGSystem {
 public:
  FiniteGSystem() = default;
  explicit FiniteGSystem(SystemData data, std::size_t size_cap = kDefaultSystemSizeCap)
      : data_(std::move(data)) {
    if (data_.points > size_cap)
      throw SizeLimitError("system has " + std::to_string(data_.points) + " points, above the cap of " +
                           std::to_string(size_cap));
    if (data_.generator_maps.empty()) throw InvalidSystem("system needs at least one generator map");
    if (!data_.labels.empty() && data_.labels.size() != data_.points)
      throw InvalidSystem("label count does not match point count");
    if (!data_.words.empty() && data_.words.size() != data_.points)
      throw InvalidSystem("word count does not match point count");
    const auto n = data_.points;
    const ActionReport rep = verify_action(data_);
    if (!rep.metric_ok()) throw InvalidSystem("metric violates the metric axioms");
    if (!rep.commuting) throw InvalidSystem("generator maps do not commute");
    ultrametric_ = rep.ultrametric;
    for (const auto& m : data_.generator_maps) inverse_maps_.push_back(detail::invert(m));
    double diam = 0, gap = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        diam = std::max(diam, distance(i, j));
        gap = std::min(gap, distance(i, j));
      }
    diameter_ = diam;
    min_gap_ = gap;
  }

  std::size_t size() const { return data_.points; }
  int dimension() const { return static_cast<int>(data_.generator_maps.size()); }
  double distance(std::size_t i, std::size_t j) const { return data_.metric[i * data_.points + j]; }
  const std::vector<double>& metric() const { return data_.metric; }
  const std::vector<Permutation>& generator_maps() const { return data_.generator_maps; }
  const std::vector<Permutation>& inverse_maps() const { return inverse_maps_; }
  const std::vector<std::string>& labels() const { return data_.labels; }
  const std::vector<std::vector<int>>& words() const { return data_.words; }
  const SystemData& data() const { return data_; }
  bool ultrametric() const { return ultrametric_; }
  double diameter() const { return diameter_; }
  /// Smallest positive distance (infinity for a one-point system).
  double min_gap() const { return min_gap_; }

  /// The permutation x -> g x.
  Permutation action(const Element& g) const {
    if (g.dimension() != dimension()) throw InvalidArgument("element dimension does not match system");
    Permutation perm(size());
    for (std::uint32_t i = 0; i < perm.size(); ++i) perm[i] = i;
    for (int axis = 0; axis < dimension(); ++axis) {
      const auto c = g.coords[static_cast<std::size_t>(axis)];
      const auto& step = c >= 0 ? data_.generator_maps[static_cast<std::size_t>(axis)]
                                : inverse_maps_[static_cast<std::size_t>(axis)];
      for (std::int64_t r = 0; r < std::llabs(c); ++r)
        for (auto& p : perm) p = step[p];
    }
    return perm;
  }
  std::uint32_t apply(const Element& g, std::uint32_t x) const { return action(g)[x]; }

  std::vector<Permutation> patch_actions(const FinitePatch& patch) const {
    std::vector<Permutation> out;
    out.reserve(patch.size());
    for (const auto& g : patch) out.push_back(action(g));
    return out;
  }

  /// FNV-1a over the defining data; stable across runs and platforms.
  std::uint64_t hash() const {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&](const void* p, std::size_t len) {
      const auto* b = static_cast<const unsigned char*>(p);
      for (std::size_t i = 0; i < len; ++i) h = (h ^ b[i]) * 1099511628211ULL;
    };
    const std::uint64_t n = data_.points;
    mix(&n, sizeof n);
    mix(data_.metric.data(), data_.metric.size() * sizeof(double));
    for (const auto& m : data_.generator_maps) mix(m.data(), m.size() * sizeof(std::uint32_t));
    return h;
  }

 private:
  SystemData data_;
  std::vector<Permutation> inverse_maps_;
  bool ultrametric_ = false;
  double diameter_ = 0;
  double min_gap_ = 0;
};

inline ActionReport verify_action(const FiniteGSystem& sys) { return verify_action(sys.data()); }

// ---------------------------------------------------------------- builders

/// All p-periodic sequences over {0..k-1} with the left shift and the metric
/// base^m, m the first index i >= 0 with x_i != y_i. Point index is
/// sum_i x_i k^i, so the word of point j lists its base-k digits.
inline FiniteGSystem build_periodic_subshift(int alphabet, int period, double metric_base = 0.5,
                                             std::size_t size_cap = kDefaultSystemSizeCap) {
  if (alphabet < 2) throw InvalidArgument("periodic subshift: alphabet must be >= 2");
  if (period < 1) throw InvalidArgument("periodic subshift: period must be >= 1");
  if (!(metric_base > 0 && metric_base < 1)) throw InvalidArgument("periodic subshift: metric base must be in (0,1)");
  std::size_t n = 1;
  for (int i = 0; i < period; ++i) {
    if (n > size_cap / static_cast<std::size_t>(alphabet))
      throw SizeLimitError("periodic subshift with k^p above the size cap " + std::to_string(size_cap));
    n *= static_cast<std::size_t>(alphabet);
  }
  SystemData data;
  data.points = n;
  data.words.resize(n);
  data.labels.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    std::size_t v = j;
    for (int i = 0; i < period; ++i) {
      data.words[j].push_back(static_cast<int>(v % static_cast<std::size_t>(alphabet)));
      v /= static_cast<std::size_t>(alphabet);
    }
    std::string label;
    for (int i = 0; i < period; ++i) {
      if (alphabet > 10 && i) label += ",";
      label += std::to_string(data.words[j][static_cast<std::size_t>(i)]);
    }
    data.labels[j] = label;
  }
  std::vector<double> powers(static_cast<std::size_t>(period) + 1);
  for (int m = 0; m <= period; ++m) powers[static_cast<std::size_t>(m)] = std::pow(metric_base, m);
  data.metric.assign(n * n, 0.0);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b) {
      int m = 0;
      while (data.words[a][static_cast<std::size_t>(m)] == data.words[b][static_cast<std::size_t>(m)]) ++m;
      data.metric[a * n + b] = data.metric[b * n + a] = powers[static_cast<std::size_t>(m)];
    }
  Permutation shift(n);
  for (std::size_t j = 0; j < n; ++j) {
    // (σx)_i = x_{i+1 mod p}
    std::size_t img = 0, place = 1;
    for (int i = 0; i < period; ++i) {
      img += static_cast<std::size_t>(data.words[j][static_cast<std::size_t>((i + 1) % period)]) * place;
      place *= static_cast<std::size_t>(alphabet);
    }
    shift[j] = static_cast<std::uint32_t>(img);
  }
  data.generator_maps.push_back(std::move(shift));
  return FiniteGSystem(std::move(data), size_cap);
}

/// q equally spaced points on the circle; arc-length metric as a fraction of
/// the circumference (diameter <= 1/2); generator j -> j+1 mod q.
inline FiniteGSystem build_rotation(int q) {
  if (q < 1) throw InvalidArgument("rotation: q must be >= 1");
  SystemData data;
  const auto n = static_cast<std::size_t>(q);
  data.points = n;
  data.metric.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    data.labels.push_back(std::to_string(i));
    data.words.push_back({static_cast<int>(i)});
    for (std::size_t j = 0; j < n; ++j) {
      const auto k = i > j ? i - j : j - i;
      data.metric[i * n + j] = static_cast<double>(std::min(k, n - k)) / static_cast<double>(q);
    }
  }
  Permutation step(n);
  for (std::size_t i = 0; i < n; ++i) step[i] = static_cast<std::uint32_t>((i + 1) % n);
  data.generator_maps.push_back(std::move(step));
  return FiniteGSystem(std::move(data));
}

inline FiniteGSystem build_one_point() { return build_rotation(1); }

/// Z^2 acting on the product of two rotation orbits with the max metric.
inline FiniteGSystem build_product_rotation(int q1, int q2) {
  const FiniteGSystem a = build_rotation(q1), b = build_rotation(q2);
  SystemData data;
  const std::size_t n1 = a.size(), n2 = b.size(), n = n1 * n2;
  data.points = n;
  data.metric.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      data.metric[i * n + j] = std::max(a.distance(i % n1, j % n1), b.distance(i / n1, j / n1));
  Permutation s1(n), s2(n);
  for (std::size_t i = 0; i < n; ++i) {
    s1[i] = static_cast<std::uint32_t>((i / n1) * n1 + (i % n1 + 1) % n1);
    s2[i] = static_cast<std::uint32_t>(((i / n1 + 1) % n2) * n1 + i % n1);
    data.labels.push_back(std::to_string(i % n1) + "," + std::to_string(i / n1));
    data.words.push_back({static_cast<int>(i % n1), static_cast<int>(i / n1)});
  }
  data.generator_maps = {std::move(s1), std::move(s2)};
  return FiniteGSystem(std::move(data));
}

/// Seeded random system: shortest-path metric of a complete graph with edge
/// lengths in {1..8}/8 (exact dyadic values, frequent ties) and a random
/// permutation as generator.
inline FiniteGSystem build_random(std::size_t points, std::uint64_t seed) {
  if (points < 1) throw InvalidArgument("random system: need at least one point");
  std::mt19937_64 rng(seed);
  const std::size_t n = points;
  std::vector<double> d(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      d[i * n + j] = d[j * n + i] = static_cast<double>(1 + rng() % 8) / 8.0;
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) d[i * n + j] = std::min(d[i * n + j], d[i * n + k] + d[k * n + j]);
  Permutation perm(n);
  for (std::uint32_t i = 0; i < n; ++i) perm[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng() % i]);
  SystemData data;
  data.points = n;
  data.metric = std::move(d);
  data.generator_maps.push_back(std::move(perm));
  for (std::size_t i = 0; i < n; ++i) data.labels.push_back(std::to_string(i));
  return FiniteGSystem(std::move(data));
}

// --------------------------------------------------------------- potential

/// Point values of a continuous function phi on the finite system.
struct Potential {
  std::vector<double> values;

  static Potential zero(const FiniteGSystem& sys) { return {std::vector<double>(sys.size(), 0.0)}; }
  static Potential constant(const FiniteGSystem& sys, double c) { return {std::vector<double>(sys.size(), c)}; }
  /// phi(x) = x_0, the symbol at the origin.
  static Potential symbol_at_origin(const FiniteGSystem& sys) {
    if (sys.words().size() != sys.size()) throw InvalidArgument("system has no symbolic words");
    Potential p;
    for (const auto& w : sys.words()) p.values.push_back(w.empty() ? 0.0 : static_cast<double>(w.front()));
    return p;
  }
  /// phi(j) = (1 + cos(2 pi j / q)) / 2 on a rotation orbit; nonnegative.
  static Potential rotation_cosine(const FiniteGSystem& sys) {
    Potential p;
    const double q = static_cast<double>(sys.size());
    for (std::size_t j = 0; j < sys.size(); ++j)
      p.values.push_back(0.5 * (1.0 + std::cos(2.0 * std::numbers::pi * static_cast<double>(j) / q)));
    return p;
  }

  double operator()(std::size_t x) const { return values[x]; }
  double norm() const {
    double m = 0;
    for (double v : values) m = std::max(m, std::fabs(v));
    return m;
  }
  bool nonnegative() const {
    return std::all_of(values.begin(), values.end(), [](double v) { return v >= 0; });
  }
  bool is_zero() const {
    return std::all_of(values.begin(), values.end(), [](double v) { return v == 0; });
  }
  /// max{|phi(x) - phi(y)| : d(x,y) < eps}
  double modulus(const FiniteGSystem& sys, double eps) const {
    double m = 0;
    for (std::size_t i = 0; i < sys.size(); ++i)
      for (std::size_t j = i + 1; j < sys.size(); ++j)
        if (sys.distance(i, j) < eps) m = std::max(m, std::fabs(values[i] - values[j]));
    return m;
  }
  std::vector<double> modulus_table(const FiniteGSystem& sys, const std::vector<double>& eps_grid) const {
    std::vector<double> out;
    for (double e : eps_grid) out.push_back(modulus(sys, e));
    return out;
  }
};

/// S_{F,phi}(x) = sum_{g in F} phi(gx)
inline double birkhoff_sum(const FiniteGSystem& sys, const Potential& phi, const FinitePatch& patch, std::size_t x) {
  double s = 0;
  for (const auto& g : patch) s += phi(sys.apply(g, static_cast<std::uint32_t>(x)));
  return s;
}

inline std::vector<double> birkhoff_sums(const std::vector<Permutation>& actions, const Potential& phi) {
  if (actions.empty()) return {};
  std::vector<double> out(actions.front().size(), 0.0);
  for (const auto& perm : actions)
    for (std::size_t x = 0; x < out.size(); ++x) out[x] += phi(perm[x]);
  return out;
}

inline std::vector<double> birkhoff_sums(const FiniteGSystem& sys, const Potential& phi, const FinitePatch& patch) {
  return birkhoff_sums(sys.patch_actions(patch), phi);
}

// ------------------------------------------------------- dynamical metrics

/// Materialised d_F(x,y) = max_{g in F} d(gx, gy).
struct DynMetric {
  std::size_t n = 0;
  std::vector<double> matrix;
  bool is_ultrametric = false;

  std::size_t size() const { return n; }
  bool ultrametric() const { return is_ultrametric; }
  double operator()(std::size_t i, std::size_t j) const { return matrix[i * n + j]; }
};

/// d_F evaluated on demand; used when an N x N matrix is too large to keep.
class LazyDynMetric {
 public:
  LazyDynMetric(const FiniteGSystem& sys, const FinitePatch& patch)
      : sys_(&sys), actions_(sys.patch_actions(patch)) {}
  std::size_t size() const { return sys_->size(); }
  bool ultrametric() const { return sys_->ultrametric(); }
  double operator()(std::size_t i, std::size_t j) const {
    double m = 0;
    for (const auto& a : actions_) m = std::max(m, sys_->distance(a[i], a[j]));
    return m;
  }

 private:
  const FiniteGSystem* sys_;
  std::vector<Permutation> actions_;
};

inline DynMetric dyn_metric(const FiniteGSystem& sys, const FinitePatch& patch) {
  const auto actions = sys.patch_actions(patch);
  DynMetric dm;
  dm.n = sys.size();
  dm.is_ultrametric = sys.ultrametric();
  dm.matrix.assign(dm.n * dm.n, 0.0);
  for (std::size_t i = 0; i < dm.n; ++i)
    for (std::size_t j = i + 1; j < dm.n; ++j) {
      double m = 0;
      for (const auto& a : actions) m = std::max(m, sys.distance(a[i], a[j]));
      dm.matrix[i * dm.n + j] = dm.matrix[j * dm.n + i] = m;
    }
  return dm;
}

// ------------------------------------------------------------ serialization

inline nlohmann::json system_to_json(const SystemData& data) {
  nlohmann::json j;
  j["format"] = "scalepress-system/1";
  j["points"] = data.points;
  j["metric"] = data.metric;
  j["generators"] = data.generator_maps;
  j["labels"] = data.labels;
  if (!data.words.empty()) j["words"] = data.words;
  return j;
}

inline SystemData system_data_from_json(const nlohmann::json& j) {
  SystemData data;
  try {
    data.points = j.at("points").get<std::size_t>();
    data.metric = j.at("metric").get<std::vector<double>>();
    data.generator_maps = j.at("generators").get<std::vector<Permutation>>();
    if (j.contains("labels")) data.labels = j.at("labels").get<std::vector<std::string>>();
    if (j.contains("words")) data.words = j.at("words").get<std::vector<std::vector<int>>>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidSystem(std::string("malformed system document: ") + e.what());
  }
  return data;
}

}  // namespace scalepress
