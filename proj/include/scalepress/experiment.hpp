#pragma once

// Config-driven sweeps: validation, cell scheduling on a worker pool, patch
// and window caches, CSV/JSON outputs, the brute-force cross-check and the
// plain-text report.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "scalepress/certified.hpp"
#include "scalepress/error.hpp"
#include "scalepress/group.hpp"
#include "scalepress/measure.hpp"
#include "scalepress/oracle.hpp"
#include "scalepress/pressure.hpp"
#include "scalepress/pseudo.hpp"
#include "scalepress/rational.hpp"
#include "scalepress/scale.hpp"
#include "scalepress/solver.hpp"
#include "scalepress/system.hpp"

namespace scalepress::experiment {

using nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kCsvSchema = "scalepress-results/1";
inline const std::vector<std::string> kCsvColumns = {"system_id", "quantity", "n",      "patch_size",
                                                     "eps",       "s_kind",   "lower",  "upper",
                                                     "method",    "per_site", "scaled", "wall_ms"};

struct Caps {
  std::size_t size = kDefaultSystemSizeCap;
  std::uint64_t nodes = 10'000'000;
  double wall_ms = 30'000;
  std::size_t exact_points = 256;
  std::uint64_t enumeration = kDefaultEnumerationCap;
};

struct Experiment {
  std::string id;
  FiniteGSystem system;
  FolnerSequence folner;
  ScaleFunction scale = ScaleFunction::constant_one();
  Potential phi;
  std::vector<double> eps, eps_pseudo, delta;
  std::vector<Quantity> quantities;
  std::vector<InvariantMeasure> measures;

  bool wants(Quantity q) const { return std::find(quantities.begin(), quantities.end(), q) != quantities.end(); }
};

struct Config {
  std::vector<Experiment> experiments;
  solver::Mode mode = solver::Mode::Exact;
  Caps caps;
  std::uint64_t seed = 0;
  std::string output = "scalepress-out";
  json effective;  // the document after command-line overrides; hashed into the manifest
};

struct Overrides {
  std::optional<solver::Mode> mode;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output;
};

inline std::optional<solver::Mode> parse_mode(const std::string& s) {
  if (s == "exact") return solver::Mode::Exact;
  if (s == "greedy") return solver::Mode::Greedy;
  if (s == "auto") return solver::Mode::Auto;
  return std::nullopt;
}

/// Shortest decimal that round-trips for typical grid values (0.1 -> "0.1").
inline std::string format_number(double v) {
  char buf[64];
  for (int prec = 6; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) return buf;
  }
  return buf;
}

inline std::string format_value(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) h = (h ^ c) * 1099511628211ULL;
  return h;
}

inline std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// ------------------------------------------------------------- validation

class ConfigErrors {
 public:
  void add(const std::string& field, const std::string& message) { items_.push_back(field + ": " + message); }
  bool empty() const { return items_.empty(); }
  const std::vector<std::string>& items() const { return items_; }
  void throw_if_any() const {
    if (items_.empty()) return;
    std::string msg = "invalid config (" + std::to_string(items_.size()) + " problem" +
                      (items_.size() == 1 ? "" : "s") + "):";
    for (const auto& i : items_) msg += "\n  " + i;
    throw InvalidArgument(msg);
  }

 private:
  std::vector<std::string> items_;
};

namespace detail {

inline std::optional<double> number_at(const json& j, const std::string& key, const std::string& field,
                                       ConfigErrors& errors) {
  if (!j.contains(key)) {
    errors.add(field + "." + key, "missing");
    return std::nullopt;
  }
  if (!j.at(key).is_number()) {
    errors.add(field + "." + key, "must be a number");
    return std::nullopt;
  }
  return j.at(key).get<double>();
}

inline std::optional<long long> integer_at(const json& j, const std::string& key, const std::string& field,
                                           ConfigErrors& errors) {
  if (!j.contains(key)) {
    errors.add(field + "." + key, "missing");
    return std::nullopt;
  }
  if (!j.at(key).is_number_integer()) {
    errors.add(field + "." + key, "must be an integer");
    return std::nullopt;
  }
  return j.at(key).get<long long>();
}

inline std::vector<double> number_list(const json& j, const std::string& key, const std::string& field,
                                       ConfigErrors& errors) {
  std::vector<double> out;
  if (!j.contains(key)) return out;
  const auto& arr = j.at(key);
  if (!arr.is_array()) {
    errors.add(field + "." + key, "must be a list of numbers");
    return out;
  }
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number()) errors.add(field + "." + key + "[" + std::to_string(i) + "]", "must be a number");
    else out.push_back(arr[i].get<double>());
  }
  return out;
}

inline std::optional<FiniteGSystem> build_system(const json& node, const std::string& field,
                                                 const std::filesystem::path& base_dir, std::uint64_t seed,
                                                 std::size_t size_cap, ConfigErrors& errors) {
  if (!node.is_object()) {
    errors.add(field, "must be an object");
    return std::nullopt;
  }
  try {
    if (node.contains("file")) {
      const std::filesystem::path path = base_dir / node.at("file").get<std::string>();
      std::ifstream in(path);
      if (!in) {
        errors.add(field + ".file", "cannot open " + path.string());
        return std::nullopt;
      }
      return FiniteGSystem(system_data_from_json(json::parse(in)), size_cap);
    }
    const std::string builder = node.value("builder", "");
    if (builder == "one_point") return build_one_point();
    if (builder == "rotation") {
      auto q = integer_at(node, "q", field, errors);
      if (!q) return std::nullopt;
      if (*q < 1) {
        errors.add(field + ".q", "must be >= 1");
        return std::nullopt;
      }
      return build_rotation(static_cast<int>(*q));
    }
    if (builder == "product_rotation") {
      auto q1 = integer_at(node, "q1", field, errors), q2 = integer_at(node, "q2", field, errors);
      if (!q1 || !q2) return std::nullopt;
      if (*q1 < 1 || *q2 < 1) {
        errors.add(field, "q1 and q2 must be >= 1");
        return std::nullopt;
      }
      return build_product_rotation(static_cast<int>(*q1), static_cast<int>(*q2));
    }
    if (builder == "periodic_subshift") {
      auto k = integer_at(node, "alphabet", field, errors), p = integer_at(node, "period", field, errors);
      if (!k || !p) return std::nullopt;
      const double base = node.value("metric_base", 0.5);
      return build_periodic_subshift(static_cast<int>(*k), static_cast<int>(*p), base, size_cap);
    }
    if (builder == "random") {
      auto pts = integer_at(node, "points", field, errors);
      if (!pts) return std::nullopt;
      if (*pts < 1 || static_cast<std::size_t>(*pts) > size_cap) {
        errors.add(field + ".points", "must be in [1, size cap]");
        return std::nullopt;
      }
      const auto s = node.contains("seed") ? node.at("seed").get<std::uint64_t>() : seed;
      return build_random(static_cast<std::size_t>(*pts), s);
    }
    errors.add(field + ".builder", "unknown builder '" + builder +
                                       "' (one_point, rotation, product_rotation, periodic_subshift, random or file)");
  } catch (const json::exception& e) {
    errors.add(field, std::string("malformed: ") + e.what());
  } catch (const std::exception& e) {
    errors.add(field, e.what());
  }
  return std::nullopt;
}

inline std::optional<ScaleFunction> build_scale(const json& node, const std::string& field, ConfigErrors& errors) {
  if (!node.is_object()) {
    errors.add(field, "must be an object");
    return std::nullopt;
  }
  const std::string kind = node.value("kind", "");
  try {
    if (kind == "constant_one") return ScaleFunction::constant_one();
    if (kind == "neg_log") return ScaleFunction::neg_log();
    if (kind == "power") {
      auto a = number_at(node, "a", field, errors);
      if (!a) return std::nullopt;
      return ScaleFunction::power(*a);
    }
    if (kind == "table") return ScaleFunction::table(node.at("points").get<std::vector<std::pair<double, double>>>());
    errors.add(field + ".kind", "unknown scale kind '" + kind + "' (constant_one, neg_log, power, table)");
  } catch (const json::exception& e) {
    errors.add(field, std::string("malformed: ") + e.what());
  } catch (const std::exception& e) {
    errors.add(field, e.what());
  }
  return std::nullopt;
}

inline std::optional<Potential> build_potential(const json& node, const FiniteGSystem& sys, const std::string& field,
                                                ConfigErrors& errors) {
  if (!node.is_object()) {
    errors.add(field, "must be an object");
    return std::nullopt;
  }
  const std::string kind = node.value("kind", "");
  try {
    if (kind == "zero") return Potential::zero(sys);
    if (kind == "constant") {
      auto c = number_at(node, "c", field, errors);
      if (!c) return std::nullopt;
      return Potential::constant(sys, *c);
    }
    if (kind == "symbol_at_origin") return Potential::symbol_at_origin(sys);
    if (kind == "rotation_cosine") return Potential::rotation_cosine(sys);
    if (kind == "values") {
      Potential p{node.at("values").get<std::vector<double>>()};
      if (p.values.size() != sys.size()) {
        errors.add(field + ".values", "needs one value per point (" + std::to_string(sys.size()) + ")");
        return std::nullopt;
      }
      return p;
    }
    errors.add(field + ".kind",
               "unknown potential kind '" + kind + "' (zero, constant, symbol_at_origin, rotation_cosine, values)");
  } catch (const json::exception& e) {
    errors.add(field, std::string("malformed: ") + e.what());
  } catch (const std::exception& e) {
    errors.add(field, e.what());
  }
  return std::nullopt;
}

inline void parse_experiment(const json& doc, const std::string& field, const std::filesystem::path& base_dir,
                             const Config& cfg, ConfigErrors& errors, std::vector<Experiment>& out) {
  if (!doc.is_object()) {
    errors.add(field, "must be an object");
    return;
  }
  Experiment ex;
  ex.id = doc.value("id", "");
  if (ex.id.empty()) errors.add(field + ".id", "missing");
  if (ex.id.find_first_of("#,\" \n") != std::string::npos)
    errors.add(field + ".id", "must not contain '#', ',', quotes or whitespace");
  for (const auto& other : out)
    if (other.id == ex.id) errors.add(field + ".id", "duplicate id '" + ex.id + "'");

  std::optional<FiniteGSystem> sys;
  if (!doc.contains("system")) errors.add(field + ".system", "missing");
  else sys = build_system(doc.at("system"), field + ".system", base_dir, cfg.seed, cfg.caps.size, errors);

  std::optional<ScaleFunction> scale = ScaleFunction::constant_one();
  if (doc.contains("scale")) scale = build_scale(doc.at("scale"), field + ".scale", errors);

  // Quantities.
  if (!doc.contains("quantities") || !doc.at("quantities").is_array() || doc.at("quantities").empty()) {
    errors.add(field + ".quantities", "must be a nonempty list");
  } else {
    const auto& qs = doc.at("quantities");
    for (std::size_t i = 0; i < qs.size(); ++i) {
      auto q = qs[i].is_string() ? parse_quantity(qs[i].get<std::string>()) : std::nullopt;
      if (!q) errors.add(field + ".quantities[" + std::to_string(i) + "]", "unknown quantity");
      else if (std::find(ex.quantities.begin(), ex.quantities.end(), *q) == ex.quantities.end())
        ex.quantities.push_back(*q);
    }
  }

  // Grids.
  ex.eps = number_list(doc, "eps", field, errors);
  ex.eps_pseudo = number_list(doc, "eps_pseudo", field, errors);
  ex.delta = number_list(doc, "delta", field, errors);
  if (ex.eps.empty()) errors.add(field + ".eps", "must be a nonempty list");
  const double diam = sys ? sys->diameter() : std::numeric_limits<double>::infinity();
  const bool constant_scale = scale && scale->is_constant_one();
  for (std::size_t i = 0; i < ex.eps.size(); ++i) {
    const double e = ex.eps[i];
    const std::string f = field + ".eps[" + std::to_string(i) + "]";
    if (!(e > 0)) errors.add(f, "must be positive (got " + format_number(e) + ")");
    else if (diam > 0 && e > diam) errors.add(f, "must not exceed the system diameter " + format_number(diam));
    else if (!constant_scale && !(e < 1)) errors.add(f, "must lie in (0,1) for a non-constant scale");
  }
  for (std::size_t i = 0; i < ex.delta.size(); ++i)
    if (!(ex.delta[i] > 0 && ex.delta[i] < 1))
      errors.add(field + ".delta[" + std::to_string(i) + "]",
                 "must lie in (0,1) (got " + format_number(ex.delta[i]) + ")");
  for (std::size_t i = 0; i < ex.eps_pseudo.size(); ++i)
    if (!(ex.eps_pseudo[i] > 0))
      errors.add(field + ".eps_pseudo[" + std::to_string(i) + "]", "must be positive");
  if ((ex.wants(Quantity::Nmu) || ex.wants(Quantity::Pmu)) && ex.delta.empty())
    errors.add(field + ".delta", "required for Nmu/Pmu");
  if ((ex.wants(Quantity::POP) || ex.wants(Quantity::POQ)) && ex.eps_pseudo.empty())
    errors.add(field + ".eps_pseudo", "required for POP/POQ");

  // Folner prefix.
  long long max_n = 0;
  std::vector<long long> labels;
  if (!doc.contains("folner") || !doc.at("folner").is_object()) {
    errors.add(field + ".folner", "missing");
  } else {
    const auto& fo = doc.at("folner");
    if (fo.value("kind", "box") != "box") errors.add(field + ".folner.kind", "only 'box' is supported");
    if (auto m = integer_at(fo, "max_n", field + ".folner", errors)) {
      max_n = *m;
      if (max_n < 1) errors.add(field + ".folner.max_n", "must be >= 1");
    }
    if (fo.contains("n")) {
      if (!fo.at("n").is_array() || fo.at("n").empty()) errors.add(field + ".folner.n", "must be a nonempty list");
      else
        for (std::size_t i = 0; i < fo.at("n").size(); ++i) {
          const auto& v = fo.at("n")[i];
          if (!v.is_number_integer() || v.get<long long>() < 1 || v.get<long long>() > max_n)
            errors.add(field + ".folner.n[" + std::to_string(i) + "]", "must be an integer in [1, max_n]");
          else labels.push_back(v.get<long long>());
        }
    }
  }
  if (doc.contains("dimension") && sys && doc.at("dimension") != sys->dimension())
    errors.add(field + ".dimension", "does not match the system's generator count");

  if (!sys || !scale) return;
  std::optional<Potential> phi = Potential::zero(*sys);
  if (doc.contains("potential")) phi = build_potential(doc.at("potential"), *sys, field + ".potential", errors);
  if (!phi || max_n < 1) return;

  ex.system = std::move(*sys);
  ex.scale = *scale;
  ex.phi = std::move(*phi);
  const auto group = GroupModel::lattice(ex.system.dimension());
  const auto full = box_sequence(group, max_n);
  if (labels.empty()) ex.folner = full;
  else {
    std::sort(labels.begin(), labels.end());
    labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
    for (auto n : labels) {
      ex.folner.patches.push_back(full.at_label(n));
      ex.folner.labels.push_back(n);
    }
  }
  ex.measures = ergodic_measures(ex.system);
  std::sort(ex.eps.begin(), ex.eps.end());
  ex.eps.erase(std::unique(ex.eps.begin(), ex.eps.end()), ex.eps.end());
  std::sort(ex.eps_pseudo.begin(), ex.eps_pseudo.end());
  ex.eps_pseudo.erase(std::unique(ex.eps_pseudo.begin(), ex.eps_pseudo.end()), ex.eps_pseudo.end());
  std::sort(ex.delta.begin(), ex.delta.end());
  ex.delta.erase(std::unique(ex.delta.begin(), ex.delta.end()), ex.delta.end());
  out.push_back(std::move(ex));
}

}  // namespace detail

/// Validates a config document; every problem is collected and reported at once.
inline Config parse_config(json doc, const std::filesystem::path& base_dir = ".", const Overrides& ov = {}) {
  ConfigErrors errors;
  Config cfg;
  if (!doc.is_object()) {
    errors.add("(root)", "config must be a JSON object");
    errors.throw_if_any();
  }
  if (ov.mode) doc["mode"] = to_string(*ov.mode);
  if (ov.seed) doc["seed"] = *ov.seed;
  if (ov.output) doc["output"] = *ov.output;
  if (doc.contains("mode")) {
    auto m = doc.at("mode").is_string() ? parse_mode(doc.at("mode").get<std::string>()) : std::nullopt;
    if (!m) errors.add("mode", "must be one of exact, greedy, auto");
    else cfg.mode = *m;
  }
  if (doc.contains("seed")) {
    if (!doc.at("seed").is_number_unsigned() && !(doc.at("seed").is_number_integer() && doc.at("seed").get<long long>() >= 0))
      errors.add("seed", "must be a nonnegative integer");
    else cfg.seed = doc.at("seed").get<std::uint64_t>();
  }
  if (doc.contains("output")) {
    if (!doc.at("output").is_string()) errors.add("output", "must be a path string");
    else cfg.output = doc.at("output").get<std::string>();
  }
  if (doc.contains("caps")) {
    const auto& c = doc.at("caps");
    if (!c.is_object()) errors.add("caps", "must be an object");
    else {
      auto positive = [&](const char* key, auto& slot) {
        if (!c.contains(key)) return;
        if (!c.at(key).is_number() || !(c.at(key).get<double>() > 0)) errors.add(std::string("caps.") + key, "must be positive");
        else slot = static_cast<std::remove_reference_t<decltype(slot)>>(c.at(key).get<double>());
      };
      positive("size", cfg.caps.size);
      positive("nodes", cfg.caps.nodes);
      positive("wall_ms", cfg.caps.wall_ms);
      positive("exact_points", cfg.caps.exact_points);
      positive("enumeration", cfg.caps.enumeration);
    }
  }
  if (doc.contains("experiments")) {
    const auto& arr = doc.at("experiments");
    if (!arr.is_array() || arr.empty()) errors.add("experiments", "must be a nonempty list");
    else
      for (std::size_t i = 0; i < arr.size(); ++i)
        detail::parse_experiment(arr[i], "experiments[" + std::to_string(i) + "]", base_dir, cfg, errors,
                                 cfg.experiments);
  } else {
    detail::parse_experiment(doc, "(root)", base_dir, cfg, errors, cfg.experiments);
  }
  errors.throw_if_any();
  cfg.effective = std::move(doc);
  return cfg;
}

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw IoError("cannot parse " + path.string() + ": " + e.what());
  }
}

inline Config load_config(const std::filesystem::path& path, const Overrides& ov = {}) {
  return parse_config(read_json_file(path), path.parent_path(), ov);
}

inline std::string config_hash(const Config& cfg) { return hex(fnv1a(cfg.effective.dump())); }

// ------------------------------------------------------------------ cells

struct Task {
  std::size_t experiment = 0;
  Quantity quantity = Quantity::Q;
  std::size_t patch = 0;  // index into the experiment's Folner prefix
  double eps = 0;
  std::size_t measure = 0;
  double delta = 0;
  double eps_pseudo = 0;
};

struct Row {
  std::string system_id;
  Quantity quantity = Quantity::Q;
  std::int64_t n = 0;
  std::size_t patch_size = 0;
  double eps = 0;
  std::string s_kind;
  double lower = 0, upper = 0;
  Method method = Method::Exact;
  double per_site = 0, scaled = 0, wall_ms = 0;
  double log_lower = 0, log_upper = 0;  // kept in memory for analysis; not written
};

inline std::string system_id(const Experiment& ex, const Task& t) {
  std::string id = ex.id;
  if (t.quantity == Quantity::Nmu || t.quantity == Quantity::Pmu)
    id += "#mu" + std::to_string(t.measure) + "#delta" + format_number(t.delta);
  if (t.quantity == Quantity::POP || t.quantity == Quantity::POQ) id += "#ep" + format_number(t.eps_pseudo);
  return id;
}

inline std::string describe(const Config& cfg, const Task& t) {
  const auto& ex = cfg.experiments[t.experiment];
  return system_id(ex, t) + "/" + to_string(t.quantity) + "/n=" + std::to_string(ex.folner.labels[t.patch]) +
         "/eps=" + format_number(t.eps);
}

inline std::vector<Task> plan_tasks(const Config& cfg) {
  std::vector<Task> tasks;
  for (std::size_t e = 0; e < cfg.experiments.size(); ++e) {
    const auto& ex = cfg.experiments[e];
    for (std::size_t k = 0; k < ex.folner.length(); ++k)
      for (double eps : ex.eps)
        for (auto q : ex.quantities) {
          Task t{e, q, k, eps};
          if (q == Quantity::Nmu || q == Quantity::Pmu) {
            for (std::size_t m = 0; m < ex.measures.size(); ++m)
              for (double d : ex.delta) {
                t.measure = m;
                t.delta = d;
                tasks.push_back(t);
              }
          } else if (q == Quantity::POP || q == Quantity::POQ) {
            for (double ep : ex.eps_pseudo) {
              t.eps_pseudo = ep;
              tasks.push_back(t);
            }
          } else {
            tasks.push_back(t);
          }
        }
  }
  return tasks;
}

/// Memoised shared values; concurrent requests for one key compute it once.
template <class Key, class Value>
class Memo {
 public:
  explicit Memo(bool enabled) : enabled_(enabled) {}
  template <class Make>
  Value get(const Key& key, Make&& make) {
    if (!enabled_) {
      ++misses_;
      return make();
    }
    std::promise<Value> promise;
    std::shared_future<Value> fut;
    bool owner = false;
    {
      std::lock_guard lock(mu_);
      auto it = map_.find(key);
      if (it != map_.end()) {
        ++hits_;
        fut = it->second;
      } else {
        ++misses_;
        owner = true;
        fut = promise.get_future().share();
        map_.emplace(key, fut);
      }
    }
    if (owner) {
      try {
        promise.set_value(make());
      } catch (...) {
        promise.set_exception(std::current_exception());
      }
    }
    return fut.get();
  }
  std::size_t hits() const { return hits_; }
  std::size_t misses() const { return misses_; }

 private:
  bool enabled_;
  std::mutex mu_;
  std::map<Key, std::shared_future<Value>> map_;
  std::atomic<std::size_t> hits_{0}, misses_{0};
};

inline std::uint64_t potential_hash(const Potential& phi) {
  std::uint64_t h = 1469598103934665603ULL;
  const auto* b = reinterpret_cast<const unsigned char*>(phi.values.data());
  for (std::size_t i = 0; i < phi.values.size() * sizeof(double); ++i) h = (h ^ b[i]) * 1099511628211ULL;
  return h;
}

struct RunOptions {
  unsigned jobs = 1;
  bool cache = true;
  bool timing = false;  // write measured wall_ms; otherwise 0 so reruns are byte-identical
};

struct CellStatus {
  std::string cell;
  std::string status;  // "ok", "greedy", or "error: ..."
  double wall_ms = 0;
};

struct RunResult {
  std::vector<Row> rows;
  std::vector<CellStatus> cells;
  std::size_t cache_hits = 0, cache_misses = 0;
  double wall_ms = 0;
  bool all_ok() const {
    return std::all_of(cells.begin(), cells.end(), [](const auto& c) { return c.status.rfind("error", 0) != 0; });
  }
};

class Runner {
 public:
  Runner(const Config& cfg, RunOptions opt)
      : cfg_(cfg), opt_(opt), patches_(opt.cache), windows_(opt.cache) {}

  solver::Options solver_options() const {
    solver::Options o;
    o.mode = cfg_.mode;
    o.node_cap = cfg_.caps.nodes;
    o.exact_size_cap = cfg_.caps.exact_points;
    o.deadline = solver::Clock::now() + std::chrono::microseconds(static_cast<std::int64_t>(cfg_.caps.wall_ms * 1000));
    return o;
  }

  std::shared_ptr<const PatchContext> patch(const Task& t) {
    const auto& ex = cfg_.experiments[t.experiment];
    const auto label = ex.folner.labels[t.patch];
    return patches_.get({ex.system.hash(), potential_hash(ex.phi), label}, [&] {
      return std::make_shared<const PatchContext>(make_patch_context(ex.system, ex.folner.patches[t.patch], label, ex.phi));
    });
  }

  std::shared_ptr<const std::vector<PseudoOrbitWindow>> windows(const Task& t) {
    const auto& ex = cfg_.experiments[t.experiment];
    const auto label = ex.folner.labels[t.patch];
    return windows_.get({ex.system.hash(), label, t.eps_pseudo}, [&] {
      const auto gens = default_generators(ex.system);
      const auto W = constraint_window(ex.folner.patches[t.patch], gens);
      return std::make_shared<const std::vector<PseudoOrbitWindow>>(
          enumerate_pseudo_orbits(ex.system, gens, W, t.eps_pseudo, cfg_.caps.enumeration));
    });
  }

  CertifiedValue evaluate(const Task& t) {
    const auto& ex = cfg_.experiments[t.experiment];
    const auto opts = solver_options();
    const auto& F = ex.folner.patches[t.patch];
    switch (t.quantity) {
      case Quantity::Nmu: return dyn_ball_cover_count(*patch(t)->metric, ex.measures[t.measure], t.eps, t.delta, opts);
      case Quantity::Pmu: {
        const auto ctx = patch(t);
        return measure_pressure(*ctx->metric, ctx->sums, ex.measures[t.measure], t.eps, t.delta, ex.scale, opts);
      }
      case Quantity::POP: return po_separated(ex.system, *windows(t), F, t.eps, ex.phi, ex.scale, opts);
      case Quantity::POQ: return po_spanning(ex.system, *windows(t), F, t.eps, ex.phi, ex.scale, opts);
      default: return topological_cell(*patch(t), t.quantity, t.eps, ex.scale, opts);
    }
  }

  RunResult run() {
    const auto start = std::chrono::steady_clock::now();
    const auto tasks = plan_tasks(cfg_);
    std::vector<std::optional<Row>> rows(tasks.size());
    std::vector<CellStatus> status(tasks.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i = next++; i < tasks.size(); i = next++) {
        const auto& t = tasks[i];
        const auto& ex = cfg_.experiments[t.experiment];
        const auto t0 = std::chrono::steady_clock::now();
        status[i].cell = describe(cfg_, t);
        try {
          auto v = evaluate(t);
          const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
          auto pr = make_row(ex.folner.labels[t.patch], ex.folner.patches[t.patch].size(), t.eps, t.quantity, v, ex.scale);
          Row r;
          r.system_id = system_id(ex, t);
          r.quantity = t.quantity;
          r.n = pr.n;
          r.patch_size = pr.patch_size;
          r.eps = t.eps;
          r.s_kind = to_string(ex.scale.kind());
          r.lower = v.lower();
          r.upper = v.upper();
          r.log_lower = v.log_lower;
          r.log_upper = v.log_upper;
          r.method = v.method;
          r.per_site = pr.per_site;
          r.scaled = pr.scaled;
          r.wall_ms = opt_.timing ? ms : 0.0;
          rows[i] = std::move(r);
          status[i].status = v.method == Method::Greedy ? "greedy" : "ok";
          for (const auto& w : v.warnings) status[i].status += "; " + w;
          status[i].wall_ms = ms;
        } catch (const std::exception& e) {
          status[i].status = std::string("error: ") + e.what();
        }
      }
    };
    const unsigned jobs = std::max(1u, opt_.jobs);
    if (jobs == 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
      for (auto& th : pool) th.join();
    }
    RunResult res;
    for (auto& r : rows)
      if (r) res.rows.push_back(std::move(*r));
    sort_rows(res.rows);
    res.cells = std::move(status);
    std::sort(res.cells.begin(), res.cells.end(), [](const auto& a, const auto& b) { return a.cell < b.cell; });
    res.cache_hits = patches_.hits() + windows_.hits();
    res.cache_misses = patches_.misses() + windows_.misses();
    res.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return res;
  }

  static void sort_rows(std::vector<Row>& rows) {
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
      return std::tie(a.system_id, a.quantity, a.n, a.eps) < std::tie(b.system_id, b.quantity, b.n, b.eps);
    });
  }

 private:
  const Config& cfg_;
  RunOptions opt_;
  Memo<std::tuple<std::uint64_t, std::uint64_t, std::int64_t>, std::shared_ptr<const PatchContext>> patches_;
  Memo<std::tuple<std::uint64_t, std::int64_t, double>, std::shared_ptr<const std::vector<PseudoOrbitWindow>>> windows_;
};

// ---------------------------------------------------------------- outputs

inline std::string csv_text(const std::vector<Row>& rows) {
  std::ostringstream out;
  out << "# schema: " << kCsvSchema << "\n";
  for (std::size_t i = 0; i < kCsvColumns.size(); ++i) out << (i ? "," : "") << kCsvColumns[i];
  out << "\n";
  for (const auto& r : rows) {
    out << r.system_id << ',' << to_string(r.quantity) << ',' << r.n << ',' << r.patch_size << ','
        << format_number(r.eps) << ',' << r.s_kind << ',' << format_value(r.lower) << ',' << format_value(r.upper)
        << ',' << to_string(r.method) << ',' << format_value(r.per_site) << ',' << format_value(r.scaled) << ','
        << format_value(r.wall_ms) << "\n";
  }
  return out.str();
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_double(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::invalid_argument(s);
  return v;
}

inline std::vector<Row> parse_csv(const std::string& text, const std::string& path) {
  std::vector<Row> rows;
  std::istringstream in(text);
  std::string line;
  bool header = false;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto f = split_csv_line(line);
    if (!header) {
      if (f != kCsvColumns) throw IoError(path + ": unexpected CSV header");
      header = true;
      continue;
    }
    if (f.size() != kCsvColumns.size()) throw IoError(path + ":" + std::to_string(lineno) + ": wrong field count");
    try {
      Row r;
      r.system_id = f[0];
      auto q = parse_quantity(f[1]);
      if (!q) throw std::invalid_argument(f[1]);
      r.quantity = *q;
      r.n = std::stoll(f[2]);
      r.patch_size = std::stoull(f[3]);
      r.eps = parse_double(f[4]);
      r.s_kind = f[5];
      r.lower = parse_double(f[6]);
      r.upper = parse_double(f[7]);
      r.method = f[8] == "greedy" ? Method::Greedy : f[8] == "oracle" ? Method::Oracle : Method::Exact;
      r.per_site = parse_double(f[9]);
      r.scaled = parse_double(f[10]);
      r.wall_ms = parse_double(f[11]);
      r.log_lower = std::log(r.lower);
      r.log_upper = r.per_site * static_cast<double>(r.patch_size);
      rows.push_back(std::move(r));
    } catch (const std::exception&) {
      throw IoError(path + ":" + std::to_string(lineno) + ": malformed row");
    }
  }
  if (!header) throw IoError(path + ": no CSV header");
  return rows;
}

// --------------------------------------------------------------- analysis

/// Data per (experiment, n, eps) that the inequality checks need beyond the rows.
struct CellAux {
  std::int64_t n = 0;
  std::size_t patch_size = 0;
  double eps = 0;
  double log_max_weight = 0;  // log max_x exp(s(eps) S_F phi(x))
  double modulus = 0;         // delta(eps)
  double s_eps = 1;           // 0 when the potential vanishes (s is then irrelevant)
};

inline std::vector<CellAux> cell_aux(const Experiment& ex) {
  std::vector<CellAux> out;
  const bool flat = ex.phi.is_zero();
  for (std::size_t k = 0; k < ex.folner.length(); ++k) {
    const auto sums = birkhoff_sums(ex.system, ex.phi, ex.folner.patches[k]);
    for (double eps : ex.eps) {
      CellAux a;
      a.n = ex.folner.labels[k];
      a.patch_size = ex.folner.patches[k].size();
      a.eps = eps;
      a.s_eps = flat ? 0.0 : scale_factor(ex.scale, eps);
      const auto lw = log_weights(sums, ex.scale, eps);
      a.log_max_weight = *std::max_element(lw.begin(), lw.end());
      a.modulus = ex.phi.modulus(ex.system, eps);
      out.push_back(a);
    }
  }
  return out;
}

inline json aux_to_json(const std::vector<CellAux>& aux) {
  json arr = json::array();
  for (const auto& a : aux)
    arr.push_back({{"n", a.n}, {"patch_size", a.patch_size}, {"eps", a.eps}, {"log_max_weight", a.log_max_weight},
                   {"modulus", a.modulus}, {"s_eps", a.s_eps}});
  return arr;
}

inline std::vector<CellAux> aux_from_json(const json& arr) {
  std::vector<CellAux> out;
  for (const auto& j : arr)
    out.push_back({j.at("n").get<std::int64_t>(), j.at("patch_size").get<std::size_t>(), j.at("eps").get<double>(),
                   j.at("log_max_weight").get<double>(), j.at("modulus").get<double>(), j.at("s_eps").get<double>()});
  return out;
}

struct Check {
  explicit Check(std::string n) : name(std::move(n)) {}
  std::string name;
  std::size_t checked = 0, violations = 0;
  std::vector<std::string> examples;
  void record(bool ok, const std::string& where) {
    ++checked;
    if (!ok) {
      ++violations;
      if (examples.size() < 5) examples.push_back(where);
    }
  }
  std::string verdict() const { return checked == 0 ? "n/a" : violations == 0 ? "pass" : "FAIL"; }
};

struct ExperimentAnalysis {
  std::string id;
  std::map<std::string, double> surrogates;  // SP, P, p, q, sep, spa, sp(delta), PSP, POP
  std::map<std::string, std::vector<double>> successive_differences;
  std::vector<Check> checks;
  std::vector<std::string> greedy_cells;
};

namespace detail {

inline std::string base_id(const std::string& system_id) { return system_id.substr(0, system_id.find('#')); }

inline std::string qualifier(const std::string& system_id, const std::string& tag) {
  const auto pos = system_id.find("#" + tag);
  if (pos == std::string::npos) return "";
  const auto start = pos + 1 + tag.size();
  return system_id.substr(start, system_id.find('#', start) - start);
}

inline std::vector<ProfileRow> profile_rows(const std::vector<const Row*>& rows) {
  std::vector<ProfileRow> out;
  for (const auto* r : rows) {
    ProfileRow p;
    p.n = r->n;
    p.patch_size = r->patch_size;
    p.eps = r->eps;
    p.quantity = r->quantity;
    p.per_site = r->per_site;
    p.scaled = r->scaled;
    out.push_back(p);
  }
  return out;
}

}  // namespace detail

inline ExperimentAnalysis analyze(const std::string& id, const std::vector<Row>& all_rows,
                                  const std::vector<CellAux>& aux, const ScaleFunction& scale) {
  ExperimentAnalysis an;
  an.id = id;
  std::vector<const Row*> rows;
  for (const auto& r : all_rows)
    if (detail::base_id(r.system_id) == id) rows.push_back(&r);
  auto find = [&](Quantity q, std::int64_t n, double eps, const std::string& sid) -> const Row* {
    for (const auto* r : rows)
      if (r->quantity == q && r->n == n && r->eps == eps && r->system_id == sid) return r;
    return nullptr;
  };
  auto lv = [](const Row* r) { return r->per_site * static_cast<double>(r->patch_size); };
  for (const auto* r : rows)
    if (r->method == Method::Greedy)
      an.greedy_cells.push_back(r->system_id + "/" + to_string(r->quantity) + "/n=" + std::to_string(r->n) +
                                "/eps=" + format_number(r->eps) + " width=" + format_value(r->upper - r->lower));

  Check r1{"weighted_count_bound"}, r2{"zero_potential_counts"}, r3{"cell_chain"}, r4{"cover_gap"};
  for (const auto& a : aux) {
    const std::string where = "n=" + std::to_string(a.n) + " eps=" + format_number(a.eps);
    const Row *Q = find(Quantity::Q, a.n, a.eps, id), *P = find(Quantity::P, a.n, a.eps, id);
    const Row *p = find(Quantity::p, a.n, a.eps, id), *q = find(Quantity::q, a.n, a.eps, id);
    const Row *sep = find(Quantity::sep, a.n, a.eps, id), *spa = find(Quantity::spa, a.n, a.eps, id);
    if (Q && spa) r1.record(log_le(lv(Q), a.log_max_weight + lv(spa)), where + " Q");
    if (P && sep) r1.record(log_le(lv(P), a.log_max_weight + lv(sep)), where + " P");
    if (a.s_eps == 0 && Q && spa) r2.record(values_agree(lv(Q), lv(spa)), where + " Q=spa");
    if (a.s_eps == 0 && P && sep) r2.record(values_agree(lv(P), lv(sep)), where + " P=sep");
    if (Q && P && p) r3.record(log_le(lv(Q), lv(P)) && log_le(lv(P), lv(p)), where);
    if (p && q)
      r4.record(log_le(lv(p), static_cast<double>(a.patch_size) * a.modulus * a.s_eps + lv(q)), where);
  }
  an.checks = {r1, r2, r3, r4};

  std::vector<const Row*> plain;
  for (const auto* r : rows)
    if (r->system_id == id) plain.push_back(r);
  const auto prow = detail::profile_rows(plain);
  std::map<Quantity, Surrogate> sur;
  for (auto q : {Quantity::Q, Quantity::P, Quantity::p, Quantity::q, Quantity::sep, Quantity::spa}) {
    if (std::none_of(prow.begin(), prow.end(), [q](const auto& r) { return r.quantity == q; })) continue;
    sur.emplace(q, surrogate(prow, q, scale));
    an.surrogates[q == Quantity::Q ? "SP" : to_string(q)] = sur.at(q).estimate;
    an.surrogates[(q == Quantity::Q ? std::string("SP") : to_string(q)) + "_extrapolated"] =
        sur.at(q).extrapolated_estimate;
    for (std::size_t e = 0; e < sur.at(q).eps.size(); ++e)
      an.successive_differences[to_string(q) + "@eps=" + format_number(sur.at(q).eps[e])] =
          sur.at(q).successive_differences[e];
  }
  Check order{"surrogate_order"};
  if (sur.count(Quantity::Q) && sur.count(Quantity::P) && sur.count(Quantity::p) && sur.count(Quantity::q)) {
    double slack = 0;
    std::size_t taken = 0;
    std::map<double, double> mod;
    for (const auto& a : aux) mod[a.eps] = std::max(mod[a.eps], a.modulus);
    for (const auto& [eps, d] : mod)
      if (taken++ < 3) slack = std::max(slack, d);
    const double Qs = sur.at(Quantity::Q).estimate, Ps = sur.at(Quantity::P).estimate;
    const double ps = sur.at(Quantity::p).estimate, qs = sur.at(Quantity::q).estimate;
    order.record(log_le(Qs, Ps), "Q<=P");
    order.record(log_le(Ps, ps), "P<=p");
    order.record(log_le(ps, qs + slack), "p<=q+delta");
    an.surrogates["order_slack"] = slack;
  }
  an.checks.push_back(order);

  // Variational chain and sp.
  Check chain{"variational_chain"};
  std::map<std::string, std::map<std::string, std::vector<const Row*>>> by_delta;  // delta -> measure -> rows
  for (const auto* r : rows) {
    if (r->quantity != Quantity::Pmu) continue;
    by_delta[detail::qualifier(r->system_id, "delta")][detail::qualifier(r->system_id, "mu")].push_back(r);
    const Row *Q = find(Quantity::Q, r->n, r->eps, id), *P = find(Quantity::P, r->n, r->eps, id);
    if (Q && P)
      chain.record(log_le(lv(r), lv(Q)) && log_le(lv(Q), lv(P)),
                   r->system_id + " n=" + std::to_string(r->n) + " eps=" + format_number(r->eps));
  }
  an.checks.push_back(chain);
  for (const auto& [delta, per_mu] : by_delta) {
    std::map<double, double> sup_scaled;
    double sup_of_limits = -std::numeric_limits<double>::infinity();
    for (const auto& [mu, mrows] : per_mu) {
      const auto s = surrogate(detail::profile_rows(mrows), Quantity::Pmu, scale);
      for (std::size_t e = 0; e < s.eps.size(); ++e)
        sup_scaled[s.eps[e]] = std::max(sup_scaled.count(s.eps[e]) ? sup_scaled[s.eps[e]] : -INFINITY, s.scaled[e]);
      sup_of_limits = std::max(sup_of_limits, s.estimate);
    }
    double sp = -std::numeric_limits<double>::infinity();
    std::size_t taken = 0;
    for (const auto& [eps, v] : sup_scaled)
      if (taken++ < 3) sp = std::max(sp, v);
    an.surrogates["sp@delta=" + delta] = sp;
    an.surrogates["sup_mu_SP_mu@delta=" + delta] = sup_of_limits;
    if (an.surrogates.count("SP")) an.surrogates["SP-sp@delta=" + delta] = an.surrogates["SP"] - sp;
  }

  // Pseudo-orbit containment and PSP.
  Check contain{"po_containment"};
  std::map<double, std::vector<const Row*>> poq_by_ep, pop_by_ep;
  for (const auto* r : rows) {
    if (r->quantity != Quantity::POP && r->quantity != Quantity::POQ) continue;
    const double ep = std::stod(detail::qualifier(r->system_id, "ep"));
    (r->quantity == Quantity::POP ? pop_by_ep : poq_by_ep)[ep].push_back(r);
    if (r->quantity == Quantity::POP)
      if (const Row* P = find(Quantity::P, r->n, r->eps, id))
        contain.record(log_le(lv(P), lv(r)), r->system_id + " n=" + std::to_string(r->n) + " eps=" + format_number(r->eps));
  }
  an.checks.push_back(contain);
  if (!poq_by_ep.empty()) {
    an.surrogates["PSP"] = surrogate(detail::profile_rows(poq_by_ep.begin()->second), Quantity::POQ, scale).estimate;
    if (an.surrogates.count("SP")) an.surrogates["PSP-SP"] = an.surrogates["PSP"] - an.surrogates["SP"];
  }
  if (!pop_by_ep.empty())
    an.surrogates["POP"] = surrogate(detail::profile_rows(pop_by_ep.begin()->second), Quantity::POP, scale).estimate;
  return an;
}

inline json analysis_to_json(const ExperimentAnalysis& an) {
  json j;
  j["id"] = an.id;
  json s = json::object();
  for (const auto& [k, v] : an.surrogates) s[k] = std::isfinite(v) ? json(v) : json(format_value(v));
  j["surrogates"] = s;
  j["surrogate_note"] = "finite-grid estimates (limsup over the trailing half of n, then the three smallest eps); not limits";
  json checks = json::array();
  for (const auto& c : an.checks)
    checks.push_back({{"name", c.name}, {"checked", c.checked}, {"violations", c.violations},
                      {"verdict", c.verdict()}, {"examples", c.examples}});
  j["checks"] = checks;
  j["successive_differences"] = an.successive_differences;
  j["greedy_cells"] = an.greedy_cells;
  return j;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

inline json scale_to_json(const ScaleFunction& s) {
  json j{{"kind", to_string(s.kind())}};
  if (s.kind() == ScaleKind::Power) j["a"] = s.exponent();
  if (s.kind() == ScaleKind::Table) j["points"] = s.table_points();
  return j;
}

inline ScaleFunction scale_from_json(const json& j) {
  ConfigErrors errors;
  auto s = detail::build_scale(j, "scale", errors);
  errors.throw_if_any();
  return *s;
}

/// Writes results.csv, summary.json and manifest.json into cfg.output.
inline void write_outputs(const Config& cfg, const RunResult& res, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_text(dir / "results.csv", csv_text(res.rows));
  json summary;
  summary["version"] = kVersion;
  summary["config_hash"] = config_hash(cfg);
  json exps = json::array();
  for (const auto& ex : cfg.experiments) {
    const auto aux = cell_aux(ex);
    auto j = analysis_to_json(analyze(ex.id, res.rows, aux, ex.scale));
    j["scale"] = scale_to_json(ex.scale);
    j["points"] = ex.system.size();
    j["ultrametric"] = ex.system.ultrametric();
    j["cover_candidates"] = ex.system.ultrametric() || cfg.mode == solver::Mode::Exact ? "complete" : "restricted";
    j["measures"] = ex.measures.size();
    j["cells_aux"] = aux_to_json(aux);
    exps.push_back(std::move(j));
  }
  summary["experiments"] = exps;
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  json manifest;
  manifest["config_hash"] = config_hash(cfg);
  manifest["version"] = kVersion;
  manifest["wall_clock_ms"] = res.wall_ms;
  manifest["cache_hits"] = res.cache_hits;
  manifest["cache_misses"] = res.cache_misses;
  json cells = json::array();
  for (const auto& c : res.cells) cells.push_back({{"cell", c.cell}, {"status", c.status}, {"wall_ms", c.wall_ms}});
  manifest["cells"] = cells;
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

// ----------------------------------------------------------------- oracle

struct OracleCell {
  std::string cell;
  double solver = 0, oracle = 0;  // log values
  double discrepancy = 0;         // |e^a - e^b| / max(1, e^b)
};

struct OracleReport {
  std::vector<OracleCell> cells;
  double max_discrepancy = 0;
  std::vector<std::string> window_mismatches;
  bool pass(double tol = 1e-9) const { return max_discrepancy <= tol && window_mismatches.empty(); }
};

inline double discrepancy(double log_a, double log_b) {
  if (log_a == log_b) return 0;
  if (!std::isfinite(log_a) || !std::isfinite(log_b)) return std::numeric_limits<double>::infinity();
  return std::fabs(std::exp(log_a) - std::exp(log_b)) / std::max(1.0, std::exp(log_b));
}

/// Reference log value for one task by exhaustive enumeration.
inline double oracle_value(const Experiment& ex, const Task& t, std::vector<std::string>* window_mismatches = nullptr) {
  const auto& sys = ex.system;
  const auto& F = ex.folner.patches[t.patch];
  const double k = ex.phi.is_zero() ? 0.0 : (ex.scale.is_constant_one() ? 1.0 : ex.scale.eval(t.eps));
  if (t.quantity == Quantity::POP || t.quantity == Quantity::POQ) {
    const auto gens = GroupModel::lattice(sys.dimension()).generators;
    FinitePatch W = F;
    for (const auto& g : gens) W = W.unite(F.translate(g));
    const std::vector<Element> elems(W.begin(), W.end());
    const auto ws = oracle::pseudo_windows(sys, gens, elems, t.eps_pseudo);
    oracle::check_cap(ws.size(), "pseudo-orbit windows");
    if (window_mismatches) {
      const auto mine = enumerate_pseudo_orbits(sys, gens, W, t.eps_pseudo);
      std::vector<std::vector<std::uint32_t>> as_sorted;
      for (const auto& w : mine) {
        std::vector<std::uint32_t> v;
        for (const auto& g : elems) v.push_back(w.at(g));
        as_sorted.push_back(v);
      }
      std::sort(as_sorted.begin(), as_sorted.end());
      if (as_sorted != ws) window_mismatches->push_back("window set differs at eps_pseudo=" + format_number(t.eps_pseudo));
    }
    std::vector<std::size_t> pos;
    for (const auto& g : F)
      pos.push_back(static_cast<std::size_t>(std::find(elems.begin(), elems.end(), g) - elems.begin()));
    const auto d = oracle::window_distances(sys, ws, pos);
    std::vector<double> lw;
    for (const auto& w : ws) {
      double s = 0;
      for (auto p : pos) s += ex.phi(w[p]);
      lw.push_back(k * s);
    }
    return t.quantity == Quantity::POP ? oracle::separated(d, lw, t.eps) : oracle::spanning(d, lw, t.eps, false);
  }
  oracle::check_cap(sys.size(), "system points");
  const auto d = oracle::dyn_distances(sys, F);
  const auto lw = oracle::log_weights(sys, F, ex.phi.values, k);
  const std::vector<double> zero(sys.size(), 0.0);
  switch (t.quantity) {
    case Quantity::P: return oracle::separated(d, lw, t.eps);
    case Quantity::Q: return oracle::spanning(d, lw, t.eps, true);
    case Quantity::p: return oracle::cover(d, lw, t.eps, true);
    case Quantity::q: return oracle::cover(d, lw, t.eps, false);
    case Quantity::sep: return oracle::separated(d, zero, t.eps);
    case Quantity::spa: return oracle::spanning(d, zero, t.eps, true);
    case Quantity::Nmu:
      return oracle::partial_cover(d, ex.measures[t.measure].weights, zero, t.eps, rationalize(t.delta), true);
    case Quantity::Pmu:
      return oracle::partial_cover(d, ex.measures[t.measure].weights, lw, t.eps, rationalize(t.delta), false);
    default: break;
  }
  throw InternalError("unhandled quantity in oracle");
}

/// Solves every task in exact mode and compares with the brute-force path.
/// Refuses (SizeLimitError naming the cell) when a cell exceeds the oracle cap.
inline OracleReport run_oracle(const Config& cfg_in, unsigned jobs = 1) {
  Config cfg = cfg_in;
  cfg.mode = solver::Mode::Exact;
  const auto tasks = plan_tasks(cfg);
  for (const auto& ex : cfg.experiments)
    if (ex.system.size() > oracle::kOracleCap)
      throw SizeLimitError("oracle refuses experiment '" + ex.id + "': " + std::to_string(ex.system.size()) +
                           " points exceed the cap of " + std::to_string(oracle::kOracleCap));
  Runner runner(cfg, {jobs, true, false});
  OracleReport rep;
  std::vector<std::string> mismatches;
  for (const auto& t : tasks) {
    const auto& ex = cfg.experiments[t.experiment];
    OracleCell c;
    c.cell = describe(cfg, t);
    double o = 0;
    try {
      o = oracle_value(ex, t, &mismatches);
    } catch (const SizeLimitError& e) {
      throw SizeLimitError("oracle refuses cell " + c.cell + ": " + e.what());
    }
    c.oracle = o;
    c.solver = runner.evaluate(t).log_value();
    c.discrepancy = discrepancy(c.solver, c.oracle);
    rep.max_discrepancy = std::max(rep.max_discrepancy, c.discrepancy);
    rep.cells.push_back(c);
  }
  std::sort(mismatches.begin(), mismatches.end());
  mismatches.erase(std::unique(mismatches.begin(), mismatches.end()), mismatches.end());
  rep.window_mismatches = mismatches;
  return rep;
}

inline json oracle_to_json(const OracleReport& rep) {
  json cells = json::array();
  for (const auto& c : rep.cells)
    cells.push_back({{"cell", c.cell}, {"solver", c.solver}, {"oracle", c.oracle}, {"discrepancy", c.discrepancy}});
  return {{"max_discrepancy", rep.max_discrepancy}, {"pass", rep.pass()}, {"window_mismatches", rep.window_mismatches},
          {"cells", cells}};
}

// ----------------------------------------------------------------- report

/// Human-readable summary of a results directory.
inline std::string report(const std::filesystem::path& dir) {
  const auto csv_path = dir / "results.csv";
  const auto summary_path = dir / "summary.json";
  if (!std::filesystem::exists(csv_path)) throw IoError("missing " + csv_path.string());
  std::ifstream in(csv_path);
  if (!in) throw IoError("cannot open " + csv_path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const auto rows = parse_csv(buf.str(), csv_path.string());
  const auto summary = read_json_file(summary_path);
  std::ostringstream out;
  out << "results: " << csv_path.string() << " (" << rows.size() << " rows)\n";
  try {
    for (const auto& ej : summary.at("experiments")) {
      const auto id = ej.at("id").get<std::string>();
      const auto an = analyze(id, rows, aux_from_json(ej.at("cells_aux")), scale_from_json(ej.at("scale")));
      out << "\n== " << id << " (" << ej.at("points").get<std::size_t>() << " points, cover candidates "
          << ej.at("cover_candidates").get<std::string>() << ")\n";
      out << "surrogates (finite-grid estimates):\n";
      for (const auto& [k, v] : an.surrogates) out << "  " << k << " = " << format_value(v) << "\n";
      out << "inequality checks:\n";
      for (const auto& c : an.checks) {
        out << "  " << c.name << ": " << c.verdict() << " (" << c.checked << " checked, " << c.violations
            << " violations)\n";
        for (const auto& e : c.examples) out << "    at " << e << "\n";
      }
      out << "convergence (successive differences in n of per-site values):\n";
      for (const auto& [k, diffs] : an.successive_differences) {
        out << "  " << k << ":";
        for (double d : diffs) out << " " << format_value(d);
        out << "\n";
      }
      if (!an.greedy_cells.empty()) {
        out << "greedy cells (bracket widths):\n";
        for (const auto& g : an.greedy_cells) out << "  " << g << "\n";
      }
    }
  } catch (const json::exception& e) {
    throw IoError(summary_path.string() + ": malformed summary: " + e.what());
  }
  return out.str();
}

}  // namespace scalepress::experiment
