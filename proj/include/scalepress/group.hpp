#pragma once

// The lattice Z^d as a finitely generated amenable group: elements, finite
// patches, box Folner sequences and their invariance/temperedness diagnostics.

#include <algorithm>
#include <compare>
#include <cstdint>
#include <cstdlib>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "scalepress/error.hpp"
#include "scalepress/rational.hpp"

namespace scalepress {

/// An element of Z^d, written additively.
struct Element {
  std::vector<std::int64_t> coords;

  Element() = default;
  explicit Element(std::vector<std::int64_t> c) : coords(std::move(c)) {}

  static Element identity(int dimension) {
    return Element(std::vector<std::int64_t>(static_cast<std::size_t>(dimension), 0));
  }
  static Element basis(int dimension, int axis, std::int64_t sign = 1) {
    Element e = identity(dimension);
    e.coords.at(static_cast<std::size_t>(axis)) = sign;
    return e;
  }

  int dimension() const { return static_cast<int>(coords.size()); }
  bool is_identity() const {
    return std::all_of(coords.begin(), coords.end(), [](auto c) { return c == 0; });
  }
  /// Word length with respect to the standard generators and their inverses.
  std::int64_t word_length() const {
    std::int64_t len = 0;
    for (auto c : coords) len += std::llabs(c);
    return len;
  }

  Element operator+(const Element& other) const {
    if (other.dimension() != dimension()) throw InvalidArgument("element dimension mismatch");
    Element out = *this;
    for (std::size_t i = 0; i < coords.size(); ++i) out.coords[i] += other.coords[i];
    return out;
  }
  Element operator-() const {
    Element out = *this;
    for (auto& c : out.coords) c = -c;
    return out;
  }
  Element operator-(const Element& other) const { return *this + (-other); }

  auto operator<=>(const Element&) const = default;
  bool operator==(const Element&) const = default;

  std::string to_string() const {
    std::string s = "(";
    for (std::size_t i = 0; i < coords.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(coords[i]);
    }
    return s + ")";
  }
};

/// Word-length order with lexicographic tie-break; the identity comes first.
struct WordOrder {
  bool operator()(const Element& a, const Element& b) const {
    const auto la = a.word_length(), lb = b.word_length();
    if (la != lb) return la < lb;
    return a < b;
  }
};

/// Z^d with a finite generating set (standard basis, optionally with inverses).
struct GroupModel {
  int dimension = 1;
  std::vector<Element> generators;

  static GroupModel lattice(int dimension, bool include_inverses = false) {
    if (dimension < 1) throw InvalidArgument("group dimension must be >= 1");
    GroupModel g;
    g.dimension = dimension;
    for (int axis = 0; axis < dimension; ++axis) g.generators.push_back(Element::basis(dimension, axis));
    if (include_inverses) {
      for (int axis = 0; axis < dimension; ++axis)
        g.generators.push_back(Element::basis(dimension, axis, -1));
    }
    return g;
  }
};

/// Nonempty finite subset of Z^d, kept sorted and duplicate free.
class FinitePatch {
 public:
  FinitePatch() = default;
  explicit FinitePatch(std::vector<Element> elements) : elements_(std::move(elements)) {
    if (elements_.empty()) throw InvalidArgument("finite patch must be nonempty");
    std::sort(elements_.begin(), elements_.end());
    if (std::adjacent_find(elements_.begin(), elements_.end()) != elements_.end())
      throw InvalidArgument("finite patch contains duplicate elements");
    const int d = elements_.front().dimension();
    for (const auto& e : elements_)
      if (e.dimension() != d) throw InvalidArgument("finite patch mixes dimensions");
  }

  std::size_t size() const { return elements_.size(); }
  int dimension() const { return elements_.front().dimension(); }
  const std::vector<Element>& elements() const { return elements_; }
  auto begin() const { return elements_.begin(); }
  auto end() const { return elements_.end(); }

  bool contains(const Element& g) const { return std::binary_search(elements_.begin(), elements_.end(), g); }
  bool contains_identity() const { return contains(Element::identity(dimension())); }
  bool is_subset_of(const FinitePatch& other) const {
    return std::includes(other.elements_.begin(), other.elements_.end(), elements_.begin(), elements_.end());
  }

  /// gF
  FinitePatch translate(const Element& g) const {
    std::vector<Element> out;
    out.reserve(elements_.size());
    for (const auto& e : elements_) out.push_back(g + e);
    return FinitePatch(std::move(out));
  }
  /// F^{-1}
  FinitePatch inverse() const {
    std::vector<Element> out;
    for (const auto& e : elements_) out.push_back(-e);
    return FinitePatch(std::move(out));
  }
  /// F ∪ F'
  FinitePatch unite(const FinitePatch& other) const {
    std::vector<Element> out;
    std::set_union(elements_.begin(), elements_.end(), other.elements_.begin(), other.elements_.end(),
                   std::back_inserter(out));
    return FinitePatch(std::move(out));
  }

  /// Elements in word-length order (identity first when present).
  std::vector<Element> word_ordered() const {
    auto out = elements_;
    std::sort(out.begin(), out.end(), WordOrder{});
    return out;
  }

  bool operator==(const FinitePatch&) const = default;

 private:
  std::vector<Element> elements_;
};

/// AB = {ab : a in A, b in B}
inline FinitePatch product(const FinitePatch& a, const FinitePatch& b) {
  std::set<Element> out;
  for (const auto& x : a)
    for (const auto& y : b) out.insert(x + y);
  return FinitePatch(std::vector<Element>(out.begin(), out.end()));
}

/// The box {0,...,n-1}^d.
inline FinitePatch folner_box(const GroupModel& group, std::int64_t n) {
  if (n < 1) throw InvalidArgument("folner_box: n must be >= 1");
  const int d = group.dimension;
  std::vector<Element> out;
  std::vector<std::int64_t> idx(static_cast<std::size_t>(d), 0);
  while (true) {
    out.emplace_back(idx);
    int axis = d - 1;
    while (axis >= 0 && ++idx[static_cast<std::size_t>(axis)] == n) idx[static_cast<std::size_t>(axis--)] = 0;
    if (axis < 0) break;
  }
  return FinitePatch(std::move(out));
}

/// |F Δ gF| / |F|, exact.
inline Rational folner_defect(const FinitePatch& patch, const Element& g) {
  const FinitePatch shifted = patch.translate(g);
  std::vector<Element> sym;
  std::set_symmetric_difference(patch.begin(), patch.end(), shifted.begin(), shifted.end(),
                                std::back_inserter(sym));
  return Rational(static_cast<std::int64_t>(sym.size()), static_cast<std::int64_t>(patch.size()));
}

/// Recorded prefix F_0, F_1, ... of a Folner sequence. `labels[k]` is the
/// box side used as the row index n in pressure profiles.
struct FolnerSequence {
  std::vector<FinitePatch> patches;
  std::vector<std::int64_t> labels;

  std::size_t length() const { return patches.size(); }
  std::vector<std::size_t> growth() const {
    std::vector<std::size_t> out;
    for (const auto& p : patches) out.push_back(p.size());
    return out;
  }
  const FinitePatch& at_label(std::int64_t n) const {
    for (std::size_t k = 0; k < labels.size(); ++k)
      if (labels[k] == n) return patches[k];
    throw InvalidArgument("Folner sequence has no patch with label " + std::to_string(n));
  }
};

/// F_k = {0,...,k}^d for k = 0..max_n-1, labelled by side length k+1.
inline FolnerSequence box_sequence(const GroupModel& group, std::int64_t max_n) {
  if (max_n < 1) throw InvalidArgument("box_sequence: max_n must be >= 1");
  FolnerSequence seq;
  for (std::int64_t n = 1; n <= max_n; ++n) {
    seq.patches.push_back(folner_box(group, n));
    seq.labels.push_back(n);
  }
  return seq;
}

/// Boxes translated by `offset`; only a diagnostic for Folner-independence.
inline FolnerSequence shifted_box_sequence(const GroupModel& group, std::int64_t max_n, const Element& offset) {
  FolnerSequence seq = box_sequence(group, max_n);
  for (auto& p : seq.patches) p = p.translate(offset);
  return seq;
}

/// |∪_{k<n} F_k^{-1} F_n| / |F_n|.
inline Rational temperedness_ratio(const FolnerSequence& seq, std::size_t n) {
  if (n == 0) throw InvalidArgument("temperedness_ratio: n = 0 has no predecessors");
  if (n >= seq.length()) throw InvalidArgument("temperedness_ratio: n outside recorded prefix");
  std::set<Element> acc;
  for (std::size_t k = 0; k < n; ++k) {
    const FinitePatch prod = product(seq.patches[k].inverse(), seq.patches[n]);
    acc.insert(prod.begin(), prod.end());
  }
  return Rational(static_cast<std::int64_t>(acc.size()), static_cast<std::int64_t>(seq.patches[n].size()));
}

/// The first `count` elements of Z^d in word-length order, g_0 = e.
inline std::vector<Element> enumerate_elements(int dimension, std::size_t count) {
  std::vector<Element> out;
  for (std::int64_t radius = 0; out.size() < count; ++radius) {
    // All vectors with L1 norm == radius, inside the box [-radius, radius]^d.
    std::vector<Element> shell;
    std::vector<std::int64_t> idx(static_cast<std::size_t>(dimension), -radius);
    while (true) {
      Element e(idx);
      if (e.word_length() == radius) shell.push_back(e);
      int axis = dimension - 1;
      while (axis >= 0 && ++idx[static_cast<std::size_t>(axis)] > radius)
        idx[static_cast<std::size_t>(axis--)] = -radius;
      if (axis < 0) break;
    }
    std::sort(shell.begin(), shell.end());
    for (auto& e : shell) {
      if (out.size() == count) break;
      out.push_back(std::move(e));
    }
  }
  return out;
}

}  // namespace scalepress
