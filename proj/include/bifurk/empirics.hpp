/*
   Copyright 2026 The bifurk Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

// Empirical averages over an observed (possibly incomplete) lineage:
// per generation G_q, per subtree T_r, and over the first n nodes of a
// generation-preserving permutation.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <variant>
#include <vector>

#include "bifurk/error.hpp"
#include "bifurk/kernel.hpp"
#include "bifurk/treekit.hpp"

namespace bifurk {

/// Real values on an arbitrary subset of the tree. Storage is dense by
/// label (NaN marks an unobserved node), so labels are limited to 27
/// generations.
class Lineage {
 public:
  static constexpr std::uint64_t kMaxStoredLabel = (std::uint64_t{1} << 27) - 1;

  Lineage() : values_(1, kMissing) {}

  explicit Lineage(const LineageSample<double>& sample)
      : values_(sample.values), count_(sample.size()) {
    values_[0] = kMissing;
    for (std::uint64_t n = 1; n < values_.size(); ++n) {
      if (!std::isfinite(values_[n])) {
        throw Error(Errc::non_finite_value, "simulated value at " + std::to_string(n));
      }
    }
  }

  void set(TreeIndex n, double value) {
    if (!std::isfinite(value)) {
      throw Error(Errc::non_finite_value, "value at node " + std::to_string(n.value()));
    }
    if (n.value() > kMaxStoredLabel) {
      throw Error(Errc::overflow, "label " + std::to_string(n.value()) +
                                      " is deeper than 27 generations");
    }
    if (n.value() >= values_.size()) values_.resize(n.value() + 1, kMissing);
    if (std::isnan(values_[n.value()])) ++count_;
    values_[n.value()] = value;
  }

  bool has(std::uint64_t n) const {
    return n >= 1 && n < values_.size() && !std::isnan(values_[n]);
  }

  double at(std::uint64_t n) const {
    if (!has(n)) throw Error(Errc::empty_selection, "node " + std::to_string(n) + " not observed");
    return values_[n];
  }

  /// Number of observed nodes.
  std::uint64_t size() const { return count_; }
  bool empty() const { return count_ == 0; }

  /// Largest observed label, 0 when empty.
  std::uint64_t max_index() const {
    for (std::uint64_t n = values_.size() - 1; n >= 1; --n) {
      if (!std::isnan(values_[n])) return n;
    }
    return 0;
  }

  /// True when every node of T_r is observed.
  bool complete_through(unsigned r) const {
    const std::uint64_t last = subtree_size(r);
    if (last >= values_.size()) return false;
    for (std::uint64_t n = 1; n <= last; ++n) {
      if (std::isnan(values_[n])) return false;
    }
    return true;
  }

  /// Visits observed nodes in ascending label order.
  template <class Fn>
  void for_each(Fn&& fn) const {
    for (std::uint64_t n = 1; n < values_.size(); ++n) {
      if (!std::isnan(values_[n])) fn(n, values_[n]);
    }
  }

  /// One past the largest label storage covers.
  std::uint64_t label_bound() const { return values_.size(); }

  /// Unchecked read; NaN when unobserved.
  double raw(std::uint64_t n) const { return n < values_.size() ? values_[n] : kMissing; }

  friend bool operator==(const Lineage& a, const Lineage& b) {
    const std::uint64_t bound = std::max(a.values_.size(), b.values_.size());
    for (std::uint64_t n = 1; n < bound; ++n) {
      const double x = a.raw(n);
      const double y = b.raw(n);
      if (std::isnan(x) != std::isnan(y)) return false;
      if (!std::isnan(x) && x != y) return false;
    }
    return true;
  }

 private:
  static constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

  std::vector<double> values_;
  std::uint64_t count_ = 0;
};

namespace mode {

struct Generation {
  unsigned q = 0;
};
struct Subtree {
  unsigned r = 0;
};
/// The positions 1..n mapped through a permutation.
struct PermutedPrefix {
  std::uint64_t n = 1;
  std::reference_wrapper<const GenerationPermutation> permutation;
};

}  // namespace mode

using AverageMode = std::variant<mode::Generation, mode::Subtree, mode::PermutedPrefix>;

struct Average {
  double value = 0.0;
  std::uint64_t count = 0;
};

namespace detail {

/// Calls fn(label) for every label of the index set, in order.
template <class Fn>
void for_each_selected(const Lineage& lineage, const AverageMode& m, Fn&& fn) {
  std::visit(
      [&](const auto& sel) {
        using M = std::decay_t<decltype(sel)>;
        if constexpr (std::is_same_v<M, mode::Generation>) {
          const std::uint64_t first = generation_first(sel.q);
          const std::uint64_t last =
              std::min(generation_last(sel.q), lineage.label_bound() - 1);
          for (std::uint64_t n = first; n <= last; ++n) fn(n);
        } else if constexpr (std::is_same_v<M, mode::Subtree>) {
          const std::uint64_t last =
              std::min(subtree_size(sel.r), lineage.label_bound() - 1);
          for (std::uint64_t n = 1; n <= last; ++n) fn(n);
        } else {
          if (sel.n == 0) throw Error(Errc::invalid_parameter, "prefix length must be >= 1");
          const GenerationPermutation& pi = sel.permutation.get();
          for (std::uint64_t i = 1; i <= sel.n; ++i) fn(pi.at(i));
        }
      },
      m);
}

}  // namespace detail

/// Mean of f(X_i) over the observed nodes of the index set.
template <class F>
  requires std::invocable<const F&, double>
Average node_average(const Lineage& lineage, const F& f, const AverageMode& m) {
  double sum = 0.0;
  std::uint64_t count = 0;
  detail::for_each_selected(lineage, m, [&](std::uint64_t n) {
    if (!lineage.has(n)) return;
    sum += f(lineage.raw(n));
    ++count;
  });
  if (count == 0) throw Error(Errc::empty_selection, "no observed node in the index set");
  return {sum / static_cast<double>(count), count};
}

/// Mean of f(X_i, X_{2i}, X_{2i+1}) over the selected i whose triangle is
/// fully observed.
template <class F>
  requires std::invocable<const F&, double, double, double>
Average triangle_average(const Lineage& lineage, const F& f, const AverageMode& m) {
  double sum = 0.0;
  std::uint64_t count = 0;
  detail::for_each_selected(lineage, m, [&](std::uint64_t n) {
    if (n > (kMaxLabel - 1) / 2) return;
    if (!lineage.has(n) || !lineage.has(2 * n) || !lineage.has(2 * n + 1)) return;
    sum += f(lineage.raw(n), lineage.raw(2 * n), lineage.raw(2 * n + 1));
    ++count;
  });
  if (count == 0) throw Error(Errc::empty_selection, "no complete triangle in the index set");
  return {sum / static_cast<double>(count), count};
}

struct GenerationTerm {
  unsigned q = 0;
  double weight = 0.0;
  double mean = 0.0;
};

/// Mbar_{T_r}(f) = sum_q (|G_q| / |T_r|) Mbar_{G_q}(f) on a complete T_r.
template <class F>
  requires std::invocable<const F&, double>
std::vector<GenerationTerm> decompose_subtree_average(const Lineage& lineage, const F& f,
                                                      unsigned r) {
  if (!lineage.complete_through(r)) {
    throw Error(Errc::incomplete_tree, "T_" + std::to_string(r) + " is not fully observed");
  }
  const auto total = static_cast<double>(subtree_size(r));
  std::vector<GenerationTerm> terms;
  terms.reserve(r + 1);
  for (unsigned q = 0; q <= r; ++q) {
    const Average avg = node_average(lineage, f, mode::Generation{q});
    terms.push_back({q, static_cast<double>(generation_size(q)) / total, avg.value});
  }
  return terms;
}

/// Prefix average split into full generations before r_n plus the partial
/// last generation.
struct PrefixDecomposition {
  std::vector<GenerationTerm> full;  // weights |G_q| / n
  double partial = 0.0;              // (1/n) sum_{i=2^{r_n}}^{n} f(X_{Pi(i)})

  double total() const {
    double s = partial;
    for (const auto& t : full) s += t.weight * t.mean;
    return s;
  }
};

template <class F>
  requires std::invocable<const F&, double>
PrefixDecomposition decompose_prefix_average(const Lineage& lineage, const F& f,
                                             std::uint64_t n,
                                             const GenerationPermutation& pi) {
  if (n == 0) throw Error(Errc::invalid_parameter, "prefix length must be >= 1");
  const unsigned rn = generation_of(TreeIndex{n});
  const double dn = static_cast<double>(n);
  PrefixDecomposition out;
  for (unsigned q = 0; q < rn; ++q) {
    const Average avg = node_average(lineage, f, mode::Generation{q});
    if (avg.count != generation_size(q)) {
      throw Error(Errc::incomplete_tree, "generation " + std::to_string(q) + " incomplete");
    }
    out.full.push_back({q, static_cast<double>(generation_size(q)) / dn, avg.value});
  }
  double partial = 0.0;
  for (std::uint64_t i = generation_first(rn); i <= n; ++i) {
    const std::uint64_t label = pi.at(i);
    if (!lineage.has(label)) {
      throw Error(Errc::incomplete_tree, "node " + std::to_string(label) + " not observed");
    }
    partial += f(lineage.raw(label));
  }
  out.partial = partial / dn;
  return out;
}

}  // namespace bifurk
