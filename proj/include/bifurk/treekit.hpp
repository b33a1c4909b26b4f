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

// Integer arithmetic on the regular binary tree. The root is labelled 1 and
// the daughters of n are 2n (type 0, new pole) and 2n+1 (type 1, old pole).

#include <bit>
#include <compare>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "bifurk/error.hpp"
#include "bifurk/random.hpp"

namespace bifurk {

inline constexpr std::uint64_t kMaxLabel = (std::uint64_t{1} << 63) - 1;
inline constexpr unsigned kMaxDepth = 62;

class TreeIndex {
 public:
  constexpr explicit TreeIndex(std::uint64_t n) : n_(n) {
    if (n == 0 || n > kMaxLabel) {
      throw Error(Errc::invalid_parameter,
                  "tree label must lie in [1, 2^63-1], got " + std::to_string(n));
    }
  }

  constexpr std::uint64_t value() const noexcept { return n_; }
  constexpr auto operator<=>(const TreeIndex&) const = default;

 private:
  std::uint64_t n_;
};

inline constexpr TreeIndex kRoot{1};

constexpr unsigned generation_of(TreeIndex n) {
  return static_cast<unsigned>(std::bit_width(n.value())) - 1u;
}

constexpr TreeIndex mother(TreeIndex n) {
  if (n.value() == 1) throw Error(Errc::root_has_no_mother, "node 1 is the root");
  return TreeIndex{n.value() / 2};
}

/// Daughter `type` (0 or 1) of n.
constexpr TreeIndex daughter(TreeIndex n, unsigned type) {
  if (n.value() > (kMaxLabel - 1) / 2) {
    throw Error(Errc::overflow, "daughter label exceeds 2^63-1");
  }
  return TreeIndex{2 * n.value() + (type & 1u)};
}

/// Bits z_1..z_q such that following daughter 2m+z from the root reaches n.
inline std::vector<std::uint8_t> path_from_root(TreeIndex n) {
  const unsigned q = generation_of(n);
  std::vector<std::uint8_t> path(q);
  for (unsigned k = 0; k < q; ++k) {
    path[k] = static_cast<std::uint8_t>((n.value() >> (q - 1 - k)) & 1u);
  }
  return path;
}

inline TreeIndex follow_path(const std::vector<std::uint8_t>& path) {
  TreeIndex n = kRoot;
  for (const auto z : path) n = daughter(n, z);
  return n;
}

/// Most recent common ancestor.
constexpr TreeIndex mrca(TreeIndex i, TreeIndex j) {
  std::uint64_t a = i.value();
  std::uint64_t b = j.value();
  const unsigned ga = generation_of(i);
  const unsigned gb = generation_of(j);
  if (ga > gb) a >>= (ga - gb);
  if (gb > ga) b >>= (gb - ga);
  while (a != b) {
    a >>= 1;
    b >>= 1;
  }
  return TreeIndex{a};
}

/// |G_q| = 2^q.
constexpr std::uint64_t generation_size(unsigned q) {
  if (q > 63) throw Error(Errc::overflow, "generation index too large");
  return std::uint64_t{1} << q;
}

/// |T_r| = 2^{r+1} - 1.
constexpr std::uint64_t subtree_size(unsigned r) {
  if (r > kMaxDepth) throw Error(Errc::overflow, "subtree depth must be <= 62");
  return (std::uint64_t{1} << (r + 1)) - 1;
}

struct TreeSizes {
  std::uint64_t generation;
  std::uint64_t subtree;
};

constexpr TreeSizes sizes(unsigned q, unsigned r) {
  return {generation_size(q), subtree_size(r)};
}

constexpr std::uint64_t generation_first(unsigned q) { return generation_size(q); }
constexpr std::uint64_t generation_last(unsigned q) {
  return generation_size(q) + (generation_size(q) - 1);
}

/// A permutation of the labels that leaves every generation 0..max_generation
/// invariant. Generation q is stored as a table of 2^q offsets.
class GenerationPermutation {
 public:
  explicit GenerationPermutation(std::vector<std::vector<std::uint64_t>> per_generation,
                        std::uint64_t seed = 0)
      : maps_(std::move(per_generation)), seed_(seed) {
    if (maps_.empty()) {
      throw Error(Errc::invalid_parameter, "permutation needs generation 0");
    }
    if (maps_.size() > kMaxDepth + 1) {
      throw Error(Errc::overflow, "permutation deeper than 62 generations");
    }
    inverse_.resize(maps_.size());
    for (std::size_t q = 0; q < maps_.size(); ++q) {
      const std::uint64_t width = generation_size(static_cast<unsigned>(q));
      if (maps_[q].size() != width) {
        throw Error(Errc::invalid_parameter,
                    "generation " + std::to_string(q) + " needs 2^q entries");
      }
      auto& inv = inverse_[q];
      inv.assign(width, width);
      for (std::uint64_t k = 0; k < width; ++k) {
        const std::uint64_t image = maps_[q][k];
        if (image >= width || inv[image] != width) {
          throw Error(Errc::invalid_parameter,
                      "generation " + std::to_string(q) + " map is not a bijection");
        }
        inv[image] = k;
      }
    }
  }

  static GenerationPermutation identity(unsigned max_generation) {
    std::vector<std::vector<std::uint64_t>> maps(max_generation + 1);
    for (unsigned q = 0; q <= max_generation; ++q) {
      maps[q].resize(generation_size(q));
      for (std::uint64_t k = 0; k < maps[q].size(); ++k) maps[q][k] = k;
    }
    return GenerationPermutation(std::move(maps));
  }

  unsigned max_generation() const {
    return static_cast<unsigned>(maps_.size()) - 1;
  }
  std::uint64_t seed() const { return seed_; }

  TreeIndex operator()(TreeIndex n) const { return apply(n, maps_); }
  TreeIndex inverse(TreeIndex n) const { return apply(n, inverse_); }

  /// Image of the i-th position, i.e. Pi(i) for i >= 1.
  std::uint64_t at(std::uint64_t i) const { return (*this)(TreeIndex{i}).value(); }

 private:
  TreeIndex apply(TreeIndex n,
                  const std::vector<std::vector<std::uint64_t>>& table) const {
    const unsigned q = generation_of(n);
    if (q >= table.size()) {
      throw Error(Errc::invalid_parameter,
                  "label " + std::to_string(n.value()) +
                      " lies beyond the permuted generations");
    }
    const std::uint64_t first = generation_first(q);
    return TreeIndex{first + table[q][n.value() - first]};
  }

  std::vector<std::vector<std::uint64_t>> maps_;
  std::vector<std::vector<std::uint64_t>> inverse_;
  std::uint64_t seed_;
};

/// Independent uniform shuffles of generations 0..max_generation.
inline GenerationPermutation sample_permutation(unsigned max_generation,
                                                std::uint64_t seed) {
  if (max_generation > 40) {
    throw Error(Errc::overflow, "refusing to materialize more than 41 generations");
  }
  std::vector<std::vector<std::uint64_t>> maps(max_generation + 1);
  for (unsigned q = 0; q <= max_generation; ++q) {
    auto& m = maps[q];
    m.resize(generation_size(q));
    for (std::uint64_t k = 0; k < m.size(); ++k) m[k] = k;
    Stream rng(seed, q, Lane::permutation);
    // Fisher-Yates
    for (std::uint64_t k = m.size(); k > 1; --k) {
      std::swap(m[k - 1], m[rng.below(k)]);
    }
  }
  return GenerationPermutation(std::move(maps), seed);
}

}  // namespace bifurk
