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

// Counter-based random streams.
//
// Every draw in the library comes from a Philox4x32-10 block cipher keyed by
// a 64-bit seed. A stream is addressed by (stream id, lane); the block index
// is the only mutable state. Two streams with different addresses never
// share a block, so tree nodes and Monte Carlo replications can be simulated
// in any order, or concurrently, with bit-identical results.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace bifurk {

/// Stream lanes. A node's kernel draws and the root draw live on the same
/// stream id (the node label) but on different lanes.
enum class Lane : std::uint32_t {
  kernel = 0,
  root = 1,
  permutation = 2,
  general = 3,
};

namespace philox {

inline constexpr std::uint32_t kMul0 = 0xD2511F53u;
inline constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
inline constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
inline constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

using Counter = std::array<std::uint32_t, 4>;
using Key = std::array<std::uint32_t, 2>;

constexpr Counter round(const Counter& c, const Key& k) {
  const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c[0];
  const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c[2];
  const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
  const auto lo0 = static_cast<std::uint32_t>(p0);
  const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
  const auto lo1 = static_cast<std::uint32_t>(p1);
  return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
}

/// Philox4x32 with 10 rounds.
constexpr Counter block(Counter c, Key k) {
  for (int i = 0; i < 10; ++i) {
    c = round(c, k);
    k[0] += kWeyl0;
    k[1] += kWeyl1;
  }
  return c;
}

}  // namespace philox

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Seed for replication `k` at depth `r` of an experiment seeded by `base`.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t k,
                                    std::uint64_t r) {
  return mix64(mix64(mix64(base) ^ k) ^ (r * 0xA24BAED4963EE407ull));
}

class Stream {
 public:
  using result_type = std::uint32_t;

  Stream(std::uint64_t seed, std::uint64_t stream_id, Lane lane = Lane::general)
      : key_{static_cast<std::uint32_t>(seed),
             static_cast<std::uint32_t>(seed >> 32)},
        counter_{0u, static_cast<std::uint32_t>(lane),
                 static_cast<std::uint32_t>(stream_id),
                 static_cast<std::uint32_t>(stream_id >> 32)} {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() {
    if (used_ == 4) refill();
    return buffer_[used_++];
  }

  std::uint64_t next_u64() {
    const std::uint64_t hi = (*this)();
    const std::uint64_t lo = (*this)();
    return (hi << 32) | lo;
  }

  /// Uniform on the open interval (0, 1), 53-bit resolution.
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  bool coin() { return ((*this)() >> 31) != 0u; }

  /// Uniform integer in [0, bound); Lemire's multiply-and-reject below 2^32.
  std::uint64_t below(std::uint64_t bound) {
    if (bound <= 1) return 0;
    if (bound < (std::uint64_t{1} << 32)) {
      const auto b = static_cast<std::uint32_t>(bound);
      const std::uint32_t threshold = static_cast<std::uint32_t>(-b) % b;
      std::uint64_t m;
      do {
        m = static_cast<std::uint64_t>((*this)()) * b;
      } while (static_cast<std::uint32_t>(m) < threshold);
      return m >> 32;
    }
    const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
    const std::uint64_t limit = max - max % bound;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % bound;
  }

  /// Standard normal by Box-Muller; the sine variate is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  void refill() {
    buffer_ = philox::block(counter_, key_);
    ++counter_[0];
    used_ = 0;
  }

  philox::Key key_;
  philox::Counter counter_;
  philox::Counter buffer_{};
  int used_ = 4;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace bifurk
