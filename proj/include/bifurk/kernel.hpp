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

// Bifurcating Markov chains: a kernel maps a mother state to a pair of
// daughter states. Generic kernels are opaque samplers; exact analytics are
// provided for finite state spaces only.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "bifurk/error.hpp"
#include "bifurk/random.hpp"
#include "bifurk/treekit.hpp"

namespace bifurk {

/// A T-transition probability seen as a sampler: given the mother's state
/// and a random stream, draw (new-pole daughter, old-pole daughter).
template <class K, class State>
concept TreeKernel = requires(const K& kernel, const State& x, Stream& rng) {
  { kernel(x, rng) } -> std::convertible_to<std::pair<State, State>>;
};

/// Values on the complete subtree T_depth; values[n] holds X_n and
/// values[0] is unused.
template <class State>
struct LineageSample {
  unsigned depth = 0;
  std::vector<State> values;

  std::uint64_t size() const { return values.size() - 1; }
  const State& at(TreeIndex n) const {
    if (n.value() >= values.size()) {
      throw Error(Errc::invalid_parameter,
                  "label " + std::to_string(n.value()) + " outside T_" +
                      std::to_string(depth));
    }
    return values[n.value()];
  }
};

namespace detail {

template <class Fn>
void for_each_chunk(std::uint64_t first, std::uint64_t last, unsigned threads,
                    Fn&& fn) {
  const std::uint64_t count = last - first + 1;
  if (threads <= 1 || count < 4096) {
    fn(first, last);
    return;
  }
  const std::uint64_t chunk = (count + threads - 1) / threads;
  std::vector<std::jthread> workers;
  for (std::uint64_t lo = first; lo <= last; lo += chunk) {
    const std::uint64_t hi = std::min(last, lo + chunk - 1);
    workers.emplace_back([&fn, lo, hi] { fn(lo, hi); });
  }
}

}  // namespace detail

/// Simulates X on T_depth. The root is drawn from `root_sampler` on lane
/// `root` of stream 1; mother n draws her daughters from stream n, so the
/// result does not depend on `threads`.
template <class State, class Kernel, class RootSampler>
  requires TreeKernel<Kernel, State> &&
           std::invocable<const RootSampler&, Stream&>
LineageSample<State> simulate_tmc(const Kernel& kernel,
                                  const RootSampler& root_sampler,
                                  unsigned depth, std::uint64_t seed,
                                  unsigned threads = 1) {
  if (depth > kMaxDepth) {
    throw Error(Errc::overflow, "simulation depth must be < 63");
  }
  LineageSample<State> sample;
  sample.depth = depth;
  sample.values.resize(subtree_size(depth) + 1);
  {
    Stream rng(seed, 1, Lane::root);
    sample.values[1] = static_cast<State>(root_sampler(rng));
  }
  auto& values = sample.values;
  for (unsigned q = 0; q < depth; ++q) {
    detail::for_each_chunk(
        generation_first(q), generation_last(q), threads,
        [&](std::uint64_t lo, std::uint64_t hi) {
          for (std::uint64_t n = lo; n <= hi; ++n) {
            Stream rng(seed, n, Lane::kernel);
            auto [y, z] = kernel(values[n], rng);
            values[2 * n] = std::move(y);
            values[2 * n + 1] = std::move(z);
          }
        });
  }
  return sample;
}

/// One step of the induced chain Q = (P0 + P1)/2: toss a fair coin, draw a
/// daughter pair, keep the chosen daughter.
template <class State, class Kernel>
  requires TreeKernel<Kernel, State>
State induced_step(const Kernel& kernel, const State& x, Stream& rng) {
  const bool old_pole = rng.coin();
  auto [y, z] = kernel(x, rng);
  return old_pole ? z : y;
}

/// T-transition probability on {0, ..., n-1}: for each mother state x a
/// probability vector over daughter pairs (y, z), stored at x*n*n + y*n + z.
class FiniteKernel {
 public:
  FiniteKernel(std::size_t states, std::vector<double> table)
      : n_(states), table_(std::move(table)) {
    if (n_ == 0) throw Error(Errc::invalid_parameter, "kernel needs a state");
    if (table_.size() != n_ * n_ * n_) {
      throw Error(Errc::invalid_parameter, "kernel table must hold n^3 entries");
    }
    for (std::size_t x = 0; x < n_; ++x) {
      double total = 0.0;
      for (std::size_t k = 0; k < n_ * n_; ++k) {
        const double p = table_[x * n_ * n_ + k];
        if (!(p >= 0.0) || !std::isfinite(p)) {
          throw Error(Errc::invalid_distribution,
                      "negative or non-finite kernel entry in row " +
                          std::to_string(x));
        }
        total += p;
      }
      if (std::abs(total - 1.0) > 1e-12) {
        throw Error(Errc::invalid_distribution,
                    "kernel row " + std::to_string(x) + " does not sum to 1");
      }
    }
  }

  /// Conditionally independent daughters, P(x, dy dz) = P0(x, dy) P1(x, dz).
  static FiniteKernel independent(const Eigen::MatrixXd& p0,
                                  const Eigen::MatrixXd& p1) {
    const auto n = static_cast<std::size_t>(p0.rows());
    if (p0.cols() != p0.rows() || p1.rows() != p0.rows() ||
        p1.cols() != p0.cols()) {
      throw Error(Errc::invalid_parameter, "marginals must be square and equal-sized");
    }
    std::vector<double> table(n * n * n);
    for (std::size_t x = 0; x < n; ++x)
      for (std::size_t y = 0; y < n; ++y)
        for (std::size_t z = 0; z < n; ++z)
          table[x * n * n + y * n + z] = p0(x, y) * p1(x, z);
    return FiniteKernel(n, std::move(table));
  }

  std::size_t states() const { return n_; }
  const std::vector<double>& table() const { return table_; }

  double prob(std::size_t x, std::size_t y, std::size_t z) const {
    return table_[x * n_ * n_ + y * n_ + z];
  }

  Eigen::MatrixXd marginal0() const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dim(), dim());
    for (std::size_t x = 0; x < n_; ++x)
      for (std::size_t y = 0; y < n_; ++y)
        for (std::size_t z = 0; z < n_; ++z) m(idx(x), idx(y)) += prob(x, y, z);
    return m;
  }

  Eigen::MatrixXd marginal1() const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dim(), dim());
    for (std::size_t x = 0; x < n_; ++x)
      for (std::size_t y = 0; y < n_; ++y)
        for (std::size_t z = 0; z < n_; ++z) m(idx(x), idx(z)) += prob(x, y, z);
    return m;
  }

  /// Q = (P0 + P1) / 2.
  Eigen::MatrixXd induced() const { return 0.5 * (marginal0() + marginal1()); }

  /// x -> sum_{y,z} P(x, y, z) g(y) h(z).
  Eigen::VectorXd pair_expectation(const Eigen::VectorXd& g,
                                   const Eigen::VectorXd& h) const {
    check_size(g);
    check_size(h);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(dim());
    for (std::size_t x = 0; x < n_; ++x) {
      double acc = 0.0;
      for (std::size_t y = 0; y < n_; ++y)
        for (std::size_t z = 0; z < n_; ++z) acc += prob(x, y, z) * g(idx(y)) * h(idx(z));
      out(idx(x)) = acc;
    }
    return out;
  }

  std::pair<std::size_t, std::size_t> operator()(std::size_t x, Stream& rng) const {
    if (x >= n_) throw Error(Errc::invalid_parameter, "state out of range");
    const double u = rng.uniform();
    const double* row = table_.data() + x * n_ * n_;
    double cumulative = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t k = 0; k < n_ * n_; ++k) {
      if (row[k] <= 0.0) continue;
      cumulative += row[k];
      last_positive = k;
      if (u < cumulative) return {k / n_, k % n_};
    }
    return {last_positive / n_, last_positive % n_};
  }

  void check_size(const Eigen::VectorXd& v) const {
    if (static_cast<std::size_t>(v.size()) != n_) {
      throw Error(Errc::invalid_parameter, "vector length must equal the state count");
    }
  }

 private:
  Eigen::Index dim() const { return static_cast<Eigen::Index>(n_); }
  static Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

  std::size_t n_;
  std::vector<double> table_;
};

/// P(0,.) = delta_1 x delta_1 and P(1,.) = delta_0 x delta_0: both daughters
/// flip the mother's state.
inline FiniteKernel swap_kernel() {
  return FiniteKernel(2, {0, 0, 0, 1,  //
                          1, 0, 0, 0});
}

/// Whatever the mother, the new-pole daughter is 1 and the old-pole one is 0.
inline FiniteKernel constant_pair_kernel() {
  return FiniteKernel(2, {0, 0, 1, 0,  //
                          0, 0, 1, 0});
}

inline void validate_distribution(const Eigen::VectorXd& nu, std::size_t states) {
  if (static_cast<std::size_t>(nu.size()) != states) {
    throw Error(Errc::invalid_distribution, "distribution length must equal the state count");
  }
  if ((nu.array() < 0.0).any() || !nu.allFinite()) {
    throw Error(Errc::invalid_distribution, "distribution has negative entries");
  }
  if (std::abs(nu.sum() - 1.0) > 1e-12) {
    throw Error(Errc::invalid_distribution, "distribution does not sum to 1");
  }
}

/// Draws a state from nu by inversion.
inline std::size_t sample_state(const Eigen::VectorXd& nu, Stream& rng) {
  const double u = rng.uniform();
  double cumulative = 0.0;
  std::size_t last_positive = 0;
  for (Eigen::Index i = 0; i < nu.size(); ++i) {
    if (nu(i) <= 0.0) continue;
    cumulative += nu(i);
    last_positive = static_cast<std::size_t>(i);
    if (u < cumulative) return last_positive;
  }
  return last_positive;
}

/// Q^k f.
inline Eigen::VectorXd iterate_q(const FiniteKernel& kernel, const Eigen::VectorXd& f,
                                 unsigned k) {
  kernel.check_size(f);
  const Eigen::MatrixXd q = kernel.induced();
  Eigen::VectorXd out = f;
  for (unsigned i = 0; i < k; ++i) out = q * out;
  return out;
}

/// E[ Mbar_{G_q}(f)^2 ] for X started from nu:
///
///   2^{-q} nu Q^q f^2 + sum_{p<q} 2^{-p-1} nu Q^p P(Q^{q-p-1} f (x) Q^{q-p-1} f).
///
/// The first term is the I_q = J_q contribution; the p-th summand is the
/// event that two uniform nodes of G_q have their last common ancestor in G_p.
inline double exact_gen_second_moment(const FiniteKernel& kernel,
                                      const Eigen::VectorXd& nu,
                                      const Eigen::VectorXd& f, unsigned q) {
  validate_distribution(nu, kernel.states());
  kernel.check_size(f);
  const Eigen::MatrixXd qmat = kernel.induced();

  // law_p[p] = nu Q^p, forward_f[k] = Q^k f
  std::vector<Eigen::RowVectorXd> law(q + 1);
  law[0] = nu.transpose();
  for (unsigned p = 1; p <= q; ++p) law[p] = law[p - 1] * qmat;
  std::vector<Eigen::VectorXd> forward(q + 1);
  forward[0] = f;
  for (unsigned k = 1; k <= q; ++k) forward[k] = qmat * forward[k - 1];

  const Eigen::VectorXd f2 = f.array().square().matrix();
  double total = std::ldexp(law[q].dot(f2), -static_cast<int>(q));
  for (unsigned p = 0; p < q; ++p) {
    const Eigen::VectorXd& g = forward[q - p - 1];
    const Eigen::VectorXd pg = kernel.pair_expectation(g, g);
    total += std::ldexp(law[p].dot(pg), -static_cast<int>(p) - 1);
  }
  return total;
}

/// Stationary law of Q when Q^k converges to a matrix with identical rows;
/// nullopt for periodic or reducible induced chains.
inline std::optional<Eigen::VectorXd> induced_stationary(const FiniteKernel& kernel,
                                                         double tol = 1e-12) {
  Eigen::MatrixXd power = kernel.induced();
  for (int m = 0; m < 64; ++m) {
    const Eigen::MatrixXd next = power * power;
    const double change = (next - power).cwiseAbs().maxCoeff();
    power = next;
    if (change <= tol) break;
  }
  const Eigen::RowVectorXd first = power.row(0);
  for (Eigen::Index x = 1; x < power.rows(); ++x) {
    if ((power.row(x) - first).cwiseAbs().maxCoeff() > 1e-9) return std::nullopt;
  }
  if ((power * power - power).cwiseAbs().maxCoeff() > 1e-9) return std::nullopt;
  return first.transpose();
}

}  // namespace bifurk
