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

// The asymmetric bifurcating autoregressive model of order one:
//
//   X_{2n}   = alpha0 X_n + beta0 + eps_{2n}
//   X_{2n+1} = alpha1 X_n + beta1 + eps_{2n+1}
//
// with (eps_{2n}, eps_{2n+1}) i.i.d. centred Gaussian pairs of covariance
// sigma2 [[1, rho], [rho, 1]].
//
// Only Gaussian innovations are implemented. Any i.i.d. innovation pair with
// finite moments and the same covariance would slot in behind noise_pair().

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <type_traits>
#include <variant>

#include "bifurk/error.hpp"
#include "bifurk/kernel.hpp"
#include "bifurk/random.hpp"

namespace bifurk {

/// theta = (alpha0, beta0, alpha1, beta1); also used for unconstrained
/// estimates, hence no validation here.
struct Theta {
  double alpha0 = 0.0;
  double beta0 = 0.0;
  double alpha1 = 0.0;
  double beta1 = 0.0;

  double alpha(unsigned branch) const { return branch == 0 ? alpha0 : alpha1; }
  double beta(unsigned branch) const { return branch == 0 ? beta0 : beta1; }

  /// Fixed point beta/(1-alpha) of one branch's affine map.
  double fixed_point(unsigned branch) const {
    return beta(branch) / (1.0 - alpha(branch));
  }

  friend bool operator==(const Theta&, const Theta&) = default;
};

/// Mean and second moment of the induced chain's stationary law. The
/// variance is kept separately; mu2 - mu1^2 cancels badly when sigma2 is small.
struct StationaryMoments {
  double mu1 = 0.0;
  double mu2 = 0.0;
  double var = 0.0;

  double variance() const { return var; }
};

/// Stationary moments as functions of (theta, sigma2). Writing avg(.) for the
/// average over the two branches, the stationary Z satisfies
/// Z = a Z + b in law with (a, b) = (alpha_e, beta_e + eps'), e a fair coin,
/// which gives
///
///   mu1 = avg(beta) / (1 - avg(alpha))
///   mu2 = (2 avg(alpha beta) mu1 + avg(beta^2) + sigma2) / (1 - avg(alpha^2))
///   var = (avg((alpha mu1 + beta - mu1)^2) + sigma2) / (1 - avg(alpha^2)).
///
/// Evaluated as written, also for estimates outside the stable region.
inline StationaryMoments stationary_moments(const Theta& t, double sigma2) {
  const double a = 0.5 * (t.alpha0 + t.alpha1);
  const double b = 0.5 * (t.beta0 + t.beta1);
  const double a2 = 0.5 * (t.alpha0 * t.alpha0 + t.alpha1 * t.alpha1);
  StationaryMoments m;
  m.mu1 = b / (1.0 - a);
  const double d0 = t.alpha0 * m.mu1 + t.beta0 - m.mu1;
  const double d1 = t.alpha1 * m.mu1 + t.beta1 - m.mu1;
  m.var = (0.5 * (d0 * d0 + d1 * d1) + sigma2) / (1.0 - a2);
  m.mu2 = m.var + m.mu1 * m.mu1;
  return m;
}

class BarParams {
 public:
  BarParams(Theta theta, double sigma2, double rho)
      : theta_(theta), sigma2_(sigma2), rho_(rho) {
    const auto finite = [](double v) { return std::isfinite(v); };
    if (!finite(theta.alpha0) || !finite(theta.alpha1) || !finite(theta.beta0) ||
        !finite(theta.beta1) || !finite(sigma2) || !finite(rho)) {
      throw Error(Errc::invalid_parameter, "BAR parameters must be finite");
    }
    if (!(std::abs(theta.alpha0) < 1.0) || !(std::abs(theta.alpha1) < 1.0)) {
      throw Error(Errc::invalid_parameter, "|alpha0| and |alpha1| must be < 1");
    }
    if (!(sigma2 > 0.0)) throw Error(Errc::invalid_parameter, "sigma2 must be > 0");
    if (!(std::abs(rho) < 1.0)) {
      throw Error(Errc::invalid_parameter, "rho must lie in (-1, 1)");
    }
    if (!(stationary_moments(theta_, sigma2_).variance() > 0.0)) {
      throw Error(Errc::invalid_parameter, "stationary variance must be positive");
    }
  }

  const Theta& theta() const { return theta_; }
  double alpha0() const { return theta_.alpha0; }
  double beta0() const { return theta_.beta0; }
  double alpha1() const { return theta_.alpha1; }
  double beta1() const { return theta_.beta1; }
  double sigma2() const { return sigma2_; }
  double sigma() const { return std::sqrt(sigma2_); }
  double rho() const { return rho_; }

 private:
  Theta theta_;
  double sigma2_;
  double rho_;
};

inline StationaryMoments stationary_moments(const BarParams& p) {
  return stationary_moments(p.theta(), p.sigma2());
}

/// Innovation pair: Lambda (g0, g1) with Lambda = sigma [[1, 0], [rho, sqrt(1-rho^2)]].
inline std::pair<double, double> noise_pair(const BarParams& p, Stream& rng) {
  const double g0 = rng.normal();
  const double g1 = rng.normal();
  const double s = p.sigma();
  return {s * g0, s * (p.rho() * g0 + std::sqrt(1.0 - p.rho() * p.rho()) * g1)};
}

inline std::pair<double, double> bar_step(const BarParams& p, double x, Stream& rng) {
  const auto [e0, e1] = noise_pair(p, rng);
  return {p.alpha0() * x + p.beta0() + e0, p.alpha1() * x + p.beta1() + e1};
}

/// The BAR model as a TreeKernel over doubles.
struct BarKernel {
  BarParams params;

  std::pair<double, double> operator()(double x, Stream& rng) const {
    return bar_step(params, x, rng);
  }
};

/// Number of series terms K with alpha_max^K (|beta0| + |beta1| + 6 sigma + 1) < 1e-12.
inline unsigned stationary_series_terms(const BarParams& p) {
  const double amax = std::max(std::abs(p.alpha0()), std::abs(p.alpha1()));
  if (amax == 0.0) return 1;
  const double envelope = std::abs(p.beta0()) + std::abs(p.beta1()) + 6.0 * p.sigma() + 1.0;
  const double k = std::log(1e-12 / envelope) / std::log(amax);
  auto terms = static_cast<unsigned>(std::max(1.0, std::floor(k) + 1.0));
  while (std::pow(amax, terms) * envelope >= 1e-12) ++terms;
  return terms;
}

/// Draws from the stationary law by the truncated series
/// sum_k a_1 ... a_{k-1} b_k.
inline double sample_stationary(const BarParams& p, Stream& rng) {
  const unsigned terms = stationary_series_terms(p);
  const double s = p.sigma();
  double sum = 0.0;
  double scale = 1.0;
  for (unsigned k = 0; k < terms; ++k) {
    const unsigned branch = rng.coin() ? 1u : 0u;
    sum += scale * (p.theta().beta(branch) + s * rng.normal());
    scale *= p.theta().alpha(branch);
  }
  return sum;
}

/// Y_{r+1} = a Y_r + b with (a, b) = (alpha_e, beta_e + eps'), e a fair coin.
inline double induced_ar1_step(const BarParams& p, double y, Stream& rng) {
  const unsigned branch = rng.coin() ? 1u : 0u;
  return p.theta().alpha(branch) * y + p.theta().beta(branch) + p.sigma() * rng.normal();
}

struct StationaryRoot {};
struct DiracRoot {
  double x = 0.0;
};
struct GaussianRoot {
  double mean = 0.0;
  double variance = 1.0;
};

/// Law of the ancestor X_1. Defaults to the stationary law.
using RootDistribution = std::variant<StationaryRoot, DiracRoot, GaussianRoot>;

inline double sample_root(const BarParams& p, const RootDistribution& root, Stream& rng) {
  return std::visit(
      [&](const auto& r) -> double {
        using R = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<R, StationaryRoot>) {
          return sample_stationary(p, rng);
        } else if constexpr (std::is_same_v<R, DiracRoot>) {
          return r.x;
        } else {
          if (!(r.variance >= 0.0)) {
            throw Error(Errc::invalid_parameter, "root variance must be >= 0");
          }
          return r.mean + std::sqrt(r.variance) * rng.normal();
        }
      },
      root);
}

inline LineageSample<double> simulate_bar(const BarParams& p,
                                          const RootDistribution& root,
                                          unsigned depth, std::uint64_t seed,
                                          unsigned threads = 1) {
  const BarKernel kernel{p};
  return simulate_tmc<double>(
      kernel, [&](Stream& rng) { return sample_root(p, root, rng); }, depth, seed,
      threads);
}

}  // namespace bifurk
