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

// Estimation of the BAR parameters from an observed lineage.
//
// Branch e in {0, 1} is fitted by ordinary least squares on every observed
// (mother, e-daughter) pair, whether or not the sister is observed. The
// innovation variance and sister correlation use complete triangles only.
// All sums run over ascending mother labels.

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bifurk/bar.hpp"
#include "bifurk/empirics.hpp"
#include "bifurk/error.hpp"

namespace bifurk {

struct FitCounts {
  std::uint64_t pairs0 = 0;
  std::uint64_t pairs1 = 0;
  std::uint64_t triangles = 0;
};

struct ThetaFit {
  Theta theta;
  FitCounts counts;
};

namespace detail {

inline std::uint64_t count_triangles(const Lineage& lineage) {
  std::uint64_t count = 0;
  lineage.for_each([&](std::uint64_t n, double) {
    if (lineage.has(2 * n) && lineage.has(2 * n + 1)) ++count;
  });
  return count;
}

/// Simple regression of the `branch` daughters on their mothers.
inline std::uint64_t fit_branch(const Lineage& lineage, unsigned branch,
                                bool constrain_alpha_zero, double& alpha, double& beta) {
  std::uint64_t n = 0;
  double sx = 0.0;
  double sy = 0.0;
  lineage.for_each([&](std::uint64_t m, double x) {
    const std::uint64_t d = 2 * m + branch;
    if (!lineage.has(d)) return;
    sx += x;
    sy += lineage.raw(d);
    ++n;
  });
  const std::string name = "branch " + std::to_string(branch);
  if (n == 0) throw Error(Errc::insufficient_data, name + " has no mother-daughter pair");
  const double mx = sx / static_cast<double>(n);
  const double my = sy / static_cast<double>(n);
  if (constrain_alpha_zero) {
    alpha = 0.0;
    beta = my;
    return n;
  }
  double sxx = 0.0;
  double sxy = 0.0;
  lineage.for_each([&](std::uint64_t m, double x) {
    const std::uint64_t d = 2 * m + branch;
    if (!lineage.has(d)) return;
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (lineage.raw(d) - my);
  });
  if (!(sxx > 0.0)) {
    throw Error(Errc::degenerate_design, name + " mothers have zero sample variance");
  }
  alpha = sxy / sxx;
  beta = my - alpha * mx;
  return n;
}

}  // namespace detail

/// Least-squares (equivalently Gaussian ML) estimate of theta. With
/// `constrain_alpha_zero` both slopes are fixed at 0 and each beta is the
/// mean of that branch's daughters.
inline ThetaFit fit_theta(const Lineage& lineage, bool constrain_alpha_zero = false) {
  ThetaFit out;
  out.counts.pairs0 =
      detail::fit_branch(lineage, 0, constrain_alpha_zero, out.theta.alpha0, out.theta.beta0);
  out.counts.pairs1 =
      detail::fit_branch(lineage, 1, constrain_alpha_zero, out.theta.alpha1, out.theta.beta1);
  out.counts.triangles = detail::count_triangles(lineage);
  return out;
}

struct Residual {
  std::uint64_t mother = 0;
  double eps0 = 0.0;  // residue of the new-pole daughter 2i
  double eps1 = 0.0;  // residue of the old-pole daughter 2i+1
};

using Residuals = std::vector<Residual>;

inline Residuals residuals(const Lineage& lineage, const Theta& theta) {
  Residuals out;
  lineage.for_each([&](std::uint64_t n, double x) {
    if (!lineage.has(2 * n) || !lineage.has(2 * n + 1)) return;
    out.push_back({n, lineage.raw(2 * n) - theta.alpha0 * x - theta.beta0,
                   lineage.raw(2 * n + 1) - theta.alpha1 * x - theta.beta1});
  });
  return out;
}

/// Mean over triangles of (eps0^2 + eps1^2) / 2.
inline double fit_sigma2(const Residuals& res) {
  if (res.empty()) throw Error(Errc::insufficient_data, "no complete triangle");
  double acc = 0.0;
  for (const auto& e : res) acc += e.eps0 * e.eps0 + e.eps1 * e.eps1;
  return acc / (2.0 * static_cast<double>(res.size()));
}

/// Mean over triangles of eps0 eps1, divided by sigma2.
inline double fit_rho(const Residuals& res, double sigma2) {
  if (res.empty()) throw Error(Errc::insufficient_data, "no complete triangle");
  if (!(sigma2 > 0.0)) {
    throw Error(Errc::zero_variance, "residual variance is zero; rho is undefined");
  }
  double acc = 0.0;
  for (const auto& e : res) acc += e.eps0 * e.eps1;
  return acc / (sigma2 * static_cast<double>(res.size()));
}

struct NoiseFit {
  double sigma2 = 0.0;
  double rho = 0.0;
};

inline NoiseFit fit_sigma2_rho(const Residuals& res) {
  const double s2 = fit_sigma2(res);
  return {s2, fit_rho(res, s2)};
}

/// Asymptotic covariance of sqrt(n) (theta_hat - theta):
///   sigma2 [[K, rho K], [rho K, K]],
///   K = [[1, -mu1], [-mu1, mu2]] / (mu2 - mu1^2).
inline Eigen::Matrix4d asymptotic_covariance(const Theta& theta, double sigma2, double rho) {
  const StationaryMoments m = stationary_moments(theta, sigma2);
  const double v = m.variance();
  Eigen::Matrix2d k;
  k << 1.0, -m.mu1, -m.mu1, m.mu2;
  k /= v;
  Eigen::Matrix4d out;
  out.block<2, 2>(0, 0) = sigma2 * k;
  out.block<2, 2>(0, 2) = sigma2 * rho * k;
  out.block<2, 2>(2, 0) = sigma2 * rho * k;
  out.block<2, 2>(2, 2) = sigma2 * k;
  return out;
}

inline Eigen::Matrix4d asymptotic_covariance(const BarParams& p) {
  return asymptotic_covariance(p.theta(), p.sigma2(), p.rho());
}

struct FitResult {
  Theta theta_hat;
  double sigma2_hat = 0.0;
  std::optional<double> rho_hat;  // undefined when sigma2_hat == 0
  std::array<double, 2> gamma_hat{};
  FitCounts counts;
  StationaryMoments mu_hat;
  Eigen::Matrix4d sigma_prime_hat = Eigen::Matrix4d::Zero();
  bool alpha_constrained = false;

  /// gamma0 - gamma1; positive when the old pole settles lower.
  double gamma_gap() const { return gamma_hat[0] - gamma_hat[1]; }

  /// Plug-in standard errors of theta_hat using the triangle count.
  std::array<double, 4> standard_errors() const {
    std::array<double, 4> se{};
    const double n = static_cast<double>(counts.triangles);
    for (int j = 0; j < 4; ++j) se[j] = std::sqrt(sigma_prime_hat(j, j) / n);
    return se;
  }
};

inline FitResult fit(const Lineage& lineage, bool constrain_alpha_zero = false) {
  const ThetaFit tf = fit_theta(lineage, constrain_alpha_zero);
  FitResult out;
  out.theta_hat = tf.theta;
  out.counts = tf.counts;
  out.alpha_constrained = constrain_alpha_zero;
  const Residuals res = residuals(lineage, tf.theta);
  out.sigma2_hat = fit_sigma2(res);
  if (out.sigma2_hat > 0.0) out.rho_hat = fit_rho(res, out.sigma2_hat);
  out.gamma_hat = {tf.theta.fixed_point(0), tf.theta.fixed_point(1)};
  out.mu_hat = stationary_moments(tf.theta, out.sigma2_hat);
  out.sigma_prime_hat =
      asymptotic_covariance(tf.theta, out.sigma2_hat, out.rho_hat.value_or(0.0));
  return out;
}

}  // namespace bifurk
