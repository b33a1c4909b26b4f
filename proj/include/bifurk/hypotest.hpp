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

// Wald-type tests for asymmetry between the two daughter types.
//
// Every statistic is evaluated with the effective size n equal to the number
// of complete triangles used by the fit, unless the caller passes n.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "bifurk/empirics.hpp"
#include "bifurk/error.hpp"
#include "bifurk/inference.hpp"
#include "bifurk/stats.hpp"

namespace bifurk {

enum class TestName {
  equal_dynamics,
  equal_alpha,
  equal_beta,
  equal_fixed_point,
  sister_difference,
};

inline std::string_view to_string(TestName t) {
  switch (t) {
    case TestName::equal_dynamics: return "equal_dynamics";
    case TestName::equal_alpha: return "equal_alpha";
    case TestName::equal_beta: return "equal_beta";
    case TestName::equal_fixed_point: return "equal_fixed_point";
    case TestName::sister_difference: return "sister_difference";
  }
  return "unknown";
}

/// Accepts both the report spelling (equal_alpha) and the CLI spelling
/// (equal-alpha); "sister" is short for sister_difference.
inline std::optional<TestName> parse_test_name(std::string_view s) {
  std::string key(s);
  std::replace(key.begin(), key.end(), '-', '_');
  if (key == "equal_dynamics") return TestName::equal_dynamics;
  if (key == "equal_alpha") return TestName::equal_alpha;
  if (key == "equal_beta") return TestName::equal_beta;
  if (key == "equal_fixed_point") return TestName::equal_fixed_point;
  if (key == "sister" || key == "sister_difference") return TestName::sister_difference;
  return std::nullopt;
}

struct TestReport {
  TestName name = TestName::equal_dynamics;
  double statistic = 0.0;
  std::optional<int> dof;  // nullopt: standard normal reference law
  double p_value = 1.0;
  std::uint64_t n_effective = 0;
  std::string null_hypothesis;
  std::string alternative;
  // One-sided p-values of the sister test: P(N >= xi) and P(N <= xi).
  std::optional<double> p_value_upper;
  std::optional<double> p_value_lower;
};

namespace detail {

inline constexpr double kRhoGuard = 1e-12;

/// sigma2_hat and (1 - rho_hat) after the guard on rho_hat.
inline std::pair<double, double> noise_scale(const FitResult& fit) {
  if (!(fit.sigma2_hat > 0.0) || !std::isfinite(fit.sigma2_hat)) {
    throw Error(Errc::degenerate_variance, "sigma2_hat must be positive");
  }
  if (!fit.rho_hat || !std::isfinite(*fit.rho_hat) || std::abs(*fit.rho_hat) > 1.0) {
    throw Error(Errc::degenerate_variance, "rho_hat must lie in [-1, 1]");
  }
  const double rho = std::clamp(*fit.rho_hat, -1.0 + kRhoGuard, 1.0 - kRhoGuard);
  return {fit.sigma2_hat, 1.0 - rho};
}

inline double stationary_variance(const FitResult& fit) {
  const double v = fit.mu_hat.variance();
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw Error(Errc::degenerate_variance, "mu2_hat - mu1_hat^2 must be positive");
  }
  return v;
}

inline std::uint64_t effective_n(const FitResult& fit, std::optional<std::uint64_t> n) {
  const std::uint64_t value = n.value_or(fit.counts.triangles);
  if (value == 0) throw Error(Errc::insufficient_data, "effective size is zero");
  return value;
}

inline TestReport chi2_report(TestName name, double statistic, int dof, std::uint64_t n,
                              std::string null_h, std::string alt) {
  TestReport r;
  r.name = name;
  r.statistic = statistic;
  r.dof = dof;
  r.p_value = chi2_survival(statistic, dof);
  r.n_effective = n;
  r.null_hypothesis = std::move(null_h);
  r.alternative = std::move(alt);
  return r;
}

}  // namespace detail

/// chi^(1): H0 = {(alpha0, beta0) = (alpha1, beta1)}, chi2(2) under H0.
inline TestReport test_equal_dynamics(const FitResult& fit,
                                      std::optional<std::uint64_t> n = std::nullopt) {
  const auto [s2, one_minus_rho] = detail::noise_scale(fit);
  const double v = detail::stationary_variance(fit);
  const std::uint64_t size = detail::effective_n(fit, n);
  const Theta& t = fit.theta_hat;
  const double da = t.alpha0 - t.alpha1;
  const double db = t.beta0 - t.beta1;
  const double mean_gap = da * fit.mu_hat.mu1 + db;
  const double stat = static_cast<double>(size) / (2.0 * s2 * one_minus_rho) *
                      (da * da * v + mean_gap * mean_gap);
  return detail::chi2_report(TestName::equal_dynamics, stat, 2, size,
                             "(alpha0, beta0) = (alpha1, beta1)",
                             "(alpha0, beta0) != (alpha1, beta1)");
}

/// chi^(2): H0 = {alpha0 = alpha1}, chi2(1) under H0.
inline TestReport test_equal_alpha(const FitResult& fit,
                                   std::optional<std::uint64_t> n = std::nullopt) {
  const auto [s2, one_minus_rho] = detail::noise_scale(fit);
  const double v = detail::stationary_variance(fit);
  const std::uint64_t size = detail::effective_n(fit, n);
  const double da = fit.theta_hat.alpha0 - fit.theta_hat.alpha1;
  const double stat = static_cast<double>(size) * da * da * v / (2.0 * s2 * one_minus_rho);
  return detail::chi2_report(TestName::equal_alpha, stat, 1, size, "alpha0 = alpha1",
                             "alpha0 != alpha1");
}

/// H0 = {beta0 = beta1}. Wald statistic for g(theta) = beta0 - beta1, whose
/// asymptotic variance is 2 sigma2 (1 - rho) K22 with K22 = mu2 / (mu2 - mu1^2).
inline TestReport test_equal_beta(const FitResult& fit,
                                  std::optional<std::uint64_t> n = std::nullopt) {
  const auto [s2, one_minus_rho] = detail::noise_scale(fit);
  const double v = detail::stationary_variance(fit);
  const std::uint64_t size = detail::effective_n(fit, n);
  const double k22 = fit.mu_hat.mu2 / v;
  const double db = fit.theta_hat.beta0 - fit.theta_hat.beta1;
  const double stat = static_cast<double>(size) * db * db / (2.0 * s2 * one_minus_rho * k22);
  return detail::chi2_report(TestName::equal_beta, stat, 1, size, "beta0 = beta1",
                             "beta0 != beta1");
}

/// Gradient of g(theta) = beta0/(1-alpha0) - beta1/(1-alpha1).
inline Eigen::Vector4d fixed_point_gradient(const Theta& t) {
  const double c0 = 1.0 - t.alpha0;
  const double c1 = 1.0 - t.alpha1;
  return {t.beta0 / (c0 * c0), 1.0 / c0, -t.beta1 / (c1 * c1), -1.0 / c1};
}

/// chi^(3): H'0 = {gamma0 = gamma1}, chi2(1) under H'0; the delta-method
/// variance is s^2 = dg Sigma' dg^t at the estimates.
inline TestReport test_equal_fixed_point(const FitResult& fit,
                                         std::optional<std::uint64_t> n = std::nullopt) {
  const Theta& t = fit.theta_hat;
  if (!(std::abs(t.alpha0) < 1.0) || !(std::abs(t.alpha1) < 1.0)) {
    throw Error(Errc::unstable_fit, "fixed points need |alpha_hat| < 1 in both branches");
  }
  detail::noise_scale(fit);
  detail::stationary_variance(fit);
  const std::uint64_t size = detail::effective_n(fit, n);
  const Eigen::Vector4d dg = fixed_point_gradient(t);
  const double s2 = dg.dot(fit.sigma_prime_hat * dg);
  if (!(s2 > 0.0) || !std::isfinite(s2)) {
    throw Error(Errc::degenerate_variance, "delta-method variance must be positive");
  }
  const double gap = fit.gamma_gap();
  const double stat = static_cast<double>(size) * gap * gap / s2;
  return detail::chi2_report(TestName::equal_fixed_point, stat, 1, size, "gamma0 = gamma1",
                             "gamma0 != gamma1");
}

/// Delta-method standard error of gamma0_hat - gamma1_hat.
inline double fixed_point_gap_se(const FitResult& fit) {
  const Eigen::Vector4d dg = fixed_point_gradient(fit.theta_hat);
  return std::sqrt(dg.dot(fit.sigma_prime_hat * dg) / static_cast<double>(fit.counts.triangles));
}

/// xi: normalized sum of sister differences, N(0,1) under beta0 = beta1
/// when both alphas are 0. sigma2_hat and rho_hat come from `constrained`,
/// which should be the alpha-constrained fit of the same lineage.
inline TestReport test_sister_difference(const Lineage& lineage, const FitResult& constrained) {
  const auto [s2, one_minus_rho] = detail::noise_scale(constrained);
  double sum = 0.0;
  std::uint64_t triangles = 0;
  lineage.for_each([&](std::uint64_t i, double) {
    if (!lineage.has(2 * i) || !lineage.has(2 * i + 1)) return;
    sum += lineage.raw(2 * i) - lineage.raw(2 * i + 1);
    ++triangles;
  });
  if (triangles == 0) throw Error(Errc::insufficient_data, "no complete triangle");
  const double xi =
      sum / (std::sqrt(s2) * std::sqrt(2.0 * static_cast<double>(triangles) * one_minus_rho));
  TestReport r;
  r.name = TestName::sister_difference;
  r.statistic = xi;
  r.dof = std::nullopt;
  r.p_value_upper = normal_survival(xi);
  r.p_value_lower = normal_survival(-xi);
  r.p_value = std::min(1.0, 2.0 * normal_survival(std::abs(xi)));
  r.n_effective = triangles;
  r.null_hypothesis = "beta0 = beta1 (alpha0 = alpha1 = 0)";
  r.alternative = "beta0 != beta1; xi drifts to +inf when beta0 > beta1";
  return r;
}

/// Fits the lineage (alpha-constrained for the sister test) and runs `name`.
inline TestReport run_test(const Lineage& lineage, TestName name) {
  if (name == TestName::sister_difference) {
    return test_sister_difference(lineage, fit(lineage, true));
  }
  const FitResult f = fit(lineage);
  switch (name) {
    case TestName::equal_dynamics: return test_equal_dynamics(f);
    case TestName::equal_alpha: return test_equal_alpha(f);
    case TestName::equal_beta: return test_equal_beta(f);
    case TestName::equal_fixed_point: return test_equal_fixed_point(f);
    case TestName::sister_difference: break;
  }
  throw Error(Errc::invalid_parameter, "unknown test");
}

}  // namespace bifurk
