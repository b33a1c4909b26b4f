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

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "bifurk/bar.hpp"
#include "bifurk/hypotest.hpp"
#include "bifurk/inference.hpp"
#include "bifurk/stats.hpp"

namespace bifurk {
namespace {

const Theta kRef{0.5, 1.0, 0.7, 0.3};

// BarParams refuses sigma2 = 0, so the noiseless tree is built here.
Lineage noiseless_tree(const Theta& t, double root, unsigned r) {
  Lineage l;
  l.set(TreeIndex{1}, root);
  for (std::uint64_t n = 1; n < generation_first(r); ++n) {
    const double x = l.at(n);
    l.set(TreeIndex{2 * n}, t.alpha0 * x + t.beta0);
    l.set(TreeIndex{2 * n + 1}, t.alpha1 * x + t.beta1);
  }
  return l;
}

std::uint64_t mirror(std::uint64_t n) {
  const unsigned q = generation_of(TreeIndex{n});
  return generation_first(q) + (generation_last(q) - n);
}

Lineage transformed(const Lineage& l, double c, double d) {
  Lineage out;
  l.for_each([&](std::uint64_t n, double x) { out.set(TreeIndex{n}, c * x + d); });
  return out;
}

TEST(FitTheta, ThreePointRegression) {
  Lineage l;
  l.set(TreeIndex{1}, 0.0);
  l.set(TreeIndex{2}, 1.0);
  l.set(TreeIndex{3}, 1.0);
  l.set(TreeIndex{6}, 1.0);
  l.set(TreeIndex{5}, -1.0);
  l.set(TreeIndex{10}, 0.0);
  double a = 0, b = 0;
  EXPECT_EQ(detail::fit_branch(l, 0, false, a, b), 3u);
  EXPECT_NEAR(a, 0.5, 1e-15);
  EXPECT_NEAR(b, 2.0 / 3.0, 1e-15);
}

TEST(FitTheta, SingleTriangleIsDegenerate) {
  Lineage l;
  l.set(TreeIndex{1}, 0.3);
  l.set(TreeIndex{2}, 1.0);
  l.set(TreeIndex{3}, 2.0);
  try {
    fit_theta(l);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::degenerate_design);
  }
  // With alpha fixed at zero a single triangle is enough.
  const auto c = fit_theta(l, true);
  EXPECT_EQ(c.theta, (Theta{0.0, 1.0, 0.0, 2.0}));
}

TEST(FitTheta, NoPairs) {
  Lineage l;
  l.set(TreeIndex{1}, 0.3);
  l.set(TreeIndex{3}, 0.4);
  try {
    fit_theta(l);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::insufficient_data);
  }
}

TEST(FitTheta, NoiselessRecovery) {
  const Theta t{0.35, 0.9, -0.45, 1.7};
  const Lineage l = noiseless_tree(t, 1.0, 6);
  const FitResult f = fit(l);
  EXPECT_NEAR(f.theta_hat.alpha0, t.alpha0, 1e-8);
  EXPECT_NEAR(f.theta_hat.beta0, t.beta0, 1e-8);
  EXPECT_NEAR(f.theta_hat.alpha1, t.alpha1, 1e-8);
  EXPECT_NEAR(f.theta_hat.beta1, t.beta1, 1e-8);
  EXPECT_NEAR(f.gamma_hat[0], t.beta0 / (1 - t.alpha0), 1e-8);
  EXPECT_NEAR(f.gamma_hat[1], t.beta1 / (1 - t.alpha1), 1e-8);
  for (const auto& e : residuals(l, t)) {
    EXPECT_NEAR(e.eps0, 0.0, 1e-12);
    EXPECT_NEAR(e.eps1, 0.0, 1e-12);
  }
  EXPECT_FALSE(f.rho_hat.has_value() && f.sigma2_hat == 0.0);
  EXPECT_NEAR(f.sigma2_hat, 0.0, 1e-20);
}

TEST(NoiseFit, ZeroResidues) {
  const Residuals res{{1, 0.0, 0.0}, {2, 0.0, 0.0}};
  EXPECT_EQ(fit_sigma2(res), 0.0);
  try {
    fit_rho(res, 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::zero_variance);
  }
  EXPECT_THROW(fit_sigma2(Residuals{}), Error);
}

TEST(NoiseFit, PerfectlyCorrelated) {
  const auto nf = fit_sigma2_rho(Residuals{{1, 1.0, 1.0}, {2, -1.0, -1.0}});
  EXPECT_EQ(nf.sigma2, 1.0);
  EXPECT_EQ(nf.rho, 1.0);
}

TEST(Residuals, OrthogonalToConstant) {
  const BarParams p(kRef, 1.0, 0.4);
  const Lineage l(simulate_bar(p, StationaryRoot{}, 10, 3));
  const auto f = fit(l);
  double s0 = 0.0, s1 = 0.0, x0 = 0.0;
  for (const auto& e : residuals(l, f.theta_hat)) {
    s0 += e.eps0;
    s1 += e.eps1;
    x0 += e.eps0 * l.at(e.mother);
  }
  EXPECT_NEAR(s0, 0.0, 1e-9);
  EXPECT_NEAR(s1, 0.0, 1e-9);
  EXPECT_NEAR(x0, 0.0, 1e-8);
}

TEST(Residuals, GaussianMoments) {
  const BarParams p(kRef, 1.0, 0.4);
  const Lineage l(simulate_bar(p, StationaryRoot{}, 13, 4));
  std::vector<double> e;
  for (const auto& r : residuals(l, fit(l).theta_hat)) {
    if (r.mother < generation_first(12)) e.push_back(r.eps0);
  }
  const auto m = sample_moments(e);
  EXPECT_LT(std::abs(m.skewness), 0.1);
  EXPECT_LT(std::abs(m.excess_kurtosis), 0.2);
}

TEST(Fit, NoiseConsistency) {
  const BarParams p(kRef, 1.0, 0.4);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Lineage l(simulate_bar(p, StationaryRoot{}, 14, derive_seed(11, seed, 14)));
    const auto f = fit(l);
    EXPECT_LT(std::abs(f.sigma2_hat - 1.0), 0.03);
    EXPECT_LT(std::abs(*f.rho_hat - 0.4), 0.03);
  }
}

TEST(Fit, BranchMirrorSymmetry) {
  const BarParams p(kRef, 1.0, -0.3);
  const Lineage l(simulate_bar(p, StationaryRoot{}, 9, 5));
  Lineage m;
  l.for_each([&](std::uint64_t n, double x) { m.set(TreeIndex{mirror(n)}, x); });
  const auto a = fit(l);
  const auto b = fit(m);
  EXPECT_NEAR(a.theta_hat.alpha0, b.theta_hat.alpha1, 1e-12);
  EXPECT_NEAR(a.theta_hat.beta0, b.theta_hat.beta1, 1e-12);
  EXPECT_NEAR(a.theta_hat.alpha1, b.theta_hat.alpha0, 1e-12);
  EXPECT_NEAR(a.theta_hat.beta1, b.theta_hat.beta0, 1e-12);
  EXPECT_NEAR(a.sigma2_hat, b.sigma2_hat, 1e-12);
  EXPECT_NEAR(std::abs(*a.rho_hat), std::abs(*b.rho_hat), 1e-12);
}

TEST(Fit, AffineEquivariance) {
  const BarParams p(kRef, 1.0, 0.4);
  const Lineage l(simulate_bar(p, StationaryRoot{}, 9, 6));
  const double c = 2.5, d = -1.75;
  const auto a = fit(l);
  const auto b = fit(transformed(l, c, d));
  for (unsigned e = 0; e < 2; ++e) {
    EXPECT_NEAR(b.theta_hat.alpha(e), a.theta_hat.alpha(e), 1e-10);
    EXPECT_NEAR(b.theta_hat.beta(e), c * a.theta_hat.beta(e) + d * (1 - a.theta_hat.alpha(e)),
                1e-10);
  }
  EXPECT_NEAR(b.sigma2_hat, c * c * a.sigma2_hat, 1e-10);
  EXPECT_NEAR(*b.rho_hat, *a.rho_hat, 1e-10);
}

TEST(Fit, IncompleteTreeCounts) {
  const BarParams p(kRef, 1.0, 0.4);
  const Lineage full(simulate_bar(p, StationaryRoot{}, 6, 7));
  Lineage l;
  full.for_each([&](std::uint64_t n, double x) {
    if (n != 9 && n != 22) l.set(TreeIndex{n}, x);
  });
  const auto f = fit(l);
  // T_6 has 63 mothers. Dropping 9 loses pairs (4,9), (9,18), (9,19);
  // dropping 22 loses (11,22), (22,44), (22,45).
  EXPECT_EQ(f.counts.pairs0, 63u - 3u);
  EXPECT_EQ(f.counts.pairs1, 63u - 3u);
  // Triangles of 4, 9, 11 and 22 are broken.
  EXPECT_EQ(f.counts.triangles, 63u - 4u);
  EXPECT_EQ(residuals(l, f.theta_hat).size(), f.counts.triangles);
}

TEST(AsymptoticCovariance, Structure) {
  const Eigen::Matrix4d s0 = asymptotic_covariance(kRef, 1.0, 0.0);
  EXPECT_EQ(s0.topRightCorner(2, 2).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(s0.bottomLeftCorner(2, 2).cwiseAbs().maxCoeff(), 0.0);

  const Eigen::Matrix4d s = asymptotic_covariance(Theta{0, 0, 0, 0}, 1.0, 0.3);
  Eigen::Matrix4d expected = Eigen::Matrix4d::Identity();
  expected.block<2, 2>(0, 2) = 0.3 * Eigen::Matrix2d::Identity();
  expected.block<2, 2>(2, 0) = 0.3 * Eigen::Matrix2d::Identity();
  EXPECT_LT((s - expected).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(AsymptoticCovariance, PositiveSemidefinite) {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> a(-0.99, 0.99), b(-3.0, 3.0), s(0.01, 4.0);
  for (int i = 0; i < 200; ++i) {
    const BarParams p(Theta{a(gen), b(gen), a(gen), b(gen)}, s(gen), a(gen));
    const Eigen::Matrix4d m = asymptotic_covariance(p);
    EXPECT_TRUE(m.isApprox(m.transpose(), 0.0));
    EXPECT_TRUE((m.topLeftCorner(2, 2) - m.bottomRightCorner(2, 2)).isZero());
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(m);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-10 * m.norm());
    EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
  }
}

TEST(Fit, FixedPointGapCoverage) {
  const BarParams p(Theta{0.5, 1.0, 0.5, 0.8}, 1.0, 0.4);
  const double gap = 0.4;
  int covered = 0;
  const int reps = 200;
  for (int k = 0; k < reps; ++k) {
    const Lineage l(simulate_bar(p, StationaryRoot{}, 12, derive_seed(21, k, 12)));
    const auto f = fit(l);
    if (std::abs(f.gamma_gap() - gap) <= 1.959964 * fixed_point_gap_se(f)) ++covered;
  }
  EXPECT_GE(covered, reps * 9 / 10);
}

}  // namespace
}  // namespace bifurk
