/*
 * Copyright 2026 The cnnbound Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>

#include <numbers>

#include "cnnbound/measures.hpp"
#include "oracles.hpp"

namespace cnnbound {
namespace {

TEST(MaxPatchNorm, SinglePatch) {
  Vector x(2);
  x << 3, 4;
  EXPECT_DOUBLE_EQ(max_patch_norm(x, full_patch(2)), 5.0);
  EXPECT_DOUBLE_EQ(max_patch_norm(Vector::Zero(6), conv1d_patches(2, 3, 2)), 0.0);
}

TEST(MaxPatchNorm, MatchesNestedLoop) {
  Rng rng = make_rng(13, 1);
  const PatchMap pm = conv2d_patches(3, 5, 5, 2, 2, 1);
  for (int t = 0; t < 10; ++t) {
    const Vector x = oracle::random_vector(pm.source_size(), rng);
    double best = 0.0;
    for (Index o = 0; o < pm.count(); ++o) {
      double sq = 0.0;
      for (Index i : pm.patch(o)) sq += x[i] * x[i];
      best = std::max(best, std::sqrt(sq));
    }
    EXPECT_NEAR(max_patch_norm(x, pm), best, 1e-12);
  }
}

TEST(PatchNormB, MaxOverTraces) {
  Rng rng = make_rng(13, 2);
  const Architecture arch = oracle::random_architecture(rng);
  const WeightSet w = glorot_uniform(arch, 3);
  std::vector<ActivationTrace> traces;
  double expected = 0.0;
  for (int i = 0; i < 5; ++i) {
    traces.push_back(forward(arch, w, oracle::random_vector(arch.width(0), rng)));
    expected = std::max(expected, max_patch_norm(traces.back().activation(1), arch.layer(2).patches));
  }
  EXPECT_NEAR(patch_norm_B(arch, traces, 1), expected, 1e-12);
  double sup = 0.0;
  for (const auto& t : traces) sup = std::max(sup, t.scores().cwiseAbs().maxCoeff());
  EXPECT_NEAR(patch_norm_B(arch, traces, arch.depth()), sup, 1e-12);
}

TEST(SigmaPrime, ExhaustiveExample) {
  Matrix a(4, 2);
  a << 1, 0, 0, 1, 2, 0, 0, 2;
  const IndexGroups windows{{0, 1}, {2, 3}};
  double best = 0.0;
  for (Index r1 : windows[0])
    for (Index r2 : windows[1]) {
      Matrix sub(2, 2);
      sub.row(0) = a.row(r1);
      sub.row(1) = a.row(r2);
      best = std::max(best, oracle::jacobi_sigma_max(sub));
    }
  EXPECT_NEAR(best, std::sqrt(5.0), 1e-12);
  const SigmaPrime s = sigma_prime(a, windows);
  EXPECT_TRUE(s.exact);
  EXPECT_EQ(s.selections, 4u);
  EXPECT_NEAR(s.value, std::sqrt(5.0), 1e-6);
}

TEST(SigmaPrime, NoDeletionEqualsSpectralNorm) {
  Rng rng = make_rng(13, 3);
  const Matrix a = oracle::random_matrix(5, 4, rng);
  const IndexGroups singletons{{0}, {1}, {2}, {3}, {4}};
  EXPECT_NEAR(sigma_prime(a, singletons).value, oracle::jacobi_sigma_max(a), 1e-6 * oracle::jacobi_sigma_max(a));
}

TEST(SigmaPrime, LastLayerIsMaxRowNorm) {
  Rng rng = make_rng(13, 4);
  const Matrix a = oracle::random_matrix(3, 7, rng);
  double best = 0.0;
  for (Index i = 0; i < 3; ++i) best = std::max(best, a.row(i).norm());
  EXPECT_NEAR(sigma_prime_last(a), best, 1e-12);
  EXPECT_NEAR(sigma_prime_last(a, 2.0), 2.0 * best, 1e-12);
}

TEST(SigmaPrime, ExactOverBudgetThrowsAndSampledIsLower) {
  Rng rng = make_rng(13, 5);
  const Matrix a = oracle::random_matrix(12, 3, rng);
  IndexGroups windows;
  for (Index w = 0; w < 6; ++w) windows.push_back({2 * w, 2 * w + 1});
  SigmaPrimeOptions opt;
  opt.budget = 10;
  EXPECT_THROW(sigma_prime(a, windows, opt), ValidationError);
  opt.budget = 64;
  const double exact = sigma_prime(a, windows, opt).value;
  opt.mode = SigmaMode::sampled;
  opt.budget = 20;
  const SigmaPrime sampled = sigma_prime(a, windows, opt);
  EXPECT_FALSE(sampled.exact);
  EXPECT_LE(sampled.value, exact * (1 + 1e-9));
  opt.mode = SigmaMode::upper;
  EXPECT_GE(sigma_prime(a, windows, opt).value, exact * (1 - 1e-9));
}

TEST(ThresholdGap, Examples) {
  Matrix relu_only(1, 3);
  relu_only << 0.5, -2, 1;
  EXPECT_DOUBLE_EQ(threshold_gap(relu_only, {{0}, {1}, {2}}, true), 0.5);
  Matrix pooled(1, 3);
  pooled << 5, 3, 1;
  EXPECT_DOUBLE_EQ(threshold_gap(pooled, {{0, 1, 2}}, false), 2.0);
  Matrix mixed(1, 3);
  mixed << 0.3, 5, 4.9;
  EXPECT_NEAR(threshold_gap(mixed, {{0}, {1, 2}}, true), 0.1, 1e-12);
  EXPECT_EQ(threshold_gap(relu_only, {{0}, {1}, {2}}, false), kInfinity);
}

TEST(Lipschitz, FromJacobian) {
  Matrix j(2, 2);
  j << 1, -2, 3, 0;
  const Lipschitz lip = lipschitz_from_jacobian(j, {{0, 1}});
  EXPECT_DOUBLE_EQ(lip.theta, 3.0);
  double best = 0.0;
  for (double s0 : {-1.0, 1.0})
    for (double s1 : {-1.0, 1.0}) {
      Vector x(2);
      x << s0, s1;
      best = std::max(best, (j * x).norm());
    }
  EXPECT_NEAR(best, std::sqrt(18.0), 1e-12);
  EXPECT_NEAR(lip.rho, best, 1e-12);
  const Lipschitz zero = lipschitz_from_jacobian(Matrix::Zero(3, 2), {{0, 1}, {2}});
  EXPECT_EQ(zero.theta, 0.0);
  EXPECT_EQ(zero.rho, 0.0);
}

LipschitzProfile one_layer_profile(double theta, double rho) {
  LipschitzProfile p;
  p.depth = 1;
  p.theta.assign(4, 0.0);
  p.rho.assign(4, 0.0);
  p.theta[p.cell(1, 1)] = theta;
  p.rho[p.cell(1, 1)] = rho;
  return p;
}

TEST(RhoAggregate, Examples) {
  EXPECT_DOUBLE_EQ(rho_aggregate({one_layer_profile(1, 2)}, {1, 1}, {1, 1}, 1), 2.0);
  EXPECT_DOUBLE_EQ(rho_aggregate({one_layer_profile(6, 1)}, {1, 1}, {1, 2}, 1), 3.0);
  EXPECT_THROW(rho_aggregate({one_layer_profile(6, 1)}, {1, 1}, {1, 0}, 1), ValidationError);
}

TEST(RhoAggregate, MatchesNestedMax) {
  Rng rng = make_rng(13, 6);
  std::vector<LipschitzProfile> profiles(3);
  for (auto& p : profiles) {
    p.depth = 2;
    p.theta.assign(9, 0.0);
    p.rho.assign(9, 0.0);
    for (Index a = 1; a <= 2; ++a)
      for (Index b = a; b <= 2; ++b) {
        p.theta[p.cell(a, b)] = uniform01(rng);
        p.rho[p.cell(a, b)] = uniform01(rng);
      }
  }
  const std::vector<double> B{1.0, 0.5 + uniform01(rng), 0.5 + uniform01(rng)};
  const std::vector<double> E{kInfinity, 0.5 + uniform01(rng), 0.5 + uniform01(rng)};
  for (Index l = 1; l <= 2; ++l) {
    double best = 0.0;
    for (const auto& p : profiles)
      for (Index lt = l; lt <= 2; ++lt) {
        best = std::max(best, p.rho[p.cell(l, lt)] / B[lt]);
        best = std::max(best, p.theta[p.cell(l, lt)] / E[lt]);
      }
    EXPECT_DOUBLE_EQ(rho_aggregate(profiles, B, E, l), best);
  }
}

TEST(EmpiricalLipschitz, ProfileMatchesDirectJacobians) {
  Rng rng = make_rng(13, 7);
  const Architecture arch = oracle::random_architecture(rng);
  const WeightSet w = glorot_uniform(arch, 9);
  const ActivationTrace t = forward(arch, w, oracle::random_vector(arch.width(0), rng));
  const LipschitzProfile p = lipschitz_profile(arch, w, t);
  for (Index a = 1; a <= arch.depth(); ++a)
    for (Index b = a; b <= arch.depth(); ++b) {
      const Lipschitz direct = empirical_lipschitz(arch, w, t, a, b);
      EXPECT_NEAR(p.theta_at(a, b), direct.theta, 1e-12);
      EXPECT_NEAR(p.rho_at(a, b), direct.rho, 1e-12);
    }
}

TEST(Concentration, GaussianConstant) {
  const ConcentrationResult r = norm_concentration_check(10, 10, 0.1, 1);
  EXPECT_NEAR(r.C, std::sqrt(std::numbers::pi / 2.0), 1e-12);
  EXPECT_NEAR(r.C, 1.25331, 1e-5);
}

TEST(Concentration, NoFailuresAtScale) {
  const ConcentrationResult r = norm_concentration_check(1000, 10000, 0.1, 3);
  EXPECT_NEAR(r.bound, 5.0 * std::exp(-20.0), 1e-20);
  EXPECT_EQ(r.failures, 0u);
}

TEST(Concentration, ConstantVectorRatio) {
  const Vector ones = Vector::Ones(16);
  EXPECT_TRUE(within_concentration(ones, 1.0, 0.0));
  EXPECT_FALSE(within_concentration(ones, 1.1, 0.01));
}

}  // namespace
}  // namespace cnnbound
