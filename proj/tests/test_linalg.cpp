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

#include "cnnbound/linalg.hpp"
#include "oracles.hpp"

namespace cnnbound {
namespace {

TEST(MatrixNorms, SingleNonzeroRow) {
  Matrix a(2, 2);
  a << 3, 4, 0, 0;
  const NormBundle n = matrix_norms(a);
  EXPECT_DOUBLE_EQ(n.frobenius, 5.0);
  EXPECT_DOUBLE_EQ(n.l21_of_transpose, 5.0);
  EXPECT_DOUBLE_EQ(n.max_row_l2, 5.0);
}

TEST(MatrixNorms, Identity) {
  const NormBundle n = matrix_norms(Matrix::Identity(2, 2));
  EXPECT_DOUBLE_EQ(n.frobenius, std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(n.l21_of_transpose, 2.0);
  EXPECT_DOUBLE_EQ(n.max_row_l2, 1.0);
}

TEST(MatrixNorms, MatchesElementwiseSums) {
  Rng rng = make_rng(7, 1);
  const Matrix a = oracle::random_matrix(6, 4, rng);
  double fro = 0.0, l21 = 0.0, max_row = 0.0;
  for (Index i = 0; i < 6; ++i) {
    double row = 0.0;
    for (Index j = 0; j < 4; ++j) row += a(i, j) * a(i, j);
    fro += row;
    l21 += std::sqrt(row);
    max_row = std::max(max_row, std::sqrt(row));
  }
  const NormBundle n = matrix_norms(a);
  EXPECT_NEAR(n.frobenius, std::sqrt(fro), 1e-12);
  EXPECT_NEAR(n.l21_of_transpose, l21, 1e-12);
  EXPECT_NEAR(n.max_row_l2, max_row, 1e-12);
}

TEST(MatrixNorms, RejectsEmptyAndNonFinite) {
  EXPECT_THROW(matrix_norms(Matrix(0, 3)), ValidationError);
  Matrix a = Matrix::Zero(2, 2);
  a(0, 1) = std::nan("");
  EXPECT_THROW(matrix_norms(a), ValidationError);
}

TEST(SpectralNorm, Diagonal) {
  Matrix a = Matrix::Zero(2, 2);
  a(0, 0) = 3;
  a(1, 1) = 1;
  EXPECT_NEAR(spectral_norm(a).value, 3.0, 3e-6);
}

TEST(SpectralNorm, Identity) {
  EXPECT_NEAR(spectral_norm(Matrix::Identity(2, 2)).value, 1.0, 1e-6);
}

TEST(SpectralNorm, MatchesJacobiOracle) {
  Rng rng = make_rng(7, 2);
  const Matrix a = oracle::random_matrix(8, 5, rng);
  const double exact = oracle::jacobi_sigma_max(a);
  const SpectralEstimate est = spectral_norm(a);
  EXPECT_TRUE(est.converged);
  EXPECT_NEAR(est.value, exact, 1e-6 * exact);
  EXPECT_LE(est.value, exact * (1 + 1e-12));
}

TEST(SpectralNorm, ZeroMatrix) {
  EXPECT_EQ(spectral_norm(Matrix::Zero(3, 2)).value, 0.0);
}

TEST(SpectralNorm, HistoryIsRecordedPerRestart) {
  SpectralOptions opt;
  opt.record_history = true;
  opt.restarts = 2;
  Rng rng = make_rng(7, 3);
  const SpectralEstimate est = spectral_norm(oracle::random_matrix(4, 4, rng), opt);
  ASSERT_EQ(est.history.size(), 2u);
  EXPECT_FALSE(est.history[0].empty());
}

TEST(SpectralNorm, LanczosWarmStartAgrees) {
  Rng rng = make_rng(7, 4);
  const Matrix a = oracle::random_matrix(30, 20, rng);
  SpectralOptions opt;
  opt.lanczos_steps = 10;
  EXPECT_NEAR(spectral_norm(a, opt).value, oracle::jacobi_sigma_max(a), 1e-6);
}

TEST(SpectralNorm, RejectsBadOptions) {
  SpectralOptions opt;
  opt.restarts = 0;
  EXPECT_THROW(spectral_norm(Matrix::Identity(2, 2), opt), ValidationError);
}

}  // namespace
}  // namespace cnnbound
