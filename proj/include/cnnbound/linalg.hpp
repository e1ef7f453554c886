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

#ifndef CNNBOUND_LINALG_HPP
#define CNNBOUND_LINALG_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "cnnbound/error.hpp"

namespace cnnbound {

using Index = Eigen::Index;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// The three matrix norms the bound formulas consume.
///
/// `l21_of_transpose` is the (2,1)-norm of A^T, i.e. the sum of the L2 norms
/// of the rows of A. For a filter matrix (one row per filter) this is the sum
/// of per-filter norms.
struct NormBundle {
  double frobenius = 0.0;
  double l21_of_transpose = 0.0;
  double max_row_l2 = 0.0;
};

template <typename Derived>
NormBundle matrix_norms(const Eigen::MatrixBase<Derived>& a) {
  detail::require(a.rows() > 0 && a.cols() > 0, "matrix_norms: empty matrix");
  detail::require(a.allFinite(), "matrix_norms: non-finite entry");
  NormBundle out;
  double sum_sq = 0.0;
  for (Index r = 0; r < a.rows(); ++r) {
    const double row_sq = a.row(r).squaredNorm();
    const double row_norm = std::sqrt(row_sq);
    sum_sq += row_sq;
    out.l21_of_transpose += row_norm;
    out.max_row_l2 = std::max(out.max_row_l2, row_norm);
  }
  out.frobenius = std::sqrt(sum_sq);
  return out;
}

struct SpectralOptions {
  double rel_tol = 1e-6;
  int max_iter = 10'000;
  int restarts = 3;
  std::uint64_t seed = 0x9e3779b97f4a7c15ULL;
  /// Keep the per-iteration Rayleigh quotients |Av|^2 of every restart.
  bool record_history = false;
  /// When positive, each restart first runs this many Lanczos steps on A^T A
  /// and starts power iteration from the top Ritz vector.
  int lanczos_steps = 0;
};

struct SpectralEstimate {
  double value = 0.0;
  bool converged = true;
  int iterations = 0;
  /// One entry per restart when requested; each is the sequence of |Av|^2.
  std::vector<std::vector<double>> history;
};

using LinearMap = std::function<Vector(const Vector&)>;

/// Largest singular value of a linear operator given only its action and the
/// action of its adjoint. Power iteration on A^T A with random restarts; the
/// estimate approaches sigma_max from below. `converged` is false when some
/// restart hit `max_iter` before its relative Gram residual fell below
/// `rel_tol` and its Rayleigh quotients were still moving by more than that.
SpectralEstimate spectral_norm(const LinearMap& apply, const LinearMap& apply_adjoint,
                               Index input_dim, const SpectralOptions& options = {});

SpectralEstimate spectral_norm(const Matrix& a, const SpectralOptions& options = {});

template <typename Derived>
SpectralEstimate spectral_norm(const Eigen::MatrixBase<Derived>& a,
                               const SpectralOptions& options = {}) {
  return spectral_norm(Matrix(a), options);
}

}  // namespace cnnbound

#endif  // CNNBOUND_LINALG_HPP
