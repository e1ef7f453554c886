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

#ifndef CNNBOUND_COVERS_HPP
#define CNNBOUND_COVERS_HPP

#include <cstdint>
#include <functional>
#include <vector>

#include "cnnbound/linalg.hpp"

namespace cnnbound {

enum class CoverKind { maurey, suplinn, suplin, onestep };

struct CoverArgs {
  double a = 1.0;
  double b = 1.0;
  double eps = 1.0;
  double n = 1.0;
  double m = 1.0;
  double U = 1.0;
  double O = 1.0;
  double rho = 1.0;
};

/// Closed-form log-cardinality bound of the selected cover.
double cover_size_bound(CoverKind kind, const CoverArgs& args);

struct CoverVerification {
  std::uint64_t trials = 0;
  double worst_distance = 0.0;
  bool passed = false;
};

/// A finite point set claimed to be an eps-cover (in L2) of the L1 ball of
/// radius beta in R^d.
struct CoverCertificate {
  Index d = 0;
  double beta = 0.0;
  double eps = 0.0;
  /// Lattice resolution: points are beta * z / k with integer z, sum |z_i| <= k.
  /// Zero for hand-built point sets.
  Index k = 0;
  Matrix points;  ///< one point per row
  double claimed_log_size = 0.0;  ///< k log(2d)
  CoverVerification verified;
};

/// Number of integer vectors z in Z^d with sum |z_i| <= k, saturating.
std::uint64_t l1_lattice_size(Index d, Index k);

/// The signed lattice cover with k = ceil(beta^2 / eps^2). Throws when the
/// point count would exceed `size_cap`.
CoverCertificate l1_ball_cover(Index d, double beta, double eps,
                               std::uint64_t size_cap = 5'000'000);

/// Uniform sample from the L1 ball of radius beta.
Vector sample_l1_ball(Index d, double beta, std::uint64_t seed, std::uint64_t index);

/// Max over sampled ball points of the distance to the nearest cover point.
/// Lattice certificates use a local candidate search, which can only
/// overestimate that distance; other point sets are scanned in full. An
/// empty cover gives +inf.
CoverVerification cover_verify(const CoverCertificate& cert, std::uint64_t trials,
                               std::uint64_t seed);

/// Exhaustive grid scan of the ball (d <= 2) with brute-force nearest points.
double grid_worst_distance(const CoverCertificate& cert, Index resolution);

struct ChainingResult {
  double tight = 0.0;   ///< 4 [sum (C^{1/2} a b rho / eps)^{2/3}]^3
  double jensen = 0.0;  ///< 4 L^2 / eps^2 sum (C^{1/2} a b rho)^2
};

ChainingResult chaining_cardinality(const std::vector<double>& C, const std::vector<double>& a,
                                    const std::vector<double>& b_prev,
                                    const std::vector<double>& rho, double eps);

using LogCoverFn = std::function<double(double)>;

/// 4 alpha + (12 / sqrt(n)) int_alpha^1 sqrt(logN(eps)) d eps, by adaptive Simpson.
double dudley_bound(const LogCoverFn& log_n, Index n, double alpha, double tol = 1e-8,
                    std::uint64_t max_evals = 1'000'000);

}  // namespace cnnbound

#endif  // CNNBOUND_COVERS_HPP
