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

#ifndef CNNBOUND_MEASURES_HPP
#define CNNBOUND_MEASURES_HPP

#include <cstdint>
#include <limits>
#include <vector>

#include "cnnbound/convnet.hpp"
#include "cnnbound/linalg.hpp"

namespace cnnbound {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Row or coordinate groups: one index list per group.
using IndexGroups = std::vector<std::vector<Index>>;

/// Largest L2 norm of `activation` restricted to any patch.
double max_patch_norm(const Vector& activation, const PatchMap& patches);

/// |x|_{inf,l}: largest L2 norm of one pixel viewed as a vector over channels.
double pixel_inf_norm(const Vector& activation, Index channels, Index spatial);

/// Coordinate groups defining |.|_l on the layer-l activation: the patches of
/// layer l+1, or singletons at the output layer (so |.|_L is the sup norm).
IndexGroups activation_patches(const Architecture& arch, Index l);

/// |F^{0->l}(x)|_l for one activation.
double activation_norm(const Architecture& arch, const Vector& activation, Index l);

/// B_l(X) = max_i |F^{0->l}(x_i)|_l.
double patch_norm_B(const Architecture& arch, const std::vector<ActivationTrace>& traces,
                    Index l);

/// Smallest distance of a layer's preactivation to a decision threshold: for
/// each window, max minus second max (windows of size >= 2) and, with relu,
/// the absolute pooled value. +inf when nothing is thresholded.
double threshold_gap(const Matrix& preactivation, const PoolWindows& windows, bool relu);

/// E_l(x) for one trace; layer 0 and identity layers without pooling give +inf.
double preactivation_gap(const Architecture& arch, const ActivationTrace& trace, Index l);

struct LayerStats {
  double B = 0.0;           ///< max_i |F^{0->l}(x_i)|_l
  double E = kInfinity;     ///< min_i E_l(x_i)
  double E_max = kInfinity; ///< max_i E_l(x_i); a third of it is the alternative threshold
  double pixel_inf = 0.0;   ///< max_i |F^{0->l}(x_i)|_{inf,l}
};

/// Per-sample quantities for layers 0..L, enough for layer_stats and
/// certify_samples without keeping the full trace.
struct SampleSummary {
  std::vector<double> norm;       ///< |F^{0->l}(x)|_l
  std::vector<double> pixel_inf;  ///< |F^{0->l}(x)|_{inf,l}
  std::vector<double> gap;        ///< E_l(x)
};

SampleSummary summarize(const Architecture& arch, const ActivationTrace& trace);

/// Statistics for layers 0..L.
std::vector<LayerStats> layer_stats(const Architecture& arch,
                                    const std::vector<ActivationTrace>& traces);
std::vector<LayerStats> layer_stats(const Architecture& arch,
                                    const std::vector<SampleSummary>& samples);

enum class SigmaMode { exact, upper, sampled };

struct SigmaPrime {
  double value = 0.0;
  bool exact = false;
  bool converged = true;
  SigmaMode mode = SigmaMode::upper;
  /// Number of keep-one-row selections evaluated (0 in upper mode).
  std::uint64_t selections = 0;
};

struct SigmaPrimeOptions {
  SigmaMode mode = SigmaMode::exact;
  std::uint64_t budget = 4096;
  std::uint64_t seed = 0x5eed;
  SpectralOptions spectral{};
};

/// Number of keep-one-row selections, saturating at UINT64_MAX.
std::uint64_t selection_count(const IndexGroups& windows);

/// Max spectral norm over all submatrices keeping one row per window. In
/// exact mode throws ValidationError when the selection count exceeds the
/// budget; sampled mode draws `budget` random selections (a lower estimate).
SigmaPrime sigma_prime(const Matrix& a_tilde, const IndexGroups& windows,
                       const SigmaPrimeOptions& options = {});

/// sigma' of the fully connected output layer: rho * max row norm.
double sigma_prime_last(const Matrix& filters, double rho = 1.0);

/// sigma' of layer l of a network. Exact mode falls back to upper mode (and
/// says so) when enumeration is too large; layers with no row deletion are
/// exact in every mode.
SigmaPrime layer_sigma_prime(const Architecture& arch, const WeightSet& weights, Index l,
                             const SigmaPrimeOptions& options = {});

struct Lipschitz {
  double theta = 0.0;  ///< l_inf -> l_inf
  double rho = 0.0;    ///< l_inf -> max patch l2
};

/// theta = max row L1 norm; rho = max over row groups of sqrt(sum of squared
/// row L1 norms).
Lipschitz lipschitz_from_jacobian(const Matrix& jacobian, const IndexGroups& row_groups);

/// theta and rho of F^{l1->l2} at the activation pattern of the trace, with
/// output patches taken from activation_patches(l2). l1 == l2 is the identity.
Lipschitz empirical_lipschitz(const Architecture& arch, const WeightSet& weights,
                              const ActivationTrace& trace, Index l1, Index l2);

/// theta and rho for every pair 1 <= l1 <= l2 <= L of one input.
struct LipschitzProfile {
  Index depth = 0;
  std::vector<double> theta;  ///< row-major (L+1) x (L+1); unused cells 0
  std::vector<double> rho;

  double theta_at(Index l1, Index l2) const { return theta[cell(l1, l2)]; }
  double rho_at(Index l1, Index l2) const { return rho[cell(l1, l2)]; }
  std::size_t cell(Index l1, Index l2) const {
    return static_cast<std::size_t>(l1 * (depth + 1) + l2);
  }
};

/// Builds the profile by extending Jacobians one layer at a time. Throws
/// DegeneratePointError at ties and ValidationError when a Jacobian would
/// exceed kMaxJacobianEntries.
LipschitzProfile lipschitz_profile(const Architecture& arch, const WeightSet& weights,
                                   const ActivationTrace& trace);

/// rho^A_l = max(max_i max_{lt>=l} rho_i(l->lt) / B_lt, max_i max_{lt>=l} theta_i(l->lt) / E_lt).
/// B and E are indexed 0..L; B[L] should already hold gamma. Infinite E
/// entries contribute nothing.
double rho_aggregate(const std::vector<LipschitzProfile>& profiles, const std::vector<double>& B,
                     const std::vector<double>& E, Index l);

struct ConcentrationResult {
  double C = 0.0;
  double U = 0.0;
  double failure_rate = 0.0;
  std::uint64_t failures = 0;
  double bound = 0.0;
};

/// Monte-Carlo check of C(1-U)|X|_1 <= sqrt(n)|X|_2 <= C(1+U)|X|_1 for
/// standard normal vectors.
ConcentrationResult norm_concentration_check(Index n, std::uint64_t trials, double eps,
                                             std::uint64_t seed);

/// Whether one vector satisfies the two-sided inequality for given C and U.
bool within_concentration(const Vector& x, double C, double U);

}  // namespace cnnbound

#endif  // CNNBOUND_MEASURES_HPP
