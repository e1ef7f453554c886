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

#ifndef CNNBOUND_BOUNDS_HPP
#define CNNBOUND_BOUNDS_HPP

#include <functional>
#include <string>
#include <vector>

#include "cnnbound/convnet.hpp"
#include "cnnbound/measures.hpp"

namespace cnnbound {

/// Per-layer weight norms. "Filter" quantities count each shared weight once;
/// "expanded" ones are taken on the full operator Ã, where a filter appears
/// once per patch. Distances are to the reference (initial) weights M.
struct LayerNorms {
  Index layer = 0;
  Index patches = 1;      ///< O_{l-1}
  Index filters = 1;      ///< m_l
  Index spatial_out = 1;  ///< w_l
  Index neurons = 1;      ///< k_l
  double kappa = 1.0;
  double rho = 1.0;

  double spectral = 0.0;  ///< ||Ã^l||_sigma
  bool spectral_converged = true;
  double sigma_prime = 0.0;
  bool sigma_prime_exact = false;

  double fro = 0.0;      ///< ||A^l||_Fr
  double max_row = 0.0;  ///< max_i ||A^l_{i,.}||_2
  double l21_dist = 0.0; ///< ||(A^l - M^l)^T||_{2,1}
  double fro_dist = 0.0; ///< ||A^l - M^l||_Fr
  double l21_dist_expanded = 0.0;
  double fro_dist_expanded = 0.0;
};

/// Norms of every layer. sigma' is computed with `sigma`; spectral norms of
/// large operators use the matrix-free path.
std::vector<LayerNorms> layer_norms(const Architecture& arch, const WeightSet& weights,
                                    const WeightSet& refs, const SigmaPrimeOptions& sigma = {});

/// Spectrally normalized margin capacity on the expanded operators:
/// (1/sqrt(n)) prod s_l (sum (l21_l / s_l)^{2/3})^{3/2}.
double bartlett_capacity(const std::vector<double>& spectral, const std::vector<double>& l21_dist,
                         Index n);
double bartlett_capacity(const std::vector<LayerNorms>& norms, Index n);

/// (L sqrt(W) / (gamma sqrt(n))) prod s_l (sum fro_l^2 / s_l^2)^{1/2}.
double neyshabur_capacity(const std::vector<double>& spectral, const std::vector<double>& fro_dist,
                          Index n, double gamma, Index width);
double neyshabur_capacity(const std::vector<LayerNorms>& norms, Index n, double gamma, Index width);

/// Fully connected multi-class capacity R_A.
double fully_connected_RA(const std::vector<LayerNorms>& norms);

struct TwoLayerResult {
  double R = 0.0;
  double D = 0.0;
  double rhs = 0.0;
};

TwoLayerResult two_layer_bound(double b0, double a1, double a2, double a_star, double b1,
                               double gamma, double w, double w_bar, double classes, Index n,
                               double delta, double constant = 1.0);

enum class Variant { main, simplified, lipschitz, explicit_norm, explicit_norm_kappa, augmented };

std::string variant_name(Variant v);
Variant parse_variant(const std::string& name);
std::vector<Variant> all_variants();
/// Whether the variant's capacity vanishes at A == M.
bool distance_based(Variant v);

/// Measured quantities a multilayer bound consumes. Vectors over layers are
/// indexed 0..L; `norms` holds layers 1..L in order.
struct BoundInputs {
  Index n = 1;
  double gamma = 1.0;
  double delta = 0.01;
  double constant = 1.0;
  Index width_max = 1;      ///< W
  Index width_bar = 1;      ///< W-bar
  std::vector<LayerNorms> norms;
  std::vector<double> B;    ///< B_l(X), raw
  /// max over inputs of rho_{l1 -> l2}, row-major (L+1) x (L+1); lipschitz variant
  std::vector<double> rho_pair;
  std::vector<double> rho_agg;  ///< rho^A_l, indexed 0..L; augmented variant
  bool clamp_B = true;
};

struct VariantResult {
  Variant variant = Variant::main;
  std::vector<double> terms;  ///< T_1..T_L
  double R = 0.0;
  double Gamma = 1.0;
  std::vector<std::string> flags;
};

/// Per-layer terms and the aggregate of the requested variant. Missing
/// measurements raise ValidationError naming the field.
VariantResult multilayer_RA(const BoundInputs& in, Variant variant);

/// (n - #I)/n + 8/n + (1536/sqrt(n)) R sqrt(log2(32 Gamma n^2 + 7 Wbar n)) ln n
/// + 3 sqrt(ln(2/delta)/(2n)).
double firstmilestone_rhs(Index n, double R, double Gamma, double width_bar, double delta,
                          Index certified);

/// C B sqrt((params (sum s_l - ln gamma) + ln(1/delta)) / n).
double param_count_bound(Index params, const std::vector<double>& s, double gamma, Index n,
                         double delta, double B = 1.0, double constant = 1.0);

enum class CertifyMode { norms_only, augmented };

struct CertifyThresholds {
  std::vector<double> b;    ///< 0..L-1; activation norm caps
  std::vector<double> E;    ///< 0..L; gap thresholds (augmented)
  std::vector<double> rho;  ///< 0..L; Lipschitz caps rho_{l1} (augmented)
};

/// Indices of samples satisfying every condition. norms_only: margin > gamma
/// and |F^{0->l}(x_i)|_l <= b_l. augmented adds gap >= 3 E_l, rho_i(l1->l2)
/// <= rho_{l1} b_{l2}, theta_i(l1->l2) <= E_{l2} rho_{l1}, with b_L = gamma,
/// and asks margin >= gamma.
std::vector<Index> certify_samples(const Architecture& arch,
                                   const std::vector<ActivationTrace>& traces,
                                   const std::vector<double>& margins,
                                   const std::vector<LipschitzProfile>& profiles,
                                   const CertifyThresholds& thresholds, double gamma,
                                   CertifyMode mode);
std::vector<Index> certify_samples(const std::vector<SampleSummary>& samples,
                                   const std::vector<double>& margins,
                                   const std::vector<LipschitzProfile>& profiles,
                                   const CertifyThresholds& thresholds, double gamma,
                                   CertifyMode mode);

/// Fraction of margins strictly below gamma.
double empirical_margin_risk(const std::vector<double>& margins, double gamma);

using PosthocEvaluator =
    std::function<double(const std::vector<double>& gammas, const std::vector<double>& Ns)>;

double posthoc_adjust(const PosthocEvaluator& f, const std::vector<double>& gammas,
                      const std::vector<double>& kappas, const std::vector<double>& Ns,
                      const std::vector<double>& betas, double delta, double C1, double C2);

/// (B / sqrt(n)) sqrt(k sum f^2 max F^2 + sum f^2 sum F^2).
double synthetic_normalizer(double B, Index n, double k, const std::vector<double>& f_norms,
                            const std::vector<double>& F_norms);

}  // namespace cnnbound

#endif  // CNNBOUND_BOUNDS_HPP
