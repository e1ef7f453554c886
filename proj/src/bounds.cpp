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

#include "cnnbound/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace cnnbound {

using detail::require;

std::vector<LayerNorms> layer_norms(const Architecture& arch, const WeightSet& weights,
                                    const WeightSet& refs, const SigmaPrimeOptions& sigma) {
  check_shapes(arch, weights);
  check_shapes(arch, refs);
  std::vector<LayerNorms> out;
  out.reserve(static_cast<std::size_t>(arch.depth()));
  for (Index l = 1; l <= arch.depth(); ++l) {
    const LayerSpec& spec = arch.layer(l);
    const Matrix& a = weights.layer(l);
    const Matrix diff = a - refs.layer(l);
    LayerNorms row;
    row.layer = l;
    row.patches = spec.patch_count();
    row.filters = spec.filters;
    row.spatial_out = spec.spatial_out();
    row.neurons = spec.neurons();
    row.kappa = spec.kappa;
    row.rho = spec.rho;

    const NormBundle own = matrix_norms(a);
    const NormBundle dist = matrix_norms(diff);
    row.fro = own.frobenius;
    row.max_row = own.max_row_l2;
    row.l21_dist = dist.l21_of_transpose;
    row.fro_dist = dist.frobenius;
    row.l21_dist_expanded = expanded_l21(diff, spec.patches);
    row.fro_dist_expanded = expanded_frobenius(diff, spec.patches);

    const SpectralEstimate s = expanded_spectral_norm(a, spec.patches, sigma.spectral);
    row.spectral = s.value;
    row.spectral_converged = s.converged;
    if (l < arch.depth() && spec.pool.empty()) {
      row.sigma_prime = s.value;
      row.sigma_prime_exact = true;
    } else {
      const SigmaPrime sp = layer_sigma_prime(arch, weights, l, sigma);
      row.sigma_prime = sp.value;
      row.sigma_prime_exact = sp.exact;
    }
    out.push_back(row);
  }
  return out;
}

namespace {

// (dist / s)^{2/3} with the 0/0 case defined as 0.
double normalized_term(double dist, double s, const char* what) {
  if (dist == 0.0) return 0.0;
  require(s > 0.0, std::string(what) + ": zero spectral norm with a nonzero distance term");
  return std::pow(dist / s, 2.0 / 3.0);
}

double product(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 1.0, std::multiplies<>());
}

void check_nonnegative(const std::vector<double>& v, const char* what) {
  for (double x : v) require(std::isfinite(x) && x >= 0.0, std::string(what) + ": norms must be finite and >= 0");
}

}  // namespace

double bartlett_capacity(const std::vector<double>& spectral, const std::vector<double>& l21_dist,
                         Index n) {
  require(!spectral.empty() && spectral.size() == l21_dist.size(),
          "bartlett_capacity: need one spectral norm and one distance per layer");
  require(n >= 1, "bartlett_capacity: n must be positive");
  check_nonnegative(spectral, "bartlett_capacity");
  check_nonnegative(l21_dist, "bartlett_capacity");
  double sum = 0.0;
  for (std::size_t i = 0; i < spectral.size(); ++i)
    sum += normalized_term(l21_dist[i], spectral[i], "bartlett_capacity");
  if (sum == 0.0) return 0.0;
  return product(spectral) * std::pow(sum, 1.5) / std::sqrt(static_cast<double>(n));
}

double bartlett_capacity(const std::vector<LayerNorms>& norms, Index n) {
  std::vector<double> s, d;
  for (const auto& r : norms) {
    s.push_back(r.spectral);
    d.push_back(r.l21_dist_expanded);
  }
  return bartlett_capacity(s, d, n);
}

double neyshabur_capacity(const std::vector<double>& spectral, const std::vector<double>& fro_dist,
                          Index n, double gamma, Index width) {
  require(!spectral.empty() && spectral.size() == fro_dist.size(),
          "neyshabur_capacity: need one spectral norm and one distance per layer");
  require(n >= 1 && width >= 1, "neyshabur_capacity: n and W must be positive");
  require(gamma > 0.0, "neyshabur_capacity: gamma must be positive");
  check_nonnegative(spectral, "neyshabur_capacity");
  check_nonnegative(fro_dist, "neyshabur_capacity");
  double sum = 0.0;
  for (std::size_t i = 0; i < spectral.size(); ++i) {
    if (fro_dist[i] == 0.0) continue;
    require(spectral[i] > 0.0, "neyshabur_capacity: zero spectral norm with a nonzero distance term");
    sum += (fro_dist[i] * fro_dist[i]) / (spectral[i] * spectral[i]);
  }
  if (sum == 0.0) return 0.0;
  const double L = static_cast<double>(spectral.size());
  return L * std::sqrt(static_cast<double>(width)) /
         (gamma * std::sqrt(static_cast<double>(n))) * product(spectral) * std::sqrt(sum);
}

double neyshabur_capacity(const std::vector<LayerNorms>& norms, Index n, double gamma,
                          Index width) {
  std::vector<double> s, d;
  for (const auto& r : norms) {
    s.push_back(r.spectral);
    d.push_back(r.fro_dist_expanded);
  }
  return neyshabur_capacity(s, d, n, gamma, width);
}

double fully_connected_RA(const std::vector<LayerNorms>& norms) {
  require(!norms.empty(), "fully_connected_RA: no layers");
  const LayerNorms& last = norms.back();
  require(last.max_row > 0.0, "fully_connected_RA: last layer has no nonzero row");
  double prod = 1.0;
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < norms.size(); ++i) {
    prod *= norms[i].spectral;
    sum += normalized_term(norms[i].l21_dist_expanded, norms[i].spectral, "fully_connected_RA");
  }
  sum += std::pow(last.fro / last.max_row, 2.0 / 3.0);
  return static_cast<double>(norms.size()) * last.max_row * prod * std::pow(sum, 1.5);
}

TwoLayerResult two_layer_bound(double b0, double a1, double a2, double a_star, double b1,
                               double gamma, double w, double w_bar, double classes, Index n,
                               double delta, double constant) {
  require(b0 > 0.0 && b1 > 0.0 && a_star > 0.0 && gamma > 0.0,
          "two_layer_bound: b0, b1, a_star and gamma must be positive");
  require(a1 >= 0.0 && a2 >= 0.0, "two_layer_bound: norm budgets must be nonnegative");
  require(w > 0.0 && w_bar > 0.0 && classes > 0.0, "two_layer_bound: sizes must be positive");
  require(n >= 1 && delta > 0.0, "two_layer_bound: need n >= 1 and delta > 0");
  TwoLayerResult out;
  const double first = b0 * a1 * std::max(1.0 / b1, std::sqrt(w) * a_star / gamma);
  const double second = b1 * a2 / gamma;
  out.R = std::pow(std::pow(first, 2.0 / 3.0) + std::pow(second, 2.0 / 3.0), 1.5);
  out.D = std::max(b0 * a1 * w_bar * a_star / b1, b1 * a2 * classes / gamma);
  const double nn = static_cast<double>(n);
  out.rhs = 3.0 * std::sqrt(std::log(2.0 / delta) / (2.0 * nn));
  if (out.R > 0.0) {
    // The log factor is kept at least 1 when n^2 D is tiny.
    const double log_term = std::log2(std::max(nn * nn * out.D, 2.0));
    out.rhs += constant / std::sqrt(nn) * out.R * std::sqrt(log_term) * std::log(nn);
  }
  return out;
}

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::main: return "main";
    case Variant::simplified: return "simplified";
    case Variant::lipschitz: return "lipschitz";
    case Variant::explicit_norm: return "explicit_norm";
    case Variant::explicit_norm_kappa: return "explicit_norm_kappa";
    case Variant::augmented: return "augmented";
  }
  return "unknown";
}

Variant parse_variant(const std::string& name) {
  for (Variant v : all_variants())
    if (variant_name(v) == name) return v;
  throw ValidationError("unknown bound variant '" + name + "'");
}

std::vector<Variant> all_variants() {
  return {Variant::main,          Variant::simplified,          Variant::lipschitz,
          Variant::explicit_norm, Variant::explicit_norm_kappa, Variant::augmented};
}

bool distance_based(Variant v) {
  return v != Variant::explicit_norm && v != Variant::explicit_norm_kappa;
}

namespace {

struct Context {
  const BoundInputs& in;
  Index L;
  bool clamp;
  bool clamped_any = false;

  double B(Index l) {
    if (l == L) return in.gamma;
    double b = in.B.at(static_cast<std::size_t>(l));
    if (clamp && b < 1.0) {
      clamped_any = true;
      b = 1.0;
    }
    return b;
  }
};

double aggregate(const std::vector<double>& terms) {
  double sum = 0.0;
  for (double t : terms) sum += std::pow(t, 2.0 / 3.0);
  return std::pow(sum, 1.5);
}

}  // namespace

VariantResult multilayer_RA(const BoundInputs& in, Variant variant) {
  const Index L = static_cast<Index>(in.norms.size());
  require(L >= 1, "multilayer_RA: no layers");
  require(in.gamma > 0.0, "multilayer_RA: gamma must be positive");
  const bool needs_B = variant == Variant::main || variant == Variant::lipschitz ||
                       variant == Variant::augmented;
  if (needs_B)
    require(static_cast<Index>(in.B.size()) >= L, "multilayer_RA: missing field B (layers 0..L-1)");
  if (variant == Variant::lipschitz)
    require(static_cast<Index>(in.rho_pair.size()) == (L + 1) * (L + 1),
            "multilayer_RA: missing field rho_pair");
  if (variant == Variant::augmented)
    require(static_cast<Index>(in.rho_agg.size()) == L + 1, "multilayer_RA: missing field rho_agg");

  Context ctx{in, L, in.clamp_B && (variant == Variant::lipschitz || variant == Variant::augmented)};
  VariantResult out;
  out.variant = variant;
  out.terms.assign(static_cast<std::size_t>(L), 0.0);
  const auto& norms = in.norms;
  auto at = [&norms](Index l) -> const LayerNorms& { return norms[static_cast<std::size_t>(l - 1)]; };

  double gamma_arg = 0.0;
  auto note_gamma = [&](Index l, double multiplier, double distance) {
    const double b_prev = needs_B ? ctx.B(l - 1) : 1.0;
    gamma_arg = std::max(gamma_arg, b_prev * distance * static_cast<double>(at(l).patches) *
                                        static_cast<double>(at(l).filters) * multiplier);
  };

  switch (variant) {
    case Variant::main:
    case Variant::lipschitz:
    case Variant::augmented: {
      for (Index l = 1; l < L; ++l) {
        double mult = 0.0;
        if (variant == Variant::main) {
          double prod = 1.0;
          for (Index U = l; U <= L; ++U) {
            if (U > l) prod *= at(U).sigma_prime;
            const double bU = ctx.B(U);
            require(bU > 0.0, "multilayer_RA: B_" + std::to_string(U) + " vanishes");
            mult = std::max(mult, prod / bU);
          }
          mult *= std::sqrt(static_cast<double>(at(l).spatial_out));
        } else if (variant == Variant::lipschitz) {
          for (Index lt = l + 1; lt <= L; ++lt) {
            const double bt = ctx.B(lt);
            require(bt > 0.0, "multilayer_RA: B_" + std::to_string(lt) + " vanishes");
            mult = std::max(mult, in.rho_pair[static_cast<std::size_t>(l * (L + 1) + lt)] / bt);
          }
        } else {
          mult = in.rho_agg[static_cast<std::size_t>(l)];
        }
        out.terms[static_cast<std::size_t>(l - 1)] = ctx.B(l - 1) * at(l).l21_dist * mult;
        note_gamma(l, mult, at(l).l21_dist);
      }
      out.terms.back() = ctx.B(L - 1) / in.gamma * at(L).fro_dist;
      note_gamma(L, 1.0 / in.gamma, at(L).fro_dist);
      out.R = aggregate(out.terms);
      break;
    }
    case Variant::simplified: {
      std::vector<double> s;
      for (Index l = 1; l <= L; ++l) s.push_back(at(l).spectral);
      for (Index l = 1; l <= L; ++l) {
        double others = 1.0;
        for (Index i = 1; i <= L; ++i)
          if (i != l) others *= s[static_cast<std::size_t>(i - 1)];
        if (l < L) {
          const double mult = others * std::sqrt(static_cast<double>(at(l).spatial_out)) / in.gamma;
          out.terms[static_cast<std::size_t>(l - 1)] = at(l).l21_dist * mult;
          note_gamma(l, mult, at(l).l21_dist);
        } else {
          out.terms.back() = others * at(L).fro_dist;
          note_gamma(L, others, at(L).fro_dist);
        }
      }
      out.R = aggregate(out.terms);
      break;
    }
    case Variant::explicit_norm:
    case Variant::explicit_norm_kappa: {
      const LayerNorms& last = at(L);
      require(last.max_row > 0.0, "multilayer_RA: last layer has no nonzero row");
      double prefactor = last.rho * last.max_row;
      for (Index l = 1; l < L; ++l) {
        require(at(l).spectral > 0.0,
                "multilayer_RA: vanishing spectral norm at layer " + std::to_string(l));
        prefactor *= at(l).rho * at(l).spectral;
      }
      double sum = 0.0;
      for (Index l = 1; l < L; ++l) {
        const LayerNorms& r = at(l);
        double t;
        if (variant == Variant::explicit_norm)
          t = static_cast<double>(r.neurons) * r.fro_dist * r.fro_dist / (r.spectral * r.spectral);
        else
          t = std::cbrt(r.kappa) * std::pow(r.l21_dist / r.spectral, 2.0 / 3.0);
        out.terms[static_cast<std::size_t>(l - 1)] = t;
        sum += t;
      }
      const double last_term = variant == Variant::explicit_norm
                                    ? (last.fro * last.fro) / (last.max_row * last.max_row)
                                    : std::pow(last.fro / last.max_row, 2.0 / 3.0);
      out.terms.back() = last_term;
      sum += last_term;
      if (variant == Variant::explicit_norm)
        out.R = static_cast<double>(L) * prefactor * std::sqrt(sum) / in.gamma;
      else
        out.R = prefactor * std::pow(sum, 1.5) / in.gamma;
      gamma_arg = out.R;
      out.flags.push_back("terms are the addends inside the norm sum, not T_l");
      break;
    }
  }
  out.Gamma = std::max(gamma_arg, 1.0);
  if (gamma_arg < 1.0) out.flags.push_back("Gamma raised to 1 for the log term");
  if (ctx.clamped_any) out.flags.push_back("B_l below 1 clamped to 1");
  return out;
}

double firstmilestone_rhs(Index n, double R, double Gamma, double width_bar, double delta,
                          Index certified) {
  require(n >= 1, "firstmilestone_rhs: n must be positive");
  require(Gamma >= 1.0 && width_bar >= 1.0, "firstmilestone_rhs: Gamma and W-bar must be >= 1");
  require(R >= 0.0 && delta > 0.0, "firstmilestone_rhs: need R >= 0 and delta > 0");
  require(certified >= 0 && certified <= n, "firstmilestone_rhs: certified count out of range");
  const double nn = static_cast<double>(n);
  const double empirical = static_cast<double>(n - certified) / nn;
  const double capacity = 1536.0 / std::sqrt(nn) * R *
                          std::sqrt(std::log2(32.0 * Gamma * nn * nn + 7.0 * width_bar * nn)) *
                          std::log(nn);
  return empirical + 8.0 / nn + capacity + 3.0 * std::sqrt(std::log(2.0 / delta) / (2.0 * nn));
}

double param_count_bound(Index params, const std::vector<double>& s, double gamma, Index n,
                         double delta, double B, double constant) {
  require(params >= 0 && n >= 1, "param_count_bound: need params >= 0 and n >= 1");
  require(gamma > 0.0 && delta > 0.0, "param_count_bound: gamma and delta must be positive");
  const double sum_s = std::accumulate(s.begin(), s.end(), 0.0);
  const double radicand =
      (static_cast<double>(params) * (sum_s - std::log(gamma)) + std::log(1.0 / delta)) /
      static_cast<double>(n);
  require(radicand >= 0.0, "param_count_bound: negative radicand (" + std::to_string(radicand) +
                               "); gamma is too large relative to the spectral terms");
  return constant * B * std::sqrt(radicand);
}

std::vector<Index> certify_samples(const Architecture& arch,
                                   const std::vector<ActivationTrace>& traces,
                                   const std::vector<double>& margins,
                                   const std::vector<LipschitzProfile>& profiles,
                                   const CertifyThresholds& thresholds, double gamma,
                                   CertifyMode mode) {
  std::vector<SampleSummary> samples;
  for (const auto& t : traces) samples.push_back(summarize(arch, t));
  return certify_samples(samples, margins, profiles, thresholds, gamma, mode);
}

std::vector<Index> certify_samples(const std::vector<SampleSummary>& samples,
                                   const std::vector<double>& margins,
                                   const std::vector<LipschitzProfile>& profiles,
                                   const CertifyThresholds& thresholds, double gamma,
                                   CertifyMode mode) {
  require(samples.size() == margins.size(), "certify_samples: samples and margins differ in length");
  if (samples.empty()) return {};
  const Index L = static_cast<Index>(samples.front().norm.size()) - 1;
  require(static_cast<Index>(thresholds.b.size()) >= L, "certify_samples: need b_0..b_{L-1}");
  for (Index l = 0; l < L; ++l)
    require(thresholds.b[static_cast<std::size_t>(l)] > 0.0, "certify_samples: thresholds must be positive");
  const bool augmented = mode == CertifyMode::augmented;
  if (augmented) {
    require(profiles.size() == samples.size(), "certify_samples: one Lipschitz profile per sample");
    require(static_cast<Index>(thresholds.E.size()) == L + 1 &&
                static_cast<Index>(thresholds.rho.size()) == L + 1,
            "certify_samples: E and rho thresholds need entries 0..L");
  }
  auto b_at = [&](Index l) { return l == L ? gamma : thresholds.b[static_cast<std::size_t>(l)]; };
  std::vector<Index> kept;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double m = margins[i];
    if (augmented ? !(m >= gamma) : !(m > gamma)) continue;
    bool ok = true;
    for (Index l = 0; l < L && ok; ++l)
      ok = samples[i].norm[static_cast<std::size_t>(l)] <= thresholds.b[static_cast<std::size_t>(l)];
    if (ok && augmented) {
      for (Index l = 1; l <= L && ok; ++l) {
        const double e = thresholds.E[static_cast<std::size_t>(l)];
        if (std::isfinite(e)) ok = samples[i].gap[static_cast<std::size_t>(l)] >= 3.0 * e;
      }
      const LipschitzProfile& p = profiles[i];
      for (Index l1 = 1; l1 <= L && ok; ++l1) {
        const double cap = thresholds.rho[static_cast<std::size_t>(l1)];
        for (Index l2 = l1; l2 <= L && ok; ++l2) {
          ok = p.rho_at(l1, l2) <= cap * b_at(l2);
          const double e = thresholds.E[static_cast<std::size_t>(l2)];
          if (ok && std::isfinite(e)) ok = p.theta_at(l1, l2) <= e * cap;
        }
      }
    }
    if (ok) kept.push_back(static_cast<Index>(i));
  }
  return kept;
}

double empirical_margin_risk(const std::vector<double>& margins, double gamma) {
  require(!margins.empty(), "empirical_margin_risk: no margins");
  const auto below = std::count_if(margins.begin(), margins.end(), [gamma](double m) { return m < gamma; });
  return static_cast<double>(below) / static_cast<double>(margins.size());
}

double posthoc_adjust(const PosthocEvaluator& f, const std::vector<double>& gammas,
                      const std::vector<double>& kappas, const std::vector<double>& Ns,
                      const std::vector<double>& betas, double delta, double C1, double C2) {
  require(gammas.size() == kappas.size(), "posthoc_adjust: one kappa per gamma statistic");
  require(Ns.size() == betas.size(), "posthoc_adjust: one beta per N statistic");
  require(delta > 0.0 && C2 > 0.0, "posthoc_adjust: delta and C2 must be positive");
  std::vector<double> g(gammas.size()), N(Ns.size());
  double radicand = std::log(1.0 / delta);
  for (std::size_t i = 0; i < gammas.size(); ++i) {
    require(gammas[i] > 0.0, "posthoc_adjust: gamma statistics must be positive");
    require(kappas[i] > 0.0, "posthoc_adjust: kappa must be positive");
    g[i] = std::min(gammas[i] / 2.0, 1.0 / kappas[i]);
    radicand += std::log(2.0 * kappas[i] / gammas[i]);
  }
  for (std::size_t i = 0; i < Ns.size(); ++i) {
    require(Ns[i] >= 0.0 && betas[i] > 0.0, "posthoc_adjust: need N >= 0 and beta > 0");
    N[i] = Ns[i] + betas[i];
    radicand += 2.0 * std::log(2.0 + Ns[i] / betas[i]);
  }
  require(radicand >= 0.0, "posthoc_adjust: negative radicand");
  return f(g, N) + C1 / std::sqrt(C2) * std::sqrt(radicand);
}

double synthetic_normalizer(double B, Index n, double k, const std::vector<double>& f_norms,
                            const std::vector<double>& F_norms) {
  require(n >= 1 && B >= 0.0 && k >= 0.0, "synthetic_normalizer: need n >= 1, B >= 0, k >= 0");
  check_nonnegative(f_norms, "synthetic_normalizer");
  check_nonnegative(F_norms, "synthetic_normalizer");
  double sum_f = 0.0, sum_F = 0.0, max_F = 0.0;
  for (double x : f_norms) sum_f += x * x;
  for (double x : F_norms) {
    sum_F += x * x;
    max_F = std::max(max_F, x * x);
  }
  return B / std::sqrt(static_cast<double>(n)) * std::sqrt(k * sum_f * max_F + sum_f * sum_F);
}

}  // namespace cnnbound
