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

#include "cnnbound/measures.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "cnnbound/random.hpp"

namespace cnnbound {

using detail::require;

double max_patch_norm(const Vector& activation, const PatchMap& patches) {
  require(activation.size() == patches.source_size(), "max_patch_norm: size mismatch");
  double best = 0.0;
  for (Index o = 0; o < patches.count(); ++o) {
    double sq = 0.0;
    for (Index i : patches.patch(o)) sq += activation[i] * activation[i];
    best = std::max(best, sq);
  }
  return std::sqrt(best);
}

double pixel_inf_norm(const Vector& activation, Index channels, Index spatial) {
  require(activation.size() == channels * spatial, "pixel_inf_norm: size mismatch");
  double best = 0.0;
  for (Index p = 0; p < spatial; ++p) {
    double sq = 0.0;
    for (Index c = 0; c < channels; ++c) sq += activation[c * spatial + p] * activation[c * spatial + p];
    best = std::max(best, sq);
  }
  return std::sqrt(best);
}

IndexGroups activation_patches(const Architecture& arch, Index l) {
  require(l >= 0 && l <= arch.depth(), "activation_patches: layer out of range");
  IndexGroups groups;
  if (l == arch.depth()) {
    for (Index j = 0; j < arch.width(l); ++j) groups.push_back({j});
    return groups;
  }
  const PatchMap& patches = arch.layer(l + 1).patches;
  groups.reserve(static_cast<std::size_t>(patches.count()));
  for (Index o = 0; o < patches.count(); ++o) {
    const auto p = patches.patch(o);
    groups.emplace_back(p.begin(), p.end());
  }
  return groups;
}

double activation_norm(const Architecture& arch, const Vector& activation, Index l) {
  require(l >= 0 && l <= arch.depth(), "activation_norm: layer out of range");
  if (l == arch.depth()) return activation.cwiseAbs().maxCoeff();
  return max_patch_norm(activation, arch.layer(l + 1).patches);
}

double patch_norm_B(const Architecture& arch, const std::vector<ActivationTrace>& traces,
                    Index l) {
  require(!traces.empty(), "patch_norm_B: empty dataset");
  double best = 0.0;
  for (const auto& t : traces) best = std::max(best, activation_norm(arch, t.activation(l), l));
  return best;
}

double threshold_gap(const Matrix& preactivation, const PoolWindows& windows, bool relu) {
  double gap = kInfinity;
  for (Index j = 0; j < preactivation.rows(); ++j) {
    for (const auto& win : windows) {
      double top = -kInfinity;
      double second = -kInfinity;
      for (Index o : win) {
        const double v = preactivation(j, o);
        if (v > top) {
          second = top;
          top = v;
        } else if (v > second) {
          second = v;
        }
      }
      if (win.size() >= 2) gap = std::min(gap, top - second);
      if (relu) gap = std::min(gap, std::abs(top));
    }
  }
  return gap;
}

double preactivation_gap(const Architecture& arch, const ActivationTrace& trace, Index l) {
  require(l >= 0 && l <= arch.depth(), "preactivation_gap: layer out of range");
  if (l == 0) return kInfinity;
  const LayerSpec& spec = arch.layer(l);
  return threshold_gap(trace.layers.at(static_cast<std::size_t>(l - 1)).preactivation,
                       spec.effective_windows(), spec.activation == Activation::relu);
}

SampleSummary summarize(const Architecture& arch, const ActivationTrace& trace) {
  SampleSummary s;
  for (Index l = 0; l <= arch.depth(); ++l) {
    s.norm.push_back(activation_norm(arch, trace.activation(l), l));
    s.pixel_inf.push_back(pixel_inf_norm(trace.activation(l), arch.channels(l), arch.spatial(l)));
    s.gap.push_back(preactivation_gap(arch, trace, l));
  }
  return s;
}

std::vector<LayerStats> layer_stats(const Architecture& arch,
                                    const std::vector<ActivationTrace>& traces) {
  std::vector<SampleSummary> samples;
  for (const auto& t : traces) samples.push_back(summarize(arch, t));
  return layer_stats(arch, samples);
}

std::vector<LayerStats> layer_stats(const Architecture& arch,
                                    const std::vector<SampleSummary>& samples) {
  require(!samples.empty(), "layer_stats: empty dataset");
  std::vector<LayerStats> stats(static_cast<std::size_t>(arch.depth() + 1));
  for (Index l = 0; l <= arch.depth(); ++l) {
    const auto k = static_cast<std::size_t>(l);
    LayerStats& s = stats[k];
    bool any_finite_gap = false;
    double gap_max = 0.0;
    for (const auto& t : samples) {
      require(t.norm.size() == stats.size(), "layer_stats: summary depth mismatch");
      s.B = std::max(s.B, t.norm[k]);
      s.pixel_inf = std::max(s.pixel_inf, t.pixel_inf[k]);
      const double g = t.gap[k];
      s.E = std::min(s.E, g);
      if (std::isfinite(g)) {
        any_finite_gap = true;
        gap_max = std::max(gap_max, g);
      }
    }
    s.E_max = any_finite_gap ? gap_max : kInfinity;
  }
  return stats;
}

std::uint64_t selection_count(const IndexGroups& windows) {
  std::uint64_t count = 1;
  for (const auto& w : windows) {
    const auto size = static_cast<std::uint64_t>(w.size());
    if (size == 0) return 0;
    if (count > UINT64_MAX / size) return UINT64_MAX;
    count *= size;
  }
  return count;
}

namespace {

void check_windows(const IndexGroups& windows, Index rows) {
  require(!windows.empty(), "sigma_prime: no pooling windows");
  std::vector<char> used(static_cast<std::size_t>(rows), 0);
  for (const auto& w : windows) {
    require(!w.empty(), "sigma_prime: empty window");
    for (Index r : w) {
      require(r >= 0 && r < rows, "sigma_prime: window row out of range");
      require(!used[static_cast<std::size_t>(r)], "sigma_prime: windows overlap");
      used[static_cast<std::size_t>(r)] = 1;
    }
  }
}

bool all_singletons(const IndexGroups& windows) {
  return std::all_of(windows.begin(), windows.end(), [](const auto& w) { return w.size() == 1; });
}

double selected_norm(const Matrix& a, const IndexGroups& windows, const std::vector<Index>& pick,
                     const SpectralOptions& spectral, bool& converged) {
  Matrix sub(static_cast<Index>(windows.size()), a.cols());
  for (std::size_t k = 0; k < windows.size(); ++k)
    sub.row(static_cast<Index>(k)) = a.row(windows[k][static_cast<std::size_t>(pick[k])]);
  const SpectralEstimate est = spectral_norm(sub, spectral);
  converged = converged && est.converged;
  return est.value;
}

}  // namespace

SigmaPrime sigma_prime(const Matrix& a_tilde, const IndexGroups& windows,
                       const SigmaPrimeOptions& options) {
  check_windows(windows, a_tilde.rows());
  SigmaPrime out;
  out.mode = options.mode;
  if (options.mode == SigmaMode::upper) {
    const SpectralEstimate est = spectral_norm(a_tilde, options.spectral);
    out.value = est.value;
    out.converged = est.converged;
    out.exact = all_singletons(windows) &&
                selection_count(windows) == static_cast<std::uint64_t>(a_tilde.rows());
    return out;
  }
  require(options.budget >= 1, "sigma_prime: budget must be positive");
  const std::uint64_t total = selection_count(windows);
  std::vector<Index> pick(windows.size(), 0);
  if (options.mode == SigmaMode::exact) {
    require(total <= options.budget,
            "sigma_prime: " + (total == UINT64_MAX ? std::string("more than 2^64") : std::to_string(total)) +
                " row selections exceed the exact budget of " + std::to_string(options.budget) +
                "; use upper or sampled mode");
    for (std::uint64_t s = 0; s < total; ++s) {
      std::uint64_t rest = s;
      for (std::size_t k = 0; k < windows.size(); ++k) {
        const auto size = static_cast<std::uint64_t>(windows[k].size());
        pick[k] = static_cast<Index>(rest % size);
        rest /= size;
      }
      out.value = std::max(out.value, selected_norm(a_tilde, windows, pick, options.spectral, out.converged));
    }
    out.selections = total;
    out.exact = true;
    return out;
  }
  Rng rng = make_rng(options.seed, 0);
  for (std::uint64_t s = 0; s < options.budget; ++s) {
    for (std::size_t k = 0; k < windows.size(); ++k)
      pick[k] = static_cast<Index>(uniform_index(rng, windows[k].size()));
    out.value = std::max(out.value, selected_norm(a_tilde, windows, pick, options.spectral, out.converged));
  }
  out.selections = options.budget;
  out.exact = total == 1;
  return out;
}

double sigma_prime_last(const Matrix& filters, double rho) {
  return rho * matrix_norms(filters).max_row_l2;
}

SigmaPrime layer_sigma_prime(const Architecture& arch, const WeightSet& weights, Index l,
                             const SigmaPrimeOptions& options) {
  require(l >= 1 && l <= arch.depth(), "layer_sigma_prime: layer out of range");
  const LayerSpec& spec = arch.layer(l);
  const Matrix& a = weights.layer(l);
  SigmaPrime out;
  if (l == arch.depth()) {
    out.value = sigma_prime_last(a, spec.rho);
    out.exact = true;
    out.mode = options.mode;
    return out;
  }
  const IndexGroups windows = arch.expanded_row_windows(l);
  const std::uint64_t total = selection_count(windows);
  const bool no_deletion = spec.pool.empty();
  const Index dense_entries = spec.filters * spec.patch_count() * arch.width(l - 1);
  const bool want_enumeration =
      !no_deletion && options.mode != SigmaMode::upper &&
      (options.mode == SigmaMode::sampled || total <= options.budget);
  if (want_enumeration && dense_entries <= kMaxJacobianEntries) {
    return sigma_prime(expand_operator(a, spec.patches), windows, options);
  }
  const SpectralEstimate est = expanded_spectral_norm(a, spec.patches, options.spectral);
  out.value = est.value;
  out.converged = est.converged;
  out.mode = SigmaMode::upper;
  out.exact = no_deletion;
  return out;
}

Lipschitz lipschitz_from_jacobian(const Matrix& jacobian, const IndexGroups& row_groups) {
  Lipschitz out;
  if (jacobian.rows() == 0) return out;
  const Vector row_l1 = jacobian.cwiseAbs().rowwise().sum();
  out.theta = row_l1.maxCoeff();
  for (const auto& g : row_groups) {
    double sq = 0.0;
    for (Index r : g) {
      require(r >= 0 && r < jacobian.rows(), "lipschitz_from_jacobian: row out of range");
      sq += row_l1[r] * row_l1[r];
    }
    out.rho = std::max(out.rho, std::sqrt(sq));
  }
  return out;
}

namespace {

Lipschitz identity_lipschitz(const IndexGroups& groups) {
  Lipschitz out;
  out.theta = 1.0;
  std::size_t largest = 0;
  for (const auto& g : groups) largest = std::max(largest, g.size());
  out.rho = std::sqrt(static_cast<double>(largest));
  return out;
}

void check_jacobian_size(const Architecture& arch, Index l1, Index l2) {
  require(arch.width(l2) * arch.width(l1) <= kMaxJacobianEntries,
          "lipschitz: Jacobian of layers " + std::to_string(l1) + "->" + std::to_string(l2) +
              " has " + std::to_string(arch.width(l2) * arch.width(l1)) +
              " entries, above the dense cap");
}

}  // namespace

Lipschitz empirical_lipschitz(const Architecture& arch, const WeightSet& weights,
                              const ActivationTrace& trace, Index l1, Index l2) {
  require(0 <= l1 && l1 <= l2 && l2 <= arch.depth(), "empirical_lipschitz: need l1 <= l2");
  const IndexGroups groups = activation_patches(arch, l2);
  if (l1 == l2) return identity_lipschitz(groups);
  check_jacobian_size(arch, l1, l2);
  return lipschitz_from_jacobian(subnet_jacobian(arch, weights, trace, l1, l2), groups);
}

LipschitzProfile lipschitz_profile(const Architecture& arch, const WeightSet& weights,
                                   const ActivationTrace& trace) {
  const Index L = arch.depth();
  LipschitzProfile profile;
  profile.depth = L;
  const auto cells = static_cast<std::size_t>((L + 1) * (L + 1));
  profile.theta.assign(cells, 0.0);
  profile.rho.assign(cells, 0.0);
  std::vector<IndexGroups> groups(static_cast<std::size_t>(L + 1));
  for (Index l = 1; l <= L; ++l) groups[static_cast<std::size_t>(l)] = activation_patches(arch, l);
  std::vector<Matrix> local(static_cast<std::size_t>(L + 1));
  for (Index l1 = 1; l1 <= L; ++l1) {
    const Lipschitz id = identity_lipschitz(groups[static_cast<std::size_t>(l1)]);
    profile.theta[profile.cell(l1, l1)] = id.theta;
    profile.rho[profile.cell(l1, l1)] = id.rho;
    Matrix jac;
    for (Index l2 = l1 + 1; l2 <= L; ++l2) {
      check_jacobian_size(arch, l1, l2);
      Matrix& step = local[static_cast<std::size_t>(l2)];
      if (step.size() == 0) step = local_jacobian(arch, weights, trace, l2);
      jac = (l2 == l1 + 1) ? step : Matrix(step * jac);
      const Lipschitz lip = lipschitz_from_jacobian(jac, groups[static_cast<std::size_t>(l2)]);
      profile.theta[profile.cell(l1, l2)] = lip.theta;
      profile.rho[profile.cell(l1, l2)] = lip.rho;
    }
  }
  return profile;
}

double rho_aggregate(const std::vector<LipschitzProfile>& profiles, const std::vector<double>& B,
                     const std::vector<double>& E, Index l) {
  require(!profiles.empty(), "rho_aggregate: no profiles");
  const Index L = profiles.front().depth;
  require(l >= 1 && l <= L, "rho_aggregate: layer out of range");
  require(static_cast<Index>(B.size()) == L + 1 && static_cast<Index>(E.size()) == L + 1,
          "rho_aggregate: B and E need one entry per layer 0..L");
  double out = 0.0;
  for (Index lt = l; lt <= L; ++lt) {
    const double b = B[static_cast<std::size_t>(lt)];
    const double e = E[static_cast<std::size_t>(lt)];
    require(b > 0.0, "rho_aggregate: vanishing patch norm B_" + std::to_string(lt));
    require(e > 0.0, "rho_aggregate: vanishing threshold gap E_" + std::to_string(lt));
    for (const auto& p : profiles) {
      require(p.depth == L, "rho_aggregate: profiles of different depth");
      out = std::max(out, p.rho_at(l, lt) / b);
      if (std::isfinite(e)) out = std::max(out, p.theta_at(l, lt) / e);
    }
  }
  return out;
}

bool within_concentration(const Vector& x, double C, double U) {
  const double n = static_cast<double>(x.size());
  const double l1 = x.lpNorm<1>();
  const double scaled_l2 = std::sqrt(n) * x.norm();
  return C * (1.0 - U) * l1 <= scaled_l2 && scaled_l2 <= C * (1.0 + U) * l1;
}

ConcentrationResult norm_concentration_check(Index n, std::uint64_t trials, double eps,
                                             std::uint64_t seed) {
  require(n >= 1 && trials >= 1, "norm_concentration_check: need n >= 1 and trials >= 1");
  require(eps > 0.0 && eps < 1.0 / 3.0, "norm_concentration_check: eps must lie in (0, 1/3)");
  const double second_moment = 1.0;
  const double first_abs_moment = std::sqrt(2.0 / std::numbers::pi);
  ConcentrationResult out;
  out.C = std::sqrt(second_moment) / first_abs_moment;
  out.U = 4.0 * eps / second_moment + 4.0 * eps / first_abs_moment + eps;
  out.bound = 5.0 * std::exp(-2.0 * eps * eps * static_cast<double>(n));
  Vector x(n);
  for (std::uint64_t t = 0; t < trials; ++t) {
    Rng rng = make_rng(seed, t);
    for (Index i = 0; i < n; ++i) x[i] = standard_normal(rng);
    if (!within_concentration(x, out.C, out.U)) ++out.failures;
  }
  out.failure_rate = static_cast<double>(out.failures) / static_cast<double>(trials);
  return out;
}

}  // namespace cnnbound
