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

#include "cnnbound/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "cnnbound/covers.hpp"
#include "cnnbound/error.hpp"
#include "cnnbound/measures.hpp"
#include "cnnbound/random.hpp"

#ifndef CNNBOUND_VERSION
#define CNNBOUND_VERSION "unknown"
#endif
#ifndef CNNBOUND_MNIST_DIR
#define CNNBOUND_MNIST_DIR ""
#endif

namespace cnnbound {

using detail::require;
using nlohmann::json;

// ---------------------------------------------------------------------------
// RunSpec

std::string RunSpec::to_json() const {
  json j;
  j["command"] = command;
  j["seed"] = seed;
  j["preset"] = preset;
  j["n"] = n;
  j["len"] = len;
  j["iter"] = effective_iter();
  j["scale_s"] = scale_s;
  j["variants"] = variants;
  j["delta"] = delta;
  j["gamma"] = gamma ? json(*gamma) : json(nullptr);
  j["auto_margin"] = auto_margin;
  j["out"] = out;
  j["snapshot"] = snapshot;
  j["data"] = data;
  j["mnist_images"] = mnist_images;
  j["mnist_labels"] = mnist_labels;
  j["exact_sigma_budget"] = exact_sigma_budget;
  j["train"] = {{"learning_rate", train.learning_rate}, {"beta1", train.beta1},
                {"beta2", train.beta2},                 {"adam_eps", train.adam_eps},
                {"weight_decay", train.weight_decay},   {"batch_size", train.batch_size},
                {"max_epochs", train.max_epochs},       {"target_accuracy", train.target_accuracy},
                {"seed", train.seed}};
  j["cover_dim"] = cover_dim ? json(*cover_dim) : json(nullptr);
  j["cover_ratio"] = cover_ratio ? json(*cover_ratio) : json(nullptr);
  j["trials"] = trials;
  j["eps"] = eps;
  return j.dump();
}

RunSpec RunSpec::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("runspec: ") + e.what());
  }
  RunSpec s;
  try {
    s.command = j.at("command").get<std::string>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.preset = j.at("preset").get<std::string>();
    s.n = j.at("n").get<Index>();
    s.len = j.at("len").get<Index>();
    s.iter = j.at("iter").get<Index>();
    s.scale_s = j.at("scale_s").get<Index>();
    s.variants = j.at("variants").get<std::vector<std::string>>();
    s.delta = j.at("delta").get<double>();
    if (!j.at("gamma").is_null()) s.gamma = j.at("gamma").get<double>();
    s.auto_margin = j.at("auto_margin").get<double>();
    s.out = j.at("out").get<std::string>();
    s.snapshot = j.at("snapshot").get<std::string>();
    s.data = j.at("data").get<std::string>();
    s.mnist_images = j.at("mnist_images").get<std::string>();
    s.mnist_labels = j.at("mnist_labels").get<std::string>();
    s.exact_sigma_budget = j.at("exact_sigma_budget").get<std::uint64_t>();
    const json& t = j.at("train");
    s.train.learning_rate = t.at("learning_rate").get<double>();
    s.train.beta1 = t.at("beta1").get<double>();
    s.train.beta2 = t.at("beta2").get<double>();
    s.train.adam_eps = t.at("adam_eps").get<double>();
    s.train.weight_decay = t.at("weight_decay").get<double>();
    s.train.batch_size = t.at("batch_size").get<Index>();
    s.train.max_epochs = t.at("max_epochs").get<Index>();
    s.train.target_accuracy = t.at("target_accuracy").get<double>();
    s.train.seed = t.at("seed").get<std::uint64_t>();
    if (!j.at("cover_dim").is_null()) s.cover_dim = j.at("cover_dim").get<Index>();
    if (!j.at("cover_ratio").is_null()) s.cover_ratio = j.at("cover_ratio").get<double>();
    s.trials = j.at("trials").get<std::uint64_t>();
    s.eps = j.at("eps").get<double>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("runspec: ") + e.what());
  }
  return s;
}

void RunSpec::validate() const {
  static const std::vector<std::string> commands = {
      "gen-data", "train", "measure", "bounds", "compare", "cover-check", "concentration-check",
      "downsample-check"};
  require(std::find(commands.begin(), commands.end(), command) != commands.end(),
          "runspec: unknown command '" + command + "'");
  require(preset == "synthetic2" || preset == "mnist4", "runspec: field preset: unknown '" + preset + "'");
  require(n >= 1, "runspec: field n must be positive");
  require(len >= kSyntheticFilterWidth, "runspec: field len must be at least 15");
  require(iter >= 0, "runspec: field iter must be >= 0");
  require(scale_s >= 2 && scale_s % 2 == 0, "runspec: field scale-s must be even and >= 2");
  require(delta > 0.0 && delta < 1.0, "runspec: field delta must lie in (0, 1)");
  require(!gamma || *gamma > 0.0, "runspec: field gamma must be positive");
  require(auto_margin > 0.0 && auto_margin <= 1.0, "runspec: field auto-margin must lie in (0, 1]");
  require(exact_sigma_budget >= 1, "runspec: field exact-sigma-budget must be positive");
  require(eps > 0.0 && eps < 1.0 / 3.0, "runspec: field eps must lie in (0, 1/3)");
  require(trials >= 1, "runspec: field trials must be positive");
  require(!cover_dim || *cover_dim >= 1, "runspec: field dim must be positive");
  require(!cover_ratio || *cover_ratio > 0.0, "runspec: field ratio must be positive");
  for (const auto& v : variants) parse_variant(v);
  train.validate();
}

// ---------------------------------------------------------------------------
// Presets

Architecture synthetic2(Index length) {
  require(length >= kSyntheticFilterWidth, "synthetic2: sequence shorter than the filter");
  LayerSpec conv;
  conv.name = "conv";
  conv.filters = kSyntheticFilters;
  conv.patches = conv1d_patches(kDigits, length, kSyntheticFilterWidth);
  conv.pool = global_pool(conv.patches.count());
  LayerSpec fc;
  fc.name = "fc";
  fc.filters = 2;
  fc.patches = full_patch(kSyntheticFilters);
  fc.activation = Activation::identity;
  return Architecture(kDigits, length, {std::move(conv), std::move(fc)});
}

Architecture mnist4(Index side) {
  const Index channels[] = {64, 128, 128, 64};
  std::vector<LayerSpec> layers;
  Index c = 1, h = side;
  for (Index i = 0; i < 4; ++i) {
    require(h >= 3, "mnist4: image side " + std::to_string(side) + " too small for four stride-2 layers");
    LayerSpec conv;
    conv.name = "conv" + std::to_string(i + 1);
    conv.filters = channels[i];
    conv.patches = conv2d_patches(c, h, h, 3, 3, 2);
    layers.push_back(std::move(conv));
    c = channels[i];
    h = (h - 3) / 2 + 1;
  }
  LayerSpec fc;
  fc.name = "fc";
  fc.filters = 10;
  fc.patches = full_patch(c * h * h);
  fc.activation = Activation::identity;
  layers.push_back(std::move(fc));
  return Architecture(1, side * side, std::move(layers));
}

Architecture make_preset(const std::string& preset, const LabeledDataset& data) {
  if (preset == "synthetic2") {
    require(data.channels == kDigits && data.height == 1 && data.classes == 2,
            "preset synthetic2: dataset is not a one-hot 4-digit sequence set");
    return synthetic2(data.width);
  }
  if (preset == "mnist4") {
    require(data.channels == 1 && data.height == data.width && data.classes == 10,
            "preset mnist4: dataset is not a square single-channel 10-class set");
    return mnist4(data.width);
  }
  throw ValidationError("unknown preset '" + preset + "'");
}

// ---------------------------------------------------------------------------
// Analysis

const BoundRow& Analysis::row(const std::string& name) const {
  for (const auto& r : rows)
    if (r.name == name) return r;
  throw ValidationError("analysis: no bound row '" + name + "'");
}

double capacity_ratio(const Analysis& a, const std::string& ours) {
  const BoundRow& baseline = a.row("spectral_margin");
  const BoundRow& r = a.row(ours);
  require(baseline.status == "ok" && r.status == "ok", "capacity_ratio: a bound was skipped");
  require(r.capacity > 0.0, "capacity_ratio: '" + ours + "' capacity is zero");
  return baseline.capacity / r.capacity;
}

namespace {

std::vector<double> row_norms(const Matrix& a) {
  std::vector<double> out;
  for (Index i = 0; i < a.rows(); ++i) out.push_back(a.row(i).norm());
  return out;
}

BoundRow skipped(const std::string& name, const std::string& kind, bool dist, const std::string& why) {
  BoundRow r;
  r.name = name;
  r.kind = kind;
  r.distance_based = dist;
  r.status = "skipped: " + why;
  return r;
}

}  // namespace

Analysis analyze(const Architecture& arch, const LabeledDataset& data, const WeightSet& weights,
                 const WeightSet& refs, const AnalysisOptions& options) {
  check_shapes(arch, weights);
  check_shapes(arch, refs);
  require(data.size() >= 1, "analyze: empty dataset");
  require(options.delta > 0.0 && options.delta < 1.0, "analyze: delta must lie in (0, 1)");
  const Index L = arch.depth();
  Analysis a;
  a.n = data.size();
  a.labels = data.labels;

  std::vector<Variant> variants = options.variants.empty() ? all_variants() : options.variants;
  const bool want_lipschitz = std::any_of(variants.begin(), variants.end(), [](Variant v) {
    return v == Variant::lipschitz || v == Variant::augmented;
  });
  a.lipschitz_status = want_lipschitz ? "ok" : "not requested";

  // One pass over the data; traces are reduced to summaries and empirical
  // Lipschitz profiles as they are produced. Samples sitting exactly on a tie
  // get no profile.
  std::vector<SampleSummary> samples;
  std::vector<LipschitzProfile> profiles;
  std::vector<Index> profiled;
  bool profiling = want_lipschitz;
  double sq_sum = 0.0;
  for (Index i = 0; i < a.n; ++i) {
    const Vector& x = data.inputs[static_cast<std::size_t>(i)];
    const ActivationTrace trace = forward(arch, weights, x);
    if (!trace.finite) throw NumericalError("analyze: non-finite activations for sample " + std::to_string(i));
    a.margins.push_back(margin(trace.scores(), data.labels[static_cast<std::size_t>(i)]));
    samples.push_back(summarize(arch, trace));
    sq_sum += x.squaredNorm();
    a.data_max_norm = std::max(a.data_max_norm, x.norm());
    if (!profiling) continue;
    try {
      profiles.push_back(lipschitz_profile(arch, weights, trace));
      profiled.push_back(i);
    } catch (const DegeneratePointError&) {
      ++a.degenerate_samples;
    } catch (const ValidationError& e) {
      profiles.clear();
      profiled.clear();
      profiling = false;
      a.lipschitz_status = std::string("skipped: ") + e.what();
    }
  }
  a.data_rms_norm = std::sqrt(sq_sum / static_cast<double>(a.n));
  if (profiling && profiles.empty()) a.lipschitz_status = "skipped: every sample is at a tie";

  if (options.gamma) {
    require(*options.gamma > 0.0, "analyze: gamma must be positive");
    a.gamma = *options.gamma;
  } else {
    const MarginChoice choice = select_margin(a.margins, options.auto_margin);
    a.gamma = choice.gamma;
    if (choice.degenerate) {
      const double top = *std::max_element(a.margins.begin(), a.margins.end());
      require(top > 0.0, "analyze: gamma selection: no sample has a positive margin");
      a.gamma = top;
      a.gamma_fallback = true;
      a.flags.push_back("gamma: no positive margin at the target level; using the largest margin");
    }
  }

  a.stats = layer_stats(arch, samples);
  a.norms = layer_norms(arch, weights, refs, options.sigma);

  const bool have_profiles = !profiles.empty();

  BoundInputs in;
  in.n = a.n;
  in.gamma = a.gamma;
  in.delta = options.delta;
  in.width_max = arch.max_width();
  in.width_bar = arch.max_preactivation_width();
  in.norms = a.norms;
  for (Index l = 0; l <= L; ++l) in.B.push_back(a.stats[static_cast<std::size_t>(l)].B);
  in.clamp_B = true;

  std::vector<double> b_clamped(in.B), E_threshold, E_threshold_max;
  for (double& b : b_clamped) b = std::max(b, 1.0);
  b_clamped[static_cast<std::size_t>(L)] = a.gamma;
  std::vector<SampleSummary> cert_samples;
  std::vector<double> cert_margins;
  for (Index i : profiled) {
    cert_samples.push_back(samples[static_cast<std::size_t>(i)]);
    cert_margins.push_back(a.margins[static_cast<std::size_t>(i)]);
  }
  // Gap thresholds only matter for the augmented certificate. Any positive E_l
  // is admissible, and a sample with a zero gap fails gap >= 3 E_l whatever
  // E_l is, so the minimum is taken over profiled samples with positive gaps.
  std::vector<SampleSummary> gapped;
  for (const auto& c : cert_samples)
    if (std::all_of(c.gap.begin() + 1, c.gap.end(), [](double g) { return g > 0.0; })) gapped.push_back(c);
  const std::vector<LayerStats> gap_stats = gapped.empty() ? a.stats : layer_stats(arch, gapped);
  for (Index l = 0; l <= L; ++l) {
    E_threshold.push_back(gap_stats[static_cast<std::size_t>(l)].E / 3.0);
    E_threshold_max.push_back(gap_stats[static_cast<std::size_t>(l)].E_max / 3.0);
  }

  if (have_profiles) {
    in.rho_pair.assign(static_cast<std::size_t>((L + 1) * (L + 1)), 0.0);
    for (const auto& p : profiles)
      for (Index l1 = 1; l1 <= L; ++l1)
        for (Index l2 = l1; l2 <= L; ++l2)
          in.rho_pair[p.cell(l1, l2)] = std::max(in.rho_pair[p.cell(l1, l2)], p.rho_at(l1, l2));
  }
  // Aggregated rho for a choice of E thresholds; empty with an error message
  // when some threshold gap vanishes.
  auto aggregate = [&](const std::vector<double>& E, std::string& error) {
    std::vector<double> rho;
    if (!have_profiles) return rho;
    try {
      rho.assign(static_cast<std::size_t>(L + 1), 0.0);
      for (Index l = 1; l <= L; ++l) rho[static_cast<std::size_t>(l)] = rho_aggregate(profiles, b_clamped, E, l);
    } catch (const ValidationError& e) {
      rho.clear();
      error = e.what();
    }
    return rho;
  };
  std::string rho_agg_error, rho_agg_max_error;
  in.rho_agg = aggregate(E_threshold, rho_agg_error);
  const std::vector<double> rho_agg_max = aggregate(E_threshold_max, rho_agg_max_error);

  CertifyThresholds raw_thresholds, clamped_thresholds;
  for (Index l = 0; l < L; ++l) {
    raw_thresholds.b.push_back(std::max(in.B[static_cast<std::size_t>(l)], std::numeric_limits<double>::min()));
    clamped_thresholds.b.push_back(b_clamped[static_cast<std::size_t>(l)]);
  }
  CertifyThresholds max_thresholds = clamped_thresholds;
  clamped_thresholds.E = E_threshold;
  clamped_thresholds.rho = in.rho_agg;
  max_thresholds.E = E_threshold_max;
  max_thresholds.rho = rho_agg_max;

  const double root_n = std::sqrt(static_cast<double>(a.n));
  const double width_bar = std::max<double>(1.0, static_cast<double>(in.width_bar));

  auto add_row = [&](const std::string& name, Variant v, const BoundInputs& inputs, const std::string& agg_error,
                     const CertifyThresholds& augmented_thresholds) {
    if ((v == Variant::lipschitz || v == Variant::augmented) && !have_profiles) {
      a.rows.push_back(skipped(name, "ours", distance_based(v), a.lipschitz_status.substr(a.lipschitz_status.find(' ') + 1)));
      return;
    }
    if (v == Variant::augmented && !agg_error.empty()) {
      a.rows.push_back(skipped(name, "ours", true, agg_error));
      return;
    }
    VariantResult vr;
    try {
      vr = multilayer_RA(inputs, v);
    } catch (const ValidationError& e) {
      a.rows.push_back(skipped(name, "ours", distance_based(v), e.what()));
      return;
    }
    BoundRow r;
    r.name = name;
    r.kind = "ours";
    r.distance_based = distance_based(v);
    r.R = vr.R;
    r.capacity = vr.R / root_n;
    r.normalizer = r.capacity * a.gamma;
    r.Gamma = vr.Gamma;
    r.terms = vr.terms;
    r.flags = vr.flags;
    if (v == Variant::augmented) {
      r.certified = static_cast<Index>(certify_samples(cert_samples, cert_margins, profiles,
                                                       augmented_thresholds, a.gamma, CertifyMode::augmented)
                                           .size());
      if (a.degenerate_samples > 0)
        r.flags.push_back(std::to_string(a.degenerate_samples) + " samples at ties left uncertified");
    } else {
      const CertifyThresholds& t = v == Variant::lipschitz ? clamped_thresholds : raw_thresholds;
      r.certified = static_cast<Index>(
          certify_samples(samples, a.margins, {}, t, a.gamma, CertifyMode::norms_only).size());
    }
    r.rhs = firstmilestone_rhs(a.n, r.R, r.Gamma, width_bar, options.delta, r.certified);
    a.rows.push_back(std::move(r));
  };

  for (Variant v : variants) {
    add_row(variant_name(v), v, in, rho_agg_error, clamped_thresholds);
    if (v == Variant::augmented) {
      // Same variant with E thresholds from the largest per-sample gap.
      BoundInputs in_max = in;
      in_max.rho_agg = rho_agg_max;
      add_row(variant_name(v) + "_emax", v, in_max, rho_agg_max_error, max_thresholds);
    }
  }

  const double risk = empirical_margin_risk(a.margins, a.gamma);
  // Spectrally normalized margin baseline, scaled by the data norm its bound carries.
  try {
    a.bartlett_M = bartlett_capacity(a.norms, a.n);
    BoundRow r;
    r.name = "spectral_margin";
    r.kind = "baseline";
    r.distance_based = true;
    r.R = a.bartlett_M;
    r.capacity = a.bartlett_M * a.data_rms_norm / a.gamma;
    r.normalizer = a.bartlett_M * a.data_rms_norm;
    r.rhs = risk + r.capacity;
    r.flags.push_back("capacity = M * rms data norm / gamma; rhs omits log factors and constants");
    a.rows.push_back(std::move(r));
  } catch (const ValidationError& e) {
    a.rows.push_back(skipped("spectral_margin", "baseline", true, e.what()));
  }
  try {
    const double ney = neyshabur_capacity(a.norms, a.n, a.gamma, arch.max_width());
    BoundRow r;
    r.name = "pac_bayes";
    r.kind = "baseline";
    r.distance_based = true;
    r.R = ney;
    r.capacity = ney * a.data_rms_norm;
    r.normalizer = r.capacity * a.gamma;
    r.rhs = risk + r.capacity;
    r.flags.push_back("difference A - M used; capacity scaled by rms data norm; rhs omits log factors");
    a.rows.push_back(std::move(r));
  } catch (const ValidationError& e) {
    a.rows.push_back(skipped("pac_bayes", "baseline", true, e.what()));
  }
  try {
    std::vector<double> s;
    for (const auto& ln : a.norms) s.push_back(ln.spectral);
    const double value = param_count_bound(arch.param_count(), s, a.gamma, a.n, options.delta, a.data_max_norm);
    BoundRow r;
    r.name = "params";
    r.kind = "baseline";
    r.R = value;
    r.capacity = value;
    r.normalizer = value * a.gamma;
    r.rhs = risk + value;
    r.flags.push_back("B = max input norm; s_l = spectral norm of the expanded operator");
    a.rows.push_back(std::move(r));
  } catch (const ValidationError& e) {
    a.rows.push_back(skipped("params", "baseline", false, e.what()));
  }
  if (options.preset == "synthetic2" && L == 2) {
    const double value = synthetic_normalizer(a.stats[0].B, a.n, static_cast<double>(arch.layer(1).neurons()),
                                              row_norms(weights.layer(2)), row_norms(weights.layer(1)));
    BoundRow r;
    r.name = "synthetic";
    r.kind = "ours";
    r.R = value;
    r.capacity = value / a.gamma;
    r.normalizer = value;
    r.rhs = risk + r.capacity;
    r.flags.push_back("filter norms, not distances; B = max input patch norm");
    a.rows.push_back(std::move(r));
  }

  if (a.n >= 2 && options.dip_reps > 0) {
    a.modes = assess_modes(a.margins, 0.05, options.dip_reps, derive_seed(options.seed, 0xd1b));
  }
  return a;
}

// ---------------------------------------------------------------------------
// Downsampling

DownsampleCase downsample_case(std::uint64_t seed, std::uint64_t index) {
  Rng rng = make_rng(derive_seed(seed, 0xd5), index);
  const Index channels = 1 + static_cast<Index>(uniform_index(rng, 3));
  const Index half_h = 2 + static_cast<Index>(uniform_index(rng, 5));
  const Index half_w = 2 + static_cast<Index>(uniform_index(rng, 5));
  const Index kh = 1 + static_cast<Index>(uniform_index(rng, 2));
  const Index kw = 1 + static_cast<Index>(uniform_index(rng, 2));
  const Index m = 1 + static_cast<Index>(uniform_index(rng, 4));
  const Index h = 2 * half_h, w = 2 * half_w;

  Vector x(channels * h * w);
  for (Index c = 0; c < channels; ++c)
    for (Index r = 0; r < half_h; ++r)
      for (Index q = 0; q < half_w; ++q) {
        const double v = standard_normal(rng);
        for (Index a = 0; a < 2; ++a)
          for (Index b = 0; b < 2; ++b) x[c * h * w + (2 * r + a) * w + 2 * q + b] = v;
      }
  Matrix filters(m, channels * 4 * kh * kw);
  for (Index i = 0; i < filters.size(); ++i) filters.data()[i] = standard_normal(rng);

  const PatchMap original = conv2d_patches(channels, h, w, 2 * kh, 2 * kw, 2);
  const Downsampled ds = downsample_pair(x, channels, h, w, filters, 2 * kh, 2 * kw);
  const PatchMap reduced = conv2d_patches(channels, ds.height, ds.width, ds.kernel_h, ds.kernel_w, 1);

  DownsampleCase out;
  out.b0_original = max_patch_norm(x, original);
  out.b0_downsampled = max_patch_norm(ds.x, reduced);
  out.a1_original = row_norms(filters);
  out.a1_downsampled = row_norms(ds.filters);
  const double s_orig = expanded_spectral_norm(filters, original).value;
  const double s_red = expanded_spectral_norm(ds.filters, reduced).value;
  out.params_bound_original = param_count_bound(filters.size(), {s_orig}, 1.0, 1000, 0.01, x.norm());
  out.params_bound_downsampled = param_count_bound(ds.filters.size(), {s_red}, 1.0, 1000, 0.01, ds.x.norm());
  return out;
}

// ---------------------------------------------------------------------------
// Reports

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string joined(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? sep : "") + parts[i];
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

class Table {
 public:
  explicit Table(std::vector<std::string> columns) : columns_(std::move(columns)) {}
  void add(std::vector<std::string> row) {
    require(row.size() == columns_.size(), "report: row width does not match the header");
    rows_.push_back(std::move(row));
  }
  void write(const std::string& path, const std::vector<std::string>& header) const {
    std::ofstream out(path, std::ios::trunc);
    require(static_cast<bool>(out), "report: cannot write '" + path + "'");
    for (const auto& h : header) out << "# " << h << '\n';
    std::vector<std::string> cols;
    for (const auto& c : columns_) cols.push_back(csv_field(c));
    out << joined(cols, ",") << '\n';
    for (const auto& r : rows_) {
      std::vector<std::string> cells;
      for (const auto& c : r) cells.push_back(csv_field(c));
      out << joined(cells, ",") << '\n';
    }
    require(static_cast<bool>(out), "report: write failed for '" + path + "'");
  }

 private:
  std::vector<std::string> columns_;
  std::vector<std::vector<std::string>> rows_;
};

std::vector<std::string> report_header(const RunSpec& spec) {
  return {
      std::string("cnnbound ") + CNNBOUND_VERSION,
      "command: " + spec.command,
      "runspec: " + spec.to_json(),
      "decision: log = natural log; log2 only where written",
      "decision: constants_symbolic = true (unspecified constants set to 1)",
      "decision: pac_bayes baseline uses the difference A - M",
      "decision: 2,1 norms of transposes (sum of row norms)",
      "decision: rho reading = l_inf to patch-l2 operator bound",
      "decision: E thresholds = min over profiled samples with positive gaps / 3; max / 3 reported alongside",
      "decision: B_l clamped to >= 1 for lipschitz and augmented variants",
  };
}

LabeledDataset obtain_dataset(const RunSpec& spec) {
  if (!spec.data.empty()) return read_dataset(spec.data);
  if (spec.preset == "synthetic2")
    return gen_signature_dataset(spec.seed, spec.n, spec.len, spec.effective_iter()).data;
  const std::string dir = CNNBOUND_MNIST_DIR;
  const std::string images = spec.mnist_images.empty() ? dir + "/train-images-idx3-ubyte" : spec.mnist_images;
  const std::string labels = spec.mnist_labels.empty() ? dir + "/train-labels-idx1-ubyte" : spec.mnist_labels;
  return augment_mnist(load_mnist(images, labels), spec.scale_s, spec.n, spec.seed).data;
}

AnalysisOptions analysis_options(const RunSpec& spec) {
  AnalysisOptions o;
  o.gamma = spec.gamma;
  o.auto_margin = spec.auto_margin;
  o.delta = spec.delta;
  for (const auto& v : spec.variants) o.variants.push_back(parse_variant(v));
  o.sigma.budget = spec.exact_sigma_budget;
  o.preset = spec.preset;
  o.seed = spec.seed;
  return o;
}

Analysis analyze_snapshot(const RunSpec& spec, std::vector<std::string>& header) {
  require(!spec.snapshot.empty(), spec.command + ": field snapshot is required");
  const LabeledDataset data = obtain_dataset(spec);
  const Architecture arch = make_preset(spec.preset, data);
  const Snapshot snap = read_snapshot(spec.snapshot);
  Analysis a = analyze(arch, data, snap.weights, snap.refs, analysis_options(spec));
  header.push_back("gamma: " + num(a.gamma) +
                   (spec.gamma ? " (fixed)" : " (largest margin at train accuracy " + num(spec.auto_margin) + ")"));
  std::vector<std::string> sp;
  for (const auto& ln : a.norms)
    sp.push_back("layer" + std::to_string(ln.layer) + "=" + (ln.sigma_prime_exact ? "exact" : "upper"));
  header.push_back("sigma_prime: " + joined(sp, " "));
  header.push_back("lipschitz profiles: " + a.lipschitz_status);
  for (const auto& f : a.flags) header.push_back("flag: " + f);
  return a;
}

Table norm_table(const Analysis& a) {
  Table t({"layer", "patches", "filters", "spatial_out", "neurons", "B_prev", "B", "E_min", "E_max",
           "pixel_inf", "spectral", "spectral_converged", "sigma_prime", "sigma_prime_exact", "fro",
           "max_row", "l21_dist", "fro_dist", "l21_dist_expanded", "fro_dist_expanded"});
  for (const auto& ln : a.norms) {
    const auto& prev = a.stats[static_cast<std::size_t>(ln.layer - 1)];
    const auto& cur = a.stats[static_cast<std::size_t>(ln.layer)];
    t.add({std::to_string(ln.layer), std::to_string(ln.patches), std::to_string(ln.filters),
           std::to_string(ln.spatial_out), std::to_string(ln.neurons), num(prev.B), num(cur.B), num(cur.E),
           num(cur.E_max), num(cur.pixel_inf), num(ln.spectral), ln.spectral_converged ? "1" : "0",
           num(ln.sigma_prime), ln.sigma_prime_exact ? "1" : "0", num(ln.fro), num(ln.max_row),
           num(ln.l21_dist), num(ln.fro_dist), num(ln.l21_dist_expanded), num(ln.fro_dist_expanded)});
  }
  return t;
}

Table bound_table(const Analysis& a) {
  Table t({"name", "kind", "distance_based", "R", "capacity", "normalizer", "Gamma", "certified", "rhs",
           "terms", "status", "flags"});
  for (const auto& r : a.rows) {
    std::vector<std::string> terms;
    for (double v : r.terms) terms.push_back(num(v));
    const bool ok = r.status == "ok";
    t.add({r.name, r.kind, r.distance_based ? "1" : "0", ok ? num(r.R) : "", ok ? num(r.capacity) : "",
           ok ? num(r.normalizer) : "", ok ? num(r.Gamma) : "", ok ? std::to_string(r.certified) : "",
           ok ? num(r.rhs) : "", joined(terms, ";"), r.status, joined(r.flags, "; ")});
  }
  return t;
}

Table histogram_table(const Analysis& a) {
  Table t({"normalizer", "bin_left", "count"});
  auto emit = [&](const std::string& name, double scale) {
    std::vector<double> v;
    for (double m : a.margins) v.push_back(m / scale);
    const Histogram h = histogram(v);
    for (std::size_t b = 0; b < h.count.size(); ++b) t.add({name, num(h.left[b]), std::to_string(h.count[b])});
  };
  emit("raw", 1.0);
  for (const auto& r : a.rows)
    if (r.status == "ok" && r.normalizer > 0.0 && std::isfinite(r.normalizer)) emit(r.name, r.normalizer);
  return t;
}

std::string require_out(const RunSpec& spec) {
  require(!spec.out.empty(), spec.command + ": field out is required");
  return spec.out;
}

}  // namespace

RunSpec runspec_from_report(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), "replay: cannot open report '" + path + "'");
  const std::string key = "# runspec: ";
  std::string line;
  while (std::getline(in, line) && line.rfind("#", 0) == 0)
    if (line.rfind(key, 0) == 0) return RunSpec::from_json(line.substr(key.size()));
  throw ValidationError("replay: no runspec line in '" + path + "'");
}

int run_pipeline(const RunSpec& spec) {
  spec.validate();
  std::vector<std::string> header = report_header(spec);
  const std::string& cmd = spec.command;

  if (cmd == "gen-data") {
    const std::string out = require_out(spec);
    std::uint64_t checksum = 0;
    if (spec.preset == "synthetic2") {
      const SignatureDataset ds = gen_signature_dataset(spec.seed, spec.n, spec.len, spec.effective_iter());
      checksum = write_dataset(out, ds.data);
      Table log({"sample", "label", "signatures", "starts"});
      for (std::size_t i = 0; i < ds.log.size(); ++i) {
        std::vector<std::string> sig, st;
        for (Index s : ds.log[i].signatures) sig.push_back(std::to_string(s));
        for (Index s : ds.log[i].starts) st.push_back(std::to_string(s));
        log.add({std::to_string(i), std::to_string(ds.data.labels[i]), joined(sig, ";"), joined(st, ";")});
      }
      log.write(out + ".insertions.csv", header);
    } else {
      checksum = write_dataset(out, obtain_dataset(spec));
    }
    std::cout << "dataset " << out << " checksum " << std::hex << std::setw(16) << std::setfill('0') << checksum
              << std::dec << '\n';
    return 0;
  }

  if (cmd == "train") {
    const std::string out = require_out(spec);
    require(!spec.snapshot.empty(), "train: field snapshot is required");
    const LabeledDataset data = obtain_dataset(spec);
    const Architecture arch = make_preset(spec.preset, data);
    const TrainResult result = train_network(arch, data, spec.train);
    write_snapshot(spec.snapshot, result.weights, result.init,
                   {{"preset", spec.preset},
                    {"runspec", spec.to_json()},
                    {"train_accuracy", num(result.train_accuracy)},
                    {"reached_target", result.reached_target ? "1" : "0"},
                    {"epochs", std::to_string(result.log.size())}});
    Table t({"epoch", "loss", "accuracy", "full_accuracy"});
    for (const auto& r : result.log)
      t.add({std::to_string(r.epoch), num(r.loss), num(r.accuracy), num(r.full_accuracy)});
    header.push_back("train_accuracy: " + num(result.train_accuracy));
    header.push_back(std::string("reached_target: ") + (result.reached_target ? "true" : "false"));
    t.write(out, header);
    std::cout << "trained " << result.log.size() << " epochs, train accuracy " << result.train_accuracy << '\n';
    return 0;
  }

  if (cmd == "measure" || cmd == "bounds") {
    const std::string out = require_out(spec);
    const Analysis a = analyze_snapshot(spec, header);
    (cmd == "measure" ? norm_table(a) : bound_table(a)).write(out, header);
    return 0;
  }

  if (cmd == "compare") {
    const std::string out = require_out(spec);
    const Analysis a = analyze_snapshot(spec, header);
    std::filesystem::create_directories(out);
    header.push_back("dip: " + num(a.modes.dip) + " p=" + num(a.modes.p_value) +
                     " multimodal=" + (a.modes.multimodal ? "true" : "false") +
                     " histogram_modes=" + std::to_string(a.modes.histogram_modes));
    norm_table(a).write(out + "/norms.csv", header);
    bound_table(a).write(out + "/bounds.csv", header);
    histogram_table(a).write(out + "/margin_histogram.csv", header);
    Table m({"sample", "label", "margin"});
    for (Index i = 0; i < a.n; ++i)
      m.add({std::to_string(i), std::to_string(a.labels[static_cast<std::size_t>(i)]),
             num(a.margins[static_cast<std::size_t>(i)])});
    m.write(out + "/margins.csv", header);
    return 0;
  }

  if (cmd == "cover-check") {
    const std::string out = require_out(spec);
    std::vector<std::pair<Index, double>> cases;
    if (spec.cover_dim || spec.cover_ratio) {
      cases.emplace_back(spec.cover_dim.value_or(2), spec.cover_ratio.value_or(2.0));
    } else {
      for (Index d : {1, 2, 3, 5})
        for (double r : {1.0, 2.0, 4.0}) cases.emplace_back(d, r);
    }
    Table t({"dim", "beta", "eps", "k", "points", "claimed_log_size", "log_points", "trials", "worst_distance",
             "passed", "grid_worst_distance"});
    bool all = true;
    for (std::size_t c = 0; c < cases.size(); ++c) {
      const auto [d, ratio] = cases[c];
      CoverCertificate cert = l1_ball_cover(d, 1.0, 1.0 / ratio);
      cert.verified = cover_verify(cert, spec.trials, derive_seed(spec.seed, c));
      double grid = std::numeric_limits<double>::quiet_NaN();
      bool ok = cert.verified.passed;
      if (d <= 2) {
        grid = grid_worst_distance(cert, d == 1 ? 4001 : 201);
        ok = ok && grid <= cert.eps;
      }
      all = all && ok;
      t.add({std::to_string(d), num(cert.beta), num(cert.eps), std::to_string(cert.k),
             std::to_string(cert.points.rows()), num(cert.claimed_log_size),
             num(std::log(static_cast<double>(cert.points.rows()))), std::to_string(cert.verified.trials),
             num(cert.verified.worst_distance), ok ? "1" : "0", d <= 2 ? num(grid) : ""});
    }
    t.write(out, header);
    return all ? 0 : 2;
  }

  if (cmd == "concentration-check") {
    const std::string out = require_out(spec);
    const ConcentrationResult r = norm_concentration_check(spec.n, spec.trials, spec.eps, spec.seed);
    Table t({"n", "eps", "trials", "C", "U", "failures", "failure_rate", "bound"});
    t.add({std::to_string(spec.n), num(spec.eps), std::to_string(spec.trials), num(r.C), num(r.U),
           std::to_string(r.failures), num(r.failure_rate), num(r.bound)});
    t.write(out, header);
    return 0;
  }

  // downsample-check
  const std::string out = require_out(spec);
  Table t({"instance", "b0_original", "b0_downsampled", "a1_original", "a1_downsampled", "params_original",
           "params_downsampled"});
  for (Index i = 0; i < spec.n; ++i) {
    const DownsampleCase c = downsample_case(spec.seed, static_cast<std::uint64_t>(i));
    std::vector<std::string> ao, ad;
    for (double v : c.a1_original) ao.push_back(num(v));
    for (double v : c.a1_downsampled) ad.push_back(num(v));
    t.add({std::to_string(i), num(c.b0_original), num(c.b0_downsampled), joined(ao, ";"), joined(ad, ";"),
           num(c.params_bound_original), num(c.params_bound_downsampled)});
  }
  t.write(out, header);
  return 0;
}

}  // namespace cnnbound
