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

// Acceptance checks. Each criterion prints one PASS or FAIL line followed by
// its measurements; the exit status is nonzero when the criterion fails.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>

#include "cnnbound/bounds.hpp"
#include "cnnbound/covers.hpp"
#include "cnnbound/data.hpp"
#include "cnnbound/measures.hpp"
#include "cnnbound/pipeline.hpp"
#include "cnnbound/train.hpp"
#include "oracles.hpp"

#ifndef CNNBOUND_MNIST_DIR
#define CNNBOUND_MNIST_DIR ""
#endif

namespace cnnbound {
namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

LabeledDataset random_data(const Architecture& arch, Index n, Rng& rng) {
  LabeledDataset d;
  d.channels = arch.channels(0);
  d.width = arch.spatial(0);
  d.classes = arch.class_count();
  for (Index i = 0; i < n; ++i) {
    d.inputs.push_back(oracle::random_vector(arch.width(0), rng));
    d.labels.push_back(static_cast<Index>(uniform_index(rng, static_cast<std::uint64_t>(d.classes))));
  }
  return d;
}

// 1. Expanded operator against direct convolution.
Outcome weight_sharing_equivalence() {
  Timer timer;
  Rng rng = make_rng(101, 1);
  double worst = 0.0;
  Index layers = 0;
  for (int t = 0; t < 100; ++t) {
    const Architecture arch = oracle::random_architecture(rng);
    const WeightSet w = glorot_uniform(arch, 1000 + static_cast<std::uint64_t>(t));
    const ActivationTrace trace = forward(arch, w, oracle::random_vector(arch.width(0), rng));
    for (Index l = 1; l <= arch.depth(); ++l) {
      const PatchMap& pm = arch.layer(l).patches;
      const Vector& x = trace.activation(l - 1);
      const Matrix conv = apply_conv(x, w.layer(l), pm);
      const Vector dense = expand_operator(w.layer(l), pm) * x;
      for (Index j = 0; j < conv.rows(); ++j)
        for (Index o = 0; o < conv.cols(); ++o)
          worst = std::max(worst, std::abs(conv(j, o) - dense[j * pm.count() + o]));
      ++layers;
    }
  }
  const double secs = timer.seconds();
  return {worst <= 1e-12 && secs < 5.0,
          "100 triples, " + std::to_string(layers) + " layers, max deviation " + fmt(worst) + ", " + fmt(secs) + " s"};
}

// 2. Power iteration against a Jacobi oracle; exact sigma' against sampling.
Outcome spectral_oracle() {
  Rng rng = make_rng(102, 1);
  double worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    const Index rows = 1 + static_cast<Index>(uniform_index(rng, 50));
    const Index cols = 1 + static_cast<Index>(uniform_index(rng, 50));
    const Matrix a = oracle::random_matrix(rows, cols, rng);
    const double exact = oracle::jacobi_sigma_max(a);
    worst = std::max(worst, std::abs(spectral_norm(a).value - exact) / exact);
  }
  Index instances = 0, violations = 0;
  for (int t = 0; t < 60; ++t) {
    const Index windows = 1 + static_cast<Index>(uniform_index(rng, 6));
    IndexGroups groups;
    Index row = 0;
    for (Index g = 0; g < windows; ++g) {
      const Index size = 1 + static_cast<Index>(uniform_index(rng, 3));
      std::vector<Index> win;
      for (Index k = 0; k < size; ++k) win.push_back(row++);
      groups.push_back(win);
    }
    const Matrix a = oracle::random_matrix(row, 1 + static_cast<Index>(uniform_index(rng, 6)), rng);
    SigmaPrimeOptions opt;
    if (selection_count(groups) > opt.budget) continue;
    const SigmaPrime exact = sigma_prime(a, groups, opt);
    opt.mode = SigmaMode::sampled;
    opt.budget = 16;
    opt.seed = static_cast<std::uint64_t>(t);
    const SigmaPrime sampled = sigma_prime(a, groups, opt);
    opt.mode = SigmaMode::upper;
    const SigmaPrime upper = sigma_prime(a, groups, opt);
    ++instances;
    const double tol = 1e-6 * std::max(1.0, exact.value);
    if (!exact.exact || sampled.value > exact.value + tol || exact.value > upper.value + tol) ++violations;
  }
  return {worst <= 1e-6 && violations == 0 && instances > 0,
          "max relative error " + fmt(worst) + " on 200 matrices; sigma' " + std::to_string(instances) +
              " instances, " + std::to_string(violations) + " ordering violations"};
}

// 3. Finite-difference ratios never exceed the measured theta and rho.
Outcome lipschitz_soundness() {
  Rng rng = make_rng(103, 1);
  double excess = -kInfinity;
  Index probes = 0, networks = 0;
  while (networks < 50) {
    const Architecture arch = oracle::random_architecture(rng);
    const WeightSet w = glorot_uniform(arch, 3000 + static_cast<std::uint64_t>(networks));
    const ActivationTrace trace = forward(arch, w, oracle::random_vector(arch.width(0), rng));
    LipschitzProfile profile;
    try {
      profile = lipschitz_profile(arch, w, trace);
    } catch (const DegeneratePointError&) {
      continue;
    }
    ++networks;
    const Index L = arch.depth();
    double gap = kInfinity, growth = 1.0;
    for (Index l = 1; l <= L; ++l) {
      gap = std::min(gap, preactivation_gap(arch, trace, l));
      growth *= std::max(1.0, expand_operator(w.layer(l), arch.layer(l).patches).cwiseAbs().rowwise().sum().maxCoeff());
    }
    for (int p = 0; p < 20; ++p) {
      const Index l1 = 1 + static_cast<Index>(uniform_index(rng, static_cast<std::uint64_t>(L)));
      const Index l2 = l1 + static_cast<Index>(uniform_index(rng, static_cast<std::uint64_t>(L - l1 + 1)));
      const Vector& a = trace.activation(l1);
      const Vector dir = oracle::random_vector(a.size(), rng);
      const double step = std::min(1e-2, gap / (4.0 * growth)) / dir.cwiseAbs().maxCoeff();
      const Vector h = step * dir;
      const Vector diff = forward_from(arch, w, l1, a + h, l2) - forward_from(arch, w, l1, a, l2);
      const double hn = h.cwiseAbs().maxCoeff();
      excess = std::max(excess, diff.cwiseAbs().maxCoeff() / hn - profile.theta_at(l1, l2));
      excess = std::max(excess, activation_norm(arch, diff, l2) / hn - profile.rho_at(l1, l2));
      ++probes;
    }
  }
  return {excess <= 1e-8, std::to_string(networks) + " networks, " + std::to_string(probes) +
                              " probes, largest ratio minus bound " + fmt(excess)};
}

// 4. Distance-based capacities vanish at initialization; the parameter count
// bound does not.
Outcome init_nullity() {
  Rng rng = make_rng(104, 1);
  Index zero_rows = 0, failures = 0;
  double min_params = kInfinity;
  std::string failed;
  for (int t = 0; t < 10; ++t) {
    const Architecture arch = oracle::random_architecture(rng);
    const WeightSet w = glorot_uniform(arch, 4000 + static_cast<std::uint64_t>(t));
    const LabeledDataset data = random_data(arch, 12, rng);
    AnalysisOptions opt;
    opt.gamma = 1.0;
    opt.dip_reps = 0;
    const Analysis a = analyze(arch, data, w, w, opt);
    for (const auto& r : a.rows) {
      if (!r.distance_based) continue;
      if (r.status == "ok" && r.R == 0.0 && r.capacity == 0.0) {
        ++zero_rows;
      } else {
        ++failures;
        failed += " " + r.name + "(" + (r.status == "ok" ? fmt(r.R) : r.status) + ")";
      }
    }
    min_params = std::min(min_params, a.row("params").R);
  }
  return {failures == 0 && min_params > 0.0,
          std::to_string(zero_rows) + " distance-based rows exactly 0, " + std::to_string(failures) +
              " not" + failed + "; smallest param-count bound " + fmt(min_params)};
}

// 5. Last-layer class scaling: (2,1) term over Frobenius term equals sqrt(C).
Outcome class_size_scaling() {
  Rng rng = make_rng(105, 1);
  double worst = 0.0;
  std::string ratios;
  for (Index c : {4, 16, 64, 256}) {
    LayerSpec conv;
    conv.name = "conv";
    conv.filters = 8;
    conv.patches = conv1d_patches(2, 20, 4);
    conv.pool = global_pool(conv.patches.count());
    LayerSpec fc;
    fc.name = "fc";
    fc.filters = c;
    fc.patches = full_patch(8);
    fc.activation = Activation::identity;
    const Architecture arch(2, 20, {conv, fc});
    const WeightSet refs = glorot_uniform(arch, 5000 + static_cast<std::uint64_t>(c));
    WeightSet w = refs;
    Matrix delta = oracle::random_matrix(c, 8, rng);
    delta.rowwise().normalize();
    w.layer(2) += 0.3 * delta;
    const std::vector<LayerNorms> norms = layer_norms(arch, w, refs);
    const double ratio = norms[1].l21_dist_expanded / norms[1].fro_dist;
    worst = std::max(worst, std::abs(ratio / std::sqrt(static_cast<double>(c)) - 1.0));
    ratios += " C=" + std::to_string(c) + ":" + fmt(ratio);
  }
  return {worst <= 0.01, "ratios" + ratios + ", worst relative deviation from sqrt(C) " + fmt(worst)};
}

// 6. Quadrupling a filter's patch count.
Outcome weight_sharing_scaling() {
  Rng rng = make_rng(106, 1);
  const Matrix refs = oracle::random_matrix(6, 5, rng);
  const Matrix a = refs + 0.2 * oracle::random_matrix(6, 5, rng);
  auto norms_for = [&](Index patches) {
    LayerSpec conv;
    conv.name = "conv";
    conv.filters = 6;
    conv.patches = conv1d_patches(1, patches + 4, 5);
    conv.pool = global_pool(patches);
    LayerSpec fc;
    fc.name = "fc";
    fc.filters = 2;
    fc.patches = full_patch(6);
    fc.activation = Activation::identity;
    const Architecture arch(1, patches + 4, {conv, fc});
    const Matrix last = Matrix::Identity(2, 6);
    return layer_norms(arch, WeightSet{{a, last}}, WeightSet{{refs, last}}).front();
  };
  const LayerNorms small = norms_for(50), large = norms_for(200);
  const double fro_growth = large.fro_dist_expanded / small.fro_dist_expanded;
  const double l21_growth = large.l21_dist_expanded / small.l21_dist_expanded;
  const bool pass = std::abs(fro_growth / 2.0 - 1.0) <= 0.01 && std::abs(l21_growth / 4.0 - 1.0) <= 0.01 &&
                    large.l21_dist == small.l21_dist;
  return {pass, "expanded Frobenius distance x" + fmt(fro_growth) + ", expanded (2,1) distance x" +
                    fmt(l21_growth) + ", filter (2,1) distance " + fmt(small.l21_dist) + " -> " +
                    fmt(large.l21_dist)};
}

// 7. Cover certificates.
Outcome cover_certificates() {
  Timer timer;
  bool all = true;
  std::string detail;
  std::uint64_t c = 0;
  for (Index d : {1, 2, 3, 5}) {
    for (double ratio : {1.0, 2.0, 4.0}) {
      CoverCertificate cert = l1_ball_cover(d, 1.0, 1.0 / ratio);
      const CoverVerification v = cover_verify(cert, 100000, derive_seed(107, c++));
      bool ok = v.passed && v.trials == 100000;
      double grid = std::nan("");
      if (d <= 2) {
        grid = grid_worst_distance(cert, d == 1 ? 4001 : 201);
        ok = ok && grid <= cert.eps;
      }
      all = all && ok;
      detail += " d=" + std::to_string(d) + ",r=" + fmt(ratio) + ":" + fmt(v.worst_distance) + (ok ? "" : "(fail)");
    }
  }
  const double secs = timer.seconds();
  return {all && secs < 60.0, "worst sampled distances" + detail + "; " + fmt(secs) + " s"};
}

// 8. Norm concentration.
Outcome concentration() {
  const ConcentrationResult r = norm_concentration_check(1000, 10000, 0.1, 108);
  const double theory = 5.0 * std::exp(-2.0 * 0.01 * 1000.0);
  return {r.failure_rate <= theory + 1e-3 && std::abs(r.bound - theory) <= 1e-20,
          std::to_string(r.failures) + " failures in 10000 trials, rate " + fmt(r.failure_rate) + ", bound " +
              fmt(theory)};
}

struct SyntheticRun {
  TrainResult train;
  Analysis analysis;
  double train_seconds = 0.0;
  double ratio = 0.0;
};

SyntheticRun synthetic_run(Index length) {
  SyntheticRun out;
  const SignatureDataset d = gen_signature_dataset(1, 350, length, default_iter(length));
  const Architecture arch = synthetic2(length);
  Timer timer;
  out.train = train_network(arch, d.data, TrainConfig{});
  out.train_seconds = timer.seconds();
  AnalysisOptions opt;
  opt.preset = "synthetic2";
  out.analysis = analyze(arch, d.data, round_to_float(out.train.weights), round_to_float(out.train.init), opt);
  out.ratio = out.analysis.row("spectral_margin").capacity / out.analysis.row("synthetic").capacity;
  return out;
}

// 9. Synthetic experiment.
Outcome synthetic_experiment() {
  std::string detail;
  std::vector<double> ratios;
  bool pass = true;
  for (Index length : {250, 1000, 4000}) {
    const SyntheticRun r = synthetic_run(length);
    ratios.push_back(r.ratio);
    detail += "L=" + std::to_string(length) + ": train acc " + fmt(r.train.train_accuracy) + " in " +
              fmt(r.train_seconds) + " s, spectral_margin/synthetic capacity " + fmt(r.ratio) + "; ";
    if (length == 1000) {
      const double patches = static_cast<double>(length - kSyntheticFilterWidth + 1);
      const bool trained = r.train.train_accuracy >= 0.99 && r.train_seconds < 600.0;
      const bool smaller = r.ratio > 1.0 && r.ratio >= std::sqrt(patches) / 4.0;
      const bool modes = r.analysis.modes.multimodal;
      detail += "(training " + std::string(trained ? "ok" : "FAILED") + ", capacity gap " +
                (smaller ? "ok" : "FAILED") + " vs " + fmt(std::sqrt(patches) / 4.0) + ", dip " +
                fmt(r.analysis.modes.dip) + " p=" + fmt(r.analysis.modes.p_value) + " " +
                (modes ? "multimodal" : "FAILED: unimodality not rejected at 0.05") + ", histogram modes " +
                std::to_string(r.analysis.modes.histogram_modes) + "); ";
      pass = pass && trained && smaller && modes;
    }
  }
  const bool monotone = ratios[0] < ratios[1] && ratios[1] < ratios[2];
  detail += std::string("gap monotone in L: ") + (monotone ? "yes" : "NO");
  return {pass && monotone, detail};
}

// 10. Augmented MNIST trend.
Outcome mnist_trend() {
  const std::filesystem::path dir = CNNBOUND_MNIST_DIR;
  const auto images = dir / "train-images-idx3-ubyte", labels = dir / "train-labels-idx1-ubyte";
  if (!std::filesystem::exists(images) || !std::filesystem::exists(labels))
    return {false, "MNIST files not found under '" + dir.string() + "'"};
  Timer timer;
  const MnistSet mnist = load_mnist(images.string(), labels.string());
  std::vector<double> ratios;
  std::string detail;
  bool trained = true;
  for (Index s : {2, 4}) {
    const LabeledDataset data = augment_mnist(mnist, s, 2000, 1).data;
    const Architecture arch = mnist4(28 * s);
    TrainConfig cfg;
    cfg.target_accuracy = 0.97;
    const TrainResult t = train_network(arch, data, cfg);
    AnalysisOptions opt;
    opt.preset = "mnist4";
    const Analysis a = analyze(arch, data, round_to_float(t.weights), round_to_float(t.init), opt);
    ratios.push_back(capacity_ratio(a, "main"));
    trained = trained && t.train_accuracy >= 0.97;
    detail += "s=" + std::to_string(s) + ": train acc " + fmt(t.train_accuracy) + ", spectral_margin capacity " +
              fmt(a.row("spectral_margin").capacity) + ", main capacity " + fmt(a.row("main").capacity) + ", ratio " +
              fmt(ratios.back()) + "; ";
  }
  const double secs = timer.seconds();
  detail += fmt(secs) + " s";
  return {trained && ratios[1] > ratios[0] && secs < 1800.0, detail};
}

// 11. Downsampling invariance.
Outcome downsampling_invariance() {
  double worst = 0.0;
  Index changed = 0;
  for (std::uint64_t i = 0; i < 20; ++i) {
    const DownsampleCase c = downsample_case(111, i);
    worst = std::max(worst, std::abs(c.b0_original - c.b0_downsampled));
    for (std::size_t f = 0; f < c.a1_original.size(); ++f)
      worst = std::max(worst, std::abs(c.a1_original[f] - c.a1_downsampled[f]));
    changed += c.params_bound_original != c.params_bound_downsampled;
  }
  return {worst <= 1e-12 && changed == 20, "max b0/a1 deviation " + fmt(worst) + ", param-count bound changed on " +
                                                std::to_string(changed) + " of 20"};
}

// 12. Formula regression against independent closed forms.
Outcome formula_regression() {
  struct Case {
    std::string name;
    double library;
    double independent;
    double quoted;  ///< value as printed, checked to half a unit of its last digit
    double unit;
  };
  CoverArgs unit_args;
  const PosthocEvaluator sum_n = [](const std::vector<double>&, const std::vector<double>& n) {
    double s = 0.0;
    for (double v : n) s += v;
    return s;
  };
  BoundInputs two;
  LayerNorms ones;
  ones.spectral = ones.sigma_prime = ones.l21_dist = ones.fro_dist = 1.0;
  two.norms = {ones, ones};
  two.B = {1.0, 1.0, 1.0};
  Matrix pooled(4, 2);
  pooled << 1, 0, 0, 1, 2, 0, 0, 2;
  Matrix jac(2, 2);
  jac << 1, -2, 3, 0;
  const std::vector<Case> cases = {
      {"maurey", cover_size_bound(CoverKind::maurey, unit_args), 36.0 * std::log2(15.0), 140.65, 0.01},
      {"suplin", cover_size_bound(CoverKind::suplin, unit_args), 64.0 * std::log2(15.0), 250.04, 0.01},
      {"dudley", dudley_bound([](double e) { return 1.0 / (e * e); }, 100, 0.01), 0.04 + 1.2 * std::log(100.0), 5.566, 0.001},
      {"posthoc", posthoc_adjust(sum_n, {}, {}, {1.0}, {1.0}, std::exp(-1.0), 1.0, 1.0),
       2.0 + std::sqrt(1.0 + 2.0 * std::log(3.0)), 3.788, 0.001},
      {"two_layer_R", two_layer_bound(1, 1, 1, 1, 1, 1, 1, 1, 1, 100, 0.5).R, std::pow(2.0, 1.5), 2.8284, 0.0001},
      {"chaining", chaining_cardinality({1}, {1}, {1}, {1}, 1.0).tight, 4.0, 4.0, 1.0},
      {"multilayer_main", multilayer_RA(two, Variant::main).R, std::pow(2.0, 1.5), 2.8284, 0.0001},
      {"firstmilestone", firstmilestone_rhs(100, 1.0, 1.0, 1.0, 2.0, 100),
       0.08 + 153.6 * std::sqrt(std::log2(320700.0)) * std::log(100.0), 3.03e3, 10.0},
      {"param_count", param_count_bound(10, {1.0, 1.0}, 1.0, 100, 1.0), std::sqrt(0.2), 0.4472, 0.0001},
      {"synthetic_normalizer", synthetic_normalizer(1.0, 1, 1.0, {1.0}, {1.0}), std::sqrt(2.0), 1.4142, 0.0001},
      {"neyshabur", neyshabur_capacity({1.0}, {1.0}, 1, 1.0, 4), 2.0, 2.0, 1.0},
      {"bartlett", bartlett_capacity({1.0}, {1.0}, 1), 1.0, 1.0, 1.0},
      {"sigma_prime", sigma_prime(pooled, {{0, 1}, {2, 3}}).value, std::sqrt(5.0), 2.2361, 0.0001},
      {"lipschitz_rho", lipschitz_from_jacobian(jac, {{0, 1}}).rho, std::sqrt(18.0), 4.2426, 0.0001},
      {"concentration_C", norm_concentration_check(10, 1, 0.1, 1).C, std::sqrt(std::numbers::pi / 2.0), 1.25331, 0.00001},
  };
  bool pass = true;
  std::string detail;
  for (const auto& c : cases) {
    const bool closed_form = std::abs(c.library - c.independent) <= 1e-6 * std::max(1.0, std::abs(c.independent));
    const bool quoted = std::abs(c.library - c.quoted) <= 0.5 * c.unit;
    pass = pass && closed_form && quoted;
    detail += c.name + "=" + fmt(c.library) + (closed_form && quoted ? "" : "(MISMATCH)") + " ";
  }
  return {pass, detail};
}

const std::vector<std::pair<std::string, std::function<Outcome()>>>& criteria() {
  static const std::vector<std::pair<std::string, std::function<Outcome()>>> list = {
      {"weight-sharing equivalence", weight_sharing_equivalence},
      {"spectral oracle", spectral_oracle},
      {"Lipschitz soundness", lipschitz_soundness},
      {"init-nullity", init_nullity},
      {"class-size scaling", class_size_scaling},
      {"weight-sharing scaling", weight_sharing_scaling},
      {"cover certificates", cover_certificates},
      {"concentration", concentration},
      {"synthetic experiment", synthetic_experiment},
      {"augmented MNIST trend", mnist_trend},
      {"downsampling invariance", downsampling_invariance},
      {"formula regression", formula_regression},
  };
  return list;
}

bool run_criterion(std::size_t index) {
  const auto& [name, check] = criteria()[index - 1];
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("error: ") + e.what()};
  }
  std::cout << "criterion " << index << " " << (o.pass ? "PASS" : "FAIL") << ": " << name << '\n'
            << "  " << o.detail << std::endl;
  return o.pass;
}

}  // namespace
}  // namespace cnnbound

int main(int argc, char** argv) {
  CLI::App app{"cnnbound acceptance checks"};
  int criterion = 0;
  app.add_option("--criterion", criterion, "Criterion number 1-12; all when omitted")->check(CLI::Range(1, 12));
  CLI11_PARSE(app, argc, argv);
  bool ok = true;
  if (criterion > 0) {
    ok = cnnbound::run_criterion(static_cast<std::size_t>(criterion));
  } else {
    for (std::size_t i = 1; i <= cnnbound::criteria().size(); ++i) ok = cnnbound::run_criterion(i) && ok;
  }
  return ok ? 0 : 1;
}
