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

#ifndef CNNBOUND_PIPELINE_HPP
#define CNNBOUND_PIPELINE_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cnnbound/bounds.hpp"
#include "cnnbound/convnet.hpp"
#include "cnnbound/data.hpp"
#include "cnnbound/stats.hpp"
#include "cnnbound/train.hpp"

namespace cnnbound {

/// Everything a command needs; serialized into every report header.
struct RunSpec {
  std::string command;
  std::uint64_t seed = 1;
  std::string preset = "synthetic2";
  Index n = 350;
  Index len = 1000;
  Index iter = 0;  ///< 0 means max(1, len / 1000)
  Index scale_s = 2;
  std::vector<std::string> variants;  ///< empty means all
  double delta = 0.01;
  std::optional<double> gamma;
  double auto_margin = 0.96;
  std::string out;
  std::string snapshot;
  std::string data;
  std::string mnist_images;
  std::string mnist_labels;
  std::uint64_t exact_sigma_budget = 4096;
  TrainConfig train;
  // cover-check
  std::optional<Index> cover_dim;
  std::optional<double> cover_ratio;
  std::uint64_t trials = 100000;
  // concentration-check
  double eps = 0.1;

  std::string to_json() const;
  static RunSpec from_json(const std::string& text);
  void validate() const;
  Index effective_iter() const { return iter > 0 ? iter : default_iter(len); }
};

/// One conv layer (width 15, 50 filters, global max-pool) and a linear layer
/// to 2 classes, over one-hot sequences of the given length.
Architecture synthetic2(Index length);
inline constexpr Index kSyntheticFilterWidth = 15;
inline constexpr Index kSyntheticFilters = 50;

/// Four 3x3 stride-2 relu conv layers (64/128/128/64) and a linear layer to
/// 10 classes, over side x side single-channel images.
Architecture mnist4(Index side);

Architecture make_preset(const std::string& preset, const LabeledDataset& data);

struct AnalysisOptions {
  std::optional<double> gamma;
  double auto_margin = 0.96;
  double delta = 0.01;
  std::vector<Variant> variants;  ///< empty means all
  SigmaPrimeOptions sigma{};
  std::string preset;
  Index dip_reps = 2000;
  std::uint64_t seed = 1;
};

/// One line of the bound comparison table. `capacity` is the bound's
/// capacity term including 1/gamma, in the units of margin-loss risk;
/// `normalizer` = capacity * gamma is what margins are divided by.
struct BoundRow {
  std::string name;
  std::string kind;  ///< ours | baseline
  bool distance_based = false;
  double R = 0.0;
  double capacity = 0.0;
  double normalizer = 0.0;
  double Gamma = 1.0;
  Index certified = 0;
  double rhs = 0.0;
  std::vector<double> terms;
  std::string status = "ok";
  std::vector<std::string> flags;
};

struct Analysis {
  Index n = 0;
  double gamma = 0.0;
  bool gamma_fallback = false;
  std::vector<double> margins;
  std::vector<Index> labels;
  std::vector<LayerStats> stats;  ///< layers 0..L
  std::vector<LayerNorms> norms;  ///< layers 1..L
  double data_rms_norm = 0.0;
  double data_max_norm = 0.0;
  double bartlett_M = 0.0;  ///< spectral_margin baseline M, without data norm or gamma
  std::vector<BoundRow> rows;
  std::string lipschitz_status = "ok";
  Index degenerate_samples = 0;
  ModeReport modes;
  std::vector<std::string> flags;

  const BoundRow& row(const std::string& name) const;
};

Analysis analyze(const Architecture& arch, const LabeledDataset& data, const WeightSet& weights,
                 const WeightSet& refs, const AnalysisOptions& options);

/// spectral_margin capacity divided by the capacity of `name`.
double capacity_ratio(const Analysis& a, const std::string& ours);

struct DownsampleCase {
  double b0_original = 0.0;
  double b0_downsampled = 0.0;
  std::vector<double> a1_original;  ///< per-filter L2 norms
  std::vector<double> a1_downsampled;
  double params_bound_original = 0.0;
  double params_bound_downsampled = 0.0;
};

/// A random block-constant image and stride-2 first layer, before and after
/// downsample_pair.
DownsampleCase downsample_case(std::uint64_t seed, std::uint64_t index);

/// Executes spec.command and writes its report(s). Returns the process exit
/// code for success; errors propagate as exceptions.
/// RunSpec embedded in the "# runspec:" header line of a report file.
RunSpec runspec_from_report(const std::string& path);

int run_pipeline(const RunSpec& spec);

}  // namespace cnnbound

#endif  // CNNBOUND_PIPELINE_HPP
