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

#ifndef CNNBOUND_TRAIN_HPP
#define CNNBOUND_TRAIN_HPP

#include <cstdint>
#include <vector>

#include "cnnbound/convnet.hpp"
#include "cnnbound/data.hpp"

namespace cnnbound {

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 1e-4;  ///< lambda in CE + lambda * sum ||A^l||_F^2
  Index batch_size = 32;
  Index max_epochs = 200;
  double target_accuracy = 0.99;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochRecord {
  Index epoch = 0;
  double loss = 0.0;      ///< mean objective over the epoch's batches
  double accuracy = 0.0;  ///< running accuracy during the epoch
  /// Accuracy of the end-of-epoch weights on the whole set; NaN when the
  /// running accuracy was too far from the target to bother.
  double full_accuracy = 0.0;
};

struct TrainResult {
  WeightSet weights;
  WeightSet init;  ///< reference weights M, as drawn
  std::vector<EpochRecord> log;
  std::vector<double> margins;
  double train_accuracy = 0.0;
  bool reached_target = false;
};

struct LossGradient {
  double loss = 0.0;  ///< mean cross-entropy over the batch plus the decay term
  WeightSet gradient;
  Index correct = 0;
};

/// Softmax cross-entropy over the listed samples with exact backpropagation
/// through the recorded pooling choices.
LossGradient loss_and_gradient(const Architecture& arch, const WeightSet& weights,
                               const LabeledDataset& data, const std::vector<Index>& batch,
                               double weight_decay);

class Adam {
 public:
  Adam(const TrainConfig& config, const WeightSet& shape);
  void step(WeightSet& weights, const WeightSet& gradient);
  Index steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  Index t_ = 0;
  WeightSet m_, v_;
};

TrainResult train_network(const Architecture& arch, const LabeledDataset& data,
                          const TrainConfig& config);
/// Same, starting from given weights, which also become the reference M.
TrainResult train_network(const Architecture& arch, const LabeledDataset& data,
                          const TrainConfig& config, const WeightSet& init);

std::vector<double> dataset_margins(const Architecture& arch, const WeightSet& weights,
                                    const LabeledDataset& data);
double dataset_accuracy(const Architecture& arch, const WeightSet& weights,
                        const LabeledDataset& data);

struct MarginChoice {
  double gamma = 0.0;
  bool degenerate = false;  ///< no positive margin meets the target
};

/// Largest observed margin gamma with #{margin < gamma} / n <= 1 - target.
MarginChoice select_margin(const std::vector<double>& margins, double target_accuracy);

}  // namespace cnnbound

#endif  // CNNBOUND_TRAIN_HPP
