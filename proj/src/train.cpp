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

#include "cnnbound/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "cnnbound/error.hpp"
#include "cnnbound/random.hpp"

namespace cnnbound {

using detail::require;

void TrainConfig::validate() const {
  require(learning_rate >= 0.0 && std::isfinite(learning_rate), "train: learning rate must be >= 0");
  require(beta1 > 0.0 && beta1 < 1.0, "train: beta1 must lie in (0, 1)");
  require(beta2 > 0.0 && beta2 < 1.0, "train: beta2 must lie in (0, 1)");
  require(adam_eps > 0.0, "train: Adam epsilon must be positive");
  require(weight_decay >= 0.0, "train: weight decay must be >= 0");
  require(batch_size >= 1, "train: batch size must be positive");
  require(max_epochs >= 0, "train: max epochs must be >= 0");
  require(target_accuracy > 0.0 && target_accuracy <= 1.0, "train: target accuracy must lie in (0, 1]");
}

namespace {

// Accumulates the gradient of one sample's loss into grad. d_scores is the
// derivative with respect to the network output.
void backward(const Architecture& arch, const WeightSet& weights, const ActivationTrace& trace,
              Vector d_out, WeightSet& grad) {
  for (Index l = arch.depth(); l >= 1; --l) {
    const LayerSpec& spec = arch.layer(l);
    const LayerActivation& act = trace.layers[static_cast<std::size_t>(l - 1)];
    const Index m = spec.filters;
    const Index w = act.pooled.cols();
    Matrix dz = Matrix::Zero(m, spec.patch_count());
    bool any = false;
    for (Index j = 0; j < m; ++j) {
      for (Index p = 0; p < w; ++p) {
        const double g = d_out[j * w + p];
        if (g == 0.0) continue;
        if (spec.activation == Activation::relu && act.pooled(j, p) <= 0.0) continue;
        dz(j, act.argmax[static_cast<std::size_t>(j * w + p)]) += g;
        any = true;
      }
    }
    if (!any) return;
    const Vector& prev = trace.activation(l - 1);
    const Matrix patches = patch_matrix(prev, spec.patches);
    grad.layer(l).noalias() += dz * patches.transpose();
    if (l == 1) return;
    const Matrix d_patches = weights.layer(l).transpose() * dz;
    Vector d_prev = Vector::Zero(prev.size());
    for (Index o = 0; o < spec.patch_count(); ++o) {
      const auto idx = spec.patches.patch(o);
      for (std::size_t i = 0; i < idx.size(); ++i)
        d_prev[idx[i]] += d_patches(static_cast<Index>(i), o);
    }
    d_out = std::move(d_prev);
  }
}

Index argmax_of(const Vector& scores) {
  Index best = 0;
  for (Index c = 1; c < scores.size(); ++c)
    if (scores[c] > scores[best]) best = c;
  return best;
}

}  // namespace

LossGradient loss_and_gradient(const Architecture& arch, const WeightSet& weights,
                               const LabeledDataset& data, const std::vector<Index>& batch,
                               double weight_decay) {
  require(!batch.empty(), "loss_and_gradient: empty batch");
  LossGradient out;
  out.gradient = zero_weights(arch);
  double ce = 0.0;
  for (Index i : batch) {
    require(i >= 0 && i < data.size(), "loss_and_gradient: sample index out of range");
    const ActivationTrace trace = forward(arch, weights, data.inputs[static_cast<std::size_t>(i)]);
    const Vector& s = trace.scores();
    const Index y = data.labels[static_cast<std::size_t>(i)];
    const double top = s.maxCoeff();
    const Vector e = (s.array() - top).exp().matrix();
    const double z = e.sum();
    ce += std::log(z) + top - s[y];
    Vector d = e / z;
    d[y] -= 1.0;
    backward(arch, weights, trace, d / static_cast<double>(batch.size()), out.gradient);
    if (argmax_of(s) == y) ++out.correct;
  }
  out.loss = ce / static_cast<double>(batch.size());
  for (Index l = 1; l <= arch.depth(); ++l) {
    out.loss += weight_decay * weights.layer(l).squaredNorm();
    out.gradient.layer(l) += 2.0 * weight_decay * weights.layer(l);
  }
  return out;
}

Adam::Adam(const TrainConfig& config, const WeightSet& shape)
    : lr_(config.learning_rate), beta1_(config.beta1), beta2_(config.beta2), eps_(config.adam_eps) {
  for (const Matrix& a : shape.filters) {
    m_.filters.push_back(Matrix::Zero(a.rows(), a.cols()));
    v_.filters.push_back(Matrix::Zero(a.rows(), a.cols()));
  }
}

void Adam::step(WeightSet& weights, const WeightSet& gradient) {
  require(gradient.filters.size() == m_.filters.size(), "Adam: gradient depth mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t l = 0; l < m_.filters.size(); ++l) {
    m_.filters[l] = beta1_ * m_.filters[l] + (1.0 - beta1_) * gradient.filters[l];
    v_.filters[l] = beta2_ * v_.filters[l] + (1.0 - beta2_) * gradient.filters[l].cwiseAbs2();
    weights.filters[l].array() -=
        lr_ * (m_.filters[l].array() / c1) / ((v_.filters[l].array() / c2).sqrt() + eps_);
  }
}

std::vector<double> dataset_margins(const Architecture& arch, const WeightSet& weights,
                                    const LabeledDataset& data) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(data.size()));
  for (Index i = 0; i < data.size(); ++i)
    out.push_back(margin(forward(arch, weights, data.inputs[static_cast<std::size_t>(i)]).scores(),
                         data.labels[static_cast<std::size_t>(i)]));
  return out;
}

double dataset_accuracy(const Architecture& arch, const WeightSet& weights, const LabeledDataset& data) {
  require(data.size() > 0, "dataset_accuracy: empty dataset");
  Index correct = 0;
  for (Index i = 0; i < data.size(); ++i) {
    const Vector s = forward(arch, weights, data.inputs[static_cast<std::size_t>(i)]).scores();
    if (argmax_of(s) == data.labels[static_cast<std::size_t>(i)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

TrainResult train_network(const Architecture& arch, const LabeledDataset& data,
                          const TrainConfig& config) {
  return train_network(arch, data, config, glorot_uniform(arch, derive_seed(config.seed, 0x1417)));
}

TrainResult train_network(const Architecture& arch, const LabeledDataset& data,
                          const TrainConfig& config, const WeightSet& init) {
  config.validate();
  require(data.size() > 0, "train: dataset is empty");
  require(arch.class_count() == data.classes,
          "train: last layer has " + std::to_string(arch.class_count()) + " outputs but the data has " +
              std::to_string(data.classes) + " classes");
  require(arch.width(0) == data.channels * data.height * data.width,
          "train: input width does not match the dataset");
  for (Index y : data.labels) require(y >= 0 && y < data.classes, "train: label out of range");
  check_shapes(arch, init);

  TrainResult result;
  result.init = init;
  result.weights = init;
  Adam adam(config, init);
  const Index n = data.size();
  std::vector<Index> order(static_cast<std::size_t>(n));
  // Full-set accuracy is only evaluated once the running estimate is close.
  const double check_slack = 0.03;

  for (Index epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), Index{0});
    Rng rng = make_rng(derive_seed(config.seed, 0xba7c), static_cast<std::uint64_t>(epoch));
    for (Index i = n - 1; i > 0; --i)
      std::swap(order[static_cast<std::size_t>(i)],
                order[static_cast<std::size_t>(uniform_index(rng, static_cast<std::uint64_t>(i + 1)))]);

    EpochRecord rec;
    rec.epoch = epoch;
    Index correct = 0;
    Index batches = 0;
    for (Index start = 0; start < n; start += config.batch_size) {
      const Index stop = std::min(n, start + config.batch_size);
      const std::vector<Index> batch(order.begin() + start, order.begin() + stop);
      const LossGradient lg = loss_and_gradient(arch, result.weights, data, batch, config.weight_decay);
      if (!std::isfinite(lg.loss))
        throw NumericalError("train: non-finite loss in epoch " + std::to_string(epoch));
      rec.loss += lg.loss;
      correct += lg.correct;
      ++batches;
      adam.step(result.weights, lg.gradient);
    }
    rec.loss /= static_cast<double>(batches);
    rec.accuracy = static_cast<double>(correct) / static_cast<double>(n);
    rec.full_accuracy = std::numeric_limits<double>::quiet_NaN();
    if (rec.accuracy >= config.target_accuracy - check_slack) {
      rec.full_accuracy = dataset_accuracy(arch, result.weights, data);
      result.log.push_back(rec);
      if (rec.full_accuracy >= config.target_accuracy) {
        result.reached_target = true;
        break;
      }
    } else {
      result.log.push_back(rec);
    }
  }
  result.margins = dataset_margins(arch, result.weights, data);
  const auto right = std::count_if(result.margins.begin(), result.margins.end(), [](double m) { return m > 0.0; });
  result.train_accuracy = static_cast<double>(right) / static_cast<double>(n);
  result.reached_target = result.reached_target || result.train_accuracy >= config.target_accuracy;
  return result;
}

MarginChoice select_margin(const std::vector<double>& margins, double target_accuracy) {
  require(!margins.empty(), "select_margin: no margins");
  require(target_accuracy > 0.0 && target_accuracy <= 1.0, "select_margin: target must lie in (0, 1]");
  for (double m : margins) require(std::isfinite(m), "select_margin: non-finite margin");
  std::vector<double> sorted = margins;
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<double>(sorted.size());
  auto allowed = static_cast<std::size_t>(std::floor((1.0 - target_accuracy) * n + 1e-9));
  allowed = std::min(allowed, sorted.size() - 1);
  MarginChoice out;
  out.gamma = sorted[allowed];
  if (out.gamma <= 0.0) {
    out.gamma = 0.0;
    out.degenerate = true;
  }
  return out;
}

}  // namespace cnnbound
