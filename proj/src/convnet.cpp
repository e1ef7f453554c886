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

#include "cnnbound/convnet.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "cnnbound/random.hpp"

namespace cnnbound {

using detail::require;

PatchMap::PatchMap(const std::vector<std::vector<Index>>& patches, Index source_size)
    : count_(static_cast<Index>(patches.size())), source_(source_size) {
  require(count_ >= 1, "PatchMap: need at least one patch");
  require(source_size >= 1, "PatchMap: empty source");
  size_ = static_cast<Index>(patches.front().size());
  require(size_ >= 1, "PatchMap: empty patch");
  indices_.reserve(static_cast<std::size_t>(count_ * size_));
  std::vector<Index> sorted;
  for (std::size_t o = 0; o < patches.size(); ++o) {
    const auto& p = patches[o];
    require(static_cast<Index>(p.size()) == size_,
            "PatchMap: patch " + std::to_string(o) + " has " + std::to_string(p.size()) +
                " entries, expected " + std::to_string(size_));
    for (Index idx : p) {
      require(idx >= 0 && idx < source_size,
              "PatchMap: patch " + std::to_string(o) + " index " + std::to_string(idx) +
                  " outside [0, " + std::to_string(source_size) + ")");
      indices_.push_back(idx);
    }
    sorted.assign(p.begin(), p.end());
    std::sort(sorted.begin(), sorted.end());
    require(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(),
            "PatchMap: patch " + std::to_string(o) + " repeats an index");
  }
}

PatchMap conv1d_patches(Index channels, Index length, Index width, Index stride) {
  require(channels >= 1 && length >= 1 && width >= 1 && stride >= 1,
          "conv1d_patches: sizes must be positive");
  require(width <= length, "conv1d_patches: filter wider than the signal");
  const Index count = (length - width) / stride + 1;
  std::vector<std::vector<Index>> patches(static_cast<std::size_t>(count));
  for (Index o = 0; o < count; ++o) {
    auto& p = patches[static_cast<std::size_t>(o)];
    p.reserve(static_cast<std::size_t>(channels * width));
    for (Index c = 0; c < channels; ++c)
      for (Index t = 0; t < width; ++t) p.push_back(c * length + o * stride + t);
  }
  return PatchMap(patches, channels * length);
}

PatchMap conv2d_patches(Index channels, Index height, Index width, Index kernel_h,
                        Index kernel_w, Index stride) {
  require(channels >= 1 && height >= 1 && width >= 1 && kernel_h >= 1 && kernel_w >= 1 &&
              stride >= 1,
          "conv2d_patches: sizes must be positive");
  require(kernel_h <= height && kernel_w <= width, "conv2d_patches: kernel larger than input");
  const Index out_h = (height - kernel_h) / stride + 1;
  const Index out_w = (width - kernel_w) / stride + 1;
  std::vector<std::vector<Index>> patches;
  patches.reserve(static_cast<std::size_t>(out_h * out_w));
  for (Index r = 0; r < out_h; ++r) {
    for (Index q = 0; q < out_w; ++q) {
      std::vector<Index> p;
      p.reserve(static_cast<std::size_t>(channels * kernel_h * kernel_w));
      for (Index c = 0; c < channels; ++c)
        for (Index kr = 0; kr < kernel_h; ++kr)
          for (Index kc = 0; kc < kernel_w; ++kc)
            p.push_back(c * height * width + (r * stride + kr) * width + (q * stride + kc));
      patches.push_back(std::move(p));
    }
  }
  return PatchMap(patches, channels * height * width);
}

PatchMap full_patch(Index source_size) {
  std::vector<Index> all(static_cast<std::size_t>(source_size));
  for (Index i = 0; i < source_size; ++i) all[static_cast<std::size_t>(i)] = i;
  return PatchMap({all}, source_size);
}

PoolWindows global_pool(Index positions) {
  std::vector<Index> all(static_cast<std::size_t>(positions));
  for (Index i = 0; i < positions; ++i) all[static_cast<std::size_t>(i)] = i;
  return {all};
}

PoolWindows pool2d(Index height, Index width, Index pool_h, Index pool_w) {
  require(pool_h >= 1 && pool_w >= 1 && pool_h <= height && pool_w <= width,
          "pool2d: bad window size");
  PoolWindows windows;
  for (Index r = 0; r + pool_h <= height; r += pool_h) {
    for (Index q = 0; q + pool_w <= width; q += pool_w) {
      std::vector<Index> win;
      for (Index a = 0; a < pool_h; ++a)
        for (Index b = 0; b < pool_w; ++b) win.push_back((r + a) * width + q + b);
      windows.push_back(std::move(win));
    }
  }
  return windows;
}

PoolWindows LayerSpec::effective_windows() const {
  if (!pool.empty()) return pool;
  PoolWindows singletons(static_cast<std::size_t>(patch_count()));
  for (Index o = 0; o < patch_count(); ++o) singletons[static_cast<std::size_t>(o)] = {o};
  return singletons;
}

Architecture::Architecture(Index input_channels, Index input_spatial,
                           std::vector<LayerSpec> layers)
    : input_channels_(input_channels), input_spatial_(input_spatial), layers_(std::move(layers)) {
  require(input_channels >= 1 && input_spatial >= 1, "Architecture: empty input shape");
  require(!layers_.empty(), "Architecture: no layers");
  for (Index l = 1; l <= depth(); ++l) {
    const LayerSpec& spec = layer(l);
    const std::string where = "Architecture: layer " + std::to_string(l) +
                              (spec.name.empty() ? "" : " (" + spec.name + ")");
    require(spec.filters >= 1, where + ": no filters");
    require(spec.patches.count() >= 1, where + ": missing patch map");
    require(spec.patches.source_size() == width(l - 1),
            where + ": patch map indexes " + std::to_string(spec.patches.source_size()) +
                " inputs but previous layer has " + std::to_string(width(l - 1)));
    require(spec.rho > 0.0 && spec.kappa > 0.0, where + ": rho and kappa must be positive");
    if (!spec.pool.empty()) {
      std::vector<char> used(static_cast<std::size_t>(spec.patch_count()), 0);
      for (const auto& win : spec.pool) {
        require(!win.empty(), where + ": empty pooling window");
        for (Index o : win) {
          require(o >= 0 && o < spec.patch_count(), where + ": pooling index out of range");
          require(!used[static_cast<std::size_t>(o)], where + ": pooling windows overlap");
          used[static_cast<std::size_t>(o)] = 1;
        }
      }
    }
  }
  const LayerSpec& last = layers_.back();
  require(last.patch_count() == 1 && last.patches.patch_size() == width(depth() - 1),
          "Architecture: last layer must be fully connected");
  require(last.pool.empty() && !last.constant_channel,
          "Architecture: last layer cannot pool or carry a constant channel");
  require(last.activation == Activation::identity,
          "Architecture: last layer must output raw scores");
}

Index Architecture::channels(Index l) const {
  return l == 0 ? input_channels_ : layer(l).channels_out();
}

Index Architecture::spatial(Index l) const {
  return l == 0 ? input_spatial_ : layer(l).spatial_out();
}

Index Architecture::max_width() const {
  Index w = width(0);
  for (Index l = 1; l <= depth(); ++l) w = std::max(w, width(l));
  return w;
}

Index Architecture::max_preactivation_width() const {
  Index w = 0;
  for (const auto& spec : layers_) w = std::max(w, spec.patch_count() * spec.filters);
  return w;
}

Index Architecture::param_count() const {
  Index n = 0;
  for (const auto& spec : layers_) n += spec.filters * spec.filter_cols();
  return n;
}

std::vector<std::vector<Index>> Architecture::expanded_row_windows(Index l) const {
  const LayerSpec& spec = layer(l);
  const PoolWindows windows = spec.effective_windows();
  const Index positions = spec.patch_count();
  std::vector<std::vector<Index>> rows;
  rows.reserve(static_cast<std::size_t>(spec.filters) * windows.size());
  for (Index j = 0; j < spec.filters; ++j) {
    for (const auto& win : windows) {
      std::vector<Index> r;
      r.reserve(win.size());
      for (Index o : win) r.push_back(j * positions + o);
      rows.push_back(std::move(r));
    }
  }
  return rows;
}

void check_shapes(const Architecture& arch, const WeightSet& weights) {
  require(static_cast<Index>(weights.filters.size()) == arch.depth(),
          "weights: expected " + std::to_string(arch.depth()) + " layers, got " +
              std::to_string(weights.filters.size()));
  for (Index l = 1; l <= arch.depth(); ++l) {
    const Matrix& a = weights.layer(l);
    const LayerSpec& spec = arch.layer(l);
    require(a.rows() == spec.filters && a.cols() == spec.filter_cols(),
            "weights: layer " + std::to_string(l) + " is " + std::to_string(a.rows()) + "x" +
                std::to_string(a.cols()) + ", expected " + std::to_string(spec.filters) + "x" +
                std::to_string(spec.filter_cols()));
  }
}

WeightSet zero_weights(const Architecture& arch) {
  WeightSet w;
  for (const auto& spec : arch.layers()) w.filters.push_back(Matrix::Zero(spec.filters, spec.filter_cols()));
  return w;
}

WeightSet glorot_uniform(const Architecture& arch, std::uint64_t seed) {
  WeightSet w;
  for (Index l = 1; l <= arch.depth(); ++l) {
    const LayerSpec& spec = arch.layer(l);
    const double limit = std::sqrt(6.0 / static_cast<double>(spec.filter_cols() + spec.filters));
    Rng rng = make_rng(seed, static_cast<std::uint64_t>(l));
    Matrix a(spec.filters, spec.filter_cols());
    for (Index i = 0; i < a.size(); ++i) a.data()[i] = limit * (2.0 * uniform01(rng) - 1.0);
    w.filters.push_back(std::move(a));
  }
  return w;
}

WeightSet difference(const WeightSet& a, const WeightSet& b) {
  require(a.filters.size() == b.filters.size(), "difference: layer count mismatch");
  WeightSet d;
  for (std::size_t i = 0; i < a.filters.size(); ++i) {
    require(a.filters[i].rows() == b.filters[i].rows() && a.filters[i].cols() == b.filters[i].cols(),
            "difference: shape mismatch at layer " + std::to_string(i + 1));
    d.filters.push_back(a.filters[i] - b.filters[i]);
  }
  return d;
}

Matrix patch_matrix(const Vector& x, const PatchMap& patches) {
  require(x.size() == patches.source_size(), "patch_matrix: input has " +
                                                 std::to_string(x.size()) + " entries, expected " +
                                                 std::to_string(patches.source_size()));
  const Index d = patches.patch_size();
  Eigen::MatrixXd cols(d, patches.count());
  for (Index o = 0; o < patches.count(); ++o) {
    const auto p = patches.patch(o);
    double* dst = cols.col(o).data();
    for (Index i = 0; i < d; ++i) dst[i] = x[p[static_cast<std::size_t>(i)]];
  }
  return cols;
}

Matrix apply_conv(const Vector& x, const Matrix& filters, const PatchMap& patches) {
  require(filters.cols() == patches.patch_size(), "apply_conv: filter width " +
                                                      std::to_string(filters.cols()) +
                                                      " does not match patch size " +
                                                      std::to_string(patches.patch_size()));
  require(x.size() == patches.source_size(), "apply_conv: input size mismatch");
  const Index d = patches.patch_size();
  Eigen::MatrixXd cols(d, patches.count());
  for (Index o = 0; o < patches.count(); ++o) {
    const auto p = patches.patch(o);
    double* dst = cols.col(o).data();
    for (Index i = 0; i < d; ++i) dst[i] = x[p[static_cast<std::size_t>(i)]];
  }
  return filters * cols;
}

Matrix expand_operator(const Matrix& filters, const PatchMap& patches) {
  require(filters.cols() == patches.patch_size(), "expand_operator: filter/patch size mismatch");
  const Index positions = patches.count();
  Matrix out = Matrix::Zero(filters.rows() * positions, patches.source_size());
  for (Index j = 0; j < filters.rows(); ++j) {
    for (Index o = 0; o < positions; ++o) {
      const auto p = patches.patch(o);
      for (Index i = 0; i < patches.patch_size(); ++i)
        out(j * positions + o, p[static_cast<std::size_t>(i)]) += filters(j, i);
    }
  }
  return out;
}

Vector ConvOperator::apply(const Vector& x) const {
  const Matrix z = apply_conv(x, filters_, patches_);
  return Eigen::Map<const Vector>(z.data(), z.size());
}

Vector ConvOperator::apply_adjoint(const Vector& y) const {
  require(y.size() == rows(), "ConvOperator: adjoint input size mismatch");
  const Index positions = patches_.count();
  Eigen::Map<const Matrix> ym(y.data(), filters_.rows(), positions);
  const Eigen::MatrixXd g = filters_.transpose() * ym;  // d x O
  Vector x = Vector::Zero(cols());
  for (Index o = 0; o < positions; ++o) {
    const auto p = patches_.patch(o);
    for (Index i = 0; i < patches_.patch_size(); ++i) x[p[static_cast<std::size_t>(i)]] += g(i, o);
  }
  return x;
}

double expanded_l21(const Matrix& filters, const PatchMap& patches) {
  require(filters.cols() == patches.patch_size(), "expanded_l21: filter/patch size mismatch");
  return static_cast<double>(patches.count()) * filters.rowwise().norm().sum();
}

double expanded_frobenius(const Matrix& filters, const PatchMap& patches) {
  require(filters.cols() == patches.patch_size(),
          "expanded_frobenius: filter/patch size mismatch");
  return std::sqrt(static_cast<double>(patches.count())) * filters.norm();
}

SpectralEstimate expanded_spectral_norm(const Matrix& filters, const PatchMap& patches,
                                        const SpectralOptions& user_options) {
  SpectralOptions options = user_options;
  options.lanczos_steps = std::max(options.lanczos_steps, 200);
  const Index rows = filters.rows() * patches.count();
  if (rows * patches.source_size() <= 4'000'000) {
    return spectral_norm(expand_operator(filters, patches), options);
  }
  if ((filters.array() == 0.0).all()) return SpectralEstimate{};
  const ConvOperator op(filters, patches);
  return spectral_norm([&op](const Vector& x) { return op.apply(x); },
                       [&op](const Vector& y) { return op.apply_adjoint(y); }, op.cols(),
                       options);
}

namespace {

LayerActivation layer_forward(const LayerSpec& spec, const Matrix& filters, const Vector& prev) {
  LayerActivation act;
  act.preactivation = apply_conv(prev, filters, spec.patches);
  const PoolWindows windows = spec.effective_windows();
  const Index m = spec.filters;
  const Index w = static_cast<Index>(windows.size());
  act.pooled.resize(m, w);
  act.argmax.resize(static_cast<std::size_t>(m * w));
  act.output.setZero(spec.width_out());
  for (Index j = 0; j < m; ++j) {
    for (Index p = 0; p < w; ++p) {
      const auto& win = windows[static_cast<std::size_t>(p)];
      Index best = win.front();
      double best_value = act.preactivation(j, best);
      for (std::size_t t = 1; t < win.size(); ++t) {
        const double v = act.preactivation(j, win[t]);
        if (v > best_value || (v == best_value && win[t] < best)) {
          best = win[t];
          best_value = v;
        }
      }
      act.pooled(j, p) = best_value;
      act.argmax[static_cast<std::size_t>(j * w + p)] = best;
      act.output[j * w + p] =
          spec.activation == Activation::relu ? std::max(best_value, 0.0) : best_value;
    }
  }
  if (spec.constant_channel) act.output.segment(m * w, w).setOnes();
  return act;
}

}  // namespace

ActivationTrace forward(const Architecture& arch, const WeightSet& weights, const Vector& x) {
  check_shapes(arch, weights);
  require(x.size() == arch.width(0), "forward: input has " + std::to_string(x.size()) +
                                         " entries, expected " + std::to_string(arch.width(0)));
  ActivationTrace trace;
  trace.input = x;
  trace.layers.reserve(static_cast<std::size_t>(arch.depth()));
  for (Index l = 1; l <= arch.depth(); ++l) {
    trace.layers.push_back(layer_forward(arch.layer(l), weights.layer(l), trace.activation(l - 1)));
    if (!trace.layers.back().output.allFinite()) trace.finite = false;
  }
  return trace;
}

Vector forward_from(const Architecture& arch, const WeightSet& weights, Index l1,
                    const Vector& activation, Index l2) {
  check_shapes(arch, weights);
  require(0 <= l1 && l1 <= l2 && l2 <= arch.depth(), "forward_from: need 0 <= l1 <= l2 <= L");
  require(activation.size() == arch.width(l1), "forward_from: activation size mismatch");
  Vector current = activation;
  for (Index u = l1 + 1; u <= l2; ++u)
    current = layer_forward(arch.layer(u), weights.layer(u), current).output;
  return current;
}

Matrix local_jacobian(const Architecture& arch, const WeightSet& weights,
                      const ActivationTrace& trace, Index u) {
  require(u >= 1 && u <= arch.depth(), "local_jacobian: layer out of range");
  const LayerSpec& spec = arch.layer(u);
  const LayerActivation& act = trace.layers.at(static_cast<std::size_t>(u - 1));
  const Matrix& a = weights.layer(u);
  const PoolWindows windows = spec.effective_windows();
  const Index w = static_cast<Index>(windows.size());
  require(spec.width_out() * arch.width(u - 1) <= kMaxJacobianEntries,
          "local_jacobian: layer " + std::to_string(u) + " Jacobian exceeds the dense size cap");
  Matrix jac = Matrix::Zero(spec.width_out(), arch.width(u - 1));
  for (Index j = 0; j < spec.filters; ++j) {
    for (Index p = 0; p < w; ++p) {
      const auto& win = windows[static_cast<std::size_t>(p)];
      const Index chosen = act.argmax[static_cast<std::size_t>(j * w + p)];
      const double top = act.pooled(j, p);
      for (Index o : win) {
        if (o != chosen && act.preactivation(j, o) == top)
          throw DegeneratePointError("subnet_jacobian: tied pooling maximum at layer " +
                                     std::to_string(u) + ", channel " + std::to_string(j) +
                                     ", window " + std::to_string(p));
      }
      if (spec.activation == Activation::relu) {
        if (top == 0.0)
          throw DegeneratePointError("subnet_jacobian: zero relu preactivation at layer " +
                                     std::to_string(u) + ", channel " + std::to_string(j) +
                                     ", position " + std::to_string(p));
        if (top < 0.0) continue;
      }
      const auto patch = spec.patches.patch(chosen);
      for (Index i = 0; i < spec.filter_cols(); ++i)
        jac(j * w + p, patch[static_cast<std::size_t>(i)]) += a(j, i);
    }
  }
  return jac;
}

Matrix subnet_jacobian(const Architecture& arch, const WeightSet& weights,
                       const ActivationTrace& trace, Index l1, Index l2) {
  require(0 <= l1 && l1 < l2 && l2 <= arch.depth(), "subnet_jacobian: need 0 <= l1 < l2 <= L");
  Matrix jac = local_jacobian(arch, weights, trace, l1 + 1);
  for (Index u = l1 + 2; u <= l2; ++u) jac = local_jacobian(arch, weights, trace, u) * jac;
  return jac;
}

Matrix subnet_jacobian(const Architecture& arch, const WeightSet& weights, const Vector& x,
                       Index l1, Index l2) {
  return subnet_jacobian(arch, weights, forward(arch, weights, x), l1, l2);
}

double margin(const Vector& scores, Index label) {
  require(scores.size() >= 2, "margin: need at least two classes");
  require(label >= 0 && label < scores.size(), "margin: label out of range");
  double other = -std::numeric_limits<double>::infinity();
  for (Index j = 0; j < scores.size(); ++j)
    if (j != label) other = std::max(other, scores[j]);
  return scores[label] - other;
}

}  // namespace cnnbound
