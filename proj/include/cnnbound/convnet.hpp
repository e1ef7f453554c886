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

#ifndef CNNBOUND_CONVNET_HPP
#define CNNBOUND_CONVNET_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cnnbound/linalg.hpp"

namespace cnnbound {

// Activations are flat vectors laid out channel-major: the value of channel c
// at spatial position p sits at c * spatial + p.

/// Ordered list of O convolutional patches S^1..S^O, each an index list of
/// equal length d into the previous layer's flattened activation.
class PatchMap {
 public:
  PatchMap() = default;
  PatchMap(const std::vector<std::vector<Index>>& patches, Index source_size);

  Index count() const { return count_; }
  Index patch_size() const { return size_; }
  Index source_size() const { return source_; }
  std::span<const Index> patch(Index o) const {
    return {indices_.data() + o * size_, static_cast<std::size_t>(size_)};
  }

 private:
  std::vector<Index> indices_;
  Index count_ = 0;
  Index size_ = 0;
  Index source_ = 0;
};

/// Valid (unpadded) 1-D convolution over a channels x length signal. Patch
/// entries are ordered channel-major, then by offset.
PatchMap conv1d_patches(Index channels, Index length, Index width, Index stride = 1);

/// Valid 2-D convolution over channels x height x width (row-major spatial).
/// Patch entries are ordered channel, kernel row, kernel column.
PatchMap conv2d_patches(Index channels, Index height, Index width, Index kernel_h,
                        Index kernel_w, Index stride = 1);

/// A single patch covering the whole source: a fully connected layer.
PatchMap full_patch(Index source_size);

/// Max-pooling windows over the spatial positions 0..O-1 of a layer's
/// preactivation. Each window is applied to every channel separately, so
/// pooling never mixes channels.
using PoolWindows = std::vector<std::vector<Index>>;

PoolWindows global_pool(Index positions);
PoolWindows pool2d(Index height, Index width, Index pool_h, Index pool_w);

enum class Activation { relu, identity };

struct LayerSpec {
  std::string name;
  Index filters = 0;  ///< m_l, rows of the filter matrix
  PatchMap patches;   ///< over the previous layer; d_l = patches.patch_size()
  PoolWindows pool;   ///< empty means no pooling
  Activation activation = Activation::relu;
  double rho = 1.0;    ///< Lipschitz constant of the nonlinearity
  double kappa = 1.0;  ///< |.|_{inf,l} <= sqrt(kappa) |.|_l
  /// Append a channel of ones to the output (offset terms for the next layer).
  bool constant_channel = false;

  Index filter_cols() const { return patches.patch_size(); }
  Index patch_count() const { return patches.count(); }
  Index spatial_out() const {
    return pool.empty() ? patch_count() : static_cast<Index>(pool.size());
  }
  Index channels_out() const { return filters + (constant_channel ? 1 : 0); }
  Index width_out() const { return channels_out() * spatial_out(); }
  /// Post-pooling neuron count k_l = U_l * w_l.
  Index neurons() const { return width_out(); }
  PoolWindows effective_windows() const;
};

class Architecture {
 public:
  Architecture() = default;
  Architecture(Index input_channels, Index input_spatial, std::vector<LayerSpec> layers);

  Index depth() const { return static_cast<Index>(layers_.size()); }
  /// Layers are numbered 1..depth(); layer 0 is the input.
  const LayerSpec& layer(Index l) const { return layers_.at(static_cast<std::size_t>(l - 1)); }
  const std::vector<LayerSpec>& layers() const { return layers_; }

  Index channels(Index l) const;
  Index spatial(Index l) const;
  Index width(Index l) const { return channels(l) * spatial(l); }
  Index class_count() const { return layers_.back().filters; }

  /// W = max_{0<=l<=L} W_l.
  Index max_width() const;
  /// W-bar = max_l O_{l-1} m_l, neurons before pooling.
  Index max_preactivation_width() const;
  /// Sum of m_l d_l, each shared filter counted once.
  Index param_count() const;

  /// Pooling windows expressed as row sets of the expanded operator of
  /// layer l (row j * O + o). Rows outside every window are discarded by the
  /// network.
  std::vector<std::vector<Index>> expanded_row_windows(Index l) const;

 private:
  Index input_channels_ = 0;
  Index input_spatial_ = 0;
  std::vector<LayerSpec> layers_;
};

/// Filter matrices A^1..A^L; filters[l-1] is m_l x d_l.
struct WeightSet {
  std::vector<Matrix> filters;

  const Matrix& layer(Index l) const { return filters.at(static_cast<std::size_t>(l - 1)); }
  Matrix& layer(Index l) { return filters.at(static_cast<std::size_t>(l - 1)); }
};

void check_shapes(const Architecture& arch, const WeightSet& weights);
WeightSet zero_weights(const Architecture& arch);
/// Per-layer uniform in +-sqrt(6 / (fan_in + fan_out)).
WeightSet glorot_uniform(const Architecture& arch, std::uint64_t seed);
WeightSet difference(const WeightSet& a, const WeightSet& b);

struct LayerActivation {
  Matrix preactivation;  ///< m x O
  Matrix pooled;         ///< m x w, window maxima before the nonlinearity
  std::vector<Index> argmax;  ///< m * w chosen positions (lowest index on ties)
  Vector output;         ///< channels_out x w, flattened
};

struct ActivationTrace {
  Vector input;
  std::vector<LayerActivation> layers;
  bool finite = true;

  const Vector& activation(Index l) const {
    return l == 0 ? input : layers.at(static_cast<std::size_t>(l - 1)).output;
  }
  const Vector& scores() const { return layers.back().output; }
};

/// d x O matrix whose column o holds x restricted to patch o.
Matrix patch_matrix(const Vector& x, const PatchMap& patches);

/// Lambda_A(x)_{j,o} = sum_i x_{S^o_i} A_{j,i}.
Matrix apply_conv(const Vector& x, const Matrix& filters, const PatchMap& patches);

/// Dense (m O) x source matrix with apply_conv(x) == expand_operator * x,
/// row j * O + o.
Matrix expand_operator(const Matrix& filters, const PatchMap& patches);

/// Matrix-free expanded operator, for layers too large to materialize.
class ConvOperator {
 public:
  ConvOperator(const Matrix& filters, const PatchMap& patches)
      : filters_(filters), patches_(patches) {}

  Index rows() const { return filters_.rows() * patches_.count(); }
  Index cols() const { return patches_.source_size(); }
  Vector apply(const Vector& x) const;
  Vector apply_adjoint(const Vector& y) const;

 private:
  Matrix filters_;
  PatchMap patches_;
};

/// Sum of row norms of the expanded operator; every row is one filter placed
/// on one patch, so this is O times the sum of filter norms.
double expanded_l21(const Matrix& filters, const PatchMap& patches);
double expanded_frobenius(const Matrix& filters, const PatchMap& patches);

/// Spectral norm of the expanded operator of layer l, dense when small and
/// matrix-free otherwise. Restarts are warm-started by at least 200 Lanczos
/// steps, since convolution operators often have clustered top singular
/// values.
SpectralEstimate expanded_spectral_norm(const Matrix& filters, const PatchMap& patches,
                                        const SpectralOptions& options = {});

ActivationTrace forward(const Architecture& arch, const WeightSet& weights, const Vector& x);

/// F^{l1 -> l2} applied to a layer-l1 activation.
Vector forward_from(const Architecture& arch, const WeightSet& weights, Index l1,
                    const Vector& activation, Index l2);

/// Jacobian of layer u at the activation pattern recorded in the trace:
/// W_u x W_{u-1}. Throws DegeneratePointError on exact ties.
Matrix local_jacobian(const Architecture& arch, const WeightSet& weights,
                      const ActivationTrace& trace, Index u);

/// Exact Jacobian of F^{l1 -> l2} at the pattern induced by x, 0 <= l1 < l2.
Matrix subnet_jacobian(const Architecture& arch, const WeightSet& weights,
                       const ActivationTrace& trace, Index l1, Index l2);
Matrix subnet_jacobian(const Architecture& arch, const WeightSet& weights, const Vector& x,
                       Index l1, Index l2);

/// F(x)_y - max_{j != y} F(x)_j.
double margin(const Vector& scores, Index label);

/// Largest dense Jacobian subnet_jacobian will build.
inline constexpr Index kMaxJacobianEntries = 40'000'000;

}  // namespace cnnbound

#endif  // CNNBOUND_CONVNET_HPP
