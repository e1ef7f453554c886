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

// Independent reference computations shared by the unit and acceptance tests.
// They deliberately avoid the library's own numerical routines.

#ifndef CNNBOUND_TESTS_ORACLES_HPP
#define CNNBOUND_TESTS_ORACLES_HPP

#include <algorithm>
#include <cmath>
#include <vector>

#include "cnnbound/convnet.hpp"
#include "cnnbound/random.hpp"

namespace cnnbound::oracle {

inline Matrix random_matrix(Index rows, Index cols, Rng& rng, double scale = 1.0) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = scale * (2.0 * uniform01(rng) - 1.0);
  return m;
}

inline Vector random_vector(Index n, Rng& rng, double scale = 1.0) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = scale * (2.0 * uniform01(rng) - 1.0);
  return v;
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
inline std::vector<double> jacobi_eigenvalues(std::vector<std::vector<double>> s) {
  const std::size_t n = s.size();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += s[p][q] * s[p][q];
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (s[p][q] == 0.0) continue;
        const double theta = (s[q][q] - s[p][p]) / (2.0 * s[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double skp = s[k][p], skq = s[k][q];
          s[k][p] = c * skp - sn * skq;
          s[k][q] = sn * skp + c * skq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double spk = s[p][k], sqk = s[q][k];
          s[p][k] = c * spk - sn * sqk;
          s[q][k] = sn * spk + c * sqk;
        }
      }
    }
  }
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = s[i][i];
  return out;
}

/// Largest singular value from the Jacobi eigenvalues of the smaller Gram matrix.
inline double jacobi_sigma_max(const Matrix& a) {
  const bool by_cols = a.cols() <= a.rows();
  const Index k = by_cols ? a.cols() : a.rows();
  std::vector<std::vector<double>> g(static_cast<std::size_t>(k), std::vector<double>(static_cast<std::size_t>(k), 0.0));
  for (Index i = 0; i < k; ++i)
    for (Index j = 0; j < k; ++j) {
      double sum = 0.0;
      if (by_cols)
        for (Index r = 0; r < a.rows(); ++r) sum += a(r, i) * a(r, j);
      else
        for (Index c = 0; c < a.cols(); ++c) sum += a(i, c) * a(j, c);
      g[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = sum;
    }
  const auto ev = jacobi_eigenvalues(g);
  return std::sqrt(std::max(0.0, *std::max_element(ev.begin(), ev.end())));
}

/// Forward pass by dense expanded operators and elementwise pooling.
inline Vector dense_forward(const Architecture& arch, const WeightSet& w, const Vector& x) {
  Vector a = x;
  for (Index l = 1; l <= arch.depth(); ++l) {
    const LayerSpec& spec = arch.layer(l);
    const Index O = spec.patch_count();
    const Matrix e = expand_operator(w.layer(l), spec.patches);
    const Vector z = e * a;
    const Index positions = spec.pool.empty() ? O : static_cast<Index>(spec.pool.size());
    Vector out = Vector::Zero(spec.channels_out() * positions);
    for (Index j = 0; j < spec.filters; ++j)
      for (Index p = 0; p < positions; ++p) {
        double v;
        if (spec.pool.empty()) {
          v = z[j * O + p];
        } else {
          v = -INFINITY;
          for (Index o : spec.pool[static_cast<std::size_t>(p)]) v = std::max(v, z[j * O + o]);
        }
        if (spec.activation == Activation::relu) v = std::max(v, 0.0);
        out[j * positions + p] = v;
      }
    if (spec.constant_channel)
      for (Index p = 0; p < positions; ++p) out[spec.filters * positions + p] = 1.0;
    a = out;
  }
  return a;
}

/// Small random network: one or two relu conv layers (1-D or 2-D, optional
/// max pooling) followed by a fully connected identity layer.
inline Architecture random_architecture(Rng& rng) {
  auto pick = [&rng](Index lo, Index hi) { return lo + static_cast<Index>(uniform_index(rng, static_cast<std::uint64_t>(hi - lo + 1))); };
  const Index channels = pick(1, 2);
  const bool two_d = uniform01(rng) < 0.5;
  std::vector<LayerSpec> layers;
  Index spatial, in_spatial;
  LayerSpec first;
  first.name = "conv1";
  first.filters = pick(2, 4);
  if (two_d) {
    const Index h = pick(4, 6), w = pick(4, 6), k = pick(2, 3), stride = pick(1, 2);
    first.patches = conv2d_patches(channels, h, w, k, k, stride);
    in_spatial = h * w;
    const Index oh = (h - k) / stride + 1, ow = (w - k) / stride + 1;
    if (oh >= 2 && ow >= 2 && uniform01(rng) < 0.5) {
      first.pool = pool2d(oh, ow, 2, 2);
      spatial = static_cast<Index>(first.pool.size());
    } else {
      spatial = oh * ow;
    }
  } else {
    const Index len = pick(6, 12), k = pick(2, 3), stride = pick(1, 2);
    first.patches = conv1d_patches(channels, len, k, stride);
    in_spatial = len;
    const Index o = (len - k) / stride + 1;
    if (uniform01(rng) < 0.5) {
      first.pool = pool2d(1, o, 1, 2);
      spatial = static_cast<Index>(first.pool.size());
    } else {
      spatial = o;
    }
  }
  layers.push_back(first);
  Index width = first.filters * spatial;
  if (uniform01(rng) < 0.5 && spatial >= 2) {
    LayerSpec second;
    second.name = "conv2";
    second.filters = pick(2, 3);
    second.patches = conv1d_patches(first.filters, spatial, 2, 1);
    layers.push_back(second);
    width = second.filters * (spatial - 1);
  }
  LayerSpec last;
  last.name = "fc";
  last.filters = pick(2, 3);
  last.patches = full_patch(width);
  last.activation = Activation::identity;
  layers.push_back(last);
  return Architecture(channels, in_spatial, layers);
}

}  // namespace cnnbound::oracle

#endif  // CNNBOUND_TESTS_ORACLES_HPP
