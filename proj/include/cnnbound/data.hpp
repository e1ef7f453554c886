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

#ifndef CNNBOUND_DATA_HPP
#define CNNBOUND_DATA_HPP

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cnnbound/convnet.hpp"

namespace cnnbound {

using Provenance = std::map<std::string, std::string>;

struct LabeledDataset {
  std::vector<Vector> inputs;
  std::vector<Index> labels;
  Index channels = 1;
  Index height = 1;  ///< 1 for sequences
  Index width = 1;
  Index classes = 2;
  Provenance provenance;

  Index size() const { return static_cast<Index>(inputs.size()); }
  Index spatial() const { return height * width; }
};

inline constexpr Index kSignatureCount = 20;
inline constexpr Index kSignatureLength = 15;
inline constexpr Index kSignaturesPerSample = 5;
inline constexpr Index kDigits = 4;

struct SignatureInsertion {
  std::array<Index, kSignaturesPerSample> signatures{};  ///< ids 0..19
  /// Start offset of every inserted copy; copy c belongs to signature c / iter.
  std::vector<Index> starts;
};

struct SignatureDataset {
  LabeledDataset data;
  std::vector<std::array<std::uint8_t, kSignatureLength>> signatures;
  std::vector<SignatureInsertion> log;
  std::vector<std::vector<std::uint8_t>> sequences;
};

/// Majority label of five signature ids (ids below 10 vote for class 0).
Index signature_majority(const std::array<Index, kSignaturesPerSample>& ids);

/// Sequences over {0,1,2,3} with five signatures inserted `iter` times each
/// at uniformly random non-overlapping offsets; one-hot, channel-major.
SignatureDataset gen_signature_dataset(std::uint64_t seed, Index count, Index length, Index iter);

/// Default repetition count for a sequence length: max(1, length / 1000).
Index default_iter(Index length);

struct IdxArray {
  std::uint8_t type_code = 0;  ///< 0x08 for u8
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> data;
};

/// Parses an IDX container. `expected_rank` 3 means images, 1 labels.
IdxArray read_idx(const std::vector<std::uint8_t>& bytes, int expected_rank);
std::vector<std::uint8_t> read_file_bytes(const std::string& path);

struct MnistSet {
  std::vector<std::vector<std::uint8_t>> images;  ///< 28 x 28 each, row-major
  std::vector<Index> labels;
  Index rows = 28;
  Index cols = 28;
};

MnistSet load_mnist(const std::string& images_path, const std::string& labels_path,
                    Index limit = 0);

struct PlacedCopy {
  Index row = 0;
  Index col = 0;
};

struct AugmentedMnist {
  LabeledDataset data;
  std::vector<Index> source;  ///< index of the source image per sample
  std::vector<std::vector<PlacedCopy>> placements;
};

/// `count` canvases of 28s x 28s, each holding s/2 disjoint copies of one
/// randomly chosen source image; pixels scaled to [0, 1].
AugmentedMnist augment_mnist(const MnistSet& mnist, Index s, Index count, std::uint64_t seed);

struct Downsampled {
  Vector x;
  Index height = 0;
  Index width = 0;
  Matrix filters;
  Index kernel_h = 0;
  Index kernel_w = 0;
};

/// Replaces each 2x2 block of a block-constant input by twice its value and
/// each 2x2 block of every first-layer filter by the block's L2 norm. Input
/// and filters are channel-major; filter columns are (channel, row, col).
Downsampled downsample_pair(const Vector& x, Index channels, Index height, Index width,
                            const Matrix& filters, Index kernel_h, Index kernel_w);

struct Snapshot {
  WeightSet weights;
  WeightSet refs;
  Provenance meta;
};

/// Writes `path` (text manifest) and `path + ".bin"` (float32 little endian).
void write_snapshot(const std::string& path, const WeightSet& weights, const WeightSet& refs,
                    const Provenance& meta);
Snapshot read_snapshot(const std::string& path);

/// Weights rounded to float32, i.e. exactly what a snapshot stores.
WeightSet round_to_float(const WeightSet& weights);

/// Dataset export in the snapshot layout: tensors "inputs" (N x width) and
/// "labels" (N x 1). Returns the blob checksum.
std::uint64_t write_dataset(const std::string& path, const LabeledDataset& data);
LabeledDataset read_dataset(const std::string& path);

/// FNV-1a 64 over raw bytes.
std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t size,
                      std::uint64_t basis = 0xcbf29ce484222325ULL);

}  // namespace cnnbound

#endif  // CNNBOUND_DATA_HPP
