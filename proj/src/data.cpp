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

#include "cnnbound/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "cnnbound/random.hpp"

namespace cnnbound {

using detail::require;

namespace {

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

std::uint64_t parse_hex64(const std::string& s) {
  require(!s.empty() && s.size() <= 16, "bad checksum field '" + s + "'");
  std::uint64_t v = 0;
  for (char c : s) {
    v <<= 4;
    if (c >= '0' && c <= '9') v |= static_cast<std::uint64_t>(c - '0');
    else if (c >= 'a' && c <= 'f') v |= static_cast<std::uint64_t>(c - 'a' + 10);
    else throw ValidationError("bad checksum field '" + s + "'");
  }
  return v;
}

}  // namespace

std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t size, std::uint64_t basis) {
  std::uint64_t h = basis;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

Index signature_majority(const std::array<Index, kSignaturesPerSample>& ids) {
  Index zeros = 0;
  for (Index id : ids) zeros += id < kSignatureCount / 2 ? 1 : 0;
  return zeros * 2 > kSignaturesPerSample ? 0 : 1;
}

Index default_iter(Index length) { return std::max<Index>(1, length / 1000); }

SignatureDataset gen_signature_dataset(std::uint64_t seed, Index count, Index length, Index iter) {
  require(count >= 1, "gen_signature_dataset: need at least one sample");
  require(iter >= 1, "gen_signature_dataset: iter must be positive");
  const Index copies = kSignaturesPerSample * iter;
  require(length >= copies * kSignatureLength,
          "gen_signature_dataset: length " + std::to_string(length) + " cannot hold " +
              std::to_string(copies) + " non-overlapping signatures of length 15");

  SignatureDataset out;
  Rng sig_rng = make_rng(seed, 0x51);
  out.signatures.resize(kSignatureCount);
  for (auto& s : out.signatures)
    for (auto& digit : s) digit = static_cast<std::uint8_t>(uniform_index(sig_rng, kDigits));

  LabeledDataset& data = out.data;
  data.channels = kDigits;
  data.height = 1;
  data.width = length;
  data.classes = 2;
  data.provenance = {{"generator", "signatures"},
                     {"seed", std::to_string(seed)},
                     {"n", std::to_string(count)},
                     {"len", std::to_string(length)},
                     {"iter", std::to_string(iter)},
                     {"encoding", "one-hot, channel-major"}};
  data.inputs.reserve(static_cast<std::size_t>(count));
  out.log.reserve(static_cast<std::size_t>(count));

  const Index free_slots = length - copies * kSignatureLength;
  const std::uint64_t domain = static_cast<std::uint64_t>(free_slots + copies);
  const std::uint64_t sample_seed = derive_seed(seed, 0x5a);
  for (Index i = 0; i < count; ++i) {
    Rng rng = make_rng(sample_seed, static_cast<std::uint64_t>(i));
    std::vector<std::uint8_t> seq(static_cast<std::size_t>(length));
    for (auto& digit : seq) digit = static_cast<std::uint8_t>(uniform_index(rng, kDigits));

    SignatureInsertion ins;
    for (auto& id : ins.signatures) id = static_cast<Index>(uniform_index(rng, kSignatureCount));

    // Uniform non-overlapping placement: a uniform `copies`-subset c_0 < ... of
    // [0, free + copies) maps to starts c_j + 14 j, then copies are shuffled
    // over the slots.
    std::unordered_set<std::uint64_t> chosen;
    for (std::uint64_t j = domain - static_cast<std::uint64_t>(copies); j < domain; ++j) {
      const std::uint64_t t = uniform_index(rng, j + 1);
      if (!chosen.insert(t).second) chosen.insert(j);
    }
    std::vector<std::uint64_t> slots(chosen.begin(), chosen.end());
    std::sort(slots.begin(), slots.end());
    std::vector<Index> order(static_cast<std::size_t>(copies));
    std::iota(order.begin(), order.end(), Index{0});
    for (Index j = copies - 1; j > 0; --j)
      std::swap(order[static_cast<std::size_t>(j)],
                order[static_cast<std::size_t>(uniform_index(rng, static_cast<std::uint64_t>(j + 1)))]);
    ins.starts.assign(static_cast<std::size_t>(copies), 0);
    for (Index slot = 0; slot < copies; ++slot) {
      const Index start = static_cast<Index>(slots[static_cast<std::size_t>(slot)]) +
                          (kSignatureLength - 1) * slot;
      const Index copy = order[static_cast<std::size_t>(slot)];
      ins.starts[static_cast<std::size_t>(copy)] = start;
      const auto& sig = out.signatures[static_cast<std::size_t>(ins.signatures[static_cast<std::size_t>(copy / iter)])];
      std::copy(sig.begin(), sig.end(), seq.begin() + start);
    }

    Vector x = Vector::Zero(kDigits * length);
    for (Index p = 0; p < length; ++p) x[seq[static_cast<std::size_t>(p)] * length + p] = 1.0;
    data.inputs.push_back(std::move(x));
    data.labels.push_back(signature_majority(ins.signatures));
    out.log.push_back(std::move(ins));
    out.sequences.push_back(std::move(seq));
  }
  return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), "cannot open '" + path + "'");
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

IdxArray read_idx(const std::vector<std::uint8_t>& bytes, int expected_rank) {
  require(expected_rank >= 1, "read_idx: rank must be positive");
  require(bytes.size() >= 4, "read_idx: truncated header at offset 0");
  const std::uint32_t magic = (std::uint32_t{bytes[0]} << 24) | (std::uint32_t{bytes[1]} << 16) |
                              (std::uint32_t{bytes[2]} << 8) | bytes[3];
  const std::uint32_t want = 0x00000800u | static_cast<std::uint32_t>(expected_rank);
  if (magic != want) {
    std::ostringstream os;
    os << "read_idx: magic 0x" << std::hex << std::setw(8) << std::setfill('0') << magic
       << " at offset 0, expected 0x" << std::setw(8) << want;
    throw ValidationError(os.str());
  }
  IdxArray out;
  out.type_code = bytes[2];
  const std::size_t header = 4 + 4 * static_cast<std::size_t>(expected_rank);
  require(bytes.size() >= header, "read_idx: truncated dimension header at offset 4");
  std::size_t total = 1;
  for (int r = 0; r < expected_rank; ++r) {
    const std::size_t o = 4 + 4 * static_cast<std::size_t>(r);
    const std::uint32_t dim = (std::uint32_t{bytes[o]} << 24) | (std::uint32_t{bytes[o + 1]} << 16) |
                              (std::uint32_t{bytes[o + 2]} << 8) | bytes[o + 3];
    out.dims.push_back(dim);
    total *= dim;
  }
  require(bytes.size() - header >= total,
          "read_idx: truncated payload at offset " + std::to_string(header) + ": expected " +
              std::to_string(total) + " bytes, found " + std::to_string(bytes.size() - header));
  out.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(header),
                  bytes.begin() + static_cast<std::ptrdiff_t>(header + total));
  return out;
}

MnistSet load_mnist(const std::string& images_path, const std::string& labels_path, Index limit) {
  const IdxArray images = read_idx(read_file_bytes(images_path), 3);
  const IdxArray labels = read_idx(read_file_bytes(labels_path), 1);
  require(images.dims[0] == labels.dims[0], "load_mnist: image and label counts differ");
  MnistSet out;
  out.rows = images.dims[1];
  out.cols = images.dims[2];
  Index n = static_cast<Index>(images.dims[0]);
  if (limit > 0) n = std::min(n, limit);
  const auto pixels = static_cast<std::size_t>(out.rows * out.cols);
  for (Index i = 0; i < n; ++i) {
    const auto begin = images.data.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(i) * pixels);
    out.images.emplace_back(begin, begin + static_cast<std::ptrdiff_t>(pixels));
    const Index label = labels.data[static_cast<std::size_t>(i)];
    require(label < 10, "load_mnist: label " + std::to_string(label) + " out of range at index " + std::to_string(i));
    out.labels.push_back(label);
  }
  return out;
}

AugmentedMnist augment_mnist(const MnistSet& mnist, Index s, Index count, std::uint64_t seed) {
  require(s >= 2 && s % 2 == 0, "augment_mnist: s must be even and >= 2");
  require(count >= 1, "augment_mnist: need at least one sample");
  require(!mnist.images.empty(), "augment_mnist: no source images");
  const Index h = mnist.rows, w = mnist.cols;
  const Index side_h = h * s, side_w = w * s;
  const Index copies = s / 2;
  AugmentedMnist out;
  LabeledDataset& data = out.data;
  data.channels = 1;
  data.height = side_h;
  data.width = side_w;
  data.classes = 10;
  data.provenance = {{"generator", "augmented-mnist"},
                     {"seed", std::to_string(seed)},
                     {"n", std::to_string(count)},
                     {"scale-s", std::to_string(s)},
                     {"pixel-scale", "1/255"}};
  const std::uint64_t sample_seed = derive_seed(seed, 0xa6);
  for (Index i = 0; i < count; ++i) {
    std::vector<PlacedCopy> placed;
    Index source = 0;
    for (std::uint64_t attempt = 0;; ++attempt) {
      Rng rng = make_rng(derive_seed(sample_seed, attempt), static_cast<std::uint64_t>(i));
      source = static_cast<Index>(uniform_index(rng, mnist.images.size()));
      placed.clear();
      bool ok = true;
      for (Index c = 0; c < copies && ok; ++c) {
        ok = false;
        for (int tries = 0; tries < 1000 && !ok; ++tries) {
          PlacedCopy p{static_cast<Index>(uniform_index(rng, static_cast<std::uint64_t>(side_h - h + 1))),
                       static_cast<Index>(uniform_index(rng, static_cast<std::uint64_t>(side_w - w + 1)))};
          ok = std::all_of(placed.begin(), placed.end(), [&](const PlacedCopy& q) {
            return std::abs(p.row - q.row) >= h || std::abs(p.col - q.col) >= w;
          });
          if (ok) placed.push_back(p);
        }
      }
      if (ok) break;
      require(attempt < 64, "augment_mnist: could not place copies");
    }
    Vector x = Vector::Zero(side_h * side_w);
    const auto& img = mnist.images[static_cast<std::size_t>(source)];
    for (const auto& p : placed)
      for (Index r = 0; r < h; ++r)
        for (Index c = 0; c < w; ++c)
          x[(p.row + r) * side_w + p.col + c] = img[static_cast<std::size_t>(r * w + c)] / 255.0;
    data.inputs.push_back(std::move(x));
    data.labels.push_back(mnist.labels[static_cast<std::size_t>(source)]);
    out.source.push_back(source);
    out.placements.push_back(std::move(placed));
  }
  return out;
}

Downsampled downsample_pair(const Vector& x, Index channels, Index height, Index width,
                            const Matrix& filters, Index kernel_h, Index kernel_w) {
  require(channels >= 1 && height % 2 == 0 && width % 2 == 0 && height > 0 && width > 0,
          "downsample_pair: input sides must be even");
  require(kernel_h % 2 == 0 && kernel_w % 2 == 0 && kernel_h > 0 && kernel_w > 0,
          "downsample_pair: kernel sides must be even");
  require(x.size() == channels * height * width, "downsample_pair: input size mismatch");
  require(filters.cols() == channels * kernel_h * kernel_w, "downsample_pair: filter size mismatch");
  Downsampled out;
  out.height = height / 2;
  out.width = width / 2;
  out.kernel_h = kernel_h / 2;
  out.kernel_w = kernel_w / 2;
  out.x.resize(channels * out.height * out.width);
  for (Index c = 0; c < channels; ++c) {
    const double* plane = x.data() + c * height * width;
    for (Index r = 0; r < out.height; ++r) {
      for (Index q = 0; q < out.width; ++q) {
        const double v = plane[2 * r * width + 2 * q];
        const bool constant = plane[2 * r * width + 2 * q + 1] == v &&
                              plane[(2 * r + 1) * width + 2 * q] == v &&
                              plane[(2 * r + 1) * width + 2 * q + 1] == v;
        require(constant, "downsample_pair: input is not constant on the 2x2 block at channel " +
                              std::to_string(c) + ", row " + std::to_string(2 * r) + ", col " +
                              std::to_string(2 * q));
        out.x[c * out.height * out.width + r * out.width + q] = 2.0 * v;
      }
    }
  }
  out.filters.resize(filters.rows(), channels * out.kernel_h * out.kernel_w);
  for (Index j = 0; j < filters.rows(); ++j) {
    for (Index c = 0; c < channels; ++c) {
      for (Index r = 0; r < out.kernel_h; ++r) {
        for (Index q = 0; q < out.kernel_w; ++q) {
          const Index base = c * kernel_h * kernel_w;
          double sq = 0.0;
          for (Index a = 0; a < 2; ++a)
            for (Index b = 0; b < 2; ++b) {
              const double v = filters(j, base + (2 * r + a) * kernel_w + 2 * q + b);
              sq += v * v;
            }
          out.filters(j, c * out.kernel_h * out.kernel_w + r * out.kernel_w + q) = std::sqrt(sq);
        }
      }
    }
  }
  return out;
}

namespace {

void put_float(std::vector<std::uint8_t>& blob, double v) {
  const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
  for (int b = 0; b < 4; ++b) blob.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
}

double get_float(const std::uint8_t* p) {
  std::uint32_t bits = 0;
  for (int b = 0; b < 4; ++b) bits |= std::uint32_t{p[b]} << (8 * b);
  return static_cast<double>(std::bit_cast<float>(bits));
}

struct TensorRecord {
  std::string name;
  Index rows = 0;
  Index cols = 0;
  std::size_t offset = 0;
  std::size_t length = 0;
  std::uint64_t checksum = 0;
};

struct Container {
  Provenance meta;
  std::vector<TensorRecord> tensors;
  std::vector<std::uint8_t> blob;
};

std::string blob_path(const std::string& path) { return path + ".bin"; }

std::string basename_of(const std::string& path) {
  const auto slash = path.find_last_of('/');
  return slash == std::string::npos ? path : path.substr(slash + 1);
}

void append_tensor(Container& c, const std::string& name, const Matrix& m) {
  TensorRecord rec;
  rec.name = name;
  rec.rows = m.rows();
  rec.cols = m.cols();
  rec.offset = c.blob.size();
  for (Index r = 0; r < m.rows(); ++r)
    for (Index q = 0; q < m.cols(); ++q) put_float(c.blob, m(r, q));
  rec.length = c.blob.size() - rec.offset;
  rec.checksum = fnv1a64(c.blob.data() + rec.offset, rec.length);
  c.tensors.push_back(rec);
}

std::uint64_t write_container(const std::string& path, const std::string& kind, const Container& c) {
  for (const auto& [k, v] : c.meta) {
    require(!k.empty() && k.find_first_of(" \t\n") == std::string::npos,
            "manifest key '" + k + "' must be a single word");
    require(v.find('\n') == std::string::npos, "manifest value for '" + k + "' spans lines");
  }
  const std::uint64_t blob_sum = fnv1a64(c.blob.data(), c.blob.size());
  {
    std::ofstream out(blob_path(path), std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), "cannot write '" + blob_path(path) + "'");
    out.write(reinterpret_cast<const char*>(c.blob.data()), static_cast<std::streamsize>(c.blob.size()));
    require(static_cast<bool>(out), "write failed for '" + blob_path(path) + "'");
  }
  std::ofstream out(path, std::ios::trunc);
  require(static_cast<bool>(out), "cannot write '" + path + "'");
  out << "cnnbound-" << kind << " 1\n";
  out << "blob " << basename_of(blob_path(path)) << ' ' << c.blob.size() << ' ' << hex64(blob_sum) << '\n';
  for (const auto& [k, v] : c.meta) out << "meta " << k << ' ' << v << '\n';
  for (const auto& t : c.tensors)
    out << "tensor " << t.name << ' ' << t.rows << ' ' << t.cols << ' ' << t.offset << ' ' << t.length
        << ' ' << hex64(t.checksum) << '\n';
  require(static_cast<bool>(out), "write failed for '" + path + "'");
  return blob_sum;
}

Container read_container(const std::string& path, const std::string& kind) {
  std::ifstream in(path);
  require(static_cast<bool>(in), "cannot open '" + path + "'");
  Container c;
  std::string line;
  require(static_cast<bool>(std::getline(in, line)) && line == "cnnbound-" + kind + " 1",
          "'" + path + "' is not a " + kind + " manifest");
  std::size_t blob_size = 0;
  std::uint64_t blob_sum = 0;
  bool have_blob = false;
  Index line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    const std::string where = path + ":" + std::to_string(line_no);
    if (tag == "blob") {
      std::string name, sum;
      ls >> name >> blob_size >> sum;
      require(static_cast<bool>(ls), where + ": malformed blob record");
      blob_sum = parse_hex64(sum);
      have_blob = true;
    } else if (tag == "meta") {
      std::string key;
      ls >> key;
      std::string value;
      std::getline(ls, value);
      if (!value.empty() && value.front() == ' ') value.erase(0, 1);
      c.meta[key] = value;
    } else if (tag == "tensor") {
      TensorRecord t;
      std::string sum;
      ls >> t.name >> t.rows >> t.cols >> t.offset >> t.length >> sum;
      require(static_cast<bool>(ls), where + ": malformed tensor record");
      t.checksum = parse_hex64(sum);
      require(t.rows >= 0 && t.cols >= 0 &&
                  t.length == static_cast<std::size_t>(t.rows * t.cols) * 4,
              where + ": tensor " + t.name + " length does not match its shape");
      c.tensors.push_back(t);
    } else {
      throw ValidationError(where + ": unknown record '" + tag + "'");
    }
  }
  require(have_blob, path + ": missing blob record");
  c.blob = read_file_bytes(blob_path(path));
  for (const auto& t : c.tensors)
    require(t.offset + t.length <= c.blob.size(),
            path + ": blob truncated at tensor " + t.name + " (needs bytes up to " +
                std::to_string(t.offset + t.length) + ", blob has " + std::to_string(c.blob.size()) + ")");
  require(c.blob.size() == blob_size, path + ": blob has " + std::to_string(c.blob.size()) +
                                          " bytes, manifest says " + std::to_string(blob_size));
  for (const auto& t : c.tensors)
    require(fnv1a64(c.blob.data() + t.offset, t.length) == t.checksum,
            path + ": checksum mismatch in tensor " + t.name);
  require(fnv1a64(c.blob.data(), c.blob.size()) == blob_sum, path + ": blob checksum mismatch");
  return c;
}

Matrix tensor_matrix(const Container& c, const TensorRecord& t) {
  Matrix m(t.rows, t.cols);
  const std::uint8_t* p = c.blob.data() + t.offset;
  for (Index r = 0; r < t.rows; ++r)
    for (Index q = 0; q < t.cols; ++q, p += 4) m(r, q) = get_float(p);
  return m;
}

const TensorRecord& find_tensor(const Container& c, const std::string& name, const std::string& path) {
  for (const auto& t : c.tensors)
    if (t.name == name) return t;
  throw ValidationError(path + ": missing tensor " + name);
}

}  // namespace

void write_snapshot(const std::string& path, const WeightSet& weights, const WeightSet& refs,
                    const Provenance& meta) {
  require(weights.filters.size() == refs.filters.size(), "write_snapshot: weights and refs differ in depth");
  Container c;
  c.meta = meta;
  c.meta["layers"] = std::to_string(weights.filters.size());
  for (std::size_t l = 0; l < weights.filters.size(); ++l) {
    require(weights.filters[l].rows() == refs.filters[l].rows() &&
                weights.filters[l].cols() == refs.filters[l].cols(),
            "write_snapshot: shape mismatch at layer " + std::to_string(l + 1));
    append_tensor(c, "A" + std::to_string(l + 1), weights.filters[l]);
  }
  for (std::size_t l = 0; l < refs.filters.size(); ++l)
    append_tensor(c, "M" + std::to_string(l + 1), refs.filters[l]);
  write_container(path, "snapshot", c);
}

Snapshot read_snapshot(const std::string& path) {
  Container c = read_container(path, "snapshot");
  Snapshot s;
  const auto it = c.meta.find("layers");
  require(it != c.meta.end(), path + ": missing layer count");
  const Index layers = std::stol(it->second);
  require(layers >= 1, path + ": bad layer count");
  for (Index l = 1; l <= layers; ++l) {
    s.weights.filters.push_back(tensor_matrix(c, find_tensor(c, "A" + std::to_string(l), path)));
    s.refs.filters.push_back(tensor_matrix(c, find_tensor(c, "M" + std::to_string(l), path)));
  }
  c.meta.erase("layers");
  s.meta = std::move(c.meta);
  return s;
}

WeightSet round_to_float(const WeightSet& weights) {
  WeightSet out = weights;
  for (auto& m : out.filters) m = m.cast<float>().cast<double>();
  return out;
}

std::uint64_t write_dataset(const std::string& path, const LabeledDataset& data) {
  require(data.size() >= 1 && data.labels.size() == data.inputs.size(),
          "write_dataset: inputs and labels differ in length");
  Container c;
  c.meta = data.provenance;
  c.meta["channels"] = std::to_string(data.channels);
  c.meta["height"] = std::to_string(data.height);
  c.meta["width"] = std::to_string(data.width);
  c.meta["classes"] = std::to_string(data.classes);
  const Index width = data.inputs.front().size();
  Matrix inputs(data.size(), width);
  Matrix labels(data.size(), 1);
  for (Index i = 0; i < data.size(); ++i) {
    require(data.inputs[static_cast<std::size_t>(i)].size() == width, "write_dataset: ragged inputs");
    inputs.row(i) = data.inputs[static_cast<std::size_t>(i)].transpose();
    labels(i, 0) = static_cast<double>(data.labels[static_cast<std::size_t>(i)]);
  }
  append_tensor(c, "inputs", inputs);
  append_tensor(c, "labels", labels);
  return write_container(path, "dataset", c);
}

LabeledDataset read_dataset(const std::string& path) {
  Container c = read_container(path, "dataset");
  LabeledDataset d;
  auto take = [&](const char* key) -> Index {
    const auto it = c.meta.find(key);
    require(it != c.meta.end(), path + ": missing meta " + key);
    const Index v = std::stol(it->second);
    c.meta.erase(it);
    return v;
  };
  d.channels = take("channels");
  d.height = take("height");
  d.width = take("width");
  d.classes = take("classes");
  d.provenance = c.meta;
  const Matrix inputs = tensor_matrix(c, find_tensor(c, "inputs", path));
  const Matrix labels = tensor_matrix(c, find_tensor(c, "labels", path));
  require(inputs.rows() == labels.rows() && inputs.cols() == d.channels * d.height * d.width,
          path + ": tensor shapes disagree with the metadata");
  for (Index i = 0; i < inputs.rows(); ++i) {
    d.inputs.emplace_back(inputs.row(i).transpose());
    d.labels.push_back(static_cast<Index>(labels(i, 0)));
  }
  return d;
}

}  // namespace cnnbound
