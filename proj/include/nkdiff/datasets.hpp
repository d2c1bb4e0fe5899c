/*
 * Copyright 2026 The nkdiff Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <numeric>
#include <string>
#include <vector>

#include "nkdiff/common.hpp"

namespace nkdiff {

enum class Split { train, validation, test };

struct Dataset {
  Matrix X;
  Labels y;
  int K = 0;
  Split split = Split::train;

  std::size_t size() const noexcept { return y.size(); }
  bool empty() const noexcept { return y.empty(); }
};

inline void validate(const Dataset& ds) {
  if (ds.X.rows() != ds.y.size()) {
    throw SpecificationError("Dataset: row count does not match label count");
  }
  for (int label : ds.y) {
    if (label < 0 || label >= ds.K) throw SpecificationError("Dataset: label out of range");
  }
}

/// Rows `indices` of ds, in the given order.
inline Dataset subset(const Dataset& ds, const std::vector<std::size_t>& indices, Split split) {
  Dataset out;
  out.K = ds.K;
  out.split = split;
  std::vector<double> data;
  data.reserve(indices.size() * ds.X.cols());
  out.y.reserve(indices.size());
  for (auto r : indices) {
    auto row = ds.X.row(r);
    data.insert(data.end(), row.begin(), row.end());
    out.y.push_back(ds.y[r]);
  }
  out.X = Matrix(indices.size(), ds.X.cols(), std::move(data));
  return out;
}

/// K Gaussian blobs in d dimensions. Centers are drawn from N(0, centers_scale^2 I),
/// points from N(center, noise_sigma^2 I); rows come out shuffled.
inline Dataset gen_blobs(int n_per_class, int K, int d, double centers_scale, double noise_sigma,
                         std::uint64_t seed) {
  if (K < 2 || d < 1 || n_per_class < 1) {
    throw SpecificationError("gen_blobs: need K >= 2, d >= 1, n_per_class >= 1");
  }
  if (!(centers_scale >= 0.0) || !(noise_sigma >= 0.0)) {
    throw SpecificationError("gen_blobs: scales must be non-negative");
  }
  Rng rng = derive_rng(seed, {stream::kData});
  std::normal_distribution<double> unit(0.0, 1.0);

  Matrix centers(static_cast<std::size_t>(K), static_cast<std::size_t>(d));
  for (int k = 0; k < K; ++k) {
    for (int j = 0; j < d; ++j) centers(k, j) = centers_scale * unit(rng);
  }

  const auto n = static_cast<std::size_t>(n_per_class) * static_cast<std::size_t>(K);
  Dataset ordered;
  ordered.K = K;
  ordered.X = Matrix(n, static_cast<std::size_t>(d));
  ordered.y.resize(n);
  std::size_t r = 0;
  for (int k = 0; k < K; ++k) {
    for (int i = 0; i < n_per_class; ++i, ++r) {
      for (int j = 0; j < d; ++j) ordered.X(r, j) = centers(k, j) + noise_sigma * unit(rng);
      ordered.y[r] = k;
    }
  }
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  return subset(ordered, perm, Split::train);
}

// --- IDX files -------------------------------------------------------------

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

/// Failure while reading IDX files; kind() tells the cases apart.
class IdxError : public std::runtime_error {
 public:
  enum class Kind { io, bad_magic, truncated, count_mismatch };

  IdxError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

namespace detail {

inline std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IdxError(IdxError::Kind::io, "cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class BigEndianReader {
 public:
  BigEndianReader(const std::vector<unsigned char>& bytes, std::string path)
      : bytes_(bytes), path_(std::move(path)) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | bytes_[pos_++];
    return v;
  }

  const unsigned char* take(std::size_t count) {
    need(count);
    const unsigned char* p = bytes_.data() + pos_;
    pos_ += count;
    return p;
  }

 private:
  void need(std::size_t count) const {
    if (bytes_.size() - pos_ < count) {
      throw IdxError(IdxError::Kind::truncated, path_ + ": truncated IDX file");
    }
  }

  const std::vector<unsigned char>& bytes_;
  std::string path_;
  std::size_t pos_ = 0;
};

inline void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<unsigned char>(v >> shift));
}

inline void write_file(const std::string& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IdxError(IdxError::Kind::io, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IdxError(IdxError::Kind::io, "short write to " + path);
}

}  // namespace detail

/// Reads an MNIST-family image/label file pair. Pixels are scaled to [0,1].
inline Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  const auto image_bytes = detail::read_file(images_path);
  const auto label_bytes = detail::read_file(labels_path);

  detail::BigEndianReader images(image_bytes, images_path);
  if (const auto magic = images.u32(); magic != kIdxImagesMagic) {
    throw IdxError(IdxError::Kind::bad_magic, images_path + ": bad image magic number");
  }
  const std::uint32_t count = images.u32();
  const std::uint32_t rows = images.u32();
  const std::uint32_t cols = images.u32();

  detail::BigEndianReader labels(label_bytes, labels_path);
  if (const auto magic = labels.u32(); magic != kIdxLabelsMagic) {
    throw IdxError(IdxError::Kind::bad_magic, labels_path + ": bad label magic number");
  }
  const std::uint32_t label_count = labels.u32();
  if (label_count != count) {
    throw IdxError(IdxError::Kind::count_mismatch,
                   "image count " + std::to_string(count) + " does not match label count " +
                       std::to_string(label_count));
  }

  const std::size_t features = static_cast<std::size_t>(rows) * cols;
  const unsigned char* pixels = images.take(static_cast<std::size_t>(count) * features);
  const unsigned char* raw_labels = labels.take(count);

  Dataset ds;
  ds.K = 10;
  std::vector<double> data(static_cast<std::size_t>(count) * features);
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = static_cast<double>(pixels[i]) / 255.0;
  ds.X = Matrix(count, features, std::move(data));
  ds.y.assign(raw_labels, raw_labels + count);
  for (int label : ds.y) ds.K = std::max(ds.K, label + 1);
  return ds;
}

/// Writes ds as an IDX image/label pair with the given image geometry.
/// Feature values are mapped back to bytes by round(x*255), clamped to [0,255].
inline void write_idx(const Dataset& ds, std::uint32_t rows, std::uint32_t cols,
                      const std::string& images_path, const std::string& labels_path) {
  if (static_cast<std::size_t>(rows) * cols != ds.X.cols()) {
    throw SpecificationError("write_idx: rows*cols does not match the feature count");
  }
  std::vector<unsigned char> images;
  images.reserve(16 + ds.X.data().size());
  detail::put_u32(images, kIdxImagesMagic);
  detail::put_u32(images, static_cast<std::uint32_t>(ds.size()));
  detail::put_u32(images, rows);
  detail::put_u32(images, cols);
  for (double v : ds.X.data()) {
    images.push_back(static_cast<unsigned char>(std::clamp(std::lround(v * 255.0), 0L, 255L)));
  }
  std::vector<unsigned char> labels;
  detail::put_u32(labels, kIdxLabelsMagic);
  detail::put_u32(labels, static_cast<std::uint32_t>(ds.size()));
  for (int label : ds.y) {
    if (label < 0 || label > 255) throw SpecificationError("write_idx: label does not fit a byte");
    labels.push_back(static_cast<unsigned char>(label));
  }
  detail::write_file(images_path, images);
  detail::write_file(labels_path, labels);
}

// --- label corruption ------------------------------------------------------

enum class CorruptionMode { uniform_replace, full_random };

struct CorruptionSpec {
  double fraction = 0.0;
  CorruptionMode mode = CorruptionMode::uniform_replace;
  std::uint64_t seed = 0;
};

/// Indices whose labels get redrawn: floor(fraction*n) of them, chosen
/// uniformly without replacement (all n for full_random), in ascending order.
inline std::vector<std::size_t> corruption_indices(std::size_t n, const CorruptionSpec& spec) {
  if (!(spec.fraction >= 0.0 && spec.fraction <= 1.0)) {
    throw SpecificationError("corrupt_labels: fraction must lie in [0,1]");
  }
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  if (spec.mode == CorruptionMode::full_random) return all;
  const auto m = static_cast<std::size_t>(std::floor(spec.fraction * static_cast<double>(n)));
  Rng rng = derive_rng(spec.seed, {stream::kCorrupt, 0});
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(m);
  std::sort(all.begin(), all.end());
  return all;
}

/// Symmetric label noise: each selected label is replaced by a uniform draw
/// over all K classes (which may equal the original).
inline Labels corrupt_labels(const Labels& y, const CorruptionSpec& spec, int K) {
  if (K < 2) throw SpecificationError("corrupt_labels: need K >= 2");
  for (int label : y) {
    if (label < 0 || label >= K) throw SpecificationError("corrupt_labels: label out of range");
  }
  const auto chosen = corruption_indices(y.size(), spec);
  Rng rng = derive_rng(spec.seed, {stream::kCorrupt, 1});
  std::uniform_int_distribution<int> draw(0, K - 1);
  Labels out = y;
  for (auto i : chosen) out[i] = draw(rng);
  return out;
}

// --- splitting -------------------------------------------------------------

struct SplitIndices {
  std::vector<std::size_t> train, validation, test;
};

inline SplitIndices split_indices(std::size_t n, double train_frac, double val_frac,
                                  std::uint64_t seed) {
  if (!(train_frac > 0.0) || !(val_frac > 0.0) || !(train_frac + val_frac < 1.0)) {
    throw SpecificationError("split_dataset: fractions must be positive with train+val < 1");
  }
  // The small slack keeps e.g. 0.29*100 from flooring to 28.
  const auto n_train = static_cast<std::size_t>(std::floor(train_frac * static_cast<double>(n) + 1e-9));
  const auto n_val = static_cast<std::size_t>(std::floor(val_frac * static_cast<double>(n) + 1e-9));
  if (n_train == 0 || n_val == 0 || n_train + n_val >= n) {
    throw SpecificationError("split_dataset: a split would be empty");
  }
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng = derive_rng(seed, {stream::kSplit});
  std::shuffle(perm.begin(), perm.end(), rng);

  SplitIndices out;
  out.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.validation.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train),
                        perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  out.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), perm.end());
  return out;
}

struct DataSplits {
  Dataset train, validation, test;
};

inline DataSplits split_dataset(const Dataset& ds, double train_frac, double val_frac,
                                std::uint64_t seed) {
  validate(ds);
  const auto idx = split_indices(ds.size(), train_frac, val_frac, seed);
  return {subset(ds, idx.train, Split::train), subset(ds, idx.validation, Split::validation),
          subset(ds, idx.test, Split::test)};
}

}  // namespace nkdiff
