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

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace nkdiff {

/// Invalid sizes, shapes or parameter values handed to an operation.
class SpecificationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Policy/population/experiment settings that cannot be satisfied together
/// (divisibility of N by C, POM with C != 2, ...).
class ConfigurationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A caller broke an operation's precondition (training the Oracle, a plan
/// that does not fit the population, ...).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

using Rng = std::mt19937_64;

/// Derives an independent generator from a base seed and a list of tags.
/// The same (seed, tags) always yields the same stream.
inline Rng derive_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
  std::vector<std::uint32_t> words;
  words.reserve(2 + 2 * tags.size());
  auto push = [&words](std::uint64_t v) {
    words.push_back(static_cast<std::uint32_t>(v & 0xffffffffu));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  };
  push(seed);
  for (auto t : tags) push(t);
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
  return derive_rng(seed, tags)();
}

// Stream tags used when deriving generators from a master seed.
namespace stream {
inline constexpr std::uint64_t kData = 0x64617461;       // "data"
inline constexpr std::uint64_t kSplit = 0x73706c74;      // "splt"
inline constexpr std::uint64_t kModel = 0x6d6f646c;      // "modl"
inline constexpr std::uint64_t kCorrupt = 0x6e6f6973;    // "nois"
inline constexpr std::uint64_t kPretrain = 0x70726574;   // "pret"
inline constexpr std::uint64_t kSession = 0x73657373;    // "sess"
inline constexpr std::uint64_t kPlan = 0x706c616e;       // "plan"
}  // namespace stream

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw SpecificationError("Matrix: data size does not match rows*cols");
    }
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return rows_ == 0; }

  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }

  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }

  const std::vector<double>& data() const noexcept { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

using Labels = std::vector<int>;

}  // namespace nkdiff
