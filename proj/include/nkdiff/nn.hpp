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

// Dense ReLU classifier used for every member of a population: forward
// inference, cross-entropy backprop and plain mini-batch SGD.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "nkdiff/common.hpp"

namespace nkdiff {

/// Probability floor applied before anything takes a log of a class probability.
inline constexpr double kProbFloor = 1e-12;

enum class Activation { relu };

struct ModelSpec {
  /// Input dim, hidden widths..., number of classes K.
  std::vector<int> layer_widths;
  Activation activation = Activation::relu;
  std::uint64_t seed = 0;

  int input_dim() const { return layer_widths.front(); }
  int num_classes() const { return layer_widths.back(); }
  std::size_t num_layers() const { return layer_widths.size() - 1; }

  bool operator==(const ModelSpec&) const = default;
};

inline void validate(const ModelSpec& spec) {
  if (spec.layer_widths.size() < 2) {
    throw SpecificationError("ModelSpec: need at least input and output widths");
  }
  for (int w : spec.layer_widths) {
    if (w <= 0) throw SpecificationError("ModelSpec: layer widths must be positive");
  }
  if (spec.layer_widths.back() < 2) {
    throw SpecificationError("ModelSpec: need at least two output classes");
  }
}

inline std::size_t param_count(const ModelSpec& spec) {
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < spec.layer_widths.size(); ++l) {
    auto in = static_cast<std::size_t>(spec.layer_widths[l]);
    auto out = static_cast<std::size_t>(spec.layer_widths[l + 1]);
    total += in * out + out;
  }
  return total;
}

struct Learner {
  int id = 0;
  /// Per layer: weights (out x in, row-major) followed by biases (out).
  std::vector<double> params;
  ModelSpec spec;
  Rng rng;
  bool is_oracle = false;
};

struct ClassDistribution {
  std::vector<double> probs;

  std::size_t num_classes() const { return probs.size(); }
  int argmax() const {
    // std::max_element returns the first maximum: lowest index on ties.
    return static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
  }
};

struct TrainHyperparams {
  double learning_rate = 0.05;
  int batch_size = 16;
  bool shuffle = true;
};

struct SessionStats {
  double mean_loss = 0.0;
  std::uint64_t forward_ops = 0;
};

inline Learner init_learner(const ModelSpec& spec, int id, bool is_oracle) {
  validate(spec);
  Learner learner;
  learner.id = id;
  learner.spec = spec;
  learner.is_oracle = is_oracle;
  learner.params.reserve(param_count(spec));

  Rng init = derive_rng(spec.seed, {stream::kModel, static_cast<std::uint64_t>(id)});
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    const int in = spec.layer_widths[l];
    const int out = spec.layer_widths[l + 1];
    const double s = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> dist(-s, s);
    for (int i = 0; i < in * out; ++i) learner.params.push_back(dist(init));
    learner.params.insert(learner.params.end(), static_cast<std::size_t>(out), 0.0);
  }
  learner.rng = derive_rng(spec.seed, {stream::kSession, static_cast<std::uint64_t>(id)});
  return learner;
}

namespace detail {

inline void check_input(const ModelSpec& spec, std::span<const double> x) {
  if (x.size() != static_cast<std::size_t>(spec.input_dim())) {
    throw SpecificationError("forward: input has " + std::to_string(x.size()) +
                             " features, model expects " + std::to_string(spec.input_dim()));
  }
}

/// Scratch buffers for one forward/backward pass; activations[l] is the input
/// to layer l, activations.back() holds the logits.
class Workspace {
 public:
  explicit Workspace(const ModelSpec& spec) : spec_(spec) {
    for (int w : spec.layer_widths) {
      activations_.emplace_back(static_cast<std::size_t>(w), 0.0);
      deltas_.emplace_back(static_cast<std::size_t>(w), 0.0);
    }
  }

  std::span<const double> logits(std::span<const double> params, std::span<const double> x) {
    std::copy(x.begin(), x.end(), activations_[0].begin());
    std::size_t offset = 0;
    const std::size_t layers = spec_.num_layers();
    for (std::size_t l = 0; l < layers; ++l) {
      const auto in = static_cast<std::size_t>(spec_.layer_widths[l]);
      const auto out = static_cast<std::size_t>(spec_.layer_widths[l + 1]);
      const double* w = params.data() + offset;
      const double* b = w + in * out;
      const auto& a = activations_[l];
      auto& z = activations_[l + 1];
      for (std::size_t o = 0; o < out; ++o) {
        double acc = b[o];
        const double* wrow = w + o * in;
        for (std::size_t i = 0; i < in; ++i) acc += wrow[i] * a[i];
        z[o] = (l + 1 < layers) ? std::max(acc, 0.0) : acc;
      }
      offset += in * out + out;
    }
    return activations_.back();
  }

  /// Adds d(loss)/d(params) for one example to grad and returns the
  /// cross-entropy loss of that example.
  double accumulate_gradient(std::span<const double> params, std::span<const double> x, int label,
                             std::span<double> grad) {
    auto z = logits(params, x);
    const std::size_t K = z.size();
    const double zmax = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    auto& top = deltas_.back();
    for (std::size_t j = 0; j < K; ++j) {
      top[j] = std::exp(z[j] - zmax);
      sum += top[j];
    }
    const double log_norm = zmax + std::log(sum);
    const double loss = log_norm - z[static_cast<std::size_t>(label)];
    for (std::size_t j = 0; j < K; ++j) top[j] /= sum;
    top[static_cast<std::size_t>(label)] -= 1.0;

    const std::size_t layers = spec_.num_layers();
    std::size_t offset = param_count(spec_);
    for (std::size_t l = layers; l-- > 0;) {
      const auto in = static_cast<std::size_t>(spec_.layer_widths[l]);
      const auto out = static_cast<std::size_t>(spec_.layer_widths[l + 1]);
      offset -= in * out + out;
      const double* w = params.data() + offset;
      double* gw = grad.data() + offset;
      double* gb = gw + in * out;
      const auto& a = activations_[l];
      const auto& d = deltas_[l + 1];
      for (std::size_t o = 0; o < out; ++o) {
        gb[o] += d[o];
        double* grow = gw + o * in;
        for (std::size_t i = 0; i < in; ++i) grow[i] += d[o] * a[i];
      }
      if (l > 0) {
        auto& prev = deltas_[l];
        for (std::size_t i = 0; i < in; ++i) {
          double acc = 0.0;
          for (std::size_t o = 0; o < out; ++o) acc += w[o * in + i] * d[o];
          // ReLU derivative, taken as 0 at the kink.
          prev[i] = a[i] > 0.0 ? acc : 0.0;
        }
      }
    }
    return loss;
  }

 private:
  const ModelSpec& spec_;
  std::vector<std::vector<double>> activations_;
  std::vector<std::vector<double>> deltas_;
};

inline ClassDistribution softmax(std::span<const double> z) {
  ClassDistribution out;
  out.probs.resize(z.size());
  const double zmax = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (std::size_t j = 0; j < z.size(); ++j) {
    out.probs[j] = std::exp(z[j] - zmax);
    sum += out.probs[j];
  }
  double clamped_sum = 0.0;
  for (auto& p : out.probs) {
    p = std::max(p / sum, kProbFloor);
    clamped_sum += p;
  }
  for (auto& p : out.probs) p = std::max(p / clamped_sum, kProbFloor);
  return out;
}

}  // namespace detail

inline ClassDistribution forward(const Learner& learner, std::span<const double> x) {
  detail::check_input(learner.spec, x);
  detail::Workspace ws(learner.spec);
  return detail::softmax(ws.logits(learner.params, x));
}

/// Hard labels: per-row argmax of the teacher's class distribution. Only
/// trainees are classifiers; the Oracle's labels come from its label store.
inline Labels pseudolabels(const Learner& teacher, const Matrix& X) {
  if (teacher.is_oracle) {
    throw ContractError("pseudolabels: the Oracle is a label store, not a classifier");
  }
  if (X.empty()) throw SpecificationError("pseudolabels: empty feature matrix");
  if (X.cols() != static_cast<std::size_t>(teacher.spec.input_dim())) {
    detail::check_input(teacher.spec, X.row(0));
  }
  detail::Workspace ws(teacher.spec);
  Labels out(X.rows());
  for (std::size_t r = 0; r < X.rows(); ++r) {
    // Argmax of the logits equals argmax of the softmax except where the
    // floor makes tiny probabilities equal; go through softmax to keep the
    // tie-break identical to forward().
    out[r] = detail::softmax(ws.logits(teacher.params, X.row(r))).argmax();
  }
  return out;
}

namespace detail {
inline void check_labels(const Matrix& X, const Labels& labels, int num_classes) {
  if (labels.size() != X.rows()) {
    throw SpecificationError("labels length " + std::to_string(labels.size()) +
                             " does not match " + std::to_string(X.rows()) + " rows");
  }
  for (int y : labels) {
    if (y < 0 || y >= num_classes) throw SpecificationError("label out of range");
  }
}
}  // namespace detail

/// Mean cross-entropy of the learner on (X, labels); no parameter change.
inline double mean_loss(const Learner& learner, const Matrix& X, const Labels& labels) {
  detail::check_labels(X, labels, learner.spec.num_classes());
  if (X.empty()) return 0.0;
  detail::Workspace ws(learner.spec);
  double total = 0.0;
  for (std::size_t r = 0; r < X.rows(); ++r) {
    detail::check_input(learner.spec, X.row(r));
    auto z = ws.logits(learner.params, X.row(r));
    const double zmax = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - zmax);
    total += zmax + std::log(sum) - z[static_cast<std::size_t>(labels[r])];
  }
  return total / static_cast<double>(X.rows());
}

/// Cross-entropy loss of one example and its gradient w.r.t. all parameters.
inline double loss_gradient(const Learner& learner, std::span<const double> x, int label,
                            std::vector<double>& grad) {
  detail::check_input(learner.spec, x);
  if (label < 0 || label >= learner.spec.num_classes()) {
    throw SpecificationError("loss_gradient: label out of range");
  }
  grad.assign(learner.params.size(), 0.0);
  detail::Workspace ws(learner.spec);
  return ws.accumulate_gradient(learner.params, x, label, grad);
}

/// One pass over (X, labels) in mini-batches of plain SGD on cross-entropy.
/// The reported loss is the mean per-example loss seen during the pass.
inline SessionStats train_epoch(Learner& learner, const Matrix& X, const Labels& labels,
                                const TrainHyperparams& hp) {
  if (learner.is_oracle) {
    throw ContractError("train_epoch: the Oracle never learns");
  }
  if (!(hp.learning_rate >= 0.0) || !std::isfinite(hp.learning_rate)) {
    throw SpecificationError("train_epoch: learning rate must be finite and non-negative");
  }
  if (hp.batch_size <= 0) throw SpecificationError("train_epoch: batch size must be positive");
  if (X.empty()) throw SpecificationError("train_epoch: empty training set");
  detail::check_labels(X, labels, learner.spec.num_classes());
  if (X.cols() != static_cast<std::size_t>(learner.spec.input_dim())) {
    detail::check_input(learner.spec, X.row(0));
  }
  const std::size_t n = X.rows();
  const auto batch = static_cast<std::size_t>(hp.batch_size);
  if (batch > n) throw SpecificationError("train_epoch: batch size exceeds training-set size");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (hp.shuffle) std::shuffle(order.begin(), order.end(), learner.rng);

  detail::Workspace ws(learner.spec);
  std::vector<double> grad(learner.params.size());
  double total_loss = 0.0;
  for (std::size_t start = 0; start < n; start += batch) {
    const std::size_t stop = std::min(start + batch, n);
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t k = start; k < stop; ++k) {
      const std::size_t r = order[k];
      total_loss += ws.accumulate_gradient(learner.params, X.row(r), labels[r], grad);
    }
    const double step = hp.learning_rate / static_cast<double>(stop - start);
    for (std::size_t p = 0; p < grad.size(); ++p) learner.params[p] -= step * grad[p];
  }
  return {total_loss / static_cast<double>(n), static_cast<std::uint64_t>(n)};
}

inline int predict(const Learner& learner, std::span<const double> x) {
  return forward(learner, x).argmax();
}

}  // namespace nkdiff
