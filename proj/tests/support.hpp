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

// Independent reference implementations shared by the unit and acceptance
// tests. None of these call into the library code they are compared with.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "nkdiff.hpp"

namespace nkdiff::testing {

/// Straightforward MLP evaluation: nested loops over a layer list, ReLU on
/// hidden layers, softmax with the probability floor on the output.
inline std::vector<double> reference_forward(const std::vector<int>& widths, const std::vector<double>& params,
                                             const std::vector<double>& x) {
  std::vector<double> a = x;
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const int in = widths[l];
    const int out = widths[l + 1];
    std::vector<double> z(static_cast<std::size_t>(out));
    for (int o = 0; o < out; ++o) {
      double s = params[off + static_cast<std::size_t>(in * out + o)];
      for (int i = 0; i < in; ++i) s += params[off + static_cast<std::size_t>(o * in + i)] * a[static_cast<std::size_t>(i)];
      const bool hidden = l + 2 < widths.size();
      z[static_cast<std::size_t>(o)] = hidden ? (s > 0.0 ? s : 0.0) : s;
    }
    off += static_cast<std::size_t>(in * out + out);
    a = std::move(z);
  }
  double m = a[0];
  for (double v : a) m = std::max(m, v);
  double sum = 0.0;
  for (double& v : a) {
    v = std::exp(v - m);
    sum += v;
  }
  for (double& v : a) v = std::max(v / sum, kProbFloor);
  sum = 0.0;
  for (double v : a) sum += v;
  for (double& v : a) v /= sum;
  return a;
}

/// Unclamped cross-entropy of one example, recomputed from scratch.
inline double reference_loss(const std::vector<int>& widths, const std::vector<double>& params,
                             const std::vector<double>& x, int label) {
  std::vector<double> a = x;
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const int in = widths[l];
    const int out = widths[l + 1];
    std::vector<double> z(static_cast<std::size_t>(out));
    for (int o = 0; o < out; ++o) {
      double s = params[off + static_cast<std::size_t>(in * out + o)];
      for (int i = 0; i < in; ++i) s += params[off + static_cast<std::size_t>(o * in + i)] * a[static_cast<std::size_t>(i)];
      z[static_cast<std::size_t>(o)] = (l + 2 < widths.size()) ? std::max(s, 0.0) : s;
    }
    off += static_cast<std::size_t>(in * out + out);
    a = std::move(z);
  }
  double m = a[0];
  for (double v : a) m = std::max(m, v);
  double sum = 0.0;
  for (double v : a) sum += std::exp(v - m);
  return m + std::log(sum) - a[static_cast<std::size_t>(label)];
}

struct GradientCheck {
  double max_rel_error = 0.0;
  std::size_t params_checked = 0;
};

/// Compares the analytic gradient of one (learner, x, label) triple with
/// central differences of step h. Relative error uses
/// |a - n| / max(1e-6, |a| + |n|). Parameters whose perturbation flips a
/// ReLU (the loss is not differentiable there) are skipped.
inline GradientCheck finite_difference_check(const Learner& learner, const std::vector<double>& x, int label,
                                             double h = 1e-5) {
  std::vector<double> grad;
  loss_gradient(learner, x, label, grad);
  const auto& widths = learner.spec.layer_widths;

  auto hidden_pattern = [&](const std::vector<double>& p) {
    std::vector<bool> on;
    std::vector<double> a = x;
    std::size_t off = 0;
    for (std::size_t l = 0; l + 2 < widths.size(); ++l) {
      const int in = widths[l];
      const int out = widths[l + 1];
      std::vector<double> z(static_cast<std::size_t>(out));
      for (int o = 0; o < out; ++o) {
        double s = p[off + static_cast<std::size_t>(in * out + o)];
        for (int i = 0; i < in; ++i) s += p[off + static_cast<std::size_t>(o * in + i)] * a[static_cast<std::size_t>(i)];
        on.push_back(s > 0.0);
        z[static_cast<std::size_t>(o)] = std::max(s, 0.0);
      }
      off += static_cast<std::size_t>(in * out + out);
      a = std::move(z);
    }
    return on;
  };

  GradientCheck out;
  const auto base_pattern = hidden_pattern(learner.params);
  std::vector<double> p = learner.params;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double saved = p[i];
    p[i] = saved + h;
    const bool plus_ok = hidden_pattern(p) == base_pattern;
    const double lp = reference_loss(widths, p, x, label);
    p[i] = saved - h;
    const bool minus_ok = hidden_pattern(p) == base_pattern;
    const double lm = reference_loss(widths, p, x, label);
    p[i] = saved;
    if (!plus_ok || !minus_ok) continue;
    const double numeric = (lp - lm) / (2.0 * h);
    const double rel = std::abs(grad[i] - numeric) / std::max(1e-6, std::abs(grad[i]) + std::abs(numeric));
    out.max_rel_error = std::max(out.max_rel_error, rel);
    ++out.params_checked;
  }
  return out;
}

/// A random architecture, learner and labelled input.
struct GradientCase {
  Learner learner;
  std::vector<double> x;
  int label = 0;
};

inline GradientCase random_gradient_case(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> depth(0, 2), width(1, 6), classes(2, 5);
  std::normal_distribution<double> normal(0.0, 1.0);
  ModelSpec spec;
  spec.layer_widths.push_back(width(rng));
  for (int l = depth(rng); l > 0; --l) spec.layer_widths.push_back(width(rng));
  spec.layer_widths.push_back(classes(rng));
  spec.seed = rng();
  GradientCase c{init_learner(spec, 0, false), {}, 0};
  // Non-zero biases so that bias gradients are exercised as well.
  for (auto& v : c.learner.params) v += 0.1 * normal(rng);
  for (int i = 0; i < spec.input_dim(); ++i) c.x.push_back(normal(rng));
  c.label = std::uniform_int_distribution<int>(0, spec.num_classes() - 1)(rng);
  return c;
}

/// Grouping built by reading the policy text literally: with the members
/// listed from best to worst, the first k are teachers; the rest are handed
/// out either as consecutive blocks of C-1 (best-trains-best) or one at a
/// time in turn (equitable), teachers taken from best to worst.
inline std::vector<std::pair<int, std::vector<int>>> reference_grouping(const std::vector<int>& ascending, int C,
                                                                        bool equitable) {
  const int N = static_cast<int>(ascending.size());
  const int k = N / C;
  std::vector<int> best_first(ascending.rbegin(), ascending.rend());
  std::vector<std::pair<int, std::vector<int>>> groups;
  for (int j = 0; j < k; ++j) groups.push_back({best_first[static_cast<std::size_t>(j)], {}});
  std::vector<int> rest(best_first.begin() + k, best_first.end());
  for (std::size_t i = 0; i < rest.size(); ++i) {
    const std::size_t g = equitable ? i % static_cast<std::size_t>(k) : i / static_cast<std::size_t>(C - 1);
    groups[g].second.push_back(rest[i]);
  }
  return groups;
}

inline std::vector<std::pair<int, std::vector<int>>> as_pairs(const RoundPlan& plan) {
  std::vector<std::pair<int, std::vector<int>>> out;
  for (const auto& g : plan.groups) out.push_back({g.teacher, g.learners});
  return out;
}

/// The reference blobs task: 3 classes in 10 dimensions, 600/200/200 split.
inline ExperimentConfig reference_config(PolicyTag policy, int C, int rounds, std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.policy = policy;
  cfg.C = C;
  cfg.rounds = rounds;
  cfg.master_seed = seed;
  return cfg;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& name) {
    path_ = std::filesystem::temp_directory_path() / ("nkdiff_test_" + name + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace nkdiff::testing
