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
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nkdiff/datasets.hpp"
#include "nkdiff/nn.hpp"
#include "nkdiff/parallel.hpp"
#include "nkdiff/population.hpp"

namespace nkdiff {

/// A set of classifiers voting by summed log-probabilities.
struct Ensemble {
  std::vector<const Learner*> members;
};

/// The trainees of a population; the Oracle does not vote.
inline Ensemble trainee_ensemble(const Population& pop) {
  Ensemble e;
  for (const auto& l : pop.learners) {
    if (!l.is_oracle) e.members.push_back(&l);
  }
  return e;
}

/// argmax_j sum_i log p_i[j], with every p clamped below by kProbFloor.
/// Ties go to the lowest class index.
inline int ensemble_classify(std::span<const ClassDistribution> distributions) {
  if (distributions.empty()) throw SpecificationError("ensemble_classify: empty ensemble");
  const std::size_t K = distributions.front().num_classes();
  std::vector<double> score(K, 0.0);
  for (const auto& d : distributions) {
    if (d.num_classes() != K) throw SpecificationError("ensemble_classify: class count mismatch");
    for (std::size_t j = 0; j < K; ++j) score[j] += std::log(std::max(d.probs[j], kProbFloor));
  }
  return static_cast<int>(std::max_element(score.begin(), score.end()) - score.begin());
}

inline double accuracy(std::span<const int> predictions, std::span<const int> labels) {
  if (labels.empty()) throw SpecificationError("accuracy: empty dataset");
  if (predictions.size() != labels.size()) throw SpecificationError("accuracy: length mismatch");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) correct += predictions[i] == labels[i] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

inline double accuracy(const Learner& model, const Dataset& ds) {
  if (ds.empty()) throw SpecificationError("accuracy: empty dataset");
  return static_cast<double>(correct_count(model, ds)) / static_cast<double>(ds.size());
}

inline double accuracy(const Ensemble& ensemble, const Dataset& ds) {
  if (ds.empty()) throw SpecificationError("accuracy: empty dataset");
  std::vector<ClassDistribution> votes(ensemble.members.size());
  std::size_t correct = 0;
  for (std::size_t r = 0; r < ds.size(); ++r) {
    for (std::size_t m = 0; m < ensemble.members.size(); ++m) {
      votes[m] = forward(*ensemble.members[m], ds.X.row(r));
    }
    if (ensemble_classify(votes) == ds.y[r]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(ds.size());
}

/// Mean accuracy of the trainees (Oracle excluded).
inline double average_learner_accuracy(const Population& pop, const Dataset& ds) {
  const auto e = trainee_ensemble(pop);
  if (e.members.empty()) throw SpecificationError("average_learner_accuracy: no trainees");
  double total = 0.0;
  for (const auto* m : e.members) total += accuracy(*m, ds);
  return total / static_cast<double>(e.members.size());
}

/// Per-member and ensemble correct counts of an ensemble on one dataset,
/// computed in a single pass over the data.
struct EnsembleEval {
  std::vector<std::size_t> member_correct;
  std::size_t ensemble_correct = 0;
  std::size_t n = 0;

  double member_accuracy(std::size_t m) const {
    return static_cast<double>(member_correct[m]) / static_cast<double>(n);
  }
  double average_accuracy() const {
    double total = 0.0;
    for (std::size_t m = 0; m < member_correct.size(); ++m) total += member_accuracy(m);
    return total / static_cast<double>(member_correct.size());
  }
  double ensemble_accuracy() const {
    return static_cast<double>(ensemble_correct) / static_cast<double>(n);
  }
};

inline EnsembleEval evaluate_ensemble(const Ensemble& ensemble, const Matrix& X,
                                      std::span<const int> labels, int threads = 1) {
  if (labels.empty()) throw SpecificationError("evaluate_ensemble: empty dataset");
  if (ensemble.members.empty()) throw SpecificationError("evaluate_ensemble: empty ensemble");
  const std::size_t n = labels.size();
  const std::size_t M = ensemble.members.size();
  const auto K = static_cast<std::size_t>(ensemble.members.front()->spec.num_classes());

  // log_probs[m] is an n x K matrix of clamped log-probabilities.
  std::vector<std::vector<double>> log_probs(M);
  EnsembleEval out;
  out.n = n;
  out.member_correct.assign(M, 0);
  parallel_for(M, threads, [&](std::size_t m) {
    const Learner& learner = *ensemble.members[m];
    detail::Workspace ws(learner.spec);
    auto& lp = log_probs[m];
    lp.resize(n * K);
    for (std::size_t r = 0; r < n; ++r) {
      detail::check_input(learner.spec, X.row(r));
      const auto dist = detail::softmax(ws.logits(learner.params, X.row(r)));
      if (dist.argmax() == labels[r]) ++out.member_correct[m];
      for (std::size_t j = 0; j < K; ++j) lp[r * K + j] = std::log(std::max(dist.probs[j], kProbFloor));
    }
  });
  // Summation in fixed member order keeps the vote independent of threading.
  std::vector<double> score(K);
  for (std::size_t r = 0; r < n; ++r) {
    std::fill(score.begin(), score.end(), 0.0);
    for (std::size_t m = 0; m < M; ++m) {
      for (std::size_t j = 0; j < K; ++j) score[j] += log_probs[m][r * K + j];
    }
    const auto best = static_cast<int>(std::max_element(score.begin(), score.end()) - score.begin());
    if (best == labels[r]) ++out.ensemble_correct;
  }
  return out;
}

struct DisagreementStats {
  std::size_t both_correct = 0;
  std::size_t at_least_one_correct = 0;
  std::size_t n = 0;
};

inline DisagreementStats disagreement_stats(const Learner& a, const Learner& b, const Dataset& test) {
  if (test.empty()) throw SpecificationError("disagreement_stats: empty dataset");
  DisagreementStats s;
  s.n = test.size();
  for (std::size_t r = 0; r < test.size(); ++r) {
    const bool ca = predict(a, test.X.row(r)) == test.y[r];
    const bool cb = predict(b, test.X.row(r)) == test.y[r];
    s.both_correct += (ca && cb) ? 1 : 0;
    s.at_least_one_correct += (ca || cb) ? 1 : 0;
  }
  return s;
}

// --- per-round records and multi-seed aggregation --------------------------

struct MetricsRecord {
  int round = 0;
  double alacc_test = 0.0;
  double ensacc_test = 0.0;
  /// Against the labels the Oracle holds (possibly corrupted).
  double alacc_train = 0.0;
  double ensacc_val = 0.0;
  std::uint64_t oracle_sessions = 0;
  std::uint64_t forward_ops = 0;
  /// Test accuracy of each trainee, by id.
  std::vector<double> per_learner_acc;

  bool operator==(const MetricsRecord&) const = default;
};

/// The per-round metrics that are aggregated across seeds, in CSV column order.
inline const std::vector<std::pair<std::string, double MetricsRecord::*>>& aggregated_metrics() {
  static const std::vector<std::pair<std::string, double MetricsRecord::*>> fields = {
      {"alacc_test", &MetricsRecord::alacc_test},
      {"ensacc_test", &MetricsRecord::ensacc_test},
      {"alacc_train", &MetricsRecord::alacc_train},
      {"ensacc_val", &MetricsRecord::ensacc_val},
  };
  return fields;
}

struct SeriesStats {
  std::vector<double> mean;
  /// Half-width of the normal-approximation 95% confidence interval.
  std::vector<double> ci95;
};

inline constexpr double kZ95 = 1.96;

/// Mean and 95% CI half-width (1.96 * sample stddev / sqrt(R)) per position,
/// across R >= 2 equally long series.
inline SeriesStats aggregate_seeds(const std::vector<std::vector<double>>& runs) {
  if (runs.size() < 2) throw ContractError("aggregate_seeds: need at least two runs");
  const std::size_t len = runs.front().size();
  for (const auto& r : runs) {
    if (r.size() != len) throw ContractError("aggregate_seeds: runs differ in length");
  }
  const auto R = static_cast<double>(runs.size());
  SeriesStats out;
  out.mean.assign(len, 0.0);
  out.ci95.assign(len, 0.0);
  for (std::size_t t = 0; t < len; ++t) {
    double sum = 0.0;
    for (const auto& r : runs) sum += r[t];
    const double mean = sum / R;
    double ss = 0.0;
    for (const auto& r : runs) ss += (r[t] - mean) * (r[t] - mean);
    out.mean[t] = mean;
    out.ci95[t] = kZ95 * std::sqrt(ss / (R - 1.0)) / std::sqrt(R);
  }
  return out;
}

struct AggregateSeries {
  std::vector<int> rounds;
  std::vector<std::pair<std::string, SeriesStats>> metrics;

  const SeriesStats& get(const std::string& name) const {
    for (const auto& [key, stats] : metrics) {
      if (key == name) return stats;
    }
    throw ContractError("AggregateSeries: unknown metric " + name);
  }
};

inline AggregateSeries aggregate_seeds(const std::vector<std::vector<MetricsRecord>>& runs) {
  if (runs.size() < 2) throw ContractError("aggregate_seeds: need at least two runs");
  AggregateSeries out;
  for (const auto& rec : runs.front()) out.rounds.push_back(rec.round);
  auto collect = [&](auto&& value) {
    std::vector<std::vector<double>> series;
    for (const auto& run : runs) {
      if (run.size() != out.rounds.size()) throw ContractError("aggregate_seeds: runs differ in length");
      std::vector<double> s;
      for (const auto& rec : run) s.push_back(value(rec));
      series.push_back(std::move(s));
    }
    return aggregate_seeds(series);
  };
  out.metrics.emplace_back("oracle_sessions", collect([](const MetricsRecord& r) {
                             return static_cast<double>(r.oracle_sessions);
                           }));
  out.metrics.emplace_back("forward_ops", collect([](const MetricsRecord& r) {
                             return static_cast<double>(r.forward_ops);
                           }));
  for (const auto& [name, field] : aggregated_metrics()) {
    out.metrics.emplace_back(name, collect([field](const MetricsRecord& r) { return r.*field; }));
  }
  return out;
}

}  // namespace nkdiff
