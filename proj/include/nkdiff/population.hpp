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
#include <limits>
#include <numeric>
#include <vector>

#include "nkdiff/datasets.hpp"
#include "nkdiff/nn.hpp"
#include "nkdiff/parallel.hpp"
#include "nkdiff/resources.hpp"

namespace nkdiff {

/// N models sharing one architecture: trainees 0..N-2 and the Oracle at N-1.
/// The Oracle is a label store for the training set; it holds parameters only
/// so that every member has the same shape.
struct Population {
  std::vector<Learner> learners;
  int oracle_id = 0;
  /// Labels the Oracle teaches (the training labels, possibly corrupted).
  Labels oracle_labels;

  int size() const noexcept { return static_cast<int>(learners.size()); }
  int num_trainees() const noexcept { return size() - 1; }
  const Learner& oracle() const { return learners[static_cast<std::size_t>(oracle_id)]; }
};

inline Population make_population(const ModelSpec& spec, int N, Labels oracle_labels) {
  if (N < 2) throw SpecificationError("population: need at least one trainee and the Oracle");
  Population pop;
  pop.oracle_id = N - 1;
  pop.learners.reserve(static_cast<std::size_t>(N));
  for (int id = 0; id < N; ++id) pop.learners.push_back(init_learner(spec, id, id == N - 1));
  pop.oracle_labels = std::move(oracle_labels);
  return pop;
}

/// Labels a member hands out as teacher: the Oracle's stored labels, or a
/// trainee's hard predictions on X.
inline Labels teacher_labels(const Population& pop, int teacher_id, const Matrix& X) {
  const auto& teacher = pop.learners.at(static_cast<std::size_t>(teacher_id));
  if (teacher.is_oracle) {
    if (pop.oracle_labels.size() != X.rows()) {
      throw ContractError("Oracle labels only exist for the training set");
    }
    return pop.oracle_labels;
  }
  return pseudolabels(teacher, X);
}

/// v[i] for every member. The Oracle is scored 1.0 and outranks any trainee
/// that also reaches 1.0.
struct ValidationScores {
  std::vector<double> v;
  int oracle_id = 0;

  /// True when member a should be ranked strictly above member b.
  bool better(int a, int b) const {
    const auto ua = static_cast<std::size_t>(a);
    const auto ub = static_cast<std::size_t>(b);
    if (a == oracle_id) return b != oracle_id;
    if (b == oracle_id) return false;
    return v[ua] > v[ub];
  }
};

inline std::size_t correct_count(const Learner& learner, const Dataset& ds) {
  detail::Workspace ws(learner.spec);
  std::size_t correct = 0;
  for (std::size_t r = 0; r < ds.size(); ++r) {
    detail::check_input(learner.spec, ds.X.row(r));
    if (detail::softmax(ws.logits(learner.params, ds.X.row(r))).argmax() == ds.y[r]) ++correct;
  }
  return correct;
}

inline ValidationScores evaluate_validation(const Population& pop, const Dataset& val,
                                            int threads = 1) {
  if (val.empty()) throw SpecificationError("evaluate_validation: empty validation set");
  ValidationScores scores;
  scores.oracle_id = pop.oracle_id;
  scores.v.assign(pop.learners.size(), 0.0);
  parallel_for(pop.learners.size(), threads, [&](std::size_t i) {
    if (static_cast<int>(i) == pop.oracle_id) {
      scores.v[i] = 1.0;
    } else {
      scores.v[i] = static_cast<double>(correct_count(pop.learners[i], val)) /
                    static_cast<double>(val.size());
    }
  });
  return scores;
}

/// order[i] is the member with the (i+1)-th lowest validation score.
struct RankedList {
  std::vector<int> order;

  int size() const noexcept { return static_cast<int>(order.size()); }
  /// Member of 1-based rank i (m_i); rank size() is the best.
  int at_rank(int i) const { return order.at(static_cast<std::size_t>(i - 1)); }
};

/// Ascending stable sort of the scores; ties go to the lower id first and the
/// Oracle always sits last.
inline RankedList rank_models(const ValidationScores& scores) {
  RankedList ranked;
  ranked.order.resize(scores.v.size());
  std::iota(ranked.order.begin(), ranked.order.end(), 0);
  std::stable_sort(ranked.order.begin(), ranked.order.end(),
                   [&](int a, int b) { return scores.better(b, a); });
  return ranked;
}

/// Learner initialization: trainee t (0-based id) gets t+1 epochs on the
/// Oracle's labels, so the population spans 1..N-1 epochs of prior training.
/// Every epoch is charged to the ledger as an Oracle session.
inline void pretrain_population(Population& pop, const Dataset& train, const TrainHyperparams& hp,
                                ResourceLedger& ledger, int threads = 1) {
  if (pop.oracle_labels.size() != train.size()) {
    throw ContractError("pretrain_population: Oracle labels do not match the training set");
  }
  const auto trainees = static_cast<std::size_t>(pop.num_trainees());
  std::vector<std::uint64_t> ops(trainees, 0);
  parallel_for(trainees, threads, [&](std::size_t t) {
    auto& learner = pop.learners[t];
    for (std::size_t epoch = 0; epoch <= t; ++epoch) {
      ops[t] += train_epoch(learner, train.X, pop.oracle_labels, hp).forward_ops;
    }
  });
  ledger.oracle_sessions += trainees * (trainees + 1) / 2;
  for (auto o : ops) ledger.forward_ops += o;
}

}  // namespace nkdiff
