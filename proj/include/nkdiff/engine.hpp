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

// Round execution: evaluate -> plan -> sessions -> accounting, plus the
// experiment driver that records one MetricsRecord per round.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "nkdiff/datasets.hpp"
#include "nkdiff/metrics.hpp"
#include "nkdiff/nn.hpp"
#include "nkdiff/parallel.hpp"
#include "nkdiff/policies.hpp"
#include "nkdiff/population.hpp"
#include "nkdiff/resources.hpp"

namespace nkdiff {

/// Frozen teacher, one epoch for the learner on the teacher's labels.
/// `labels` are the teacher's labels for X (see teacher_labels). Training the
/// Oracle is a no-op and returns zero stats.
inline SessionStats run_session(const Learner& teacher, Learner& learner, const Matrix& X,
                                const Labels& labels, const TrainHyperparams& hp) {
  if (&teacher == &learner || teacher.id == learner.id) {
    throw ContractError("run_session: a model cannot teach itself");
  }
  if (learner.is_oracle) return {};
  return train_epoch(learner, X, labels, hp);
}

struct RoundOptions {
  std::uint64_t master_seed = 0;
  int round = 1;
  /// Capacity bound the plan is checked against.
  int capacity = 2;
  int threads = 1;
};

struct RoundStats {
  std::size_t sessions_planned = 0;
  std::size_t sessions_executed = 0;
  std::size_t oracle_sessions = 0;
  double mean_loss = 0.0;
};

/// Executes every session of `plan`. Each teacher's labels are computed once
/// from its parameters at the start of the round. Every learner's batch
/// order for the round comes from a stream keyed by (master_seed, round, id),
/// so the outcome does not depend on thread count or session order.
inline RoundStats run_round(Population& pop, const RoundPlan& plan, const Dataset& train,
                            const TrainHyperparams& hp, ResourceLedger& ledger,
                            const RoundOptions& opts) {
  const int N = pop.size();
  check_plan(plan, N, plan.policy == PolicyTag::POM ? 2 : opts.capacity);

  struct Session {
    int teacher;
    int learner;
  };
  std::vector<Session> sessions;
  std::vector<int> teachers;
  RoundStats stats;
  for (const auto& g : plan.groups) {
    for (int l : g.learners) {
      ++stats.sessions_planned;
      if (l == pop.oracle_id) continue;
      sessions.push_back({g.teacher, l});
      if (std::find(teachers.begin(), teachers.end(), g.teacher) == teachers.end()) {
        teachers.push_back(g.teacher);
      }
    }
  }

  std::vector<Labels> labels(static_cast<std::size_t>(N));
  parallel_for(teachers.size(), opts.threads, [&](std::size_t i) {
    const int t = teachers[i];
    labels[static_cast<std::size_t>(t)] = teacher_labels(pop, t, train.X);
  });

  std::vector<SessionStats> results(sessions.size());
  parallel_for(sessions.size(), opts.threads, [&](std::size_t i) {
    const auto [t, l] = sessions[i];
    auto& learner = pop.learners[static_cast<std::size_t>(l)];
    learner.rng = derive_rng(opts.master_seed, {stream::kSession, static_cast<std::uint64_t>(opts.round),
                                                static_cast<std::uint64_t>(l)});
    results[i] = run_session(pop.learners[static_cast<std::size_t>(t)], learner, train.X,
                             labels[static_cast<std::size_t>(t)], hp);
  });

  double loss = 0.0;
  for (std::size_t i = 0; i < sessions.size(); ++i) {
    ++stats.sessions_executed;
    if (sessions[i].teacher == pop.oracle_id) ++stats.oracle_sessions;
    ledger.forward_ops += results[i].forward_ops;
    loss += results[i].mean_loss;
  }
  for (int t : teachers) {
    if (t != pop.oracle_id) ledger.teacher_forward_ops += train.size();
  }
  stats.mean_loss = sessions.empty() ? 0.0 : loss / static_cast<double>(sessions.size());
  ledger.oracle_sessions += stats.oracle_sessions;
  ++ledger.rounds_completed;
  return stats;
}

/// Builds the plan for one round. Validation scores are only computed for
/// policies that use them.
inline RoundPlan plan_round(const Population& pop, const PolicyConfig& policy, const Dataset& val,
                            Rng& rng, int threads = 1) {
  const int N = pop.size();
  switch (policy.policy) {
    case PolicyTag::OO: return group_oo(N, policy.C, rng);
    case PolicyTag::POM: return group_pom(N, rng);
    case PolicyTag::RGBT: return group_rgbt(evaluate_validation(pop, val, threads), policy.C, rng);
    case PolicyTag::BTB: return group_btb(rank_models(evaluate_validation(pop, val, threads)), policy.C);
    case PolicyTag::EQ: return group_eq(rank_models(evaluate_validation(pop, val, threads)), policy.C);
  }
  throw ConfigurationError("unknown policy");
}

// --- experiment configuration ----------------------------------------------

enum class DatasetKind { blobs, idx };

struct DataConfig {
  DatasetKind kind = DatasetKind::blobs;
  // blobs
  int n_per_class = 334;
  int K = 3;
  int d = 10;
  double centers_scale = 1.0;
  double noise_sigma = 1.0;
  // idx
  std::string idx_images;
  std::string idx_labels;
  /// Keep only the first max_rows rows before splitting (0 keeps all).
  std::size_t max_rows = 1000;
  double train_frac = 0.6;
  double val_frac = 0.2;
};

struct ExperimentConfig {
  int N = 10;
  int C = 2;
  PolicyTag policy = PolicyTag::BTB;
  int rounds = 10;
  bool pretrain = false;
  TrainHyperparams hp{0.05, 32, true};
  /// Hidden layer widths; input and output widths come from the data.
  std::vector<int> hidden = {16};
  DataConfig data;
  /// Fraction of Oracle training labels replaced by uniform draws.
  double noise = 0.0;
  /// Replace every Oracle training label by a uniform draw.
  bool random_labels = false;
  std::uint64_t master_seed = 1;
};

inline void validate(const ExperimentConfig& cfg) {
  if (cfg.rounds < 1) throw ConfigurationError("rounds must be at least 1");
  validate_policy({cfg.policy, cfg.C}, cfg.N);
  if (!(cfg.hp.learning_rate >= 0.0)) throw ConfigurationError("learning_rate must be >= 0");
  if (cfg.hp.batch_size < 1) throw ConfigurationError("batch_size must be >= 1");
  for (int h : cfg.hidden) {
    if (h < 1) throw ConfigurationError("hidden widths must be positive");
  }
  if (!(cfg.noise >= 0.0 && cfg.noise <= 1.0)) throw ConfigurationError("noise must lie in [0,1]");
  const auto& d = cfg.data;
  if (!(d.train_frac > 0.0 && d.val_frac > 0.0 && d.train_frac + d.val_frac < 1.0)) {
    throw ConfigurationError("train_frac and val_frac must be positive with a sum below 1");
  }
  if (d.kind == DatasetKind::blobs) {
    if (d.K < 2 || d.d < 1 || d.n_per_class < 1) {
      throw ConfigurationError("blobs need K >= 2, d >= 1, n_per_class >= 1");
    }
  } else if (d.idx_images.empty() || d.idx_labels.empty()) {
    throw ConfigurationError("idx datasets need idx_images and idx_labels paths");
  }
}

/// Train/validation/test splits for one seed. Data generation and the split
/// both derive from the master seed.
inline DataSplits make_datasets(const DataConfig& data, std::uint64_t master_seed) {
  Dataset full;
  if (data.kind == DatasetKind::blobs) {
    full = gen_blobs(data.n_per_class, data.K, data.d, data.centers_scale, data.noise_sigma,
                     derive_seed(master_seed, {stream::kData}));
  } else {
    full = load_idx(data.idx_images, data.idx_labels);
  }
  if (data.max_rows > 0 && full.size() > data.max_rows) {
    std::vector<std::size_t> keep(data.max_rows);
    std::iota(keep.begin(), keep.end(), std::size_t{0});
    full = subset(full, keep, Split::train);
  }
  return split_dataset(full, data.train_frac, data.val_frac, derive_seed(master_seed, {stream::kSplit}));
}

/// Labels held by the Oracle: the clean training labels, or a corrupted copy.
inline Labels oracle_labels_for(const ExperimentConfig& cfg, const Dataset& train) {
  const auto seed = derive_seed(cfg.master_seed, {stream::kCorrupt});
  if (cfg.random_labels) {
    return corrupt_labels(train.y, {1.0, CorruptionMode::full_random, seed}, train.K);
  }
  if (cfg.noise > 0.0) {
    return corrupt_labels(train.y, {cfg.noise, CorruptionMode::uniform_replace, seed}, train.K);
  }
  return train.y;
}

inline ModelSpec model_spec_for(const ExperimentConfig& cfg, const Dataset& train) {
  ModelSpec spec;
  spec.layer_widths.push_back(static_cast<int>(train.X.cols()));
  spec.layer_widths.insert(spec.layer_widths.end(), cfg.hidden.begin(), cfg.hidden.end());
  spec.layer_widths.push_back(train.K);
  spec.seed = derive_seed(cfg.master_seed, {stream::kModel});
  return spec;
}

/// Initial population for a seed, pretrained when cfg.pretrain is set.
/// Every policy run with the same seed starts from this same population.
inline Population initial_population(const ExperimentConfig& cfg, const DataSplits& data,
                                     ResourceLedger& ledger, int threads = 1) {
  Population pop = make_population(model_spec_for(cfg, data.train), cfg.N, oracle_labels_for(cfg, data.train));
  if (cfg.pretrain) pretrain_population(pop, data.train, cfg.hp, ledger, threads);
  return pop;
}

inline MetricsRecord measure(const Population& pop, const DataSplits& data, const ResourceLedger& ledger,
                             int round, int threads = 1) {
  const auto ensemble = trainee_ensemble(pop);
  const auto test = evaluate_ensemble(ensemble, data.test.X, data.test.y, threads);
  const auto train = evaluate_ensemble(ensemble, data.train.X, pop.oracle_labels, threads);
  const auto val = evaluate_ensemble(ensemble, data.validation.X, data.validation.y, threads);
  MetricsRecord rec;
  rec.round = round;
  rec.alacc_test = test.average_accuracy();
  rec.ensacc_test = test.ensemble_accuracy();
  rec.alacc_train = train.average_accuracy();
  rec.ensacc_val = val.ensemble_accuracy();
  rec.oracle_sessions = ledger.oracle_sessions;
  rec.forward_ops = ledger.forward_ops;
  for (std::size_t m = 0; m < ensemble.members.size(); ++m) rec.per_learner_acc.push_back(test.member_accuracy(m));
  return rec;
}

struct ExperimentResult {
  std::vector<MetricsRecord> records;
  ResourceLedger ledger;
  Population final_population;
};

inline ExperimentResult run_experiment(const ExperimentConfig& cfg, const DataSplits& data, int threads = 1) {
  validate(cfg);
  ExperimentResult out;
  Population pop = initial_population(cfg, data, out.ledger, threads);
  const PolicyConfig policy{cfg.policy, cfg.C};
  for (int t = 1; t <= cfg.rounds; ++t) {
    Rng plan_rng = derive_rng(cfg.master_seed, {stream::kPlan, static_cast<std::uint64_t>(t)});
    const RoundPlan plan = plan_round(pop, policy, data.validation, plan_rng, threads);
    run_round(pop, plan, data.train, cfg.hp, out.ledger, {cfg.master_seed, t, cfg.C, threads});
    out.records.push_back(measure(pop, data, out.ledger, t, threads));
  }
  out.final_population = std::move(pop);
  return out;
}

inline ExperimentResult run_experiment(const ExperimentConfig& cfg, int threads = 1) {
  validate(cfg);
  return run_experiment(cfg, make_datasets(cfg.data, cfg.master_seed), threads);
}

// --- two-model disagreement ------------------------------------------------

struct DisagreementRecord {
  int epoch = 0;
  DisagreementStats stats;
  double acc_a = 0.0;
  double acc_b = 0.0;
};

/// Trains two independently initialized models (ids 0 and 1 of `spec`) on the
/// same labels with the same schedule and records, after every epoch, how
/// many test points both / at least one of them classify correctly.
inline std::vector<DisagreementRecord> disagreement_curve(const ModelSpec& spec, const Dataset& train,
                                                          const Dataset& test, const TrainHyperparams& hp,
                                                          int epochs, std::uint64_t seed) {
  Learner a = init_learner(spec, 0, false);
  Learner b = init_learner(spec, 1, false);
  std::vector<DisagreementRecord> out;
  for (int e = 1; e <= epochs; ++e) {
    // Same batch order for both models: only the initialization differs.
    a.rng = derive_rng(seed, {stream::kSession, static_cast<std::uint64_t>(e)});
    b.rng = a.rng;
    train_epoch(a, train.X, train.y, hp);
    train_epoch(b, train.X, train.y, hp);
    out.push_back({e, disagreement_stats(a, b, test), accuracy(a, test), accuracy(b, test)});
  }
  return out;
}

}  // namespace nkdiff
