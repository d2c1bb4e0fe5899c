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

#include <gtest/gtest.h>

#include "support.hpp"

namespace nkdiff {
namespace {

ClassDistribution dist(std::vector<double> p) { return {std::move(p)}; }

Learner constant_classifier(int cls, int K, int d, int id = 0) {
  auto l = init_learner(ModelSpec{{d, K}}, id, false);
  std::fill(l.params.begin(), l.params.end(), 0.0);
  l.params[static_cast<std::size_t>(d * K + cls)] = 5.0;
  return l;
}

TEST(Accuracy, Examples) {
  const std::vector<int> labels{0, 1, 2, 1};
  EXPECT_DOUBLE_EQ(accuracy(labels, labels), 1.0);
  EXPECT_DOUBLE_EQ(accuracy(std::vector<int>{0, 0, 0, 0}, labels), 0.25);
  EXPECT_THROW(accuracy(std::vector<int>{}, std::vector<int>{}), SpecificationError);
}

TEST(Accuracy, ZeroParameterModelOnBalancedSetIsOneOverK) {
  const auto ds = gen_blobs(30, 4, 3, 1.0, 1.0, 1);
  auto l = init_learner(ModelSpec{{3, 5, 4}}, 0, false);
  std::fill(l.params.begin(), l.params.end(), 0.0);
  EXPECT_DOUBLE_EQ(accuracy(l, ds), 0.25);
}

TEST(AverageLearnerAccuracy, MeanOverTrainees) {
  Dataset ds;
  ds.X = Matrix(5, 2, 0.0);
  ds.y = {0, 1, 1, 1, 1};
  ds.K = 2;
  Population pop;
  pop.learners = {constant_classifier(0, 2, 2, 0), constant_classifier(1, 2, 2, 1), constant_classifier(1, 2, 2, 2)};
  pop.learners[2].is_oracle = true;
  pop.oracle_id = 2;
  EXPECT_DOUBLE_EQ(average_learner_accuracy(pop, ds), 0.5);  // 0.2 and 0.8
  pop.learners[0] = constant_classifier(1, 2, 2, 0);
  EXPECT_DOUBLE_EQ(average_learner_accuracy(pop, ds), accuracy(pop.learners[0], ds));
}

TEST(EnsembleClassify, Examples) {
  EXPECT_EQ(ensemble_classify(std::vector{dist({0.1, 0.7, 0.2})}), 1);
  EXPECT_EQ(ensemble_classify(std::vector{dist({0.5, 0.5}), dist({0.9, 0.1})}), 0);
  EXPECT_EQ(ensemble_classify(std::vector{dist({1.0 / 3, 1.0 / 3, 1.0 / 3}), dist({1.0 / 3, 1.0 / 3, 1.0 / 3})}), 0);
  // A confident minority can outvote: log-probabilities, not majority.
  EXPECT_EQ(ensemble_classify(std::vector{dist({0.6, 0.4}), dist({0.6, 0.4}), dist({0.01, 0.99})}), 1);
  EXPECT_EQ(ensemble_classify(std::vector{dist({0.0, 1.0}), dist({1.0, 0.0})}), 0);
}

TEST(EnsembleClassify, PermutationInvariant) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  for (int t = 0; t < 200; ++t) {
    std::vector<ClassDistribution> members;
    for (int m = 0; m < 5; ++m) {
      std::vector<double> p(4);
      double s = 0.0;
      for (auto& v : p) s += (v = u(rng));
      for (auto& v : p) v /= s;
      members.push_back(dist(p));
    }
    const int before = ensemble_classify(members);
    std::shuffle(members.begin(), members.end(), rng);
    EXPECT_EQ(ensemble_classify(members), before);
  }
}

TEST(EvaluateEnsemble, AgreesWithPerExampleVote) {
  const auto data = split_dataset(gen_blobs(40, 3, 4, 1.0, 1.0, 2), 0.6, 0.2, 3);
  auto pop = make_population(ModelSpec{{4, 5, 3}, Activation::relu, 4}, 6, data.train.y);
  for (int i = 0; i < 5; ++i) {
    for (int e = 0; e <= i; ++e) train_epoch(pop.learners[static_cast<std::size_t>(i)], data.train.X, data.train.y, {0.05, 8, true});
  }
  const auto ens = trainee_ensemble(pop);
  ASSERT_EQ(ens.members.size(), 5u);
  const auto eval = evaluate_ensemble(ens, data.test.X, data.test.y, 2);
  EXPECT_DOUBLE_EQ(eval.ensemble_accuracy(), accuracy(ens, data.test));
  EXPECT_DOUBLE_EQ(eval.average_accuracy(), average_learner_accuracy(pop, data.test));
  Ensemble single{{ens.members[2]}};
  EXPECT_DOUBLE_EQ(accuracy(single, data.test), accuracy(*ens.members[2], data.test));
}

TEST(DisagreementStats, Examples) {
  Dataset ds;
  ds.X = Matrix(4, 2, 0.0);
  ds.y = {0, 0, 0, 0};
  ds.K = 2;
  const auto right = constant_classifier(0, 2, 2);
  const auto wrong = constant_classifier(1, 2, 2);
  auto s = disagreement_stats(right, wrong, ds);
  EXPECT_EQ(s.both_correct, 0u);
  EXPECT_EQ(s.at_least_one_correct, 4u);
  s = disagreement_stats(right, right, ds);
  EXPECT_EQ(s.both_correct, s.at_least_one_correct);
}

TEST(AggregateSeeds, MeanAndHalfWidth) {
  const auto s = aggregate_seeds(std::vector<std::vector<double>>{{0.4, 1.0}, {0.6, 1.0}});
  EXPECT_DOUBLE_EQ(s.mean[0], 0.5);
  EXPECT_NEAR(s.ci95[0], 1.96 * std::sqrt(0.02) / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(s.ci95[0], 0.196, 1e-3);
  EXPECT_DOUBLE_EQ(s.ci95[1], 0.0);
}

TEST(AggregateSeeds, RejectsUnequalLengthsAndSingleRuns) {
  EXPECT_THROW(aggregate_seeds(std::vector<std::vector<double>>{{0.1}, {0.1, 0.2}}), ContractError);
  EXPECT_THROW(aggregate_seeds(std::vector<std::vector<double>>{{0.1}}), ContractError);
}

TEST(AggregateSeeds, RecordSeriesCarryAllColumns) {
  std::vector<std::vector<MetricsRecord>> runs(3, std::vector<MetricsRecord>(2));
  for (int s = 0; s < 3; ++s) {
    for (int t = 0; t < 2; ++t) {
      auto& r = runs[static_cast<std::size_t>(s)][static_cast<std::size_t>(t)];
      r.round = t + 1;
      r.alacc_test = 0.1 * s;
      r.oracle_sessions = static_cast<std::uint64_t>(t + 1);
    }
  }
  const auto agg = aggregate_seeds(runs);
  EXPECT_EQ(agg.rounds, (std::vector<int>{1, 2}));
  EXPECT_NEAR(agg.get("alacc_test").mean[0], 0.1, 1e-15);
  EXPECT_DOUBLE_EQ(agg.get("oracle_sessions").mean[1], 2.0);
  EXPECT_DOUBLE_EQ(agg.get("oracle_sessions").ci95[1], 0.0);
  EXPECT_THROW(agg.get("nope"), ContractError);
}

}  // namespace
}  // namespace nkdiff
