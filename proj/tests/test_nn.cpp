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

#include <numeric>
#include <random>

#include "support.hpp"

namespace nkdiff {
namespace {

ModelSpec small_spec(std::uint64_t seed = 7) { return {{4, 5, 3}, Activation::relu, seed}; }

Dataset two_blobs(std::uint64_t seed) {
  // Well separated: centers at distance ~10, unit noise.
  return gen_blobs(50, 2, 3, 5.0, 0.5, seed);
}

TEST(ModelSpec, ParamCountFollowsLayerShapes) {
  EXPECT_EQ(param_count({{2, 3}}), 9u);
  EXPECT_EQ(param_count({{10, 16, 3}}), 10u * 16 + 16 + 16 * 3 + 3);
}

TEST(ModelSpec, RejectsInvalidWidths) {
  EXPECT_THROW(init_learner({{4}}, 0, false), SpecificationError);
  EXPECT_THROW(init_learner({{4, 0, 3}}, 0, false), SpecificationError);
  EXPECT_THROW(init_learner({{4, 1}}, 0, false), SpecificationError);
}

TEST(InitLearner, SameSpecAndIdGiveIdenticalParameters) {
  EXPECT_EQ(init_learner(small_spec(), 3, false).params, init_learner(small_spec(), 3, false).params);
}

TEST(InitLearner, DifferentIdsGiveDifferentParameters) {
  EXPECT_NE(init_learner(small_spec(), 0, false).params, init_learner(small_spec(), 1, false).params);
}

TEST(InitLearner, WeightsWithinGlorotRangeAndZeroBiases) {
  const auto l = init_learner(ModelSpec{{10, 16, 3}}, 0, false);
  const double s1 = std::sqrt(6.0 / 26.0), s2 = std::sqrt(6.0 / 19.0);
  for (std::size_t i = 0; i < 160; ++i) EXPECT_LE(std::abs(l.params[i]), s1);
  for (std::size_t i = 160; i < 176; ++i) EXPECT_EQ(l.params[i], 0.0);
  for (std::size_t i = 176; i < 224; ++i) EXPECT_LE(std::abs(l.params[i]), s2);
  for (std::size_t i = 224; i < 227; ++i) EXPECT_EQ(l.params[i], 0.0);
}

TEST(Forward, ProbabilitiesSumToOne) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 3.0);
  for (int t = 0; t < 50; ++t) {
    const auto l = init_learner(small_spec(rng()), t, false);
    std::vector<double> x(4);
    for (auto& v : x) v = n(rng);
    const auto p = forward(l, x);
    EXPECT_NEAR(std::accumulate(p.probs.begin(), p.probs.end(), 0.0), 1.0, 1e-9);
    for (double v : p.probs) EXPECT_GE(v, kProbFloor * 0.5);
  }
}

TEST(Forward, ZeroParametersGiveUniformDistribution) {
  auto l = init_learner(small_spec(), 0, false);
  std::fill(l.params.begin(), l.params.end(), 0.0);
  const auto p = forward(l, std::vector<double>{1.0, -2.0, 3.0, 0.5});
  for (double v : p.probs) EXPECT_DOUBLE_EQ(v, 1.0 / 3.0);
}

TEST(Forward, ExtremeLogitsStayAboveTheFloor) {
  auto l = init_learner(ModelSpec{{1, 3}}, 0, false);
  l.params = {1000.0, -1000.0, 0.0, 0.0, 0.0, 0.0};
  const auto p = forward(l, std::vector<double>{1.0});
  for (double v : p.probs) EXPECT_GT(v, 0.0);
  EXPECT_EQ(p.argmax(), 0);
}

TEST(Forward, MatchesIndependentReimplementation) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int t = 0; t < 100; ++t) {
    auto c = testing::random_gradient_case(rng);
    const auto got = forward(c.learner, c.x).probs;
    const auto want = testing::reference_forward(c.learner.spec.layer_widths, c.learner.params, c.x);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t j = 0; j < got.size(); ++j) EXPECT_NEAR(got[j], want[j], 1e-12);
  }
}

TEST(Forward, DimensionMismatchIsRejected) {
  const auto l = init_learner(small_spec(), 0, false);
  EXPECT_THROW(forward(l, std::vector<double>{1.0, 2.0}), SpecificationError);
}

TEST(Pseudolabels, ZeroParameterTeacherLabelsEverythingClassZero) {
  auto l = init_learner(small_spec(), 0, false);
  std::fill(l.params.begin(), l.params.end(), 0.0);
  const auto ds = gen_blobs(10, 3, 4, 1.0, 1.0, 5);
  for (int y : pseudolabels(l, ds.X)) EXPECT_EQ(y, 0);
}

TEST(Pseudolabels, LabelsAreInRangeAndMatchForwardArgmax) {
  const auto l = init_learner(small_spec(), 2, false);
  const auto ds = gen_blobs(20, 3, 4, 2.0, 1.0, 6);
  const auto labels = pseudolabels(l, ds.X);
  for (std::size_t r = 0; r < ds.size(); ++r) {
    EXPECT_GE(labels[r], 0);
    EXPECT_LT(labels[r], 3);
    EXPECT_EQ(labels[r], forward(l, ds.X.row(r)).argmax());
  }
}

TEST(Pseudolabels, OracleIsNotAClassifier) {
  const auto oracle = init_learner(small_spec(), 9, true);
  const auto ds = gen_blobs(5, 3, 4, 1.0, 1.0, 1);
  EXPECT_THROW(pseudolabels(oracle, ds.X), ContractError);
}

TEST(LossGradient, MatchesCentralDifferences) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 100; ++t) {
    const auto c = testing::random_gradient_case(rng);
    const auto check = testing::finite_difference_check(c.learner, c.x, c.label);
    EXPECT_LT(check.max_rel_error, 1e-4) << "case " << t;
    EXPECT_GT(check.params_checked, 0u);
  }
}

TEST(TrainEpoch, ZeroLearningRateLeavesParametersUnchanged) {
  auto l = init_learner(ModelSpec{{3, 4, 2}, Activation::relu, 11}, 0, false);
  const auto before = l.params;
  const auto ds = two_blobs(1);
  const auto stats = train_epoch(l, ds.X, ds.y, {0.0, 10, true});
  EXPECT_EQ(l.params, before);
  EXPECT_GT(stats.mean_loss, 0.0);
  EXPECT_EQ(stats.forward_ops, ds.size());
}

TEST(TrainEpoch, OneEpochReducesLossOnSeparableData) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto l = init_learner(ModelSpec{{3, 4, 2}, Activation::relu, seed}, 0, false);
    const auto ds = two_blobs(seed);
    const double before = mean_loss(l, ds.X, ds.y);
    train_epoch(l, ds.X, ds.y, {0.1, 10, true});
    EXPECT_LT(mean_loss(l, ds.X, ds.y), before) << "seed " << seed;
  }
}

TEST(TrainEpoch, SameStateAndRngGiveIdenticalParameters) {
  const auto ds = two_blobs(2);
  auto a = init_learner(ModelSpec{{3, 4, 2}, Activation::relu, 4}, 0, false);
  auto b = a;
  train_epoch(a, ds.X, ds.y, {0.1, 7, true});
  train_epoch(b, ds.X, ds.y, {0.1, 7, true});
  EXPECT_EQ(a.params, b.params);
}

TEST(TrainEpoch, FullBatchWithoutShuffleIsOneGradientStep) {
  const auto ds = two_blobs(3);
  auto l = init_learner(ModelSpec{{3, 4, 2}, Activation::relu, 5}, 0, false);
  std::vector<double> total(l.params.size(), 0.0), g;
  for (std::size_t r = 0; r < ds.size(); ++r) {
    loss_gradient(l, ds.X.row(r), ds.y[r], g);
    for (std::size_t i = 0; i < g.size(); ++i) total[i] += g[i];
  }
  auto expected = l.params;
  for (std::size_t i = 0; i < expected.size(); ++i) expected[i] -= 0.2 * total[i] / static_cast<double>(ds.size());
  train_epoch(l, ds.X, ds.y, {0.2, static_cast<int>(ds.size()), false});
  for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_NEAR(l.params[i], expected[i], 1e-12);
}

TEST(TrainEpoch, RejectsOracleAndBadArguments) {
  const auto ds = two_blobs(4);
  auto oracle = init_learner(ModelSpec{{3, 4, 2}}, 1, true);
  EXPECT_THROW(train_epoch(oracle, ds.X, ds.y, {}), ContractError);
  auto l = init_learner(ModelSpec{{3, 4, 2}}, 0, false);
  EXPECT_THROW(train_epoch(l, ds.X, ds.y, {-0.1, 10, true}), SpecificationError);
  EXPECT_THROW(train_epoch(l, ds.X, ds.y, {0.1, 0, true}), SpecificationError);
  EXPECT_THROW(train_epoch(l, ds.X, ds.y, {0.1, 1000, true}), SpecificationError);
  Labels bad = ds.y;
  bad[0] = 5;
  EXPECT_THROW(train_epoch(l, ds.X, bad, {}), SpecificationError);
  Labels short_labels(ds.y.begin(), ds.y.end() - 1);
  EXPECT_THROW(train_epoch(l, ds.X, short_labels, {}), SpecificationError);
}

}  // namespace
}  // namespace nkdiff
