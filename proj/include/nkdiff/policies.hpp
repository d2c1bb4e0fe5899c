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

// Grouping policies: how a coordinator forms teacher/learner groups for one
// round under the capacity bound C.

#include <algorithm>
#include <cctype>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nkdiff/common.hpp"
#include "nkdiff/population.hpp"

namespace nkdiff {

enum class PolicyTag { OO, POM, RGBT, BTB, EQ };

inline std::string_view to_string(PolicyTag tag) {
  switch (tag) {
    case PolicyTag::OO: return "oo";
    case PolicyTag::POM: return "pom";
    case PolicyTag::RGBT: return "rgbt";
    case PolicyTag::BTB: return "btb";
    case PolicyTag::EQ: return "eq";
  }
  return "?";
}

inline std::optional<PolicyTag> parse_policy(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (auto tag : {PolicyTag::OO, PolicyTag::POM, PolicyTag::RGBT, PolicyTag::BTB, PolicyTag::EQ}) {
    if (lower == to_string(tag)) return tag;
  }
  return std::nullopt;
}

/// Policies that rank members by validation accuracy before every round.
inline bool uses_validation(PolicyTag tag) {
  return tag == PolicyTag::RGBT || tag == PolicyTag::BTB || tag == PolicyTag::EQ;
}

struct Group {
  int teacher = 0;
  std::vector<int> learners;

  bool operator==(const Group&) const = default;
};

struct RoundPlan {
  std::vector<Group> groups;
  PolicyTag policy = PolicyTag::OO;

  std::size_t session_count() const {
    std::size_t n = 0;
    for (const auto& g : groups) n += g.learners.size();
    return n;
  }
};

struct PolicyConfig {
  PolicyTag policy = PolicyTag::OO;
  int C = 2;
};

/// Throws ConfigurationError when (policy, N, C) admits no plan.
inline void validate_policy(const PolicyConfig& cfg, int N) {
  if (N < 2) throw ConfigurationError("population needs at least 2 members");
  if (cfg.C < 2) throw ConfigurationError("capacity C must be at least 2");
  if (cfg.C > N) throw ConfigurationError("capacity C cannot exceed population size N");
  switch (cfg.policy) {
    case PolicyTag::POM:
      if (cfg.C != 2) throw ConfigurationError("POM pairs members, so C must be 2");
      if (N % 2 != 0) throw ConfigurationError("POM needs an even population size");
      break;
    case PolicyTag::OO:
      break;
    case PolicyTag::RGBT:
    case PolicyTag::BTB:
    case PolicyTag::EQ:
      if (N % cfg.C != 0) {
        throw ConfigurationError("policy " + std::string(to_string(cfg.policy)) +
                                 " needs N divisible by C (N=" + std::to_string(N) +
                                 ", C=" + std::to_string(cfg.C) + ")");
      }
      break;
  }
}

/// Oracle-Only: C-1 trainees drawn without replacement are taught by the Oracle.
inline RoundPlan group_oo(int N, int C, Rng& rng) {
  validate_policy({PolicyTag::OO, C}, N);
  std::vector<int> trainees(static_cast<std::size_t>(N - 1));
  std::iota(trainees.begin(), trainees.end(), 0);
  std::shuffle(trainees.begin(), trainees.end(), rng);
  trainees.resize(static_cast<std::size_t>(C - 1));
  std::sort(trainees.begin(), trainees.end());
  return {{Group{N - 1, std::move(trainees)}}, PolicyTag::OO};
}

/// Planted Oracle Mechanism: a uniform random perfect matching; every pair
/// {a, b} yields the sessions a->b and b->a. Sessions that would train the
/// Oracle are kept in the plan and skipped at execution.
inline RoundPlan group_pom(int N, Rng& rng) {
  validate_policy({PolicyTag::POM, 2}, N);
  std::vector<int> ids(static_cast<std::size_t>(N));
  std::iota(ids.begin(), ids.end(), 0);
  std::shuffle(ids.begin(), ids.end(), rng);
  RoundPlan plan{{}, PolicyTag::POM};
  for (std::size_t i = 0; i < ids.size(); i += 2) {
    plan.groups.push_back({ids[i], {ids[i + 1]}});
    plan.groups.push_back({ids[i + 1], {ids[i]}});
  }
  return plan;
}

/// Teacher selection of RGBT for a given partition: the best-scored member
/// of each group teaches the others. Among trainees with equal scores the
/// lower id teaches.
inline RoundPlan rgbt_from_partition(const ValidationScores& scores, const std::vector<std::vector<int>>& partition) {
  RoundPlan plan{{}, PolicyTag::RGBT};
  for (auto members : partition) {
    if (members.empty()) throw ContractError("rgbt: empty group");
    std::sort(members.begin(), members.end());
    int teacher = members.front();
    for (int m : members) {
      if (scores.better(m, teacher)) teacher = m;
    }
    std::erase(members, teacher);
    plan.groups.push_back({teacher, std::move(members)});
  }
  return plan;
}

/// Random-Groups Best-Teachers: a uniform random partition into N/C groups
/// of size C, then best-in-group teaches.
inline RoundPlan group_rgbt(const ValidationScores& scores, int C, Rng& rng) {
  const int N = static_cast<int>(scores.v.size());
  validate_policy({PolicyTag::RGBT, C}, N);
  std::vector<int> ids(static_cast<std::size_t>(N));
  std::iota(ids.begin(), ids.end(), 0);
  std::shuffle(ids.begin(), ids.end(), rng);
  std::vector<std::vector<int>> partition;
  for (int g = 0; g < N / C; ++g) partition.emplace_back(ids.begin() + g * C, ids.begin() + (g + 1) * C);
  return rgbt_from_partition(scores, partition);
}

/// Best-Trains-Best: the top k = N/C ranked members teach; the remaining
/// members, best first, are cut into k contiguous buckets of C-1 and bucket j
/// goes to the j-th best teacher.
inline RoundPlan group_btb(const RankedList& ranked, int C) {
  const int N = ranked.size();
  validate_policy({PolicyTag::BTB, C}, N);
  const int k = N / C;
  RoundPlan plan{{}, PolicyTag::BTB};
  int next_student = N - k;  // rank of the best non-teacher
  for (int j = 0; j < k; ++j) {
    Group g{ranked.at_rank(N - j), {}};
    for (int s = 0; s < C - 1; ++s) g.learners.push_back(ranked.at_rank(next_student--));
    plan.groups.push_back(std::move(g));
  }
  return plan;
}

/// Equitable: the top k ranked members teach; the remaining members, best
/// first, are dealt round-robin to the teachers from best to worst.
inline RoundPlan group_eq(const RankedList& ranked, int C) {
  const int N = ranked.size();
  validate_policy({PolicyTag::EQ, C}, N);
  const int k = N / C;
  RoundPlan plan{{}, PolicyTag::EQ};
  for (int j = 0; j < k; ++j) plan.groups.push_back({ranked.at_rank(N - j), {}});
  int turn = 0;
  for (int rank = N - k; rank >= 1; --rank, turn = (turn + 1) % k) {
    plan.groups[static_cast<std::size_t>(turn)].learners.push_back(ranked.at_rank(rank));
  }
  return plan;
}

/// Checks the structural invariants of a plan for a population of N members
/// under capacity C. Throws ContractError on violation.
inline void check_plan(const RoundPlan& plan, int N, int C) {
  auto in_range = [N](int id) { return id >= 0 && id < N; };
  if (plan.policy == PolicyTag::POM) {
    std::vector<int> taught(static_cast<std::size_t>(N), 0), teaching(static_cast<std::size_t>(N), 0);
    for (const auto& g : plan.groups) {
      if (!in_range(g.teacher) || g.learners.size() != 1 || !in_range(g.learners[0]) ||
          g.learners[0] == g.teacher) {
        throw ContractError("POM plan: malformed pair session");
      }
      ++teaching[static_cast<std::size_t>(g.teacher)];
      ++taught[static_cast<std::size_t>(g.learners[0])];
    }
    for (int i = 0; i < N; ++i) {
      if (teaching[static_cast<std::size_t>(i)] != 1 || taught[static_cast<std::size_t>(i)] != 1) {
        throw ContractError("POM plan: every member must teach once and learn once");
      }
    }
    return;
  }
  std::vector<bool> seen(static_cast<std::size_t>(N), false);
  auto claim = [&](int id) {
    if (!in_range(id)) throw ContractError("plan references an unknown member");
    if (seen[static_cast<std::size_t>(id)]) throw ContractError("plan uses a member twice");
    seen[static_cast<std::size_t>(id)] = true;
  };
  for (const auto& g : plan.groups) {
    if (static_cast<int>(g.learners.size()) > C - 1) {
      throw ContractError("plan exceeds the teaching capacity C-1");
    }
    claim(g.teacher);
    for (int l : g.learners) claim(l);
  }
}

}  // namespace nkdiff
