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

#include <cstdint>

namespace nkdiff {

/// Cumulative training-resource usage of one experiment.
struct ResourceLedger {
  /// Learner sessions (epochs) whose teacher was the Oracle.
  std::uint64_t oracle_sessions = 0;
  /// Per-example forward passes performed inside training sessions.
  std::uint64_t forward_ops = 0;
  /// Per-example forward passes spent by non-Oracle teachers producing
  /// pseudolabels (once per teacher per round). Kept apart from forward_ops.
  std::uint64_t teacher_forward_ops = 0;
  int rounds_completed = 0;

  bool operator==(const ResourceLedger&) const = default;
};

}  // namespace nkdiff
