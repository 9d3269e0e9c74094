// Copyright 2026 The fbmesh Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <deque>
#include <mutex>
#include <span>
#include <vector>

#include "fbmesh/types.hpp"

namespace fbmesh {

/// Retry, timeout, and hedging budget for one request. The total SLA budget
/// is split between main-model attempts (sla_budget_ms - reserve_ms) and an
/// optional reserve held back for the fallback invocation.
struct RetryPolicy {
  int64_t sla_budget_ms = 300;
  int64_t attempt_timeout_ms = 100;
  int64_t reserve_ms = 0;
  double lambda = 0.01;                  // cost per unit of extra wait
  int64_t hedge_value_threshold = 10000; // minor units; inclusive
  int failure_prob_window = 50;          // recent calls used to estimate p_fail
  int64_t amount_cap = 100000;           // normalizes amounts into [0, 1]

  void validate() const;
};

/// Inputs to the transaction-time retry decision, captured after a failed or
/// timed-out main attempt.
struct RetryContext {
  int attempts_used = 0;
  int64_t elapsed_ms = 0;
  double p_fail_next = 0.0;
  QualityScore q_main;
  QualityScore q_best_fallback;
  int64_t amount = 0;
  int64_t amount_cap = 100000;
};

enum class RetryDecision { RetryMain, GoFallback };

/// How many main attempts fit in the budget:
/// max(1, floor((sla_budget_ms - reserve_ms) / attempt_timeout_ms)). The
/// single attempt that always fits has its timeout clamped to the usable
/// budget when attempt_timeout_ms exceeds it.
int max_attempts(const RetryPolicy& policy);

/// Expected value of retrying the main model once more: quality gained if the
/// retry succeeds, scaled by the transaction's relative value, minus the
/// budgeted time penalty. Retry only pays when this is positive.
double retry_score(const RetryPolicy& policy, const RetryContext& ctx);

/// RetryMain iff another attempt fits the budget (both by count and by
/// remaining time) and retry_score is positive; GoFallback otherwise.
RetryDecision should_retry(const RetryPolicy& policy, const RetryContext& ctx);

/// Hedge (dispatch the best fallback in parallel with the first main attempt)
/// iff the transaction value reaches the threshold and there is a fallback to
/// dispatch. The threshold is inclusive.
bool should_hedge(const RetryPolicy& policy, const Request& request,
                  bool catalog_has_fallback);

/// Fraction of non-Ok outcomes among the most recent min(window, len)
/// results. An empty history returns 0 (optimistic prior).
double estimate_p_fail(std::span<const AttemptResult> recent_results,
                       int window);

/// Sliding window of recent call results shared across concurrent request
/// handlers. Reads and writes are individually atomic; readers may observe a
/// slightly stale window.
class ResultWindow {
 public:
  explicit ResultWindow(int capacity);

  void record(AttemptResult result);
  double estimate() const;
  std::vector<AttemptResult> snapshot() const;
  int capacity() const { return capacity_; }

 private:
  mutable std::mutex mutex_;
  int capacity_;
  std::deque<AttemptResult> results_;
};

}  // namespace fbmesh
