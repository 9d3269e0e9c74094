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

#include "fbmesh/policy.hpp"

#include <algorithm>
#include <stdexcept>

namespace fbmesh {

void RetryPolicy::validate() const {
  if (sla_budget_ms <= 0) {
    throw std::invalid_argument("policy.sla_budget_ms must be > 0");
  }
  if (attempt_timeout_ms <= 0) {
    throw std::invalid_argument("policy.attempt_timeout_ms must be > 0");
  }
  if (reserve_ms < 0 || reserve_ms >= sla_budget_ms) {
    throw std::invalid_argument(
        "policy.reserve_ms must be in [0, sla_budget_ms)");
  }
  if (lambda < 0.0) {
    throw std::invalid_argument("policy.lambda must be >= 0");
  }
  if (hedge_value_threshold < 0) {
    throw std::invalid_argument("policy.hedge_value_threshold must be >= 0");
  }
  if (failure_prob_window < 1) {
    throw std::invalid_argument("policy.failure_prob_window must be >= 1");
  }
  if (amount_cap <= 0) {
    throw std::invalid_argument("policy.amount_cap must be > 0");
  }
}

int max_attempts(const RetryPolicy& policy) {
  const int64_t usable = policy.sla_budget_ms - policy.reserve_ms;
  const int64_t n = usable / policy.attempt_timeout_ms;
  return static_cast<int>(std::max<int64_t>(1, n));
}

double retry_score(const RetryPolicy& policy, const RetryContext& ctx) {
  const double value_factor =
      std::min(1.0, static_cast<double>(ctx.amount) /
                        static_cast<double>(ctx.amount_cap));
  const double expected_gain =
      (1.0 - ctx.p_fail_next) *
      (ctx.q_main.value() - ctx.q_best_fallback.value()) * value_factor;
  const double time_penalty =
      policy.lambda * (static_cast<double>(policy.attempt_timeout_ms) /
                       static_cast<double>(policy.sla_budget_ms));
  return expected_gain - time_penalty;
}

RetryDecision should_retry(const RetryPolicy& policy, const RetryContext& ctx) {
  if (ctx.attempts_used >= max_attempts(policy)) {
    return RetryDecision::GoFallback;
  }
  const int64_t remaining =
      policy.sla_budget_ms - policy.reserve_ms - ctx.elapsed_ms;
  if (remaining < policy.attempt_timeout_ms) {
    return RetryDecision::GoFallback;
  }
  return retry_score(policy, ctx) > 0.0 ? RetryDecision::RetryMain
                                        : RetryDecision::GoFallback;
}

bool should_hedge(const RetryPolicy& policy, const Request& request,
                  bool catalog_has_fallback) {
  return catalog_has_fallback && request.amount >= policy.hedge_value_threshold;
}

double estimate_p_fail(std::span<const AttemptResult> recent_results,
                       int window) {
  if (window < 1) {
    throw std::invalid_argument("window must be >= 1");
  }
  if (recent_results.empty()) return 0.0;
  const size_t n =
      std::min(recent_results.size(), static_cast<size_t>(window));
  size_t failures = 0;
  for (size_t i = recent_results.size() - n; i < recent_results.size(); ++i) {
    if (recent_results[i] != AttemptResult::Ok) ++failures;
  }
  return static_cast<double>(failures) / static_cast<double>(n);
}

ResultWindow::ResultWindow(int capacity) : capacity_(capacity) {
  if (capacity < 1) {
    throw std::invalid_argument("result window capacity must be >= 1");
  }
}

void ResultWindow::record(AttemptResult result) {
  std::lock_guard<std::mutex> lock(mutex_);
  results_.push_back(result);
  while (results_.size() > static_cast<size_t>(capacity_)) {
    results_.pop_front();
  }
}

double ResultWindow::estimate() const {
  std::lock_guard<std::mutex> lock(mutex_);
  std::vector<AttemptResult> copy(results_.begin(), results_.end());
  return estimate_p_fail(copy, capacity_);
}

std::vector<AttemptResult> ResultWindow::snapshot() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return std::vector<AttemptResult>(results_.begin(), results_.end());
}

}  // namespace fbmesh
