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

#include "fbmesh/router.hpp"

#include <algorithm>
#include <cmath>

namespace fbmesh {

SteadyClock::SteadyClock()
    : epoch_anchor_ms_(std::chrono::duration_cast<std::chrono::milliseconds>(
                           std::chrono::system_clock::now().time_since_epoch())
                           .count()),
      start_(std::chrono::steady_clock::now()) {}

int64_t SteadyClock::now_ms() const {
  const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
      std::chrono::steady_clock::now() - start_);
  return epoch_anchor_ms_ + elapsed.count();
}

double ClientSideModel::score(const Request& request) const {
  // Amount saturates around 1e9 minor units; hour is scaled into [0, 1].
  const double amount_signal =
      std::log1p(static_cast<double>(std::max<int64_t>(0, request.amount))) /
      std::log1p(1e9);
  const int hour =
      static_cast<int>((request.arrival_time_ms / 3600000) % 24 + 24) % 24;
  const double hour_signal = static_cast<double>(hour) / 23.0;
  const double z = weights_.bias + weights_.w_amount * amount_signal +
                   weights_.w_hour * hour_signal;
  return 1.0 / (1.0 + std::exp(-z));
}

GroupSet usable_groups(const Request& request, const Universe& universe,
                       const HealthSnapshot& snapshot,
                       const PayloadSchema* schema) {
  GroupSet usable = snapshot.healthy_groups();
  if (schema == nullptr) return usable;
  for (int i = 0; i < universe.size(); ++i) {
    if (!usable.contains(i)) continue;
    const std::string& id = universe.id(i);
    if (!schema->covers(id)) continue;
    auto payload = request.payloads.find(id);
    if (payload == request.payloads.end()) {
      // Schema-covered data that simply never arrived: absent, not corrupt,
      // but equally unusable for this request.
      usable = usable.without(i);
    } else if (validate_payload(*schema, id, payload->second) !=
               GroupStatus::Healthy) {
      usable = usable.without(i);
    }
  }
  return usable;
}

namespace {

// Best eligible variant under `usable`, restricted by a tier filter and the
// snapshot's open circuits. Same preference order as best_variant_for.
template <typename TierFilter>
const ModelVariant* best_eligible(const VariantCatalog& catalog,
                                  const GroupSet& usable,
                                  const HealthSnapshot& snapshot,
                                  TierFilter&& want_tier) {
  const ModelVariant* best = nullptr;
  for (const ModelVariant& v : catalog.variants()) {
    if (!want_tier(v.tier)) continue;
    if (!v.required_groups.subset_of(usable)) continue;
    if (v.tier != Tier::ClientSide && snapshot.is_open(v.variant_id)) continue;
    if (best == nullptr || v.quality.value() > best->quality.value() ||
        (v.quality.value() == best->quality.value() &&
         (v.required_groups.count() > best->required_groups.count() ||
          (v.required_groups.count() == best->required_groups.count() &&
           v.variant_id < best->variant_id)))) {
      best = &v;
    }
  }
  return best;
}

void record_result(RouterEnv& env, const std::string& variant_id,
                   AttemptResult result, int64_t now_ms) {
  if (env.health != nullptr) {
    env.health->record_call(variant_id, result, now_ms);
  }
}

}  // namespace

RoutingOutcome route(const Request& request, const VariantCatalog& catalog,
                     const HealthSnapshot& snapshot, const RetryPolicy& policy,
                     RouterEnv& env) {
  policy.validate();
  const int64_t t0 = env.clock.now_ms();
  const int64_t main_deadline = t0 + policy.sla_budget_ms - policy.reserve_ms;
  const int64_t total_deadline = t0 + policy.sla_budget_ms;

  RoutingOutcome outcome;
  outcome.request_id = request.request_id;

  const GroupSet usable =
      usable_groups(request, catalog.universe(), snapshot, env.schema);

  // Both fallback selections are fixed at entry: the snapshot does not change
  // mid-request.
  const ModelVariant* hedge_candidate = best_eligible(
      catalog, usable, snapshot,
      [](Tier t) { return t == Tier::GroupFallback; });
  const ModelVariant* fallback_choice = best_eligible(
      catalog, usable, snapshot,
      [](Tier t) { return t != Tier::Main; });

  std::unique_ptr<PendingScore> hedge;
  if (env.fallback_enabled &&
      should_hedge(policy, request, hedge_candidate != nullptr)) {
    hedge = env.backend.dispatch(hedge_candidate->variant_id, request,
                                 policy.sla_budget_ms);
    outcome.hedged = true;
  }

  const ModelVariant& main = catalog.main();
  const bool main_eligible =
      main.required_groups.subset_of(usable) &&
      !snapshot.is_open(main.variant_id);

  // The failure estimate is taken once at entry; this request's own timeouts
  // inform future requests through the shared window, not this decision.
  const double p_fail_entry =
      env.main_window != nullptr ? env.main_window->estimate() : 0.0;
  const QualityScore q_alternative = fallback_choice != nullptr
                                         ? fallback_choice->quality
                                         : catalog.client_side().quality;

  std::optional<double> main_score;
  if (main_eligible) {
    int attempts_used = 0;
    while (true) {
      const int64_t start = env.clock.now_ms();
      const int64_t effective_timeout =
          std::min<int64_t>(policy.attempt_timeout_ms, main_deadline - start);
      if (effective_timeout <= 0) break;
      const Backend::Reply reply =
          env.backend.invoke(main.variant_id, request, effective_timeout);
      const int64_t end = env.clock.now_ms();
      outcome.attempts.push_back({main.variant_id, start, end, reply.result});
      ++attempts_used;
      if (env.main_window != nullptr) env.main_window->record(reply.result);
      record_result(env, main.variant_id, reply.result, end);
      if (reply.result == AttemptResult::Ok) {
        main_score = reply.score;
        break;
      }
      RetryContext ctx;
      ctx.attempts_used = attempts_used;
      ctx.elapsed_ms = end - t0;
      ctx.p_fail_next = p_fail_entry;
      ctx.q_main = main.quality;
      ctx.q_best_fallback = q_alternative;
      ctx.amount = request.amount;
      ctx.amount_cap = policy.amount_cap;
      if (should_retry(policy, ctx) != RetryDecision::RetryMain) break;
    }
  }

  if (main_score.has_value()) {
    // Main wins over any hedge result: within the SLA, quality dominates.
    // An unconsumed hedge is simply abandoned.
    outcome.score = main_score;
    outcome.variant_id = main.variant_id;
    outcome.tier = Tier::Main;
    outcome.total_elapsed_ms = env.clock.now_ms() - t0;
    return outcome;
  }

  if (!env.fallback_enabled) {
    outcome.total_elapsed_ms = env.clock.now_ms() - t0;
    return outcome;
  }

  if (fallback_choice != nullptr &&
      fallback_choice->tier == Tier::GroupFallback) {
    Backend::Reply reply{AttemptResult::Timeout, 0.0};
    bool attempted = false;
    if (hedge != nullptr && hedge->variant_id() == fallback_choice->variant_id) {
      const PendingScore::Resolved resolved = hedge->await_until(total_deadline);
      outcome.attempts.push_back({fallback_choice->variant_id,
                                  resolved.start_ms, resolved.end_ms,
                                  resolved.result});
      record_result(env, fallback_choice->variant_id, resolved.result,
                    resolved.end_ms);
      reply = {resolved.result, resolved.score};
      attempted = true;
      hedge.reset();
    } else {
      const int64_t start = env.clock.now_ms();
      const int64_t remaining = total_deadline - start;
      if (remaining > 0) {
        reply = env.backend.invoke(fallback_choice->variant_id, request,
                                   remaining);
        const int64_t end = env.clock.now_ms();
        outcome.attempts.push_back(
            {fallback_choice->variant_id, start, end, reply.result});
        record_result(env, fallback_choice->variant_id, reply.result, end);
        attempted = true;
      }
    }
    if (attempted && reply.result == AttemptResult::Ok) {
      outcome.score = reply.score;
      outcome.variant_id = fallback_choice->variant_id;
      outcome.tier = Tier::GroupFallback;
      outcome.total_elapsed_ms = env.clock.now_ms() - t0;
      return outcome;
    }
  }

  // Terminal tier: the embedded model needs no groups, no backend, and no
  // budget, so a score is always produced.
  const ModelVariant& client = catalog.client_side();
  const int64_t now = env.clock.now_ms();
  outcome.attempts.push_back(
      {client.variant_id, now, now, AttemptResult::Ok});
  outcome.score = env.client_model.score(request);
  outcome.variant_id = client.variant_id;
  outcome.tier = Tier::ClientSide;
  outcome.total_elapsed_ms = now - t0;
  return outcome;
}

}  // namespace fbmesh
