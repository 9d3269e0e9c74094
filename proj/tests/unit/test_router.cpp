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

#include <doctest.h>

#include <map>
#include <memory>

#include "fbmesh/router.hpp"
#include "fbmesh/sim.hpp"

using namespace fbmesh;

namespace {

// main .62 > fb_A_B .58 > fb_A_C .57 > fb_B_C .56 > fb_A .40 > fb_B .39 >
// fb_C .35 > client .26
std::shared_ptr<VariantCatalog> test_catalog() {
  const Universe u = parse_universe("A,B,C");
  QualityMap q;
  q[parse_group_set("A,B,C", u).mask()] = 0.62;
  q[parse_group_set("A,B", u).mask()] = 0.58;
  q[parse_group_set("A,C", u).mask()] = 0.57;
  q[parse_group_set("B,C", u).mask()] = 0.56;
  q[parse_group_set("A", u).mask()] = 0.40;
  q[parse_group_set("B", u).mask()] = 0.39;
  q[parse_group_set("C", u).mask()] = 0.35;
  q[parse_group_set("", u).mask()] = 0.26;
  return std::make_shared<VariantCatalog>(enumerate_catalog(u, q));
}

RetryPolicy test_policy() {
  RetryPolicy p;
  p.sla_budget_ms = 300;
  p.attempt_timeout_ms = 100;
  p.reserve_ms = 0;
  p.lambda = 0.01;
  p.hedge_value_threshold = 1000000;  // hedging only when a test opts in
  p.amount_cap = 100000;
  return p;
}

Request test_request(int64_t amount = 100000) {
  Request r;
  r.request_id = "req-1";
  r.amount = amount;
  r.arrival_time_ms = 0;
  return r;
}

HealthSnapshot healthy_snapshot(int n = 3) {
  HealthSnapshot snap;
  snap.statuses.assign(static_cast<size_t>(n), GroupStatus::Healthy);
  return snap;
}

struct Fixture {
  std::shared_ptr<VariantCatalog> catalog = test_catalog();
  SimClock clock;
  std::map<std::string, LatencyModel> latencies;
  LatencyModel default_latency = LatencyModel::constant(40.0);
  std::unique_ptr<SimBackend> backend;
  ClientSideModel client_model;

  void init(std::vector<OutageWindow> outages = {}) {
    backend = std::make_unique<SimBackend>(clock, 7, latencies,
                                           default_latency, std::move(outages));
    backend->begin_request(0);
  }

  RouterEnv env(bool fallback_enabled = true) {
    return RouterEnv{*backend, clock,   client_model, nullptr,
                     nullptr,  nullptr, fallback_enabled};
  }
};

int64_t main_attempt_span(const RoutingOutcome& outcome,
                          const std::string& main_id) {
  int64_t span = 0;
  for (const Attempt& a : outcome.attempts) {
    if (a.variant_id == main_id) span += a.end_ms - a.start_ms;
  }
  return span;
}

}  // namespace

TEST_CASE("happy path: main answers within one attempt") {
  Fixture f;
  f.latencies["main"] = LatencyModel::constant(40.0);
  f.init();
  RouterEnv env = f.env();
  const RoutingOutcome out =
      route(test_request(), *f.catalog, healthy_snapshot(), test_policy(), env);
  CHECK(out.tier == Tier::Main);
  CHECK(out.variant_id == "main");
  REQUIRE(out.attempts.size() == 1);
  CHECK(out.attempts[0].result == AttemptResult::Ok);
  CHECK(out.total_elapsed_ms == 40);
  CHECK(out.score.has_value());
  CHECK_FALSE(out.hedged);
}

TEST_CASE("main exhausts exactly the budgeted attempts") {
  Fixture f;
  f.latencies["main"] = LatencyModel::constant(1000.0);  // always times out
  f.init();
  RouterEnv env = f.env();
  const RoutingOutcome out =
      route(test_request(), *f.catalog, healthy_snapshot(), test_policy(), env);

  int main_attempts = 0;
  for (const Attempt& a : out.attempts) {
    if (a.variant_id == "main") {
      ++main_attempts;
      CHECK(a.result == AttemptResult::Timeout);
    }
  }
  CHECK(main_attempts == 3);
  CHECK(main_attempt_span(out, "main") <= 300);
  CHECK(out.attempts[0].start_ms == 0);
  CHECK(out.attempts[2].end_ms == 300);

  // No budget is left for a remote fallback; the embedded model answers at
  // zero additional cost, exactly on the SLA boundary.
  CHECK(out.tier == Tier::ClientSide);
  CHECK(out.total_elapsed_ms == 300);
  CHECK(out.score.has_value());
}

TEST_CASE("reserve keeps room for the fallback call") {
  Fixture f;
  f.latencies["main"] = LatencyModel::constant(1000.0);
  f.latencies["fb_A_B"] = LatencyModel::constant(30.0);
  f.init();
  RetryPolicy policy = test_policy();
  policy.reserve_ms = 60;  // max_attempts = floor(240/100) = 2
  RouterEnv env = f.env();
  const RoutingOutcome out =
      route(test_request(), *f.catalog, healthy_snapshot(), policy, env);

  CHECK(out.tier == Tier::GroupFallback);
  CHECK(out.variant_id == "fb_A_B");  // best fallback under full health
  REQUIRE(out.attempts.size() == 3);  // 2 main timeouts + 1 fallback ok
  CHECK(out.attempts[0].variant_id == "main");
  CHECK(out.attempts[1].variant_id == "main");
  CHECK(out.attempts[1].end_ms == 200);
  CHECK(out.attempts[2].variant_id == "fb_A_B");
  CHECK(out.total_elapsed_ms == 230);
}

TEST_CASE("low-value requests stop retrying immediately") {
  Fixture f;
  f.latencies["main"] = LatencyModel::constant(1000.0);
  f.latencies["fb_A_B"] = LatencyModel::constant(30.0);
  f.init();
  RouterEnv env = f.env();
  // amount 0 makes the expected retry gain zero; the time penalty wins.
  const RoutingOutcome out =
      route(test_request(0), *f.catalog, healthy_snapshot(), test_policy(), env);
  int main_attempts = 0;
  for (const Attempt& a : out.attempts) {
    if (a.variant_id == "main") ++main_attempts;
  }
  CHECK(main_attempts == 1);
  CHECK(out.tier == Tier::GroupFallback);
  CHECK(out.total_elapsed_ms == 130);
}

TEST_CASE("unavailable group bypasses main entirely") {
  Fixture f;
  f.latencies["fb_A_C"] = LatencyModel::constant(25.0);
  f.init();
  HealthSnapshot snap = healthy_snapshot();
  snap.statuses[1] = GroupStatus::Unavailable;  // B down
  RouterEnv env = f.env();
  const RoutingOutcome out =
      route(test_request(), *f.catalog, snap, test_policy(), env);

  for (const Attempt& a : out.attempts) CHECK(a.variant_id != "main");
  CHECK(out.tier == Tier::GroupFallback);
  CHECK(out.variant_id == "fb_A_C");  // best B-free variant by quality
  CHECK(out.total_elapsed_ms == 25);
}

TEST_CASE("open main breaker routes straight to fallback") {
  Fixture f;
  f.init();
  HealthSnapshot snap = healthy_snapshot();
  snap.backend_open["main"] = true;
  RouterEnv env = f.env();
  const RoutingOutcome out =
      route(test_request(), *f.catalog, snap, test_policy(), env);
  for (const Attempt& a : out.attempts) CHECK(a.variant_id != "main");
  CHECK(out.tier == Tier::GroupFallback);
  CHECK(out.variant_id == "fb_A_B");
}

TEST_CASE("open fallback breakers narrow the selection") {
  Fixture f;
  f.init();
  HealthSnapshot snap = healthy_snapshot();
  snap.statuses[1] = GroupStatus::Unavailable;  // B down: main ineligible
  snap.backend_open["fb_A_C"] = true;           // preferred fallback open
  RouterEnv env = f.env();
  const RoutingOutcome out =
      route(test_request(), *f.catalog, snap, test_policy(), env);
  CHECK(out.tier == Tier::GroupFallback);
  CHECK(out.variant_id == "fb_A");  // next best among B-free, closed circuits
}

TEST_CASE("schema-covered groups need a valid payload") {
  Fixture f;
  f.latencies["fb_B_C"] = LatencyModel::constant(20.0);
  f.init();

  PayloadSchema schema;
  FieldSpec balance;
  balance.name = "balance";
  balance.kind = FieldKind::Number;
  balance.lo = 0.0;
  balance.hi = 1e9;
  schema.groups["A"] = {balance};
  schema.max_null_ratio = 0.0;

  RouterEnv env = f.env();
  env.schema = &schema;

  SUBCASE("absent payload excludes the group") {
    const RoutingOutcome out = route(test_request(), *f.catalog,
                                     healthy_snapshot(), test_policy(), env);
    CHECK(out.tier == Tier::GroupFallback);
    CHECK(out.variant_id == "fb_B_C");  // best A-free variant
  }

  SUBCASE("corrupted payload excludes the group") {
    Request request = test_request();
    request.payloads["A"] = {{"balance", -5.0}};  // below lo
    const RoutingOutcome out =
        route(request, *f.catalog, healthy_snapshot(), test_policy(), env);
    CHECK(out.tier == Tier::GroupFallback);
    CHECK(out.variant_id == "fb_B_C");
  }

  SUBCASE("valid payload keeps main eligible") {
    Request request = test_request();
    request.payloads["A"] = {{"balance", 100.0}};
    const RoutingOutcome out =
        route(request, *f.catalog, healthy_snapshot(), test_policy(), env);
    CHECK(out.tier == Tier::Main);
  }
}

TEST_CASE("all groups down terminates at the embedded model") {
  Fixture f;
  f.init();
  HealthSnapshot snap = healthy_snapshot();
  snap.statuses.assign(3, GroupStatus::Unavailable);
  RouterEnv env = f.env();
  const RoutingOutcome out =
      route(test_request(), *f.catalog, snap, test_policy(), env);
  CHECK(out.tier == Tier::ClientSide);
  CHECK(out.variant_id == "client");
  CHECK(out.score.has_value());
  CHECK(*out.score >= 0.0);
  CHECK(*out.score <= 1.0);
  CHECK(out.total_elapsed_ms == 0);  // in-process, no simulated cost
  REQUIRE(out.attempts.size() == 1);
  CHECK(out.attempts[0].result == AttemptResult::Ok);
}

TEST_CASE("hedge result is consumed when main exhausts") {
  Fixture f;
  f.latencies["main"] = LatencyModel::constant(1000.0);
  f.latencies["fb_A_B"] = LatencyModel::constant(80.0);
  f.init();
  RetryPolicy policy = test_policy();
  policy.reserve_ms = 60;  // 2 main attempts, exhaust at 200
  policy.hedge_value_threshold = 10000;

  RouterEnv env = f.env();
  const RoutingOutcome hedged =
      route(test_request(), *f.catalog, healthy_snapshot(), policy, env);
  CHECK(hedged.hedged);
  CHECK(hedged.tier == Tier::GroupFallback);
  CHECK(hedged.variant_id == "fb_A_B");
  // The hedge finished at 80, long before main gave up at 200: its score is
  // used with zero additional wait.
  CHECK(hedged.total_elapsed_ms == 200);
  bool found_hedge_attempt = false;
  for (const Attempt& a : hedged.attempts) {
    if (a.variant_id == "fb_A_B") {
      found_hedge_attempt = true;
      CHECK(a.start_ms == 0);
      CHECK(a.end_ms == 80);
      CHECK(a.result == AttemptResult::Ok);
    }
  }
  CHECK(found_hedge_attempt);

  // The same request below the hedge threshold pays the fallback latency
  // after exhaustion instead.
  SimClock clock2;
  SimBackend backend2(clock2, 7, f.latencies, f.default_latency, {});
  backend2.begin_request(0);
  RouterEnv env2{backend2, clock2,  f.client_model, nullptr,
                 nullptr,  nullptr, true};
  const RoutingOutcome plain =
      route(test_request(9999), *f.catalog, healthy_snapshot(), policy, env2);
  CHECK_FALSE(plain.hedged);
  CHECK(plain.tier == Tier::GroupFallback);
  CHECK(plain.total_elapsed_ms == 280);  // 200 exhaustion + 80 fallback
  CHECK(hedged.total_elapsed_ms <= plain.total_elapsed_ms);
}

TEST_CASE("main win discards the hedge") {
  Fixture f;
  f.latencies["main"] = LatencyModel::constant(40.0);
  f.latencies["fb_A_B"] = LatencyModel::constant(10.0);
  f.init();
  RetryPolicy policy = test_policy();
  policy.hedge_value_threshold = 10000;
  RouterEnv env = f.env();
  const RoutingOutcome out =
      route(test_request(), *f.catalog, healthy_snapshot(), policy, env);
  CHECK(out.hedged);
  CHECK(out.tier == Tier::Main);  // quality beats the faster hedge
  CHECK(out.total_elapsed_ms == 40);
  for (const Attempt& a : out.attempts) CHECK(a.variant_id == "main");
}

TEST_CASE("hedge failure still ends at the embedded model") {
  Fixture f;
  f.latencies["main"] = LatencyModel::constant(1000.0);
  f.latencies["fb_A_B"] = LatencyModel::constant(10.0, 1.0);  // always fails
  f.init();
  RetryPolicy policy = test_policy();
  policy.hedge_value_threshold = 10000;
  RouterEnv env = f.env();
  const RoutingOutcome out =
      route(test_request(), *f.catalog, healthy_snapshot(), policy, env);
  CHECK(out.hedged);
  CHECK(out.tier == Tier::ClientSide);
  CHECK(out.score.has_value());
}

TEST_CASE("no hedge without an eligible group fallback") {
  const Universe u = parse_universe("A");
  QualityMap q;
  q[1] = 0.9;
  q[0] = 0.2;
  const auto catalog = std::make_shared<VariantCatalog>(enumerate_catalog(u, q));
  SimClock clock;
  SimBackend backend(clock, 7, {}, LatencyModel::constant(40.0), {});
  backend.begin_request(0);
  ClientSideModel client;
  RouterEnv env{backend, clock, client, nullptr, nullptr, nullptr, true};
  const RoutingOutcome out =
      route(test_request(), *catalog, healthy_snapshot(1), test_policy(), env);
  CHECK_FALSE(out.hedged);  // nothing to hedge with
  CHECK(out.tier == Tier::Main);
}

TEST_CASE("ablated routing may return no score") {
  Fixture f;
  f.latencies["main"] = LatencyModel::constant(1000.0);
  f.init();
  RouterEnv env = f.env(/*fallback_enabled=*/false);
  const RoutingOutcome out =
      route(test_request(), *f.catalog, healthy_snapshot(), test_policy(), env);
  CHECK_FALSE(out.score.has_value());
  CHECK_FALSE(out.tier.has_value());
  CHECK(out.attempts.size() == 3);  // main attempts still budgeted
  CHECK_FALSE(out.hedged);          // ablation disables hedging too
}

TEST_CASE("route feeds breakers and the failure window") {
  Fixture f;
  f.latencies["main"] = LatencyModel::constant(1000.0);
  f.init();
  HealthRegistry health(f.catalog->universe(), BreakerConfig{});
  ResultWindow window(10);
  RouterEnv env = f.env();
  env.health = &health;
  env.main_window = &window;
  const RoutingOutcome out =
      route(test_request(), *f.catalog, healthy_snapshot(), test_policy(), env);
  CHECK(out.score.has_value());
  CHECK(window.snapshot().size() == 3);     // three main timeouts recorded
  CHECK(window.estimate() == 1.0);
  // 3 consecutive timeouts: visible to the breaker but below the default
  // threshold of 5.
  CHECK(health.breaker_state("main", 300) == BreakerState::Closed);
}

TEST_CASE("router invariants hold across randomized faults") {
  RngStream rng(41);
  for (int trial = 0; trial < 300; ++trial) {
    Fixture f;
    f.latencies["main"] =
        LatencyModel::lognormal(3.5 + rng.next_unit(), 0.8, 0.1 * rng.next_unit());
    f.default_latency =
        LatencyModel::lognormal(3.0, 0.6, 0.1 * rng.next_unit());
    f.init();
    f.backend->begin_request(trial);

    HealthSnapshot snap = healthy_snapshot();
    for (int g = 0; g < 3; ++g) {
      const double roll = rng.next_unit();
      if (roll < 0.15) snap.statuses[g] = GroupStatus::Unavailable;
      else if (roll < 0.3) snap.statuses[g] = GroupStatus::Corrupted;
    }
    for (const ModelVariant& v : f.catalog->variants()) {
      if (v.tier != Tier::ClientSide && rng.next_unit() < 0.1) {
        snap.backend_open[v.variant_id] = true;
      }
    }

    RetryPolicy policy = test_policy();
    policy.hedge_value_threshold =
        static_cast<int64_t>(rng.next_u64() % 150000);
    Request request = test_request(
        static_cast<int64_t>(rng.next_u64() % 200000));
    RouterEnv env = f.env();
    const RoutingOutcome out =
        route(request, *f.catalog, snap, policy, env);

    // Totality.
    REQUIRE(out.score.has_value());
    REQUIRE_FALSE(out.attempts.empty());

    // Budget.
    int main_attempts = 0;
    for (const Attempt& a : out.attempts) {
      if (a.variant_id == "main") ++main_attempts;
    }
    CHECK(main_attempts <= max_attempts(policy));
    CHECK(main_attempt_span(out, "main") <=
          policy.sla_budget_ms - policy.reserve_ms);

    // Legality: the scoring variant's groups were all usable.
    const ModelVariant* used = f.catalog->find(out.variant_id);
    REQUIRE(used != nullptr);
    CHECK(used->required_groups.subset_of(snap.healthy_groups()));
    if (used->tier != Tier::ClientSide) {
      CHECK_FALSE(snap.is_open(used->variant_id));
    }

    // Trace timing is consistent.
    for (const Attempt& a : out.attempts) {
      CHECK(a.end_ms >= a.start_ms);
      CHECK(out.total_elapsed_ms >= a.end_ms - request.arrival_time_ms);
    }
    CHECK(out.total_elapsed_ms <= policy.sla_budget_ms);

    // The terminal tier is reached only when everything else was ruled out
    // or attempted.
    if (out.tier == Tier::ClientSide) {
      const bool main_eligible =
          f.catalog->main().required_groups.subset_of(snap.healthy_groups()) &&
          !snap.is_open("main");
      CHECK((!main_eligible || main_attempts > 0));
    }
  }
}

TEST_CASE("client model is deterministic and bounded") {
  ClientSideModel model;
  Request r = test_request(12345);
  r.arrival_time_ms = 7200000;  // 02:00
  const double first = model.score(r);
  CHECK(first == model.score(r));
  CHECK(first > 0.0);
  CHECK(first < 1.0);

  Request richer = r;
  richer.amount = 10 * r.amount;
  CHECK(model.score(richer) > first);  // amount raises risk
}
