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

#include "fbmesh/health.hpp"
#include "fbmesh/planner.hpp"
#include "fbmesh/rng.hpp"

using namespace fbmesh;

namespace {

PayloadSchema ten_field_schema() {
  PayloadSchema schema;
  schema.max_null_ratio = 0.2;
  std::vector<FieldSpec> fields;
  for (int i = 0; i < 10; ++i) {
    FieldSpec f;
    f.name = "f" + std::to_string(i);
    f.kind = FieldKind::Number;
    f.lo = 0.0;
    f.hi = 100.0;
    fields.push_back(f);
  }
  schema.groups["A"] = fields;
  return schema;
}

Payload full_payload(int count) {
  Payload p;
  for (int i = 0; i < count; ++i) {
    p["f" + std::to_string(i)] = 50.0;
  }
  return p;
}

}  // namespace

TEST_CASE("validate_payload accepts in-range complete payloads") {
  const PayloadSchema schema = ten_field_schema();
  CHECK(validate_payload(schema, "A", full_payload(10)) ==
        GroupStatus::Healthy);
}

TEST_CASE("validate_payload flags out-of-range numbers") {
  const PayloadSchema schema = ten_field_schema();
  Payload p = full_payload(10);
  p["f3"] = -0.5;  // below lo
  CHECK(validate_payload(schema, "A", p) == GroupStatus::Corrupted);
  p["f3"] = 100.5;  // above hi
  CHECK(validate_payload(schema, "A", p) == GroupStatus::Corrupted);
}

TEST_CASE("validate_payload flags wrong kinds") {
  const PayloadSchema schema = ten_field_schema();
  Payload p = full_payload(10);
  p["f0"] = std::string("not a number");
  CHECK(validate_payload(schema, "A", p) == GroupStatus::Corrupted);
}

TEST_CASE("validate_payload null ratio boundary") {
  const PayloadSchema schema = ten_field_schema();
  // 3 of 10 missing: ratio 0.3 exceeds 0.2
  CHECK(validate_payload(schema, "A", full_payload(7)) ==
        GroupStatus::Corrupted);
  // 2 of 10 missing: ratio 0.2 does not exceed 0.2
  CHECK(validate_payload(schema, "A", full_payload(8)) ==
        GroupStatus::Healthy);
}

TEST_CASE("validate_payload rejects unknown groups") {
  const PayloadSchema schema = ten_field_schema();
  CHECK_THROWS_AS(validate_payload(schema, "Z", {}), std::invalid_argument);
}

TEST_CASE("flag_group sets and clears statuses") {
  HealthRegistry registry(parse_universe("A,B,C"), BreakerConfig{});
  registry.flag_group("B", GroupStatus::Unavailable);
  CHECK(registry.snapshot(0).statuses[1] == GroupStatus::Unavailable);
  CHECK_FALSE(registry.snapshot(0).healthy_groups().contains(1));

  registry.flag_group("B", GroupStatus::Healthy);  // last write wins
  CHECK(registry.snapshot(0).statuses[1] == GroupStatus::Healthy);

  CHECK_THROWS_AS(registry.flag_group("Z", GroupStatus::Unavailable),
                  std::invalid_argument);
}

TEST_CASE("unavailable and corrupted are interchangeable for routing") {
  const Universe u = parse_universe("A,B,C");
  QualityMap quality;
  for (uint64_t m = 0; m < 8; ++m) quality[m] = 0.1 + 0.1 * m;
  const VariantCatalog catalog = enumerate_catalog(u, quality);

  HealthRegistry unavailable(u, BreakerConfig{});
  unavailable.flag_group("B", GroupStatus::Unavailable);
  HealthRegistry corrupted(u, BreakerConfig{});
  corrupted.flag_group("B", GroupStatus::Corrupted);

  const GroupSet healthy_u = unavailable.snapshot(0).healthy_groups();
  const GroupSet healthy_c = corrupted.snapshot(0).healthy_groups();
  CHECK(healthy_u == healthy_c);
  CHECK(best_variant_for(catalog, healthy_u).variant_id ==
        best_variant_for(catalog, healthy_c).variant_id);
}

TEST_CASE("breaker opens after k consecutive failures") {
  BreakerConfig cfg;  // k=5, cooldown 30s, close after 2
  HealthRegistry registry(parse_universe("A"), cfg);
  for (int i = 0; i < 4; ++i) {
    CHECK(registry.record_call("main", AttemptResult::Timeout, i) ==
          BreakerState::Closed);
  }
  CHECK(registry.record_call("main", AttemptResult::Timeout, 4) ==
        BreakerState::Open);
  CHECK(registry.snapshot(5).is_open("main"));
}

TEST_CASE("an ok resets the consecutive failure count") {
  HealthRegistry registry(parse_universe("A"), BreakerConfig{});
  for (int i = 0; i < 4; ++i) {
    registry.record_call("main", AttemptResult::Failure, i);
  }
  registry.record_call("main", AttemptResult::Ok, 4);
  for (int i = 0; i < 4; ++i) {
    CHECK(registry.record_call("main", AttemptResult::Failure, 5 + i) ==
          BreakerState::Closed);
  }
}

TEST_CASE("breaker walks open -> half-open -> closed") {
  BreakerConfig cfg;
  cfg.failure_threshold = 5;
  cfg.cooldown_ms = 30000;
  cfg.close_after = 2;
  HealthRegistry registry(parse_universe("A"), cfg);

  for (int i = 0; i < 5; ++i) {
    registry.record_call("main", AttemptResult::Timeout, 100 + i);
  }
  CHECK(registry.breaker_state("main", 104) == BreakerState::Open);
  CHECK(registry.breaker_state("main", 30103) == BreakerState::Open);
  CHECK(registry.breaker_state("main", 30105) == BreakerState::HalfOpen);
  CHECK_FALSE(registry.snapshot(30105).is_open("main"));  // probe allowed

  CHECK(registry.record_call("main", AttemptResult::Ok, 30110) ==
        BreakerState::HalfOpen);
  CHECK(registry.record_call("main", AttemptResult::Ok, 30120) ==
        BreakerState::Closed);
}

TEST_CASE("a half-open probe failure reopens the breaker") {
  BreakerConfig cfg;
  cfg.failure_threshold = 2;
  cfg.cooldown_ms = 1000;
  HealthRegistry registry(parse_universe("A"), cfg);
  registry.record_call("v", AttemptResult::Failure, 0);
  registry.record_call("v", AttemptResult::Failure, 1);
  CHECK(registry.breaker_state("v", 1) == BreakerState::Open);
  CHECK(registry.breaker_state("v", 1001) == BreakerState::HalfOpen);
  CHECK(registry.record_call("v", AttemptResult::Timeout, 1002) ==
        BreakerState::Open);
  // Cooldown restarts from the reopening.
  CHECK(registry.breaker_state("v", 1500) == BreakerState::Open);
  CHECK(registry.breaker_state("v", 2002) == BreakerState::HalfOpen);
}

TEST_CASE("fresh breaker stays closed on success") {
  HealthRegistry registry(parse_universe("A"), BreakerConfig{});
  CHECK(registry.record_call("main", AttemptResult::Ok, 0) ==
        BreakerState::Closed);
}

TEST_CASE("breaker never jumps open -> closed over random traces") {
  RngStream rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    BreakerConfig cfg;
    cfg.failure_threshold = 1 + static_cast<int>(rng.next_u64() % 4);
    cfg.cooldown_ms = 10 + static_cast<int64_t>(rng.next_u64() % 100);
    cfg.close_after = 1 + static_cast<int>(rng.next_u64() % 3);
    HealthRegistry registry(parse_universe("A"), cfg);

    BreakerState previous = BreakerState::Closed;
    int64_t now = 0;
    for (int step = 0; step < 200; ++step) {
      now += static_cast<int64_t>(rng.next_u64() % 40);
      // The pre-call state matters: an Open breaker can lazily move to
      // HalfOpen when queried, which is the transition a caller would see.
      const BreakerState before = registry.breaker_state("v", now);
      if (previous == BreakerState::Open) {
        CHECK(before != BreakerState::Closed);
      }
      const AttemptResult result = rng.next_unit() < 0.5
                                       ? AttemptResult::Ok
                                       : AttemptResult::Failure;
      const BreakerState after = registry.record_call("v", result, now);
      if (before == BreakerState::Open) {
        CHECK(after != BreakerState::Closed);
      }
      previous = after;
    }
  }
}

TEST_CASE("manual flags and breakers are independent in snapshots") {
  HealthRegistry registry(parse_universe("A,B"), BreakerConfig{});
  registry.flag_group("A", GroupStatus::Unavailable);
  for (int i = 0; i < 5; ++i) {
    registry.record_call("main", AttemptResult::Failure, i);
  }
  const HealthSnapshot snap = registry.snapshot(10);
  CHECK(snap.statuses[0] == GroupStatus::Unavailable);
  CHECK(snap.statuses[1] == GroupStatus::Healthy);
  CHECK(snap.is_open("main"));
  CHECK(snap.snapshot_time_ms == 10);

  // Flagging a group is not undone by any breaker activity.
  registry.record_call("main", AttemptResult::Ok, 11);
  CHECK(registry.snapshot(12).statuses[0] == GroupStatus::Unavailable);
}

TEST_CASE("breaker config validation") {
  BreakerConfig bad;
  bad.failure_threshold = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = BreakerConfig{};
  bad.cooldown_ms = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}
