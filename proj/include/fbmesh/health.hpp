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
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "fbmesh/group_set.hpp"
#include "fbmesh/types.hpp"

namespace fbmesh {

/// Routing-visible status of one feature group. Unavailable (provider down)
/// and Corrupted (provider returning garbage) are distinct causes but equally
/// unusable: routing only ever consumes the healthy set.
enum class GroupStatus { Healthy, Unavailable, Corrupted };

std::string group_status_name(GroupStatus status);
GroupStatus parse_group_status(const std::string& name);

enum class BreakerState { Closed, Open, HalfOpen };

std::string breaker_state_name(BreakerState state);

/// Circuit-breaker tuning: Open after k consecutive non-Ok results, probe
/// again (HalfOpen) once cooldown_ms has passed, Close after m consecutive
/// Ok probes.
struct BreakerConfig {
  int failure_threshold = 5;
  int64_t cooldown_ms = 30000;
  int close_after = 2;

  void validate() const;
};

/// Immutable point-in-time view of group and backend health.
struct HealthSnapshot {
  std::vector<GroupStatus> statuses;        // by group index
  std::map<std::string, bool> backend_open; // variant id -> circuit open
  int64_t snapshot_time_ms = 0;

  GroupSet healthy_groups() const;
  bool is_open(const std::string& variant_id) const;
};

enum class FieldKind { Number, Text, Flag };

std::string field_kind_name(FieldKind kind);
FieldKind parse_field_kind(const std::string& name);

/// Expected shape of one group's feature payload.
struct FieldSpec {
  std::string name;
  FieldKind kind = FieldKind::Number;
  double lo = 0.0;  // numeric range, used when kind == Number
  double hi = 0.0;

  void validate() const;
};

/// Per-group payload schemas plus the tolerated ratio of missing fields.
/// Groups without an entry are not validated.
struct PayloadSchema {
  std::map<std::string, std::vector<FieldSpec>> groups;  // group id -> fields
  double max_null_ratio = 0.2;

  void validate() const;
  bool covers(const std::string& group_id) const;
};

/// Corrupted iff any present numeric field is out of range, any field has the
/// wrong kind, or more than max_null_ratio of the schema's fields are missing.
/// Throws std::invalid_argument for groups the schema does not cover.
GroupStatus validate_payload(const PayloadSchema& schema,
                             const std::string& group_id,
                             const Payload& payload);

/// Shared mutable health state: manual group flags plus per-backend circuit
/// breakers. All entry points are individually atomic; snapshot() returns an
/// internally consistent copy.
class HealthRegistry {
 public:
  HealthRegistry(Universe universe, BreakerConfig config);

  /// Sets a group's status until overwritten. Flagging Healthy clears an
  /// incident. Throws std::invalid_argument for unknown groups.
  void flag_group(const std::string& group_id, GroupStatus status);

  /// Feeds one backend call result into that backend's breaker and returns
  /// the resulting state. Out-of-order timestamps from overlapping requests
  /// are clamped forward so cooldown arithmetic stays monotone.
  BreakerState record_call(const std::string& variant_id, AttemptResult result,
                           int64_t now_ms);

  BreakerState breaker_state(const std::string& variant_id, int64_t now_ms);

  HealthSnapshot snapshot(int64_t now_ms);

  const Universe& universe() const { return universe_; }

 private:
  struct Breaker {
    BreakerState state = BreakerState::Closed;
    int consecutive_failures = 0;
    int consecutive_oks = 0;
    int64_t opened_at_ms = 0;
    int64_t last_seen_ms = 0;
  };

  // Applies the Open -> HalfOpen transition once the cooldown has elapsed.
  void refresh_locked(Breaker& b, int64_t now_ms);

  mutable std::mutex mutex_;
  Universe universe_;
  BreakerConfig config_;
  std::vector<GroupStatus> flags_;
  std::map<std::string, Breaker> breakers_;
};

}  // namespace fbmesh
