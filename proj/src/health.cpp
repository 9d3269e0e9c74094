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

#include "fbmesh/health.hpp"

#include <algorithm>
#include <stdexcept>

namespace fbmesh {

std::string group_status_name(GroupStatus status) {
  switch (status) {
    case GroupStatus::Healthy: return "Healthy";
    case GroupStatus::Unavailable: return "Unavailable";
    case GroupStatus::Corrupted: return "Corrupted";
  }
  throw std::logic_error("unreachable");
}

GroupStatus parse_group_status(const std::string& name) {
  if (name == "Healthy") return GroupStatus::Healthy;
  if (name == "Unavailable") return GroupStatus::Unavailable;
  if (name == "Corrupted") return GroupStatus::Corrupted;
  throw std::invalid_argument("unknown group status '" + name + "'");
}

std::string breaker_state_name(BreakerState state) {
  switch (state) {
    case BreakerState::Closed: return "Closed";
    case BreakerState::Open: return "Open";
    case BreakerState::HalfOpen: return "HalfOpen";
  }
  throw std::logic_error("unreachable");
}

void BreakerConfig::validate() const {
  if (failure_threshold < 1) {
    throw std::invalid_argument("breaker.failure_threshold must be >= 1");
  }
  if (cooldown_ms <= 0) {
    throw std::invalid_argument("breaker.cooldown_ms must be > 0");
  }
  if (close_after < 1) {
    throw std::invalid_argument("breaker.close_after must be >= 1");
  }
}

GroupSet HealthSnapshot::healthy_groups() const {
  GroupSet healthy(static_cast<int>(statuses.size()));
  for (size_t i = 0; i < statuses.size(); ++i) {
    if (statuses[i] == GroupStatus::Healthy) {
      healthy = healthy.with(static_cast<int>(i));
    }
  }
  return healthy;
}

bool HealthSnapshot::is_open(const std::string& variant_id) const {
  auto it = backend_open.find(variant_id);
  return it != backend_open.end() && it->second;
}

std::string field_kind_name(FieldKind kind) {
  switch (kind) {
    case FieldKind::Number: return "number";
    case FieldKind::Text: return "text";
    case FieldKind::Flag: return "flag";
  }
  throw std::logic_error("unreachable");
}

FieldKind parse_field_kind(const std::string& name) {
  if (name == "number") return FieldKind::Number;
  if (name == "text") return FieldKind::Text;
  if (name == "flag") return FieldKind::Flag;
  throw std::invalid_argument("unknown field kind '" + name + "'");
}

void FieldSpec::validate() const {
  if (name.empty()) {
    throw std::invalid_argument("schema field name must be non-empty");
  }
  if (kind == FieldKind::Number && lo > hi) {
    throw std::invalid_argument("schema field '" + name + "': lo must be <= hi");
  }
}

void PayloadSchema::validate() const {
  if (!(max_null_ratio >= 0.0 && max_null_ratio <= 1.0)) {
    throw std::invalid_argument("schema.max_null_ratio must be in [0, 1]");
  }
  for (const auto& [group, fields] : groups) {
    for (const FieldSpec& f : fields) f.validate();
  }
}

bool PayloadSchema::covers(const std::string& group_id) const {
  return groups.count(group_id) != 0;
}

GroupStatus validate_payload(const PayloadSchema& schema,
                             const std::string& group_id,
                             const Payload& payload) {
  auto it = schema.groups.find(group_id);
  if (it == schema.groups.end()) {
    throw std::invalid_argument("schema does not cover group '" + group_id +
                                "'");
  }
  const std::vector<FieldSpec>& fields = it->second;
  if (fields.empty()) return GroupStatus::Healthy;

  size_t missing = 0;
  for (const FieldSpec& spec : fields) {
    auto field = payload.find(spec.name);
    if (field == payload.end()) {
      ++missing;
      continue;
    }
    const FieldValue& value = field->second;
    switch (spec.kind) {
      case FieldKind::Number: {
        const double* num = std::get_if<double>(&value);
        if (num == nullptr) return GroupStatus::Corrupted;
        if (*num < spec.lo || *num > spec.hi) return GroupStatus::Corrupted;
        break;
      }
      case FieldKind::Text:
        if (!std::holds_alternative<std::string>(value)) {
          return GroupStatus::Corrupted;
        }
        break;
      case FieldKind::Flag:
        if (!std::holds_alternative<bool>(value)) {
          return GroupStatus::Corrupted;
        }
        break;
    }
  }
  const double null_ratio =
      static_cast<double>(missing) / static_cast<double>(fields.size());
  if (null_ratio > schema.max_null_ratio) return GroupStatus::Corrupted;
  return GroupStatus::Healthy;
}

HealthRegistry::HealthRegistry(Universe universe, BreakerConfig config)
    : universe_(std::move(universe)), config_(config) {
  config_.validate();
  flags_.assign(universe_.size(), GroupStatus::Healthy);
}

void HealthRegistry::flag_group(const std::string& group_id,
                                GroupStatus status) {
  const int index = universe_.index_of(group_id);  // throws if unknown
  std::lock_guard<std::mutex> lock(mutex_);
  flags_[index] = status;
}

void HealthRegistry::refresh_locked(Breaker& b, int64_t now_ms) {
  if (b.state == BreakerState::Open &&
      now_ms - b.opened_at_ms >= config_.cooldown_ms) {
    b.state = BreakerState::HalfOpen;
    b.consecutive_oks = 0;
  }
}

BreakerState HealthRegistry::record_call(const std::string& variant_id,
                                         AttemptResult result,
                                         int64_t now_ms) {
  std::lock_guard<std::mutex> lock(mutex_);
  Breaker& b = breakers_[variant_id];
  b.last_seen_ms = std::max(b.last_seen_ms, now_ms);
  refresh_locked(b, b.last_seen_ms);

  const bool ok = result == AttemptResult::Ok;
  switch (b.state) {
    case BreakerState::Closed:
      if (ok) {
        b.consecutive_failures = 0;
      } else if (++b.consecutive_failures >= config_.failure_threshold) {
        b.state = BreakerState::Open;
        b.opened_at_ms = b.last_seen_ms;
        b.consecutive_failures = 0;
      }
      break;
    case BreakerState::HalfOpen:
      if (!ok) {
        b.state = BreakerState::Open;
        b.opened_at_ms = b.last_seen_ms;
        b.consecutive_oks = 0;
      } else if (++b.consecutive_oks >= config_.close_after) {
        b.state = BreakerState::Closed;
        b.consecutive_failures = 0;
        b.consecutive_oks = 0;
      }
      break;
    case BreakerState::Open:
      // A straggler from a call issued before the circuit opened; it carries
      // no fresh information about recovery.
      break;
  }
  return b.state;
}

BreakerState HealthRegistry::breaker_state(const std::string& variant_id,
                                           int64_t now_ms) {
  std::lock_guard<std::mutex> lock(mutex_);
  auto it = breakers_.find(variant_id);
  if (it == breakers_.end()) return BreakerState::Closed;
  it->second.last_seen_ms = std::max(it->second.last_seen_ms, now_ms);
  refresh_locked(it->second, it->second.last_seen_ms);
  return it->second.state;
}

HealthSnapshot HealthRegistry::snapshot(int64_t now_ms) {
  std::lock_guard<std::mutex> lock(mutex_);
  HealthSnapshot snap;
  snap.snapshot_time_ms = now_ms;
  snap.statuses = flags_;
  for (auto& [id, breaker] : breakers_) {
    breaker.last_seen_ms = std::max(breaker.last_seen_ms, now_ms);
    refresh_locked(breaker, breaker.last_seen_ms);
    snap.backend_open[id] = breaker.state == BreakerState::Open;
  }
  return snap;
}

}  // namespace fbmesh
