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

#include <chrono>
#include <cstdint>
#include <memory>
#include <string>

#include "fbmesh/health.hpp"
#include "fbmesh/planner.hpp"
#include "fbmesh/policy.hpp"
#include "fbmesh/types.hpp"

namespace fbmesh {

/// Monotonic clock seam. The simulator injects a virtual clock so budget
/// assertions are exact; the gateway injects wall time.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual int64_t now_ms() const = 0;
};

/// Virtual clock. Monotone within one routed request; the owner may reset it
/// between requests.
class SimClock : public Clock {
 public:
  int64_t now_ms() const override { return now_; }
  void advance_to(int64_t t) { now_ = std::max(now_, t); }
  void reset(int64_t t) { now_ = t; }

 private:
  int64_t now_ = 0;
};

/// Steady wall clock anchored to the unix epoch at construction, so values
/// are monotone yet remain meaningful timestamps.
class SteadyClock : public Clock {
 public:
  SteadyClock();
  int64_t now_ms() const override;

 private:
  int64_t epoch_anchor_ms_;
  std::chrono::steady_clock::time_point start_;
};

/// An in-flight hedged backend call.
class PendingScore {
 public:
  struct Resolved {
    AttemptResult result = AttemptResult::Timeout;
    double score = 0.0;
    int64_t start_ms = 0;
    int64_t end_ms = 0;
  };

  virtual ~PendingScore() = default;

  /// Blocks (or advances the virtual clock) until the call completes or the
  /// deadline passes, whichever is first. A call already completed resolves
  /// with zero additional wait.
  virtual Resolved await_until(int64_t deadline_ms) = 0;

  virtual const std::string& variant_id() const = 0;
};

/// Abstract scoring backend. Implementations must never report Ok after the
/// given timeout has elapsed, and must tolerate dispatched calls being
/// abandoned by the caller.
class Backend {
 public:
  struct Reply {
    AttemptResult result = AttemptResult::Failure;
    double score = 0.0;
  };

  virtual ~Backend() = default;

  /// Synchronous scoring call; returns once the backend replies or the
  /// timeout elapses.
  virtual Reply invoke(const std::string& variant_id, const Request& request,
                       int64_t timeout_ms) = 0;

  /// Starts a call without waiting for it; used for hedging.
  virtual std::unique_ptr<PendingScore> dispatch(const std::string& variant_id,
                                                 const Request& request,
                                                 int64_t timeout_ms) = 0;
};

/// The terminal scorer embedded in the host process. A fixed linear model
/// over request-intrinsic fields only (amount, hour of day); no external
/// feature group, no I/O, deterministic.
class ClientSideModel {
 public:
  struct Weights {
    double bias = -1.5;
    double w_amount = 2.5;
    double w_hour = 0.25;
  };

  ClientSideModel() = default;
  explicit ClientSideModel(Weights weights) : weights_(weights) {}

  double score(const Request& request) const;

 private:
  Weights weights_;
};

/// Everything route() needs beyond the per-request inputs. Health and window
/// feedback sinks are optional; when present they receive every backend call
/// result the router observes.
struct RouterEnv {
  Backend& backend;
  Clock& clock;
  const ClientSideModel& client_model;
  const PayloadSchema* schema = nullptr;
  HealthRegistry* health = nullptr;
  ResultWindow* main_window = nullptr;
  bool fallback_enabled = true;
};

/// Groups usable for this request: groups Healthy in the snapshot, minus
/// schema-covered groups whose payload is absent or fails validation. Groups
/// the schema does not cover are not payload-checked.
GroupSet usable_groups(const Request& request, const Universe& universe,
                       const HealthSnapshot& snapshot,
                       const PayloadSchema* schema);

/// Routes one request through the fallback hierarchy:
///   (0) compute the usable group set;
///   (1) dispatch a hedged fallback call for high-value requests;
///   (2) attempt the main model with budgeted retries while it is eligible;
///   (3) on exhaustion or ineligibility, use the best available fallback,
///       preferring an already-dispatched hedge result;
///   (4) fall through to the embedded client-side model, always.
/// Total in normal operation: every request receives a score. With
/// fallback_enabled = false (ablation studies) the outcome may carry no
/// score.
RoutingOutcome route(const Request& request, const VariantCatalog& catalog,
                     const HealthSnapshot& snapshot, const RetryPolicy& policy,
                     RouterEnv& env);

}  // namespace fbmesh
