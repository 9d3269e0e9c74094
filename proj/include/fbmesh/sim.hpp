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
#include <memory>
#include <string>
#include <vector>

#include "fbmesh/planner.hpp"
#include "fbmesh/policy.hpp"
#include "fbmesh/router.hpp"
#include "fbmesh/types.hpp"

namespace fbmesh {

/// A window of elevated arrival rate. Overlapping windows multiply.
struct BurstWindow {
  int64_t start_ms = 0;
  int64_t end_ms = 0;
  double rate_multiplier = 1.0;
};

enum class OutageMode { Unavailable, Corrupted, BackendDown, LatencySpike };

std::string outage_mode_name(OutageMode mode);
OutageMode parse_outage_mode(const std::string& name);

/// An injected fault, active over [start_ms, end_ms). Group targets take the
/// Unavailable/Corrupted modes; variant targets take BackendDown (calls fail
/// fast) or LatencySpike (sampled latency times `multiplier`).
struct OutageWindow {
  enum class Target { Group, Variant };
  Target target_kind = Target::Group;
  std::string target;
  int64_t start_ms = 0;
  int64_t end_ms = 0;
  OutageMode mode = OutageMode::Unavailable;
  double multiplier = 1.0;

  bool active_at(int64_t t) const { return t >= start_ms && t < end_ms; }
};

struct ArrivalModel {
  double base_rate_per_sec = 1.0;
  std::vector<BurstWindow> bursts;
};

/// Transaction amounts in minor units: exp(Normal(location, scale)), rounded.
struct AmountModel {
  double log_location = 8.0;
  double log_scale = 1.0;
};

/// A complete simulation input. Kept deterministic: the seed drives separate
/// derived streams for arrivals, amounts, latencies, and scores, so each
/// subsystem's draws are independent of the others.
struct Scenario {
  uint64_t seed = 0;
  int64_t duration_ms = 0;
  int64_t metrics_window_ms = 300000;
  ArrivalModel arrivals;
  AmountModel amounts;
  std::map<std::string, LatencyModel> latency_by_variant;
  LatencyModel default_latency = LatencyModel::constant(40.0);
  std::vector<OutageWindow> outages;
  RetryPolicy policy;
  BreakerConfig breaker;
  std::shared_ptr<const VariantCatalog> catalog;

  void validate() const;
};

/// One aggregation window of the metrics report. Fractions are over scored
/// requests; rates are over all requests in the window.
struct WindowMetrics {
  int64_t window_start_ms = 0;
  int64_t request_count = 0;
  double p99_latency_ms = 0.0;
  double timeout_rate = 0.0;
  double frac_main = 0.0;
  double frac_fallback = 0.0;
  double frac_clientside = 0.0;
  double weighted_quality = 0.0;
  double sla_miss_rate = 0.0;
};

struct RunTotals {
  int64_t request_count = 0;
  int64_t scored = 0;
  int64_t sla_misses = 0;
  int64_t attempts_total = 0;
  int64_t timeouts_total = 0;
  int64_t hedges_total = 0;
  int64_t count_main = 0;
  int64_t count_fallback = 0;
  int64_t count_clientside = 0;
  double sla_miss_rate = 0.0;
  double frac_main = 0.0;
  double frac_fallback = 0.0;
  double frac_clientside = 0.0;
  double weighted_quality = 0.0;
  double p99_latency_ms = 0.0;
  int64_t max_elapsed_ms = 0;
};

struct MetricsReport {
  int64_t window_ms = 300000;
  std::vector<WindowMetrics> windows;
  RunTotals totals;
};

struct SimOptions {
  bool ablate_fallback = false;  // main tier only; no hedge, no fallbacks
};

struct SimResult {
  MetricsReport report;
  std::vector<RoutingOutcome> outcomes;  // in arrival order
};

/// Value at rank ceil(p/100 × n) of the ascending sort. p in (0, 100];
/// throws std::invalid_argument on an empty sample.
double percentile_nearest_rank(std::vector<double> samples, double p);

/// Arrival times in [0, duration) for a piecewise-constant-rate Poisson
/// process, ascending. Deterministic given the seed.
std::vector<int64_t> generate_arrivals(const ArrivalModel& model,
                                       int64_t duration_ms, uint64_t seed);

/// Virtual-time scoring backend. Latency and failure draws are keyed by
/// (variant, request, call index), so two runs with the same seed observe
/// identical draws regardless of which calls are actually made — hedged and
/// non-hedged executions of the same request see the same backend behavior.
class SimBackend : public Backend {
 public:
  SimBackend(SimClock& clock, uint64_t seed,
             std::map<std::string, LatencyModel> latency_by_variant,
             LatencyModel default_latency, std::vector<OutageWindow> outages);

  /// Associates subsequent calls with one simulated request and resets the
  /// per-variant call counters.
  void begin_request(uint64_t request_seq);

  Reply invoke(const std::string& variant_id, const Request& request,
               int64_t timeout_ms) override;
  std::unique_ptr<PendingScore> dispatch(const std::string& variant_id,
                                         const Request& request,
                                         int64_t timeout_ms) override;

 private:
  struct PlannedCall {
    AttemptResult result = AttemptResult::Failure;
    double score = 0.0;
    int64_t start_ms = 0;
    int64_t end_ms = 0;
  };

  PlannedCall plan_call(const std::string& variant_id, int64_t timeout_ms);
  const LatencyModel& model_for(const std::string& variant_id) const;

  SimClock& clock_;
  uint64_t latency_seed_;
  uint64_t score_seed_;
  std::map<std::string, LatencyModel> latency_by_variant_;
  LatencyModel default_latency_;
  std::vector<OutageWindow> outages_;
  uint64_t request_seq_ = 0;
  std::map<std::string, uint64_t> calls_this_request_;

  friend class SimPendingScore;
};

/// Runs the scenario on a virtual clock. Identical seeds produce identical
/// results byte for byte. Throws std::invalid_argument before any event runs
/// if the scenario is invalid.
SimResult run_scenario(const Scenario& scenario, const SimOptions& options = {});

}  // namespace fbmesh
