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
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "fbmesh/group_set.hpp"
#include "fbmesh/rng.hpp"

namespace fbmesh {

/// Offline evaluation quality of a model, normalized to [0, 1]
/// (e.g. a precision-recall AUC).
class QualityScore {
 public:
  QualityScore() = default;
  explicit QualityScore(double value);
  double value() const { return value_; }
  bool operator==(const QualityScore& o) const { return value_ == o.value_; }

 private:
  double value_ = 0.0;
};

/// Position in the fallback hierarchy.
enum class Tier { Main, GroupFallback, ClientSide };

std::string tier_name(Tier tier);
Tier parse_tier(const std::string& name);

/// How a scoring backend behaves in time: a fixed cost, a lognormal draw, or
/// an injected sequence of latencies (cycled per call) for tests. failure_prob
/// is the per-call chance of an explicit error reply.
struct LatencyModel {
  enum class Kind { Constant, Lognormal, Injected };

  Kind kind = Kind::Constant;
  double constant_ms = 0.0;
  double log_location = 0.0;  // location of log-latency (Lognormal)
  double log_scale = 0.0;     // scale of log-latency, >= 0
  std::vector<double> injected_ms;
  double failure_prob = 0.0;

  void validate() const;

  /// Latency in milliseconds for the call_index-th call keyed by `rng`.
  double sample_ms(RngStream& rng, uint64_t call_index) const;

  static LatencyModel constant(double ms, double failure_prob = 0.0);
  static LatencyModel lognormal(double location, double scale,
                                double failure_prob = 0.0);
  static LatencyModel injected(std::vector<double> values_ms,
                               double failure_prob = 0.0);
};

/// A deployable scoring model: which feature groups it needs, how good it is,
/// and where it sits in the hierarchy.
struct ModelVariant {
  std::string variant_id;
  GroupSet required_groups;
  QualityScore quality;
  Tier tier = Tier::GroupFallback;
  LatencyModel latency;
};

/// One field of a feature payload. Missing fields are simply absent from the
/// payload map.
using FieldValue = std::variant<double, std::string, bool>;
using Payload = std::map<std::string, FieldValue>;

/// One scoring request. Amounts are integer minor currency units.
struct Request {
  std::string request_id;
  int64_t amount = 0;
  std::map<std::string, Payload> payloads;  // group id -> fields
  int64_t arrival_time_ms = 0;
};

enum class AttemptResult { Ok, Timeout, Failure };

std::string attempt_result_name(AttemptResult result);
AttemptResult parse_attempt_result(const std::string& name);

/// One backend call made while routing a request.
struct Attempt {
  std::string variant_id;
  int64_t start_ms = 0;
  int64_t end_ms = 0;
  AttemptResult result = AttemptResult::Ok;
};

/// Full trace of one routed request. `score` is always present in normal
/// operation (the embedded client-side model is a terminal guarantee); it is
/// absent only in the main-only ablation mode used for robustness studies.
struct RoutingOutcome {
  std::string request_id;
  std::optional<double> score;
  std::string variant_id;        // empty when no score was produced
  std::optional<Tier> tier;
  std::vector<Attempt> attempts;
  int64_t total_elapsed_ms = 0;
  bool hedged = false;
};

}  // namespace fbmesh
