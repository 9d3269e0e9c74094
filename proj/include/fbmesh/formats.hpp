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

#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "fbmesh/health.hpp"
#include "fbmesh/planner.hpp"
#include "fbmesh/policy.hpp"
#include "fbmesh/sim.hpp"
#include "fbmesh/types.hpp"

namespace fbmesh {

/// Raised for malformed or inconsistent configuration input; messages name
/// the offending field.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

// Catalog file: universe plus per-variant {id, groups, quality, tier}.
// Round-trips losslessly.
nlohmann::ordered_json catalog_to_json(const VariantCatalog& catalog);
VariantCatalog catalog_from_json(const nlohmann::json& j);
void save_catalog(const VariantCatalog& catalog, const std::string& path);
VariantCatalog load_catalog(const std::string& path);

// Quality file: canonical group-set string -> quality value. The catalog's
// Main entry is the full universe; "" keys the client-side model.
QualityMap quality_map_from_json(const nlohmann::json& j,
                                 const Universe& universe);
QualityMap load_quality_map(const std::string& path, const Universe& universe);

// Weights file: canonical group-set string -> scenario weight.
ScenarioWeights weights_from_json(const nlohmann::json& j,
                                  const Universe& universe);
ScenarioWeights load_weights(const std::string& path, const Universe& universe);

// Shared config blocks.
RetryPolicy policy_from_json(const nlohmann::json& j);
nlohmann::ordered_json policy_to_json(const RetryPolicy& policy);
BreakerConfig breaker_from_json(const nlohmann::json& j);
LatencyModel latency_model_from_json(const nlohmann::json& j);
nlohmann::ordered_json latency_model_to_json(const LatencyModel& model);
PayloadSchema schema_from_json(const nlohmann::json& j);

// Scenario file. Relative catalog paths resolve against base_dir.
Scenario scenario_from_json(const nlohmann::json& j,
                            const std::string& base_dir);
Scenario load_scenario(const std::string& path);

// Per-request outcome rendering shared by the gateway response body and the
// simulator's outcomes.jsonl lines.
nlohmann::ordered_json outcome_to_json(const RoutingOutcome& outcome);
std::string outcomes_to_jsonl(const std::vector<RoutingOutcome>& outcomes);

// metrics.csv: one row per aggregation window, fixed column order.
extern const char* const kMetricsCsvHeader;
std::string metrics_to_csv(const MetricsReport& report);
std::vector<WindowMetrics> metrics_from_csv(const std::string& csv);

nlohmann::ordered_json summary_to_json(const Scenario& scenario,
                                       const SimResult& result, bool ablated);

}  // namespace fbmesh
