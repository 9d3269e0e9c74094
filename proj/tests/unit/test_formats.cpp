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

#include <filesystem>

#include "fbmesh/formats.hpp"

using namespace fbmesh;
using nlohmann::json;

namespace {

std::filesystem::path temp_dir() {
  static int counter = 0;
  const auto dir = std::filesystem::temp_directory_path() /
                   ("fbmesh_formats_" + std::to_string(++counter));
  std::filesystem::create_directories(dir);
  return dir;
}

VariantCatalog sample_catalog() {
  const Universe u = parse_universe("A,B,C");
  QualityMap q;
  for (uint64_t m = 0; m < 8; ++m) {
    q[m] = 0.26 + 0.04500000000000001 * static_cast<double>(m);
  }
  return enumerate_catalog(u, q);
}

}  // namespace

TEST_CASE("catalog files round-trip losslessly") {
  const VariantCatalog catalog = sample_catalog();
  const auto path = (temp_dir() / "catalog.json").string();
  save_catalog(catalog, path);
  const VariantCatalog loaded = load_catalog(path);

  REQUIRE(loaded.variants().size() == catalog.variants().size());
  CHECK(loaded.universe() == catalog.universe());
  for (size_t i = 0; i < catalog.variants().size(); ++i) {
    const ModelVariant& a = catalog.variants()[i];
    const ModelVariant& b = loaded.variants()[i];
    CHECK(a.variant_id == b.variant_id);
    CHECK(a.required_groups == b.required_groups);
    CHECK(a.quality.value() == b.quality.value());  // bit-exact
    CHECK(a.tier == b.tier);
  }

  // A second save writes identical bytes.
  const auto path2 = (temp_dir() / "catalog2.json").string();
  save_catalog(loaded, path2);
  CHECK(read_file(path) == read_file(path2));
}

TEST_CASE("catalog json rejects malformed input") {
  CHECK_THROWS_AS(catalog_from_json(json::parse(R"({"universe":"A,B"})")),
                  ConfigError);
  CHECK_THROWS_AS(
      catalog_from_json(json::parse(
          R"({"universe":"A","variants":[{"id":"main","groups":"A","quality":2.0,"tier":"Main"}]})")),
      std::invalid_argument);
  CHECK_THROWS_AS(load_catalog("/nonexistent/catalog.json"), ConfigError);
}

TEST_CASE("quality and weights files parse against the universe") {
  const Universe u = parse_universe("A,B");
  const QualityMap q = quality_map_from_json(
      json::parse(R"({"A,B":0.6,"A":0.4,"B":0.3,"":0.1})"), u);
  CHECK(q.at(0b11) == 0.6);
  CHECK(q.at(0b00) == 0.1);

  CHECK_THROWS_AS(
      quality_map_from_json(json::parse(R"({"Z":0.5})"), u),
      std::invalid_argument);

  const ScenarioWeights w =
      weights_from_json(json::parse(R"({"A":0.7,"A,B":0.3})"), u);
  CHECK(w.weight_by_mask.at(0b01) == 0.7);
  CHECK_THROWS_AS(weights_from_json(json::parse(R"({"A":-1.0})"), u),
                  std::invalid_argument);
  CHECK_THROWS_AS(weights_from_json(json::parse(R"({"A":0.0})"), u),
                  std::invalid_argument);
}

TEST_CASE("policy block parses with defaults and names bad fields") {
  const RetryPolicy p = policy_from_json(
      json::parse(R"({"sla_budget_ms":300,"attempt_timeout_ms":100})"));
  CHECK(p.sla_budget_ms == 300);
  CHECK(p.reserve_ms == 0);
  CHECK(p.lambda == 0.01);
  CHECK(p.amount_cap == 100000);

  CHECK_THROWS_WITH_AS(policy_from_json(json::parse(R"({})")),
                       "policy.sla_budget_ms: missing", ConfigError);
  CHECK_THROWS_AS(policy_from_json(json::parse(
                      R"({"sla_budget_ms":100,"attempt_timeout_ms":10,"reserve_ms":100})")),
                  ConfigError);

  const RetryPolicy q = policy_from_json(policy_to_json(p));
  CHECK(q.sla_budget_ms == p.sla_budget_ms);
  CHECK(q.lambda == p.lambda);
}

TEST_CASE("latency model block parses all kinds") {
  const LatencyModel constant =
      latency_model_from_json(json::parse(R"({"kind":"constant","ms":40})"));
  CHECK(constant.kind == LatencyModel::Kind::Constant);
  CHECK(constant.constant_ms == 40.0);

  const LatencyModel lognormal = latency_model_from_json(
      json::parse(R"({"kind":"lognormal","location":3.7,"scale":0.3,"failure_prob":0.1})"));
  CHECK(lognormal.kind == LatencyModel::Kind::Lognormal);
  CHECK(lognormal.failure_prob == 0.1);

  const LatencyModel injected = latency_model_from_json(
      json::parse(R"({"kind":"injected","values_ms":[10,20,30]})"));
  CHECK(injected.injected_ms.size() == 3);

  CHECK_THROWS_AS(latency_model_from_json(json::parse(R"({"kind":"uniform"})")),
                  ConfigError);
  CHECK_THROWS_WITH_AS(
      latency_model_from_json(json::parse(R"({"kind":"constant"})")),
      "latency.ms: missing", ConfigError);

  for (const LatencyModel& m : {constant, lognormal, injected}) {
    const LatencyModel back = latency_model_from_json(latency_model_to_json(m));
    CHECK(back.kind == m.kind);
    CHECK(back.failure_prob == m.failure_prob);
  }
}

TEST_CASE("schema block parses field specs") {
  const PayloadSchema schema = schema_from_json(json::parse(R"({
    "max_null_ratio": 0.5,
    "groups": {
      "A": [{"name":"balance","kind":"number","lo":0,"hi":100},
            {"name":"bank","kind":"text"},
            {"name":"verified","kind":"flag"}]
    }
  })"));
  CHECK(schema.max_null_ratio == 0.5);
  REQUIRE(schema.covers("A"));
  CHECK(schema.groups.at("A").size() == 3);
  CHECK(schema.groups.at("A")[0].kind == FieldKind::Number);

  CHECK_THROWS_AS(schema_from_json(json::parse(R"({"max_null_ratio": 1.5})")),
                  ConfigError);
}

TEST_CASE("scenario files load with a referenced catalog") {
  const auto dir = temp_dir();
  save_catalog(sample_catalog(), (dir / "catalog.json").string());
  const std::string scenario_text = R"({
    "schema_version": 1,
    "seed": 7,
    "duration_ms": 10000,
    "metrics_window_ms": 5000,
    "arrivals": {"base_rate_per_sec": 20.0,
                 "bursts": [{"start_ms": 2000, "end_ms": 4000, "rate_multiplier": 3.0}]},
    "amounts": {"log_location": 8.0, "log_scale": 1.0},
    "catalog_file": "catalog.json",
    "policy": {"sla_budget_ms": 300, "attempt_timeout_ms": 100},
    "latency": {"default": {"kind": "constant", "ms": 25},
                "main": {"kind": "lognormal", "location": 3.7, "scale": 0.2}},
    "outages": [{"target": "group:B", "start_ms": 0, "end_ms": 5000, "mode": "Unavailable"},
                {"target": "variant:main", "start_ms": 1000, "end_ms": 2000,
                 "mode": "LatencySpike", "multiplier": 4.0}]
  })";
  write_file((dir / "scenario.json").string(), scenario_text);

  const Scenario s = load_scenario((dir / "scenario.json").string());
  CHECK(s.seed == 7);
  CHECK(s.duration_ms == 10000);
  CHECK(s.arrivals.bursts.size() == 1);
  CHECK(s.catalog->variants().size() == 8);
  CHECK(s.latency_by_variant.count("main") == 1);
  CHECK(s.default_latency.constant_ms == 25.0);
  REQUIRE(s.outages.size() == 2);
  CHECK(s.outages[0].target_kind == OutageWindow::Target::Group);
  CHECK(s.outages[1].multiplier == 4.0);

  // Smoke: the loaded scenario runs.
  const SimResult result = run_scenario(s);
  CHECK(result.report.totals.request_count > 0);
}

TEST_CASE("scenario loader reports the offending field") {
  const auto dir = temp_dir();
  save_catalog(sample_catalog(), (dir / "catalog.json").string());
  write_file((dir / "bad.json").string(),
             R"({"duration_ms": 1000, "catalog_file": "catalog.json",
                 "policy": {"sla_budget_ms":300,"attempt_timeout_ms":100}})");
  CHECK_THROWS_WITH_AS(load_scenario((dir / "bad.json").string()),
                       "scenario.arrivals: missing", ConfigError);

  write_file((dir / "notjson.json").string(), "{nope");
  CHECK_THROWS_AS(load_scenario((dir / "notjson.json").string()), ConfigError);
}

TEST_CASE("outcome json carries the documented fields in order") {
  RoutingOutcome outcome;
  outcome.request_id = "r1";
  outcome.score = 0.75;
  outcome.variant_id = "main";
  outcome.tier = Tier::Main;
  outcome.attempts.push_back({"main", 100, 140, AttemptResult::Ok});
  outcome.total_elapsed_ms = 40;
  outcome.hedged = false;

  const std::string line = outcome_to_json(outcome).dump();
  CHECK(line ==
        R"({"request_id":"r1","score":0.75,"tier":"Main","variant":"main",)"
        R"("attempts":[{"variant":"main","start_ms":100,"end_ms":140,"result":"Ok"}],)"
        R"("elapsed_ms":40,"hedged":false})");

  RoutingOutcome missed;
  missed.request_id = "r2";
  missed.attempts.push_back({"main", 0, 100, AttemptResult::Timeout});
  missed.total_elapsed_ms = 100;
  const auto j = outcome_to_json(missed);
  CHECK(j.at("score").is_null());
  CHECK(j.at("tier").is_null());
  CHECK(j.at("variant").is_null());
}

TEST_CASE("metrics csv renders and parses") {
  MetricsReport report;
  report.window_ms = 300000;
  WindowMetrics w;
  w.window_start_ms = 0;
  w.request_count = 25;
  w.p99_latency_ms = 120.0;
  w.timeout_rate = 0.04;
  w.frac_main = 0.92;
  w.frac_fallback = 0.08;
  w.frac_clientside = 0.0;
  w.weighted_quality = 0.6168;
  w.sla_miss_rate = 0.0;
  report.windows.push_back(w);
  WindowMetrics empty;
  empty.window_start_ms = 300000;
  report.windows.push_back(empty);

  const std::string csv = metrics_to_csv(report);
  CHECK(csv.substr(0, csv.find('\n')) == kMetricsCsvHeader);
  CHECK(csv ==
        "window_start_ms,request_count,p99_latency_ms,timeout_rate,frac_main,"
        "frac_fallback,frac_clientside,weighted_quality,sla_miss_rate\n"
        "0,25,120,0.04,0.92,0.08,0,0.6168,0\n"
        "300000,0,0,0,0,0,0,0,0\n");

  const auto rows = metrics_from_csv(csv);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].request_count == 25);
  CHECK(rows[0].weighted_quality == 0.6168);
  CHECK(rows[1].request_count == 0);

  CHECK_THROWS_AS(metrics_from_csv("bogus\n1,2,3\n"), ConfigError);
  CHECK_THROWS_AS(metrics_from_csv(""), ConfigError);
}

TEST_CASE("summary json carries run totals") {
  Scenario s;
  s.seed = 5;
  s.duration_ms = 1000;
  SimResult result;
  result.report.totals.request_count = 10;
  result.report.totals.scored = 10;
  result.report.totals.weighted_quality = 0.5;
  const auto j = summary_to_json(s, result, false);
  CHECK(j.at("seed") == 5);
  CHECK(j.at("request_count") == 10);
  CHECK(j.at("ablate_fallback") == false);
  CHECK(j.at("weighted_quality") == 0.5);
}
