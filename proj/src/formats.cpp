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

#include "fbmesh/formats.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fbmesh {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

const json& require_field(const json& j, const std::string& key,
                          const std::string& context) {
  if (!j.is_object() || !j.contains(key)) {
    throw ConfigError(context + "." + key + ": missing");
  }
  return j.at(key);
}

template <typename T>
T field_as(const json& j, const std::string& key, const std::string& context) {
  try {
    return require_field(j, key, context).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(context + "." + key + ": wrong type");
  }
}

template <typename T>
T field_or(const json& j, const std::string& key, const std::string& context,
           T fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(context + "." + key + ": wrong type");
  }
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ConfigError("cannot open '" + path + "'");
  }
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw ConfigError("cannot write '" + path + "'");
  }
  out << content;
  if (!out) {
    throw ConfigError("short write to '" + path + "'");
  }
}

nlohmann::ordered_json catalog_to_json(const VariantCatalog& catalog) {
  ordered_json j;
  j["schema_version"] = 1;
  std::vector<std::string> ids = catalog.universe().ids();
  std::string universe_text;
  for (size_t i = 0; i < ids.size(); ++i) {
    if (i != 0) universe_text += ',';
    universe_text += ids[i];
  }
  j["universe"] = universe_text;
  ordered_json variants = ordered_json::array();
  for (const ModelVariant& v : catalog.variants()) {
    ordered_json entry;
    entry["id"] = v.variant_id;
    entry["groups"] = format_group_set(v.required_groups, catalog.universe());
    entry["quality"] = v.quality.value();
    entry["tier"] = tier_name(v.tier);
    variants.push_back(entry);
  }
  j["variants"] = variants;
  return j;
}

VariantCatalog catalog_from_json(const json& j) {
  const Universe universe =
      parse_universe(field_as<std::string>(j, "universe", "catalog"));
  const json& variants = require_field(j, "variants", "catalog");
  if (!variants.is_array()) {
    throw ConfigError("catalog.variants: must be an array");
  }
  std::vector<ModelVariant> out;
  for (const json& entry : variants) {
    ModelVariant v;
    v.variant_id = field_as<std::string>(entry, "id", "catalog.variant");
    v.required_groups = parse_group_set(
        field_as<std::string>(entry, "groups", "catalog.variant"), universe);
    v.quality =
        QualityScore(field_as<double>(entry, "quality", "catalog.variant"));
    v.tier = parse_tier(field_as<std::string>(entry, "tier", "catalog.variant"));
    out.push_back(std::move(v));
  }
  return VariantCatalog(universe, std::move(out));
}

void save_catalog(const VariantCatalog& catalog, const std::string& path) {
  write_file(path, catalog_to_json(catalog).dump(2) + "\n");
}

VariantCatalog load_catalog(const std::string& path) {
  try {
    return catalog_from_json(json::parse(read_file(path)));
  } catch (const json::exception& e) {
    throw ConfigError("catalog file '" + path + "': " + e.what());
  }
}

QualityMap quality_map_from_json(const json& j, const Universe& universe) {
  if (!j.is_object()) {
    throw ConfigError("quality file: must be an object of set -> value");
  }
  QualityMap map;
  for (const auto& [key, value] : j.items()) {
    if (!value.is_number()) {
      throw ConfigError("quality['" + key + "']: must be a number");
    }
    map[parse_group_set(key, universe).mask()] = value.get<double>();
  }
  return map;
}

QualityMap load_quality_map(const std::string& path, const Universe& universe) {
  try {
    return quality_map_from_json(json::parse(read_file(path)), universe);
  } catch (const json::exception& e) {
    throw ConfigError("quality file '" + path + "': " + e.what());
  }
}

ScenarioWeights weights_from_json(const json& j, const Universe& universe) {
  if (!j.is_object()) {
    throw ConfigError("weights file: must be an object of set -> weight");
  }
  ScenarioWeights weights;
  weights.universe_size = universe.size();
  for (const auto& [key, value] : j.items()) {
    if (!value.is_number()) {
      throw ConfigError("weights['" + key + "']: must be a number");
    }
    weights.set(parse_group_set(key, universe), value.get<double>());
  }
  weights.validate();
  return weights;
}

ScenarioWeights load_weights(const std::string& path,
                             const Universe& universe) {
  try {
    return weights_from_json(json::parse(read_file(path)), universe);
  } catch (const json::exception& e) {
    throw ConfigError("weights file '" + path + "': " + e.what());
  }
}

RetryPolicy policy_from_json(const json& j) {
  RetryPolicy p;
  p.sla_budget_ms = field_as<int64_t>(j, "sla_budget_ms", "policy");
  p.attempt_timeout_ms = field_as<int64_t>(j, "attempt_timeout_ms", "policy");
  p.reserve_ms = field_or<int64_t>(j, "reserve_ms", "policy", 0);
  p.lambda = field_or<double>(j, "lambda", "policy", 0.01);
  p.hedge_value_threshold =
      field_or<int64_t>(j, "hedge_value_threshold", "policy", 10000);
  p.failure_prob_window =
      field_or<int>(j, "failure_prob_window", "policy", 50);
  p.amount_cap = field_or<int64_t>(j, "amount_cap", "policy", 100000);
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return p;
}

nlohmann::ordered_json policy_to_json(const RetryPolicy& policy) {
  ordered_json j;
  j["sla_budget_ms"] = policy.sla_budget_ms;
  j["attempt_timeout_ms"] = policy.attempt_timeout_ms;
  j["reserve_ms"] = policy.reserve_ms;
  j["lambda"] = policy.lambda;
  j["hedge_value_threshold"] = policy.hedge_value_threshold;
  j["failure_prob_window"] = policy.failure_prob_window;
  j["amount_cap"] = policy.amount_cap;
  return j;
}

BreakerConfig breaker_from_json(const json& j) {
  BreakerConfig b;
  b.failure_threshold = field_or<int>(j, "failure_threshold", "breaker", 5);
  b.cooldown_ms = field_or<int64_t>(j, "cooldown_ms", "breaker", 30000);
  b.close_after = field_or<int>(j, "close_after", "breaker", 2);
  try {
    b.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return b;
}

LatencyModel latency_model_from_json(const json& j) {
  const std::string kind = field_as<std::string>(j, "kind", "latency");
  LatencyModel m;
  if (kind == "constant") {
    m = LatencyModel::constant(field_as<double>(j, "ms", "latency"),
                               field_or<double>(j, "failure_prob", "latency", 0.0));
  } else if (kind == "lognormal") {
    m = LatencyModel::lognormal(
        field_as<double>(j, "location", "latency"),
        field_as<double>(j, "scale", "latency"),
        field_or<double>(j, "failure_prob", "latency", 0.0));
  } else if (kind == "injected") {
    m = LatencyModel::injected(
        field_as<std::vector<double>>(j, "values_ms", "latency"),
        field_or<double>(j, "failure_prob", "latency", 0.0));
  } else {
    throw ConfigError("latency.kind: unknown kind '" + kind + "'");
  }
  return m;
}

nlohmann::ordered_json latency_model_to_json(const LatencyModel& model) {
  ordered_json j;
  switch (model.kind) {
    case LatencyModel::Kind::Constant:
      j["kind"] = "constant";
      j["ms"] = model.constant_ms;
      break;
    case LatencyModel::Kind::Lognormal:
      j["kind"] = "lognormal";
      j["location"] = model.log_location;
      j["scale"] = model.log_scale;
      break;
    case LatencyModel::Kind::Injected:
      j["kind"] = "injected";
      j["values_ms"] = model.injected_ms;
      break;
  }
  j["failure_prob"] = model.failure_prob;
  return j;
}

PayloadSchema schema_from_json(const json& j) {
  PayloadSchema schema;
  schema.max_null_ratio =
      field_or<double>(j, "max_null_ratio", "schema", 0.2);
  if (j.contains("groups")) {
    const json& groups = j.at("groups");
    if (!groups.is_object()) {
      throw ConfigError("schema.groups: must be an object");
    }
    for (const auto& [group_id, fields] : groups.items()) {
      if (!fields.is_array()) {
        throw ConfigError("schema.groups." + group_id + ": must be an array");
      }
      std::vector<FieldSpec> specs;
      for (const json& f : fields) {
        FieldSpec spec;
        spec.name = field_as<std::string>(f, "name", "schema field");
        spec.kind =
            parse_field_kind(field_as<std::string>(f, "kind", "schema field"));
        if (spec.kind == FieldKind::Number) {
          spec.lo = field_as<double>(f, "lo", "schema field");
          spec.hi = field_as<double>(f, "hi", "schema field");
        }
        specs.push_back(std::move(spec));
      }
      schema.groups[group_id] = std::move(specs);
    }
  }
  try {
    schema.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return schema;
}

Scenario scenario_from_json(const json& j, const std::string& base_dir) {
  Scenario s;
  s.seed = field_or<uint64_t>(j, "seed", "scenario", 0);
  s.duration_ms = field_as<int64_t>(j, "duration_ms", "scenario");
  s.metrics_window_ms =
      field_or<int64_t>(j, "metrics_window_ms", "scenario", 300000);

  const json& arrivals = require_field(j, "arrivals", "scenario");
  s.arrivals.base_rate_per_sec =
      field_as<double>(arrivals, "base_rate_per_sec", "scenario.arrivals");
  if (arrivals.contains("bursts")) {
    for (const json& b : arrivals.at("bursts")) {
      BurstWindow w;
      w.start_ms = field_as<int64_t>(b, "start_ms", "scenario.burst");
      w.end_ms = field_as<int64_t>(b, "end_ms", "scenario.burst");
      w.rate_multiplier =
          field_as<double>(b, "rate_multiplier", "scenario.burst");
      s.arrivals.bursts.push_back(w);
    }
  }

  if (j.contains("amounts")) {
    const json& amounts = j.at("amounts");
    s.amounts.log_location =
        field_as<double>(amounts, "log_location", "scenario.amounts");
    s.amounts.log_scale =
        field_as<double>(amounts, "log_scale", "scenario.amounts");
  }

  const std::string catalog_path =
      field_as<std::string>(j, "catalog_file", "scenario");
  std::filesystem::path resolved(catalog_path);
  if (resolved.is_relative() && !base_dir.empty()) {
    resolved = std::filesystem::path(base_dir) / resolved;
  }
  s.catalog =
      std::make_shared<VariantCatalog>(load_catalog(resolved.string()));

  s.policy = policy_from_json(require_field(j, "policy", "scenario"));
  if (j.contains("breaker")) {
    s.breaker = breaker_from_json(j.at("breaker"));
  }

  if (j.contains("latency")) {
    const json& latency = j.at("latency");
    if (!latency.is_object()) {
      throw ConfigError("scenario.latency: must be an object");
    }
    for (const auto& [variant_id, model] : latency.items()) {
      if (variant_id == "default") {
        s.default_latency = latency_model_from_json(model);
      } else {
        s.latency_by_variant[variant_id] = latency_model_from_json(model);
      }
    }
  }

  if (j.contains("outages")) {
    for (const json& o : j.at("outages")) {
      OutageWindow w;
      const std::string target =
          field_as<std::string>(o, "target", "scenario.outage");
      const size_t colon = target.find(':');
      if (colon == std::string::npos) {
        throw ConfigError(
            "scenario.outage.target: expected 'group:<id>' or 'variant:<id>'");
      }
      const std::string kind = target.substr(0, colon);
      w.target = target.substr(colon + 1);
      if (kind == "group") {
        w.target_kind = OutageWindow::Target::Group;
      } else if (kind == "variant") {
        w.target_kind = OutageWindow::Target::Variant;
      } else {
        throw ConfigError("scenario.outage.target: unknown kind '" + kind +
                          "'");
      }
      w.start_ms = field_as<int64_t>(o, "start_ms", "scenario.outage");
      w.end_ms = field_as<int64_t>(o, "end_ms", "scenario.outage");
      w.mode = parse_outage_mode(
          field_as<std::string>(o, "mode", "scenario.outage"));
      w.multiplier = field_or<double>(o, "multiplier", "scenario.outage", 1.0);
      s.outages.push_back(std::move(w));
    }
  }

  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return s;
}

Scenario load_scenario(const std::string& path) {
  try {
    const std::string base_dir =
        std::filesystem::path(path).parent_path().string();
    return scenario_from_json(json::parse(read_file(path)), base_dir);
  } catch (const json::exception& e) {
    throw ConfigError("scenario file '" + path + "': " + e.what());
  }
}

nlohmann::ordered_json outcome_to_json(const RoutingOutcome& outcome) {
  ordered_json j;
  j["request_id"] = outcome.request_id;
  if (outcome.score.has_value()) {
    j["score"] = *outcome.score;
    j["tier"] = tier_name(*outcome.tier);
    j["variant"] = outcome.variant_id;
  } else {
    j["score"] = nullptr;
    j["tier"] = nullptr;
    j["variant"] = nullptr;
  }
  ordered_json attempts = ordered_json::array();
  for (const Attempt& a : outcome.attempts) {
    ordered_json entry;
    entry["variant"] = a.variant_id;
    entry["start_ms"] = a.start_ms;
    entry["end_ms"] = a.end_ms;
    entry["result"] = attempt_result_name(a.result);
    attempts.push_back(entry);
  }
  j["attempts"] = attempts;
  j["elapsed_ms"] = outcome.total_elapsed_ms;
  j["hedged"] = outcome.hedged;
  return j;
}

std::string outcomes_to_jsonl(const std::vector<RoutingOutcome>& outcomes) {
  std::string out;
  for (const RoutingOutcome& o : outcomes) {
    out += outcome_to_json(o).dump();
    out += '\n';
  }
  return out;
}

const char* const kMetricsCsvHeader =
    "window_start_ms,request_count,p99_latency_ms,timeout_rate,frac_main,"
    "frac_fallback,frac_clientside,weighted_quality,sla_miss_rate";

std::string metrics_to_csv(const MetricsReport& report) {
  std::string out = kMetricsCsvHeader;
  out += '\n';
  for (const WindowMetrics& w : report.windows) {
    out += std::to_string(w.window_start_ms);
    out += ',';
    out += std::to_string(w.request_count);
    out += ',';
    out += format_double(w.p99_latency_ms);
    out += ',';
    out += format_double(w.timeout_rate);
    out += ',';
    out += format_double(w.frac_main);
    out += ',';
    out += format_double(w.frac_fallback);
    out += ',';
    out += format_double(w.frac_clientside);
    out += ',';
    out += format_double(w.weighted_quality);
    out += ',';
    out += format_double(w.sla_miss_rate);
    out += '\n';
  }
  return out;
}

std::vector<WindowMetrics> metrics_from_csv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line)) {
    throw ConfigError("metrics csv: empty file");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kMetricsCsvHeader) {
    throw ConfigError("metrics csv: unexpected header");
  }
  std::vector<WindowMetrics> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    for (char c : line) {
      if (c == ',') {
        cells.push_back(cell);
        cell.clear();
      } else {
        cell += c;
      }
    }
    cells.push_back(cell);
    if (cells.size() != 9) {
      throw ConfigError("metrics csv: expected 9 columns");
    }
    try {
      WindowMetrics w;
      w.window_start_ms = std::stoll(cells[0]);
      w.request_count = std::stoll(cells[1]);
      w.p99_latency_ms = std::stod(cells[2]);
      w.timeout_rate = std::stod(cells[3]);
      w.frac_main = std::stod(cells[4]);
      w.frac_fallback = std::stod(cells[5]);
      w.frac_clientside = std::stod(cells[6]);
      w.weighted_quality = std::stod(cells[7]);
      w.sla_miss_rate = std::stod(cells[8]);
      rows.push_back(w);
    } catch (const std::exception&) {
      throw ConfigError("metrics csv: malformed row '" + line + "'");
    }
  }
  return rows;
}

nlohmann::ordered_json summary_to_json(const Scenario& scenario,
                                       const SimResult& result, bool ablated) {
  const RunTotals& t = result.report.totals;
  ordered_json j;
  j["schema_version"] = 1;
  j["seed"] = scenario.seed;
  j["duration_ms"] = scenario.duration_ms;
  j["ablate_fallback"] = ablated;
  j["request_count"] = t.request_count;
  j["scored"] = t.scored;
  j["sla_misses"] = t.sla_misses;
  j["sla_miss_rate"] = t.sla_miss_rate;
  j["attempts_total"] = t.attempts_total;
  j["timeouts_total"] = t.timeouts_total;
  j["hedges_total"] = t.hedges_total;
  j["count_main"] = t.count_main;
  j["count_fallback"] = t.count_fallback;
  j["count_clientside"] = t.count_clientside;
  j["frac_main"] = t.frac_main;
  j["frac_fallback"] = t.frac_fallback;
  j["frac_clientside"] = t.frac_clientside;
  j["weighted_quality"] = t.weighted_quality;
  j["p99_latency_ms"] = t.p99_latency_ms;
  j["max_elapsed_ms"] = t.max_elapsed_ms;
  return j;
}

}  // namespace fbmesh
