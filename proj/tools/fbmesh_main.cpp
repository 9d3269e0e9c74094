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

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <set>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "fbmesh/formats.hpp"
#include "fbmesh/gateway.hpp"
#include "fbmesh/planner.hpp"
#include "fbmesh/sim.hpp"

namespace {

using namespace fbmesh;

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

std::atomic<bool> g_stop_requested{false};

void handle_signal(int) { g_stop_requested.store(true); }

void print_catalog_table(const VariantCatalog& original,
                         const VariantCatalog& kept_catalog) {
  std::set<std::string> kept;
  for (const ModelVariant& v : kept_catalog.variants()) {
    kept.insert(v.variant_id);
  }
  const double q_main = original.main().quality.value();
  std::printf("%-16s %-12s %8s %-14s %-8s %10s\n", "variant", "groups",
              "quality", "tier", "status", "gap_vs_main");
  for (const ModelVariant& v : original.variants()) {
    const std::string groups =
        format_group_set(v.required_groups, original.universe());
    double gap = 0.0;
    if (q_main > 0.0) gap = relative_gap(original.main().quality, v.quality);
    std::printf("%-16s %-12s %8.4f %-14s %-8s %9.2f%%\n",
                v.variant_id.c_str(), groups.empty() ? "-" : groups.c_str(),
                v.quality.value(), tier_name(v.tier).c_str(),
                kept.count(v.variant_id) ? "kept" : "dropped", gap * 100.0);
  }
}

int run_plan_enumerate(const std::string& universe_text,
                       const std::string& quality_path,
                       const std::string& out_path) {
  const Universe universe = parse_universe(universe_text);
  const QualityMap quality = load_quality_map(quality_path, universe);
  const VariantCatalog catalog = enumerate_catalog(universe, quality);
  print_catalog_table(catalog, catalog);
  save_catalog(catalog, out_path);
  std::printf("wrote %zu variants to %s\n", catalog.variants().size(),
              out_path.c_str());
  return kExitOk;
}

int run_plan_prune(const std::string& universe_text,
                   const std::string& quality_path, double tolerance,
                   const std::string& mode_name, const std::string& out_path) {
  const Universe universe = parse_universe(universe_text);
  const QualityMap quality = load_quality_map(quality_path, universe);
  const VariantCatalog catalog = enumerate_catalog(universe, quality);
  PrunePolicy policy;
  policy.tolerance = tolerance;
  policy.mode = parse_prune_mode(mode_name);
  const VariantCatalog pruned = prune_equivalent(catalog, policy);
  print_catalog_table(catalog, pruned);
  save_catalog(pruned, out_path);
  std::printf("kept %zu of %zu variants (tolerance %g, %s); wrote %s\n",
              pruned.variants().size(), catalog.variants().size(), tolerance,
              prune_mode_name(policy.mode).c_str(), out_path.c_str());
  return kExitOk;
}

int run_plan_cover(const std::string& universe_text,
                   const std::string& quality_path,
                   const std::string& weights_path, int budget,
                   const std::string& out_path) {
  const Universe universe = parse_universe(universe_text);
  const QualityMap quality = load_quality_map(quality_path, universe);
  const VariantCatalog catalog = enumerate_catalog(universe, quality);
  const ScenarioWeights weights = load_weights(weights_path, universe);
  const std::vector<ModelVariant> picks =
      greedy_max_coverage(catalog, weights, budget);

  std::vector<ModelVariant> final_variants;
  final_variants.push_back(catalog.main());
  for (const ModelVariant& v : picks) final_variants.push_back(v);
  final_variants.push_back(catalog.client_side());
  const VariantCatalog selected(catalog.universe(), std::move(final_variants));

  const double base = coverage_objective(catalog, weights, {});
  const double achieved = coverage_objective(catalog, weights, picks);
  print_catalog_table(catalog, selected);
  std::printf("objective: %.6f -> %.6f with %zu picks (budget %d); wrote %s\n",
              base, achieved, picks.size(), budget, out_path.c_str());
  save_catalog(selected, out_path);
  return kExitOk;
}

int run_simulate(const std::string& scenario_path, int64_t seed_override,
                 bool has_seed_override, const std::string& out_dir,
                 bool ablate_fallback) {
  Scenario scenario = load_scenario(scenario_path);
  if (has_seed_override) scenario.seed = static_cast<uint64_t>(seed_override);
  SimOptions options;
  options.ablate_fallback = ablate_fallback;
  const SimResult result = run_scenario(scenario, options);

  std::filesystem::create_directories(out_dir);
  const std::filesystem::path dir(out_dir);
  write_file((dir / "metrics.csv").string(), metrics_to_csv(result.report));
  write_file((dir / "outcomes.jsonl").string(),
             outcomes_to_jsonl(result.outcomes));
  write_file((dir / "summary.json").string(),
             summary_to_json(scenario, result, ablate_fallback).dump(2) + "\n");

  const RunTotals& t = result.report.totals;
  std::printf(
      "simulated %lld requests (seed %llu): tier mix %.3f/%.3f/%.3f, "
      "p99 %.0f ms, sla_miss_rate %.6f\n",
      static_cast<long long>(t.request_count),
      static_cast<unsigned long long>(scenario.seed), t.frac_main,
      t.frac_fallback, t.frac_clientside, t.p99_latency_ms, t.sla_miss_rate);
  return kExitOk;
}

int run_serve(const std::string& config_path) {
  std::string path = config_path;
  if (path.empty()) {
    const char* env = std::getenv("FBMESH_CONFIG");
    if (env != nullptr) path = env;
  }
  if (path.empty()) {
    throw ConfigError("no config: pass --config or set FBMESH_CONFIG");
  }
  Gateway gateway(load_gateway_config(path));
  std::signal(SIGINT, handle_signal);
  std::signal(SIGTERM, handle_signal);
  const int port = gateway.start();
  std::printf("listening on port %d\n", port);
  std::fflush(stdout);
  while (!g_stop_requested.load()) {
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
  }
  gateway.stop();
  return kExitOk;
}

int run_report(const std::string& in_path) {
  const std::vector<WindowMetrics> rows = metrics_from_csv(read_file(in_path));
  std::printf("%15s %9s %8s %8s %9s %9s %9s %9s %9s\n", "window_start_ms",
              "requests", "p99_ms", "timeout", "frac_main", "frac_fb",
              "frac_cs", "quality", "sla_miss");
  int64_t total_requests = 0;
  double weighted_timeout = 0, weighted_miss = 0, weighted_quality = 0;
  double weighted_main = 0, weighted_fb = 0, weighted_cs = 0;
  double max_p99 = 0;
  for (const WindowMetrics& w : rows) {
    std::printf("%15lld %9lld %8.9g %8.9g %9.9g %9.9g %9.9g %9.9g %9.9g\n",
                static_cast<long long>(w.window_start_ms),
                static_cast<long long>(w.request_count), w.p99_latency_ms,
                w.timeout_rate, w.frac_main, w.frac_fallback,
                w.frac_clientside, w.weighted_quality, w.sla_miss_rate);
    const double n = static_cast<double>(w.request_count);
    total_requests += w.request_count;
    weighted_timeout += w.timeout_rate * n;
    weighted_miss += w.sla_miss_rate * n;
    weighted_quality += w.weighted_quality * n;
    weighted_main += w.frac_main * n;
    weighted_fb += w.frac_fallback * n;
    weighted_cs += w.frac_clientside * n;
    max_p99 = std::max(max_p99, w.p99_latency_ms);
  }
  if (total_requests > 0) {
    const double n = static_cast<double>(total_requests);
    std::printf("%15s %9lld %8.9g %8.9g %9.9g %9.9g %9.9g %9.9g %9.9g\n",
                "totals", static_cast<long long>(total_requests), max_p99,
                weighted_timeout / n, weighted_main / n, weighted_fb / n,
                weighted_cs / n, weighted_quality / n, weighted_miss / n);
  } else {
    std::printf("%15s %9d\n", "totals", 0);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fbmesh: fallback-aware model routing planner, simulator, and gateway"};
  app.require_subcommand(1);

  // plan
  auto* plan = app.add_subcommand("plan", "build and shape a fallback catalog");
  plan->require_subcommand(1);
  std::string universe_text, quality_path, weights_path, out_path;
  double tolerance = 0.0;
  std::string mode_name = "Relative";
  int budget = 0;

  auto* enumerate =
      plan->add_subcommand("enumerate", "emit the full variant catalog");
  enumerate->add_option("--universe", universe_text, "group ids, e.g. A,B,C")
      ->required();
  enumerate->add_option("--quality-file", quality_path,
                        "json map of group set -> quality")
      ->required();
  enumerate->add_option("--out", out_path, "catalog output path")->required();

  auto* prune = plan->add_subcommand(
      "prune", "drop variants matched by smaller ones within a tolerance");
  prune->add_option("--universe", universe_text, "group ids")->required();
  prune->add_option("--quality-file", quality_path, "quality map")->required();
  prune->add_option("--tolerance", tolerance, "equivalence tolerance")
      ->required();
  prune->add_option("--mode", mode_name, "Relative or Absolute")
      ->capture_default_str();
  prune->add_option("--out", out_path, "catalog output path")->required();

  auto* cover = plan->add_subcommand(
      "cover", "greedy maximum-coverage selection under a budget");
  cover->add_option("--universe", universe_text, "group ids")->required();
  cover->add_option("--quality-file", quality_path, "quality map")->required();
  cover->add_option("--weights-file", weights_path,
                    "json map of healthy set -> weight")
      ->required();
  cover->add_option("--budget", budget, "max fallbacks to keep")->required();
  cover->add_option("--out", out_path, "catalog output path")->required();

  // simulate
  auto* simulate =
      app.add_subcommand("simulate", "run a fault-injection simulation");
  std::string scenario_path, out_dir;
  int64_t seed_override = 0;
  bool ablate_fallback = false;
  simulate->add_option("--scenario", scenario_path, "scenario json")
      ->required();
  auto* seed_opt =
      simulate->add_option("--seed", seed_override, "override scenario seed");
  simulate->add_option("--out-dir", out_dir, "output directory")->required();
  simulate->add_flag("--ablate-fallback", ablate_fallback,
                     "disable every tier except the main model");

  // serve
  auto* serve = app.add_subcommand("serve", "run the inference gateway");
  std::string config_path;
  serve->add_option("--config", config_path,
                    "gateway config json (default: $FBMESH_CONFIG)");

  // report
  auto* report =
      app.add_subcommand("report", "render a metrics.csv as a table");
  std::string in_path;
  report->add_option("--in", in_path, "metrics.csv path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (enumerate->parsed()) {
      return run_plan_enumerate(universe_text, quality_path, out_path);
    }
    if (prune->parsed()) {
      return run_plan_prune(universe_text, quality_path, tolerance, mode_name,
                            out_path);
    }
    if (cover->parsed()) {
      return run_plan_cover(universe_text, quality_path, weights_path, budget,
                            out_path);
    }
    if (simulate->parsed()) {
      return run_simulate(scenario_path, seed_override, seed_opt->count() > 0,
                          out_dir, ablate_fallback);
    }
    if (serve->parsed()) {
      return run_serve(config_path);
    }
    if (report->parsed()) {
      return run_report(in_path);
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const nlohmann::json::exception& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitOk;
}
