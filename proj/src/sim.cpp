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

#include "fbmesh/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <stdexcept>

namespace fbmesh {

std::string outage_mode_name(OutageMode mode) {
  switch (mode) {
    case OutageMode::Unavailable: return "Unavailable";
    case OutageMode::Corrupted: return "Corrupted";
    case OutageMode::BackendDown: return "BackendDown";
    case OutageMode::LatencySpike: return "LatencySpike";
  }
  throw std::logic_error("unreachable");
}

OutageMode parse_outage_mode(const std::string& name) {
  if (name == "Unavailable") return OutageMode::Unavailable;
  if (name == "Corrupted") return OutageMode::Corrupted;
  if (name == "BackendDown") return OutageMode::BackendDown;
  if (name == "LatencySpike") return OutageMode::LatencySpike;
  throw std::invalid_argument("unknown outage mode '" + name + "'");
}

void Scenario::validate() const {
  if (duration_ms < 0) {
    throw std::invalid_argument("scenario.duration_ms must be >= 0");
  }
  if (metrics_window_ms <= 0) {
    throw std::invalid_argument("scenario.metrics_window_ms must be > 0");
  }
  if (!(arrivals.base_rate_per_sec > 0.0)) {
    throw std::invalid_argument("scenario.arrivals.base_rate_per_sec must be > 0");
  }
  for (const BurstWindow& b : arrivals.bursts) {
    if (b.start_ms < 0 || b.end_ms < b.start_ms || b.end_ms > duration_ms) {
      throw std::invalid_argument("burst window must lie within the run");
    }
    if (!(b.rate_multiplier > 0.0)) {
      throw std::invalid_argument("burst rate_multiplier must be > 0");
    }
  }
  if (amounts.log_scale < 0.0) {
    throw std::invalid_argument("scenario.amounts.log_scale must be >= 0");
  }
  policy.validate();
  breaker.validate();
  default_latency.validate();
  for (const auto& [id, model] : latency_by_variant) model.validate();
  if (catalog == nullptr) {
    throw std::invalid_argument("scenario has no catalog");
  }
  for (const auto& [id, model] : latency_by_variant) {
    if (catalog->find(id) == nullptr) {
      throw std::invalid_argument("latency model names unknown variant '" + id +
                                  "'");
    }
  }
  for (const OutageWindow& o : outages) {
    if (o.start_ms < 0 || o.end_ms < o.start_ms || o.end_ms > duration_ms) {
      throw std::invalid_argument("outage window must lie within the run");
    }
    if (o.target_kind == OutageWindow::Target::Group) {
      if (!catalog->universe().contains(o.target)) {
        throw std::invalid_argument("outage targets unknown group '" +
                                    o.target + "'");
      }
      if (o.mode != OutageMode::Unavailable && o.mode != OutageMode::Corrupted) {
        throw std::invalid_argument(
            "group outages must use Unavailable or Corrupted");
      }
    } else {
      if (catalog->find(o.target) == nullptr) {
        throw std::invalid_argument("outage targets unknown variant '" +
                                    o.target + "'");
      }
      if (o.mode != OutageMode::BackendDown && o.mode != OutageMode::LatencySpike) {
        throw std::invalid_argument(
            "variant outages must use BackendDown or LatencySpike");
      }
      if (o.mode == OutageMode::LatencySpike && !(o.multiplier > 0.0)) {
        throw std::invalid_argument("latency spike multiplier must be > 0");
      }
    }
  }
}

double percentile_nearest_rank(std::vector<double> samples, double p) {
  if (samples.empty()) {
    throw std::invalid_argument("percentile of an empty sample");
  }
  if (!(p > 0.0 && p <= 100.0)) {
    throw std::invalid_argument("percentile p must be in (0, 100]");
  }
  std::sort(samples.begin(), samples.end());
  const size_t rank = static_cast<size_t>(
      std::ceil(p / 100.0 * static_cast<double>(samples.size())));
  return samples[rank - 1];
}

std::vector<int64_t> generate_arrivals(const ArrivalModel& model,
                                       int64_t duration_ms, uint64_t seed) {
  std::vector<int64_t> arrivals;
  if (duration_ms <= 0) return arrivals;

  // Piecewise-constant rate: cut the run at every burst boundary, then draw
  // exponential gaps per segment. Redrawing at a boundary is exact for a
  // Poisson process (memorylessness).
  std::set<int64_t> cuts{0, duration_ms};
  for (const BurstWindow& b : model.bursts) {
    cuts.insert(std::clamp<int64_t>(b.start_ms, 0, duration_ms));
    cuts.insert(std::clamp<int64_t>(b.end_ms, 0, duration_ms));
  }
  RngStream rng(derive_stream(seed, "arrivals"));
  auto it = cuts.begin();
  int64_t seg_start = *it;
  for (++it; it != cuts.end(); ++it) {
    const int64_t seg_end = *it;
    double multiplier = 1.0;
    for (const BurstWindow& b : model.bursts) {
      if (b.start_ms <= seg_start && seg_end <= b.end_ms) {
        multiplier *= b.rate_multiplier;
      }
    }
    const double rate_per_ms = model.base_rate_per_sec * multiplier / 1000.0;
    double t = static_cast<double>(seg_start);
    while (true) {
      t += rng.next_exponential(rate_per_ms);
      if (t >= static_cast<double>(seg_end)) break;
      arrivals.push_back(static_cast<int64_t>(t));
    }
    seg_start = seg_end;
  }
  return arrivals;
}

SimBackend::SimBackend(SimClock& clock, uint64_t seed,
                       std::map<std::string, LatencyModel> latency_by_variant,
                       LatencyModel default_latency,
                       std::vector<OutageWindow> outages)
    : clock_(clock),
      latency_seed_(derive_stream(seed, "latency")),
      score_seed_(derive_stream(seed, "score")),
      latency_by_variant_(std::move(latency_by_variant)),
      default_latency_(std::move(default_latency)),
      outages_(std::move(outages)) {}

void SimBackend::begin_request(uint64_t request_seq) {
  request_seq_ = request_seq;
  calls_this_request_.clear();
}

const LatencyModel& SimBackend::model_for(const std::string& variant_id) const {
  auto it = latency_by_variant_.find(variant_id);
  return it != latency_by_variant_.end() ? it->second : default_latency_;
}

SimBackend::PlannedCall SimBackend::plan_call(const std::string& variant_id,
                                              int64_t timeout_ms) {
  PlannedCall call;
  call.start_ms = clock_.now_ms();
  const uint64_t call_index = calls_this_request_[variant_id]++;

  for (const OutageWindow& o : outages_) {
    if (o.target_kind == OutageWindow::Target::Variant &&
        o.mode == OutageMode::BackendDown && o.target == variant_id &&
        o.active_at(call.start_ms)) {
      // Down backends fail fast, like a refused connection.
      call.result = AttemptResult::Failure;
      call.end_ms = call.start_ms;
      return call;
    }
  }

  RngStream draw(derive_stream(
      derive_stream(derive_stream(latency_seed_, variant_id), request_seq_),
      call_index));
  const LatencyModel& model = model_for(variant_id);
  double latency = model.sample_ms(draw, call_index);
  for (const OutageWindow& o : outages_) {
    if (o.target_kind == OutageWindow::Target::Variant &&
        o.mode == OutageMode::LatencySpike && o.target == variant_id &&
        o.active_at(call.start_ms)) {
      latency *= o.multiplier;
    }
  }
  const int64_t latency_ms = std::max<int64_t>(0, std::llround(latency));

  if (latency_ms >= timeout_ms) {
    call.result = AttemptResult::Timeout;
    call.end_ms = call.start_ms + timeout_ms;
    return call;
  }
  call.end_ms = call.start_ms + latency_ms;
  if (draw.next_unit() < model.failure_prob) {
    call.result = AttemptResult::Failure;
    return call;
  }
  call.result = AttemptResult::Ok;
  // The model's answer for this request: stable across retries.
  RngStream score_draw(derive_stream(
      derive_stream(score_seed_, variant_id), request_seq_));
  call.score = score_draw.next_unit();
  return call;
}

namespace {
class SimPendingScore : public PendingScore {
 public:
  SimPendingScore(SimClock& clock, std::string variant_id,
                  AttemptResult result, double score, int64_t start_ms,
                  int64_t end_ms)
      : clock_(clock),
        variant_id_(std::move(variant_id)),
        result_(result),
        score_(score),
        start_ms_(start_ms),
        end_ms_(end_ms) {}

  Resolved await_until(int64_t deadline_ms) override {
    if (end_ms_ <= deadline_ms) {
      clock_.advance_to(end_ms_);
      return {result_, score_, start_ms_, end_ms_};
    }
    clock_.advance_to(deadline_ms);
    return {AttemptResult::Timeout, 0.0, start_ms_, deadline_ms};
  }

  const std::string& variant_id() const override { return variant_id_; }

 private:
  SimClock& clock_;
  std::string variant_id_;
  AttemptResult result_;
  double score_;
  int64_t start_ms_;
  int64_t end_ms_;
};
}  // namespace

Backend::Reply SimBackend::invoke(const std::string& variant_id,
                                  const Request& request, int64_t timeout_ms) {
  (void)request;
  const PlannedCall call = plan_call(variant_id, timeout_ms);
  clock_.advance_to(call.end_ms);
  return {call.result, call.score};
}

std::unique_ptr<PendingScore> SimBackend::dispatch(
    const std::string& variant_id, const Request& request, int64_t timeout_ms) {
  (void)request;
  const PlannedCall call = plan_call(variant_id, timeout_ms);
  // No clock advance: the call runs concurrently with whatever follows.
  return std::make_unique<SimPendingScore>(clock_, variant_id, call.result,
                                           call.score, call.start_ms,
                                           call.end_ms);
}

namespace {

struct FlagEvent {
  int64_t time_ms = 0;
  int priority = 0;  // window ends before window starts at equal times
  std::string group;
  GroupStatus status = GroupStatus::Healthy;
};

std::vector<FlagEvent> build_flag_events(const Scenario& scenario) {
  std::vector<FlagEvent> events;
  for (const OutageWindow& o : scenario.outages) {
    if (o.target_kind != OutageWindow::Target::Group) continue;
    const GroupStatus status = o.mode == OutageMode::Unavailable
                                   ? GroupStatus::Unavailable
                                   : GroupStatus::Corrupted;
    events.push_back({o.start_ms, 1, o.target, status});
    events.push_back({o.end_ms, 0, o.target, GroupStatus::Healthy});
  }
  std::stable_sort(events.begin(), events.end(),
                   [](const FlagEvent& a, const FlagEvent& b) {
                     if (a.time_ms != b.time_ms) return a.time_ms < b.time_ms;
                     return a.priority < b.priority;
                   });
  return events;
}

std::string request_id_for(uint64_t seq) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "r%08llu",
                static_cast<unsigned long long>(seq));
  return buf;
}

struct PerRequest {
  int64_t arrival_ms = 0;
  RoutingOutcome outcome;
};

MetricsReport aggregate(const Scenario& scenario,
                        const std::vector<PerRequest>& records) {
  MetricsReport report;
  report.window_ms = scenario.metrics_window_ms;
  const int64_t window_count =
      scenario.duration_ms == 0
          ? 0
          : (scenario.duration_ms + scenario.metrics_window_ms - 1) /
                scenario.metrics_window_ms;

  struct Bucket {
    std::vector<double> latencies;
    int64_t requests = 0;
    int64_t timeouts = 0;
    int64_t misses = 0;
    int64_t scored = 0;
    int64_t main = 0, fallback = 0, clientside = 0;
    double quality_sum = 0.0;
  };
  std::vector<Bucket> buckets(static_cast<size_t>(window_count));
  Bucket run;
  RunTotals& totals = report.totals;

  auto quality_of = [&](const std::string& variant_id) {
    const ModelVariant* v = scenario.catalog->find(variant_id);
    return v != nullptr ? v->quality.value() : 0.0;
  };

  for (const PerRequest& r : records) {
    const size_t w =
        static_cast<size_t>(r.arrival_ms / scenario.metrics_window_ms);
    Bucket* per_window = w < buckets.size() ? &buckets[w] : nullptr;
    const bool timed_out = std::any_of(
        r.outcome.attempts.begin(), r.outcome.attempts.end(),
        [](const Attempt& a) { return a.result == AttemptResult::Timeout; });
    const bool missed = !r.outcome.score.has_value() ||
                        r.outcome.total_elapsed_ms > scenario.policy.sla_budget_ms;

    for (Bucket* b : {per_window, &run}) {
      if (b == nullptr) continue;
      b->requests += 1;
      b->latencies.push_back(static_cast<double>(r.outcome.total_elapsed_ms));
      b->timeouts += timed_out ? 1 : 0;
      b->misses += missed ? 1 : 0;
      if (r.outcome.score.has_value()) {
        b->scored += 1;
        b->quality_sum += quality_of(r.outcome.variant_id);
        switch (*r.outcome.tier) {
          case Tier::Main: b->main += 1; break;
          case Tier::GroupFallback: b->fallback += 1; break;
          case Tier::ClientSide: b->clientside += 1; break;
        }
      }
    }
    totals.attempts_total += static_cast<int64_t>(r.outcome.attempts.size());
    for (const Attempt& a : r.outcome.attempts) {
      totals.timeouts_total += a.result == AttemptResult::Timeout ? 1 : 0;
    }
    totals.hedges_total += r.outcome.hedged ? 1 : 0;
    totals.max_elapsed_ms =
        std::max(totals.max_elapsed_ms, r.outcome.total_elapsed_ms);
  }

  auto fill = [](const Bucket& b, int64_t window_start, WindowMetrics* out) {
    out->window_start_ms = window_start;
    out->request_count = b.requests;
    if (!b.latencies.empty()) {
      out->p99_latency_ms = percentile_nearest_rank(b.latencies, 99.0);
    }
    if (b.requests > 0) {
      out->timeout_rate =
          static_cast<double>(b.timeouts) / static_cast<double>(b.requests);
      out->sla_miss_rate =
          static_cast<double>(b.misses) / static_cast<double>(b.requests);
    }
    if (b.scored > 0) {
      const double scored = static_cast<double>(b.scored);
      out->frac_main = static_cast<double>(b.main) / scored;
      out->frac_fallback = static_cast<double>(b.fallback) / scored;
      out->frac_clientside = static_cast<double>(b.clientside) / scored;
      out->weighted_quality = b.quality_sum / scored;
    }
  };

  for (int64_t w = 0; w < window_count; ++w) {
    WindowMetrics metrics;
    fill(buckets[static_cast<size_t>(w)], w * scenario.metrics_window_ms,
         &metrics);
    report.windows.push_back(metrics);
  }

  WindowMetrics overall;
  fill(run, 0, &overall);
  totals.request_count = run.requests;
  totals.scored = run.scored;
  totals.sla_misses = run.misses;
  totals.count_main = run.main;
  totals.count_fallback = run.fallback;
  totals.count_clientside = run.clientside;
  totals.sla_miss_rate = overall.sla_miss_rate;
  totals.frac_main = overall.frac_main;
  totals.frac_fallback = overall.frac_fallback;
  totals.frac_clientside = overall.frac_clientside;
  totals.weighted_quality = overall.weighted_quality;
  totals.p99_latency_ms = overall.p99_latency_ms;
  return report;
}

}  // namespace

SimResult run_scenario(const Scenario& scenario, const SimOptions& options) {
  scenario.validate();
  const VariantCatalog& catalog = *scenario.catalog;

  const std::vector<int64_t> arrivals =
      generate_arrivals(scenario.arrivals, scenario.duration_ms, scenario.seed);
  RngStream amount_rng(derive_stream(scenario.seed, "amounts"));
  const std::vector<FlagEvent> flag_events = build_flag_events(scenario);

  SimClock clock;
  SimBackend backend(clock, scenario.seed, scenario.latency_by_variant,
                     scenario.default_latency, scenario.outages);
  HealthRegistry health(catalog.universe(), scenario.breaker);
  ResultWindow main_window(scenario.policy.failure_prob_window);
  ClientSideModel client_model;
  RouterEnv env{backend,       clock,   client_model, nullptr,
                &health,       &main_window,
                !options.ablate_fallback};

  std::vector<PerRequest> records;
  records.reserve(arrivals.size());
  size_t next_event = 0;
  for (size_t i = 0; i < arrivals.size(); ++i) {
    const int64_t t = arrivals[i];
    while (next_event < flag_events.size() &&
           flag_events[next_event].time_ms <= t) {
      const FlagEvent& e = flag_events[next_event++];
      health.flag_group(e.group, e.status);
    }

    Request request;
    request.request_id = request_id_for(i);
    request.amount = std::max<int64_t>(
        0, std::llround(sample_lognormal(amount_rng, scenario.amounts.log_location,
                                         scenario.amounts.log_scale)));
    request.arrival_time_ms = t;

    clock.reset(t);
    backend.begin_request(i);
    const HealthSnapshot snapshot = health.snapshot(t);
    PerRequest record;
    record.arrival_ms = t;
    record.outcome = route(request, catalog, snapshot, scenario.policy, env);
    records.push_back(std::move(record));
  }

  SimResult result;
  result.report = aggregate(scenario, records);
  result.outcomes.reserve(records.size());
  for (PerRequest& r : records) result.outcomes.push_back(std::move(r.outcome));
  return result;
}

}  // namespace fbmesh
