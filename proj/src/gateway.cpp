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

#include "fbmesh/gateway.hpp"

#include <chrono>
#include <condition_variable>
#include <cstdio>
#include <filesystem>

#include <httplib.h>

namespace fbmesh {

namespace {
using nlohmann::json;
using nlohmann::ordered_json;
}  // namespace

GatewayConfig gateway_config_from_json(const json& j,
                                       const std::string& base_dir) {
  GatewayConfig cfg;
  if (j.contains("listen")) {
    const std::string listen = j.at("listen").get<std::string>();
    const size_t colon = listen.rfind(':');
    if (colon == std::string::npos) {
      throw ConfigError("gateway.listen: expected host:port");
    }
    cfg.listen_host = listen.substr(0, colon);
    try {
      cfg.listen_port = std::stoi(listen.substr(colon + 1));
    } catch (const std::exception&) {
      throw ConfigError("gateway.listen: bad port");
    }
  }
  if (!j.contains("catalog_file")) {
    throw ConfigError("gateway.catalog_file: missing");
  }
  std::filesystem::path catalog_path(j.at("catalog_file").get<std::string>());
  if (catalog_path.is_relative() && !base_dir.empty()) {
    catalog_path = std::filesystem::path(base_dir) / catalog_path;
  }
  cfg.catalog_file = catalog_path.string();
  if (!j.contains("policy")) {
    throw ConfigError("gateway.policy: missing");
  }
  cfg.policy = policy_from_json(j.at("policy"));
  if (j.contains("breaker")) cfg.breaker = breaker_from_json(j.at("breaker"));
  if (j.contains("schema")) cfg.schema = schema_from_json(j.at("schema"));
  if (j.contains("client_model")) {
    const json& cm = j.at("client_model");
    if (cm.contains("bias")) cfg.client_weights.bias = cm.at("bias").get<double>();
    if (cm.contains("w_amount")) {
      cfg.client_weights.w_amount = cm.at("w_amount").get<double>();
    }
    if (cm.contains("w_hour")) {
      cfg.client_weights.w_hour = cm.at("w_hour").get<double>();
    }
  }
  if (j.contains("stub_seed")) cfg.stub_seed = j.at("stub_seed").get<uint64_t>();
  if (j.contains("backends")) {
    const json& backends = j.at("backends");
    if (!backends.is_object()) {
      throw ConfigError("gateway.backends: must be an object");
    }
    for (const auto& [variant_id, b] : backends.items()) {
      BackendConfig bc;
      const std::string kind =
          b.contains("kind") ? b.at("kind").get<std::string>() : "stub";
      if (kind == "stub") {
        bc.kind = BackendConfig::Kind::Stub;
        if (!b.contains("latency")) {
          throw ConfigError("gateway.backends." + variant_id +
                            ".latency: missing");
        }
        bc.latency = latency_model_from_json(b.at("latency"));
        if (b.contains("score")) bc.fixed_score = b.at("score").get<double>();
        if (!(bc.fixed_score >= 0.0 && bc.fixed_score <= 1.0)) {
          throw ConfigError("gateway.backends." + variant_id +
                            ".score: must be in [0, 1]");
        }
      } else if (kind == "remote") {
        bc.kind = BackendConfig::Kind::Remote;
        if (!b.contains("url")) {
          throw ConfigError("gateway.backends." + variant_id + ".url: missing");
        }
        bc.url = b.at("url").get<std::string>();
        if (b.contains("connect_timeout_ms")) {
          bc.connect_timeout_ms = b.at("connect_timeout_ms").get<int64_t>();
        }
        if (b.contains("read_timeout_ms")) {
          bc.read_timeout_ms = b.at("read_timeout_ms").get<int64_t>();
        }
      } else {
        throw ConfigError("gateway.backends." + variant_id +
                          ".kind: unknown kind '" + kind + "'");
      }
      cfg.backends[variant_id] = std::move(bc);
    }
  }
  return cfg;
}

GatewayConfig load_gateway_config(const std::string& path) {
  try {
    const std::string base_dir =
        std::filesystem::path(path).parent_path().string();
    return gateway_config_from_json(json::parse(read_file(path)), base_dir);
  } catch (const json::exception& e) {
    throw ConfigError("gateway config '" + path + "': " + e.what());
  }
}

void GatewayMetrics::observe(const RoutingOutcome& outcome) {
  if (outcome.tier.has_value()) {
    switch (*outcome.tier) {
      case Tier::Main: requests_main_.fetch_add(1); break;
      case Tier::GroupFallback: requests_fallback_.fetch_add(1); break;
      case Tier::ClientSide: requests_clientside_.fetch_add(1); break;
    }
  }
  attempts_.fetch_add(outcome.attempts.size());
  for (const Attempt& a : outcome.attempts) {
    if (a.result == AttemptResult::Timeout) timeouts_.fetch_add(1);
  }
  if (outcome.hedged) hedges_.fetch_add(1);

  size_t bucket = kBucketBoundsMs.size();
  for (size_t i = 0; i < kBucketBoundsMs.size(); ++i) {
    if (outcome.total_elapsed_ms <= kBucketBoundsMs[i]) {
      bucket = i;
      break;
    }
  }
  latency_buckets_[bucket].fetch_add(1);
  latency_sum_ms_.fetch_add(static_cast<uint64_t>(
      std::max<int64_t>(0, outcome.total_elapsed_ms)));
  latency_count_.fetch_add(1);
}

std::string GatewayMetrics::render() const {
  std::string out;
  out += "# TYPE fbmesh_requests_total counter\n";
  out += "fbmesh_requests_total{tier=\"Main\"} " +
         std::to_string(requests_main_.load()) + "\n";
  out += "fbmesh_requests_total{tier=\"GroupFallback\"} " +
         std::to_string(requests_fallback_.load()) + "\n";
  out += "fbmesh_requests_total{tier=\"ClientSide\"} " +
         std::to_string(requests_clientside_.load()) + "\n";
  out += "# TYPE fbmesh_attempts_total counter\n";
  out += "fbmesh_attempts_total " + std::to_string(attempts_.load()) + "\n";
  out += "# TYPE fbmesh_timeouts_total counter\n";
  out += "fbmesh_timeouts_total " + std::to_string(timeouts_.load()) + "\n";
  out += "# TYPE fbmesh_hedges_total counter\n";
  out += "fbmesh_hedges_total " + std::to_string(hedges_.load()) + "\n";
  out += "# TYPE fbmesh_route_latency_ms histogram\n";
  uint64_t cumulative = 0;
  for (size_t i = 0; i < kBucketBoundsMs.size(); ++i) {
    cumulative += latency_buckets_[i].load();
    out += "fbmesh_route_latency_ms_bucket{le=\"" +
           std::to_string(kBucketBoundsMs[i]) + "\"} " +
           std::to_string(cumulative) + "\n";
  }
  cumulative += latency_buckets_[kBucketBoundsMs.size()].load();
  out += "fbmesh_route_latency_ms_bucket{le=\"+Inf\"} " +
         std::to_string(cumulative) + "\n";
  out += "fbmesh_route_latency_ms_sum " + std::to_string(latency_sum_ms_.load()) +
         "\n";
  out += "fbmesh_route_latency_ms_count " +
         std::to_string(latency_count_.load()) + "\n";
  return out;
}

GatewayBackend::GatewayBackend(std::map<std::string, BackendConfig> configs,
                               uint64_t seed, std::shared_ptr<Clock> clock)
    : configs_(std::move(configs)),
      clock_(std::move(clock)),
      rng_(derive_stream(seed, "gateway-stub")) {}

Backend::Reply GatewayBackend::invoke(const std::string& variant_id,
                                      const Request& request,
                                      int64_t timeout_ms) {
  auto it = configs_.find(variant_id);
  if (it == configs_.end()) {
    return {AttemptResult::Failure, 0.0};
  }
  if (it->second.kind == BackendConfig::Kind::Stub) {
    return invoke_stub(it->second, variant_id, timeout_ms);
  }
  return invoke_remote(it->second, request, timeout_ms);
}

Backend::Reply GatewayBackend::invoke_stub(const BackendConfig& config,
                                           const std::string& variant_id,
                                           int64_t timeout_ms) {
  int64_t latency_ms;
  bool fail;
  {
    std::lock_guard<std::mutex> lock(rng_mutex_);
    const uint64_t call_index = call_counts_[variant_id]++;
    latency_ms = std::max<int64_t>(
        0, std::llround(config.latency.sample_ms(rng_, call_index)));
    fail = rng_.next_unit() < config.latency.failure_prob;
  }
  if (latency_ms >= timeout_ms) {
    std::this_thread::sleep_for(std::chrono::milliseconds(timeout_ms));
    return {AttemptResult::Timeout, 0.0};
  }
  std::this_thread::sleep_for(std::chrono::milliseconds(latency_ms));
  if (fail) return {AttemptResult::Failure, 0.0};
  return {AttemptResult::Ok, config.fixed_score};
}

Backend::Reply GatewayBackend::invoke_remote(const BackendConfig& config,
                                             const Request& request,
                                             int64_t timeout_ms) {
  const int64_t start = clock_->now_ms();
  httplib::Client client(config.url);
  client.set_connection_timeout(std::chrono::milliseconds(
      std::min(config.connect_timeout_ms, timeout_ms)));
  client.set_read_timeout(std::chrono::milliseconds(
      std::min(config.read_timeout_ms, timeout_ms)));

  ordered_json body;
  body["request_id"] = request.request_id;
  body["amount"] = request.amount;
  auto res = client.Post("/score", body.dump(), "application/json");
  const int64_t elapsed = clock_->now_ms() - start;
  if (elapsed >= timeout_ms) return {AttemptResult::Timeout, 0.0};
  if (!res || res->status != 200) return {AttemptResult::Failure, 0.0};
  try {
    const json reply = json::parse(res->body);
    return {AttemptResult::Ok, reply.at("score").get<double>()};
  } catch (const json::exception&) {
    return {AttemptResult::Failure, 0.0};
  }
}

namespace {

// Hedged call on a detached thread. The shared state outlives abandonment;
// a discarded pending simply never gets read.
class ThreadedPending : public PendingScore {
 public:
  struct State {
    std::mutex mutex;
    std::condition_variable cv;
    bool done = false;
    Backend::Reply reply;
    int64_t end_ms = 0;
  };

  ThreadedPending(std::string variant_id, int64_t start_ms,
                  std::shared_ptr<Clock> clock, std::shared_ptr<State> state)
      : variant_id_(std::move(variant_id)),
        start_ms_(start_ms),
        clock_(std::move(clock)),
        state_(std::move(state)) {}

  Resolved await_until(int64_t deadline_ms) override {
    std::unique_lock<std::mutex> lock(state_->mutex);
    const int64_t wait_ms = deadline_ms - clock_->now_ms();
    if (wait_ms > 0) {
      state_->cv.wait_for(lock, std::chrono::milliseconds(wait_ms),
                          [&] { return state_->done; });
    }
    if (state_->done) {
      return {state_->reply.result, state_->reply.score, start_ms_,
              state_->end_ms};
    }
    return {AttemptResult::Timeout, 0.0, start_ms_, deadline_ms};
  }

  const std::string& variant_id() const override { return variant_id_; }

 private:
  std::string variant_id_;
  int64_t start_ms_;
  std::shared_ptr<Clock> clock_;
  std::shared_ptr<State> state_;
};

}  // namespace

std::unique_ptr<PendingScore> GatewayBackend::dispatch(
    const std::string& variant_id, const Request& request, int64_t timeout_ms) {
  auto state = std::make_shared<ThreadedPending::State>();
  const int64_t start = clock_->now_ms();
  auto self = shared_from_this();
  std::thread([self, variant_id, request, timeout_ms, state]() {
    const Backend::Reply reply = self->invoke(variant_id, request, timeout_ms);
    std::lock_guard<std::mutex> lock(state->mutex);
    state->reply = reply;
    state->end_ms = self->clock_->now_ms();
    state->done = true;
    state->cv.notify_all();
  }).detach();
  return std::make_unique<ThreadedPending>(variant_id, start, clock_, state);
}

Gateway::Gateway(GatewayConfig config)
    : Gateway(config, load_catalog(config.catalog_file)) {}

Gateway::Gateway(GatewayConfig config, VariantCatalog catalog)
    : config_(std::move(config)),
      catalog_(std::move(catalog)),
      clock_(std::make_shared<SteadyClock>()),
      health_(catalog_.universe(), config_.breaker),
      main_window_(config_.policy.failure_prob_window),
      client_model_(config_.client_weights),
      backend_(std::make_shared<GatewayBackend>(config_.backends,
                                                config_.stub_seed, clock_)),
      server_(std::make_unique<httplib::Server>()) {
  for (const ModelVariant& v : catalog_.variants()) {
    if (v.tier == Tier::ClientSide) continue;  // always in-process
    if (config_.backends.find(v.variant_id) == config_.backends.end()) {
      throw ConfigError("gateway.backends." + v.variant_id +
                        ": missing backend for catalog variant");
    }
  }
  for (const auto& [id, b] : config_.backends) {
    if (catalog_.find(id) == nullptr) {
      throw ConfigError("gateway.backends." + id + ": not in the catalog");
    }
  }
  install_routes();
}

Gateway::~Gateway() { stop(); }

namespace {

void reply_json(httplib::Response& res, int status, const ordered_json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, int status, const std::string& what) {
  ordered_json body;
  body["error"] = what;
  reply_json(res, status, body);
}

}  // namespace

void Gateway::install_routes() {
  server_->Post("/v1/score", [this](const httplib::Request& req,
                                    httplib::Response& res) {
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::exception& e) {
      reply_error(res, 400, std::string("malformed json: ") + e.what());
      return;
    }
    Request request;
    try {
      if (!body.is_object()) throw ConfigError("body must be an object");
      if (!body.contains("request_id") || !body.at("request_id").is_string()) {
        throw ConfigError("request_id: required string");
      }
      request.request_id = body.at("request_id").get<std::string>();
      if (!body.contains("amount") || !body.at("amount").is_number_integer()) {
        throw ConfigError("amount: required integer (minor units)");
      }
      request.amount = body.at("amount").get<int64_t>();
      if (request.amount < 0) throw ConfigError("amount: must be >= 0");
    } catch (const ConfigError& e) {
      reply_error(res, 400, e.what());
      return;
    }
    if (body.contains("payloads")) {
      const json& payloads = body.at("payloads");
      if (!payloads.is_object()) {
        reply_error(res, 400, "payloads: must be an object");
        return;
      }
      for (const auto& [group_id, fields] : payloads.items()) {
        if (!catalog_.universe().contains(group_id)) {
          reply_error(res, 422, "unknown group '" + group_id + "'");
          return;
        }
        if (!fields.is_object()) {
          reply_error(res, 400, "payloads." + group_id + ": must be an object");
          return;
        }
        Payload payload;
        for (const auto& [name, value] : fields.items()) {
          if (value.is_number()) {
            payload[name] = value.get<double>();
          } else if (value.is_string()) {
            payload[name] = value.get<std::string>();
          } else if (value.is_boolean()) {
            payload[name] = value.get<bool>();
          } else if (value.is_null()) {
            // absent field; null ratio accounting handles it
          } else {
            reply_error(res, 400,
                        "payloads." + group_id + "." + name +
                            ": must be number, string, flag, or null");
            return;
          }
        }
        request.payloads[group_id] = std::move(payload);
      }
    }
    request.arrival_time_ms = clock_->now_ms();

    const HealthSnapshot snapshot = health_.snapshot(request.arrival_time_ms);
    RouterEnv env{*backend_,       *clock_,  client_model_,
                  &config_.schema, &health_, &main_window_, true};
    const RoutingOutcome outcome =
        route(request, catalog_, snapshot, config_.policy, env);
    metrics_.observe(outcome);
    reply_json(res, 200, outcome_to_json(outcome));
  });

  server_->Post("/v1/admin/flag", [this](const httplib::Request& req,
                                         httplib::Response& res) {
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::exception& e) {
      reply_error(res, 400, std::string("malformed json: ") + e.what());
      return;
    }
    if (!body.is_object() || !body.contains("group") ||
        !body.at("group").is_string() || !body.contains("status") ||
        !body.at("status").is_string()) {
      reply_error(res, 400, "expected {group, status}");
      return;
    }
    try {
      const GroupStatus status =
          parse_group_status(body.at("status").get<std::string>());
      health_.flag_group(body.at("group").get<std::string>(), status);
    } catch (const std::invalid_argument& e) {
      reply_error(res, 422, e.what());
      return;
    }
    ordered_json ok;
    ok["ok"] = true;
    reply_json(res, 200, ok);
  });

  server_->Get("/v1/health", [this](const httplib::Request&,
                                    httplib::Response& res) {
    const int64_t now = clock_->now_ms();
    const HealthSnapshot snapshot = health_.snapshot(now);
    ordered_json body;
    ordered_json groups;
    for (int i = 0; i < catalog_.universe().size(); ++i) {
      groups[catalog_.universe().id(i)] =
          group_status_name(snapshot.statuses[static_cast<size_t>(i)]);
    }
    body["groups"] = groups;
    ordered_json breakers;
    for (const ModelVariant& v : catalog_.variants()) {
      if (v.tier == Tier::ClientSide) continue;
      breakers[v.variant_id] =
          breaker_state_name(health_.breaker_state(v.variant_id, now));
    }
    body["breakers"] = breakers;
    body["snapshot_time_ms"] = snapshot.snapshot_time_ms;
    reply_json(res, 200, body);
  });

  server_->Get("/v1/metrics", [this](const httplib::Request&,
                                     httplib::Response& res) {
    res.status = 200;
    res.set_content(metrics_.render(), "text/plain; version=0.0.4");
  });
}

int Gateway::start() {
  if (config_.listen_port == 0) {
    port_ = server_->bind_to_any_port(config_.listen_host);
    if (port_ < 0) {
      throw std::runtime_error("gateway: failed to bind an ephemeral port");
    }
  } else {
    if (!server_->bind_to_port(config_.listen_host, config_.listen_port)) {
      throw std::runtime_error("gateway: failed to bind " +
                               config_.listen_host + ":" +
                               std::to_string(config_.listen_port));
    }
    port_ = config_.listen_port;
  }
  server_thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port_;
}

void Gateway::stop() {
  if (server_ && server_->is_running()) {
    server_->stop();
  }
  if (server_thread_.joinable()) {
    server_thread_.join();
  }
}

}  // namespace fbmesh
