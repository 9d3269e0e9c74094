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

#include <atomic>
#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include <json.hpp>

#include "fbmesh/formats.hpp"
#include "fbmesh/health.hpp"
#include "fbmesh/planner.hpp"
#include "fbmesh/policy.hpp"
#include "fbmesh/router.hpp"
#include "fbmesh/rng.hpp"

namespace httplib {
class Server;
}

namespace fbmesh {

/// How one variant's scores are produced: an in-process stub driven by a
/// latency model (testing, bring-up) or a remote HTTP scorer.
struct BackendConfig {
  enum class Kind { Stub, Remote };
  Kind kind = Kind::Stub;
  // stub
  LatencyModel latency;
  double fixed_score = 0.5;
  // remote
  std::string url;
  int64_t connect_timeout_ms = 100;
  int64_t read_timeout_ms = 1000;
};

struct GatewayConfig {
  std::string listen_host = "127.0.0.1";
  int listen_port = 8080;
  std::string catalog_file;
  RetryPolicy policy;
  BreakerConfig breaker;
  PayloadSchema schema;
  ClientSideModel::Weights client_weights;
  std::map<std::string, BackendConfig> backends;
  uint64_t stub_seed = 0;
};

GatewayConfig gateway_config_from_json(const nlohmann::json& j,
                                       const std::string& base_dir);
GatewayConfig load_gateway_config(const std::string& path);

/// Monotone counters and a route-latency histogram, exposed as plain-text
/// exposition on /v1/metrics.
class GatewayMetrics {
 public:
  void observe(const RoutingOutcome& outcome);
  std::string render() const;

 private:
  static constexpr std::array<int64_t, 10> kBucketBoundsMs = {
      1, 2, 5, 10, 25, 50, 100, 250, 500, 1000};

  std::atomic<uint64_t> requests_main_{0};
  std::atomic<uint64_t> requests_fallback_{0};
  std::atomic<uint64_t> requests_clientside_{0};
  std::atomic<uint64_t> attempts_{0};
  std::atomic<uint64_t> timeouts_{0};
  std::atomic<uint64_t> hedges_{0};
  std::array<std::atomic<uint64_t>, kBucketBoundsMs.size() + 1> latency_buckets_{};
  std::atomic<uint64_t> latency_sum_ms_{0};
  std::atomic<uint64_t> latency_count_{0};
};

/// Thread-safe backend multiplexer for the gateway: each variant id maps to a
/// stub (latency-model driven, in-process) or a remote HTTP scorer. Hedged
/// dispatches run on detached threads that hold shared ownership of the
/// backend, so abandoned calls stay safe past gateway shutdown.
class GatewayBackend : public Backend,
                       public std::enable_shared_from_this<GatewayBackend> {
 public:
  GatewayBackend(std::map<std::string, BackendConfig> configs, uint64_t seed,
                 std::shared_ptr<Clock> clock);

  Reply invoke(const std::string& variant_id, const Request& request,
               int64_t timeout_ms) override;
  std::unique_ptr<PendingScore> dispatch(const std::string& variant_id,
                                         const Request& request,
                                         int64_t timeout_ms) override;

 private:
  Reply invoke_stub(const BackendConfig& config, const std::string& variant_id,
                    int64_t timeout_ms);
  Reply invoke_remote(const BackendConfig& config, const Request& request,
                      int64_t timeout_ms);

  std::map<std::string, BackendConfig> configs_;
  std::shared_ptr<Clock> clock_;
  std::mutex rng_mutex_;
  RngStream rng_;
  std::map<std::string, uint64_t> call_counts_;
};

/// The inference gateway: routes /v1/score requests through the fallback
/// hierarchy with wall-clock budgets, exposes admin flagging, health, and
/// metrics.
class Gateway {
 public:
  explicit Gateway(GatewayConfig config);
  Gateway(GatewayConfig config, VariantCatalog catalog);
  ~Gateway();

  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  /// Binds and serves on a background thread. Returns the bound port
  /// (config.listen_port == 0 picks an ephemeral port).
  int start();
  void stop();
  int port() const { return port_; }

  const VariantCatalog& catalog() const { return catalog_; }
  HealthRegistry& health() { return health_; }

 private:
  void install_routes();

  GatewayConfig config_;
  VariantCatalog catalog_;
  std::shared_ptr<SteadyClock> clock_;
  HealthRegistry health_;
  ResultWindow main_window_;
  ClientSideModel client_model_;
  std::shared_ptr<GatewayBackend> backend_;
  GatewayMetrics metrics_;
  std::unique_ptr<httplib::Server> server_;
  std::thread server_thread_;
  int port_ = 0;
};

}  // namespace fbmesh
