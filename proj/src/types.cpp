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

#include "fbmesh/types.hpp"

#include <stdexcept>

namespace fbmesh {

QualityScore::QualityScore(double value) : value_(value) {
  if (!(value >= 0.0 && value <= 1.0)) {
    throw std::invalid_argument("quality score must be in [0, 1]");
  }
}

std::string tier_name(Tier tier) {
  switch (tier) {
    case Tier::Main: return "Main";
    case Tier::GroupFallback: return "GroupFallback";
    case Tier::ClientSide: return "ClientSide";
  }
  throw std::logic_error("unreachable");
}

Tier parse_tier(const std::string& name) {
  if (name == "Main") return Tier::Main;
  if (name == "GroupFallback") return Tier::GroupFallback;
  if (name == "ClientSide") return Tier::ClientSide;
  throw std::invalid_argument("unknown tier '" + name + "'");
}

std::string attempt_result_name(AttemptResult result) {
  switch (result) {
    case AttemptResult::Ok: return "Ok";
    case AttemptResult::Timeout: return "Timeout";
    case AttemptResult::Failure: return "Failure";
  }
  throw std::logic_error("unreachable");
}

AttemptResult parse_attempt_result(const std::string& name) {
  if (name == "Ok") return AttemptResult::Ok;
  if (name == "Timeout") return AttemptResult::Timeout;
  if (name == "Failure") return AttemptResult::Failure;
  throw std::invalid_argument("unknown attempt result '" + name + "'");
}

void LatencyModel::validate() const {
  if (!(failure_prob >= 0.0 && failure_prob <= 1.0)) {
    throw std::invalid_argument("failure_prob must be in [0, 1]");
  }
  switch (kind) {
    case Kind::Constant:
      if (constant_ms < 0.0) {
        throw std::invalid_argument("constant latency must be >= 0 ms");
      }
      break;
    case Kind::Lognormal:
      if (log_scale < 0.0) {
        throw std::invalid_argument("lognormal scale must be >= 0");
      }
      break;
    case Kind::Injected:
      if (injected_ms.empty()) {
        throw std::invalid_argument("injected latency list must be non-empty");
      }
      for (double v : injected_ms) {
        if (v < 0.0) {
          throw std::invalid_argument("injected latency must be >= 0 ms");
        }
      }
      break;
  }
}

double LatencyModel::sample_ms(RngStream& rng, uint64_t call_index) const {
  switch (kind) {
    case Kind::Constant: return constant_ms;
    case Kind::Lognormal: return sample_lognormal(rng, log_location, log_scale);
    case Kind::Injected: return injected_ms[call_index % injected_ms.size()];
  }
  throw std::logic_error("unreachable");
}

LatencyModel LatencyModel::constant(double ms, double failure_prob) {
  LatencyModel m;
  m.kind = Kind::Constant;
  m.constant_ms = ms;
  m.failure_prob = failure_prob;
  m.validate();
  return m;
}

LatencyModel LatencyModel::lognormal(double location, double scale,
                                     double failure_prob) {
  LatencyModel m;
  m.kind = Kind::Lognormal;
  m.log_location = location;
  m.log_scale = scale;
  m.failure_prob = failure_prob;
  m.validate();
  return m;
}

LatencyModel LatencyModel::injected(std::vector<double> values_ms,
                                    double failure_prob) {
  LatencyModel m;
  m.kind = Kind::Injected;
  m.injected_ms = std::move(values_ms);
  m.failure_prob = failure_prob;
  m.validate();
  return m;
}

}  // namespace fbmesh
