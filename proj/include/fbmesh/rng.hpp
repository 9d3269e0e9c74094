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

#include <cmath>
#include <cstdint>
#include <string_view>

namespace fbmesh {

/// splitmix64 finalizer. Good avalanche, cheap, stable across platforms.
inline uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent child seed from a parent seed and a textual tag.
/// Streams derived with distinct tags never share state, so adding draws to
/// one subsystem does not perturb another.
inline uint64_t derive_stream(uint64_t base, std::string_view tag) {
  uint64_t h = 1469598103934665603ULL;  // FNV-1a offset basis
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return mix64(base ^ h);
}

/// Derives an independent child seed from a parent seed and a numeric salt.
inline uint64_t derive_stream(uint64_t base, uint64_t salt) {
  return mix64(base + 0x9e3779b97f4a7c15ULL * (salt + 1));
}

/// Deterministic pseudo-random stream (splitmix64). Not cryptographic.
class RngStream {
 public:
  explicit RngStream(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1), 53 bits of precision.
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform double in (0, 1], safe as a log() argument.
  double next_unit_open() { return 1.0 - next_unit(); }

  /// Exponential with the given rate (events per unit time). rate > 0.
  double next_exponential(double rate) {
    return -std::log(next_unit_open()) / rate;
  }

  /// Standard normal via Box-Muller. Consumes two uniforms per draw; the
  /// second variate is discarded to keep the draw count per call fixed.
  double next_normal() {
    double u1 = next_unit_open();
    double u2 = next_unit();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

 private:
  uint64_t state_;
};

/// exp(Normal(location, scale)). scale == 0 degenerates to exactly
/// exp(location).
inline double sample_lognormal(RngStream& rng, double location, double scale) {
  if (scale == 0.0) return std::exp(location);
  return std::exp(location + scale * rng.next_normal());
}

}  // namespace fbmesh
