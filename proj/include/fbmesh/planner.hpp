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

#include <map>
#include <string>
#include <vector>

#include "fbmesh/group_set.hpp"
#include "fbmesh/types.hpp"

namespace fbmesh {

/// The fallback model family for one universe: exactly one Main (requires
/// every group), exactly one ClientSide (requires none), and any number of
/// group fallbacks. Immutable after construction; queries are read-only.
class VariantCatalog {
 public:
  VariantCatalog(Universe universe, std::vector<ModelVariant> variants);

  const Universe& universe() const { return universe_; }
  GroupSet universe_set() const { return GroupSet::full(universe_.size()); }
  const std::vector<ModelVariant>& variants() const { return variants_; }

  const ModelVariant& main() const { return variants_[main_index_]; }
  const ModelVariant& client_side() const { return variants_[client_index_]; }

  const ModelVariant* find(const std::string& variant_id) const;
  bool has_group_fallback() const;

 private:
  Universe universe_;
  std::vector<ModelVariant> variants_;
  size_t main_index_ = 0;
  size_t client_index_ = 0;
};

/// Tolerance under which two variants count as performance-equivalent.
/// Relative gaps are measured against the larger model's quality.
struct PrunePolicy {
  enum class Mode { Relative, Absolute };
  double tolerance = 0.0;
  Mode mode = Mode::Relative;

  void validate() const;
};

std::string prune_mode_name(PrunePolicy::Mode mode);
PrunePolicy::Mode parse_prune_mode(const std::string& name);

/// Weight (probability or frequency) of each feature-group availability
/// scenario, keyed by the healthy set's mask.
struct ScenarioWeights {
  int universe_size = 0;
  std::map<uint64_t, double> weight_by_mask;

  void set(const GroupSet& healthy, double weight);
  void validate() const;
};

/// Per-subset quality inputs, keyed by group-set mask.
using QualityMap = std::map<uint64_t, double>;

/// Builds the full catalog for a universe: Main over every group, one group
/// fallback per nonempty proper subset, and the client-side terminal model.
/// Throws std::invalid_argument naming the first subset missing from
/// `quality_of`.
VariantCatalog enumerate_catalog(const Universe& universe,
                                 const QualityMap& quality_of);

/// Quality gap from `from` down to `to`: (q_from - q_to) / q_from in Relative
/// mode, q_from - q_to in Absolute mode. Negative when `to` is better.
double quality_gap(double q_from, double q_to, PrunePolicy::Mode mode);

/// Drops every group fallback whose job is done as well (within tolerance) by
/// a surviving variant that needs strictly fewer groups. Decisions are made in
/// ascending cardinality order so a pruner is always itself a survivor; this
/// keeps the post-prune quality loss for any availability scenario within one
/// tolerance. Main and ClientSide are never pruned.
VariantCatalog prune_equivalent(const VariantCatalog& catalog,
                                const PrunePolicy& policy);

/// The N single-group fallbacks: the smallest family that still covers every
/// nonempty availability scenario. Throws if a singleton is missing.
std::vector<ModelVariant> min_cover_singletons(const VariantCatalog& catalog);

/// Greedy maximum-coverage selection of at most `budget` group fallbacks.
/// Starting from {Main, ClientSide}, repeatedly picks the candidate with the
/// largest weighted marginal quality gain across scenarios; stops early when
/// no candidate improves anything. Ties prefer fewer required groups, then
/// ascending variant id.
std::vector<ModelVariant> greedy_max_coverage(const VariantCatalog& catalog,
                                              const ScenarioWeights& weights,
                                              int budget);

/// Weighted objective Σ weight(H) × best-quality-reachable-under-H for the
/// family {Main, ClientSide} ∪ chosen. Exposed for planner evaluations.
double coverage_objective(const VariantCatalog& catalog,
                          const ScenarioWeights& weights,
                          const std::vector<ModelVariant>& chosen);

/// Highest-quality variant whose requirements are met by `healthy`. Total:
/// ClientSide requires nothing and so always qualifies. Ties prefer more
/// required groups, then ascending variant id.
const ModelVariant& best_variant_for(const VariantCatalog& catalog,
                                     const GroupSet& healthy);

/// Relative quality gap (q_main - q_other) / q_main. Throws when q_main == 0.
double relative_gap(QualityScore q_main, QualityScore q_other);

/// Deterministic variant ids: "main", "client", or "fb_" + group ids joined
/// by "_" in lexicographic order.
std::string derive_variant_id(const GroupSet& groups, Tier tier,
                              const Universe& universe);

}  // namespace fbmesh
