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

#include "fbmesh/planner.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace fbmesh {

VariantCatalog::VariantCatalog(Universe universe,
                               std::vector<ModelVariant> variants)
    : universe_(std::move(universe)), variants_(std::move(variants)) {
  const GroupSet full = GroupSet::full(universe_.size());
  std::set<std::string> ids;
  size_t mains = 0, clients = 0;
  for (size_t i = 0; i < variants_.size(); ++i) {
    const ModelVariant& v = variants_[i];
    if (v.variant_id.empty()) {
      throw std::invalid_argument("variant id must be non-empty");
    }
    if (!ids.insert(v.variant_id).second) {
      throw std::invalid_argument("duplicate variant id '" + v.variant_id +
                                  "'");
    }
    if (v.required_groups.universe_size() != universe_.size()) {
      throw std::invalid_argument("variant '" + v.variant_id +
                                  "' uses a different universe");
    }
    if (!v.required_groups.subset_of(full)) {
      throw std::invalid_argument("variant '" + v.variant_id +
                                  "' requires groups outside the universe");
    }
    switch (v.tier) {
      case Tier::Main:
        if (!(v.required_groups == full)) {
          throw std::invalid_argument(
              "main variant must require the full universe");
        }
        ++mains;
        main_index_ = i;
        break;
      case Tier::ClientSide:
        if (!v.required_groups.empty()) {
          throw std::invalid_argument(
              "client-side variant must require no groups");
        }
        ++clients;
        client_index_ = i;
        break;
      case Tier::GroupFallback:
        break;
    }
  }
  if (mains != 1) {
    throw std::invalid_argument("catalog must contain exactly one Main");
  }
  if (clients != 1) {
    throw std::invalid_argument("catalog must contain exactly one ClientSide");
  }
}

const ModelVariant* VariantCatalog::find(const std::string& variant_id) const {
  for (const ModelVariant& v : variants_) {
    if (v.variant_id == variant_id) return &v;
  }
  return nullptr;
}

bool VariantCatalog::has_group_fallback() const {
  return std::any_of(variants_.begin(), variants_.end(),
                     [](const ModelVariant& v) {
                       return v.tier == Tier::GroupFallback;
                     });
}

void PrunePolicy::validate() const {
  if (tolerance < 0.0) {
    throw std::invalid_argument("prune tolerance must be >= 0");
  }
}

std::string prune_mode_name(PrunePolicy::Mode mode) {
  return mode == PrunePolicy::Mode::Relative ? "Relative" : "Absolute";
}

PrunePolicy::Mode parse_prune_mode(const std::string& name) {
  if (name == "Relative" || name == "relative") {
    return PrunePolicy::Mode::Relative;
  }
  if (name == "Absolute" || name == "absolute") {
    return PrunePolicy::Mode::Absolute;
  }
  throw std::invalid_argument("unknown prune mode '" + name + "'");
}

void ScenarioWeights::set(const GroupSet& healthy, double weight) {
  if (healthy.universe_size() != universe_size) {
    throw std::invalid_argument("scenario set uses a different universe");
  }
  weight_by_mask[healthy.mask()] = weight;
}

void ScenarioWeights::validate() const {
  bool any_positive = false;
  for (const auto& [mask, w] : weight_by_mask) {
    if (w < 0.0) {
      throw std::invalid_argument("scenario weights must be >= 0");
    }
    any_positive = any_positive || w > 0.0;
  }
  if (!any_positive) {
    throw std::invalid_argument(
        "scenario weights must contain at least one positive entry");
  }
}

std::string derive_variant_id(const GroupSet& groups, Tier tier,
                              const Universe& universe) {
  switch (tier) {
    case Tier::Main: return "main";
    case Tier::ClientSide: return "client";
    case Tier::GroupFallback: break;
  }
  std::vector<std::string> ids;
  for (int i = 0; i < universe.size(); ++i) {
    if (groups.contains(i)) ids.push_back(universe.id(i));
  }
  std::sort(ids.begin(), ids.end());
  std::string out = "fb";
  for (const std::string& id : ids) {
    out += '_';
    out += id;
  }
  return out;
}

namespace {
double quality_at(const QualityMap& quality_of, const GroupSet& subset,
                  const Universe& universe) {
  auto it = quality_of.find(subset.mask());
  if (it == quality_of.end()) {
    const std::string name = format_group_set(subset, universe);
    throw std::invalid_argument("missing quality entry for subset '" + name +
                                "'");
  }
  return it->second;
}
}  // namespace

VariantCatalog enumerate_catalog(const Universe& universe,
                                 const QualityMap& quality_of) {
  const GroupSet full = GroupSet::full(universe.size());
  const GroupSet none(universe.size());

  std::vector<ModelVariant> variants;
  variants.push_back({derive_variant_id(full, Tier::Main, universe), full,
                      QualityScore(quality_at(quality_of, full, universe)),
                      Tier::Main, LatencyModel{}});
  if (universe.size() > 1) {
    for (const GroupSet& subset : enumerate_nonempty_proper_subsets(full)) {
      variants.push_back(
          {derive_variant_id(subset, Tier::GroupFallback, universe), subset,
           QualityScore(quality_at(quality_of, subset, universe)),
           Tier::GroupFallback, LatencyModel{}});
    }
  }
  variants.push_back({derive_variant_id(none, Tier::ClientSide, universe),
                      none,
                      QualityScore(quality_at(quality_of, none, universe)),
                      Tier::ClientSide, LatencyModel{}});
  return VariantCatalog(universe, std::move(variants));
}

double quality_gap(double q_from, double q_to, PrunePolicy::Mode mode) {
  if (mode == PrunePolicy::Mode::Absolute) return q_from - q_to;
  if (q_from == 0.0) return 0.0;  // a zero-quality model is always matched
  return (q_from - q_to) / q_from;
}

VariantCatalog prune_equivalent(const VariantCatalog& catalog,
                                const PrunePolicy& policy) {
  policy.validate();

  // Group fallbacks in ascending cardinality. A variant can only be pruned by
  // a strict subset, so by the time a variant is examined every potential
  // pruner's fate is already final; pruning never chains through variants
  // that are themselves dropped.
  std::vector<const ModelVariant*> order;
  for (const ModelVariant& v : catalog.variants()) {
    if (v.tier == Tier::GroupFallback) order.push_back(&v);
  }
  std::sort(order.begin(), order.end(),
            [](const ModelVariant* a, const ModelVariant* b) {
              if (a->required_groups.count() != b->required_groups.count()) {
                return a->required_groups.count() < b->required_groups.count();
              }
              return a->required_groups.mask() < b->required_groups.mask();
            });

  std::set<std::string> dropped;
  auto survives = [&](const ModelVariant& v) {
    return dropped.find(v.variant_id) == dropped.end();
  };

  for (const ModelVariant* v : order) {
    for (const ModelVariant& other : catalog.variants()) {
      if (other.tier == Tier::Main) continue;  // never a strict subset
      if (&other == v || !survives(other)) continue;
      const bool strict_subset =
          other.required_groups.subset_of(v->required_groups) &&
          !(other.required_groups == v->required_groups);
      if (!strict_subset) continue;
      const double gap = quality_gap(v->quality.value(), other.quality.value(),
                                     policy.mode);
      if (gap <= policy.tolerance) {
        dropped.insert(v->variant_id);
        break;
      }
    }
  }

  std::vector<ModelVariant> kept;
  for (const ModelVariant& v : catalog.variants()) {
    if (survives(v)) kept.push_back(v);
  }
  return VariantCatalog(catalog.universe(), std::move(kept));
}

std::vector<ModelVariant> min_cover_singletons(const VariantCatalog& catalog) {
  std::vector<ModelVariant> out;
  for (int i = 0; i < catalog.universe().size(); ++i) {
    const GroupSet single = GroupSet(catalog.universe().size()).with(i);
    const ModelVariant* found = nullptr;
    for (const ModelVariant& v : catalog.variants()) {
      if (v.tier == Tier::GroupFallback && v.required_groups == single) {
        found = &v;
        break;
      }
    }
    if (found == nullptr) {
      throw std::invalid_argument(
          "catalog is missing the singleton fallback for group '" +
          catalog.universe().id(i) + "'");
    }
    out.push_back(*found);
  }
  return out;
}

namespace {

// Best quality reachable under scenario mask H for {Main, ClientSide} plus
// the chosen fallbacks.
double best_under(const VariantCatalog& catalog,
                  const std::vector<const ModelVariant*>& chosen,
                  uint64_t healthy_mask) {
  double best = catalog.client_side().quality.value();
  const uint64_t main_mask = catalog.main().required_groups.mask();
  if ((main_mask & healthy_mask) == main_mask) {
    best = std::max(best, catalog.main().quality.value());
  }
  for (const ModelVariant* v : chosen) {
    const uint64_t need = v->required_groups.mask();
    if ((need & healthy_mask) == need) {
      best = std::max(best, v->quality.value());
    }
  }
  return best;
}

bool prefer_candidate(const ModelVariant& a, const ModelVariant& b) {
  if (a.required_groups.count() != b.required_groups.count()) {
    return a.required_groups.count() < b.required_groups.count();
  }
  return a.variant_id < b.variant_id;
}

}  // namespace

std::vector<ModelVariant> greedy_max_coverage(const VariantCatalog& catalog,
                                              const ScenarioWeights& weights,
                                              int budget) {
  if (weights.universe_size != catalog.universe().size()) {
    throw std::invalid_argument("weights use a different universe");
  }
  weights.validate();
  if (budget < 0) {
    throw std::invalid_argument("budget must be >= 0");
  }

  std::vector<const ModelVariant*> candidates;
  for (const ModelVariant& v : catalog.variants()) {
    if (v.tier == Tier::GroupFallback) candidates.push_back(&v);
  }
  // Canonical candidate order so equal gains resolve to the preferred pick.
  std::sort(candidates.begin(), candidates.end(),
            [](const ModelVariant* a, const ModelVariant* b) {
              return prefer_candidate(*a, *b);
            });

  std::vector<const ModelVariant*> chosen;
  std::vector<ModelVariant> out;
  for (int round = 0; round < budget && !candidates.empty(); ++round) {
    double best_gain = 0.0;
    size_t best_index = candidates.size();
    for (size_t i = 0; i < candidates.size(); ++i) {
      double gain = 0.0;
      for (const auto& [mask, w] : weights.weight_by_mask) {
        const double before = best_under(catalog, chosen, mask);
        chosen.push_back(candidates[i]);
        const double after = best_under(catalog, chosen, mask);
        chosen.pop_back();
        gain += w * std::max(0.0, after - before);
      }
      if (gain > best_gain) {
        best_gain = gain;
        best_index = i;
      }
    }
    if (best_index == candidates.size() || best_gain <= 0.0) break;
    chosen.push_back(candidates[best_index]);
    out.push_back(*candidates[best_index]);
    candidates.erase(candidates.begin() + best_index);
  }
  return out;
}

double coverage_objective(const VariantCatalog& catalog,
                          const ScenarioWeights& weights,
                          const std::vector<ModelVariant>& chosen) {
  std::vector<const ModelVariant*> ptrs;
  for (const ModelVariant& v : chosen) ptrs.push_back(&v);
  double total = 0.0;
  for (const auto& [mask, w] : weights.weight_by_mask) {
    total += w * best_under(catalog, ptrs, mask);
  }
  return total;
}

const ModelVariant& best_variant_for(const VariantCatalog& catalog,
                                     const GroupSet& healthy) {
  const ModelVariant* best = nullptr;
  for (const ModelVariant& v : catalog.variants()) {
    if (!v.required_groups.subset_of(healthy)) continue;
    if (best == nullptr) {
      best = &v;
      continue;
    }
    if (v.quality.value() > best->quality.value()) {
      best = &v;
    } else if (v.quality.value() == best->quality.value()) {
      if (v.required_groups.count() > best->required_groups.count() ||
          (v.required_groups.count() == best->required_groups.count() &&
           v.variant_id < best->variant_id)) {
        best = &v;
      }
    }
  }
  // ClientSide requires no groups, so at least one variant always qualifies.
  return *best;
}

double relative_gap(QualityScore q_main, QualityScore q_other) {
  if (q_main.value() == 0.0) {
    throw std::invalid_argument("relative gap undefined for zero main quality");
  }
  return (q_main.value() - q_other.value()) / q_main.value();
}

}  // namespace fbmesh
