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

#include "fbmesh/group_set.hpp"

#include <algorithm>
#include <stdexcept>

namespace fbmesh {

namespace {
constexpr int kMaxUniverse = 64;
// Enumeration materializes 2^N - 2 sets; past this the list no longer fits
// in memory at desk scale.
constexpr int kMaxEnumerate = 24;
}  // namespace

Universe::Universe(std::vector<std::string> ids) : ids_(std::move(ids)) {
  if (ids_.empty()) {
    throw std::invalid_argument("universe must contain at least one group");
  }
  if (static_cast<int>(ids_.size()) > kMaxUniverse) {
    throw std::invalid_argument("universe is capped at 64 groups");
  }
  for (int i = 0; i < static_cast<int>(ids_.size()); ++i) {
    const std::string& id = ids_[i];
    if (id.empty()) {
      throw std::invalid_argument("group id must be non-empty");
    }
    if (id.find(',') != std::string::npos ||
        id.find_first_of(" \t\r\n") != std::string::npos) {
      throw std::invalid_argument("group id '" + id +
                                  "' must not contain commas or whitespace");
    }
    if (!index_by_id_.emplace(id, i).second) {
      throw std::invalid_argument("duplicate group id '" + id + "'");
    }
  }
}

const std::string& Universe::id(int index) const {
  if (index < 0 || index >= size()) {
    throw std::out_of_range("group index out of range");
  }
  return ids_[index];
}

int Universe::index_of(const std::string& id) const {
  auto it = index_by_id_.find(id);
  if (it == index_by_id_.end()) {
    throw std::invalid_argument("unknown group '" + id + "'");
  }
  return it->second;
}

bool Universe::contains(const std::string& id) const {
  return index_by_id_.count(id) != 0;
}

GroupSet::GroupSet(int universe_size) : bits_(0), size_(universe_size) {
  if (universe_size < 0 || universe_size > kMaxUniverse) {
    throw std::invalid_argument("universe size must be in [0, 64]");
  }
}

GroupSet GroupSet::full(int universe_size) {
  GroupSet s(universe_size);
  s.bits_ = universe_size == 64 ? ~uint64_t{0}
                                : ((uint64_t{1} << universe_size) - 1);
  return s;
}

GroupSet GroupSet::from_mask(uint64_t mask, int universe_size) {
  GroupSet all = full(universe_size);
  if ((mask & ~all.bits_) != 0) {
    throw std::invalid_argument("mask has bits outside the universe");
  }
  all.bits_ = mask;
  return all;
}

GroupSet GroupSet::with(int index) const {
  if (index < 0 || index >= size_) {
    throw std::out_of_range("group index outside universe");
  }
  return GroupSet(bits_ | (uint64_t{1} << index), size_);
}

GroupSet GroupSet::without(int index) const {
  if (index < 0 || index >= size_) {
    throw std::out_of_range("group index outside universe");
  }
  return GroupSet(bits_ & ~(uint64_t{1} << index), size_);
}

bool GroupSet::is_full() const { return *this == full(size_); }

void GroupSet::check_same_universe(const GroupSet& other) const {
  if (size_ != other.size_) {
    throw std::invalid_argument("group sets belong to different universes");
  }
}

bool GroupSet::subset_of(const GroupSet& other) const {
  check_same_universe(other);
  return (bits_ & other.bits_) == bits_;
}

GroupSet GroupSet::union_with(const GroupSet& other) const {
  check_same_universe(other);
  return GroupSet(bits_ | other.bits_, size_);
}

GroupSet GroupSet::intersect(const GroupSet& other) const {
  check_same_universe(other);
  return GroupSet(bits_ & other.bits_, size_);
}

GroupSet GroupSet::difference(const GroupSet& other) const {
  check_same_universe(other);
  return GroupSet(bits_ & ~other.bits_, size_);
}

GroupSet GroupSet::complement() const {
  return GroupSet(~bits_ & full(size_).bits_, size_);
}

bool subset_of(const GroupSet& a, const GroupSet& b) { return a.subset_of(b); }

std::vector<GroupSet> enumerate_nonempty_proper_subsets(
    const GroupSet& universe) {
  const int n = universe.count();
  if (n < 1) {
    throw std::invalid_argument("universe must contain at least one group");
  }
  if (n > kMaxEnumerate) {
    throw std::invalid_argument("subset enumeration is capped at 24 groups");
  }
  const uint64_t all = universe.mask();
  std::vector<GroupSet> out;
  out.reserve((uint64_t{1} << n) - 2);
  // Walk submasks of `all` via the standard (s - 1) & all recurrence; this
  // visits every nonempty submask exactly once.
  for (uint64_t s = (all - 1) & all; s != 0; s = (s - 1) & all) {
    out.push_back(GroupSet::from_mask(s, universe.universe_size()));
  }
  std::sort(out.begin(), out.end(), [](const GroupSet& a, const GroupSet& b) {
    if (a.count() != b.count()) return a.count() > b.count();
    return a.mask() < b.mask();
  });
  return out;
}

std::string format_group_set(const GroupSet& set, const Universe& universe) {
  if (set.universe_size() != universe.size()) {
    throw std::invalid_argument("set does not belong to this universe");
  }
  std::vector<std::string> members;
  for (int i = 0; i < universe.size(); ++i) {
    if (set.contains(i)) members.push_back(universe.id(i));
  }
  std::sort(members.begin(), members.end());
  std::string out;
  for (size_t i = 0; i < members.size(); ++i) {
    if (i != 0) out += ',';
    out += members[i];
  }
  return out;
}

namespace {
std::vector<std::string> split_csv(const std::string& text) {
  std::vector<std::string> parts;
  std::string token;
  for (char c : text) {
    if (c == ',') {
      parts.push_back(token);
      token.clear();
    } else if (c != ' ' && c != '\t') {
      token += c;
    }
  }
  parts.push_back(token);
  return parts;
}
}  // namespace

GroupSet parse_group_set(const std::string& text, const Universe& universe) {
  GroupSet set(universe.size());
  if (text.empty()) return set;
  for (const std::string& id : split_csv(text)) {
    if (id.empty()) {
      throw std::invalid_argument("empty group id in '" + text + "'");
    }
    set = set.with(universe.index_of(id));
  }
  return set;
}

Universe parse_universe(const std::string& text) {
  std::vector<std::string> ids = split_csv(text);
  if (ids.size() == 1 && ids[0].empty()) ids.clear();
  return Universe(ids);
}

}  // namespace fbmesh
