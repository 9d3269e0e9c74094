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

#include <bit>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace fbmesh {

/// One feature group: a named block of model inputs that fails as a unit.
struct GroupId {
  std::string id;  // short symbolic name, e.g. "A"
  int index = 0;   // ordinal within its universe
};

/// The ordered list of feature groups a deployment routes on. At most 64
/// groups; indices are assigned in declaration order.
class Universe {
 public:
  explicit Universe(std::vector<std::string> ids);

  int size() const { return static_cast<int>(ids_.size()); }
  const std::string& id(int index) const;
  const std::vector<std::string>& ids() const { return ids_; }
  GroupId group(int index) const { return {id(index), index}; }

  /// Index of a group id; throws std::invalid_argument for unknown ids.
  int index_of(const std::string& id) const;
  bool contains(const std::string& id) const;

  bool operator==(const Universe& other) const { return ids_ == other.ids_; }

 private:
  std::vector<std::string> ids_;
  std::unordered_map<std::string, int> index_by_id_;
};

/// Membership mask over a universe of N feature groups. A value type: all
/// operations return new sets. Sets over different universe sizes do not mix.
class GroupSet {
 public:
  GroupSet() = default;
  explicit GroupSet(int universe_size);
  static GroupSet full(int universe_size);
  static GroupSet from_mask(uint64_t mask, int universe_size);

  bool contains(int index) const { return (bits_ >> index) & 1u; }
  GroupSet with(int index) const;
  GroupSet without(int index) const;

  int count() const { return std::popcount(bits_); }
  bool empty() const { return bits_ == 0; }
  bool is_full() const;

  bool subset_of(const GroupSet& other) const;

  GroupSet union_with(const GroupSet& other) const;
  GroupSet intersect(const GroupSet& other) const;
  GroupSet difference(const GroupSet& other) const;
  GroupSet complement() const;

  uint64_t mask() const { return bits_; }
  int universe_size() const { return size_; }

  bool operator==(const GroupSet& other) const {
    return bits_ == other.bits_ && size_ == other.size_;
  }

 private:
  GroupSet(uint64_t bits, int size) : bits_(bits), size_(size) {}
  void check_same_universe(const GroupSet& other) const;

  uint64_t bits_ = 0;
  int size_ = 0;
};

/// True iff every member of a is a member of b. Throws on universe mismatch.
bool subset_of(const GroupSet& a, const GroupSet& b);

/// All sets S with empty ⊂ S ⊂ universe, ordered by descending cardinality,
/// then ascending mask value. Count is 2^N − 2 for |universe| = N.
std::vector<GroupSet> enumerate_nonempty_proper_subsets(const GroupSet& universe);

/// Canonical text rendering: member ids joined by "," in lexicographic order.
/// The empty set renders as "".
std::string format_group_set(const GroupSet& set, const Universe& universe);

/// Inverse of format_group_set. Throws std::invalid_argument on unknown ids.
GroupSet parse_group_set(const std::string& text, const Universe& universe);

/// Parses a universe declaration such as "A,B,C".
Universe parse_universe(const std::string& text);

}  // namespace fbmesh
