// Copyright 2026 The pqcascade Authors.
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

#include <algorithm>
#include <cstdint>
#include <vector>

namespace pqcascade {

/// A scored gallery id. Larger keys rank first; equal keys rank by ascending
/// id, which makes the order total and selection results independent of
/// the scan order.
template <typename Key>
struct BasicHit {
  Key key;
  std::uint64_t id;

  friend bool RanksBefore(const BasicHit& a, const BasicHit& b) {
    return a.key > b.key || (a.key == b.key && a.id < b.id);
  }
  bool operator==(const BasicHit&) const = default;
};

using Hit = BasicHit<float>;

/// Bounded selection of the k best hits. The heap top is the worst retained
/// hit, so each rejected candidate costs a single comparison.
template <typename Key>
class TopK {
 public:
  using HitType = BasicHit<Key>;

  explicit TopK(std::size_t k) : k_(k) { heap_.reserve(k + 1); }

  std::size_t k() const { return k_; }
  std::size_t size() const { return heap_.size(); }

  void Push(Key key, std::uint64_t id) {
    const HitType hit{key, id};
    if (heap_.size() < k_) {
      heap_.push_back(hit);
      std::push_heap(heap_.begin(), heap_.end(), Cmp);
    } else if (k_ > 0 && RanksBefore(hit, heap_.front())) {
      std::pop_heap(heap_.begin(), heap_.end(), Cmp);
      heap_.back() = hit;
      std::push_heap(heap_.begin(), heap_.end(), Cmp);
    }
  }

  // Cheap pre-filter for scan loops: false means Push would reject the key
  // regardless of id.
  bool MayAccept(Key key) const {
    return heap_.size() < k_ || key >= heap_.front().key;
  }

  // Best-first order; leaves the selector empty.
  std::vector<HitType> TakeSorted() {
    std::sort(heap_.begin(), heap_.end(), Cmp);
    return std::move(heap_);
  }

 private:
  static bool Cmp(const HitType& a, const HitType& b) {
    return RanksBefore(a, b);
  }

  std::size_t k_;
  std::vector<HitType> heap_;
};

/// k-way merge of per-shard selections into the global top-k.
template <typename Key>
std::vector<BasicHit<Key>> MergeTopK(
    std::vector<std::vector<BasicHit<Key>>>&& shards, std::size_t k) {
  std::vector<BasicHit<Key>> all;
  std::size_t total = 0;
  for (const auto& s : shards) total += s.size();
  all.reserve(total);
  for (auto& s : shards) all.insert(all.end(), s.begin(), s.end());
  const std::size_t keep = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep),
                    all.end(), [](const auto& a, const auto& b) {
                      return RanksBefore(a, b);
                    });
  all.resize(keep);
  return all;
}

}  // namespace pqcascade
