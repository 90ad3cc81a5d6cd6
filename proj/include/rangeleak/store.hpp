/*
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rangeleak/filters.hpp"
#include "rangeleak/keyspace.hpp"

namespace rangeleak {

// Values are synthetic payloads kept as length+seed; the ACL flag rides along
// as value metadata.
struct ValueRef {
  uint32_t length = 1000;
  uint64_t payload_seed = 0;
  bool attacker_authorized = false;

  bool operator==(const ValueRef&) const = default;
};

enum class ServedFrom { memtable, cache, storage, none };

struct QueryTrace {
  uint32_t filters_probed = 0;
  uint32_t filters_passed = 0;
  uint32_t sstables_read = 0;
  uint32_t cold_reads = 0;
  ServedFrom served_from = ServedFrom::none;
};

struct StoreConfig {
  size_t flush_threshold = size_t{1} << 14;
  size_t sstable_capacity = size_t{1} << 12;
  FilterConfig filter;
  // An sstable read stays page-cache resident until the background clock
  // advances this far past the last touch. 0 disables aging (explicit
  // evict_cache() only).
  uint64_t evict_after_ops = 10000;
};

class SSTable {
 public:
  SSTable(uint64_t id, std::vector<std::pair<Key, ValueRef>> entries, FilterInstance filter);

  uint64_t id() const { return id_; }
  const Key& min_key() const { return entries_.front().first; }
  const Key& max_key() const { return entries_.back().first; }
  size_t size() const { return entries_.size(); }
  const FilterInstance& filter() const { return filter_; }
  const std::vector<std::pair<Key, ValueRef>>& entries() const { return entries_; }

  bool covers(const Key& k) const { return !(k < min_key()) && !(max_key() < k); }
  std::optional<ValueRef> lookup(const Key& k) const;

  bool resident(uint64_t clock, uint64_t evict_after) const;
  void touch(uint64_t clock) const;
  void evict() const;

 private:
  uint64_t id_;
  std::vector<std::pair<Key, ValueRef>> entries_;
  FilterInstance filter_;
  mutable std::atomic<bool> resident_{false};
  mutable std::atomic<uint64_t> last_touch_{0};
};

// Two-tier LSM-tree: level 0 holds flushed runs newest-first (overlapping
// ranges), level 1 holds one compacted sorted run split into
// capacity-bounded sstables with disjoint ranges.
class LsmTree {
 public:
  explicit LsmTree(StoreConfig cfg);

  void put(const Key& k, ValueRef v);
  std::optional<ValueRef> get(const Key& k, QueryTrace& trace) const;
  std::vector<std::pair<Key, ValueRef>> range_query(const Key& lo, const Key& hi) const;

  void freeze();       // flush any memtable remainder
  void compact_all();  // merge everything into level 1, filters rebuilt
  void evict_cache() const;
  void advance_clock(uint64_t ops) const { clock_.fetch_add(ops, std::memory_order_relaxed); }
  uint64_t clock() const { return clock_.load(std::memory_order_relaxed); }

  // Filter parameters are public system configuration (the hash exists for
  // FPR, not security).
  const FilterConfig& filter_config() const { return cfg_.filter; }

  size_t level0_count() const { return level0_.size(); }
  size_t level1_count() const { return level1_.size(); }
  size_t memtable_size() const { return memtable_.size(); }
  uint64_t io_counter() const { return io_counter_.load(std::memory_order_relaxed); }
  uint64_t filter_positive_counter() const { return filter_pos_.load(std::memory_order_relaxed); }
  uint64_t filter_negative_counter() const { return filter_neg_.load(std::memory_order_relaxed); }

  // Exact "would any consulted filter pass k" bit; no cache or counter effects.
  bool any_filter_passes(const Key& k) const;

  std::string stats_json() const;

 private:
  void flush_memtable();
  bool read_sstable(const SSTable& sst, const Key& k, QueryTrace& trace,
                    std::optional<ValueRef>& out) const;
  bool filter_admits(const SSTable& sst, const Key& k) const;
  bool range_can_skip(const SSTable& sst, const Key& lo, const Key& hi) const;

  StoreConfig cfg_;
  std::map<Key, ValueRef> memtable_;
  std::vector<std::shared_ptr<SSTable>> level0_;  // newest first
  std::vector<std::shared_ptr<SSTable>> level1_;  // disjoint, sorted by min
  uint64_t next_id_ = 1;
  mutable std::atomic<uint64_t> clock_{0};
  mutable std::atomic<uint64_t> io_counter_{0};
  mutable std::atomic<uint64_t> filter_pos_{0};
  mutable std::atomic<uint64_t> filter_neg_{0};
};

}  // namespace rangeleak
