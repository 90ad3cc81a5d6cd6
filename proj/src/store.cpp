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
#include "rangeleak/store.hpp"

#include <algorithm>
#include <sstream>

#include "rangeleak/errors.hpp"

namespace rangeleak {

SSTable::SSTable(uint64_t id, std::vector<std::pair<Key, ValueRef>> entries, FilterInstance filter)
    : id_(id), entries_(std::move(entries)), filter_(std::move(filter)) {
  if (entries_.empty()) throw ContractViolation("sstable cannot be empty");
}

std::optional<ValueRef> SSTable::lookup(const Key& k) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), k,
                             [](const auto& e, const Key& key) { return e.first < key; });
  if (it != entries_.end() && it->first == k) return it->second;
  return std::nullopt;
}

bool SSTable::resident(uint64_t clock, uint64_t evict_after) const {
  if (!resident_.load(std::memory_order_relaxed)) return false;
  if (evict_after == 0) return true;
  return clock - last_touch_.load(std::memory_order_relaxed) < evict_after;
}

void SSTable::touch(uint64_t clock) const {
  resident_.store(true, std::memory_order_relaxed);
  last_touch_.store(clock, std::memory_order_relaxed);
}

void SSTable::evict() const { resident_.store(false, std::memory_order_relaxed); }

LsmTree::LsmTree(StoreConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.filter.validate();
  if (cfg_.flush_threshold == 0 || cfg_.sstable_capacity == 0)
    throw ContractViolation("flush threshold and sstable capacity must be nonzero");
}

void LsmTree::put(const Key& k, ValueRef v) {
  memtable_[k] = v;
  if (memtable_.size() >= cfg_.flush_threshold) flush_memtable();
}

void LsmTree::flush_memtable() {
  if (memtable_.empty()) return;
  std::vector<std::pair<Key, ValueRef>> entries(memtable_.begin(), memtable_.end());
  Dataset d;
  d.keys.reserve(entries.size());
  for (const auto& [k, v] : entries) d.keys.push_back(k);
  auto filter = build_filter(d, cfg_.filter);
  level0_.insert(level0_.begin(),
                 std::make_shared<SSTable>(next_id_++, std::move(entries), std::move(filter)));
  memtable_.clear();
}

void LsmTree::freeze() { flush_memtable(); }

bool LsmTree::filter_admits(const SSTable& sst, const Key& k) const {
  bool pass = point_query(sst.filter(), k);
  if (pass)
    filter_pos_.fetch_add(1, std::memory_order_relaxed);
  else
    filter_neg_.fetch_add(1, std::memory_order_relaxed);
  return pass;
}

bool LsmTree::read_sstable(const SSTable& sst, const Key& k, QueryTrace& trace,
                           std::optional<ValueRef>& out) const {
  ++trace.sstables_read;
  uint64_t now = clock();
  if (!sst.resident(now, cfg_.evict_after_ops)) {
    ++trace.cold_reads;
    io_counter_.fetch_add(1, std::memory_order_relaxed);
  }
  sst.touch(now);
  out = sst.lookup(k);
  return out.has_value();
}

std::optional<ValueRef> LsmTree::get(const Key& k, QueryTrace& trace) const {
  trace = QueryTrace{};
  if (auto it = memtable_.find(k); it != memtable_.end()) {
    trace.served_from = ServedFrom::memtable;
    return it->second;
  }
  std::optional<ValueRef> out;
  bool found = false;
  auto probe = [&](const SSTable& sst) {
    if (!sst.covers(k)) return false;
    ++trace.filters_probed;
    if (!filter_admits(sst, k)) return false;
    ++trace.filters_passed;
    return read_sstable(sst, k, trace, out);
  };
  for (const auto& sst : level0_) {
    if ((found = probe(*sst))) break;
  }
  if (!found && !level1_.empty()) {
    auto it = std::upper_bound(level1_.begin(), level1_.end(), k,
                               [](const Key& key, const auto& s) { return key < s->min_key(); });
    if (it != level1_.begin()) found = probe(**std::prev(it));
  }
  if (trace.sstables_read > 0)
    trace.served_from = trace.cold_reads > 0 ? ServedFrom::storage : ServedFrom::cache;
  else
    trace.served_from = ServedFrom::none;
  return found ? out : std::nullopt;
}

bool LsmTree::any_filter_passes(const Key& k) const {
  if (memtable_.count(k)) return true;
  for (const auto& sst : level0_)
    if (sst->covers(k) && point_query(sst->filter(), k)) return true;
  if (!level1_.empty()) {
    auto it = std::upper_bound(level1_.begin(), level1_.end(), k,
                               [](const Key& key, const auto& s) { return key < s->min_key(); });
    if (it != level1_.begin()) {
      const SSTable& sst = **std::prev(it);
      if (sst.covers(k) && point_query(sst.filter(), k)) return true;
    }
  }
  return false;
}

bool LsmTree::range_can_skip(const SSTable& sst, const Key& lo, const Key& hi) const {
  if (hi < sst.min_key() || sst.max_key() < lo) return true;
  if (const auto* trie = std::get_if<SurfTrie>(&sst.filter())) return !trie->range_query(lo, hi);
  if (const auto* pbf = std::get_if<PrefixBloomFilter>(&sst.filter())) {
    // A pbf can only rule out whole fixed-prefix blocks. When both endpoints
    // share the l-bit prefix the range lies inside one block, and a negative
    // block query proves it empty.
    unsigned lb = pbf->prefix_len_bits() / 8;
    if (lo.size() >= lb && hi.size() >= lb) {
      Key alpha = lo.prefix_bytes(lb);
      if (hi.starts_with(alpha) && !pbf->prefix_query(alpha)) return true;
    }
    return false;
  }
  return false;  // plain bloom: only the key-range check applies
}

std::vector<std::pair<Key, ValueRef>> LsmTree::range_query(const Key& lo, const Key& hi) const {
  if (hi < lo) throw ContractViolation("range query needs lo <= hi");
  std::map<Key, ValueRef> merged;  // newest wins: insert() keeps the first writer
  for (auto it = memtable_.lower_bound(lo); it != memtable_.end() && !(hi < it->first); ++it)
    merged.insert(*it);
  auto scan = [&](const SSTable& sst) {
    if (range_can_skip(sst, lo, hi)) return;
    uint64_t now = clock();
    if (!sst.resident(now, cfg_.evict_after_ops)) io_counter_.fetch_add(1, std::memory_order_relaxed);
    sst.touch(now);
    const auto& es = sst.entries();
    auto it = std::lower_bound(es.begin(), es.end(), lo,
                               [](const auto& e, const Key& key) { return e.first < key; });
    for (; it != es.end() && !(hi < it->first); ++it) merged.insert(*it);
  };
  for (const auto& sst : level0_) scan(*sst);
  for (const auto& sst : level1_) scan(*sst);
  return {merged.begin(), merged.end()};
}

void LsmTree::compact_all() {
  freeze();
  // newest-wins merge: level 0 runs are newest-first, then level 1
  std::map<Key, ValueRef> merged;
  for (const auto& sst : level0_)
    for (const auto& e : sst->entries()) merged.insert(e);
  for (const auto& sst : level1_)
    for (const auto& e : sst->entries()) merged.insert(e);
  level0_.clear();
  level1_.clear();
  std::vector<std::pair<Key, ValueRef>> all(merged.begin(), merged.end());
  for (size_t start = 0; start < all.size(); start += cfg_.sstable_capacity) {
    size_t end = std::min(all.size(), start + cfg_.sstable_capacity);
    std::vector<std::pair<Key, ValueRef>> chunk(all.begin() + start, all.begin() + end);
    Dataset d;
    d.keys.reserve(chunk.size());
    for (const auto& [k, v] : chunk) d.keys.push_back(k);
    auto filter = build_filter(d, cfg_.filter);
    level1_.push_back(std::make_shared<SSTable>(next_id_++, std::move(chunk), std::move(filter)));
  }
}

void LsmTree::evict_cache() const {
  for (const auto& sst : level0_) sst->evict();
  for (const auto& sst : level1_) sst->evict();
}

std::string LsmTree::stats_json() const {
  std::ostringstream os;
  os << "{\"memtable\":" << memtable_.size();
  os << ",\"levels\":[{\"level\":0,\"sstables\":" << level0_.size() << "}";
  os << ",{\"level\":1,\"sstables\":" << level1_.size() << "}]";
  os << ",\"filter_kind\":\"" << to_string(cfg_.filter.kind) << "\"";
  os << ",\"io_counter\":" << io_counter();
  os << ",\"filter_positives\":" << filter_positive_counter();
  os << ",\"filter_negatives\":" << filter_negative_counter() << "}";
  return os.str();
}

}  // namespace rangeleak
