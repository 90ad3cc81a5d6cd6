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

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "rangeleak/keyspace.hpp"

namespace rangeleak {

enum class FilterKind { bloom, surf_base, surf_real, surf_hash, pbf };

std::string to_string(FilterKind k);
std::optional<FilterKind> filter_kind_from_string(std::string_view s);

struct FilterConfig {
  FilterKind kind = FilterKind::surf_real;
  double bits_per_key = 18.0;
  unsigned surf_hash_bits = 8;         // h, stored hash bits per leaf
  unsigned surf_real_suffix_bits = 8;  // stored bits of the first suffix byte
  unsigned pbf_prefix_len_bits = 24;   // l, must be a multiple of 8
  uint64_t seed = 0x5eedf11e;

  void validate() const;
};

// Plain m-bit / j-hash Bloom filter with double hashing.
class BloomFilter {
 public:
  BloomFilter() = default;
  BloomFilter(uint64_t bit_count, unsigned hash_count, uint64_t seed);

  void insert(const Key& k);
  bool contains(const Key& k) const;
  bool point_query(const Key& k) const { return contains(k); }

  uint64_t bit_count() const { return bit_count_; }
  unsigned hash_count() const { return hash_count_; }
  uint64_t set_bit_count() const;
  uint64_t inserted() const { return inserted_; }

 private:
  std::vector<uint64_t> words_;
  uint64_t bit_count_ = 0;
  unsigned hash_count_ = 0;
  uint64_t seed_ = 0;
  uint64_t inserted_ = 0;
};

enum class SurfVariant { base, real, hash };

// Pruned trie storing each key's minimum unique identifying prefix, with the
// per-leaf suffix byte (real) or key-hash bits (hash) refinements. Ordinary
// linked-trie representation; query semantics are what matter here, not the
// succinct encoding.
class SurfTrie {
 public:
  SurfTrie() = default;
  static SurfTrie build(const Dataset& d, const FilterConfig& cfg);

  bool point_query(const Key& k) const;
  // One-sided: false only if no stored prefix falls in [lo, hi] in trie order.
  bool range_query(const Key& lo, const Key& hi) const;

  SurfVariant variant() const { return variant_; }
  unsigned hash_bits() const { return hash_bits_; }
  size_t node_count() const { return nodes_.size(); }
  size_t entry_count() const { return entry_count_; }
  size_t memory_bytes() const;
  uint64_t key_hash(const Key& k) const;  // public hash, truncated to h bits

 private:
  struct Node {
    std::vector<std::pair<uint8_t, int32_t>> children;  // sorted by label
    bool terminal = false;  // a key's unique prefix ends here
    bool has_suffix = false;
    uint8_t payload = 0;  // suffix bits (real) or hash bits (hash)
  };

  int32_t child_of(int32_t node, uint8_t label) const;
  int32_t ensure_child(int32_t node, uint8_t label);
  bool terminal_accepts(const Node& n, const uint8_t* rest, size_t rest_len) const;
  bool find_entry_at_least(int32_t node, const Key& lo, size_t depth,
                           std::vector<uint8_t>& path, std::vector<uint8_t>& out) const;
  void leftmost_entry(int32_t node, std::vector<uint8_t>& path, std::vector<uint8_t>& out) const;

  std::vector<Node> nodes_;
  SurfVariant variant_ = SurfVariant::base;
  unsigned hash_bits_ = 8;
  unsigned suffix_bits_ = 8;
  uint64_t hash_seed_ = 0;
  size_t entry_count_ = 0;
};

// Bloom filter holding every key plus its fixed-length l-bit prefix; range
// queries are supported only for "all keys starting with alpha" blocks.
class PrefixBloomFilter {
 public:
  PrefixBloomFilter() = default;
  PrefixBloomFilter(BloomFilter bloom, unsigned prefix_len_bits)
      : bloom_(std::move(bloom)), prefix_len_bits_(prefix_len_bits) {}
  static PrefixBloomFilter build(const Dataset& d, const FilterConfig& cfg);

  bool point_query(const Key& k) const { return bloom_.contains(k); }
  // p must be exactly l bits long.
  bool prefix_query(const Key& p) const;

  unsigned prefix_len_bits() const { return prefix_len_bits_; }
  const BloomFilter& bloom() const { return bloom_; }

 private:
  BloomFilter bloom_;
  unsigned prefix_len_bits_ = 0;
};

using FilterInstance = std::variant<BloomFilter, SurfTrie, PrefixBloomFilter>;

// Builds the configured filter over the dataset. One-sided by construction:
// every dataset key queries positive.
FilterInstance build_filter(const Dataset& d, const FilterConfig& cfg);

bool point_query(const FilterInstance& f, const Key& k);

// Empirical FPR over uniformly random non-member probes of the dataset's key
// length (fixed-length datasets only).
double measure_fpr(const FilterInstance& f, const Dataset& d, uint64_t probes, uint64_t seed);

std::string filter_stats_json(const FilterInstance& f, const FilterConfig& cfg,
                              const Dataset& d, double empirical_fpr);

}  // namespace rangeleak
