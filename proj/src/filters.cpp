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
#include "rangeleak/filters.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>

#include "rangeleak/errors.hpp"
#include "rangeleak/hash.hpp"

namespace rangeleak {

std::string to_string(FilterKind k) {
  switch (k) {
    case FilterKind::bloom: return "bloom";
    case FilterKind::surf_base: return "surf-base";
    case FilterKind::surf_real: return "surf-real";
    case FilterKind::surf_hash: return "surf-hash";
    case FilterKind::pbf: return "pbf";
  }
  return "?";
}

std::optional<FilterKind> filter_kind_from_string(std::string_view s) {
  if (s == "bloom") return FilterKind::bloom;
  if (s == "surf-base") return FilterKind::surf_base;
  if (s == "surf-real") return FilterKind::surf_real;
  if (s == "surf-hash") return FilterKind::surf_hash;
  if (s == "pbf") return FilterKind::pbf;
  return std::nullopt;
}

void FilterConfig::validate() const {
  if (bits_per_key <= 0) throw ContractViolation("bits_per_key must be > 0");
  if (pbf_prefix_len_bits == 0 || pbf_prefix_len_bits % 8 != 0)
    throw ContractViolation("pbf prefix length must be a positive multiple of 8 bits");
  if (surf_hash_bits == 0 || surf_hash_bits > 8)
    throw ContractViolation("surf hash bits must be in [1,8]");
  if (surf_real_suffix_bits == 0 || surf_real_suffix_bits > 8)
    throw ContractViolation("surf real suffix bits must be in [1,8]");
}

// ---------------------------------------------------------------------------
// Bloom
// ---------------------------------------------------------------------------

BloomFilter::BloomFilter(uint64_t bit_count, unsigned hash_count, uint64_t seed)
    : bit_count_(bit_count), hash_count_(hash_count), seed_(seed) {
  if (bit_count == 0 || hash_count == 0)
    throw ContractViolation("bloom filter needs nonzero size and hash count");
  words_.assign((bit_count + 63) / 64, 0);
}

void BloomFilter::insert(const Key& k) {
  uint64_t h1 = hash_bytes(k.bytes(), seed_);
  uint64_t h2 = hash_bytes(k.bytes(), seed_ ^ 0x9e3779b97f4a7c15ULL) | 1;
  for (unsigned i = 0; i < hash_count_; ++i) {
    uint64_t idx = (h1 + i * h2) % bit_count_;
    words_[idx >> 6] |= uint64_t{1} << (idx & 63);
  }
  ++inserted_;
}

bool BloomFilter::contains(const Key& k) const {
  if (bit_count_ == 0) return false;
  uint64_t h1 = hash_bytes(k.bytes(), seed_);
  uint64_t h2 = hash_bytes(k.bytes(), seed_ ^ 0x9e3779b97f4a7c15ULL) | 1;
  for (unsigned i = 0; i < hash_count_; ++i) {
    uint64_t idx = (h1 + i * h2) % bit_count_;
    if (!(words_[idx >> 6] & (uint64_t{1} << (idx & 63)))) return false;
  }
  return true;
}

uint64_t BloomFilter::set_bit_count() const {
  uint64_t n = 0;
  for (uint64_t w : words_) n += std::popcount(w);
  return n;
}

static unsigned bloom_hash_count(double bits_per_element) {
  int j = static_cast<int>(std::lround(bits_per_element * std::log(2.0)));
  return static_cast<unsigned>(std::max(1, j));
}

// ---------------------------------------------------------------------------
// SuRF trie
// ---------------------------------------------------------------------------

int32_t SurfTrie::child_of(int32_t node, uint8_t label) const {
  const auto& ch = nodes_[node].children;
  auto it = std::lower_bound(ch.begin(), ch.end(), label,
                             [](const auto& e, uint8_t l) { return e.first < l; });
  if (it != ch.end() && it->first == label) return it->second;
  return -1;
}

int32_t SurfTrie::ensure_child(int32_t node, uint8_t label) {
  auto& ch = nodes_[node].children;
  auto it = std::lower_bound(ch.begin(), ch.end(), label,
                             [](const auto& e, uint8_t l) { return e.first < l; });
  if (it != ch.end() && it->first == label) return it->second;
  int32_t idx = static_cast<int32_t>(nodes_.size());
  nodes_[node].children.insert(it, {label, idx});  // `ch` ref may dangle after push_back
  nodes_.emplace_back();
  return idx;
}

uint64_t SurfTrie::key_hash(const Key& k) const {
  uint64_t mask = (hash_bits_ >= 64) ? ~uint64_t{0} : ((uint64_t{1} << hash_bits_) - 1);
  return hash_bytes(k.bytes(), hash_seed_) & mask;
}

SurfTrie SurfTrie::build(const Dataset& d, const FilterConfig& cfg) {
  cfg.validate();
  if (d.keys.empty()) throw ContractViolation("cannot build a filter over an empty dataset");
  SurfTrie t;
  switch (cfg.kind) {
    case FilterKind::surf_base: t.variant_ = SurfVariant::base; break;
    case FilterKind::surf_real: t.variant_ = SurfVariant::real; break;
    case FilterKind::surf_hash: t.variant_ = SurfVariant::hash; break;
    default: throw ContractViolation("config kind is not a surf variant");
  }
  t.hash_bits_ = cfg.surf_hash_bits;
  t.suffix_bits_ = cfg.surf_real_suffix_bits;
  t.hash_seed_ = cfg.seed;
  t.nodes_.emplace_back();  // root

  auto infos = prefix_table(d);
  for (size_t i = 0; i < d.keys.size(); ++i) {
    const Key& k = d.keys[i];
    unsigned len = unique_prefix_len_bytes(infos[i]);
    int32_t node = 0;
    for (unsigned b = 0; b < len; ++b) node = t.ensure_child(node, k[b]);
    Node& n = t.nodes_[node];
    n.terminal = true;
    ++t.entry_count_;
    if (t.variant_ == SurfVariant::real) {
      if (k.size() > len) {
        n.has_suffix = true;
        unsigned shift = 8 - t.suffix_bits_;
        n.payload = static_cast<uint8_t>((k[len] >> shift) << shift);
      }
    } else if (t.variant_ == SurfVariant::hash) {
      n.has_suffix = true;
      n.payload = static_cast<uint8_t>(t.key_hash(k));
    }
  }
  return t;
}

// Accept/reject at a terminal node given the unconsumed query bytes.
bool SurfTrie::terminal_accepts(const Node& n, const uint8_t* rest, size_t rest_len) const {
  switch (variant_) {
    case SurfVariant::base:
      return true;
    case SurfVariant::real: {
      if (rest_len == 0) return !n.has_suffix;
      if (!n.has_suffix) return false;
      unsigned shift = 8 - suffix_bits_;
      return static_cast<uint8_t>((rest[0] >> shift) << shift) == n.payload;
    }
    case SurfVariant::hash:
      // caller compares the full-key hash; handled in point_query
      return true;
  }
  return false;
}

bool SurfTrie::point_query(const Key& k) const {
  int32_t node = 0;
  auto bytes = k.bytes();
  for (size_t i = 0; i <= bytes.size(); ++i) {
    const Node& n = nodes_[node];
    bool at_end = (i == bytes.size());
    if (n.terminal) {
      if (n.children.empty()) {
        // Leaf: k extends (or equals) the stored unique prefix.
        if (variant_ == SurfVariant::hash) return key_hash(k) == n.payload;
        return terminal_accepts(n, bytes.data() + i, bytes.size() - i);
      }
      // Internal node that is itself a stored key; counts only on exact end.
      if (at_end) return true;
    }
    if (at_end) return false;  // ends strictly inside the trie
    int32_t next = child_of(node, bytes[i]);
    if (next < 0) return false;
    node = next;
  }
  return false;
}

void SurfTrie::leftmost_entry(int32_t node, std::vector<uint8_t>& path,
                              std::vector<uint8_t>& out) const {
  const Node* n = &nodes_[node];
  while (true) {
    if (n->terminal) { out = path; return; }
    // non-terminal nodes always have children
    path.push_back(n->children.front().first);
    n = &nodes_[n->children.front().second];
  }
}

// Smallest stored entry that is >= lo, where an entry that is a proper prefix
// of lo also qualifies (its full key may extend past lo). Returns false if
// the subtree has no such entry.
bool SurfTrie::find_entry_at_least(int32_t node, const Key& lo, size_t depth,
                                   std::vector<uint8_t>& path, std::vector<uint8_t>& out) const {
  const Node& n = nodes_[node];
  if (n.terminal && n.children.empty()) { out = path; return true; }  // leaf covers extensions
  if (depth == lo.size()) {
    if (n.terminal) { out = path; return true; }
    leftmost_entry(node, path, out);
    return true;
  }
  // n is internal; its own is_key entry (if any) is strictly < lo here.
  uint8_t c = lo[depth];
  for (const auto& [label, child] : n.children) {
    if (label < c) continue;
    path.push_back(label);
    if (label == c) {
      if (find_entry_at_least(child, lo, depth + 1, path, out)) return true;
      path.pop_back();
      continue;
    }
    leftmost_entry(child, path, out);
    return true;
  }
  return false;
}

bool SurfTrie::range_query(const Key& lo, const Key& hi) const {
  if (hi < lo) throw ContractViolation("range query needs lo <= hi");
  std::vector<uint8_t> path, entry;
  if (!find_entry_at_least(0, lo, 0, path, entry)) return false;
  // entry <= hi, where a prefix compares smaller than its extensions
  auto hb = hi.bytes();
  return !std::lexicographical_compare(hb.begin(), hb.end(), entry.begin(), entry.end());
}

size_t SurfTrie::memory_bytes() const {
  size_t total = nodes_.capacity() * sizeof(Node);
  for (const auto& n : nodes_) total += n.children.capacity() * sizeof(std::pair<uint8_t, int32_t>);
  return total;
}

// ---------------------------------------------------------------------------
// Prefix Bloom filter
// ---------------------------------------------------------------------------

PrefixBloomFilter PrefixBloomFilter::build(const Dataset& d, const FilterConfig& cfg) {
  cfg.validate();
  if (d.keys.empty()) throw ContractViolation("cannot build a filter over an empty dataset");
  unsigned l_bytes = cfg.pbf_prefix_len_bits / 8;

  // Count distinct prefixes first so the hash count matches the true load.
  uint64_t distinct_prefixes = 0;
  const Key* prev = nullptr;
  for (const auto& k : d.keys) {
    if (k.size() < l_bytes) continue;
    if (!prev || shared_prefix_bytes(*prev, k) < l_bytes) ++distinct_prefixes;
    prev = &k;
  }
  uint64_t bits = static_cast<uint64_t>(cfg.bits_per_key * static_cast<double>(d.keys.size()));
  uint64_t elements = d.keys.size() + distinct_prefixes;
  BloomFilter bloom(std::max<uint64_t>(bits, 64), bloom_hash_count(double(bits) / double(elements)),
                    cfg.seed);
  prev = nullptr;
  for (const auto& k : d.keys) {
    bloom.insert(k);
    if (k.size() >= l_bytes && (!prev || shared_prefix_bytes(*prev, k) < l_bytes))
      bloom.insert(k.prefix_bytes(l_bytes));
    if (k.size() >= l_bytes) prev = &k;
  }
  return PrefixBloomFilter(std::move(bloom), cfg.pbf_prefix_len_bits);
}

bool PrefixBloomFilter::prefix_query(const Key& p) const {
  if (p.bit_length() != prefix_len_bits_)
    throw ContractViolation("prefix query length must equal the configured prefix length");
  return bloom_.contains(p);
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

FilterInstance build_filter(const Dataset& d, const FilterConfig& cfg) {
  cfg.validate();
  if (d.keys.empty()) throw ContractViolation("cannot build a filter over an empty dataset");
  switch (cfg.kind) {
    case FilterKind::bloom: {
      uint64_t bits = static_cast<uint64_t>(cfg.bits_per_key * static_cast<double>(d.keys.size()));
      BloomFilter b(std::max<uint64_t>(bits, 64), bloom_hash_count(cfg.bits_per_key), cfg.seed);
      for (const auto& k : d.keys) b.insert(k);
      return b;
    }
    case FilterKind::surf_base:
    case FilterKind::surf_real:
    case FilterKind::surf_hash:
      return SurfTrie::build(d, cfg);
    case FilterKind::pbf:
      return PrefixBloomFilter::build(d, cfg);
  }
  throw ContractViolation("unknown filter kind");
}

bool point_query(const FilterInstance& f, const Key& k) {
  return std::visit([&](const auto& impl) { return impl.point_query(k); }, f);
}

double measure_fpr(const FilterInstance& f, const Dataset& d, uint64_t probes, uint64_t seed) {
  if (probes < 1) throw ContractViolation("probe count must be >= 1");
  if (!d.key_len_bits) throw ContractViolation("measure_fpr needs a fixed-length dataset");
  unsigned m = *d.key_len_bits;
  uint64_t mask = (m == 64) ? ~uint64_t{0} : ((uint64_t{1} << m) - 1);
  PrfStream prf(seed);
  uint64_t fp = 0, done = 0;
  while (done < probes) {
    Key k = Key::from_uint(prf.next() & mask, m);
    if (d.contains(k)) continue;  // FPR is defined over non-member keys
    ++done;
    if (point_query(f, k)) ++fp;
  }
  return static_cast<double>(fp) / static_cast<double>(probes);
}

std::string filter_stats_json(const FilterInstance& f, const FilterConfig& cfg,
                              const Dataset& d, double empirical_fpr) {
  std::ostringstream os;
  os << "{\"kind\":\"" << to_string(cfg.kind) << "\"";
  size_t n = d.keys.size();
  if (const auto* b = std::get_if<BloomFilter>(&f)) {
    os << ",\"bits_used\":" << b->bit_count();
    os << ",\"bits_per_key\":" << (double(b->bit_count()) / double(n));
    os << ",\"hash_count\":" << b->hash_count();
  } else if (const auto* t = std::get_if<SurfTrie>(&f)) {
    os << ",\"bits_used\":" << (8 * t->memory_bytes());
    os << ",\"bits_per_key\":" << (8.0 * double(t->memory_bytes()) / double(n));
    os << ",\"nodes\":" << t->node_count() << ",\"entries\":" << t->entry_count();
    if (t->variant() == SurfVariant::hash) os << ",\"hash_bits\":" << t->hash_bits();
    if (t->variant() == SurfVariant::real) os << ",\"suffix_bits\":" << cfg.surf_real_suffix_bits;
  } else if (const auto* p = std::get_if<PrefixBloomFilter>(&f)) {
    os << ",\"bits_used\":" << p->bloom().bit_count();
    os << ",\"bits_per_key\":" << (double(p->bloom().bit_count()) / double(n));
    os << ",\"hash_count\":" << p->bloom().hash_count();
    os << ",\"prefix_len_bits\":" << p->prefix_len_bits();
  }
  os << ",\"keys\":" << n << ",\"empirical_fpr\":" << empirical_fpr << "}";
  return os.str();
}

}  // namespace rangeleak
