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

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rangeleak {

// Immutable byte-sequence key, 1..64 bytes, compared lexicographically.
class Key {
 public:
  static constexpr size_t kMaxBytes = 64;

  Key() = default;
  Key(std::span<const uint8_t> bytes);
  static Key from_string(std::string_view s);
  static Key from_hex(std::string_view hex);
  // Low `m_bits` of `value` rendered big-endian, so integer order matches
  // lexicographic byte order. m_bits must be a multiple of 8 in [8, 64].
  static Key from_uint(uint64_t value, unsigned m_bits);

  std::span<const uint8_t> bytes() const { return {data_.data(), len_}; }
  size_t size() const { return len_; }
  unsigned bit_length() const { return 8 * static_cast<unsigned>(len_); }
  uint8_t operator[](size_t i) const { return data_[i]; }

  bool starts_with(const Key& prefix) const;
  Key prefix_bytes(size_t n) const;  // first n bytes
  Key append(uint8_t byte) const;
  void set_byte(size_t i, uint8_t v) { data_[i] = v; }

  std::string to_hex() const;
  std::string printable() const;  // hex, or ascii when fully printable

  friend std::strong_ordering operator<=>(const Key& a, const Key& b);
  friend bool operator==(const Key& a, const Key& b);

 private:
  uint8_t len_ = 0;
  std::array<uint8_t, kMaxBytes> data_{};
};

// Sorted, deduplicated key set plus generation parameters.
struct Dataset {
  std::vector<Key> keys;
  std::optional<unsigned> key_len_bits;  // unset => variable-length mode
  uint64_t seed = 0;

  size_t size() const { return keys.size(); }
  bool contains(const Key& k) const;
};

// Longest common prefix in bits / whole bytes.
unsigned shared_prefix_bits(const Key& a, const Key& b);
unsigned shared_prefix_bytes(const Key& a, const Key& b);

struct PrefixInfo {
  unsigned max_shared_bits = 0;     // vs. any *other* dataset key
  unsigned unique_prefix_bits = 0;  // symbol-granular, capped at key length
};

// n distinct uniform m-bit keys from a seeded PRF stream; deterministic.
// Throws CapacityError when n > 2^m.
Dataset generate_uniform(uint64_t n, unsigned m_bits, uint64_t seed);

// Per-key max shared prefix and unique identifying prefix, by neighbor
// comparison in sorted order.
std::vector<PrefixInfo> prefix_table(const Dataset& d);

inline unsigned unique_prefix_len_bytes(const PrefixInfo& p) {
  return p.unique_prefix_bits / 8;
}

// File format: header "m_bits,n,seed" (m_bits 0 in variable-length mode),
// then one lowercase-hex key per line. Round-trips bit-exact.
void write_dataset(const std::string& path, const Dataset& d);
Dataset read_dataset(const std::string& path);

}  // namespace rangeleak
