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
#include "rangeleak/keyspace.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <fstream>
#include <unordered_set>

#include "rangeleak/errors.hpp"
#include "rangeleak/hash.hpp"

namespace rangeleak {

Key::Key(std::span<const uint8_t> bytes) {
  if (bytes.empty() || bytes.size() > kMaxBytes)
    throw ContractViolation("key length must be 1..64 bytes");
  len_ = static_cast<uint8_t>(bytes.size());
  std::copy(bytes.begin(), bytes.end(), data_.begin());
}

Key Key::from_string(std::string_view s) {
  return Key(std::span<const uint8_t>(reinterpret_cast<const uint8_t*>(s.data()), s.size()));
}

static int hex_digit(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

Key Key::from_hex(std::string_view hex) {
  if (hex.empty() || hex.size() % 2 != 0)
    throw ContractViolation("hex key must have even, nonzero length");
  std::vector<uint8_t> out;
  out.reserve(hex.size() / 2);
  for (size_t i = 0; i < hex.size(); i += 2) {
    int hi = hex_digit(hex[i]), lo = hex_digit(hex[i + 1]);
    if (hi < 0 || lo < 0) throw ContractViolation("invalid hex digit in key");
    out.push_back(static_cast<uint8_t>(hi * 16 + lo));
  }
  return Key(out);
}

Key Key::from_uint(uint64_t value, unsigned m_bits) {
  if (m_bits % 8 != 0 || m_bits == 0 || m_bits > 64)
    throw ContractViolation("key bit length must be a multiple of 8 in [8,64]");
  unsigned nbytes = m_bits / 8;
  std::array<uint8_t, 8> buf{};
  for (unsigned i = 0; i < nbytes; ++i)
    buf[i] = static_cast<uint8_t>(value >> (8 * (nbytes - 1 - i)));
  return Key(std::span<const uint8_t>(buf.data(), nbytes));
}

bool Key::starts_with(const Key& prefix) const {
  if (prefix.len_ > len_) return false;
  return std::equal(prefix.data_.begin(), prefix.data_.begin() + prefix.len_, data_.begin());
}

Key Key::prefix_bytes(size_t n) const {
  return Key(std::span<const uint8_t>(data_.data(), std::min<size_t>(n, len_)));
}

Key Key::append(uint8_t byte) const {
  if (len_ >= kMaxBytes) throw ContractViolation("key too long to extend");
  Key out = *this;
  out.data_[out.len_++] = byte;
  return out;
}

std::string Key::to_hex() const {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len_);
  for (size_t i = 0; i < len_; ++i) {
    out.push_back(digits[data_[i] >> 4]);
    out.push_back(digits[data_[i] & 0xf]);
  }
  return out;
}

std::string Key::printable() const {
  bool ascii = true;
  for (size_t i = 0; i < len_; ++i)
    if (!std::isprint(data_[i])) { ascii = false; break; }
  if (ascii) return std::string(reinterpret_cast<const char*>(data_.data()), len_);
  return to_hex();
}

std::strong_ordering operator<=>(const Key& a, const Key& b) {
  size_t n = std::min(a.len_, b.len_);
  for (size_t i = 0; i < n; ++i)
    if (a.data_[i] != b.data_[i]) return a.data_[i] <=> b.data_[i];
  return a.len_ <=> b.len_;
}

bool operator==(const Key& a, const Key& b) {
  return (a <=> b) == std::strong_ordering::equal;
}

bool Dataset::contains(const Key& k) const {
  return std::binary_search(keys.begin(), keys.end(), k);
}

unsigned shared_prefix_bits(const Key& a, const Key& b) {
  size_t n = std::min(a.size(), b.size());
  for (size_t i = 0; i < n; ++i) {
    if (a[i] != b[i]) {
      unsigned diff = static_cast<unsigned>(a[i] ^ b[i]);
      return static_cast<unsigned>(8 * i) + (std::countl_zero(diff) - 24);
    }
  }
  return static_cast<unsigned>(8 * n);
}

unsigned shared_prefix_bytes(const Key& a, const Key& b) {
  size_t n = std::min(a.size(), b.size());
  for (size_t i = 0; i < n; ++i)
    if (a[i] != b[i]) return static_cast<unsigned>(i);
  return static_cast<unsigned>(n);
}

Dataset generate_uniform(uint64_t n, unsigned m_bits, uint64_t seed) {
  if (n < 1) throw ContractViolation("dataset size must be >= 1");
  if (m_bits < 8 || m_bits > 64 || m_bits % 8 != 0)
    throw ContractViolation("m_bits must be a multiple of 8 in [8,64]");
  if (m_bits < 64 && n > (uint64_t{1} << m_bits))
    throw CapacityError("requested more keys than the key space holds");

  uint64_t mask = (m_bits == 64) ? ~uint64_t{0} : ((uint64_t{1} << m_bits) - 1);
  PrfStream prf(seed);
  std::unordered_set<uint64_t> seen;
  seen.reserve(static_cast<size_t>(n) * 2);
  std::vector<uint64_t> values;
  values.reserve(static_cast<size_t>(n));
  while (values.size() < n) {
    uint64_t v = prf.next() & mask;
    if (seen.insert(v).second) values.push_back(v);
  }
  std::sort(values.begin(), values.end());

  Dataset d;
  d.seed = seed;
  d.key_len_bits = m_bits;
  d.keys.reserve(values.size());
  for (uint64_t v : values) d.keys.push_back(Key::from_uint(v, m_bits));
  return d;
}

std::vector<PrefixInfo> prefix_table(const Dataset& d) {
  if (d.keys.empty()) throw ContractViolation("prefix_table needs a nonempty dataset");
  const auto& ks = d.keys;
  std::vector<PrefixInfo> out(ks.size());
  for (size_t i = 0; i < ks.size(); ++i) {
    unsigned shared = 0;
    if (i > 0) shared = std::max(shared, shared_prefix_bits(ks[i], ks[i - 1]));
    if (i + 1 < ks.size()) shared = std::max(shared, shared_prefix_bits(ks[i], ks[i + 1]));
    unsigned unique = (shared / 8) * 8 + 8;
    unique = std::min(unique, ks[i].bit_length());
    out[i] = PrefixInfo{shared, unique};
  }
  return out;
}

void write_dataset(const std::string& path, const Dataset& d) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << (d.key_len_bits ? *d.key_len_bits : 0u) << "," << d.keys.size() << "," << d.seed << "\n";
  for (const auto& k : d.keys) f << k.to_hex() << "\n";
  if (!f) throw std::runtime_error("write failed: " + path);
}

Dataset read_dataset(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open for reading: " + path);
  std::string header;
  if (!std::getline(f, header)) throw std::runtime_error("empty dataset file: " + path);
  unsigned m_bits = 0;
  uint64_t n = 0, seed = 0;
  if (sscanf(header.c_str(), "%u,%lu,%lu", &m_bits, &n, &seed) != 3)
    throw std::runtime_error("bad dataset header: " + header);
  Dataset d;
  d.seed = seed;
  if (m_bits != 0) d.key_len_bits = m_bits;
  d.keys.reserve(n);
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    d.keys.push_back(Key::from_hex(line));
  }
  if (d.keys.size() != n) throw std::runtime_error("dataset key count mismatch in " + path);
  return d;
}

}  // namespace rangeleak
