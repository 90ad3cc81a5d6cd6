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

#include <cstddef>
#include <cstdint>
#include <span>

namespace rangeleak {

// 64-bit finalizer (splitmix64). Full avalanche, cheap, portable.
inline constexpr uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seeded hash over a byte string. Length is folded in so a string and its
// extension never collide trivially.
inline uint64_t hash_bytes(std::span<const uint8_t> data, uint64_t seed) {
  uint64_t h = mix64(seed ^ (0x8b72e56c5a2f3d1dULL + data.size()));
  size_t i = 0;
  while (i + 8 <= data.size()) {
    uint64_t w = 0;
    for (int k = 0; k < 8; ++k) w |= uint64_t(data[i + k]) << (8 * k);
    h = mix64(h ^ w);
    i += 8;
  }
  if (i < data.size()) {
    uint64_t w = 0;
    for (int k = 0; i + k < data.size(); ++k) w |= uint64_t(data[i + k]) << (8 * k);
    h = mix64(h ^ w);
  }
  return h;
}

// Counter-mode PRF stream; deterministic for a given seed.
class PrfStream {
 public:
  explicit PrfStream(uint64_t seed) : seed_(seed) {}
  uint64_t next() { return mix64(seed_ ^ mix64(counter_++)); }

 private:
  uint64_t seed_;
  uint64_t counter_ = 0;
};

}  // namespace rangeleak
