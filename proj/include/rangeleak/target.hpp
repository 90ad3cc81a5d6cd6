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
#include <memory>
#include <mutex>
#include <random>
#include <string>

#include "rangeleak/store.hpp"

namespace rangeleak {

enum class OutcomeClass { value, not_found, unauthorized };

struct QueryOutcome {
  OutcomeClass cls = OutcomeClass::not_found;
  double latency_us = 0.0;

  bool operator==(const QueryOutcome&) const = default;
};

enum class AclMode { distinguishing, non_distinguishing };

// Response-time model. The fast path answers from memory, the cached path
// reads a page-cache-resident sstable, the slow path pays real I/O; the slow
// path additionally carries an exponential tail for OS/device jitter.
struct LatencyModel {
  double fast_mean_us = 7.0, fast_sigma_us = 2.0;
  double cached_mean_us = 15.0, cached_sigma_us = 4.0;
  double slow_mean_us = 85.0, slow_sigma_us = 15.0;
  double tail_prob = 0.05, tail_scale_us = 40.0;

  // Distinguishable regime: slow_mean - fast_mean >= 5 * max sigma.
  void validate() const;
};

struct SystemConfig {
  LatencyModel latency;
  AclMode acl_mode = AclMode::distinguishing;
  double unauthorized_fraction = 1.0;  // fraction of keys the attacker cannot read
  uint64_t evict_after_bg_ops = 10000;
  // Legitimate ops interleaved between two attacker requests. The default
  // matches one full eviction window: a loaded production system churns its
  // page cache faster than a remote attacker can issue queries, which is the
  // regime the timing attack assumes.
  uint64_t bg_ticks_per_query = 10000;
  bool idealized_enabled = true;
  bool compact_after_populate = true;
  uint64_t seed = 1;
};

// The attacked high-level system: ACL-checked reads over the LSM store with
// attacker-observable response times and simulated background load.
class System {
 public:
  System(const Dataset& d, StoreConfig store_cfg, SystemConfig cfg);

  QueryOutcome get(const Key& k);

  // Exact "some filter passed k" bit, no latency or cache effects.
  // Requires idealized mode to be enabled.
  bool idealized_probe(const Key& k);

  void run_background_load(uint64_t ops);
  // Advance background load far enough that every previously read sstable
  // ages out of the page cache.
  void wait_for_eviction() { run_background_load(cfg_.evict_after_bg_ops); }

  const LsmTree& store() const { return store_; }
  LsmTree& store() { return store_; }
  const SystemConfig& config() const { return cfg_; }
  std::optional<unsigned> key_len_bits() const { return key_len_bits_; }

  uint64_t query_count() const { return query_count_.load(std::memory_order_relaxed); }
  uint64_t idealized_probe_count() const {
    return idealized_probes_.load(std::memory_order_relaxed);
  }
  uint64_t background_op_count() const {
    return background_ops_.load(std::memory_order_relaxed);
  }

  // Latency regime draw for a given trace outcome; exposed for histogram and
  // calibration tests.
  double sample_latency(const QueryTrace& trace);

 private:
  StoreConfig make_store_cfg(StoreConfig base) const;

  SystemConfig cfg_;
  LsmTree store_;
  std::optional<unsigned> key_len_bits_;
  std::mt19937_64 rng_;
  std::mutex rng_mutex_;
  std::atomic<uint64_t> query_count_{0};
  std::atomic<uint64_t> idealized_probes_{0};
  std::atomic<uint64_t> background_ops_{0};
};

}  // namespace rangeleak
