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
#include "rangeleak/target.hpp"

#include <algorithm>

#include "rangeleak/errors.hpp"
#include "rangeleak/hash.hpp"

namespace rangeleak {

void LatencyModel::validate() const {
  if (fast_mean_us <= 0 || cached_mean_us <= 0 || slow_mean_us <= 0)
    throw ContractViolation("latency means must be positive");
  double max_sigma = std::max({fast_sigma_us, cached_sigma_us, slow_sigma_us});
  if (slow_mean_us - fast_mean_us < 5.0 * max_sigma)
    throw ContractViolation("latency model is not in the distinguishable regime");
  if (tail_prob < 0 || tail_prob > 1) throw ContractViolation("tail_prob must be in [0,1]");
}

StoreConfig System::make_store_cfg(StoreConfig base) const {
  base.evict_after_ops = cfg_.evict_after_bg_ops;
  return base;
}

System::System(const Dataset& d, StoreConfig store_cfg, SystemConfig cfg)
    : cfg_(cfg), store_(make_store_cfg(std::move(store_cfg))), key_len_bits_(d.key_len_bits),
      rng_(mix64(cfg.seed ^ 0x7a63e5d1c0ffee42ULL)) {
  cfg_.latency.validate();
  uint64_t acl_seed = mix64(cfg_.seed ^ 0xac1ac1ac1ac1ac1aULL);
  for (size_t i = 0; i < d.keys.size(); ++i) {
    const Key& k = d.keys[i];
    double u = double(hash_bytes(k.bytes(), acl_seed) >> 11) * 0x1.0p-53;
    ValueRef v;
    v.payload_seed = mix64(cfg_.seed ^ i);
    v.attacker_authorized = u >= cfg_.unauthorized_fraction;
    store_.put(k, v);
  }
  store_.freeze();
  if (cfg_.compact_after_populate) store_.compact_all();
  store_.evict_cache();
}

double System::sample_latency(const QueryTrace& trace) {
  std::lock_guard<std::mutex> lock(rng_mutex_);
  const LatencyModel& lm = cfg_.latency;
  double mean, sigma;
  bool tail = false;
  switch (trace.served_from) {
    case ServedFrom::storage:
      mean = lm.slow_mean_us;
      sigma = lm.slow_sigma_us;
      tail = true;
      break;
    case ServedFrom::cache:
      mean = lm.cached_mean_us;
      sigma = lm.cached_sigma_us;
      break;
    default:  // memtable or pure filter rejection: memory only
      mean = lm.fast_mean_us;
      sigma = lm.fast_sigma_us;
      break;
  }
  std::normal_distribution<double> gauss(mean, sigma);
  double x = gauss(rng_);
  for (int tries = 0; x < 1.0 && tries < 64; ++tries) x = gauss(rng_);  // truncate at 1us
  x = std::max(x, 1.0);
  if (tail && lm.tail_prob > 0) {
    std::bernoulli_distribution flip(lm.tail_prob);
    if (flip(rng_)) {
      std::exponential_distribution<double> exp_tail(1.0 / lm.tail_scale_us);
      x += exp_tail(rng_);
    }
  }
  return x;
}

QueryOutcome System::get(const Key& k) {
  QueryTrace trace;
  auto v = store_.get(k, trace);
  OutcomeClass cls;
  if (v.has_value())
    cls = v->attacker_authorized ? OutcomeClass::value : OutcomeClass::unauthorized;
  else
    cls = OutcomeClass::not_found;
  if (cfg_.acl_mode == AclMode::non_distinguishing && cls == OutcomeClass::unauthorized)
    cls = OutcomeClass::not_found;
  double latency = sample_latency(trace);
  query_count_.fetch_add(1, std::memory_order_relaxed);
  store_.advance_clock(cfg_.bg_ticks_per_query);
  return QueryOutcome{cls, latency};
}

bool System::idealized_probe(const Key& k) {
  if (!cfg_.idealized_enabled)
    throw ContractViolation("idealized probes are disabled on this system");
  idealized_probes_.fetch_add(1, std::memory_order_relaxed);
  return store_.any_filter_passes(k);
}

void System::run_background_load(uint64_t ops) {
  if (ops == 0) return;
  background_ops_.fetch_add(ops, std::memory_order_relaxed);
  store_.advance_clock(ops);
}

}  // namespace rangeleak
