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
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rangeleak/target.hpp"

namespace rangeleak {

enum class AttackMode { timed, idealized };

// Learned response-time separator. Buckets are 5 microseconds wide.
struct TimingClassifier {
  double cutoff_us = 0;
  std::vector<uint64_t> histogram;
  double bucket_width_us = 5.0;
  unsigned samples_per_key = 4;
  size_t fast_mode_bucket = 0;
  size_t slow_mode_bucket = 0;
};

// Builds the response-time histogram from random-key queries and places the
// cutoff at the minimum-density valley between the two dominant modes.
// Throws ClassifierError when no adequately deep valley exists.
TimingClassifier learn_cutoff(System& sys, uint64_t probes, uint64_t seed,
                              unsigned samples_per_key = 4);

// Attacker-side positive/negative call for one key. Timed mode averages
// samples_per_key response times with eviction waits between samples;
// idealized mode consults the exact filter bit.
bool is_positive(System& sys, const TimingClassifier& cls, const Key& k, AttackMode mode);

struct CandidatePrefix {
  Key prefix;
  Key source_fp_key;
  std::optional<uint8_t> hash_constraint;  // h-bit hash the covered key must carry

  unsigned length_bits() const { return prefix.bit_length(); }
};

// Uniform random guessing until positives are found; returns the positive
// subset of `n` fresh guesses. Timed mode samples breadth-first: one query
// per key per iteration, eviction waits only between iterations.
std::vector<Key> find_fpk_surf(System& sys, const TimingClassifier& cls, uint64_t n,
                               uint64_t seed, AttackMode mode,
                               uint64_t* queries_out = nullptr);

// Recovers the prefix the false positive shares with a stored key. Fixed
// length datasets mutate bytes tail-first (cumulative, byte+1 mod 256);
// variable-length ones remove trailing symbols. surf-hash targets only query
// probe keys whose h-bit hash matches the false positive's (the hash is
// public system configuration).
std::optional<CandidatePrefix> id_prefix_surf(System& sys, const TimingClassifier& cls,
                                              const Key& fp_key, FilterKind variant,
                                              AttackMode mode,
                                              uint64_t* queries_out = nullptr);

// Scans candidate prefix lengths and returns the one whose random-key
// positive fraction dominates; the winner must beat the runner-up by
// `margin` relative or DetectionError is thrown.
unsigned detect_pbf_prefix_len(System& sys, const TimingClassifier& cls,
                               uint64_t probes_per_length,
                               const std::vector<unsigned>& lengths_bits, double margin,
                               uint64_t seed, AttackMode mode,
                               uint64_t* queries_out = nullptr);

std::vector<Key> find_fpk_pbf(System& sys, const TimingClassifier& cls, unsigned l_bits,
                              uint64_t n, uint64_t seed, AttackMode mode,
                              uint64_t* queries_out = nullptr);

// Suffix search: shortest extensions first, then lexicographic. Candidates
// failing the hash constraint are skipped without querying. Returns the key
// whose response class discloses existence, or nothing once the budget is
// spent. Requires a distinguishing-ACL system.
std::optional<Key> extend_prefix(System& sys, const CandidatePrefix& pfx,
                                 unsigned target_key_bits, uint64_t budget,
                                 uint64_t* queries_out = nullptr);

struct AttackConfig {
  AttackMode mode = AttackMode::timed;
  FilterKind filter_kind = FilterKind::surf_real;
  uint64_t guesses = uint64_t{1} << 20;  // FindFPK candidates
  unsigned min_prefix_bits = 40;
  uint64_t suffix_budget = 0;  // per prefix; 0 = full suffix space
  unsigned samples_per_key = 4;
  uint64_t learn_probes = 100000;
  uint64_t pbf_probes_per_length = 100000;
  std::vector<unsigned> pbf_lengths_bits;  // empty: 16..(m-8) step 8
  double pbf_detect_margin = 0.10;
  std::optional<unsigned> pbf_known_prefix_bits;  // skip detection when set
  std::optional<double> cutoff_us_override;       // skip learning when set
  uint64_t seed = 1;
  // Receives "step,iteration,queries,positives" lines as the attack runs.
  std::function<void(const std::string&)> progress_sink;

  void validate(const System& sys) const;
};

struct AttackReport {
  AttackMode mode = AttackMode::timed;
  FilterKind filter_kind = FilterKind::surf_real;
  double cutoff_us = 0;
  unsigned pbf_prefix_bits = 0;

  uint64_t learn_queries = 0;
  uint64_t step1_queries = 0;  // length detection (pbf) + candidate guessing
  uint64_t pbf_detect_queries = 0;  // the detection share of step 1
  uint64_t step2_queries = 0;
  uint64_t step3_queries = 0;   // extensions that ended in an extraction
  uint64_t wasted_queries = 0;  // extensions that exhausted their budget
  uint64_t discarded_prefix_queries = 0;  // step-2 share of discarded prefixes

  uint64_t false_positives_found = 0;
  uint64_t prefixes_identified = 0;
  uint64_t prefixes_discarded = 0;
  uint64_t prefixes_kept = 0;  // after threshold + dedup
  uint64_t abandoned_rounds = 0;
  uint64_t errors = 0;

  std::vector<Key> keys_extracted;
  std::vector<std::pair<uint64_t, uint64_t>> series;  // (total_queries, keys so far)

  uint64_t total_queries() const {
    return learn_queries + step1_queries + step2_queries + step3_queries + wasted_queries;
  }
  double amortized_queries_per_key() const {
    return keys_extracted.empty() ? 0.0
                                  : double(total_queries()) / double(keys_extracted.size());
  }

  std::string to_json() const;
  std::string series_csv() const;  // header: total_queries,keys_extracted
};

// Full three-step round pipeline, breadth-first across candidates with
// eviction waits only at iteration barriers.
AttackReport run_attack(System& sys, const AttackConfig& cfg);

}  // namespace rangeleak
