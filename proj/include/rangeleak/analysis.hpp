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
#include <string>
#include <vector>

namespace rangeleak::analysis {

// All closed forms assume uniformly random m-bit keys (the attack's worst
// case) and evaluate in log space so n up to 1e8 and l up to 64 stay stable.

enum class Variant { base, real, hash };

struct SurfAttackParams {
  double n = 0;          // dataset size
  unsigned m = 64;       // key bits
  unsigned l = 40;       // disclosed prefix bits (multiple of 8)
  Variant variant = Variant::real;
  unsigned suffix_bits = 8;  // real
  unsigned hash_bits = 8;    // hash
};

struct PbfAttackParams {
  double n = 0;       // dataset size
  unsigned m = 64;    // key bits
  unsigned l = 40;    // stored prefix bits
  double p = 0;       // distinct l-bit prefixes of dataset keys
  double epsilon = 0; // bloom FPR
};

// P(no other of the n-1 keys shares a prefix of >= l bits) = (1 - 2^-l)^(n-1).
double prob_no_shared_prefix_at_least(unsigned l_bits, double n);

// P(longest shared prefix is exactly l bits)
//   = (1 - 2^-(l+1))^(n-1) - (1 - 2^-l)^(n-1).
double prob_shared_prefix_exactly(unsigned l_bits, double n);

// Byte-granular variant: P(longest shared prefix spans exactly b whole bytes).
double prob_max_shared_bytes_exactly(unsigned bytes, double n);

// Probability that one uniform guess is an exploitable false positive whose
// disclosed prefix is exactly l bits, for the given variant. Byte-granular:
// the stored unique prefix is the shared prefix padded to the next full byte;
// real variants disclose one extra stored suffix byte; hash variants require
// an additional 2^-h hash match without lengthening the prefix.
double exploitable_guess_prob(const SurfAttackParams& p);

// Analytic point-query FPR of a SuRF variant over uniform m-bit keys:
// sum over leaf depths of (distinct leaf prefixes at that depth) / 2^depth,
// scaled by the variant's suffix/hash rejection factor.
double surf_fpr_estimate(double n, unsigned m_bits, Variant v,
                         unsigned suffix_bits = 8, unsigned hash_bits = 8);

// Expected suffix-search queries before the key is hit: (2^(m-l) - 1) / 2.
double expected_extension_queries(unsigned m_bits, unsigned l_bits);

// Expected brute-force guesses to hit any stored key: (2^m - n) / (n + 1).
double brute_force_expected_queries(double n, unsigned m_bits);

// Expected total queries per extracted key for a full attack run that keeps
// every disclosed prefix of >= min_prefix_bits, spending `guesses` on the
// false-positive search with `samples_per_key` queries per candidate.
struct AttackPrediction {
  double expected_keys = 0;
  double expected_total_queries = 0;
  double queries_per_key = 0;
};
AttackPrediction predict_attack(const SurfAttackParams& base_params,
                                unsigned min_prefix_bits, double guesses,
                                double samples_per_key);

struct PbfCost {
  double c_prefix = 0;  // (1 + eps*2^l/p) * 2^(m-l-1)
  double c_brute = 0;   // (2^m - n)/(n + 1)
  double ratio = 0;     // n/2^l + eps/alpha, alpha = p/n
  bool profitable = false;
};
PbfCost pbf_cost_ratio(const PbfAttackParams& p);

struct GridCell {
  unsigned l_bits;
  double n;
  double exploitable_prob;   // per uniform guess, surf-real, 64-bit keys
  double reduction_factor;   // brute-force queries / attack queries per key
};

// l in {32,40,48} x n in {10M,50M,100M} for 64-bit keys against surf-real,
// plus the bare probability of guessing a stored key per row size.
struct PredictionGrid {
  std::vector<GridCell> cells;
  std::vector<std::pair<double, double>> random_guess_rows;  // (n, n/2^m)
};
PredictionGrid reference_grid();

std::string grid_csv(const PredictionGrid& g);

}  // namespace rangeleak::analysis
