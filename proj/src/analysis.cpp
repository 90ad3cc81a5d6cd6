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
#include "rangeleak/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "rangeleak/errors.hpp"

namespace rangeleak::analysis {

static double pow2(int e) { return std::ldexp(1.0, e); }

double prob_no_shared_prefix_at_least(unsigned l_bits, double n) {
  if (n < 2) return 1.0;
  // (1 - 2^-l)^(n-1), evaluated as exp((n-1) * log1p(-2^-l))
  return std::exp((n - 1.0) * std::log1p(-pow2(-int(l_bits))));
}

double prob_shared_prefix_exactly(unsigned l_bits, double n) {
  if (l_bits < 1) throw ContractViolation("l must be >= 1");
  if (n < 2) throw ContractViolation("n must be >= 2");
  return prob_no_shared_prefix_at_least(l_bits + 1, n) -
         prob_no_shared_prefix_at_least(l_bits, n);
}

double prob_max_shared_bytes_exactly(unsigned bytes, double n) {
  if (n < 2) return bytes == 0 ? 1.0 : 0.0;
  // P(floor(maxshared/8) = b) = P(maxshared < 8(b+1)) - P(maxshared < 8b)
  double below_hi = prob_no_shared_prefix_at_least(8 * (bytes + 1), n);
  double below_lo = bytes == 0 ? 0.0 : prob_no_shared_prefix_at_least(8 * bytes, n);
  return below_hi - below_lo;
}

double exploitable_guess_prob(const SurfAttackParams& p) {
  if (p.l % 8 != 0 || p.l == 0 || p.l > p.m)
    throw ContractViolation("disclosed prefix length must be a multiple of 8 in (0, m]");
  if (p.n < 1) throw ContractViolation("n must be >= 1");
  // Disclosed l bits decompose as: shared prefix padded to a whole byte
  // (stored unique prefix), plus one stored suffix byte for the real variant.
  // A guess must match the stored prefix, the suffix byte (real) or the h-bit
  // hash (hash) of the covered key.
  unsigned prefix_bits = 0;  // stored unique prefix length a guess must match
  unsigned extra_bits = 0;   // additional independent match requirement
  switch (p.variant) {
    case Variant::base:
      prefix_bits = p.l;
      extra_bits = 0;
      break;
    case Variant::real:
      if (p.l < 16) throw ContractViolation("real variant discloses at least 16 bits");
      prefix_bits = p.l - p.suffix_bits;
      extra_bits = p.suffix_bits;
      break;
    case Variant::hash:
      prefix_bits = p.l;
      extra_bits = p.hash_bits;
      break;
  }
  if (prefix_bits < 8) throw ContractViolation("stored prefix spans at least one byte");
  unsigned shared_bytes = prefix_bits / 8 - 1;  // shared prefix before the padding byte
  double p_shape = prob_max_shared_bytes_exactly(shared_bytes, p.n);
  return p.n * p_shape * pow2(-int(prefix_bits)) * pow2(-int(extra_bits));
}

double surf_fpr_estimate(double n, unsigned m_bits, Variant v,
                         unsigned suffix_bits, unsigned hash_bits) {
  unsigned m_bytes = m_bits / 8;
  double extra = v == Variant::base ? 1.0
               : v == Variant::real ? pow2(-int(suffix_bits))
                                    : pow2(-int(hash_bits));
  double fpr = 0;
  for (unsigned shared = 0; shared + 1 <= m_bytes; ++shared) {
    unsigned leaf_bytes = shared + 1;
    double mass = prob_max_shared_bytes_exactly(shared, n);
    double per_key = pow2(-int(8 * leaf_bytes));
    // Full-length leaves store no suffix byte; the factor is moot there
    // (a probe matching the whole prefix is the key itself).
    double factor = leaf_bytes == m_bytes ? 1.0 : extra;
    fpr += n * mass * per_key * factor;
  }
  return fpr;
}

double expected_extension_queries(unsigned m_bits, unsigned l_bits) {
  if (l_bits >= m_bits) throw ContractViolation("extension needs l < m");
  return (pow2(int(m_bits - l_bits)) - 1.0) / 2.0;
}

double brute_force_expected_queries(double n, unsigned m_bits) {
  if (n < 1) throw ContractViolation("n must be >= 1");
  return (pow2(int(m_bits)) - n) / (n + 1.0);
}

AttackPrediction predict_attack(const SurfAttackParams& base_params,
                                unsigned min_prefix_bits, double guesses,
                                double samples_per_key) {
  AttackPrediction out;
  double id_prefix_cost = double(base_params.m) / 8.0 + 1.0;  // probes per candidate
  double extension_total = 0;
  unsigned start = std::max(8u, (min_prefix_bits + 7) / 8 * 8);
  if (base_params.variant == Variant::real) start = std::max(start, 16u);
  for (unsigned l = start; l <= base_params.m; l += 8) {
    SurfAttackParams p = base_params;
    p.l = l;
    double prob = exploitable_guess_prob(p);
    double ext = l == base_params.m ? 1.0 : expected_extension_queries(base_params.m, l) + 1.0;
    if (base_params.variant == Variant::hash && l != base_params.m)
      ext = expected_extension_queries(base_params.m, l) * pow2(-int(base_params.hash_bits)) + 1.0;
    extension_total += prob * ext;
    out.expected_keys += prob;
  }
  out.expected_keys *= guesses;
  // Shorter disclosed prefixes are found too; they only add IdPrefix cost.
  SurfAttackParams fq = base_params;
  double all_fp_prob = 0;
  for (unsigned l = (base_params.variant == Variant::real ? 16u : 8u); l <= base_params.m; l += 8) {
    fq.l = l;
    all_fp_prob += exploitable_guess_prob(fq);
  }
  out.expected_total_queries = guesses * samples_per_key                       // step 1
                               + guesses * all_fp_prob * id_prefix_cost * samples_per_key  // step 2
                               + guesses * extension_total;                    // step 3
  out.queries_per_key = out.expected_keys > 0
                            ? out.expected_total_queries / out.expected_keys
                            : std::numeric_limits<double>::infinity();
  return out;
}

PbfCost pbf_cost_ratio(const PbfAttackParams& p) {
  if (p.p <= 0 || p.p > p.n) throw ContractViolation("need 0 < p <= n");
  if (p.epsilon < 0 || p.epsilon >= 1) throw ContractViolation("need 0 <= eps < 1");
  if (p.l >= p.m) throw ContractViolation("need l < m");
  PbfCost out;
  out.c_prefix = (1.0 + p.epsilon * pow2(int(p.l)) / p.p) * pow2(int(p.m - p.l - 1));
  out.c_brute = brute_force_expected_queries(p.n, p.m);
  double alpha = p.p / p.n;
  out.ratio = p.n / pow2(int(p.l)) + p.epsilon / alpha;
  out.profitable = out.ratio < 1.0;
  return out;
}

PredictionGrid reference_grid() {
  PredictionGrid g;
  const double sizes[] = {10e6, 50e6, 100e6};
  const unsigned lengths[] = {32, 40, 48};
  for (unsigned l : lengths) {
    for (double n : sizes) {
      SurfAttackParams p;
      p.n = n;
      p.m = 64;
      p.l = l;
      p.variant = Variant::real;
      double prob = exploitable_guess_prob(p);
      double per_key = 1.0 / prob + 64.0 / 8.0 + expected_extension_queries(64, l);
      double reduction = brute_force_expected_queries(n, 64) / per_key;
      g.cells.push_back(GridCell{l, n, prob, reduction});
    }
  }
  for (double n : sizes) g.random_guess_rows.push_back({n, n / pow2(64)});
  return g;
}

std::string grid_csv(const PredictionGrid& g) {
  std::ostringstream os;
  os << "l_bits,n,exploitable_prob,reduction_factor\n";
  os.setf(std::ios::scientific);
  os.precision(6);
  for (const auto& c : g.cells)
    os << c.l_bits << "," << c.n << "," << c.exploitable_prob << "," << c.reduction_factor << "\n";
  for (const auto& [n, prob] : g.random_guess_rows)
    os << "guess," << n << "," << prob << ",1\n";
  return os.str();
}

}  // namespace rangeleak::analysis
