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
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "rangeleak/analysis.hpp"
#include "rangeleak/attack.hpp"
#include "rangeleak/errors.hpp"
#include "rangeleak/filters.hpp"
#include "rangeleak/hash.hpp"
#include "rangeleak/keyspace.hpp"
#include "rangeleak/store.hpp"
#include "rangeleak/target.hpp"

using nlohmann::json;
using namespace rangeleak;

namespace {

struct ExperimentSpec {
  std::string name = "experiment";
  // dataset
  uint64_t n = 1 << 16;
  unsigned m_bits = 32;
  uint64_t dataset_seed = 1;
  std::string dataset_file;  // when set, overrides generation
  // filter + store
  FilterConfig filter;
  StoreConfig store;
  // target
  SystemConfig system;
  // attack
  AttackConfig attack;
  std::string output_dir = ".";
};

template <typename T>
void maybe(const json& j, const char* field, T& out) {
  if (j.contains(field)) out = j.at(field).get<T>();
}

ExperimentSpec load_spec(const std::string& path) {
  ExperimentSpec s;
  if (path.empty()) return s;
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config: " + path);
  json j = json::parse(f);
  maybe(j, "name", s.name);
  maybe(j, "output_dir", s.output_dir);
  if (j.contains("dataset")) {
    const auto& d = j["dataset"];
    maybe(d, "n", s.n);
    maybe(d, "m_bits", s.m_bits);
    maybe(d, "seed", s.dataset_seed);
    maybe(d, "file", s.dataset_file);
  }
  if (j.contains("filter")) {
    const auto& fc = j["filter"];
    if (fc.contains("kind")) {
      auto k = filter_kind_from_string(fc["kind"].get<std::string>());
      if (!k) throw std::runtime_error("unknown filter kind in config");
      s.filter.kind = *k;
    }
    maybe(fc, "bits_per_key", s.filter.bits_per_key);
    maybe(fc, "surf_hash_bits", s.filter.surf_hash_bits);
    maybe(fc, "surf_real_suffix_bits", s.filter.surf_real_suffix_bits);
    maybe(fc, "pbf_prefix_len_bits", s.filter.pbf_prefix_len_bits);
    maybe(fc, "seed", s.filter.seed);
  }
  if (j.contains("store")) {
    const auto& st = j["store"];
    maybe(st, "flush_threshold", s.store.flush_threshold);
    maybe(st, "sstable_capacity", s.store.sstable_capacity);
  }
  if (j.contains("latency")) {
    const auto& lt = j["latency"];
    auto& lm = s.system.latency;
    maybe(lt, "fast_mean_us", lm.fast_mean_us);
    maybe(lt, "fast_sigma_us", lm.fast_sigma_us);
    maybe(lt, "cached_mean_us", lm.cached_mean_us);
    maybe(lt, "cached_sigma_us", lm.cached_sigma_us);
    maybe(lt, "slow_mean_us", lm.slow_mean_us);
    maybe(lt, "slow_sigma_us", lm.slow_sigma_us);
    maybe(lt, "tail_prob", lm.tail_prob);
    maybe(lt, "tail_scale_us", lm.tail_scale_us);
  }
  if (j.contains("acl")) {
    const auto& a = j["acl"];
    if (a.contains("mode"))
      s.system.acl_mode = a["mode"].get<std::string>() == "non_distinguishing"
                              ? AclMode::non_distinguishing
                              : AclMode::distinguishing;
    maybe(a, "unauthorized_fraction", s.system.unauthorized_fraction);
  }
  if (j.contains("background")) {
    const auto& b = j["background"];
    maybe(b, "evict_after_bg_ops", s.system.evict_after_bg_ops);
    maybe(b, "bg_ticks_per_query", s.system.bg_ticks_per_query);
  }
  if (j.contains("system")) {
    const auto& sy = j["system"];
    maybe(sy, "seed", s.system.seed);
    maybe(sy, "idealized_enabled", s.system.idealized_enabled);
  }
  if (j.contains("attack")) {
    const auto& a = j["attack"];
    if (a.contains("mode"))
      s.attack.mode =
          a["mode"].get<std::string>() == "timed" ? AttackMode::timed : AttackMode::idealized;
    maybe(a, "guesses", s.attack.guesses);
    maybe(a, "min_prefix_bits", s.attack.min_prefix_bits);
    maybe(a, "suffix_budget", s.attack.suffix_budget);
    maybe(a, "samples_per_key", s.attack.samples_per_key);
    maybe(a, "learn_probes", s.attack.learn_probes);
    maybe(a, "pbf_probes_per_length", s.attack.pbf_probes_per_length);
    maybe(a, "pbf_detect_margin", s.attack.pbf_detect_margin);
    maybe(a, "seed", s.attack.seed);
    if (a.contains("pbf_known_prefix_bits"))
      s.attack.pbf_known_prefix_bits = a["pbf_known_prefix_bits"].get<unsigned>();
    if (a.contains("cutoff_us")) s.attack.cutoff_us_override = a["cutoff_us"].get<double>();
  }
  return s;
}

Dataset spec_dataset(const ExperimentSpec& s) {
  if (!s.dataset_file.empty()) return read_dataset(s.dataset_file);
  return generate_uniform(s.n, s.m_bits, s.dataset_seed);
}

System spec_system(const ExperimentSpec& s, const Dataset& d) {
  StoreConfig sc = s.store;
  sc.filter = s.filter;
  return System(d, sc, s.system);
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << content;
  if (!f) throw std::runtime_error("write failed: " + path);
}

int cmd_gen(const ExperimentSpec& spec, const std::string& out) {
  Dataset d = generate_uniform(spec.n, spec.m_bits, spec.dataset_seed);
  write_dataset(out, d);
  std::cout << "{\"written\":\"" << out << "\",\"n\":" << d.keys.size()
            << ",\"m_bits\":" << spec.m_bits << ",\"seed\":" << spec.dataset_seed << "}\n";
  return 0;
}

int cmd_build(const ExperimentSpec& spec, uint64_t probes) {
  Dataset d = spec_dataset(spec);
  auto filter = build_filter(d, spec.filter);
  double fpr = d.key_len_bits ? measure_fpr(filter, d, probes, mix64(spec.dataset_seed ^ 0xf))
                              : 0.0;
  std::cout << filter_stats_json(filter, spec.filter, d, fpr) << "\n";
  System sys = spec_system(spec, d);
  std::cout << sys.store().stats_json() << "\n";
  return 0;
}

int cmd_fpr(const ExperimentSpec& spec, const std::vector<std::string>& kinds, uint64_t probes,
            const std::string& out) {
  if (probes == 0) throw ContractViolation("probe count must be >= 1");
  Dataset d = spec_dataset(spec);
  std::ostringstream csv;
  csv << "filter_kind,bits_per_key,fpr\n";
  for (const auto& name : kinds) {
    auto k = filter_kind_from_string(name);
    if (!k) throw ContractViolation("unknown filter kind: " + name);
    FilterConfig fc = spec.filter;
    fc.kind = *k;
    auto filter = build_filter(d, fc);
    double fpr = measure_fpr(filter, d, probes, mix64(spec.dataset_seed ^ 0xf9));
    double bpk = fc.bits_per_key;
    if (const auto* t = std::get_if<SurfTrie>(&filter))
      bpk = 8.0 * double(t->memory_bytes()) / double(d.keys.size());
    csv << name << "," << bpk << "," << fpr << "\n";
  }
  if (out.empty())
    std::cout << csv.str();
  else
    write_file(out, csv.str());
  return 0;
}

int cmd_timing_hist(const ExperimentSpec& spec, uint64_t probes, bool labeled,
                    const std::string& out) {
  Dataset d = spec_dataset(spec);
  System sys = spec_system(spec, d);
  unsigned m = d.key_len_bits.value();
  uint64_t mask = m >= 64 ? ~uint64_t{0} : ((uint64_t{1} << m) - 1);
  PrfStream prf(mix64(spec.attack.seed ^ 0x715709));
  std::vector<uint64_t> counts, fp_counts;
  for (uint64_t i = 0; i < probes; ++i) {
    Key k = Key::from_uint(prf.next() & mask, m);
    bool is_fp = labeled && !d.contains(k) && sys.store().any_filter_passes(k);
    double lat = sys.get(k).latency_us;
    size_t b = std::min<size_t>(size_t(lat / 5.0), 4095);
    if (b >= counts.size()) {
      counts.resize(b + 1, 0);
      fp_counts.resize(b + 1, 0);
    }
    ++counts[b];
    if (is_fp) ++fp_counts[b];
  }
  std::ostringstream csv;
  csv << (labeled ? "bucket_lo_us,bucket_hi_us,count,fp_count\n"
                  : "bucket_lo_us,bucket_hi_us,count\n");
  for (size_t b = 0; b < counts.size(); ++b) {
    if (counts[b] == 0) continue;
    csv << (5 * b) << "," << (5 * b + 5) << "," << counts[b];
    if (labeled) csv << "," << fp_counts[b];
    csv << "\n";
  }
  if (out.empty())
    std::cout << csv.str();
  else
    write_file(out, csv.str());
  return 0;
}

int cmd_attack(ExperimentSpec spec) {
  Dataset d = spec_dataset(spec);
  System sys = spec_system(spec, d);
  spec.attack.filter_kind = spec.filter.kind;
  spec.attack.progress_sink = [](const std::string& line) { std::cerr << line << "\n"; };
  AttackReport rep = run_attack(sys, spec.attack);
  std::filesystem::create_directories(spec.output_dir);
  std::string base = spec.output_dir + "/" + spec.name;
  write_file(base + ".report.json", rep.to_json() + "\n");
  write_file(base + ".series.csv", rep.series_csv());
  std::cout << rep.to_json() << "\n";
  return 0;
}

int cmd_analyze(bool grid, double n, unsigned m, unsigned l, const std::string& variant,
                unsigned hash_bits, unsigned suffix_bits, double pbf_p, double pbf_eps,
                const std::string& out) {
  std::ostringstream csv;
  if (grid) {
    csv << analysis::grid_csv(analysis::reference_grid());
  } else if (variant == "pbf") {
    analysis::PbfAttackParams p;
    p.n = n;
    p.m = m;
    p.l = l;
    p.p = pbf_p > 0 ? pbf_p : n;
    p.epsilon = pbf_eps;
    auto c = analysis::pbf_cost_ratio(p);
    csv << "n,m,l,p,epsilon,c_prefix,c_brute,ratio,profitable\n";
    csv.setf(std::ios::scientific);
    csv.precision(6);
    csv << n << "," << m << "," << l << "," << p.p << "," << p.epsilon << "," << c.c_prefix << ","
        << c.c_brute << "," << c.ratio << "," << (c.profitable ? 1 : 0) << "\n";
  } else {
    analysis::SurfAttackParams p;
    p.n = n;
    p.m = m;
    p.l = l;
    p.hash_bits = hash_bits;
    p.suffix_bits = suffix_bits;
    p.variant = variant == "surf-base"   ? analysis::Variant::base
                : variant == "surf-hash" ? analysis::Variant::hash
                                         : analysis::Variant::real;
    double prob = analysis::exploitable_guess_prob(p);
    double brute = analysis::brute_force_expected_queries(n, m);
    double ext = l < m ? analysis::expected_extension_queries(m, l) : 0.0;
    double per_key = 1.0 / prob + double(m) / 8.0 + ext;
    csv << "n,m,l,variant,exploitable_prob,extension_queries,brute_force_queries,reduction\n";
    csv.setf(std::ios::scientific);
    csv.precision(6);
    csv << n << "," << m << "," << l << "," << variant << "," << prob << "," << ext << "," << brute
        << "," << (brute / per_key) << "\n";
  }
  if (out.empty())
    std::cout << csv.str();
  else
    write_file(out, csv.str());
  return 0;
}

int cmd_report(const std::string& report_path, const std::string& csv_out) {
  std::ifstream f(report_path);
  if (!f) throw std::runtime_error("cannot open report: " + report_path);
  json j = json::parse(f);
  uint64_t total = j["total_queries"].get<uint64_t>();
  auto keys = j["keys_extracted"];
  std::cout << "mode:            " << j["mode"].get<std::string>() << "\n";
  std::cout << "filter:          " << j["filter_kind"].get<std::string>() << "\n";
  std::cout << "total queries:   " << total << "\n";
  std::cout << "  learn:         " << j["learn_queries"].get<uint64_t>() << "\n";
  std::cout << "  step 1:        " << j["step1_queries"].get<uint64_t>() << "\n";
  std::cout << "  step 2:        " << j["step2_queries"].get<uint64_t>() << "\n";
  std::cout << "  step 3:        " << j["step3_queries"].get<uint64_t>() << "\n";
  std::cout << "  wasted:        " << j["wasted_queries"].get<uint64_t>() << "\n";
  std::cout << "positives found: " << j["false_positives_found"].get<uint64_t>() << "\n";
  std::cout << "prefixes kept:   " << j["prefixes_kept"].get<uint64_t>() << "\n";
  std::cout << "keys extracted:  " << keys.size() << "\n";
  if (!keys.empty())
    std::cout << "queries/key:     " << double(total) / double(keys.size()) << "\n";
  if (!csv_out.empty()) {
    std::ostringstream csv;
    csv << "total_queries,keys_extracted\n";
    for (const auto& p : j["series"]) csv << p[0].get<uint64_t>() << "," << p[1].get<uint64_t>() << "\n";
    write_file(csv_out, csv.str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LSM-tree range-filter key-disclosure testbed"};
  app.require_subcommand(1);

  std::string config_path, out, dataset_file, filter_kind, variant = "surf-real";
  std::string report_path, csv_out;
  std::vector<std::string> fpr_kinds{"bloom", "surf-base", "surf-real", "surf-hash", "pbf"};
  uint64_t n = 0, probes = 100000, guesses = 0, seed = 0;
  unsigned m_bits = 0, l_bits = 40, min_prefix = 0, hash_bits = 8, suffix_bits = 8;
  double pbf_p = 0, pbf_eps = 0;
  bool labeled = false, grid = false;
  std::string mode;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "experiment spec JSON");
    cmd->add_option("--n", n, "dataset size");
    cmd->add_option("--m", m_bits, "key length in bits");
    cmd->add_option("--seed", seed, "seed override");
    cmd->add_option("--dataset", dataset_file, "dataset file");
    cmd->add_option("--filter", filter_kind, "filter kind");
  };

  auto* gen = app.add_subcommand("gen", "generate a dataset file");
  add_common(gen);
  gen->add_option("--out", out, "output path")->required();

  auto* build = app.add_subcommand("build", "build store + filter, print stats JSON");
  add_common(build);
  build->add_option("--probes", probes, "FPR probe count");

  auto* fpr = app.add_subcommand("fpr", "measure filter FPRs, emit CSV");
  add_common(fpr);
  fpr->add_option("--filters", fpr_kinds, "filter kinds to measure");
  fpr->add_option("--probes", probes, "probe count");
  fpr->add_option("--out", out, "CSV path (stdout when omitted)");

  auto* hist = app.add_subcommand("timing-hist", "response-time histogram CSV");
  add_common(hist);
  hist->add_option("--probes", probes, "probe count");
  hist->add_flag("--labeled", labeled, "add ground-truth fp_count column");
  hist->add_option("--out", out, "CSV path (stdout when omitted)");

  auto* attack = app.add_subcommand("attack", "run the key-disclosure attack");
  add_common(attack);
  attack->add_option("--mode", mode, "timed|idealized");
  attack->add_option("--guesses", guesses, "step-1 candidate count");
  attack->add_option("--min-prefix-bits", min_prefix, "discard threshold");
  attack->add_option("--out-dir", out, "report output directory");

  auto* analyze = app.add_subcommand("analyze", "closed-form predictions CSV");
  analyze->add_flag("--grid", grid, "emit the 64-bit reference grid");
  analyze->add_option("--n", n, "dataset size");
  analyze->add_option("--m", m_bits, "key bits");
  analyze->add_option("--l", l_bits, "prefix bits");
  analyze->add_option("--variant", variant, "surf-base|surf-real|surf-hash|pbf");
  analyze->add_option("--hash-bits", hash_bits, "surf-hash stored bits");
  analyze->add_option("--suffix-bits", suffix_bits, "surf-real stored bits");
  analyze->add_option("--pbf-p", pbf_p, "distinct prefixes");
  analyze->add_option("--pbf-eps", pbf_eps, "bloom FPR");
  analyze->add_option("--out", out, "CSV path (stdout when omitted)");

  auto* report = app.add_subcommand("report", "summarize an attack report");
  report->add_option("--report", report_path, "report JSON path")->required();
  report->add_option("--csv", csv_out, "re-emit amortized series CSV");

  CLI11_PARSE(app, argc, argv);

  try {
    ExperimentSpec spec = load_spec(config_path);
    if (n) spec.n = n;
    if (m_bits) spec.m_bits = m_bits;
    if (seed) {
      spec.dataset_seed = seed;
      spec.attack.seed = seed;
      spec.system.seed = seed;
    }
    if (!dataset_file.empty()) spec.dataset_file = dataset_file;
    if (!filter_kind.empty()) {
      auto k = filter_kind_from_string(filter_kind);
      if (!k) throw ContractViolation("unknown filter kind: " + filter_kind);
      spec.filter.kind = *k;
    }
    if (!mode.empty())
      spec.attack.mode = mode == "timed" ? AttackMode::timed : AttackMode::idealized;
    if (guesses) spec.attack.guesses = guesses;
    if (min_prefix) spec.attack.min_prefix_bits = min_prefix;
    if (!out.empty() && attack->parsed()) spec.output_dir = out;

    if (gen->parsed()) return cmd_gen(spec, out);
    if (build->parsed()) return cmd_build(spec, probes);
    if (fpr->parsed()) return cmd_fpr(spec, fpr_kinds, probes, out);
    if (hist->parsed()) return cmd_timing_hist(spec, probes, labeled, out);
    if (attack->parsed()) return cmd_attack(spec);
    if (analyze->parsed())
      return cmd_analyze(grid, double(spec.n), spec.m_bits ? spec.m_bits : 64, l_bits, variant,
                         hash_bits, suffix_bits, pbf_p, pbf_eps, out);
    if (report->parsed()) return cmd_report(report_path, csv_out);
  } catch (const std::exception& e) {
    std::cerr << "{\"error\":\"" << e.what() << "\"}\n";
    return 1;
  }
  return 0;
}
