// Copyright 2026 The pqcascade Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// pqcascade command-line tool. Each subcommand is a thin wrapper over the
// library; see README.md for examples.

#include <omp.h>

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <CLI11.hpp>

#include "pqcascade/benchmark.hpp"
#include "pqcascade/embedding_store.hpp"
#include "pqcascade/error.hpp"
#include "pqcascade/evaluation.hpp"
#include "pqcascade/filter_search.hpp"
#include "pqcascade/quantizer.hpp"
#include "pqcascade/rerank_fusion.hpp"

namespace pqcascade {
namespace {

void Log(const std::string& msg) { std::cerr << "pqcascade: " << msg << '\n'; }

// Options shared by every subcommand.
struct Common {
  std::uint64_t seed = 1;
  int threads = 0;  // 0 = all cores
  std::string config;
};

void AddCommon(CLI::App* sub, Common& c) {
  sub->add_option("--seed", c.seed, "Seed for every stochastic stage");
  sub->add_option("--threads", c.threads, "Thread cap (0 = all cores)")
      ->check(CLI::NonNegativeNumber);
  sub->add_option("--config", c.config,
                  "key=value file preloading flags; the command line wins");
}

// "auto" or a positive integer.
std::optional<std::size_t> ParseK(const std::string& s) {
  if (s == "auto") return std::nullopt;
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != s.size() || v == 0) {
    throw CLI::ValidationError("--k", "expected a positive integer or 'auto', got '" + s + "'");
  }
  return static_cast<std::size_t>(v);
}

std::size_t ResolveK(const std::string& flag, std::size_t gallery_size) {
  if (const auto k = ParseK(flag)) return *k;
  const std::size_t k = DefaultCandidateSize(gallery_size);
  Log("--k auto resolved to " + std::to_string(k) + " for a gallery of " +
      std::to_string(gallery_size));
  return k;
}

std::vector<float> NormalizedRow(const Dataset& ds, std::size_t i) {
  return L2Normalize(ds.vector(i));
}

// Appends `--key=value` for config entries whose flag is absent from argv.
std::vector<std::string> ApplyConfigFile(std::vector<std::string> args) {
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty()) return args;
  std::ifstream in(path);
  PQC_THROW_IF_NOT(in.good(), ErrorKind::kMissingFile, "missing config file: " + path);
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw CLI::ValidationError("--config", path + ":" + std::to_string(lineno) +
                                                 ": expected key=value");
    }
    std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.rfind("--", 0) == 0) key = key.substr(2);
    const std::string flag = "--" + key;
    const bool given = std::any_of(args.begin(), args.end(), [&](const std::string& a) {
      return a == flag || a.rfind(flag + "=", 0) == 0;
    });
    if (!given) args.push_back(flag + "=" + value);
  }
  return args;
}

void EchoConfig(const CLI::App* sub) {
  std::istringstream lines(sub->config_to_str(true, false));
  std::string line, joined;
  while (std::getline(lines, line)) {
    if (line.empty() || line[0] == '[' || line[0] == '#') continue;
    joined += (joined.empty() ? "" : " ") + line;
  }
  Log(sub->get_name() + " config: " + joined);
}

Dataset Concat(const Dataset& a, const Dataset& b) {
  Dataset out(a.dim());
  out.Reserve(a.size() + b.size());
  for (std::size_t i = 0; i < a.size(); ++i) out.Add(a.info(i), a.vector(i));
  for (std::size_t i = 0; i < b.size(); ++i) out.Add(b.info(i), b.vector(i));
  return out;
}

std::vector<ProbeResult> ToResults(const Dataset& queries,
                                   std::vector<CandidateList> lists) {
  std::vector<ProbeResult> out(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    out[i].probe_id = queries.info(i).id;
    out[i].ranked = std::move(lists[i]);
  }
  return out;
}

// ---------------------------------------------------------------- gen-data
struct GenArgs {
  std::size_t subjects = 1000, images = 4, distractors = 10000, impostors = 0;
  std::uint32_t dim = 320;
  double noise = 0.085, poorly_aligned = 0.2;
  std::string gallery, probes;
};

void GenData(const GenArgs& a, const Common& c) {
  BenchConfig cfg;
  cfg.num_subjects = a.subjects;
  cfg.images_per_subject = a.images;
  cfg.impostor_probes = a.impostors;
  cfg.dim = a.dim;
  cfg.m = 1;
  cfg.within_class_noise = a.noise;
  cfg.poorly_aligned_fraction = a.poorly_aligned;
  cfg.seed = c.seed;
  const BenchData data = GenerateBenchData(cfg, a.distractors);
  const Dataset gallery = AssembleGallery(data, a.distractors);
  const Dataset probes = Concat(data.probes, data.impostors);
  SaveDataset(gallery, a.gallery);
  SaveDataset(probes, a.probes);
  Log("wrote " + std::to_string(gallery.size()) + " gallery rows to " + a.gallery +
      " and " + std::to_string(probes.size()) + " probe rows to " + a.probes);
}

// ---------------------------------------------------------- train-codebook
struct TrainArgs {
  std::string in, out;
  std::uint32_t m = 64, z = 256;
  int iters = 25;
  double tol = 1e-5;
  std::size_t sample = 0;
};

void Train(const TrainArgs& a, const Common& c) {
  const Dataset ds = LoadDataset(a.in);
  const std::size_t n = a.sample == 0 ? ds.size() : std::min(a.sample, ds.size());
  // Codes are computed on normalized vectors, so train in that space.
  std::vector<float> rows(ds.values().begin(), ds.values().begin() + n * ds.dim());
  for (std::size_t i = 0; i < n; ++i) {
    L2NormalizeInPlace(std::span<float>(rows.data() + i * ds.dim(), ds.dim()));
  }
  TrainParams tp;
  tp.m = a.m;
  tp.z = a.z;
  tp.max_iters = a.iters;
  tp.rel_tol = a.tol;
  tp.seed = c.seed;
  TrainTrace trace;
  const PQCodebook cb = TrainCodebooks(rows, ds.dim(), tp, &trace);
  double sse = 0.0;
  for (const auto& h : trace.sse_history) sse += h.back();
  SaveCodebook(cb, a.out);
  Log("trained m=" + std::to_string(a.m) + " z=" + std::to_string(a.z) + " on " +
      std::to_string(n) + " rows; final SSE " + std::to_string(sse) + "; wrote " + a.out);
}

// ------------------------------------------------------------- build-index
struct BuildArgs {
  std::string in, codebook, out;
  bool no_raw = false;
};

void Build(const BuildArgs& a, const Common&) {
  Dataset ds = LoadDataset(a.in);
  const PQCodebook cb = LoadCodebook(a.codebook);
  const GalleryIndex index = BuildIndex(std::move(ds), cb, !a.no_raw);
  SaveIndex(index, a.out);
  Log("indexed " + std::to_string(index.size()) + " vectors into " + a.out +
      (a.no_raw ? " (codes only)" : " (codes and raw vectors)"));
}

// ------------------------------------------------------------------ search
struct SearchArgs {
  std::string index, query, out, k = "10", metric = "cosine";
  bool exact = false;
};

void Search(const SearchArgs& a, const Common&) {
  const GalleryIndex index = LoadIndex(a.index);
  const Dataset queries = LoadDataset(a.query);
  const std::size_t k = ResolveK(a.k, index.size());
  const Metric metric = ParseMetric(a.metric);
  std::vector<CandidateList> lists(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const auto q = NormalizedRow(queries, i);
    lists[i] = a.exact ? SearchExact(index, q, k, metric) : SearchPQ(index, q, k);
  }
  WriteHitsJsonl(ToResults(queries, std::move(lists)), a.out);
  Log(std::string(a.exact ? "exact " + a.metric : "pq") + " search of " +
      std::to_string(queries.size()) + " queries at k=" + std::to_string(k) +
      "; wrote " + a.out);
}

// ---------------------------------------------------------- cascade-search
struct CascadeArgs {
  std::string index, query, out, k = "auto", strategy = "df-then-cots";
  std::string slow = "reference", slow_scores;
  double perturbation = 0.05;
};

void Cascade(const CascadeArgs& a, const Common& c) {
  const GalleryIndex index = LoadIndex(a.index);
  const Dataset queries = LoadDataset(a.query);
  const std::size_t k = ResolveK(a.k, index.size());
  const FusionStrategy strategy = ParseStrategy(a.strategy);
  std::unique_ptr<SlowMatcher> matcher;
  if (a.slow == "reference") {
    matcher = std::make_unique<ReferenceSlowMatcher>(index, a.perturbation, c.seed);
  } else {
    PQC_THROW_IF_NOT(!a.slow_scores.empty(), ErrorKind::kInvalidArgument,
                     "--slow file needs --slow-scores");
    matcher = std::make_unique<FileSlowMatcher>(a.slow_scores);
  }
  std::vector<std::vector<float>> normalized(queries.size());
  std::vector<ProbeView> views(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    normalized[i] = NormalizedRow(queries, i);
    views[i] = {queries.info(i).id, normalized[i]};
  }
  auto lists = CascadeSearchBatch(index, *matcher, views, k, strategy);
  WriteHitsJsonl(ToResults(queries, std::move(lists)), a.out);
  Log(std::string(StrategyName(strategy)) + " over " + std::to_string(queries.size()) +
      " queries at k=" + std::to_string(k) + "; wrote " + a.out);
}

// ---------------------------------------------------------------- evaluate
struct EvalArgs {
  std::string results, gallery, probes, out_json, out_text;
  std::vector<double> far = {0.001, 0.01, 0.1};
  std::vector<std::size_t> ranks = {1, 10};
  std::size_t cmc_rank = 100;
};

void Eval(const EvalArgs& a, const Common&) {
  const Dataset gallery = LoadDataset(a.gallery);
  const Dataset probes = LoadDataset(a.probes);
  std::unordered_map<std::string, std::vector<std::uint64_t>> by_subject;
  for (const auto& info : gallery.infos()) {
    if (info.subject) by_subject[*info.subject].push_back(info.id);
  }
  std::unordered_map<std::uint64_t, CandidateList> lists;
  for (auto& r : ReadResultsJsonl(a.results)) lists[r.probe_id] = std::move(r.ranked);
  std::unordered_set<std::uint64_t> probe_ids;
  std::vector<ProbeResult> genuine, impostor;
  for (const auto& info : probes.infos()) {
    probe_ids.insert(info.id);
    ProbeResult r;
    r.probe_id = info.id;
    r.subject = info.subject;
    if (auto it = lists.find(info.id); it != lists.end()) r.ranked = it->second;
    if (info.subject) {
      if (auto it = by_subject.find(*info.subject); it != by_subject.end()) {
        r.mates.insert(it->second.begin(), it->second.end());
      }
    }
    (r.mates.empty() ? impostor : genuine).push_back(std::move(r));
  }
  for (const auto& [id, list] : lists) {
    PQC_THROW_IF_NOT(probe_ids.contains(id), ErrorKind::kNotFound,
                     "results name probe " + std::to_string(id) +
                         ", which is not in " + a.probes);
  }
  EvalOptions opt;
  opt.far_targets = a.far;
  opt.dir_ranks = a.ranks;
  opt.cmc_max_rank = a.cmc_rank;
  const EvalReport rep = Evaluate(genuine, impostor, opt);
  WriteReportJson(rep, a.out_json);
  if (!a.out_text.empty()) {
    std::ofstream out(a.out_text);
    PQC_THROW_IF_NOT(out.good(), ErrorKind::kIo, "cannot write " + a.out_text);
    WriteReportText(rep, out);
  }
  Log("evaluated " + std::to_string(genuine.size()) + " genuine and " +
      std::to_string(impostor.size()) + " impostor probes; mAP " +
      std::to_string(rep.map) + "; wrote " + a.out_json);
}

// ------------------------------------------------------------------- bench
struct BenchArgs {
  std::string mode = "scaling", out_json, out_csv;
  bool no_exact = false, plus_cots = false;
  BenchConfig cfg;
};

void Bench(BenchArgs a, const Common& c) {
  a.cfg.seed = c.seed;
  a.cfg.threads = c.threads > 0 ? c.threads : omp_get_max_threads();
  a.cfg.measure_exact = !a.no_exact;
  a.cfg.include_plus_cots = a.plus_cots;
  const BenchReport rep = a.mode == "ksweep" ? RunKSweep(a.cfg) : RunScalingBench(a.cfg);
  WriteBenchReport(rep, a.out_json, a.out_csv);
  for (const auto& s : rep.k_sweep) {
    Log("N=" + std::to_string(s.distractors) + " argmax k=" + std::to_string(s.argmax_k) +
        " mAP " + std::to_string(s.best_map));
  }
  for (const auto& t : rep.scan_timings) {
    Log("N=" + std::to_string(t.distractors) + " pq " +
        std::to_string(t.pq_seconds_min * 1e3) + " ms/query, exact " +
        std::to_string(t.exact_seconds_min * 1e3) + " ms/query");
  }
  Log("wrote " + a.out_json + (a.out_csv.empty() ? "" : " and " + a.out_csv));
}

int Main(int argc, char** argv) {
  CLI::App app{"Product-quantization filtering with cascade re-ranking"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  app.set_help_all_flag("--help-all", "Help for every subcommand");
  Common common;

  GenArgs gen;
  auto* s_gen = app.add_subcommand("gen-data", "Generate a synthetic gallery and probe set");
  s_gen->add_option("--subjects", gen.subjects, "Probe subjects")->check(CLI::PositiveNumber);
  s_gen->add_option("--images", gen.images, "Images per subject (one is the probe)")
      ->check(CLI::Range(2, 1 << 20));
  s_gen->add_option("--distractors", gen.distractors, "Background gallery rows");
  s_gen->add_option("--impostors", gen.impostors, "Probes without gallery mates");
  s_gen->add_option("--dim", gen.dim, "Embedding dimension")->check(CLI::PositiveNumber);
  s_gen->add_option("--noise", gen.noise, "Within-class noise");
  s_gen->add_option("--poorly-aligned", gen.poorly_aligned, "Poorly aligned fraction")
      ->check(CLI::Range(0.0, 1.0));
  s_gen->add_option("--gallery", gen.gallery, "Output gallery vector file")->required();
  s_gen->add_option("--probes", gen.probes, "Output probe vector file")->required();
  AddCommon(s_gen, common);

  TrainArgs train;
  auto* s_train = app.add_subcommand("train-codebook", "Train PQ codebooks");
  s_train->add_option("--in", train.in, "Training vector file")->required();
  s_train->add_option("--m", train.m, "Sub-spaces")->check(CLI::PositiveNumber);
  s_train->add_option("--z", train.z, "Centroids per sub-space")->check(CLI::Range(1, 65536));
  s_train->add_option("--iters", train.iters, "Maximum k-means iterations");
  s_train->add_option("--tol", train.tol, "Relative SSE improvement to stop at");
  s_train->add_option("--train-sample", train.sample, "Use the first n rows (0 = all)");
  s_train->add_option("--out", train.out, "Output codebook file")->required();
  AddCommon(s_train, common);

  BuildArgs build;
  auto* s_build = app.add_subcommand("build-index", "Encode a gallery into an index file");
  s_build->add_option("--in", build.in, "Gallery vector file")->required();
  s_build->add_option("--codebook", build.codebook, "Codebook file")->required();
  s_build->add_option("--out", build.out, "Output index file")->required();
  s_build->add_flag("--no-raw", build.no_raw, "Store codes only (no exact or cascade search)");
  AddCommon(s_build, common);

  SearchArgs search;
  auto* s_search = app.add_subcommand("search", "PQ or exact top-k search");
  s_search->add_option("--index", search.index, "Index file")->required();
  s_search->add_option("--query", search.query, "Query vector file")->required();
  s_search->add_option("--k", search.k, "Results per query, or 'auto'");
  s_search->add_flag("--exact", search.exact, "Exact search over stored vectors");
  s_search->add_option("--metric", search.metric, "Exact metric: cosine, l2, l1");
  s_search->add_option("--out", search.out, "Output JSON-lines file")->required();
  AddCommon(s_search, common);

  CascadeArgs cascade;
  auto* s_cascade = app.add_subcommand("cascade-search", "PQ filter then slow re-ranking");
  s_cascade->add_option("--index", cascade.index, "Index file")->required();
  s_cascade->add_option("--query", cascade.query, "Query vector file")->required();
  s_cascade->add_option("--k", cascade.k, "Candidate list size, or 'auto'");
  s_cascade->add_option("--strategy", cascade.strategy,
                        "df-then-cots, df-then-cots-only, df-then-cots-rank, df-plus-cots");
  s_cascade->add_option("--slow", cascade.slow, "Slow matcher: reference or file")
      ->check(CLI::IsMember({"reference", "file"}));
  s_cascade->add_option("--slow-scores", cascade.slow_scores, "Slow score file for --slow file");
  s_cascade->add_option("--perturbation", cascade.perturbation,
                        "Noise scale of the reference slow matcher");
  s_cascade->add_option("--out", cascade.out, "Output JSON-lines file")->required();
  AddCommon(s_cascade, common);

  EvalArgs eval;
  auto* s_eval = app.add_subcommand("evaluate", "Score search results against labels");
  s_eval->add_option("--results", eval.results, "Results JSON-lines file")->required();
  s_eval->add_option("--gallery", eval.gallery, "Gallery vector file (for labels)")->required();
  s_eval->add_option("--probes", eval.probes, "Probe vector file (for labels)")->required();
  s_eval->add_option("--far", eval.far, "FAR targets")->delimiter(',');
  s_eval->add_option("--ranks", eval.ranks, "DIR ranks")->delimiter(',');
  s_eval->add_option("--cmc-rank", eval.cmc_rank, "Largest CMC rank");
  s_eval->add_option("--out", eval.out_json, "Output JSON report")->required();
  s_eval->add_option("--out-text", eval.out_text, "Optional text report");
  AddCommon(s_eval, common);

  BenchArgs bench;
  BenchConfig& bc = bench.cfg;
  auto* s_bench = app.add_subcommand("bench", "Synthetic scaling or k-sweep benchmark");
  s_bench->add_option("--mode", bench.mode, "scaling or ksweep")
      ->check(CLI::IsMember({"scaling", "ksweep"}));
  s_bench->add_option("--distractors", bc.distractor_counts, "Distractor counts")
      ->delimiter(',');
  s_bench->add_option("--ks", bc.candidate_sizes, "k grid of the sweep")->delimiter(',');
  s_bench->add_option("--scaling-k", bc.scaling_k, "k of the scaling run");
  s_bench->add_option("--dim", bc.dim, "Embedding dimension");
  s_bench->add_option("--m", bc.m, "Sub-spaces");
  s_bench->add_option("--z", bc.z, "Centroids per sub-space");
  s_bench->add_option("--iters", bc.kmeans_iters, "k-means iterations");
  s_bench->add_option("--train-sample", bc.train_sample, "Codebook training rows");
  s_bench->add_option("--subjects", bc.num_subjects, "Probe subjects");
  s_bench->add_option("--images", bc.images_per_subject, "Images per subject");
  s_bench->add_option("--noise", bc.within_class_noise, "Within-class noise");
  s_bench->add_option("--poorly-aligned", bc.poorly_aligned_fraction, "Poorly aligned fraction");
  s_bench->add_option("--max-probes", bc.max_probes, "Evaluate at most n probes (0 = all)");
  s_bench->add_option("--perturbation", bc.slow_perturbation, "Slow matcher noise scale");
  s_bench->add_option("--repetitions", bc.repetitions, "Timed repetitions (>= 3)");
  s_bench->add_option("--timing-probes", bc.timing_probes, "Probes per timed repetition");
  s_bench->add_flag("--no-exact", bench.no_exact, "Skip exact-scan timing");
  s_bench->add_flag("--plus-cots", bench.plus_cots, "Also run df-plus-cots");
  s_bench->add_option("--out", bench.out_json, "Output JSON report")->required();
  s_bench->add_option("--out-csv", bench.out_csv, "Optional CSV of the cells");
  AddCommon(s_bench, common);

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    args = ApplyConfigFile(std::move(args));
    std::reverse(args.begin(), args.end());  // CLI11 consumes from the back
    app.parse(args);
    // Reject malformed flag values before touching any file.
    if (s_search->parsed()) {
      ParseK(search.k);
      ParseMetric(search.metric);
    }
    if (s_cascade->parsed()) {
      ParseK(cascade.k);
      ParseStrategy(cascade.strategy);
    }
    if (s_bench->parsed()) ValidateBenchConfig(bench.cfg);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const Error& e) {
    std::cerr << "pqcascade: error: " << e.what() << '\n';
    return 2;
  }

  if (common.threads > 0) omp_set_num_threads(common.threads);
  CLI::App* sub = app.get_subcommands().front();
  EchoConfig(sub);
  try {
    if (sub == s_gen) GenData(gen, common);
    if (sub == s_train) Train(train, common);
    if (sub == s_build) Build(build, common);
    if (sub == s_search) Search(search, common);
    if (sub == s_cascade) Cascade(cascade, common);
    if (sub == s_eval) Eval(eval, common);
    if (sub == s_bench) Bench(bench, common);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "pqcascade: usage error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "pqcascade: error (" << ErrorKindName(e.kind()) << "): " << e.what()
              << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "pqcascade: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace
}  // namespace pqcascade

int main(int argc, char** argv) { return pqcascade::Main(argc, argv); }
