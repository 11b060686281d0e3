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

#include "pqcascade/benchmark.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <unordered_map>

#include <json.hpp>
#include <omp.h>

#include "pqcascade/error.hpp"
#include "pqcascade/kernels.hpp"

namespace pqcascade {

namespace {

using Clock = std::chrono::steady_clock;

constexpr std::string_view kFastOnly = "fast-only";

double Seconds(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double>(b - a).count();
}

struct TimingStats {
  double mean = 0.0;
  double min = 0.0;
};

// One untimed warm-up call, then `reps` timed calls of `fn`, each returning
// the number of work items it covered. Reported per item.
template <typename Fn>
TimingStats Time(int reps, Fn fn) {
  fn();
  TimingStats s;
  s.min = std::numeric_limits<double>::infinity();
  for (int r = 0; r < reps; ++r) {
    const auto t0 = Clock::now();
    const std::size_t items = fn();
    const double per = Seconds(t0, Clock::now()) /
                       static_cast<double>(std::max<std::size_t>(items, 1));
    s.mean += per;
    s.min = std::min(s.min, per);
  }
  s.mean /= reps;
  return s;
}

class ThreadScope {
 public:
  explicit ThreadScope(int threads) : saved_(omp_get_max_threads()) {
    if (threads > 0) omp_set_num_threads(threads);
  }
  ~ThreadScope() { omp_set_num_threads(saved_); }

 private:
  int saved_;
};

using MateMap = std::unordered_map<std::string, std::vector<std::uint64_t>>;

MateMap BuildMateMap(const Dataset& pool) {
  MateMap out;
  for (const auto& info : pool.infos()) {
    if (info.subject) out[*info.subject].push_back(info.id);
  }
  return out;
}

ProbeResult MakeResult(const Dataset& probes, std::size_t i,
                       const MateMap& mates, CandidateList ranked) {
  ProbeResult r;
  r.probe_id = probes.info(i).id;
  r.subject = probes.info(i).subject;
  r.ranked = std::move(ranked);
  if (r.subject) {
    const auto it = mates.find(*r.subject);
    if (it != mates.end()) r.mates.insert(it->second.begin(), it->second.end());
  }
  return r;
}

std::size_t ProbeCount(const BenchConfig& c, const Dataset& probes) {
  return c.max_probes == 0 ? probes.size()
                           : std::min(c.max_probes, probes.size());
}

struct Population {
  BenchData data;
  GalleryIndex full;
  std::vector<std::size_t> sizes;  // distractor counts, ascending
};

Population Prepare(const BenchConfig& config) {
  ValidateBenchConfig(config);
  Population pop;
  pop.sizes = config.distractor_counts;
  std::sort(pop.sizes.begin(), pop.sizes.end());
  pop.data = GenerateBenchData(config, pop.sizes.back());
  Dataset gallery = AssembleGallery(pop.data, pop.sizes.back());
  pop.data.distractors = Dataset();
  const PQCodebook codebook = TrainBenchCodebook(config, gallery);
  pop.full = BuildIndex(std::move(gallery), codebook, /*keep_raw=*/true);
  return pop;
}

double MeanOf(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

void ValidateBenchConfig(const BenchConfig& c) {
  auto positive = [](const std::vector<std::size_t>& v) {
    return !v.empty() &&
           std::all_of(v.begin(), v.end(), [](std::size_t x) { return x > 0; });
  };
  PQC_THROW_IF_NOT(positive(c.distractor_counts), ErrorKind::kInvalidArgument,
                   "distractor counts must be non-empty and positive");
  PQC_THROW_IF_NOT(positive(c.candidate_sizes), ErrorKind::kInvalidArgument,
                   "candidate sizes must be non-empty and positive");
  PQC_THROW_IF_NOT(c.scaling_k >= 2, ErrorKind::kInvalidArgument,
                   "scaling k must be >= 2");
  PQC_THROW_IF_NOT(c.dim > 0 && c.m > 0 && c.z > 0 && c.dim % c.m == 0,
                   ErrorKind::kInvalidArgument,
                   "dim, m, z must be positive with m dividing dim");
  PQC_THROW_IF_NOT(c.num_subjects > 0 && c.images_per_subject >= 2,
                   ErrorKind::kInvalidArgument,
                   "need subjects with a probe and at least one mate");
  PQC_THROW_IF_NOT(c.repetitions >= 3, ErrorKind::kInvalidArgument,
                   "timing needs at least 3 repetitions");
  PQC_THROW_IF_NOT(c.threads >= 1 && c.timing_probes >= 1,
                   ErrorKind::kInvalidArgument,
                   "threads and timing probes must be positive");
  const std::size_t max_n =
      *std::max_element(c.distractor_counts.begin(), c.distractor_counts.end());
  const std::uint64_t rows =
      max_n + c.num_subjects * c.images_per_subject + c.impostor_probes;
  const std::uint64_t bytes = 2 * rows * c.dim * sizeof(float);
  PQC_THROW_IF_NOT(bytes <= c.memory_ceiling_bytes, ErrorKind::kInvalidArgument,
                   "benchmark needs ~" + std::to_string(bytes >> 20) +
                       " MiB of vectors, over the configured ceiling of " +
                       std::to_string(c.memory_ceiling_bytes >> 20) + " MiB");
}

BenchData GenerateBenchData(const BenchConfig& c, std::size_t max_distractors) {
  BenchData out;
  SyntheticParams sp;
  sp.num_subjects = c.num_subjects;
  sp.images_per_subject = c.images_per_subject;
  sp.dim = c.dim;
  sp.within_class_noise = c.within_class_noise;
  sp.poorly_aligned_fraction = c.poorly_aligned_fraction;
  sp.seed = c.seed;
  sp.subject_prefix = "s";
  const Dataset identities = GenerateSynthetic(sp);

  out.probes = Dataset(c.dim);
  out.mates = Dataset(c.dim);
  for (std::size_t i = 0; i < identities.size(); ++i) {
    // Probe ids live in their own range so they never collide with gallery ids.
    if (i % c.images_per_subject == 0) {
      RecordInfo info = identities.info(i);
      info.id += 1ULL << 62;
      out.probes.Add(std::move(info), identities.vector(i));
    } else {
      out.mates.Add(identities.info(i), identities.vector(i));
    }
  }

  // Background identities: one image each, so the sample is the center.
  SyntheticParams dp;
  dp.num_subjects = std::max<std::size_t>(max_distractors, 1);
  dp.images_per_subject = 1;
  dp.dim = c.dim;
  dp.seed = c.seed + 0x5bd1e995ULL;
  dp.id_offset = 1ULL << 40;
  dp.subject_prefix = "d";
  out.distractors = max_distractors == 0 ? Dataset(c.dim) : GenerateSynthetic(dp);

  out.impostors = Dataset(c.dim);
  if (c.impostor_probes > 0) {
    SyntheticParams ip;
    ip.num_subjects = c.impostor_probes;
    ip.images_per_subject = 1;
    ip.dim = c.dim;
    ip.seed = c.seed + 0x27d4eb2fULL;
    ip.id_offset = (1ULL << 62) + (1ULL << 40);
    ip.subject_prefix = "i";
    out.impostors = GenerateSynthetic(ip);
  }
  return out;
}

Dataset AssembleGallery(const BenchData& data, std::size_t distractors) {
  PQC_THROW_IF_NOT(distractors <= data.distractors.size(),
                   ErrorKind::kInvalidArgument,
                   "not enough generated distractors");
  Dataset g(data.mates.dim());
  g.Reserve(data.mates.size() + distractors);
  for (std::size_t i = 0; i < data.mates.size(); ++i) {
    g.Add(data.mates.info(i), data.mates.vector(i));
  }
  for (std::size_t i = 0; i < distractors; ++i) {
    g.Add(data.distractors.info(i), data.distractors.vector(i));
  }
  return g;
}

PQCodebook TrainBenchCodebook(const BenchConfig& c, const Dataset& gallery) {
  const std::size_t n = std::min(c.train_sample, gallery.size());
  TrainParams tp;
  tp.m = c.m;
  tp.z = c.z;
  tp.max_iters = c.kmeans_iters;
  tp.seed = c.seed;
  return TrainCodebooks(gallery.values().subspan(0, n * gallery.dim()),
                        gallery.dim(), tp);
}

std::vector<ProbeResult> RunStrategy(const GalleryIndex& index,
                                     const SlowMatcher& matcher,
                                     const Dataset& probes,
                                     const Dataset& mate_pool, std::size_t k,
                                     std::optional<FusionStrategy> strategy) {
  const MateMap mates = BuildMateMap(mate_pool);
  std::vector<ProbeResult> out(probes.size());
  const bool parallel = matcher.concurrent_safe();
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic, 4) if (parallel)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(probes.size()); ++i) {
    try {
      const auto row = static_cast<std::size_t>(i);
      const ProbeView probe{probes.info(row).id, probes.vector(row)};
      CandidateList ranked =
          strategy ? CascadeSearch(index, matcher, probe, k, *strategy,
                                   Exec::kSerial)
                   : SearchPQ(index, probe.vector, k, Exec::kSerial);
      out[row] = MakeResult(probes, row, mates, std::move(ranked));
    } catch (...) {
#pragma omp critical
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return out;
}

BenchReport RunScalingBench(const BenchConfig& config) {
  ThreadScope threads(config.threads);
  Population pop = Prepare(config);
  const std::size_t np = ProbeCount(config, pop.data.probes);
  const Dataset probes = pop.data.probes.Slice(0, np);
  const std::size_t nt = std::min(config.timing_probes, np);

  BenchReport report;
  report.config = config;
  for (std::size_t n : pop.sizes) {
    const GalleryIndex index = pop.full.Prefix(pop.data.mates.size() + n);
    const ReferenceSlowMatcher matcher(index, config.slow_perturbation,
                                       config.seed);
    const std::size_t k = std::min(config.scaling_k, index.size());

    ScanTiming st;
    st.distractors = n;
    st.gallery_size = index.size();
    // Enrollment is a bulk pass, timed once.
    const auto t0 = Clock::now();
    const auto codes = EncodeBatch(index.codebook(), index.raw());
    st.enrollment_seconds = Seconds(t0, Clock::now());
    const TimingStats pq = Time(config.repetitions, [&] {
      for (std::size_t i = 0; i < nt; ++i) SearchPQ(index, probes.vector(i), k);
      return nt;
    });
    st.pq_seconds_mean = pq.mean;
    st.pq_seconds_min = pq.min;
    if (config.measure_exact) {
      const TimingStats ex = Time(config.repetitions, [&] {
        for (std::size_t i = 0; i < nt; ++i) {
          SearchExact(index, probes.vector(i), k, Metric::kCosine);
        }
        return nt;
      });
      st.exact_seconds_mean = ex.mean;
      st.exact_seconds_min = ex.min;
    }
    report.scan_timings.push_back(st);

    std::vector<std::optional<FusionStrategy>> strategies = {
        std::nullopt, FusionStrategy::kDfThenCots,
        FusionStrategy::kDfThenCotsOnly, FusionStrategy::kDfThenCotsRank};
    if (config.include_plus_cots) strategies.push_back(FusionStrategy::kDfPlusCots);
    for (const auto& strategy : strategies) {
      BenchCell cell;
      cell.distractors = n;
      cell.gallery_size = index.size();
      cell.k = k;
      cell.strategy = strategy ? std::string(StrategyName(*strategy))
                               : std::string(kFastOnly);
      cell.enrollment_seconds = st.enrollment_seconds;
      const auto results =
          RunStrategy(index, matcher, probes, pop.data.mates, k, strategy);
      cell.map = MeanAveragePrecision(results);
      const TimingStats ts = Time(config.repetitions, [&] {
        for (std::size_t i = 0; i < nt; ++i) {
          const ProbeView probe{probes.info(i).id, probes.vector(i)};
          if (strategy) {
            CascadeSearch(index, matcher, probe, k, *strategy);
          } else {
            SearchPQ(index, probe.vector, k);
          }
        }
        return nt;
      });
      cell.search_seconds_mean = ts.mean;
      cell.search_seconds_min = ts.min;
      report.cells.push_back(cell);
    }
  }
  return report;
}

BenchReport RunKSweep(const BenchConfig& config) {
  ThreadScope threads(config.threads);
  Population pop = Prepare(config);
  const std::size_t np = ProbeCount(config, pop.data.probes);
  const Dataset probes = pop.data.probes.Slice(0, np);
  const MateMap mates = BuildMateMap(pop.data.mates);

  std::vector<std::size_t> ks = config.candidate_sizes;
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());

  BenchReport report;
  report.config = config;
  for (std::size_t n : pop.sizes) {
    const GalleryIndex index = pop.full.Prefix(pop.data.mates.size() + n);
    const ReferenceSlowMatcher matcher(index, config.slow_perturbation,
                                       config.seed);
    std::vector<std::size_t> grid;
    for (std::size_t k : ks) {
      if (k >= 2 && k <= index.size()) grid.push_back(k);
    }
    if (grid.empty()) continue;
    const std::size_t kmax = grid.back();

    // ap[g][p]: AP of probe p at candidate size grid[g]. Candidates for every
    // k are the prefix of the kmax list, which equals a fresh top-k search.
    std::vector<std::vector<double>> ap(grid.size(), std::vector<double>(np));
    std::vector<std::vector<double>> ap_fast = ap;
    std::exception_ptr error;
#pragma omp parallel for schedule(dynamic, 1)
    for (std::int64_t pi = 0; pi < static_cast<std::int64_t>(np); ++pi) {
      try {
        const auto p = static_cast<std::size_t>(pi);
        const ProbeView probe{probes.info(p).id, probes.vector(p)};
        const CandidateList fast = SearchPQ(index, probe.vector, kmax, Exec::kSerial);
        std::vector<double> slow(fast.size());
        for (std::size_t i = 0; i < fast.size(); ++i) {
          slow[i] = matcher.Score(probe, fast[i].id);
        }
        for (std::size_t g = 0; g < grid.size(); ++g) {
          const std::size_t k = std::min(grid[g], fast.size());
          ap_fast[g][p] = AveragePrecision(MakeResult(
              probes, p, mates, CandidateList(fast.begin(), fast.begin() + k)));
          CandidateList fused = FuseCandidates(
              std::span(fast).first(k), std::span<const double>(slow).first(k),
              FusionStrategy::kDfThenCots);
          ap[g][p] = AveragePrecision(MakeResult(probes, p, mates, std::move(fused)));
        }
      } catch (...) {
#pragma omp critical
        if (!error) error = std::current_exception();
      }
    }
    if (error) std::rethrow_exception(error);

    KSweepSummary summary;
    summary.distractors = n;
    summary.gallery_size = index.size();
    summary.best_map = -1.0;
    for (std::size_t g = 0; g < grid.size(); ++g) {
      BenchCell cell;
      cell.distractors = n;
      cell.gallery_size = index.size();
      cell.k = grid[g];
      cell.strategy = std::string(StrategyName(FusionStrategy::kDfThenCots));
      cell.map = MeanOf(ap[g]);
      if (cell.map > summary.best_map) {
        summary.best_map = cell.map;
        summary.argmax_k = cell.k;
      }
      report.cells.push_back(cell);
      cell.strategy = std::string(kFastOnly);
      cell.map = MeanOf(ap_fast[g]);
      report.cells.push_back(cell);
    }
    if (config.include_plus_cots) {
      BenchCell cell;
      cell.distractors = n;
      cell.gallery_size = index.size();
      cell.k = index.size();
      cell.strategy = std::string(StrategyName(FusionStrategy::kDfPlusCots));
      cell.map = MeanAveragePrecision(RunStrategy(
          index, matcher, probes, pop.data.mates, index.size(),
          FusionStrategy::kDfPlusCots));
      report.cells.push_back(cell);
    }
    report.k_sweep.push_back(summary);
  }
  return report;
}

bool IsUnimodal(const std::vector<double>& values, double tol) {
  if (values.empty()) return true;
  const std::size_t peak = static_cast<std::size_t>(
      std::max_element(values.begin(), values.end()) - values.begin());
  for (std::size_t i = 1; i <= peak; ++i) {
    if (values[i] < values[i - 1] - tol) return false;
  }
  for (std::size_t i = peak + 1; i < values.size(); ++i) {
    if (values[i] > values[i - 1] + tol) return false;
  }
  return true;
}

std::string BenchReportJson(const BenchReport& r) {
  const BenchConfig& c = r.config;
  nlohmann::ordered_json j;
  j["config"] = {{"distractor_counts", c.distractor_counts},
                 {"candidate_sizes", c.candidate_sizes},
                 {"scaling_k", c.scaling_k},
                 {"dim", c.dim}, {"m", c.m}, {"z", c.z},
                 {"num_subjects", c.num_subjects},
                 {"images_per_subject", c.images_per_subject},
                 {"within_class_noise", c.within_class_noise},
                 {"poorly_aligned_fraction", c.poorly_aligned_fraction},
                 {"slow_perturbation", c.slow_perturbation},
                 {"seed", c.seed}, {"threads", c.threads},
                 {"repetitions", c.repetitions}};
  auto& cells = j["cells"] = nlohmann::ordered_json::array();
  for (const auto& x : r.cells) {
    cells.push_back({{"distractors", x.distractors},
                     {"gallery_size", x.gallery_size}, {"k", x.k},
                     {"strategy", x.strategy}, {"mAP", x.map},
                     {"search_seconds_mean", x.search_seconds_mean},
                     {"search_seconds_min", x.search_seconds_min},
                     {"enrollment_seconds", x.enrollment_seconds}});
  }
  auto& scans = j["scan_timings"] = nlohmann::ordered_json::array();
  for (const auto& s : r.scan_timings) {
    scans.push_back({{"distractors", s.distractors},
                     {"gallery_size", s.gallery_size},
                     {"exact_seconds_mean", s.exact_seconds_mean},
                     {"exact_seconds_min", s.exact_seconds_min},
                     {"pq_seconds_mean", s.pq_seconds_mean},
                     {"pq_seconds_min", s.pq_seconds_min},
                     {"enrollment_seconds", s.enrollment_seconds}});
  }
  auto& ks = j["k_sweep"] = nlohmann::ordered_json::array();
  for (const auto& s : r.k_sweep) {
    ks.push_back({{"distractors", s.distractors},
                  {"gallery_size", s.gallery_size},
                  {"argmax_k", s.argmax_k}, {"best_mAP", s.best_map}});
  }
  return j.dump(2);
}

void WriteBenchReport(const BenchReport& report,
                      const std::filesystem::path& json_path,
                      const std::filesystem::path& csv_path) {
  if (!json_path.empty()) {
    std::ofstream out(json_path);
    out << BenchReportJson(report) << '\n';
    PQC_THROW_IF_NOT(out.good(), ErrorKind::kIo,
                     "cannot write " + json_path.string());
  }
  if (!csv_path.empty()) {
    std::ofstream out(csv_path);
    out << "distractors,gallery_size,k,strategy,mAP,search_seconds_mean,"
           "search_seconds_min,enrollment_seconds\n";
    out.precision(17);
    for (const auto& x : report.cells) {
      out << x.distractors << ',' << x.gallery_size << ',' << x.k << ','
          << x.strategy << ',' << x.map << ',' << x.search_seconds_mean << ','
          << x.search_seconds_min << ',' << x.enrollment_seconds << '\n';
    }
    PQC_THROW_IF_NOT(out.good(), ErrorKind::kIo,
                     "cannot write " + csv_path.string());
  }
}

}  // namespace pqcascade
