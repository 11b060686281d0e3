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

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pqcascade/evaluation.hpp"
#include "pqcascade/filter_search.hpp"
#include "pqcascade/rerank_fusion.hpp"

namespace pqcascade {

/// Desk-scale experiment grid. Galleries are nested: the gallery for a
/// distractor count N is the mate set followed by the first N distractors,
/// and one codebook (trained once) serves every N.
struct BenchConfig {
  std::vector<std::size_t> distractor_counts = {10000, 100000, 1000000};
  // k grid of the k-sweep; the scaling run uses `scaling_k`.
  std::vector<std::size_t> candidate_sizes = {10,    30,    100,   300,   1000,
                                              3000,  10000, 30000, 100000};
  std::size_t scaling_k = 100;

  std::uint32_t dim = 320;
  std::uint32_t m = 64;
  std::uint32_t z = 256;
  int kmeans_iters = 25;
  std::size_t train_sample = 10000;

  // Synthetic identities: image 0 of each subject is the probe, the rest
  // are its gallery mates.
  std::size_t num_subjects = 1000;
  std::size_t images_per_subject = 4;
  double within_class_noise = 0.085;
  double poorly_aligned_fraction = 0.2;
  std::size_t impostor_probes = 0;
  // Evaluate at most this many genuine probes (0 = all).
  std::size_t max_probes = 0;

  double slow_perturbation = 0.05;
  std::uint64_t seed = 1;

  int threads = 1;
  int repetitions = 3;
  std::size_t timing_probes = 10;
  bool measure_exact = true;
  bool include_plus_cots = false;
  // Refuse configurations whose raw vectors would exceed this many bytes.
  std::uint64_t memory_ceiling_bytes = 3ULL << 30;
};

/// Throws kInvalidArgument for empty or non-positive grid entries,
/// repetitions < 3, or a configuration over the memory ceiling.
void ValidateBenchConfig(const BenchConfig& config);

struct BenchCell {
  std::size_t distractors = 0;
  std::size_t gallery_size = 0;
  std::size_t k = 0;
  std::string strategy;  // "fast-only" or a fusion strategy name
  double map = 0.0;
  double search_seconds_mean = 0.0;
  double search_seconds_min = 0.0;
  double enrollment_seconds = 0.0;
};

struct ScanTiming {
  std::size_t distractors = 0;
  std::size_t gallery_size = 0;
  double exact_seconds_mean = 0.0;
  double exact_seconds_min = 0.0;
  double pq_seconds_mean = 0.0;
  double pq_seconds_min = 0.0;
  double enrollment_seconds = 0.0;
};

struct KSweepSummary {
  std::size_t distractors = 0;
  std::size_t gallery_size = 0;
  std::size_t argmax_k = 0;
  double best_map = 0.0;
};

struct BenchReport {
  BenchConfig config;
  std::vector<BenchCell> cells;
  std::vector<ScanTiming> scan_timings;
  std::vector<KSweepSummary> k_sweep;
};

/// Synthetic benchmark population.
struct BenchData {
  Dataset probes;       // one genuine probe per subject
  Dataset impostors;    // probes with no gallery mate
  Dataset mates;        // gallery images of the probe subjects
  Dataset distractors;  // background gallery, one identity each
};

BenchData GenerateBenchData(const BenchConfig& config,
                            std::size_t max_distractors);

/// Mates followed by the first `distractors` background rows.
Dataset AssembleGallery(const BenchData& data, std::size_t distractors);

/// Trains the shared codebook on the first `train_sample` rows of the
/// largest gallery.
PQCodebook TrainBenchCodebook(const BenchConfig& config, const Dataset& gallery);

/// Probe results for one strategy ("fast-only" or a fusion strategy) at
/// candidate size k over every genuine probe; mates resolved by subject.
std::vector<ProbeResult> RunStrategy(const GalleryIndex& index,
                                     const SlowMatcher& matcher,
                                     const Dataset& probes,
                                     const Dataset& gallery_subjects,
                                     std::size_t k,
                                     std::optional<FusionStrategy> strategy);

/// Per N: builds the gallery, times exact and PQ scans, and runs fast-only
/// plus every cascade strategy at `scaling_k`.
BenchReport RunScalingBench(const BenchConfig& config);

/// Per N: mAP of DF_THEN_COTS and of the fast filter alone for every
/// candidate size k <= gallery size, with the DF_THEN_COTS argmax-k per N
/// (the smallest k attaining the maximum).
BenchReport RunKSweep(const BenchConfig& config);

std::string BenchReportJson(const BenchReport& report);
void WriteBenchReport(const BenchReport& report,
                      const std::filesystem::path& json_path,
                      const std::filesystem::path& csv_path);

/// Loose shape check used by the acceptance suite and the CLI: values rise
/// (allowing drops of at most `tol`) up to the argmax, then fall (allowing
/// rises of at most `tol`).
bool IsUnimodal(const std::vector<double>& values, double tol);

}  // namespace pqcascade
