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
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "pqcascade/filter_search.hpp"

namespace pqcascade {

/// A probe's ranked search output and the gallery ids that share its
/// identity. An empty mate set marks an impostor probe.
struct ProbeResult {
  std::uint64_t probe_id = 0;
  std::optional<std::string> subject;
  CandidateList ranked;
  std::unordered_set<std::uint64_t> mates;

  // Top-1 score, or -inf for an empty list.
  double top_score() const {
    return ranked.empty() ? -std::numeric_limits<double>::infinity()
                          : ranked.front().score;
  }
};

/// 1-based rank of the first mate in the list, if any mate was retrieved.
std::optional<std::size_t> BestMateRank(const ProbeResult& result);

/// Sum over list positions of P(k) * (R(k) - R(k-1)), R(0) = 0, where recall
/// counts against the whole mate set; mates missing from the list add
/// nothing. Throws for an empty mate set.
double AveragePrecision(const ProbeResult& result);

double MeanAveragePrecision(std::span<const ProbeResult> results);

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
};
PrecisionRecall PrecisionRecallAt(const ProbeResult& result, std::size_t k);

struct OpenSetPoint {
  double threshold = 0.0;
  double far = 0.0;
  double map = 0.0;
};

/// Probes are accepted when their top-1 score is >= the threshold. FAR is
/// the accepted fraction of impostors; a rejected genuine probe scores AP 0.
std::vector<OpenSetPoint> OpenSetSweep(std::span<const ProbeResult> genuine,
                                       std::span<const ProbeResult> impostor,
                                       std::span<const double> thresholds);

struct CmcPoint {
  std::size_t rank = 0;
  double rate = 0.0;
};
/// Ranks 1..max_rank (default: the longest list).
std::vector<CmcPoint> CmcCurve(std::span<const ProbeResult> results,
                               std::size_t max_rank = 0);

struct FarThreshold {
  double threshold = 0.0;
  double far = 0.0;
};

/// Smallest threshold t drawn from {-inf} U impostor scores U {just above the
/// largest impostor score} whose FAR = |{s >= t}| / n is <= target.
FarThreshold ThresholdForFar(std::span<const double> impostor_scores,
                             double far_target);

struct TarPoint {
  double far_target = 0.0;
  double far = 0.0;  // achieved
  double threshold = 0.0;
  double tar = 0.0;
};
std::vector<TarPoint> TarAtFar(std::span<const double> genuine_scores,
                               std::span<const double> impostor_scores,
                               std::span<const double> far_targets);

struct FnirFpirPoint {
  double threshold = 0.0;
  double fpir = 0.0;
  double fnir = 0.0;
};
/// FPIR: impostor probes whose top-1 score is >= t. FNIR: genuine probes
/// whose top-1 score is < t. Sorted by ascending FPIR.
std::vector<FnirFpirPoint> FnirFpir(std::span<const ProbeResult> genuine,
                                    std::span<const ProbeResult> impostor,
                                    std::span<const double> thresholds);

struct DirPoint {
  double far_target = 0.0;
  std::size_t rank = 0;
  double far = 0.0;
  double threshold = 0.0;
  double dir = 0.0;
};
/// Fraction of genuine probes with a mate at rank <= `rank` and a top-1
/// score above the threshold fixed by `far_target` on impostor top-1 scores.
DirPoint DirAtRankFar(std::span<const ProbeResult> genuine,
                      std::span<const ProbeResult> impostor, std::size_t rank,
                      double far_target);

struct EvalOptions {
  std::vector<double> far_targets = {0.001, 0.01, 0.1};
  std::vector<std::size_t> dir_ranks = {1, 10};
  std::size_t cmc_max_rank = 100;
  std::size_t pr_max_k = 100;
  std::size_t sweep_points = 100;
};

struct EvalReport {
  std::size_t genuine_probes = 0;
  std::size_t impostor_probes = 0;
  double map = 0.0;
  std::vector<std::pair<double, double>> pr_curve;  // (recall, precision)
  std::vector<CmcPoint> cmc;
  std::vector<TarPoint> tar_far;
  std::vector<DirPoint> dir_table;
  std::vector<FnirFpirPoint> fnir_fpir;
  std::vector<OpenSetPoint> openset_map_far;
};

/// Thresholds for open-set sweeps: -inf, up to `points - 2` quantiles of the
/// pooled top-1 scores, +inf; ascending.
std::vector<double> SweepThresholds(std::span<const ProbeResult> genuine,
                                    std::span<const ProbeResult> impostor,
                                    std::size_t points);

/// Every metric over one run. Impostor-dependent sections are empty when
/// there are no impostor probes. TAR@FAR pairs mate entries (genuine) against
/// non-mate entries (impostor) across all ranked lists.
EvalReport Evaluate(std::span<const ProbeResult> genuine,
                    std::span<const ProbeResult> impostor,
                    const EvalOptions& options = {});

void WriteReportJson(const EvalReport& report, const std::filesystem::path& path);
std::string ReportJson(const EvalReport& report);
void WriteReportText(const EvalReport& report, std::ostream& out);

/// One JSON object per line:
/// {"probe_id", "results": [{"gallery_id", "score", "rank"}], "accepted"}.
void WriteResultsJsonl(std::span<const ProbeResult> results,
                       const std::filesystem::path& path,
                       double accept_threshold =
                           -std::numeric_limits<double>::infinity());

/// One JSON object per returned hit, in rank order:
/// {"probe_id", "gallery_id", "score", "rank"}. Probes with no hits write
/// no lines.
void WriteHitsJsonl(std::span<const ProbeResult> results,
                    const std::filesystem::path& path);

/// Reads either shape above (lines may mix). Hits of one probe are grouped
/// in order of first appearance and sorted by rank. Mate sets are left empty.
std::vector<ProbeResult> ReadResultsJsonl(const std::filesystem::path& path);

}  // namespace pqcascade
