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
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "pqcascade/filter_search.hpp"

namespace pqcascade {

/// A probe as seen by the matchers: its id (for id-keyed external scores and
/// seeded perturbations) and its vector.
struct ProbeView {
  std::uint64_t id = 0;
  std::span<const float> vector;
};

/// The second, slower matcher of the cascade. Scores are similarities
/// (higher is better) and must be deterministic for fixed inputs.
class SlowMatcher {
 public:
  virtual ~SlowMatcher() = default;
  virtual float Score(const ProbeView& probe, std::uint64_t gallery_id) const = 0;
  // Whether Score may be called from several threads at once.
  virtual bool concurrent_safe() const { return true; }
};

/// Exact cosine over the index's stored vectors plus a seeded Gaussian
/// perturbation keyed on (seed, probe id, gallery id). Scale 0 gives plain
/// cosine similarity.
class ReferenceSlowMatcher : public SlowMatcher {
 public:
  ReferenceSlowMatcher(const GalleryIndex& index, double perturbation_scale,
                       std::uint64_t seed);

  float Score(const ProbeView& probe, std::uint64_t gallery_id) const override;

  double perturbation_scale() const { return scale_; }

  // The perturbation alone, exposed for tests.
  double Perturbation(std::uint64_t probe_id, std::uint64_t gallery_id) const;

 private:
  const GalleryIndex& index_;
  double scale_;
  std::uint64_t seed_;
};

/// One externally produced score.
struct SlowScoreRecord {
  std::uint64_t probe_id = 0;
  std::uint64_t gallery_id = 0;
  float score = 0.0f;
};

/// Scores read from a file: "SMAT" followed by packed little-endian records
/// {u64 probe_id, u64 gallery_id, f32 score} until end of file.
class FileSlowMatcher : public SlowMatcher {
 public:
  explicit FileSlowMatcher(const std::filesystem::path& path);
  explicit FileSlowMatcher(const std::vector<SlowScoreRecord>& records);

  // Throws kNotFound for a (probe, gallery) pair absent from the file.
  float Score(const ProbeView& probe, std::uint64_t gallery_id) const override;
  std::size_t size() const { return scores_.size(); }

 private:
  struct PairHash {
    std::size_t operator()(const std::pair<std::uint64_t, std::uint64_t>& p) const;
  };
  std::unordered_map<std::pair<std::uint64_t, std::uint64_t>, float, PairHash>
      scores_;
};

void WriteSlowScores(const std::filesystem::path& path,
                     std::span<const SlowScoreRecord> records);
std::vector<SlowScoreRecord> ReadSlowScores(const std::filesystem::path& path);

enum class FusionStrategy {
  kDfPlusCots,      // fuse over the whole gallery, no filtering
  kDfThenCots,      // filter, then z-score + sum-rule fusion
  kDfThenCotsOnly,  // filter, then order by the slow matcher alone
  kDfThenCotsRank,  // filter, then Borda fusion of the two orderings
};

std::string_view StrategyName(FusionStrategy s);
/// Accepts "df-plus-cots", "df-then-cots", "df-then-cots-only",
/// "df-then-cots-rank" (and the same with underscores, any case).
FusionStrategy ParseStrategy(std::string_view name);

/// (x - mean) / population stddev. Throws kDegenerate for fewer than two
/// values or zero variance.
std::vector<double> ZScoreNormalize(std::span<const double> scores);

std::vector<double> SumFuse(std::span<const double> a,
                            std::span<const double> b);

/// Ids sorted by ascending sum of 1-based ranks in the two lists, ties by
/// ascending id. Both lists must hold the same id set.
std::vector<std::uint64_t> RankFuse(std::span<const std::uint64_t> rank_a,
                                    std::span<const std::uint64_t> rank_b);

/// Re-ranks fast-filter candidates given the slow score of each candidate
/// (slow_scores[i] belongs to fast[i]). Output scores: the fused z-score sum,
/// the slow score, or the negated rank sum, per strategy. kDfPlusCots fuses
/// like kDfThenCots; the caller supplies the whole gallery as candidates.
CandidateList FuseCandidates(std::span<const Candidate> fast,
                             std::span<const double> slow_scores,
                             FusionStrategy strategy);

/// Full cascade for one probe. The slow matcher is called once per
/// candidate: min(k, N) times, or N times for kDfPlusCots. kDfPlusCots
/// returns the best k of the fused whole-gallery ranking.
CandidateList CascadeSearch(const GalleryIndex& index,
                            const SlowMatcher& matcher, const ProbeView& probe,
                            std::size_t k, FusionStrategy strategy,
                            Exec exec = Exec::kParallel);

/// CascadeSearch over many probes, parallel across probes when the matcher
/// allows it.
std::vector<CandidateList> CascadeSearchBatch(
    const GalleryIndex& index, const SlowMatcher& matcher,
    std::span<const ProbeView> probes, std::size_t k, FusionStrategy strategy,
    Exec exec = Exec::kParallel);

}  // namespace pqcascade
