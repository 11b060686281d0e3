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

#include "pqcascade/rerank_fusion.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <string>

#include "pqcascade/binary_io.hpp"
#include "pqcascade/error.hpp"
#include "pqcascade/kernels.hpp"

namespace pqcascade {

namespace {

constexpr std::string_view kScoresMagic = "SMAT";

std::uint64_t Mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Uniform in (0, 1].
double ToUnit(std::uint64_t bits) {
  return (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
}

CandidateList SortedByKey(std::span<const Candidate> fast,
                          std::span<const double> keys) {
  std::vector<std::size_t> order(fast.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (keys[a] != keys[b]) return keys[a] > keys[b];
    return fast[a].id < fast[b].id;
  });
  CandidateList out;
  out.reserve(fast.size());
  for (std::size_t i : order) {
    out.push_back({fast[i].id, static_cast<float>(keys[i])});
  }
  return out;
}

}  // namespace

ReferenceSlowMatcher::ReferenceSlowMatcher(const GalleryIndex& index,
                                           double perturbation_scale,
                                           std::uint64_t seed)
    : index_(index), scale_(perturbation_scale), seed_(seed) {
  PQC_THROW_IF_NOT(index.keeps_raw(), ErrorKind::kMissingRaw,
                   "reference slow matcher needs an index with raw vectors");
  PQC_THROW_IF_NOT(std::isfinite(perturbation_scale) && perturbation_scale >= 0,
                   ErrorKind::kInvalidArgument,
                   "perturbation scale must be nonnegative");
}

double ReferenceSlowMatcher::Perturbation(std::uint64_t probe_id,
                                          std::uint64_t gallery_id) const {
  const std::uint64_t h = Mix(Mix(Mix(seed_) ^ probe_id) ^ gallery_id);
  const double u1 = ToUnit(h);
  const double u2 = ToUnit(Mix(h));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

float ReferenceSlowMatcher::Score(const ProbeView& probe,
                                  std::uint64_t gallery_id) const {
  const auto row = index_.RowOf(gallery_id);
  PQC_THROW_IF_NOT(row.has_value(), ErrorKind::kNotFound,
                   "gallery id " + std::to_string(gallery_id) + " not indexed");
  PQC_THROW_IF_NOT(probe.vector.size() == index_.dim(),
                   ErrorKind::kDimensionMismatch,
                   "probe dimension differs from index");
  const auto x = index_.raw_vector(*row);
  const auto dn = kernels::DotAndNorm(probe.vector.data(), x.data(), x.size());
  const double qn =
      kernels::Dot(probe.vector.data(), probe.vector.data(), x.size());
  const double denom = std::sqrt(qn * dn.norm2);
  double s = denom > 0.0 ? dn.dot / denom : 0.0;
  if (scale_ > 0.0) s += scale_ * Perturbation(probe.id, gallery_id);
  return static_cast<float>(s);
}

std::size_t FileSlowMatcher::PairHash::operator()(
    const std::pair<std::uint64_t, std::uint64_t>& p) const {
  return static_cast<std::size_t>(Mix(p.first ^ Mix(p.second)));
}

FileSlowMatcher::FileSlowMatcher(const std::vector<SlowScoreRecord>& records) {
  scores_.reserve(records.size());
  for (const auto& r : records) {
    PQC_THROW_IF_NOT(std::isfinite(r.score), ErrorKind::kFormat,
                     "non-finite slow-matcher score");
    scores_[{r.probe_id, r.gallery_id}] = r.score;
  }
}

FileSlowMatcher::FileSlowMatcher(const std::filesystem::path& path)
    : FileSlowMatcher(ReadSlowScores(path)) {}

float FileSlowMatcher::Score(const ProbeView& probe,
                             std::uint64_t gallery_id) const {
  const auto it = scores_.find({probe.id, gallery_id});
  PQC_THROW_IF_NOT(it != scores_.end(), ErrorKind::kNotFound,
                   "no slow score for probe " + std::to_string(probe.id) +
                       ", gallery " + std::to_string(gallery_id));
  return it->second;
}

void WriteSlowScores(const std::filesystem::path& path,
                     std::span<const SlowScoreRecord> records) {
  io::BinaryWriter w(path);
  w.WriteMagic(kScoresMagic);
  for (const auto& r : records) {
    w.Write<std::uint64_t>(r.probe_id);
    w.Write<std::uint64_t>(r.gallery_id);
    w.Write<float>(r.score);
  }
  w.Close();
}

std::vector<SlowScoreRecord> ReadSlowScores(const std::filesystem::path& path) {
  io::BinaryReader r(path);
  r.ExpectMagic(kScoresMagic);
  constexpr std::uint64_t kRecordBytes = 8 + 8 + 4;
  PQC_THROW_IF_NOT(r.remaining() % kRecordBytes == 0, ErrorKind::kTruncated,
                   "truncated payload in " + path.string());
  std::vector<SlowScoreRecord> out(r.remaining() / kRecordBytes);
  for (auto& rec : out) {
    rec.probe_id = r.Read<std::uint64_t>();
    rec.gallery_id = r.Read<std::uint64_t>();
    rec.score = r.Read<float>();
  }
  return out;
}

std::string_view StrategyName(FusionStrategy s) {
  switch (s) {
    case FusionStrategy::kDfPlusCots: return "df-plus-cots";
    case FusionStrategy::kDfThenCots: return "df-then-cots";
    case FusionStrategy::kDfThenCotsOnly: return "df-then-cots-only";
    case FusionStrategy::kDfThenCotsRank: return "df-then-cots-rank";
  }
  return "?";
}

FusionStrategy ParseStrategy(std::string_view name) {
  std::string s(name);
  for (char& c : s) {
    c = c == '_' ? '-' : static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  for (auto st : {FusionStrategy::kDfPlusCots, FusionStrategy::kDfThenCots,
                  FusionStrategy::kDfThenCotsOnly,
                  FusionStrategy::kDfThenCotsRank}) {
    if (s == StrategyName(st)) return st;
  }
  throw Error(ErrorKind::kInvalidArgument,
              "unknown fusion strategy '" + std::string(name) + "'");
}

std::vector<double> ZScoreNormalize(std::span<const double> scores) {
  PQC_THROW_IF_NOT(scores.size() >= 2, ErrorKind::kDegenerate,
                   "degenerate score set: fewer than two scores");
  const double n = static_cast<double>(scores.size());
  double mean = 0.0;
  for (double s : scores) mean += s;
  mean /= n;
  double var = 0.0;
  for (double s : scores) var += (s - mean) * (s - mean);
  var /= n;
  PQC_THROW_IF_NOT(var > 0.0, ErrorKind::kDegenerate,
                   "degenerate score set: zero variance");
  const double sd = std::sqrt(var);
  std::vector<double> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out[i] = (scores[i] - mean) / sd;
  }
  return out;
}

std::vector<double> SumFuse(std::span<const double> a,
                            std::span<const double> b) {
  PQC_THROW_IF_NOT(a.size() == b.size(), ErrorKind::kDimensionMismatch,
                   "sum fusion of lists with different lengths");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

std::vector<std::uint64_t> RankFuse(std::span<const std::uint64_t> rank_a,
                                    std::span<const std::uint64_t> rank_b) {
  PQC_THROW_IF_NOT(rank_a.size() == rank_b.size(), ErrorKind::kIdMismatch,
                   "rank lists have different lengths");
  std::unordered_map<std::uint64_t, std::uint64_t> sum;
  sum.reserve(rank_a.size());
  for (std::size_t i = 0; i < rank_a.size(); ++i) {
    PQC_THROW_IF_NOT(sum.emplace(rank_a[i], i + 1).second,
                     ErrorKind::kIdMismatch, "repeated id in rank list");
  }
  std::unordered_map<std::uint64_t, bool> seen_b;
  for (std::size_t i = 0; i < rank_b.size(); ++i) {
    auto it = sum.find(rank_b[i]);
    PQC_THROW_IF_NOT(it != sum.end() && seen_b.emplace(rank_b[i], true).second,
                     ErrorKind::kIdMismatch,
                     "rank lists hold different id sets");
    it->second += i + 1;
  }
  std::vector<std::uint64_t> out(rank_a.begin(), rank_a.end());
  std::sort(out.begin(), out.end(), [&](std::uint64_t x, std::uint64_t y) {
    const auto sx = sum.at(x), sy = sum.at(y);
    return sx != sy ? sx < sy : x < y;
  });
  return out;
}

CandidateList FuseCandidates(std::span<const Candidate> fast,
                             std::span<const double> slow_scores,
                             FusionStrategy strategy) {
  PQC_THROW_IF_NOT(fast.size() == slow_scores.size(),
                   ErrorKind::kDimensionMismatch,
                   "one slow score per candidate required");
  PQC_THROW_IF_NOT(fast.size() >= 2, ErrorKind::kInvalidArgument,
                   "re-ranking needs at least two candidates");
  switch (strategy) {
    case FusionStrategy::kDfPlusCots:
    case FusionStrategy::kDfThenCots: {
      std::vector<double> fast_scores(fast.size());
      for (std::size_t i = 0; i < fast.size(); ++i) fast_scores[i] = fast[i].score;
      const auto fused =
          SumFuse(ZScoreNormalize(fast_scores), ZScoreNormalize(slow_scores));
      return SortedByKey(fast, fused);
    }
    case FusionStrategy::kDfThenCotsOnly:
      return SortedByKey(fast, slow_scores);
    case FusionStrategy::kDfThenCotsRank: {
      std::vector<std::uint64_t> fast_order(fast.size());
      for (std::size_t i = 0; i < fast.size(); ++i) fast_order[i] = fast[i].id;
      const CandidateList by_slow = SortedByKey(fast, slow_scores);
      std::vector<std::uint64_t> slow_order(by_slow.size());
      for (std::size_t i = 0; i < by_slow.size(); ++i) slow_order[i] = by_slow[i].id;

      std::unordered_map<std::uint64_t, std::size_t> pos;
      pos.reserve(fast.size());
      for (std::size_t i = 0; i < fast.size(); ++i) pos.emplace(fast[i].id, i);
      std::vector<double> rank_sum(fast.size(), 0.0);
      for (std::size_t i = 0; i < fast.size(); ++i) {
        rank_sum[pos.at(fast_order[i])] += static_cast<double>(i + 1);
        rank_sum[pos.at(slow_order[i])] += static_cast<double>(i + 1);
      }
      CandidateList out;
      out.reserve(fast.size());
      for (std::uint64_t id : RankFuse(fast_order, slow_order)) {
        out.push_back({id, static_cast<float>(-rank_sum[pos.at(id)])});
      }
      return out;
    }
  }
  return {};
}

CandidateList CascadeSearch(const GalleryIndex& index,
                            const SlowMatcher& matcher, const ProbeView& probe,
                            std::size_t k, FusionStrategy strategy, Exec exec) {
  PQC_THROW_IF_NOT(k >= 2, ErrorKind::kInvalidArgument,
                   "cascade search needs k >= 2");
  const std::size_t depth =
      strategy == FusionStrategy::kDfPlusCots ? index.size() : k;
  const CandidateList fast = SearchPQ(index, probe.vector, depth, exec);
  std::vector<double> slow(fast.size());
  for (std::size_t i = 0; i < fast.size(); ++i) {
    slow[i] = matcher.Score(probe, fast[i].id);
  }
  CandidateList out = FuseCandidates(fast, slow, strategy);
  if (out.size() > k) out.resize(k);
  return out;
}

std::vector<CandidateList> CascadeSearchBatch(
    const GalleryIndex& index, const SlowMatcher& matcher,
    std::span<const ProbeView> probes, std::size_t k, FusionStrategy strategy,
    Exec exec) {
  std::vector<CandidateList> out(probes.size());
  const bool parallel = exec == Exec::kParallel && matcher.concurrent_safe();
  const int threads = parallel ? kernels::AvailableThreads() : 1;
  if (threads <= 1) {
    for (std::size_t i = 0; i < probes.size(); ++i) {
      out[i] = CascadeSearch(index, matcher, probes[i], k, strategy, exec);
    }
    return out;
  }
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(probes.size()); ++i) {
    try {
      out[i] = CascadeSearch(index, matcher, probes[i], k, strategy,
                             Exec::kSerial);
    } catch (...) {
#pragma omp critical
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return out;
}

}  // namespace pqcascade
