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
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "pqcascade/embedding_store.hpp"
#include "pqcascade/kernels.hpp"
#include "pqcascade/quantizer.hpp"

namespace pqcascade {

struct Candidate {
  std::uint64_t id = 0;
  float score = 0.0f;  // similarity, higher is better

  bool operator==(const Candidate&) const = default;
};

/// Ranked (id, similarity) entries, descending by score, ties by ascending id.
using CandidateList = std::vector<Candidate>;

std::string_view MetricName(Metric metric);
Metric ParseMetric(std::string_view name);

/// Immutable searchable gallery: PQ codes of the L2-normalized vectors, their
/// ids, and optionally the normalized vectors themselves for exact scoring.
class GalleryIndex {
 public:
  GalleryIndex() = default;
  GalleryIndex(PQCodebook codebook, std::vector<std::uint64_t> ids,
               std::vector<std::uint8_t> codes, bool keep_raw,
               std::vector<float> raw, bool norm_applied);

  const PQCodebook& codebook() const { return codebook_; }
  std::size_t size() const { return ids_.size(); }
  std::uint32_t dim() const { return codebook_.dim(); }
  std::span<const std::uint64_t> ids() const { return ids_; }
  std::span<const std::uint8_t> code_bytes() const { return codes_; }
  kernels::CodeMatrix codes() const {
    return {codes_.data(), ids_.size(), codebook_.m(), codebook_.code_width()};
  }
  PQCode code(std::size_t row) const;
  // Scan-friendly copy of one-byte codes; null for two-byte codes.
  const kernels::BlockedCodes* blocked_codes() const {
    return blocked_.n == ids_.size() && !ids_.empty() ? &blocked_ : nullptr;
  }

  bool keeps_raw() const { return keep_raw_; }
  std::span<const float> raw() const { return raw_; }
  std::span<const float> raw_vector(std::size_t row) const {
    return {raw_.data() + row * dim(), dim()};
  }
  bool norm_applied() const { return norm_applied_; }

  std::optional<std::size_t> RowOf(std::uint64_t id) const;

  // The first n rows as a standalone index (same codebook).
  GalleryIndex Prefix(std::size_t n) const;

  bool operator==(const GalleryIndex& o) const {
    return codebook_ == o.codebook_ && ids_ == o.ids_ && codes_ == o.codes_ &&
           keep_raw_ == o.keep_raw_ && raw_ == o.raw_ &&
           norm_applied_ == o.norm_applied_;
  }

 private:
  PQCodebook codebook_;
  std::vector<std::uint64_t> ids_;
  std::vector<std::uint8_t> codes_;
  kernels::BlockedCodes blocked_;
  bool keep_raw_ = false;
  std::vector<float> raw_;
  bool norm_applied_ = true;
  std::unordered_map<std::uint64_t, std::size_t> row_of_;
};

/// L2-normalizes each vector, then encodes it. Order and ids are preserved.
GalleryIndex BuildIndex(const Dataset& dataset, const PQCodebook& codebook,
                        bool keep_raw, Exec exec = Exec::kParallel);
/// Consumes the dataset, normalizing its buffer in place to avoid a copy.
GalleryIndex BuildIndex(Dataset&& dataset, const PQCodebook& codebook,
                        bool keep_raw, Exec exec = Exec::kParallel);

/// Index file: "PQIX", u32 m, u32 z, u32 dim, u64 N, u8 keep_raw,
/// u8 norm_applied, codebook centroids, N u64 ids, N*m*width code bytes,
/// then N*d f32 when keep_raw.
void SaveIndex(const GalleryIndex& index, const std::filesystem::path& path);
GalleryIndex LoadIndex(const std::filesystem::path& path);

/// Exact top-k under `metric`. Cosine scores are cosine similarities; L1 and
/// L2 scores are negated distances.
CandidateList SearchExact(const GalleryIndex& index,
                          std::span<const float> query, std::size_t k,
                          Metric metric, Exec exec = Exec::kParallel);
CandidateList SearchExact(const Dataset& dataset, std::span<const float> query,
                          std::size_t k, Metric metric,
                          Exec exec = Exec::kParallel);
CandidateList SearchExact(std::span<const float> raw,
                          std::span<const std::uint64_t> ids,
                          std::span<const float> query, std::size_t k,
                          Metric metric, Exec exec = Exec::kParallel);

/// ADC scan over every code; returns the top-k by similarity 1 - D/2 where D
/// is the squared ADC distance. Queries are expected to be L2-normalized
/// (the index stores normalized vectors); the scan does not rescale them.
CandidateList SearchPQ(const GalleryIndex& index, std::span<const float> query,
                       std::size_t k, Exec exec = Exec::kParallel);

inline float SimilarityFromSquaredDistance(float d) { return 1.0f - d / 2.0f; }

/// clamp(ceil(N / 100), 50, cap).
std::size_t DefaultCandidateSize(std::size_t n, std::size_t cap = 50000);

}  // namespace pqcascade
