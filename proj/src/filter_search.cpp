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

#include "pqcascade/filter_search.hpp"

#include <cmath>
#include <cstring>

#include "pqcascade/binary_io.hpp"
#include "pqcascade/error.hpp"

namespace pqcascade {

namespace {

constexpr std::string_view kIndexMagic = "PQIX";

CandidateList ToCandidates(const std::vector<Hit>& hits, Metric metric) {
  CandidateList out;
  out.reserve(hits.size());
  for (const Hit& h : hits) {
    float score = h.key;
    if (metric == Metric::kL2) score = -std::sqrt(-h.key);
    out.push_back({h.id, score});
  }
  return out;
}

void CheckK(std::size_t k) {
  PQC_THROW_IF_NOT(k >= 1, ErrorKind::kInvalidArgument, "k must be >= 1");
}

}  // namespace

std::string_view MetricName(Metric metric) {
  switch (metric) {
    case Metric::kCosine: return "cosine";
    case Metric::kL1: return "l1";
    case Metric::kL2: return "l2";
  }
  return "?";
}

Metric ParseMetric(std::string_view name) {
  if (name == "cosine") return Metric::kCosine;
  if (name == "l1" || name == "L1") return Metric::kL1;
  if (name == "l2" || name == "L2") return Metric::kL2;
  throw Error(ErrorKind::kInvalidArgument,
              "undefined metric '" + std::string(name) + "'");
}

GalleryIndex::GalleryIndex(PQCodebook codebook, std::vector<std::uint64_t> ids,
                           std::vector<std::uint8_t> codes, bool keep_raw,
                           std::vector<float> raw, bool norm_applied)
    : codebook_(std::move(codebook)),
      ids_(std::move(ids)),
      codes_(std::move(codes)),
      keep_raw_(keep_raw),
      raw_(std::move(raw)),
      norm_applied_(norm_applied) {
  const std::size_t n = ids_.size();
  PQC_THROW_IF_NOT(
      codes_.size() == n * codebook_.m() * codebook_.code_width(),
      ErrorKind::kDimensionMismatch, "code array does not match id count");
  PQC_THROW_IF_NOT(keep_raw_ ? raw_.size() == n * codebook_.dim() : raw_.empty(),
                   ErrorKind::kDimensionMismatch,
                   "raw vector array does not match id count");
  row_of_.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    PQC_THROW_IF_NOT(row_of_.emplace(ids_[i], i).second,
                     ErrorKind::kDuplicateId,
                     "duplicate id " + std::to_string(ids_[i]));
  }
  if (codebook_.code_width() == 1 && n > 0) {
    blocked_ = kernels::BlockCodes(this->codes());
  }
}

PQCode GalleryIndex::code(std::size_t row) const {
  PQC_THROW_IF_NOT(row < size(), ErrorKind::kInvalidArgument,
                   "row out of range");
  PQCode out(codebook_.m());
  const std::uint32_t w = codebook_.code_width();
  const std::uint8_t* p = codes_.data() + row * codebook_.m() * w;
  for (std::uint32_t i = 0; i < codebook_.m(); ++i) {
    if (w == 1) {
      out[i] = p[i];
    } else {
      std::uint16_t v;
      std::memcpy(&v, p + 2 * i, 2);
      out[i] = v;
    }
  }
  return out;
}

std::optional<std::size_t> GalleryIndex::RowOf(std::uint64_t id) const {
  const auto it = row_of_.find(id);
  if (it == row_of_.end()) return std::nullopt;
  return it->second;
}

GalleryIndex GalleryIndex::Prefix(std::size_t n) const {
  PQC_THROW_IF_NOT(n <= size(), ErrorKind::kInvalidArgument,
                   "prefix longer than index");
  const std::size_t row_bytes = std::size_t{codebook_.m()} * codebook_.code_width();
  std::vector<std::uint64_t> ids(ids_.begin(), ids_.begin() + n);
  std::vector<std::uint8_t> codes(codes_.begin(), codes_.begin() + n * row_bytes);
  std::vector<float> raw;
  if (keep_raw_) raw.assign(raw_.begin(), raw_.begin() + n * dim());
  return GalleryIndex(codebook_, std::move(ids), std::move(codes), keep_raw_,
                      std::move(raw), norm_applied_);
}

GalleryIndex BuildIndex(Dataset&& dataset, const PQCodebook& codebook,
                        bool keep_raw, Exec exec) {
  PQC_THROW_IF_NOT(dataset.dim() == codebook.dim(),
                   ErrorKind::kDimensionMismatch,
                   "dataset dim " + std::to_string(dataset.dim()) +
                       " differs from codebook dim " +
                       std::to_string(codebook.dim()));
  CheckUniqueIds(dataset);
  std::vector<std::uint64_t> ids;
  ids.reserve(dataset.size());
  for (const auto& info : dataset.infos()) ids.push_back(info.id);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    auto v = dataset.mutable_vector(i);
    if (SquaredNorm(v) == 0.0) {
      throw Error(ErrorKind::kZeroNorm,
                  "zero vector for id " + std::to_string(ids[i]));
    }
    L2NormalizeInPlace(v);
  }
  std::vector<float> values = dataset.TakeValues();
  std::vector<std::uint8_t> codes = EncodeBatch(codebook, values, exec);
  if (!keep_raw) {
    values.clear();
    values.shrink_to_fit();
  }
  return GalleryIndex(codebook, std::move(ids), std::move(codes), keep_raw,
                      std::move(values), true);
}

GalleryIndex BuildIndex(const Dataset& dataset, const PQCodebook& codebook,
                        bool keep_raw, Exec exec) {
  Dataset copy = dataset;
  return BuildIndex(std::move(copy), codebook, keep_raw, exec);
}

void SaveIndex(const GalleryIndex& index, const std::filesystem::path& path) {
  const PQCodebook& cb = index.codebook();
  io::BinaryWriter w(path);
  w.WriteMagic(kIndexMagic);
  w.Write<std::uint32_t>(cb.m());
  w.Write<std::uint32_t>(cb.z());
  w.Write<std::uint32_t>(cb.dim());
  w.Write<std::uint64_t>(index.size());
  w.Write<std::uint8_t>(index.keeps_raw() ? 1 : 0);
  w.Write<std::uint8_t>(index.norm_applied() ? 1 : 0);
  w.WriteSpan(cb.centroids());
  w.WriteSpan(index.ids());
  w.WriteSpan(index.code_bytes());
  if (index.keeps_raw()) w.WriteSpan(index.raw());
  w.Close();
}

GalleryIndex LoadIndex(const std::filesystem::path& path) {
  io::BinaryReader r(path);
  r.ExpectMagic(kIndexMagic);
  const auto m = r.Read<std::uint32_t>();
  const auto z = r.Read<std::uint32_t>();
  const auto dim = r.Read<std::uint32_t>();
  const auto n = r.Read<std::uint64_t>();
  const auto keep_raw = r.Read<std::uint8_t>();
  const auto norm = r.Read<std::uint8_t>();
  PQC_THROW_IF_NOT(m >= 1 && z >= 1 && z <= 65536 && dim >= 1 && dim % m == 0 &&
                       keep_raw <= 1 && norm <= 1,
                   ErrorKind::kFormat, "invalid index header in " + path.string());
  // Check the declared sizes against the file before allocating anything.
  const std::uint64_t width = z <= 256 ? 1 : 2;
  const std::uint64_t per_row =
      8 + std::uint64_t{m} * width + (keep_raw ? 4ull * dim : 0);
  const std::uint64_t fixed = 4ull * z * dim;
  PQC_THROW_IF_NOT(r.remaining() >= fixed &&
                       n <= (r.remaining() - fixed) / per_row,
                   ErrorKind::kTruncated,
                   "index payload shorter than its header declares in " +
                       path.string());
  std::vector<float> centroids(std::size_t{z} * dim);
  r.ReadSpan(std::span<float>(centroids));
  PQCodebook codebook(m, z, dim, std::move(centroids));
  std::vector<std::uint64_t> ids(n);
  r.ReadSpan(std::span<std::uint64_t>(ids));
  std::vector<std::uint8_t> codes(n * m * codebook.code_width());
  r.ReadSpan(std::span<std::uint8_t>(codes));
  std::vector<float> raw;
  if (keep_raw) {
    raw.resize(n * dim);
    r.ReadSpan(std::span<float>(raw));
  }
  PQC_THROW_IF_NOT(r.at_end(), ErrorKind::kDimensionMismatch,
                   "trailing bytes after index payload in " + path.string());
  return GalleryIndex(std::move(codebook), std::move(ids), std::move(codes),
                      keep_raw != 0, std::move(raw), norm != 0);
}

CandidateList SearchExact(std::span<const float> raw,
                          std::span<const std::uint64_t> ids,
                          std::span<const float> query, std::size_t k,
                          Metric metric, Exec exec) {
  CheckK(k);
  return ToCandidates(kernels::ExactTopK(query, raw, ids, metric, k, exec),
                      metric);
}

CandidateList SearchExact(const GalleryIndex& index,
                          std::span<const float> query, std::size_t k,
                          Metric metric, Exec exec) {
  CheckK(k);
  PQC_THROW_IF_NOT(index.keeps_raw(), ErrorKind::kMissingRaw,
                   "exact search needs an index built with raw vectors");
  PQC_THROW_IF_NOT(query.size() == index.dim(), ErrorKind::kDimensionMismatch,
                   "query dimension differs from index");
  return SearchExact(index.raw(), index.ids(), query, k, metric, exec);
}

CandidateList SearchExact(const Dataset& dataset, std::span<const float> query,
                          std::size_t k, Metric metric, Exec exec) {
  CheckK(k);
  PQC_THROW_IF_NOT(query.size() == dataset.dim(), ErrorKind::kDimensionMismatch,
                   "query dimension differs from dataset");
  std::vector<std::uint64_t> ids;
  ids.reserve(dataset.size());
  for (const auto& info : dataset.infos()) ids.push_back(info.id);
  return SearchExact(dataset.values(), ids, query, k, metric, exec);
}

CandidateList SearchPQ(const GalleryIndex& index, std::span<const float> query,
                       std::size_t k, Exec exec) {
  CheckK(k);
  const DistanceTable table = BuildDistanceTable(index.codebook(), query);
  const auto* blocked = index.blocked_codes();
  const auto hits =
      blocked != nullptr
          ? kernels::AdcTopK(table.table, table.z, *blocked, index.ids(), k,
                             exec)
          : kernels::AdcTopK(table.table, table.z, index.codes(), index.ids(),
                             k, exec);
  CandidateList out;
  out.reserve(hits.size());
  for (const Hit& h : hits) {
    out.push_back({h.id, SimilarityFromSquaredDistance(-h.key)});
  }
  return out;
}

std::size_t DefaultCandidateSize(std::size_t n, std::size_t cap) {
  PQC_THROW_IF_NOT(n >= 1, ErrorKind::kInvalidArgument,
                   "gallery size must be >= 1");
  const std::size_t one_percent = (n + 99) / 100;
  return std::min(std::max<std::size_t>(one_percent, 50), cap);
}

}  // namespace pqcascade
