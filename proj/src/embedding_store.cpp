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

#include "pqcascade/embedding_store.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <unordered_set>

#include <json.hpp>

#include "pqcascade/binary_io.hpp"
#include "pqcascade/error.hpp"

namespace pqcascade {

namespace {

constexpr std::string_view kVectorMagic = "FVE1";
constexpr std::uint64_t kVectorHeaderBytes = 4 + 4 + 8;

void CheckFinite(std::span<const float> v) {
  for (float x : v) {
    PQC_THROW_IF_NOT(std::isfinite(x), ErrorKind::kInvalidArgument,
                     "embedding component is not finite");
  }
}

}  // namespace

Dataset::Dataset(std::uint32_t dim) : dim_(dim) {
  PQC_THROW_IF_NOT(dim > 0, ErrorKind::kInvalidArgument,
                   "dataset dimension must be positive");
}

void Dataset::Reserve(std::size_t n) {
  infos_.reserve(n);
  values_.reserve(n * dim_);
}

void Dataset::Add(RecordInfo info, std::span<const float> vector) {
  PQC_THROW_IF_NOT(vector.size() == dim_, ErrorKind::kDimensionMismatch,
                   "record " + std::to_string(info.id) + " has length " +
                       std::to_string(vector.size()) + ", dataset dim is " +
                       std::to_string(dim_));
  CheckFinite(vector);
  infos_.push_back(std::move(info));
  values_.insert(values_.end(), vector.begin(), vector.end());
}

void Dataset::Add(const EmbeddingRecord& record) {
  Add(RecordInfo{record.id, record.subject, record.well_aligned},
      record.vector);
}

EmbeddingRecord Dataset::record(std::size_t i) const {
  const auto v = vector(i);
  return EmbeddingRecord{infos_[i].id, infos_[i].subject,
                         infos_[i].well_aligned,
                         std::vector<float>(v.begin(), v.end())};
}

Dataset Dataset::Slice(std::size_t begin, std::size_t end) const {
  PQC_THROW_IF_NOT(begin <= end && end <= size(), ErrorKind::kInvalidArgument,
                   "slice out of range");
  Dataset out(dim_);
  out.infos_.assign(infos_.begin() + begin, infos_.begin() + end);
  out.values_.assign(values_.begin() + begin * dim_,
                     values_.begin() + end * dim_);
  return out;
}

std::vector<float> Dataset::TakeValues() {
  infos_.clear();
  return std::move(values_);
}

void CheckUniqueIds(const Dataset& dataset) {
  std::unordered_set<std::uint64_t> seen;
  seen.reserve(dataset.size());
  for (const auto& info : dataset.infos()) {
    PQC_THROW_IF_NOT(seen.insert(info.id).second, ErrorKind::kDuplicateId,
                     "duplicate id " + std::to_string(info.id));
  }
}

std::filesystem::path ManifestPath(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".manifest.json");
}

std::uint64_t VectorFileSize(std::uint32_t dim, std::uint64_t count) {
  return kVectorHeaderBytes + sizeof(float) * std::uint64_t{dim} * count;
}

Dataset LoadDataset(const std::filesystem::path& path) {
  io::BinaryReader reader(path);
  reader.ExpectMagic(kVectorMagic);
  const auto dim = reader.Read<std::uint32_t>();
  const auto count = reader.Read<std::uint64_t>();
  PQC_THROW_IF_NOT(dim > 0, ErrorKind::kFormat,
                   "zero dimension in " + path.string());
  const std::uint64_t row_bytes = sizeof(float) * std::uint64_t{dim};
  if (count > reader.remaining() / row_bytes) {
    throw Error(ErrorKind::kTruncated, "truncated payload in " + path.string());
  }
  PQC_THROW_IF_NOT(reader.remaining() == row_bytes * count,
                   ErrorKind::kDimensionMismatch,
                   "payload of " + path.string() +
                       " is larger than header dim*count");

  std::vector<RecordInfo> infos(count);
  const auto manifest_path = ManifestPath(path);
  if (std::filesystem::exists(manifest_path)) {
    std::ifstream in(manifest_path);
    nlohmann::json manifest;
    try {
      manifest = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::kFormat,
                  "bad manifest " + manifest_path.string() + ": " + e.what());
    }
    PQC_THROW_IF_NOT(manifest.is_array() && manifest.size() == count,
                     ErrorKind::kDimensionMismatch,
                     "manifest row count differs from vector file header");
    try {
      for (std::size_t i = 0; i < count; ++i) {
        const auto& row = manifest[i];
        infos[i].id = row.at("id").get<std::uint64_t>();
        if (row.contains("subject") && !row["subject"].is_null()) {
          infos[i].subject = row["subject"].get<std::string>();
        }
        infos[i].well_aligned = row.value("well_aligned", true);
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::kFormat,
                  "bad manifest row in " + manifest_path.string() + ": " +
                      e.what());
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) infos[i].id = i;
  }

  Dataset dataset(dim);
  dataset.Reserve(count);
  std::vector<float> row(dim);
  for (std::size_t i = 0; i < count; ++i) {
    reader.ReadSpan(std::span<float>(row));
    dataset.Add(std::move(infos[i]), row);
  }
  CheckUniqueIds(dataset);
  return dataset;
}

void SaveDataset(const Dataset& dataset, const std::filesystem::path& path) {
  CheckUniqueIds(dataset);
  PQC_THROW_IF_NOT(dataset.dim() > 0, ErrorKind::kInvalidArgument,
                   "cannot save a dataset without dimension");

  io::BinaryWriter writer(path);
  writer.WriteMagic(kVectorMagic);
  writer.Write<std::uint32_t>(dataset.dim());
  writer.Write<std::uint64_t>(dataset.size());
  writer.WriteSpan(dataset.values());
  writer.Close();

  nlohmann::json manifest = nlohmann::json::array();
  for (const auto& info : dataset.infos()) {
    nlohmann::json row;
    row["id"] = info.id;
    row["subject"] = info.subject ? nlohmann::json(*info.subject)
                                  : nlohmann::json(nullptr);
    row["well_aligned"] = info.well_aligned;
    manifest.push_back(std::move(row));
  }
  std::ofstream out(ManifestPath(path));
  out << manifest.dump() << '\n';
  PQC_THROW_IF_NOT(out.good(), ErrorKind::kIo,
                   "cannot write manifest for " + path.string());
}

double SquaredNorm(std::span<const float> v) {
  double s = 0.0;
  for (float x : v) s += static_cast<double>(x) * x;
  return s;
}

void L2NormalizeInPlace(std::span<float> v) {
  const double norm = std::sqrt(SquaredNorm(v));
  PQC_THROW_IF_NOT(norm > 0.0, ErrorKind::kZeroNorm, "zero norm");
  for (float& x : v) x = static_cast<float>(x / norm);
}

std::vector<float> L2Normalize(std::span<const float> v) {
  std::vector<float> out(v.begin(), v.end());
  L2NormalizeInPlace(out);
  return out;
}

Dataset GenerateSynthetic(const SyntheticParams& p) {
  PQC_THROW_IF_NOT(p.num_subjects >= 1, ErrorKind::kInvalidArgument,
                   "num_subjects must be >= 1");
  PQC_THROW_IF_NOT(p.images_per_subject >= 1, ErrorKind::kInvalidArgument,
                   "images_per_subject must be >= 1");
  PQC_THROW_IF_NOT(p.dim >= 2, ErrorKind::kInvalidArgument, "dim must be >= 2");
  PQC_THROW_IF_NOT(std::isfinite(p.within_class_noise) &&
                       p.within_class_noise >= 0.0,
                   ErrorKind::kInvalidArgument,
                   "within_class_noise must be nonnegative");
  PQC_THROW_IF_NOT(p.poorly_aligned_fraction >= 0.0 &&
                       p.poorly_aligned_fraction <= 1.0,
                   ErrorKind::kInvalidArgument,
                   "poorly_aligned_fraction must lie in [0,1]");

  std::mt19937_64 rng(p.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::bernoulli_distribution poorly(p.poorly_aligned_fraction);

  Dataset out(p.dim);
  out.Reserve(p.num_subjects * p.images_per_subject);
  std::vector<double> center(p.dim);
  std::vector<float> row(p.dim);
  std::vector<double> tmp(p.dim);
  for (std::size_t s = 0; s < p.num_subjects; ++s) {
    double norm2 = 0.0;
    do {
      norm2 = 0.0;
      for (auto& c : center) {
        c = gauss(rng);
        norm2 += c * c;
      }
    } while (norm2 == 0.0);
    const double inv = 1.0 / std::sqrt(norm2);
    for (auto& c : center) c *= inv;

    const std::string subject = p.subject_prefix + std::to_string(s);
    for (std::size_t i = 0; i < p.images_per_subject; ++i) {
      const bool well_aligned = !poorly(rng);
      const double sigma =
          well_aligned ? p.within_class_noise : 2.0 * p.within_class_noise;
      double rn = 0.0;
      for (std::uint32_t j = 0; j < p.dim; ++j) {
        tmp[j] = center[j] + (sigma > 0.0 ? sigma * gauss(rng) : 0.0);
        rn += tmp[j] * tmp[j];
      }
      PQC_THROW_IF_NOT(rn > 0.0, ErrorKind::kZeroNorm,
                       "generated a zero vector");
      const double rinv = 1.0 / std::sqrt(rn);
      for (std::uint32_t j = 0; j < p.dim; ++j) {
        row[j] = static_cast<float>(tmp[j] * rinv);
      }
      out.Add(RecordInfo{p.id_offset + s * p.images_per_subject + i, subject,
                         well_aligned},
              row);
    }
  }
  return out;
}

}  // namespace pqcascade
