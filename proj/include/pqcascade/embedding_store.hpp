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
#include <string>
#include <vector>

namespace pqcascade {

/// Identity and quality metadata of one embedding row.
struct RecordInfo {
  std::uint64_t id = 0;
  std::optional<std::string> subject;
  bool well_aligned = true;

  bool operator==(const RecordInfo&) const = default;
};

/// One gallery or probe item with its own copy of the vector.
struct EmbeddingRecord {
  std::uint64_t id = 0;
  std::optional<std::string> subject;
  bool well_aligned = true;
  std::vector<float> vector;

  bool operator==(const EmbeddingRecord&) const = default;
};

/// A set of embedding rows of common dimension. Vectors are held row-major in
/// one contiguous buffer so that million-row galleries stay allocation-light.
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(std::uint32_t dim);

  std::uint32_t dim() const { return dim_; }
  std::size_t size() const { return infos_.size(); }
  bool empty() const { return infos_.empty(); }

  void Reserve(std::size_t n);

  // Appends a row. Throws on wrong length or non-finite components.
  void Add(RecordInfo info, std::span<const float> vector);
  void Add(const EmbeddingRecord& record);

  const RecordInfo& info(std::size_t i) const { return infos_[i]; }
  std::span<const float> vector(std::size_t i) const {
    return {values_.data() + i * dim_, dim_};
  }
  std::span<float> mutable_vector(std::size_t i) {
    return {values_.data() + i * dim_, dim_};
  }
  EmbeddingRecord record(std::size_t i) const;

  std::span<const float> values() const { return values_; }
  const std::vector<RecordInfo>& infos() const { return infos_; }

  // Rows [begin, end) as a new dataset.
  Dataset Slice(std::size_t begin, std::size_t end) const;

  // Releases the vector buffer to the caller, leaving the dataset empty.
  std::vector<float> TakeValues();

  bool operator==(const Dataset&) const = default;

 private:
  std::uint32_t dim_ = 0;
  std::vector<RecordInfo> infos_;
  std::vector<float> values_;
};

// Throws kDuplicateId naming the first repeated id.
void CheckUniqueIds(const Dataset& dataset);

/// Reads a vector file (magic "FVE1", u32 dim, u64 count, count*dim f32) and
/// its sidecar `<path>.manifest.json`. Without a manifest, rows get ids
/// 0..count-1, no subject and well_aligned=true.
Dataset LoadDataset(const std::filesystem::path& path);

/// Writes the vector file and the manifest. Validates ids first, so a failed
/// precondition never leaves a partial file behind.
void SaveDataset(const Dataset& dataset, const std::filesystem::path& path);

std::filesystem::path ManifestPath(const std::filesystem::path& path);

/// Size in bytes of the vector file (manifest excluded) for a dataset shape.
std::uint64_t VectorFileSize(std::uint32_t dim, std::uint64_t count);

struct SyntheticParams {
  std::size_t num_subjects = 1;
  std::size_t images_per_subject = 1;
  std::uint32_t dim = 2;
  double within_class_noise = 0.0;
  double poorly_aligned_fraction = 0.0;
  std::uint64_t seed = 0;
  // Added to every generated id; lets callers build disjoint datasets.
  std::uint64_t id_offset = 0;
  std::string subject_prefix = "s";
};

/// Unit-sphere class centers plus isotropic Gaussian noise, re-normalized.
/// Record (s, i) has id `id_offset + s * images_per_subject + i` and subject
/// `<prefix><s>`. Poorly aligned records carry twice the noise.
Dataset GenerateSynthetic(const SyntheticParams& params);

/// Returns v / ||v||. Throws kZeroNorm for the zero vector.
std::vector<float> L2Normalize(std::span<const float> v);
void L2NormalizeInPlace(std::span<float> v);

double SquaredNorm(std::span<const float> v);

}  // namespace pqcascade
