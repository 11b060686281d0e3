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
#include <vector>

#include "pqcascade/embedding_store.hpp"
#include "pqcascade/kernels.hpp"

namespace pqcascade {

/// m sub-codebooks of z centroids each, over consecutive d/m-dim sub-spaces.
class PQCodebook {
 public:
  PQCodebook() = default;
  PQCodebook(std::uint32_t m, std::uint32_t z, std::uint32_t dim,
             std::vector<float> centroids);

  std::uint32_t m() const { return m_; }
  std::uint32_t z() const { return z_; }
  std::uint32_t dim() const { return dim_; }
  std::uint32_t sub_dim() const { return dim_ / m_; }

  // Bytes per stored code index: 1 when z <= 256, else 2.
  std::uint32_t code_width() const { return z_ <= 256 ? 1 : 2; }

  std::span<const float> centroid(std::uint32_t sub, std::uint32_t j) const {
    return {centroids_.data() + (std::size_t{sub} * z_ + j) * sub_dim(),
            sub_dim()};
  }
  std::span<const float> sub_codebook(std::uint32_t sub) const {
    return {centroids_.data() + std::size_t{sub} * z_ * sub_dim(),
            std::size_t{z_} * sub_dim()};
  }
  std::span<const float> centroids() const { return centroids_; }

  bool operator==(const PQCodebook&) const = default;

 private:
  std::uint32_t m_ = 0;
  std::uint32_t z_ = 0;
  std::uint32_t dim_ = 0;
  std::vector<float> centroids_;  // m x z x (d/m)
};

using PQCode = std::vector<std::uint32_t>;

/// Squared sub-distances from one query to every sub-centroid.
struct DistanceTable {
  std::uint32_t m = 0;
  std::uint32_t z = 0;
  std::uint32_t query_dim = 0;
  std::vector<float> table;  // m x z

  float at(std::uint32_t sub, std::uint32_t j) const {
    return table[std::size_t{sub} * z + j];
  }
};

struct TrainParams {
  std::uint32_t m = 64;
  std::uint32_t z = 256;
  int max_iters = 25;
  double rel_tol = 1e-5;
  std::uint64_t seed = 0;
};

/// Per-sub-space SSE trajectories recorded during training.
struct TrainTrace {
  std::vector<std::vector<double>> sse_history;  // one per sub-space
};

/// Independent k-means in each sub-space (parallel over sub-spaces). Sub-space
/// i is seeded from (seed, i), so the result does not depend on threads.
PQCodebook TrainCodebooks(const Dataset& vectors, const TrainParams& params,
                          TrainTrace* trace = nullptr);
PQCodebook TrainCodebooks(std::span<const float> vectors, std::uint32_t dim,
                          const TrainParams& params,
                          TrainTrace* trace = nullptr);

/// Seed used for sub-space `sub`.
std::uint64_t SubspaceSeed(std::uint64_t seed, std::uint32_t sub);

/// Nearest sub-centroid per sub-space; ties go to the smallest index.
PQCode Encode(const PQCodebook& codebook, std::span<const float> vector);

/// Writes the packed code (code_width() bytes per index) into `out`.
void EncodeInto(const PQCodebook& codebook, std::span<const float> vector,
                std::span<std::uint8_t> out);

/// Packed codes for every row of `values` (n x d), parallel over rows.
std::vector<std::uint8_t> EncodeBatch(const PQCodebook& codebook,
                                      std::span<const float> values,
                                      Exec exec = Exec::kParallel);

std::vector<float> Decode(const PQCodebook& codebook, const PQCode& code);

DistanceTable BuildDistanceTable(const PQCodebook& codebook,
                                 std::span<const float> query);

/// Sum of table[i][code[i]].
float AdcDistance(const DistanceTable& table, const PQCode& code);

/// Codebook file: "PQCB", u32 m, u32 z, u32 dim, m*z*(d/m) f32.
void SaveCodebook(const PQCodebook& codebook, const std::filesystem::path& path);
PQCodebook LoadCodebook(const std::filesystem::path& path);

}  // namespace pqcascade
