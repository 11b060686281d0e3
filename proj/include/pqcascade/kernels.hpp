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
#include <span>
#include <vector>

#include "pqcascade/topk.hpp"

// Scan kernels behind the search operations. Each kernel has a serial form
// that is the reference for tests and an OpenMP form that shards the gallery
// and merges per-shard selections; both return identical hits.

namespace pqcascade {

enum class Metric { kCosine, kL1, kL2 };

enum class Exec { kSerial, kParallel };

namespace kernels {

// Fixed-order double accumulation; results do not depend on alignment or
// thread count.
double Dot(const float* a, const float* b, std::size_t d);
double SquaredL2(const float* a, const float* b, std::size_t d);
double L1(const float* a, const float* b, std::size_t d);

struct DotNorm {
  double dot;
  double norm2;
};
DotNorm DotAndNorm(const float* query, const float* x, std::size_t d);

/// Packed PQ codes: `n` rows of `m` indices, each `width` bytes (1 or 2).
struct CodeMatrix {
  const std::uint8_t* data = nullptr;
  std::size_t n = 0;
  std::uint32_t m = 0;
  std::uint32_t width = 1;
};

/// Squared ADC distance of code row `row`: sum over sub-spaces of
/// table[i * z + code[i]].
float AdcDistance(std::span<const float> table, std::uint32_t z,
                  const CodeMatrix& codes, std::size_t row);

/// All N ADC distances, serial.
void AdcDistancesSerial(std::span<const float> table, std::uint32_t z,
                        const CodeMatrix& codes, std::span<float> out);

/// Top-k by key -D over the code matrix. ids[i] names row i.
std::vector<Hit> AdcTopK(std::span<const float> table, std::uint32_t z,
                         const CodeMatrix& codes,
                         std::span<const std::uint64_t> ids, std::size_t k,
                         Exec exec);

/// One-byte codes regrouped for scanning: rows are cut into blocks of
/// kBlock and, inside a block, stored sub-space by sub-space, so block b
/// holds code[b * kBlock + r][i] at offset b * kBlock * m + i * rows_b + r.
struct BlockedCodes {
  static constexpr std::size_t kBlock = 1024;
  std::vector<std::uint8_t> data;
  std::size_t n = 0;
  std::uint32_t m = 0;
};

BlockedCodes BlockCodes(const CodeMatrix& codes);

/// Same hits as AdcTopK over the row-major matrix the blocks came from.
std::vector<Hit> AdcTopK(std::span<const float> table, std::uint32_t z,
                         const BlockedCodes& codes,
                         std::span<const std::uint64_t> ids, std::size_t k,
                         Exec exec);

/// Key used by exact search for one gallery row. Cosine: cosine similarity;
/// L1 / L2: negated L1 distance / negated squared L2 distance.
float ExactKey(Metric metric, std::span<const float> query, const float* x,
               double query_norm2);

/// Top-k of ExactKey over row-major `raw` (n x d).
std::vector<Hit> ExactTopK(std::span<const float> query,
                           std::span<const float> raw,
                           std::span<const std::uint64_t> ids, Metric metric,
                           std::size_t k, Exec exec);

/// Number of threads a parallel kernel would use here; 1 when already inside
/// a parallel region.
int AvailableThreads();

}  // namespace kernels
}  // namespace pqcascade
