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

namespace pqcascade {

struct KMeansParams {
  std::uint32_t k = 256;
  int max_iters = 25;
  // Stop once (prev_sse - sse) / prev_sse falls below this.
  double rel_tol = 1e-5;
  std::uint64_t seed = 0;
};

struct KMeansResult {
  std::vector<float> centroids;  // k x dim, row-major
  std::vector<std::uint32_t> assignment;
  // SSE of the assignment step of each iteration, then the final SSE.
  std::vector<double> sse_history;
  int iterations = 0;
};

/// D^2-weighted (k-means++) seeding. When fewer than k distinct points exist
/// the remaining centroids repeat already chosen points.
std::vector<float> KMeansPlusPlusInit(std::span<const float> data,
                                      std::uint32_t dim, std::uint32_t k,
                                      std::uint64_t seed);

/// Lloyd iterations from the given centroids. Assignment ties go to the
/// smallest centroid index; an empty cluster is re-seeded at the point
/// farthest from its current centroid.
KMeansResult KMeansFromInit(std::span<const float> data, std::uint32_t dim,
                            std::vector<float> init, int max_iters,
                            double rel_tol);

KMeansResult KMeans(std::span<const float> data, std::uint32_t dim,
                    const KMeansParams& params);

/// Centroids held dimension-major so that one query's distances to all of
/// them are computed in a single vectorizable sweep. Each distance is the
/// double sum of squared differences in dimension order.
class CentroidTable {
 public:
  CentroidTable(std::span<const float> centroids, std::uint32_t dim);

  std::uint32_t k() const { return k_; }
  std::uint32_t dim() const { return dim_; }

  /// Nearest centroid (ties: smallest index) and its squared distance.
  std::pair<std::uint32_t, double> Nearest(std::span<const float> point) const;

 private:
  std::uint32_t k_;
  std::uint32_t dim_;
  std::vector<double> transposed_;  // dim x k
};

/// Convenience wrapper building a CentroidTable for one lookup.
std::pair<std::uint32_t, double> NearestCentroid(
    std::span<const float> point, std::span<const float> centroids);

}  // namespace pqcascade
