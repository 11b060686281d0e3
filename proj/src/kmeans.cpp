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

#include "pqcascade/kmeans.hpp"

#include <algorithm>
#include <limits>
#include <random>

#include "pqcascade/error.hpp"
#include "pqcascade/kernels.hpp"

namespace pqcascade {

CentroidTable::CentroidTable(std::span<const float> centroids,
                             std::uint32_t dim)
    : k_(static_cast<std::uint32_t>(centroids.size() / dim)), dim_(dim) {
  PQC_THROW_IF_NOT(dim > 0 && centroids.size() % dim == 0 && k_ > 0,
                   ErrorKind::kDimensionMismatch, "centroid array shape");
  transposed_.resize(centroids.size());
  for (std::uint32_t j = 0; j < k_; ++j) {
    for (std::uint32_t t = 0; t < dim; ++t) {
      transposed_[std::size_t{t} * k_ + j] = centroids[std::size_t{j} * dim + t];
    }
  }
}

std::pair<std::uint32_t, double> CentroidTable::Nearest(
    std::span<const float> point) const {
  PQC_THROW_IF_NOT(point.size() == dim_, ErrorKind::kDimensionMismatch,
                   "point dimension differs from centroids");
  thread_local std::vector<double> dist;
  dist.assign(k_, 0.0);
  double* __restrict out = dist.data();
  for (std::uint32_t t = 0; t < dim_; ++t) {
    const double x = point[t];
    const double* __restrict col = transposed_.data() + std::size_t{t} * k_;
    for (std::uint32_t j = 0; j < k_; ++j) {
      const double diff = x - col[j];
      out[j] += diff * diff;
    }
  }
  // Minimum value first (lane-parallel), then its first occurrence.
  double lanes[4] = {out[0], out[0], out[0], out[0]};
  std::uint32_t j = 0;
  for (; j + 4 <= k_; j += 4) {
    for (int l = 0; l < 4; ++l) lanes[l] = out[j + l] < lanes[l] ? out[j + l] : lanes[l];
  }
  double best_d = std::min(std::min(lanes[0], lanes[1]), std::min(lanes[2], lanes[3]));
  for (; j < k_; ++j) best_d = out[j] < best_d ? out[j] : best_d;
  std::uint32_t best = 0;
  while (out[best] != best_d) ++best;
  return {best, best_d};
}

std::pair<std::uint32_t, double> NearestCentroid(
    std::span<const float> point, std::span<const float> centroids) {
  return CentroidTable(centroids, static_cast<std::uint32_t>(point.size()))
      .Nearest(point);
}

std::vector<float> KMeansPlusPlusInit(std::span<const float> data,
                                      std::uint32_t dim, std::uint32_t k,
                                      std::uint64_t seed) {
  const std::size_t n = data.size() / dim;
  PQC_THROW_IF_NOT(n >= k && k >= 1, ErrorKind::kInvalidArgument,
                   "k-means needs at least k points");
  std::mt19937_64 rng(seed);
  std::vector<float> centroids;
  centroids.reserve(std::size_t{k} * dim);
  auto append = [&](std::size_t i) {
    centroids.insert(centroids.end(), data.begin() + i * dim,
                     data.begin() + (i + 1) * dim);
  };

  append(std::uniform_int_distribution<std::size_t>(0, n - 1)(rng));
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) {
    d2[i] = kernels::SquaredL2(data.data() + i * dim, centroids.data(), dim);
  }
  std::vector<std::uint8_t> used(n, 0);
  for (std::uint32_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (double v : d2) total += v;
    std::size_t pick = 0;
    if (total > 0.0) {
      double r = std::uniform_real_distribution<double>(0.0, total)(rng);
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        r -= d2[i];
        if (r < 0.0 && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
      if (d2[pick] == 0.0) {
        // Rounding at the tail of the cumulative sum; take the last positive.
        for (std::size_t i = n; i-- > 0;) {
          if (d2[i] > 0.0) {
            pick = i;
            break;
          }
        }
      }
    } else {
      // Fewer distinct points than k: fall back to unused points, uniformly.
      std::vector<std::size_t> free;
      for (std::size_t i = 0; i < n; ++i) {
        if (!used[i]) free.push_back(i);
      }
      pick = free.empty()
                 ? 0
                 : free[std::uniform_int_distribution<std::size_t>(
                       0, free.size() - 1)(rng)];
    }
    used[pick] = 1;
    append(pick);
    const float* cnew = centroids.data() + std::size_t{c} * dim;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i],
                       kernels::SquaredL2(data.data() + i * dim, cnew, dim));
    }
  }
  return centroids;
}

KMeansResult KMeansFromInit(std::span<const float> data, std::uint32_t dim,
                            std::vector<float> init, int max_iters,
                            double rel_tol) {
  PQC_THROW_IF_NOT(dim > 0 && data.size() % dim == 0 &&
                       init.size() % dim == 0 && !init.empty(),
                   ErrorKind::kDimensionMismatch, "k-means shape mismatch");
  const std::size_t n = data.size() / dim;
  const std::size_t k = init.size() / dim;
  PQC_THROW_IF_NOT(n >= k, ErrorKind::kInvalidArgument,
                   "k-means needs at least k points");

  KMeansResult res;
  res.centroids = std::move(init);
  res.assignment.assign(n, 0);
  std::vector<double> dist(n);
  std::vector<double> sums(k * dim);
  std::vector<std::size_t> counts(k);

  auto assign = [&]() {
    const CentroidTable table(res.centroids, dim);
    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto [j, dd] = table.Nearest(data.subspan(i * dim, dim));
      res.assignment[i] = j;
      dist[i] = dd;
      sse += dd;
    }
    return sse;
  };

  double sse = assign();
  res.sse_history.push_back(sse);
  for (int it = 0; it < max_iters && sse > 0.0; ++it) {
    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = res.assignment[i];
      ++counts[j];
      for (std::uint32_t t = 0; t < dim; ++t) sums[j * dim + t] += data[i * dim + t];
    }
    for (std::size_t j = 0; j < k; ++j) {
      if (counts[j] == 0) continue;
      for (std::uint32_t t = 0; t < dim; ++t) {
        res.centroids[j * dim + t] =
            static_cast<float>(sums[j * dim + t] / static_cast<double>(counts[j]));
      }
    }
    for (std::size_t j = 0; j < k; ++j) {
      if (counts[j] != 0) continue;
      std::size_t far = 0;
      for (std::size_t i = 1; i < n; ++i) {
        if (dist[i] > dist[far]) far = i;
      }
      std::copy_n(data.begin() + far * dim, dim,
                  res.centroids.begin() + j * dim);
      dist[far] = 0.0;
    }
    const double prev = sse;
    sse = assign();
    res.sse_history.push_back(sse);
    res.iterations = it + 1;
    if (prev <= 0.0 || (prev - sse) / prev < rel_tol) break;
  }
  return res;
}

KMeansResult KMeans(std::span<const float> data, std::uint32_t dim,
                    const KMeansParams& params) {
  return KMeansFromInit(data, dim,
                        KMeansPlusPlusInit(data, dim, params.k, params.seed),
                        params.max_iters, params.rel_tol);
}

}  // namespace pqcascade
