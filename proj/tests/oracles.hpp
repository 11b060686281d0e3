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


// Independent reference implementations used to check the library. They are
// deliberately naive: plain loops, full sorts, brute-force enumeration.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <set>
#include <span>
#include <utility>
#include <vector>

#include "pqcascade/evaluation.hpp"

namespace pqcascade::oracle {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------- search

enum class Measure { kCosine, kL2Squared, kL1 };

// Similarity under `measure` (higher is better), naive double arithmetic.
inline double Similarity(Measure measure, std::span<const float> q,
                         std::span<const float> x) {
  double dot = 0, qq = 0, xx = 0, l2 = 0, l1 = 0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double a = q[i], b = x[i];
    dot += a * b;
    qq += a * a;
    xx += b * b;
    l2 += (a - b) * (a - b);
    l1 += std::abs(a - b);
  }
  switch (measure) {
    case Measure::kCosine: return dot / std::sqrt(qq * xx);
    case Measure::kL2Squared: return -l2;
    case Measure::kL1: return -l1;
  }
  return 0;
}

// Scores every row, sorts everything, keeps k. Ties by ascending id.
inline std::vector<std::pair<std::uint64_t, double>> FullSortTopK(
    Measure measure, std::span<const float> query, std::span<const float> rows,
    std::span<const std::uint64_t> ids, std::size_t k) {
  const std::size_t d = query.size();
  std::vector<std::pair<std::uint64_t, double>> all;
  for (std::size_t r = 0; r < ids.size(); ++r) {
    all.emplace_back(ids[r], Similarity(measure, query, rows.subspan(r * d, d)));
  }
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  all.resize(std::min(k, all.size()));
  return all;
}

// ---------------------------------------------------------------- k-means

struct LloydResult {
  std::vector<float> centroids;
  std::vector<std::uint32_t> assignment;
  std::vector<double> sse;
};

// Plain Lloyd iterations from a given initialization: nearest centroid by
// exhaustive search (ties to the lower index), float centroids from double
// means, an empty cluster restarts at the point currently farthest from its
// centroid, stop when the relative SSE gain drops below rel_tol.
inline LloydResult Lloyd(std::span<const float> data, std::size_t dim,
                         std::vector<float> centroids, int max_iters,
                         double rel_tol) {
  const std::size_t n = data.size() / dim;
  const std::size_t k = centroids.size() / dim;
  LloydResult out;
  out.centroids = std::move(centroids);
  out.assignment.assign(n, 0);
  std::vector<double> dist(n);
  auto assign = [&] {
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = kInf;
      std::uint32_t arg = 0;
      for (std::size_t j = 0; j < k; ++j) {
        double s = 0;
        for (std::size_t t = 0; t < dim; ++t) {
          const double diff = static_cast<double>(data[i * dim + t]) -
                              static_cast<double>(out.centroids[j * dim + t]);
          s += diff * diff;
        }
        if (s < best) {
          best = s;
          arg = static_cast<std::uint32_t>(j);
        }
      }
      out.assignment[i] = arg;
      dist[i] = best;
      total += best;
    }
    return total;
  };
  double sse = assign();
  out.sse.push_back(sse);
  for (int it = 0; it < max_iters && sse > 0; ++it) {
    std::vector<double> sum(k * dim, 0.0);
    std::vector<std::size_t> cnt(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++cnt[out.assignment[i]];
      for (std::size_t t = 0; t < dim; ++t) {
        sum[out.assignment[i] * dim + t] += data[i * dim + t];
      }
    }
    for (std::size_t j = 0; j < k; ++j) {
      if (cnt[j] == 0) continue;
      for (std::size_t t = 0; t < dim; ++t) {
        out.centroids[j * dim + t] =
            static_cast<float>(sum[j * dim + t] / static_cast<double>(cnt[j]));
      }
    }
    for (std::size_t j = 0; j < k; ++j) {
      if (cnt[j] != 0) continue;
      const std::size_t far = static_cast<std::size_t>(
          std::max_element(dist.begin(), dist.end()) - dist.begin());
      for (std::size_t t = 0; t < dim; ++t) {
        out.centroids[j * dim + t] = data[far * dim + t];
      }
      dist[far] = 0;
    }
    const double prev = sse;
    sse = assign();
    out.sse.push_back(sse);
    if ((prev - sse) / prev < rel_tol) break;
  }
  return out;
}

// ---------------------------------------------------------------- eigen

// Cyclic Jacobi eigenvalues of a symmetric n x n matrix (row-major).
inline std::vector<double> JacobiEigenvalues(std::vector<double> a,
                                             std::size_t n) {
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) off += a[p * n + q] * a[p * n + q];
    }
    if (off < 1e-22) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a[p * n + q];
        if (std::abs(apq) < 1e-300) continue;
        const double theta = (a[q * n + q] - a[p * n + p]) / (2 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1));
        const double c = 1 / std::sqrt(t * t + 1), s = t * c;
        for (std::size_t r = 0; r < n; ++r) {
          const double arp = a[r * n + p], arq = a[r * n + q];
          a[r * n + p] = c * arp - s * arq;
          a[r * n + q] = s * arp + c * arq;
        }
        for (std::size_t r = 0; r < n; ++r) {
          const double apr = a[p * n + r], aqr = a[q * n + r];
          a[p * n + r] = c * apr - s * aqr;
          a[q * n + r] = s * apr + c * aqr;
        }
      }
    }
  }
  std::vector<double> ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = a[i * n + i];
  std::sort(ev.rbegin(), ev.rend());
  return ev;
}

// ---------------------------------------------------------------- metrics

// 1-based ranks of the mates present in the list.
inline std::vector<std::size_t> MateRanks(const ProbeResult& r) {
  std::vector<std::size_t> ranks;
  for (std::size_t i = 0; i < r.ranked.size(); ++i) {
    if (r.mates.count(r.ranked[i].id) != 0) ranks.push_back(i + 1);
  }
  return ranks;
}

// Mean over all mates of the precision at each mate's rank; a mate missing
// from the list contributes zero.
inline double AveragePrecision(const ProbeResult& r) {
  const auto ranks = MateRanks(r);
  double s = 0;
  for (std::size_t j = 0; j < ranks.size(); ++j) {
    s += static_cast<double>(j + 1) / static_cast<double>(ranks[j]);
  }
  return s / static_cast<double>(r.mates.size());
}

inline double MeanAveragePrecision(std::span<const ProbeResult> rs) {
  double s = 0;
  for (const auto& r : rs) s += oracle::AveragePrecision(r);
  return s / static_cast<double>(rs.size());
}

inline double Cmc(std::span<const ProbeResult> rs, std::size_t rank) {
  std::size_t c = 0;
  for (const auto& r : rs) {
    const auto ranks = MateRanks(r);
    if (!ranks.empty() && ranks.front() <= rank) ++c;
  }
  return static_cast<double>(c) / static_cast<double>(rs.size());
}

inline double TopScore(const ProbeResult& r) {
  return r.ranked.empty() ? -kInf : r.ranked.front().score;
}

inline double FractionAccepted(std::span<const double> scores, double t) {
  std::size_t c = 0;
  for (double s : scores) c += s >= t ? 1 : 0;
  return static_cast<double>(c) / static_cast<double>(scores.size());
}

// Smallest threshold meeting the FAR target, found by trying -inf, every
// impostor score and the value just above the largest one.
inline std::pair<double, double> ThresholdForFar(std::span<const double> imp,
                                                 double target) {
  std::set<double> candidates{-kInf};
  for (double s : imp) candidates.insert(s);
  candidates.insert(std::nextafter(*candidates.rbegin(), kInf));
  for (double t : candidates) {
    const double far = FractionAccepted(imp, t);
    if (far <= target) return {t, far};
  }
  return {kInf, 0.0};
}

inline double Tar(std::span<const double> gen, std::span<const double> imp,
                  double target) {
  return FractionAccepted(gen, ThresholdForFar(imp, target).first);
}

inline std::vector<double> TopScores(std::span<const ProbeResult> rs) {
  std::vector<double> out;
  for (const auto& r : rs) out.push_back(TopScore(r));
  return out;
}

// (fpir, fnir) at threshold t: impostors accepted, genuine rejected.
inline std::pair<double, double> FpirFnir(std::span<const ProbeResult> gen,
                                          std::span<const ProbeResult> imp,
                                          double t) {
  const auto g = TopScores(gen), i = TopScores(imp);
  return {FractionAccepted(i, t), 1.0 - FractionAccepted(g, t)};
}

inline double Dir(std::span<const ProbeResult> gen,
                  std::span<const ProbeResult> imp, std::size_t rank,
                  double target) {
  const auto imp_top = TopScores(imp);
  const double t = ThresholdForFar(imp_top, target).first;
  std::size_t c = 0;
  for (const auto& r : gen) {
    const auto ranks = MateRanks(r);
    if (!ranks.empty() && ranks.front() <= rank && TopScore(r) >= t) ++c;
  }
  return static_cast<double>(c) / static_cast<double>(gen.size());
}

inline double OpenSetMap(std::span<const ProbeResult> gen, double t) {
  double s = 0;
  for (const auto& r : gen) {
    if (TopScore(r) >= t) s += oracle::AveragePrecision(r);
  }
  return s / static_cast<double>(gen.size());
}

}  // namespace pqcascade::oracle
