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

#include "pqcascade/kernels.hpp"

#include <algorithm>
#include <cmath>

#include <omp.h>

#if defined(__AVX512F__)
#include <immintrin.h>
#endif

#include "pqcascade/error.hpp"

namespace pqcascade::kernels {

namespace {

constexpr std::size_t kLanes = 8;

template <typename Op>
double LaneReduce(const float* a, const float* b, std::size_t d, Op op) {
  double acc[kLanes] = {};
  std::size_t i = 0;
  for (; i + kLanes <= d; i += kLanes) {
    for (std::size_t j = 0; j < kLanes; ++j) acc[j] += op(a[i + j], b[i + j]);
  }
  double s = ((acc[0] + acc[1]) + (acc[2] + acc[3])) +
             ((acc[4] + acc[5]) + (acc[6] + acc[7]));
  for (; i < d; ++i) s += op(a[i], b[i]);
  return s;
}

template <typename CodeT>
inline float AdcRow(const float* table, std::uint32_t z, const CodeT* code,
                    std::uint32_t m) {
  float s0 = 0.f, s1 = 0.f, s2 = 0.f, s3 = 0.f;
  std::uint32_t i = 0;
  for (; i + 4 <= m; i += 4) {
    s0 += table[(i + 0) * z + code[i + 0]];
    s1 += table[(i + 1) * z + code[i + 1]];
    s2 += table[(i + 2) * z + code[i + 2]];
    s3 += table[(i + 3) * z + code[i + 3]];
  }
  for (; i < m; ++i) s0 += table[i * z + code[i]];
  return (s0 + s1) + (s2 + s3);
}

// Eight rows per step keep more independent loads in flight; each row keeps
// the same four-accumulator order as AdcRow so keys match bit for bit.
template <typename CodeT, std::uint32_t kZ = 0, std::uint32_t kM = 0>
void AdcBlock(const float* table, std::uint32_t z_runtime, const CodeT* code,
              std::uint32_t m_runtime, float* out) {
  const std::size_t z = kZ != 0 ? kZ : z_runtime;
  const std::uint32_t m = kM != 0 ? kM : m_runtime;
  constexpr int kRows = 8;
  float s[kRows][4] = {};
  std::uint32_t i = 0;
  for (; i + 4 <= m; i += 4) {
    const float* t0 = table + i * z;
    const float* t1 = t0 + z;
    const float* t2 = t1 + z;
    const float* t3 = t2 + z;
    for (int r = 0; r < kRows; ++r) {
      const CodeT* c = code + static_cast<std::size_t>(r) * m + i;
      s[r][0] += t0[c[0]];
      s[r][1] += t1[c[1]];
      s[r][2] += t2[c[2]];
      s[r][3] += t3[c[3]];
    }
  }
  for (; i < m; ++i) {
    const float* t0 = table + i * z;
    for (int r = 0; r < kRows; ++r) s[r][0] += t0[code[static_cast<std::size_t>(r) * m + i]];
  }
  for (int r = 0; r < kRows; ++r) out[r] = (s[r][0] + s[r][1]) + (s[r][2] + s[r][3]);
}

template <typename CodeT, std::uint32_t kZ = 0, std::uint32_t kM = 0>
void AdcScanRange(std::span<const float> table, std::uint32_t z,
                  const CodeMatrix& codes, std::span<const std::uint64_t> ids,
                  std::size_t begin, std::size_t end, TopK<float>& top) {
  const auto* base = reinterpret_cast<const CodeT*>(codes.data);
  const float* t = table.data();
  const std::uint32_t m = codes.m;
  float dist[8];
  std::size_t r = begin;
  for (; r + 8 <= end; r += 8) {
    AdcBlock<CodeT, kZ, kM>(t, z, base + r * m, m, dist);
    for (int j = 0; j < 8; ++j) {
      const float key = -dist[j];
      if (top.MayAccept(key)) top.Push(key, ids[r + j]);
    }
  }
  for (; r < end; ++r) {
    const float key = -AdcRow(t, z, base + r * m, m);
    if (top.MayAccept(key)) top.Push(key, ids[r]);
  }
}

void AdcScanRangeAny(std::span<const float> table, std::uint32_t z,
                     const CodeMatrix& codes,
                     std::span<const std::uint64_t> ids, std::size_t begin,
                     std::size_t end, TopK<float>& top) {
  if (codes.width == 1 && z == 256) {
    // Fixed sizes let the compiler unroll the sub-space loop fully.
    switch (codes.m) {
      case 64:
        return AdcScanRange<std::uint8_t, 256, 64>(table, z, codes, ids, begin,
                                                   end, top);
      case 32:
        return AdcScanRange<std::uint8_t, 256, 32>(table, z, codes, ids, begin,
                                                   end, top);
      case 16:
        return AdcScanRange<std::uint8_t, 256, 16>(table, z, codes, ids, begin,
                                                   end, top);
      default:
        break;
    }
  }
  if (codes.width == 1) {
    AdcScanRange<std::uint8_t>(table, z, codes, ids, begin, end, top);
  } else {
    AdcScanRange<std::uint16_t>(table, z, codes, ids, begin, end, top);
  }
}

// Distances for one block of `rows` rows in the blocked layout. Sub-space i
// feeds accumulator i % 4 (tail sub-spaces feed accumulator 0), as in AdcRow.
void AdcBlockedDistances(const float* table, std::uint32_t z,
                         const std::uint8_t* block, std::size_t rows,
                         std::uint32_t m, float* out) {
  const std::uint32_t m4 = m & ~3u;
  std::size_t r0 = 0;
#if defined(__AVX512F__)
  if (z == 256) {
    // The 256 entries of a sub-table sit in 16 registers; each lookup is
    // eight two-register permutes and a blend tree on index bits 5..7.
    constexpr std::size_t kGroups = BlockedCodes::kBlock / 16;
    __m512 acc[kGroups][4];
    const std::size_t groups = rows / 16;
    for (std::size_t g = 0; g < groups; ++g) {
      for (auto& a : acc[g]) a = _mm512_setzero_ps();
    }
    for (std::uint32_t i = 0; i < m; ++i) {
      const float* t = table + std::size_t{i} * 256;
      __m512 tab[16];
      for (int q = 0; q < 16; ++q) tab[q] = _mm512_loadu_ps(t + 16 * q);
      const int slot = i < m4 ? static_cast<int>(i & 3) : 0;
      const std::uint8_t* c = block + std::size_t{i} * rows;
      for (std::size_t g = 0; g < groups; ++g) {
        const __m512i idx = _mm512_cvtepu8_epi32(
            _mm_loadu_si128(reinterpret_cast<const __m128i*>(c + g * 16)));
        const __mmask16 b5 = _mm512_movepi32_mask(_mm512_slli_epi32(idx, 26));
        const __mmask16 b6 = _mm512_movepi32_mask(_mm512_slli_epi32(idx, 25));
        const __mmask16 b7 = _mm512_movepi32_mask(_mm512_slli_epi32(idx, 24));
        __m512 v[8];
        for (int q = 0; q < 8; ++q) {
          v[q] = _mm512_permutex2var_ps(tab[2 * q], idx, tab[2 * q + 1]);
        }
        const __m512 a0 = _mm512_mask_blend_ps(b5, v[0], v[1]);
        const __m512 a1 = _mm512_mask_blend_ps(b5, v[2], v[3]);
        const __m512 a2 = _mm512_mask_blend_ps(b5, v[4], v[5]);
        const __m512 a3 = _mm512_mask_blend_ps(b5, v[6], v[7]);
        const __m512 c0 = _mm512_mask_blend_ps(b6, a0, a1);
        const __m512 c1 = _mm512_mask_blend_ps(b6, a2, a3);
        acc[g][slot] =
            _mm512_add_ps(acc[g][slot], _mm512_mask_blend_ps(b7, c0, c1));
      }
    }
    for (std::size_t g = 0; g < groups; ++g) {
      _mm512_storeu_ps(out + g * 16,
                       _mm512_add_ps(_mm512_add_ps(acc[g][0], acc[g][1]),
                                     _mm512_add_ps(acc[g][2], acc[g][3])));
    }
    r0 = groups * 16;
  }
#endif
  if (r0 == rows) return;
  const std::size_t tail = rows - r0;
  float acc[4][BlockedCodes::kBlock] = {};
  for (std::uint32_t i = 0; i < m; ++i) {
    const float* t = table + std::size_t{i} * z;
    const std::uint8_t* c = block + std::size_t{i} * rows + r0;
    float* a = acc[i < m4 ? (i & 3) : 0];
    for (std::size_t r = 0; r < tail; ++r) a[r] += t[c[r]];
  }
  for (std::size_t r = 0; r < tail; ++r) {
    out[r0 + r] = (acc[0][r] + acc[1][r]) + (acc[2][r] + acc[3][r]);
  }
}

void ExactScanRange(std::span<const float> query, std::span<const float> raw,
                    std::span<const std::uint64_t> ids, Metric metric,
                    double query_norm2, std::size_t begin, std::size_t end,
                    TopK<float>& top) {
  const std::size_t d = query.size();
  for (std::size_t r = begin; r < end; ++r) {
    const float key = ExactKey(metric, query, raw.data() + r * d, query_norm2);
    if (top.MayAccept(key)) top.Push(key, ids[r]);
  }
}

// Runs `scan(begin, end, top)` over contiguous shards, one per thread.
template <typename Scan>
std::vector<Hit> ShardedTopK(std::size_t n, std::size_t k, Exec exec,
                             Scan scan) {
  const int threads = exec == Exec::kParallel ? AvailableThreads() : 1;
  if (threads <= 1 || n < 2 * static_cast<std::size_t>(threads)) {
    TopK<float> top(k);
    scan(std::size_t{0}, n, top);
    return top.TakeSorted();
  }
  std::vector<std::vector<Hit>> shards(static_cast<std::size_t>(threads));
#pragma omp parallel num_threads(threads)
  {
    const auto t = static_cast<std::size_t>(omp_get_thread_num());
    const auto nt = static_cast<std::size_t>(omp_get_num_threads());
    const std::size_t begin = n * t / nt;
    const std::size_t end = n * (t + 1) / nt;
    TopK<float> top(k);
    scan(begin, end, top);
    shards[t] = top.TakeSorted();
  }
  return MergeTopK(std::move(shards), k);
}

void CheckCodes(std::span<const float> table, std::uint32_t z,
                const CodeMatrix& codes) {
  PQC_THROW_IF_NOT(codes.width == 1 || codes.width == 2,
                   ErrorKind::kInvalidArgument, "code width must be 1 or 2");
  PQC_THROW_IF_NOT(table.size() == std::size_t{codes.m} * z,
                   ErrorKind::kDimensionMismatch,
                   "distance table shape does not match codes");
}

}  // namespace

double Dot(const float* a, const float* b, std::size_t d) {
  return LaneReduce(a, b, d, [](float x, float y) {
    return static_cast<double>(x) * static_cast<double>(y);
  });
}

double SquaredL2(const float* a, const float* b, std::size_t d) {
  return LaneReduce(a, b, d, [](float x, float y) {
    const double t = static_cast<double>(x) - static_cast<double>(y);
    return t * t;
  });
}

double L1(const float* a, const float* b, std::size_t d) {
  return LaneReduce(a, b, d, [](float x, float y) {
    return std::abs(static_cast<double>(x) - static_cast<double>(y));
  });
}

DotNorm DotAndNorm(const float* query, const float* x, std::size_t d) {
  return {Dot(query, x, d), Dot(x, x, d)};
}

float AdcDistance(std::span<const float> table, std::uint32_t z,
                  const CodeMatrix& codes, std::size_t row) {
  CheckCodes(table, z, codes);
  PQC_THROW_IF_NOT(row < codes.n, ErrorKind::kInvalidArgument,
                   "code row out of range");
  if (codes.width == 1) {
    return AdcRow(table.data(), z, codes.data + row * codes.m, codes.m);
  }
  const auto* base = reinterpret_cast<const std::uint16_t*>(codes.data);
  return AdcRow(table.data(), z, base + row * codes.m, codes.m);
}

void AdcDistancesSerial(std::span<const float> table, std::uint32_t z,
                        const CodeMatrix& codes, std::span<float> out) {
  CheckCodes(table, z, codes);
  PQC_THROW_IF_NOT(out.size() == codes.n, ErrorKind::kDimensionMismatch,
                   "output size differs from code count");
  for (std::size_t r = 0; r < codes.n; ++r) {
    out[r] = AdcDistance(table, z, codes, r);
  }
}

std::vector<Hit> AdcTopK(std::span<const float> table, std::uint32_t z,
                         const CodeMatrix& codes,
                         std::span<const std::uint64_t> ids, std::size_t k,
                         Exec exec) {
  CheckCodes(table, z, codes);
  PQC_THROW_IF_NOT(ids.size() == codes.n, ErrorKind::kDimensionMismatch,
                   "id count differs from code count");
  return ShardedTopK(codes.n, k, exec,
                     [&](std::size_t b, std::size_t e, TopK<float>& top) {
                       AdcScanRangeAny(table, z, codes, ids, b, e, top);
                     });
}

BlockedCodes BlockCodes(const CodeMatrix& codes) {
  PQC_THROW_IF_NOT(codes.width == 1, ErrorKind::kInvalidArgument,
                   "blocked layout needs one-byte codes");
  BlockedCodes out;
  out.n = codes.n;
  out.m = codes.m;
  out.data.resize(codes.n * codes.m);
  const std::size_t kb = BlockedCodes::kBlock;
  for (std::size_t b0 = 0; b0 < codes.n; b0 += kb) {
    const std::size_t rows = std::min(kb, codes.n - b0);
    std::uint8_t* dst = out.data.data() + b0 * codes.m;
    for (std::size_t r = 0; r < rows; ++r) {
      const std::uint8_t* src = codes.data + (b0 + r) * codes.m;
      for (std::uint32_t i = 0; i < codes.m; ++i) dst[i * rows + r] = src[i];
    }
  }
  return out;
}

std::vector<Hit> AdcTopK(std::span<const float> table, std::uint32_t z,
                         const BlockedCodes& codes,
                         std::span<const std::uint64_t> ids, std::size_t k,
                         Exec exec) {
  PQC_THROW_IF_NOT(z >= 1 && z <= 256 && table.size() == std::size_t{codes.m} * z,
                   ErrorKind::kDimensionMismatch,
                   "distance table does not match codes");
  PQC_THROW_IF_NOT(ids.size() == codes.n && codes.data.size() == codes.n * codes.m,
                   ErrorKind::kDimensionMismatch,
                   "id count differs from code count");
  const std::size_t kb = BlockedCodes::kBlock;
  const std::size_t blocks = (codes.n + kb - 1) / kb;
  return ShardedTopK(
      blocks, k, exec, [&](std::size_t bb, std::size_t be, TopK<float>& top) {
        std::vector<float> dist(kb);
        for (std::size_t b = bb; b < be; ++b) {
          const std::size_t first = b * kb;
          const std::size_t rows = std::min(kb, codes.n - first);
          AdcBlockedDistances(table.data(), z,
                              codes.data.data() + first * codes.m, rows,
                              codes.m, dist.data());
          for (std::size_t r = 0; r < rows; ++r) {
            const float key = -dist[r];
            if (top.MayAccept(key)) top.Push(key, ids[first + r]);
          }
        }
      });
}

float ExactKey(Metric metric, std::span<const float> query, const float* x,
               double query_norm2) {
  const std::size_t d = query.size();
  switch (metric) {
    case Metric::kCosine: {
      const DotNorm dn = DotAndNorm(query.data(), x, d);
      const double denom = std::sqrt(query_norm2 * dn.norm2);
      return denom > 0.0 ? static_cast<float>(dn.dot / denom) : 0.0f;
    }
    case Metric::kL1:
      return -static_cast<float>(L1(query.data(), x, d));
    case Metric::kL2:
      return -static_cast<float>(SquaredL2(query.data(), x, d));
  }
  return 0.0f;
}

std::vector<Hit> ExactTopK(std::span<const float> query,
                           std::span<const float> raw,
                           std::span<const std::uint64_t> ids, Metric metric,
                           std::size_t k, Exec exec) {
  const std::size_t d = query.size();
  PQC_THROW_IF_NOT(d > 0 && raw.size() == ids.size() * d,
                   ErrorKind::kDimensionMismatch,
                   "raw vectors do not match query dimension and id count");
  const double qn2 = Dot(query.data(), query.data(), d);
  return ShardedTopK(ids.size(), k, exec,
                     [&](std::size_t b, std::size_t e, TopK<float>& top) {
                       ExactScanRange(query, raw, ids, metric, qn2, b, e, top);
                     });
}

int AvailableThreads() {
  return omp_in_parallel() ? 1 : omp_get_max_threads();
}

}  // namespace pqcascade::kernels
