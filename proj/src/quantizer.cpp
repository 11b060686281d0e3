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

#include "pqcascade/quantizer.hpp"

#include <cmath>
#include <cstring>

#include "pqcascade/binary_io.hpp"
#include "pqcascade/error.hpp"
#include "pqcascade/kmeans.hpp"

namespace pqcascade {

namespace {

constexpr std::string_view kCodebookMagic = "PQCB";

void CheckDim(const PQCodebook& codebook, std::size_t n) {
  PQC_THROW_IF_NOT(n == codebook.dim(), ErrorKind::kDimensionMismatch,
                   "vector has dimension " + std::to_string(n) +
                       ", codebook expects " + std::to_string(codebook.dim()));
}

}  // namespace

PQCodebook::PQCodebook(std::uint32_t m, std::uint32_t z, std::uint32_t dim,
                       std::vector<float> centroids)
    : m_(m), z_(z), dim_(dim), centroids_(std::move(centroids)) {
  PQC_THROW_IF_NOT(m >= 1 && dim >= 1 && dim % m == 0,
                   ErrorKind::kInvalidArgument,
                   "dimension " + std::to_string(dim) +
                       " is not divisible by m=" + std::to_string(m));
  PQC_THROW_IF_NOT(z >= 1 && z <= 65536, ErrorKind::kInvalidArgument,
                   "z must lie in [1, 65536]");
  PQC_THROW_IF_NOT(centroids_.size() == std::size_t{z} * dim,
                   ErrorKind::kDimensionMismatch,
                   "centroid array has wrong size");
  for (float c : centroids_) {
    PQC_THROW_IF_NOT(std::isfinite(c), ErrorKind::kInvalidArgument,
                     "non-finite centroid");
  }
}

std::uint64_t SubspaceSeed(std::uint64_t seed, std::uint32_t sub) {
  // splitmix64 finalizer over (seed, sub).
  std::uint64_t x = seed + 0x9e3779b97f4a7c15ULL * (std::uint64_t{sub} + 1);
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

PQCodebook TrainCodebooks(std::span<const float> vectors, std::uint32_t dim,
                          const TrainParams& params, TrainTrace* trace) {
  const std::uint32_t m = params.m;
  const std::uint32_t z = params.z;
  PQC_THROW_IF_NOT(m >= 1 && dim % m == 0, ErrorKind::kInvalidArgument,
                   "dimension " + std::to_string(dim) +
                       " is not divisible by m=" + std::to_string(m));
  PQC_THROW_IF_NOT(z >= 1 && z <= 65536, ErrorKind::kInvalidArgument,
                   "z must lie in [1, 65536]");
  const std::size_t n = vectors.size() / dim;
  PQC_THROW_IF_NOT(n >= z, ErrorKind::kInvalidArgument,
                   "need at least z=" + std::to_string(z) +
                       " training vectors, got " + std::to_string(n));
  const std::uint32_t dsub = dim / m;

  std::vector<float> centroids(std::size_t{z} * dim);
  std::vector<std::vector<double>> histories(m);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t s = 0; s < static_cast<std::int64_t>(m); ++s) {
    const auto sub = static_cast<std::uint32_t>(s);
    std::vector<float> sub_data(n * dsub);
    for (std::size_t i = 0; i < n; ++i) {
      std::memcpy(sub_data.data() + i * dsub,
                  vectors.data() + i * dim + std::size_t{sub} * dsub,
                  dsub * sizeof(float));
    }
    KMeansParams kp;
    kp.k = z;
    kp.max_iters = params.max_iters;
    kp.rel_tol = params.rel_tol;
    kp.seed = SubspaceSeed(params.seed, sub);
    KMeansResult res = KMeans(sub_data, dsub, kp);
    std::copy(res.centroids.begin(), res.centroids.end(),
              centroids.begin() + std::size_t{sub} * z * dsub);
    histories[sub] = std::move(res.sse_history);
  }
  if (trace != nullptr) trace->sse_history = std::move(histories);
  return PQCodebook(m, z, dim, std::move(centroids));
}

PQCodebook TrainCodebooks(const Dataset& vectors, const TrainParams& params,
                          TrainTrace* trace) {
  return TrainCodebooks(vectors.values(), vectors.dim(), params, trace);
}

namespace {

std::vector<CentroidTable> SubTables(const PQCodebook& codebook) {
  std::vector<CentroidTable> tables;
  tables.reserve(codebook.m());
  for (std::uint32_t sub = 0; sub < codebook.m(); ++sub) {
    tables.emplace_back(codebook.sub_codebook(sub), codebook.sub_dim());
  }
  return tables;
}

void EncodeWith(const std::vector<CentroidTable>& tables, std::uint32_t width,
                std::span<const float> vector, std::span<std::uint8_t> out) {
  const std::uint32_t dsub = tables.front().dim();
  for (std::uint32_t sub = 0; sub < tables.size(); ++sub) {
    const auto j =
        tables[sub].Nearest(vector.subspan(std::size_t{sub} * dsub, dsub)).first;
    if (width == 1) {
      out[sub] = static_cast<std::uint8_t>(j);
    } else {
      const auto v = static_cast<std::uint16_t>(j);
      std::memcpy(out.data() + 2 * sub, &v, 2);
    }
  }
}

}  // namespace

void EncodeInto(const PQCodebook& codebook, std::span<const float> vector,
                std::span<std::uint8_t> out) {
  CheckDim(codebook, vector.size());
  PQC_THROW_IF_NOT(
      out.size() == std::size_t{codebook.m()} * codebook.code_width(),
      ErrorKind::kDimensionMismatch, "code buffer size mismatch");
  EncodeWith(SubTables(codebook), codebook.code_width(), vector, out);
}

PQCode Encode(const PQCodebook& codebook, std::span<const float> vector) {
  CheckDim(codebook, vector.size());
  const std::uint32_t dsub = codebook.sub_dim();
  PQCode code(codebook.m());
  for (std::uint32_t sub = 0; sub < codebook.m(); ++sub) {
    code[sub] = NearestCentroid(vector.subspan(std::size_t{sub} * dsub, dsub),
                                codebook.sub_codebook(sub))
                    .first;
  }
  return code;
}

std::vector<std::uint8_t> EncodeBatch(const PQCodebook& codebook,
                                      std::span<const float> values,
                                      Exec exec) {
  const std::uint32_t d = codebook.dim();
  PQC_THROW_IF_NOT(values.size() % d == 0, ErrorKind::kDimensionMismatch,
                   "value buffer is not a multiple of the codebook dim");
  const std::size_t n = values.size() / d;
  const std::uint32_t width = codebook.code_width();
  const std::size_t row_bytes = std::size_t{codebook.m()} * width;
  std::vector<std::uint8_t> codes(n * row_bytes);
  const auto tables = SubTables(codebook);
  const int threads = exec == Exec::kParallel ? kernels::AvailableThreads() : 1;
#pragma omp parallel for schedule(static) num_threads(threads)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
    const auto r = static_cast<std::size_t>(i);
    EncodeWith(tables, width, values.subspan(r * d, d),
               std::span<std::uint8_t>(codes.data() + r * row_bytes, row_bytes));
  }
  return codes;
}

std::vector<float> Decode(const PQCodebook& codebook, const PQCode& code) {
  PQC_THROW_IF_NOT(code.size() == codebook.m(), ErrorKind::kDimensionMismatch,
                   "code length differs from m");
  std::vector<float> out;
  out.reserve(codebook.dim());
  for (std::uint32_t sub = 0; sub < codebook.m(); ++sub) {
    PQC_THROW_IF_NOT(code[sub] < codebook.z(), ErrorKind::kInvalidArgument,
                     "code index " + std::to_string(code[sub]) +
                         " out of range for z=" + std::to_string(codebook.z()));
    const auto c = codebook.centroid(sub, code[sub]);
    out.insert(out.end(), c.begin(), c.end());
  }
  return out;
}

DistanceTable BuildDistanceTable(const PQCodebook& codebook,
                                 std::span<const float> query) {
  CheckDim(codebook, query.size());
  const std::uint32_t dsub = codebook.sub_dim();
  DistanceTable t;
  t.m = codebook.m();
  t.z = codebook.z();
  t.query_dim = codebook.dim();
  t.table.resize(std::size_t{t.m} * t.z);
  for (std::uint32_t sub = 0; sub < t.m; ++sub) {
    const float* q = query.data() + std::size_t{sub} * dsub;
    for (std::uint32_t j = 0; j < t.z; ++j) {
      t.table[std::size_t{sub} * t.z + j] = static_cast<float>(
          kernels::SquaredL2(q, codebook.centroid(sub, j).data(), dsub));
    }
  }
  return t;
}

float AdcDistance(const DistanceTable& table, const PQCode& code) {
  PQC_THROW_IF_NOT(code.size() == table.m, ErrorKind::kDimensionMismatch,
                   "code length differs from table rows");
  std::vector<std::uint16_t> packed(code.size());
  for (std::size_t i = 0; i < code.size(); ++i) {
    PQC_THROW_IF_NOT(code[i] < table.z, ErrorKind::kInvalidArgument,
                     "code index out of range");
    packed[i] = static_cast<std::uint16_t>(code[i]);
  }
  const kernels::CodeMatrix matrix{
      reinterpret_cast<const std::uint8_t*>(packed.data()), 1, table.m, 2};
  return kernels::AdcDistance(table.table, table.z, matrix, 0);
}

void SaveCodebook(const PQCodebook& codebook,
                  const std::filesystem::path& path) {
  io::BinaryWriter w(path);
  w.WriteMagic(kCodebookMagic);
  w.Write<std::uint32_t>(codebook.m());
  w.Write<std::uint32_t>(codebook.z());
  w.Write<std::uint32_t>(codebook.dim());
  w.WriteSpan(codebook.centroids());
  w.Close();
}

PQCodebook LoadCodebook(const std::filesystem::path& path) {
  io::BinaryReader r(path);
  r.ExpectMagic(kCodebookMagic);
  const auto m = r.Read<std::uint32_t>();
  const auto z = r.Read<std::uint32_t>();
  const auto dim = r.Read<std::uint32_t>();
  PQC_THROW_IF_NOT(m >= 1 && z >= 1 && dim >= 1 && dim % m == 0 && z <= 65536,
                   ErrorKind::kFormat, "invalid codebook header in " +
                                           path.string());
  PQC_THROW_IF_NOT(r.remaining() >= 4ull * z * dim, ErrorKind::kTruncated,
                   "truncated payload in " + path.string());
  std::vector<float> centroids(std::size_t{z} * dim);
  r.ReadSpan(std::span<float>(centroids));
  PQC_THROW_IF_NOT(r.at_end(), ErrorKind::kDimensionMismatch,
                   "trailing bytes after codebook payload in " + path.string());
  return PQCodebook(m, z, dim, std::move(centroids));
}

}  // namespace pqcascade
