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


#include <omp.h>

#include <fstream>
#include <random>
#include <set>

#include <doctest.h>

#include "oracles.hpp"
#include "pqcascade/filter_search.hpp"
#include "test_util.hpp"

namespace pqcascade {
namespace {

using testing::TempDir;
using testing::ThrownKind;

PQCodebook Trained(const Dataset& ds, std::uint32_t m, std::uint32_t z,
                   std::uint64_t seed = 1) {
  Dataset norm(ds.dim());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    norm.Add(ds.info(i), L2Normalize(ds.vector(i)));
  }
  TrainParams p;
  p.m = m;
  p.z = z;
  p.seed = seed;
  return TrainCodebooks(norm, p);
}

std::vector<std::uint64_t> Ids(const CandidateList& list) {
  std::vector<std::uint64_t> out;
  for (const auto& c : list) out.push_back(c.id);
  return out;
}

TEST_CASE("index shape and raw vectors") {
  std::mt19937_64 rng(1);
  const Dataset ds = testing::RandomDataset(rng, 3, 8, 40);
  const PQCodebook cb(4, 2, 8, testing::RandomVector(rng, 16));
  const GalleryIndex idx = BuildIndex(ds, cb, true);
  CHECK(idx.size() == 3);
  CHECK(idx.code_bytes().size() == 3 * 4);
  CHECK(idx.ids()[2] == 42);
  for (std::size_t i = 0; i < 3; ++i) {
    const auto want = L2Normalize(ds.vector(i));
    const auto got = idx.raw_vector(i);
    CHECK(std::equal(want.begin(), want.end(), got.begin(), got.end()));
  }
  CHECK(idx.RowOf(41) == 1);
  CHECK_FALSE(idx.RowOf(7).has_value());
  CHECK(BuildIndex(ds, cb, false).raw().empty());
}

TEST_CASE("index build is deterministic down to the file bytes") {
  TempDir dir;
  std::mt19937_64 rng(2);
  const Dataset ds = testing::RandomDataset(rng, 200, 16);
  const PQCodebook cb = Trained(ds, 4, 16);
  omp_set_num_threads(1);
  SaveIndex(BuildIndex(ds, cb, true), dir / "a.pqix");
  omp_set_num_threads(8);
  SaveIndex(BuildIndex(ds, cb, true), dir / "b.pqix");
  std::ifstream a(dir / "a.pqix", std::ios::binary), b(dir / "b.pqix", std::ios::binary);
  const std::string sa((std::istreambuf_iterator<char>(a)), {});
  const std::string sb((std::istreambuf_iterator<char>(b)), {});
  CHECK(sa == sb);
  CHECK(LoadIndex(dir / "a.pqix") == BuildIndex(ds, cb, true));
}

TEST_CASE("index build errors") {
  std::mt19937_64 rng(3);
  const PQCodebook cb(2, 2, 4, testing::RandomVector(rng, 8));
  CHECK(ThrownKind([&] {
          BuildIndex(testing::RandomDataset(rng, 3, 6), cb, false);
        }) == ErrorKind::kDimensionMismatch);
  Dataset dup(4);
  dup.Add({1, {}, true}, std::vector<float>{1, 0, 0, 0});
  dup.Add({1, {}, true}, std::vector<float>{0, 1, 0, 0});
  CHECK(ThrownKind([&] { BuildIndex(dup, cb, false); }) ==
        ErrorKind::kDuplicateId);
  Dataset zero(4);
  zero.Add({1, {}, true}, std::vector<float>{0, 0, 0, 0});
  CHECK(ThrownKind([&] { BuildIndex(zero, cb, false); }) ==
        ErrorKind::kZeroNorm);
}

TEST_CASE("index file errors") {
  TempDir dir;
  std::mt19937_64 rng(4);
  const Dataset ds = testing::RandomDataset(rng, 20, 8);
  const GalleryIndex idx = BuildIndex(ds, Trained(ds, 2, 4), true);
  SaveIndex(idx, dir / "i.pqix");
  const auto size = std::filesystem::file_size(dir / "i.pqix");
  CHECK(size == 4 + 12 + 8 + 2 + 4 * 4 * 8 + 20 * 8 + 20 * 2 + 20 * 8 * 4);
  std::filesystem::resize_file(dir / "i.pqix", size - 3);
  CHECK(ThrownKind([&] { LoadIndex(dir / "i.pqix"); }) == ErrorKind::kTruncated);
  {
    std::ofstream f(dir / "j.pqix", std::ios::binary);
    f << "FVE1000000000000000000000000";
  }
  CHECK(ThrownKind([&] { LoadIndex(dir / "j.pqix"); }) == ErrorKind::kBadMagic);
}

TEST_CASE("exact search basics") {
  std::mt19937_64 rng(5);
  const Dataset ds = testing::RandomDataset(rng, 30, 8, 100);
  const GalleryIndex idx = BuildIndex(ds, Trained(ds, 2, 4), true);
  const auto q = L2Normalize(ds.vector(12));
  const auto top = SearchExact(idx, q, 5, Metric::kCosine);
  REQUIRE(top.size() == 5);
  CHECK(top[0].id == 112);
  CHECK(top[0].score == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(SearchExact(idx, q, 100, Metric::kCosine).size() == 30);
  const auto l2 = SearchExact(idx, q, 3, Metric::kL2);
  CHECK(l2[0].id == 112);
  CHECK(l2[0].score <= 0.0f);
  CHECK(l2[1].score < 0.0f);
}

TEST_CASE("exact search agrees with a full sort") {
  std::mt19937_64 rng(6);
  const Dataset ds = testing::RandomDataset(rng, 100, 8);
  std::vector<std::uint64_t> ids;
  for (const auto& info : ds.infos()) ids.push_back(info.id);
  for (int trial = 0; trial < 20; ++trial) {
    const auto q = testing::RandomVector(rng, 8);
    const auto want =
        oracle::FullSortTopK(oracle::Measure::kCosine, q, ds.values(), ids, 5);
    const auto got = SearchExact(ds, q, 5, Metric::kCosine);
    REQUIRE(got.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
      CHECK(got[i].id == want[i].first);
      CHECK(got[i].score == doctest::Approx(want[i].second).epsilon(1e-6));
    }
    const auto l1 =
        oracle::FullSortTopK(oracle::Measure::kL1, q, ds.values(), ids, 5);
    const auto got_l1 = SearchExact(ds, q, 5, Metric::kL1);
    for (std::size_t i = 0; i < 5; ++i) CHECK(got_l1[i].id == l1[i].first);
    const auto l2 =
        oracle::FullSortTopK(oracle::Measure::kL2Squared, q, ds.values(), ids, 5);
    const auto got_l2 = SearchExact(ds, q, 5, Metric::kL2);
    for (std::size_t i = 0; i < 5; ++i) {
      CHECK(got_l2[i].id == l2[i].first);
      CHECK(got_l2[i].score ==
            doctest::Approx(-std::sqrt(-l2[i].second)).epsilon(1e-6));
    }
  }
}

TEST_CASE("search errors") {
  std::mt19937_64 rng(7);
  const Dataset ds = testing::RandomDataset(rng, 10, 4);
  const PQCodebook cb = Trained(ds, 2, 4);
  const GalleryIndex with_raw = BuildIndex(ds, cb, true);
  const GalleryIndex no_raw = BuildIndex(ds, cb, false);
  const std::vector<float> q = {1, 0, 0, 0};
  CHECK(ThrownKind([&] { SearchExact(with_raw, q, 0, Metric::kCosine); }) ==
        ErrorKind::kInvalidArgument);
  CHECK(ThrownKind([&] { SearchPQ(with_raw, q, 0); }) ==
        ErrorKind::kInvalidArgument);
  CHECK(ThrownKind([&] { SearchExact(no_raw, q, 3, Metric::kCosine); }) ==
        ErrorKind::kMissingRaw);
  CHECK(ThrownKind([&] {
          SearchExact(with_raw, std::vector<float>{1, 0}, 3, Metric::kCosine);
        }) == ErrorKind::kDimensionMismatch);
  CHECK(ThrownKind([&] { SearchPQ(with_raw, std::vector<float>{1, 0}, 3); }) ==
        ErrorKind::kDimensionMismatch);
  CHECK(ThrownKind([] { ParseMetric("hamming"); }) ==
        ErrorKind::kInvalidArgument);
  CHECK(ParseMetric("cosine") == Metric::kCosine);
  CHECK(ParseMetric("L2") == Metric::kL2);
  CHECK(MetricName(Metric::kL1) == "l1");
}

TEST_CASE("pq search finds a zero-distance item first") {
  std::mt19937_64 rng(8);
  const Dataset ds = testing::RandomDataset(rng, 60, 16);
  const PQCodebook cb = Trained(ds, 4, 32);
  const GalleryIndex idx = BuildIndex(ds, cb, false);
  std::set<PQCode> codes;
  for (std::size_t i = 0; i < idx.size(); ++i) codes.insert(idx.code(i));
  REQUIRE(codes.size() == idx.size());
  const auto q = Decode(cb, idx.code(17));
  const auto top = SearchPQ(idx, q, 5);
  CHECK(top[0].id == 17);
  CHECK(top[0].score == 1.0f);
  CHECK(top[1].score < 1.0f);
}

TEST_CASE("pq search with a memorizing codebook equals exact l2 search") {
  std::mt19937_64 rng(9);
  const std::size_t n = 200;
  const std::uint32_t d = 12;
  Dataset ds(d);
  std::vector<float> centroids;
  for (std::uint64_t i = 0; i < n; ++i) {
    const auto v = L2Normalize(testing::RandomVector(rng, d));
    ds.Add({1000 + i, {}, true}, v);
    centroids.insert(centroids.end(), v.begin(), v.end());
  }
  const PQCodebook cb(1, static_cast<std::uint32_t>(n), d, centroids);
  const GalleryIndex idx = BuildIndex(ds, cb, false);
  for (std::size_t i = 0; i < n; ++i) CHECK(idx.code(i)[0] == i);
  for (int trial = 0; trial < 20; ++trial) {
    const auto q = L2Normalize(testing::RandomVector(rng, d));
    const auto pq = SearchPQ(idx, q, n);
    const auto exact = SearchExact(centroids, idx.ids(), q, n, Metric::kL2);
    CHECK(Ids(pq) == Ids(exact));
  }
}

TEST_CASE("pq search: serial and parallel agree, and recall is logged") {
  SyntheticParams sp;
  sp.num_subjects = 2500;
  sp.images_per_subject = 4;
  sp.dim = 64;
  sp.within_class_noise = 0.1;
  sp.seed = 4;
  const Dataset ds = GenerateSynthetic(sp);
  TrainParams tp;
  tp.m = 8;
  tp.z = 256;
  tp.seed = 3;
  const PQCodebook cb = TrainCodebooks(ds.Slice(0, 4000), tp);
  const GalleryIndex idx = BuildIndex(ds, cb, true);
  std::mt19937_64 rng(10);
  std::size_t found = 0;
  const std::size_t queries = 100;
  for (std::size_t qi = 0; qi < queries; ++qi) {
    auto q = ds.record(rng() % ds.size()).vector;
    for (float& x : q) x += 0.05f * (static_cast<float>(rng() % 1000) / 500.0f - 1.0f);
    q = L2Normalize(q);
    omp_set_num_threads(1);
    const auto serial = SearchPQ(idx, q, 100, Exec::kSerial);
    omp_set_num_threads(8);
    const auto parallel = SearchPQ(idx, q, 100, Exec::kParallel);
    CHECK(serial == parallel);
    const auto exact = SearchExact(idx, q, 1, Metric::kCosine);
    for (const auto& c : serial) found += c.id == exact[0].id ? 1 : 0;
  }
  const double recall = static_cast<double>(found) / queries;
  MESSAGE("recall@100 of the exact nearest neighbor: " << recall);
  CHECK(recall >= 0.9);
}

TEST_CASE("prefix index") {
  std::mt19937_64 rng(11);
  const Dataset ds = testing::RandomDataset(rng, 50, 8);
  const GalleryIndex idx = BuildIndex(ds, Trained(ds, 2, 8), true);
  const GalleryIndex pre = idx.Prefix(20);
  CHECK(pre == BuildIndex(ds.Slice(0, 20), idx.codebook(), true));
  CHECK(ThrownKind([&] { idx.Prefix(51); }) == ErrorKind::kInvalidArgument);
}

TEST_CASE("default candidate size") {
  CHECK(DefaultCandidateSize(100000) == 1000);
  CHECK(DefaultCandidateSize(5000000, 50000) == 50000);
  CHECK(DefaultCandidateSize(80000000, 1000) == 1000);
  CHECK(DefaultCandidateSize(10) == 50);
  CHECK(DefaultCandidateSize(100001) == 1001);
  CHECK(ThrownKind([] { DefaultCandidateSize(0); }) ==
        ErrorKind::kInvalidArgument);
}

}  // namespace
}  // namespace pqcascade
