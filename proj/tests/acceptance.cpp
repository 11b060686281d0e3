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


// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset.

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "pqcascade/benchmark.hpp"
#include "pqcascade/evaluation.hpp"
#include "pqcascade/filter_search.hpp"
#include "pqcascade/quantizer.hpp"
#include "pqcascade/rerank_fusion.hpp"

namespace pqcascade {
namespace {

using Clock = std::chrono::steady_clock;

double Since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string Fmt(const char* format, ...) __attribute__((format(printf, 1, 2)));
std::string Fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof(buf), format, args);
  va_end(args);
  return buf;
}

std::vector<float> RandomUnit(std::mt19937_64& rng, std::size_t d) {
  std::normal_distribution<float> g;
  std::vector<float> v(d);
  for (float& x : v) x = g(rng);
  return L2Normalize(v);
}

std::vector<std::uint64_t> Ids(const CandidateList& list) {
  std::vector<std::uint64_t> out;
  out.reserve(list.size());
  for (const auto& c : list) out.push_back(c.id);
  return out;
}

// 1. ADC equals the squared distance to the reconstruction.
Outcome AdcCorrectness() {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  const std::uint32_t d = 64;
  double worst = 0.0;
  std::size_t pairs = 0;
  for (std::uint32_t m : {1u, 2u, 4u, 8u}) {
    std::vector<float> train(500 * d);
    for (float& x : train) x = u(rng);
    TrainParams tp;
    tp.m = m;
    tp.z = 16;
    tp.seed = m;
    const PQCodebook cb = TrainCodebooks(train, d, tp);
    for (int i = 0; i < 250; ++i, ++pairs) {
      std::vector<float> q(d), x(d);
      for (float& v : q) v = u(rng);
      for (float& v : x) v = u(rng);
      const PQCode code = Encode(cb, x);
      const std::vector<float> rec = Decode(cb, code);
      double exact = 0.0;
      for (std::uint32_t t = 0; t < d; ++t) {
        const double diff = double{q[t]} - rec[t];
        exact += diff * diff;
      }
      const double adc = AdcDistance(BuildDistanceTable(cb, q), code);
      worst = std::max(worst, std::abs(adc - exact) / exact);
    }
  }
  return {worst <= 1e-4,
          Fmt("max relative error %.3g over %zu pairs (limit 1e-4)", worst, pairs)};
}

// 2. A codebook whose centroids are the gallery itself reproduces exact L2.
Outcome MemorizingCodebook() {
  std::mt19937_64 rng(202);
  const std::size_t n = 1000;
  const std::uint32_t d = 32;
  Dataset ds(d);
  std::vector<float> centroids;
  for (std::uint64_t i = 0; i < n; ++i) {
    const auto v = RandomUnit(rng, d);
    ds.Add({i, {}, true}, v);
    centroids.insert(centroids.end(), v.begin(), v.end());
  }
  const GalleryIndex index =
      BuildIndex(ds, PQCodebook(1, static_cast<std::uint32_t>(n), d, centroids), true);
  std::size_t identical = 0;
  const std::size_t queries = 100;
  for (std::size_t i = 0; i < queries; ++i) {
    const auto q = RandomUnit(rng, d);
    identical += Ids(SearchPQ(index, q, n)) == Ids(SearchExact(index, q, n, Metric::kL2));
  }
  return {identical == queries,
          Fmt("%zu/%zu full orderings identical over %zu gallery vectors",
              identical, queries, n)};
}

// Same ordering up to the order of items whose scores are exactly equal in
// either list; such items have no defined argsort order.
bool SameUpToTies(const CandidateList& a, const CandidateList& b) {
  if (a.size() != b.size()) return false;
  std::size_t begin = 0;
  while (begin < a.size()) {
    std::size_t end = begin + 1;
    while (end < a.size() && (a[end].score == a[end - 1].score ||
                              b[end].score == b[end - 1].score)) {
      ++end;
    }
    std::vector<std::uint64_t> x, y;
    for (std::size_t i = begin; i < end; ++i) {
      x.push_back(a[i].id);
      y.push_back(b[i].id);
    }
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    if (x != y) return false;
    begin = end;
  }
  return true;
}

// 3. Cosine and L2 rank normalized vectors identically.
Outcome CosineL2Equivalence() {
  std::mt19937_64 rng(303);
  const std::size_t n = 1000;
  const std::uint32_t d = 64;
  Dataset ds(d);
  for (std::uint64_t i = 0; i < n; ++i) ds.Add({i, {}, true}, RandomUnit(rng, d));
  std::size_t identical = 0, equivalent = 0;
  const std::size_t queries = 100;
  for (std::size_t i = 0; i < queries; ++i) {
    const auto q = RandomUnit(rng, d);
    const auto cos = SearchExact(ds, q, n, Metric::kCosine);
    const auto l2 = SearchExact(ds, q, n, Metric::kL2);
    identical += Ids(cos) == Ids(l2);
    equivalent += SameUpToTies(cos, l2);
  }
  return {equivalent == queries,
          Fmt("%zu/%zu full orderings over %zu gallery vectors agree (%zu identical "
              "by id, the rest differ only inside exactly tied scores)",
              equivalent, queries, n, identical)};
}

// 4. PQ filtering keeps the exact nearest neighbor in its top 100.
Outcome FilteringQuality() {
  BenchConfig c;
  c.seed = 4;
  const std::size_t mates = c.num_subjects * (c.images_per_subject - 1);
  const std::size_t distractors = 10000 - mates;
  const BenchData data = GenerateBenchData(c, distractors);
  Dataset gallery = AssembleGallery(data, distractors);
  const PQCodebook cb = TrainBenchCodebook(c, gallery);
  const GalleryIndex index = BuildIndex(std::move(gallery), cb, true);
  const std::size_t queries = 500;
  std::size_t found = 0;
  for (std::size_t i = 0; i < queries; ++i) {
    const auto q = data.probes.vector(i);
    const std::uint64_t nn = SearchExact(index, q, 1, Metric::kCosine)[0].id;
    for (const auto& hit : SearchPQ(index, q, 100)) found += hit.id == nn;
  }
  const double recall = static_cast<double>(found) / queries;
  return {recall >= 0.9,
          Fmt("recall@100 of the exact top-1 = %.4f over %zu queries, gallery %zu "
              "(floor 0.9)",
              recall, queries, index.size())};
}

struct CascadeMaps {
  double fast = 0, then = 0, only = 0, rank = 0;
  std::size_t k = 0;
  bool operator==(const CascadeMaps&) const = default;
};

CascadeMaps RunCascadeBench(int threads) {
  omp_set_num_threads(threads);
  BenchConfig c;
  const BenchData data = GenerateBenchData(c, 50000);
  Dataset gallery = AssembleGallery(data, 50000);
  const PQCodebook cb = TrainBenchCodebook(c, gallery);
  const GalleryIndex index = BuildIndex(std::move(gallery), cb, true);
  const ReferenceSlowMatcher matcher(index, c.slow_perturbation, c.seed);
  CascadeMaps out;
  out.k = DefaultCandidateSize(index.size());
  auto map = [&](std::optional<FusionStrategy> s) {
    return MeanAveragePrecision(
        RunStrategy(index, matcher, data.probes, data.mates, out.k, s));
  };
  out.fast = map(std::nullopt);
  out.then = map(FusionStrategy::kDfThenCots);
  out.only = map(FusionStrategy::kDfThenCotsOnly);
  out.rank = map(FusionStrategy::kDfThenCotsRank);
  return out;
}

// 5. Fusion beats each single ordering at the default candidate size.
Outcome CascadeOrdering() {
  const auto t0 = Clock::now();
  const CascadeMaps a = RunCascadeBench(1);
  const double first = Since(t0);
  const auto t1 = Clock::now();
  const CascadeMaps b = RunCascadeBench(8);
  const double second = Since(t1);
  omp_set_num_threads(1);
  auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  const bool ordered = a.then >= a.fast && a.then >= a.only && a.then >= a.rank;
  const bool bounded = unit(a.fast) && unit(a.then) && unit(a.only) && unit(a.rank);
  const bool repro = a == b;
  const bool fast_enough = first < 300.0 && second < 300.0;
  return {ordered && bounded && repro && fast_enough,
          Fmt("k=%zu mAP fast-only=%.4f then-cots=%.4f then-cots-only=%.4f "
              "then-cots-rank=%.4f; reproducible(1 vs 8 threads)=%s; runs %.0fs, %.0fs "
              "(limit 300s each)",
              a.k, a.fast, a.then, a.only, a.rank, repro ? "yes" : "no", first,
              second)};
}

// 6 and 10 share one k-sweep over the nested galleries.
struct SweepOutcome {
  Outcome shape;
  Outcome growth;
};

SweepOutcome KSweepAndGrowth() {
  omp_set_num_threads(1);
  BenchConfig c;
  const auto t0 = Clock::now();
  const BenchReport r = RunKSweep(c);
  const double secs = Since(t0);

  std::map<std::size_t, std::vector<std::pair<std::size_t, double>>> then, fast;
  for (const auto& cell : r.cells) {
    auto& dst = cell.strategy == "fast-only" ? fast : then;
    dst[cell.distractors].emplace_back(cell.k, cell.map);
  }

  SweepOutcome out;
  bool unimodal = true;
  std::string shapes;
  std::size_t prev_argmax = 0;
  bool argmax_monotone = true;
  for (const auto& s : r.k_sweep) {
    std::vector<double> curve;
    for (const auto& [k, v] : then[s.distractors]) curve.push_back(v);
    const bool ok = IsUnimodal(curve, 0.005);
    unimodal = unimodal && ok;
    argmax_monotone = argmax_monotone && s.argmax_k >= prev_argmax;
    prev_argmax = s.argmax_k;
    shapes += Fmt(" N=%zu:argmax=%zu,best=%.4f,%s;", s.distractors, s.argmax_k,
                  s.best_map, ok ? "unimodal" : "NOT-unimodal");
  }
  const bool all_sizes = r.k_sweep.size() == c.distractor_counts.size();
  out.shape = {unimodal && argmax_monotone && all_sizes && secs < 1800.0,
               Fmt("%s argmax-k non-decreasing=%s; sweep %.0fs (limit 1800s)",
                   shapes.c_str(), argmax_monotone ? "yes" : "no", secs)};

  // Fast-only mAP per k across growing galleries.
  std::map<std::size_t, std::vector<double>> by_k;
  for (const auto& [n, cells] : fast) {
    for (const auto& [k, v] : cells) by_k[k].push_back(v);
  }
  bool monotone = true;
  std::size_t compared = 0;
  std::string at_100;
  for (const auto& [k, seq] : by_k) {
    if (seq.size() != r.k_sweep.size()) continue;
    ++compared;
    for (std::size_t i = 1; i < seq.size(); ++i) monotone = monotone && seq[i] <= seq[i - 1];
    if (k == c.scaling_k) {
      for (double v : seq) at_100 += Fmt(" %.4f", v);
    }
  }
  out.growth = {monotone && compared > 0 && secs < 1800.0,
                Fmt("fast-only mAP non-increasing over N for %zu shared k values; "
                    "k=%zu:%s; sweep %.0fs (limit 1800s)",
                    compared, c.scaling_k, at_100.c_str(), secs)};
  return out;
}

// 7. Single-threaded PQ scan vs exact cosine scan over 1M vectors.
Outcome ScanSpeed() {
  omp_set_num_threads(1);
  const auto t0 = Clock::now();
  const std::size_t n = 1000000;
  const std::uint32_t d = 320;
  std::mt19937_64 rng(707);
  Dataset ds(d);
  ds.Reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) ds.Add({i, {}, true}, RandomUnit(rng, d));
  TrainParams tp;
  tp.m = 64;
  tp.z = 256;
  tp.max_iters = 10;
  tp.seed = 7;
  const PQCodebook cb = TrainCodebooks(ds.Slice(0, 10000), tp);
  const GalleryIndex index = BuildIndex(std::move(ds), cb, true);
  std::vector<std::vector<float>> queries;
  for (int i = 0; i < 3; ++i) queries.push_back(RandomUnit(rng, d));

  auto best_of_5 = [&](auto&& scan) {
    scan();  // warm-up
    double best = 1e30;
    for (int rep = 0; rep < 5; ++rep) {
      const auto t = Clock::now();
      scan();
      best = std::min(best, Since(t));
    }
    return best;
  };
  const double pq = best_of_5([&] {
    for (const auto& q : queries) SearchPQ(index, q, 100, Exec::kSerial);
  });
  const double exact = best_of_5([&] {
    for (const auto& q : queries) SearchExact(index, q, 100, Metric::kCosine, Exec::kSerial);
  });
  const double total = Since(t0);
  const double ratio = exact / pq;
  return {ratio >= 10.0 && total < 600.0,
          Fmt("min-of-5 per query: pq %.2f ms, exact %.2f ms, ratio %.2fx (floor 10x); "
              "total %.0fs (limit 600s)",
              1e3 * pq / 3, 1e3 * exact / 3, ratio, total)};
}

// 8. Worked examples plus randomized agreement with brute-force definitions.
ProbeResult Ranked(std::size_t n, std::vector<std::uint64_t> mates, float top = 1.0f) {
  ProbeResult r;
  for (std::size_t i = 0; i < n; ++i) {
    r.ranked.push_back({i + 1, top - 0.01f * static_cast<float>(i)});
  }
  r.mates.insert(mates.begin(), mates.end());
  return r;
}

double BruteAp(const ProbeResult& r) {
  // Mean over mates of the precision at each mate's rank.
  double s = 0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < r.ranked.size(); ++i) {
    if (r.mates.count(r.ranked[i].id)) {
      ++hits;
      s += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
  }
  return s / static_cast<double>(r.mates.size());
}

double TopOf(const ProbeResult& r) {
  return r.ranked.empty() ? -INFINITY : r.ranked.front().score;
}

double Accepted(const std::vector<double>& s, double t) {
  return static_cast<double>(std::count_if(s.begin(), s.end(),
                                           [t](double v) { return v >= t; })) /
         static_cast<double>(s.size());
}

double BruteThreshold(const std::vector<double>& imp, double target) {
  std::set<double> cand{-INFINITY};
  cand.insert(imp.begin(), imp.end());
  cand.insert(std::nextafter(*cand.rbegin(), INFINITY));
  for (double t : cand) {
    if (Accepted(imp, t) <= target) return t;
  }
  return INFINITY;
}

std::size_t BruteBestRank(const ProbeResult& r) {
  for (std::size_t i = 0; i < r.ranked.size(); ++i) {
    if (r.mates.count(r.ranked[i].id)) return i + 1;
  }
  return SIZE_MAX;
}

Outcome MetricOracles() {
  std::vector<std::string> failed;
  auto expect = [&](bool ok, const char* what) {
    if (!ok) failed.push_back(what);
  };
  auto near = [](double a, double b) { return std::abs(a - b) <= 1e-9; };

  // Worked examples.
  expect(near(AveragePrecision(Ranked(6, {1, 3})), 5.0 / 6.0), "ap 5/6");
  expect(AveragePrecision(Ranked(6, {1, 2})) == 1.0, "ap perfect");
  expect(near(AveragePrecision(Ranked(9, {4})), 0.25), "ap 1/r");
  {
    const std::vector<ProbeResult> two = {Ranked(4, {1}), Ranked(4, {2})};
    expect(near(MeanAveragePrecision(two), 0.75), "map 0.75");
    const std::vector<ProbeResult> cmc_in = {Ranked(6, {1}), Ranked(6, {2}), Ranked(6, {5})};
    const auto cmc = CmcCurve(cmc_in, 6);
    expect(near(cmc[0].rate, 1.0 / 3) && near(cmc[1].rate, 2.0 / 3) && cmc[4].rate == 1.0,
           "cmc {1,2,5}");
  }
  {
    const auto pr = PrecisionRecallAt(Ranked(5, {1, 3}), 3);
    expect(near(pr.precision, 2.0 / 3) && pr.recall == 1.0, "precision/recall");
    const std::vector<double> gen = {0.9, 0.8, 0.4}, imp = {0.5, 0.3, 0.2, 0.1};
    const std::vector<double> target = {0.25};
    const auto tar = TarAtFar(gen, imp, target)[0];
    expect(tar.threshold == 0.5 && near(tar.tar, 2.0 / 3), "tar@far .25");
    std::vector<ProbeResult> g, i;
    for (double s : gen) g.push_back(Ranked(5, {1}, static_cast<float>(s)));
    for (double s : imp) i.push_back(Ranked(5, {}, static_cast<float>(s)));
    const std::vector<double> at = {0.4};
    expect(OpenSetSweep(g, i, at)[0].far == 0.25, "open-set far .25");
    const std::vector<double> t45 = {0.45};
    const auto ff = FnirFpir(g, i, t45)[0];
    expect(ff.fpir == 0.25 && near(ff.fnir, 1.0 / 3), "fnir/fpir mixed case");
  }
  {
    const std::vector<std::pair<std::size_t, float>> spec = {
        {1, 0.95f}, {1, 0.90f}, {2, 0.85f}, {1, 0.60f}, {3, 0.80f},
        {1, 0.40f}, {5, 0.70f}, {1, 0.75f}, {2, 0.30f}, {1, 0.88f}};
    std::vector<ProbeResult> g, i;
    for (const auto& [rank, s] : spec) g.push_back(Ranked(5, {rank}, s));
    for (float s : {0.72f, 0.65f, 0.5f, 0.2f, 0.1f}) i.push_back(Ranked(5, {}, s));
    expect(DirAtRankFar(g, i, 1, 0.2).dir == 0.4 && DirAtRankFar(g, i, 3, 0.2).dir == 0.6,
           "dir 10-probe case");
  }

  // Randomized instances.
  std::mt19937_64 rng(808);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng() % 99;
    const std::size_t probes = 2 + rng() % 19;
    std::vector<ProbeResult> gen, imp;
    for (std::size_t p = 0; p < probes; ++p) {
      std::vector<std::pair<float, std::uint64_t>> all;
      for (std::uint64_t id = 0; id < n; ++id) {
        all.emplace_back(static_cast<float>(rng() % 40) / 40.0f, id);
      }
      std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
      });
      ProbeResult r;
      r.probe_id = p;
      for (const auto& [s, id] : all) r.ranked.push_back({id, s});
      if (p == 0 || (p != 1 && rng() % 3 != 0)) {
        const std::size_t mates = 1 + rng() % std::min<std::size_t>(n, 5);
        while (r.mates.size() < mates) r.mates.insert(rng() % n);
        gen.push_back(std::move(r));
      } else {
        imp.push_back(std::move(r));
      }
    }
    double map = 0;
    for (const auto& g : gen) {
      expect(near(AveragePrecision(g), BruteAp(g)), "random ap");
      map += BruteAp(g);
    }
    expect(near(MeanAveragePrecision(gen), map / static_cast<double>(gen.size())),
           "random map");
    for (const auto& pt : CmcCurve(gen, n)) {
      const double want =
          static_cast<double>(std::count_if(gen.begin(), gen.end(), [&](const auto& g) {
            return BruteBestRank(g) <= pt.rank;
          })) /
          static_cast<double>(gen.size());
      expect(near(pt.rate, want), "random cmc");
    }
    std::vector<double> gs, is, gtop, itop;
    for (const auto& g : gen) {
      gtop.push_back(TopOf(g));
      for (const auto& c : g.ranked) (g.mates.count(c.id) ? gs : is).push_back(c.score);
    }
    for (const auto& q : imp) {
      itop.push_back(TopOf(q));
      for (const auto& c : q.ranked) is.push_back(c.score);
    }
    const std::vector<double> targets = {0.0, 0.01, 0.1, 0.25, 0.5, 1.0};
    for (const auto& pt : TarAtFar(gs, is, targets)) {
      const double t = BruteThreshold(is, pt.far_target);
      expect(pt.threshold == t && near(pt.far, Accepted(is, t)) &&
                 near(pt.tar, Accepted(gs, t)),
             "random tar@far");
    }
    const auto ts = SweepThresholds(gen, imp, 100);
    for (const auto& pt : FnirFpir(gen, imp, ts)) {
      expect(near(pt.fpir, Accepted(itop, pt.threshold)) &&
                 near(pt.fnir, 1.0 - Accepted(gtop, pt.threshold)),
             "random fnir/fpir");
    }
    for (double target : targets) {
      for (std::size_t rank : {1, 3, 10}) {
        const double t = BruteThreshold(itop, target);
        const double want =
            static_cast<double>(std::count_if(gen.begin(), gen.end(), [&](const auto& g) {
              return BruteBestRank(g) <= rank && TopOf(g) >= t;
            })) /
            static_cast<double>(gen.size());
        expect(near(DirAtRankFar(gen, imp, rank, target).dir, want), "random dir");
      }
    }
  }
  std::sort(failed.begin(), failed.end());
  failed.erase(std::unique(failed.begin(), failed.end()), failed.end());
  std::string which;
  for (const auto& f : failed) which += " [" + f + "]";
  return {failed.empty(), failed.empty()
                              ? std::string("worked examples and 50 random instances "
                                            "agree to 1e-9")
                              : "mismatches:" + which};
}

// 9. Open-set sweep at -inf is the closed-set mAP; FAR never rises.
Outcome OpenSetConsistency() {
  BenchConfig c;
  c.dim = 64;
  c.m = 16;
  c.num_subjects = 400;
  c.impostor_probes = 200;
  c.train_sample = 5000;
  const BenchData data = GenerateBenchData(c, 5000);
  Dataset gallery = AssembleGallery(data, 5000);
  const PQCodebook cb = TrainBenchCodebook(c, gallery);
  const GalleryIndex index = BuildIndex(std::move(gallery), cb, true);
  const ReferenceSlowMatcher matcher(index, c.slow_perturbation, c.seed);
  const auto genuine = RunStrategy(index, matcher, data.probes, data.mates, 100,
                                   FusionStrategy::kDfThenCots);
  const auto impostor = RunStrategy(index, matcher, data.impostors, data.mates, 100,
                                    FusionStrategy::kDfThenCots);
  const auto ts = SweepThresholds(genuine, impostor, 100);
  const auto pts = OpenSetSweep(genuine, impostor, ts);
  const double closed = MeanAveragePrecision(genuine);
  bool monotone = true;
  for (std::size_t i = 1; i < pts.size(); ++i) monotone = monotone && pts[i].far <= pts[i - 1].far;
  const bool at_minus_inf = ts.front() == -INFINITY && pts.front().map == closed;
  return {at_minus_inf && monotone && pts.size() == 100,
          Fmt("%zu thresholds; mAP(-inf)=%.6f closed-set=%.6f; FAR non-increasing=%s",
              pts.size(), pts.front().map, closed, monotone ? "yes" : "no")};
}

// 11. Every accuracy-bearing output, run twice per thread count.
void Append(std::string& blob, const void* p, std::size_t n) {
  blob.append(static_cast<const char*>(p), n);
}
void AppendList(std::string& blob, const CandidateList& list) {
  for (const auto& c : list) {
    Append(blob, &c.id, sizeof c.id);
    Append(blob, &c.score, sizeof c.score);
  }
}

std::string DeterminismRun(int threads) {
  omp_set_num_threads(threads);
  BenchConfig c;
  c.dim = 64;
  c.m = 16;
  c.num_subjects = 300;
  c.images_per_subject = 3;
  c.impostor_probes = 50;
  c.train_sample = 3000;
  c.distractor_counts = {2000, 5000};
  c.candidate_sizes = {10, 100, 1000};
  c.threads = threads;
  std::string blob;
  const BenchData data = GenerateBenchData(c, 5000);
  Dataset gallery = AssembleGallery(data, 5000);
  const PQCodebook cb = TrainBenchCodebook(c, gallery);
  Append(blob, cb.centroids().data(), cb.centroids().size_bytes());
  const GalleryIndex index = BuildIndex(std::move(gallery), cb, true);

  const auto dir = std::filesystem::temp_directory_path() /
                   ("pqcascade_accept_" + std::to_string(threads));
  std::filesystem::create_directories(dir);
  SaveIndex(index, dir / "g.pqix");
  {
    std::ifstream in(dir / "g.pqix", std::ios::binary);
    blob.append(std::istreambuf_iterator<char>(in), {});
  }
  for (std::size_t i = 0; i < 50; ++i) {
    AppendList(blob, SearchPQ(index, data.probes.vector(i), 50));
    AppendList(blob, SearchExact(index, data.probes.vector(i), 50, Metric::kCosine));
  }
  const ReferenceSlowMatcher matcher(index, c.slow_perturbation, c.seed);
  std::vector<ProbeView> views;
  for (std::size_t i = 0; i < 100; ++i) {
    views.push_back({data.probes.info(i).id, data.probes.vector(i)});
  }
  for (auto s : {FusionStrategy::kDfThenCots, FusionStrategy::kDfThenCotsOnly,
                 FusionStrategy::kDfThenCotsRank, FusionStrategy::kDfPlusCots}) {
    for (const auto& list : CascadeSearchBatch(index, matcher, views, 60, s)) {
      AppendList(blob, list);
    }
  }
  const auto genuine = RunStrategy(index, matcher, data.probes, data.mates, 100,
                                   FusionStrategy::kDfThenCots);
  const auto impostor = RunStrategy(index, matcher, data.impostors, data.mates, 100,
                                    FusionStrategy::kDfThenCots);
  blob += ReportJson(Evaluate(genuine, impostor));
  const BenchReport sweep = RunKSweep(c);
  for (const auto& cell : sweep.cells) {
    Append(blob, &cell.k, sizeof cell.k);
    Append(blob, &cell.map, sizeof cell.map);
    blob += cell.strategy;
  }
  std::filesystem::remove_all(dir);
  return blob;
}

Outcome Determinism() {
  std::map<int, std::vector<std::string>> runs;
  for (int threads : {1, 8}) {
    for (int rep = 0; rep < 2; ++rep) runs[threads].push_back(DeterminismRun(threads));
  }
  omp_set_num_threads(1);
  const bool same1 = runs[1][0] == runs[1][1];
  const bool same8 = runs[8][0] == runs[8][1];
  const bool across = runs[1][0] == runs[8][0];
  return {same1 && same8 && across,
          Fmt("%zu-byte output fingerprint; repeat identical at 1 thread=%s, at 8 "
              "threads=%s; 1 vs 8 threads identical=%s",
              runs[1][0].size(), same1 ? "yes" : "no", same8 ? "yes" : "no",
              across ? "yes" : "no")};
}

}  // namespace
}  // namespace pqcascade

int main(int argc, char** argv) {
  using namespace pqcascade;
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  auto wanted = [&](int id) { return only.empty() || only.count(id) > 0; };

  int failures = 0;
  auto report = [&](int id, const char* name, const Outcome& o, double secs) {
    std::printf("%s criterion %d (%s): %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", id,
                name, o.detail.c_str(), secs);
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  };
  auto run = [&](int id, const char* name, double limit, auto&& fn) {
    if (!wanted(id)) return;
    omp_set_num_threads(1);
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = Since(t0);
    if (limit > 0 && secs >= limit) {
      o.pass = false;
      o.detail += Fmt("; runtime %.1fs over the %.0fs limit", secs, limit);
    }
    report(id, name, o, secs);
  };

  run(1, "ADC correctness", 5, AdcCorrectness);
  run(2, "memorizing codebook equals exact L2", 10, MemorizingCodebook);
  run(3, "cosine/L2 rank equivalence", 5, CosineL2Equivalence);
  run(4, "filtering quality", 120, FilteringQuality);
  run(5, "cascade ordering", 0, CascadeOrdering);
  if (wanted(6) || wanted(10)) {
    const auto t0 = Clock::now();
    SweepOutcome s;
    try {
      s = KSweepAndGrowth();
    } catch (const std::exception& e) {
      s.shape = s.growth = {false, std::string("threw: ") + e.what()};
    }
    const double secs = Since(t0);
    if (wanted(6)) report(6, "k-sweep shape", s.shape, secs);
    if (wanted(10)) report(10, "gallery-growth monotonicity", s.growth, secs);
  }
  run(7, "scalability ratio", 0, ScanSpeed);
  run(8, "metric oracle suite", 30, MetricOracles);
  run(9, "open-set consistency", 30, OpenSetConsistency);
  run(11, "determinism", 0, Determinism);

  std::printf("%s: %d criterion failure(s)\n", failures == 0 ? "ALL PASS" : "FAILED",
              failures);
  return failures == 0 ? 0 : 1;
}
