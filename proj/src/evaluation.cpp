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

#include "pqcascade/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <unordered_map>

#include <json.hpp>

#include "pqcascade/error.hpp"

namespace pqcascade {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void RequireMates(const ProbeResult& r) {
  PQC_THROW_IF_NOT(!r.mates.empty(), ErrorKind::kInvalidArgument,
                   "probe " + std::to_string(r.probe_id) + " has no mates");
}

std::vector<double> TopScores(std::span<const ProbeResult> results) {
  std::vector<double> out;
  out.reserve(results.size());
  for (const auto& r : results) out.push_back(r.top_score());
  return out;
}

double FractionAtLeast(std::span<const double> sorted_scores, double t) {
  const auto it = std::lower_bound(sorted_scores.begin(), sorted_scores.end(), t);
  return static_cast<double>(sorted_scores.end() - it) /
         static_cast<double>(sorted_scores.size());
}

nlohmann::json JsonNumber(double v) {
  if (std::isfinite(v)) return v;
  return v > 0 ? "inf" : "-inf";
}

}  // namespace

std::optional<std::size_t> BestMateRank(const ProbeResult& result) {
  for (std::size_t i = 0; i < result.ranked.size(); ++i) {
    if (result.mates.contains(result.ranked[i].id)) return i + 1;
  }
  return std::nullopt;
}

double AveragePrecision(const ProbeResult& result) {
  RequireMates(result);
  const double total = static_cast<double>(result.mates.size());
  double ap = 0.0;
  double prev_recall = 0.0;
  std::size_t hits = 0;
  for (std::size_t k = 1; k <= result.ranked.size(); ++k) {
    if (result.mates.contains(result.ranked[k - 1].id)) ++hits;
    const double precision = static_cast<double>(hits) / static_cast<double>(k);
    const double recall = static_cast<double>(hits) / total;
    ap += precision * (recall - prev_recall);
    prev_recall = recall;
  }
  return ap;
}

double MeanAveragePrecision(std::span<const ProbeResult> results) {
  PQC_THROW_IF_NOT(!results.empty(), ErrorKind::kInvalidArgument,
                   "mAP of an empty probe set");
  double sum = 0.0;
  for (const auto& r : results) sum += AveragePrecision(r);
  return sum / static_cast<double>(results.size());
}

PrecisionRecall PrecisionRecallAt(const ProbeResult& result, std::size_t k) {
  RequireMates(result);
  PQC_THROW_IF_NOT(k >= 1 && k <= result.ranked.size(),
                   ErrorKind::kInvalidArgument,
                   "k=" + std::to_string(k) + " outside [1, list length]");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < k; ++i) {
    if (result.mates.contains(result.ranked[i].id)) ++hits;
  }
  return {static_cast<double>(hits) / static_cast<double>(k),
          static_cast<double>(hits) / static_cast<double>(result.mates.size())};
}

std::vector<OpenSetPoint> OpenSetSweep(std::span<const ProbeResult> genuine,
                                       std::span<const ProbeResult> impostor,
                                       std::span<const double> thresholds) {
  PQC_THROW_IF_NOT(!impostor.empty(), ErrorKind::kInvalidArgument,
                   "open-set sweep needs impostor probes");
  PQC_THROW_IF_NOT(!genuine.empty(), ErrorKind::kInvalidArgument,
                   "open-set sweep needs genuine probes");
  std::vector<double> imp = TopScores(impostor);
  std::sort(imp.begin(), imp.end());
  std::vector<double> ap(genuine.size());
  for (std::size_t i = 0; i < genuine.size(); ++i) {
    ap[i] = AveragePrecision(genuine[i]);
  }
  std::vector<OpenSetPoint> out;
  out.reserve(thresholds.size());
  for (double t : thresholds) {
    double sum = 0.0;
    for (std::size_t i = 0; i < genuine.size(); ++i) {
      if (genuine[i].top_score() >= t) sum += ap[i];
    }
    out.push_back({t, FractionAtLeast(imp, t),
                   sum / static_cast<double>(genuine.size())});
  }
  return out;
}

std::vector<CmcPoint> CmcCurve(std::span<const ProbeResult> results,
                               std::size_t max_rank) {
  PQC_THROW_IF_NOT(!results.empty(), ErrorKind::kInvalidArgument,
                   "CMC of an empty probe set");
  if (max_rank == 0) {
    for (const auto& r : results) max_rank = std::max(max_rank, r.ranked.size());
  }
  std::vector<std::size_t> at_rank(max_rank + 1, 0);
  for (const auto& r : results) {
    RequireMates(r);
    const auto best = BestMateRank(r);
    if (best && *best <= max_rank) ++at_rank[*best];
  }
  std::vector<CmcPoint> out;
  out.reserve(max_rank);
  std::size_t cum = 0;
  for (std::size_t rank = 1; rank <= max_rank; ++rank) {
    cum += at_rank[rank];
    out.push_back({rank, static_cast<double>(cum) /
                             static_cast<double>(results.size())});
  }
  return out;
}

FarThreshold ThresholdForFar(std::span<const double> impostor_scores,
                             double far_target) {
  PQC_THROW_IF_NOT(!impostor_scores.empty(), ErrorKind::kInvalidArgument,
                   "FAR needs impostor scores");
  std::vector<double> imp(impostor_scores.begin(), impostor_scores.end());
  std::sort(imp.begin(), imp.end());
  if (far_target >= 1.0) return {-kInf, 1.0};
  // FAR(t) is non-increasing in t, so the first qualifying candidate in
  // ascending order is the smallest.
  for (std::size_t i = 0; i < imp.size(); ++i) {
    if (i > 0 && imp[i] == imp[i - 1]) continue;
    const double far = FractionAtLeast(imp, imp[i]);
    if (far <= far_target) return {imp[i], far};
  }
  return {std::nextafter(imp.back(), kInf), 0.0};
}

std::vector<TarPoint> TarAtFar(std::span<const double> genuine_scores,
                               std::span<const double> impostor_scores,
                               std::span<const double> far_targets) {
  PQC_THROW_IF_NOT(!genuine_scores.empty() && !impostor_scores.empty(),
                   ErrorKind::kInvalidArgument,
                   "TAR@FAR needs genuine and impostor scores");
  std::vector<double> gen(genuine_scores.begin(), genuine_scores.end());
  std::sort(gen.begin(), gen.end());
  std::vector<TarPoint> out;
  for (double target : far_targets) {
    const FarThreshold ft = ThresholdForFar(impostor_scores, target);
    out.push_back({target, ft.far, ft.threshold, FractionAtLeast(gen, ft.threshold)});
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.far < b.far;
  });
  return out;
}

std::vector<FnirFpirPoint> FnirFpir(std::span<const ProbeResult> genuine,
                                    std::span<const ProbeResult> impostor,
                                    std::span<const double> thresholds) {
  PQC_THROW_IF_NOT(!genuine.empty() && !impostor.empty(),
                   ErrorKind::kInvalidArgument,
                   "FNIR/FPIR need genuine and impostor probes");
  std::vector<double> gen = TopScores(genuine);
  std::vector<double> imp = TopScores(impostor);
  std::sort(gen.begin(), gen.end());
  std::sort(imp.begin(), imp.end());
  std::vector<FnirFpirPoint> out;
  out.reserve(thresholds.size());
  for (double t : thresholds) {
    out.push_back({t, FractionAtLeast(imp, t), 1.0 - FractionAtLeast(gen, t)});
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.fpir != b.fpir ? a.fpir < b.fpir : a.fnir > b.fnir;
  });
  return out;
}

DirPoint DirAtRankFar(std::span<const ProbeResult> genuine,
                      std::span<const ProbeResult> impostor, std::size_t rank,
                      double far_target) {
  PQC_THROW_IF_NOT(rank >= 1, ErrorKind::kInvalidArgument, "rank must be >= 1");
  PQC_THROW_IF_NOT(!impostor.empty(), ErrorKind::kInvalidArgument,
                   "DIR needs impostor probes");
  PQC_THROW_IF_NOT(!genuine.empty(), ErrorKind::kInvalidArgument,
                   "DIR needs genuine probes");
  const FarThreshold ft = ThresholdForFar(TopScores(impostor), far_target);
  std::size_t hits = 0;
  for (const auto& g : genuine) {
    RequireMates(g);
    const auto best = BestMateRank(g);
    if (best && *best <= rank && g.top_score() >= ft.threshold) ++hits;
  }
  return {far_target, rank, ft.far, ft.threshold,
          static_cast<double>(hits) / static_cast<double>(genuine.size())};
}

std::vector<double> SweepThresholds(std::span<const ProbeResult> genuine,
                                    std::span<const ProbeResult> impostor,
                                    std::size_t points) {
  std::vector<double> pooled = TopScores(genuine);
  const auto imp = TopScores(impostor);
  pooled.insert(pooled.end(), imp.begin(), imp.end());
  std::sort(pooled.begin(), pooled.end());
  pooled.erase(std::unique(pooled.begin(), pooled.end()), pooled.end());
  std::erase_if(pooled, [](double v) { return !std::isfinite(v); });
  std::vector<double> out{-kInf};
  const std::size_t inner = points > 2 ? points - 2 : 0;
  if (!pooled.empty() && inner > 0) {
    for (std::size_t i = 0; i < inner; ++i) {
      const std::size_t idx =
          inner == 1 ? 0 : i * (pooled.size() - 1) / (inner - 1);
      if (out.back() != pooled[idx]) out.push_back(pooled[idx]);
    }
  }
  out.push_back(kInf);
  return out;
}

EvalReport Evaluate(std::span<const ProbeResult> genuine,
                    std::span<const ProbeResult> impostor,
                    const EvalOptions& options) {
  EvalReport rep;
  rep.genuine_probes = genuine.size();
  rep.impostor_probes = impostor.size();
  rep.map = MeanAveragePrecision(genuine);
  rep.cmc = CmcCurve(genuine, options.cmc_max_rank);

  std::size_t max_len = 0;
  for (const auto& g : genuine) max_len = std::max(max_len, g.ranked.size());
  const std::size_t pr_k = std::min(options.pr_max_k, max_len);
  for (std::size_t k = 1; k <= pr_k; ++k) {
    double p = 0.0, r = 0.0;
    for (const auto& g : genuine) {
      const auto pr = PrecisionRecallAt(g, std::min(k, g.ranked.size()));
      p += pr.precision;
      r += pr.recall;
    }
    const double n = static_cast<double>(genuine.size());
    rep.pr_curve.emplace_back(r / n, p / n);
  }

  std::vector<double> gen_scores, imp_scores;
  for (const auto& g : genuine) {
    for (const auto& c : g.ranked) {
      (g.mates.contains(c.id) ? gen_scores : imp_scores).push_back(c.score);
    }
  }
  for (const auto& q : impostor) {
    for (const auto& c : q.ranked) imp_scores.push_back(c.score);
  }
  if (!gen_scores.empty() && !imp_scores.empty()) {
    rep.tar_far = TarAtFar(gen_scores, imp_scores, options.far_targets);
  }

  if (!impostor.empty()) {
    for (double far : options.far_targets) {
      for (std::size_t rank : options.dir_ranks) {
        rep.dir_table.push_back(DirAtRankFar(genuine, impostor, rank, far));
      }
    }
    const auto thresholds =
        SweepThresholds(genuine, impostor, options.sweep_points);
    rep.fnir_fpir = FnirFpir(genuine, impostor, thresholds);
    rep.openset_map_far = OpenSetSweep(genuine, impostor, thresholds);
    std::stable_sort(rep.openset_map_far.begin(), rep.openset_map_far.end(),
                     [](const auto& a, const auto& b) { return a.far < b.far; });
  }
  return rep;
}

std::string ReportJson(const EvalReport& rep) {
  nlohmann::ordered_json j;
  j["genuine_probes"] = rep.genuine_probes;
  j["impostor_probes"] = rep.impostor_probes;
  j["mAP"] = rep.map;
  auto& pr = j["pr_curve"] = nlohmann::ordered_json::array();
  for (const auto& [r, p] : rep.pr_curve) pr.push_back({{"recall", r}, {"precision", p}});
  auto& cmc = j["cmc"] = nlohmann::ordered_json::array();
  for (const auto& c : rep.cmc) cmc.push_back({{"rank", c.rank}, {"rate", c.rate}});
  auto& tar = j["tar_far"] = nlohmann::ordered_json::array();
  for (const auto& t : rep.tar_far) {
    tar.push_back({{"far_target", t.far_target}, {"far", t.far},
                   {"threshold", JsonNumber(t.threshold)}, {"tar", t.tar}});
  }
  auto& dir = j["dir"] = nlohmann::ordered_json::array();
  for (const auto& d : rep.dir_table) {
    dir.push_back({{"far_target", d.far_target}, {"rank", d.rank}, {"far", d.far},
                   {"threshold", JsonNumber(d.threshold)}, {"dir", d.dir}});
  }
  auto& ff = j["fnir_fpir"] = nlohmann::ordered_json::array();
  for (const auto& f : rep.fnir_fpir) {
    ff.push_back({{"threshold", JsonNumber(f.threshold)}, {"fpir", f.fpir},
                  {"fnir", f.fnir}});
  }
  auto& os = j["openset_map_far"] = nlohmann::ordered_json::array();
  for (const auto& o : rep.openset_map_far) {
    os.push_back({{"threshold", JsonNumber(o.threshold)}, {"far", o.far},
                  {"mAP", o.map}});
  }
  return j.dump(2);
}

void WriteReportJson(const EvalReport& report,
                     const std::filesystem::path& path) {
  std::ofstream out(path);
  out << ReportJson(report) << '\n';
  PQC_THROW_IF_NOT(out.good(), ErrorKind::kIo, "cannot write " + path.string());
}

void WriteReportText(const EvalReport& rep, std::ostream& out) {
  const auto flags = out.flags();
  out << std::fixed << std::setprecision(4);
  out << "genuine probes   " << rep.genuine_probes << '\n'
      << "impostor probes  " << rep.impostor_probes << '\n'
      << "mAP              " << rep.map << "\n\n";
  out << "CMC\n" << std::setw(8) << "rank" << std::setw(10) << "rate" << '\n';
  for (const auto& c : rep.cmc) {
    if (c.rank <= 10 || c.rank % 10 == 0) {
      out << std::setw(8) << c.rank << std::setw(10) << c.rate << '\n';
    }
  }
  if (!rep.tar_far.empty()) {
    out << "\nTAR@FAR\n"
        << std::setw(12) << "far_target" << std::setw(10) << "far"
        << std::setw(10) << "tar" << '\n';
    for (const auto& t : rep.tar_far) {
      out << std::setw(12) << t.far_target << std::setw(10) << t.far
          << std::setw(10) << t.tar << '\n';
    }
  }
  if (!rep.dir_table.empty()) {
    out << "\nDIR\n"
        << std::setw(12) << "far_target" << std::setw(8) << "rank"
        << std::setw(10) << "far" << std::setw(10) << "dir" << '\n';
    for (const auto& d : rep.dir_table) {
      out << std::setw(12) << d.far_target << std::setw(8) << d.rank
          << std::setw(10) << d.far << std::setw(10) << d.dir << '\n';
    }
  }
  if (!rep.openset_map_far.empty()) {
    out << "\nopen-set mAP vs FAR\n"
        << std::setw(10) << "far" << std::setw(10) << "mAP" << '\n';
    for (const auto& o : rep.openset_map_far) {
      out << std::setw(10) << o.far << std::setw(10) << o.map << '\n';
    }
  }
  out.flags(flags);
}

void WriteResultsJsonl(std::span<const ProbeResult> results,
                       const std::filesystem::path& path,
                       double accept_threshold) {
  std::ofstream out(path);
  PQC_THROW_IF_NOT(out.good(), ErrorKind::kIo, "cannot write " + path.string());
  for (const auto& r : results) {
    nlohmann::ordered_json line;
    line["probe_id"] = r.probe_id;
    auto& arr = line["results"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < r.ranked.size(); ++i) {
      arr.push_back({{"gallery_id", r.ranked[i].id},
                     {"score", r.ranked[i].score},
                     {"rank", i + 1}});
    }
    line["accepted"] = r.top_score() >= accept_threshold;
    out << line.dump() << '\n';
  }
  PQC_THROW_IF_NOT(out.good(), ErrorKind::kIo, "cannot write " + path.string());
}

void WriteHitsJsonl(std::span<const ProbeResult> results,
                    const std::filesystem::path& path) {
  std::ofstream out(path);
  PQC_THROW_IF_NOT(out.good(), ErrorKind::kIo, "cannot write " + path.string());
  for (const auto& r : results) {
    for (std::size_t i = 0; i < r.ranked.size(); ++i) {
      nlohmann::ordered_json line;
      line["probe_id"] = r.probe_id;
      line["gallery_id"] = r.ranked[i].id;
      line["score"] = r.ranked[i].score;
      line["rank"] = i + 1;
      out << line.dump() << '\n';
    }
  }
  PQC_THROW_IF_NOT(out.good(), ErrorKind::kIo, "cannot write " + path.string());
}

std::vector<ProbeResult> ReadResultsJsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  PQC_THROW_IF_NOT(in.good(), ErrorKind::kMissingFile,
                   "missing file: " + path.string());
  struct Pending {
    ProbeResult result;
    std::vector<std::size_t> ranks;
  };
  std::vector<Pending> out;
  std::unordered_map<std::uint64_t, std::size_t> slot;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const auto probe = j.at("probe_id").get<std::uint64_t>();
      auto [it, fresh] = slot.try_emplace(probe, out.size());
      if (fresh) {
        out.emplace_back();
        out.back().result.probe_id = probe;
      }
      Pending& p = out[it->second];
      auto add = [&](const nlohmann::json& hit, std::size_t fallback_rank) {
        p.result.ranked.push_back({hit.at("gallery_id").get<std::uint64_t>(),
                                   hit.at("score").get<float>()});
        p.ranks.push_back(hit.contains("rank") ? hit.at("rank").get<std::size_t>()
                                               : fallback_rank);
      };
      if (j.contains("results")) {
        std::size_t r = p.ranks.size();
        for (const auto& hit : j.at("results")) add(hit, ++r);
      } else {
        add(j, p.ranks.size() + 1);
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::kFormat, path.string() + ":" +
                                          std::to_string(lineno) + ": " + e.what());
    }
  }
  std::vector<ProbeResult> results;
  results.reserve(out.size());
  for (auto& p : out) {
    std::vector<std::size_t> order(p.ranks.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return p.ranks[a] < p.ranks[b];
    });
    ProbeResult r;
    r.probe_id = p.result.probe_id;
    for (std::size_t i : order) r.ranked.push_back(p.result.ranked[i]);
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace pqcascade
