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

#include "pqcascade/set_matching.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_map>

#include <json.hpp>

#include "pqcascade/error.hpp"
#include "pqcascade/kernels.hpp"

namespace pqcascade {

namespace {

double Cosine(const std::vector<float>& a, const std::vector<float>& b) {
  const double dot = kernels::Dot(a.data(), b.data(), a.size());
  const double na = kernels::Dot(a.data(), a.data(), a.size());
  const double nb = kernels::Dot(b.data(), b.data(), b.size());
  const double denom = std::sqrt(na * nb);
  PQC_THROW_IF_NOT(denom > 0.0, ErrorKind::kZeroNorm,
                   "zero vector in template comparison");
  return dot / denom;
}

}  // namespace

std::vector<const EmbeddingRecord*> SelectComparisonSubset(
    const FaceTemplate& t) {
  PQC_THROW_IF_NOT(!t.items.empty(), ErrorKind::kInvalidArgument,
                   "template " + std::to_string(t.template_id) + " is empty");
  std::vector<const EmbeddingRecord*> out;
  for (const auto& item : t.items) {
    if (item.well_aligned) out.push_back(&item);
  }
  if (out.empty()) {
    for (const auto& item : t.items) out.push_back(&item);
  }
  return out;
}

double TemplateSimilarity(const FaceTemplate& a, const FaceTemplate& b) {
  const auto sa = SelectComparisonSubset(a);
  const auto sb = SelectComparisonSubset(b);
  double sum = 0.0;
  for (const auto* x : sa) {
    for (const auto* y : sb) {
      PQC_THROW_IF_NOT(x->vector.size() == y->vector.size(),
                       ErrorKind::kDimensionMismatch,
                       "templates have different dimensions");
      sum += Cosine(x->vector, y->vector);
    }
  }
  return sum / static_cast<double>(sa.size() * sb.size());
}

CandidateList TemplateSearch(const std::vector<FaceTemplate>& gallery,
                             const FaceTemplate& probe, std::size_t k) {
  PQC_THROW_IF_NOT(k >= 1, ErrorKind::kInvalidArgument, "k must be >= 1");
  PQC_THROW_IF_NOT(!gallery.empty(), ErrorKind::kInvalidArgument,
                   "empty template gallery");
  std::vector<std::pair<double, std::uint64_t>> scored(gallery.size());
  for (std::size_t i = 0; i < gallery.size(); ++i) {
    scored[i] = {TemplateSimilarity(probe, gallery[i]), gallery[i].template_id};
  }
  std::sort(scored.begin(), scored.end(), [](const auto& x, const auto& y) {
    return x.first != y.first ? x.first > y.first : x.second < y.second;
  });
  if (scored.size() > k) scored.resize(k);
  CandidateList out;
  out.reserve(scored.size());
  for (const auto& [s, id] : scored) out.push_back({id, static_cast<float>(s)});
  return out;
}

std::vector<FaceTemplate> LoadTemplates(const std::filesystem::path& manifest,
                                        const Dataset& vectors) {
  std::ifstream in(manifest);
  PQC_THROW_IF_NOT(in.good(), ErrorKind::kMissingFile,
                   "missing file: " + manifest.string());
  std::unordered_map<std::uint64_t, std::size_t> row_of;
  for (std::size_t i = 0; i < vectors.size(); ++i) row_of[vectors.info(i).id] = i;

  std::vector<FaceTemplate> out;
  try {
    const auto doc = nlohmann::json::parse(in);
    PQC_THROW_IF_NOT(doc.is_array(), ErrorKind::kFormat,
                     "template manifest must be a JSON array");
    for (const auto& entry : doc) {
      FaceTemplate t;
      t.template_id = entry.at("template_id").get<std::uint64_t>();
      if (entry.contains("subject") && !entry["subject"].is_null()) {
        t.subject = entry["subject"].get<std::string>();
      }
      for (const auto& member : entry.at("members")) {
        const auto id = member.get<std::uint64_t>();
        const auto it = row_of.find(id);
        PQC_THROW_IF_NOT(it != row_of.end(), ErrorKind::kNotFound,
                         "template " + std::to_string(t.template_id) +
                             " references unknown record " + std::to_string(id));
        t.items.push_back(vectors.record(it->second));
      }
      PQC_THROW_IF_NOT(!t.items.empty(), ErrorKind::kFormat,
                       "template " + std::to_string(t.template_id) +
                           " has no members");
      out.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kFormat,
                "bad template manifest " + manifest.string() + ": " + e.what());
  }
  return out;
}

void SaveTemplates(const std::filesystem::path& manifest,
                   const std::vector<FaceTemplate>& templates) {
  nlohmann::json doc = nlohmann::json::array();
  for (const auto& t : templates) {
    nlohmann::json members = nlohmann::json::array();
    for (const auto& item : t.items) members.push_back(item.id);
    doc.push_back({{"template_id", t.template_id},
                   {"subject", t.subject ? nlohmann::json(*t.subject)
                                         : nlohmann::json(nullptr)},
                   {"members", std::move(members)}});
  }
  std::ofstream out(manifest);
  out << doc.dump(2) << '\n';
  PQC_THROW_IF_NOT(out.good(), ErrorKind::kIo,
                   "cannot write " + manifest.string());
}

}  // namespace pqcascade
