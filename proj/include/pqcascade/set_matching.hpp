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
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pqcascade/embedding_store.hpp"
#include "pqcascade/filter_search.hpp"

namespace pqcascade {

/// One or more embeddings of a single subject, compared as a set.
struct FaceTemplate {
  std::uint64_t template_id = 0;
  std::optional<std::string> subject;
  std::vector<EmbeddingRecord> items;
};

/// The well-aligned items when there are any, otherwise every item.
std::vector<const EmbeddingRecord*> SelectComparisonSubset(
    const FaceTemplate& t);

/// Mean cosine similarity over all pairs of the two selected subsets.
double TemplateSimilarity(const FaceTemplate& a, const FaceTemplate& b);

/// Exhaustive ranking of gallery templates against the probe; top-k by
/// similarity, ties by ascending template id.
CandidateList TemplateSearch(const std::vector<FaceTemplate>& gallery,
                             const FaceTemplate& probe, std::size_t k);

/// Template manifest: JSON array of
/// {"template_id": u64, "subject": string|null, "members": [record ids]}.
/// Member ids are resolved against `vectors`.
std::vector<FaceTemplate> LoadTemplates(const std::filesystem::path& manifest,
                                        const Dataset& vectors);
void SaveTemplates(const std::filesystem::path& manifest,
                   const std::vector<FaceTemplate>& templates);

}  // namespace pqcascade
