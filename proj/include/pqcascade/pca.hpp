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

#include "pqcascade/embedding_store.hpp"

namespace pqcascade {

/// Linear projection onto the leading principal directions of a dataset.
struct PCAModel {
  std::uint32_t input_dim = 0;
  std::uint32_t target_dim = 0;
  std::vector<double> mean;                // input_dim
  std::vector<double> basis;               // target_dim x input_dim, row-major
  std::vector<double> explained_variance;  // all input_dim eigenvalues, descending

  std::span<const double> row(std::uint32_t r) const {
    return {basis.data() + std::size_t{r} * input_dim, input_dim};
  }
};

/// Fits on the population covariance (divisor n) of the dataset rows. Basis
/// rows are sorted by eigenvalue, descending; each row's first component
/// with magnitude above 1e-8 is made positive.
PCAModel PcaFit(const Dataset& dataset, std::uint32_t target_dim);

/// basis * (vector - mean).
std::vector<float> PcaTransform(const PCAModel& model,
                                std::span<const float> vector);

Dataset PcaTransform(const PCAModel& model, const Dataset& dataset);

}  // namespace pqcascade
