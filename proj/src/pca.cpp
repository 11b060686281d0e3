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

#include "pqcascade/pca.hpp"

#include <cmath>

#include <Eigen/Dense>

#include "pqcascade/error.hpp"

namespace pqcascade {

PCAModel PcaFit(const Dataset& dataset, std::uint32_t target_dim) {
  const std::uint32_t d = dataset.dim();
  const std::size_t n = dataset.size();
  PQC_THROW_IF_NOT(target_dim >= 1, ErrorKind::kInvalidArgument,
                   "target_dim must be >= 1");
  PQC_THROW_IF_NOT(target_dim <= d, ErrorKind::kInvalidArgument,
                   "target_dim exceeds input dimension");
  PQC_THROW_IF_NOT(n >= target_dim && n > 0, ErrorKind::kInvalidArgument,
                   "too few records for PCA: " + std::to_string(n));

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  for (std::size_t i = 0; i < n; ++i) {
    const auto v = dataset.vector(i);
    for (std::uint32_t j = 0; j < d; ++j) mean[j] += v[j];
  }
  mean /= static_cast<double>(n);

  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd centered(d);
  for (std::size_t i = 0; i < n; ++i) {
    const auto v = dataset.vector(i);
    for (std::uint32_t j = 0; j < d; ++j) centered[j] = v[j] - mean[j];
    cov.selfadjointView<Eigen::Lower>().rankUpdate(centered);
  }
  cov = cov.selfadjointView<Eigen::Lower>();
  cov /= static_cast<double>(n);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  PQC_THROW_IF_NOT(solver.info() == Eigen::Success, ErrorKind::kDegenerate,
                   "covariance eigendecomposition failed");
  // Eigen returns ascending eigenvalues.
  const Eigen::VectorXd& evals = solver.eigenvalues();
  const Eigen::MatrixXd& evecs = solver.eigenvectors();

  PCAModel model;
  model.input_dim = d;
  model.target_dim = target_dim;
  model.mean.assign(mean.data(), mean.data() + d);
  model.explained_variance.resize(d);
  for (std::uint32_t i = 0; i < d; ++i) {
    model.explained_variance[i] = std::max(0.0, evals[d - 1 - i]);
  }
  model.basis.resize(std::size_t{target_dim} * d);
  for (std::uint32_t r = 0; r < target_dim; ++r) {
    Eigen::VectorXd dir = evecs.col(d - 1 - r);
    for (std::uint32_t j = 0; j < d; ++j) {
      if (std::abs(dir[j]) > 1e-8) {
        if (dir[j] < 0) dir = -dir;
        break;
      }
    }
    for (std::uint32_t j = 0; j < d; ++j) {
      model.basis[std::size_t{r} * d + j] = dir[j];
    }
  }
  return model;
}

std::vector<float> PcaTransform(const PCAModel& model,
                                std::span<const float> vector) {
  PQC_THROW_IF_NOT(vector.size() == model.input_dim,
                   ErrorKind::kDimensionMismatch,
                   "PCA input has dimension " + std::to_string(vector.size()) +
                       ", model expects " + std::to_string(model.input_dim));
  std::vector<float> out(model.target_dim);
  for (std::uint32_t r = 0; r < model.target_dim; ++r) {
    const auto row = model.row(r);
    double acc = 0.0;
    for (std::uint32_t j = 0; j < model.input_dim; ++j) {
      acc += row[j] * (static_cast<double>(vector[j]) - model.mean[j]);
    }
    out[r] = static_cast<float>(acc);
  }
  return out;
}

Dataset PcaTransform(const PCAModel& model, const Dataset& dataset) {
  Dataset out(model.target_dim);
  out.Reserve(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    out.Add(dataset.info(i), PcaTransform(model, dataset.vector(i)));
  }
  return out;
}

}  // namespace pqcascade
