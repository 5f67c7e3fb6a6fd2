// Copyright 2026-present the streamlvq authors
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

// Multi-means LVQ: each vector is de-meaned by its nearest of M k-means
// centers instead of the global mean. M = 1 with the sample mean as the only
// center is plain LVQ.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "streamlvq/dataio.hpp"
#include "streamlvq/quantize.hpp"

namespace streamlvq {

struct CenterSet {
  std::size_t dim = 0;
  std::vector<float> centers;  // M x dim
  std::uint64_t fit_seed = 0;
  std::size_t fit_iterations = 0;

  std::size_t count() const { return dim == 0 ? 0 : centers.size() / dim; }
  std::span<const float> center(std::size_t m) const { return {centers.data() + m * dim, dim}; }

  static CenterSet from_mean(std::span<const float> mean);
};

struct KMeansOptions {
  std::size_t max_iterations = 50;
  double tolerance = 1e-4;  // stop when the relative objective decrease falls below this
  std::uint64_t seed = 0;
  // Rows used verbatim as the first initial centers; k-means++ picks the rest.
  std::vector<std::vector<float>> initial_centers;
};

struct KMeansResult {
  CenterSet centers;
  std::vector<std::uint32_t> assignment;
  std::vector<double> objective_history;  // after each assignment step
};

KMeansResult kmeans(const VectorDataset& data, std::size_t count, const KMeansOptions& options);
CenterSet kmeans_fit(const VectorDataset& data, std::size_t count, const KMeansOptions& options);

/// Sum of squared distances of every row to its nearest center.
double kmeans_objective(const VectorDataset& data, const CenterSet& centers);

/// Index of the Euclidean-nearest center; ties go to the lowest index.
std::uint32_t assign_center(std::span<const float> x, const CenterSet& centers);

EncodedVector mlvq_encode(std::span<const float> x, const CenterSet& centers, const QuantizerConfig& config);
std::vector<float> mlvq_decode(const EncodedVector& e, DecodeLevel level, const CenterSet& centers);

/// First-level error with every row de-meaned by its nearest center.
QuantizationError epsilon1(const VectorDataset& data, const CenterSet& centers, double primary_bits);

struct RefitResult {
  CenterSet centers;
  std::vector<EncodedVector> encoded;  // row order of the input
};

/// Fits fresh centers on the current data and re-encodes every row.
RefitResult mlvq_refit_ideal(const VectorDataset& data, std::size_t count, const QuantizerConfig& config,
                             const KMeansOptions& options);

/// Bits needed to store a center index, ceil(log2 M); zero for M = 1.
unsigned center_id_bits(std::size_t count);

}  // namespace streamlvq
