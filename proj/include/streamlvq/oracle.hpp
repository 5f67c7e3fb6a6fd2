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

// Exact k-nearest-neighbor ground truth by exhaustive scan.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "streamlvq/dataio.hpp"
#include "streamlvq/metric.hpp"

namespace streamlvq {

struct GroundTruth {
  std::size_t k = 0;
  std::vector<std::vector<std::uint64_t>> ids;  // per query, best first
  std::vector<std::vector<double>> similarities;
  std::uint64_t snapshot = 0;  // caller-defined live-set version
};

/// Exact top-k by full-precision similarity accumulated in double, ties by
/// ascending id. Deterministic regardless of the thread count.
GroundTruth brute_force_knn(const VectorDataset& queries, const VectorDataset& live, Metric metric, std::size_t k);

/// Double-precision similarity used by the oracle.
double exact_similarity(std::span<const float> q, std::span<const float> x, Metric metric);

/// Writes <prefix>.ivecs (ids) and <prefix>.fvecs (similarities).
void write_ground_truth(const std::filesystem::path& prefix, const GroundTruth& gt);
GroundTruth read_ground_truth(const std::filesystem::path& prefix);

}  // namespace streamlvq
