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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

namespace streamlvq {

/// Dense row-major float32 matrix with one unique 64-bit id per row.
struct VectorDataset {
  std::size_t dim = 0;
  std::vector<float> values;
  std::vector<std::uint64_t> ids;

  VectorDataset() = default;
  explicit VectorDataset(std::size_t d) : dim(d) {}

  std::size_t size() const { return ids.size(); }
  bool empty() const { return ids.empty(); }

  std::span<const float> row(std::size_t i) const { return {values.data() + i * dim, dim}; }
  std::span<float> row(std::size_t i) { return {values.data() + i * dim, dim}; }

  void append(std::span<const float> v, std::uint64_t id);

  // Rows in the given order; ids travel with their rows.
  VectorDataset select(std::span<const std::size_t> rows) const;

  // Rows whose id is listed, in the listed order. Unknown ids throw.
  VectorDataset select_ids(std::span<const std::uint64_t> wanted) const;

  // Throws ArgumentError when shapes disagree, ids repeat, or values are not finite.
  void validate() const;

  static VectorDataset from_rows(const std::vector<std::vector<float>>& rows);
};

/// Cluster membership for a dataset: labels[i] indexes a row of centroids.
struct ClusterLabeling {
  std::size_t dim = 0;
  std::vector<std::uint32_t> labels;
  std::vector<float> centroids;  // F x dim

  std::size_t cluster_count() const { return dim == 0 ? 0 : centroids.size() / dim; }
  std::span<const float> centroid(std::size_t i) const { return {centroids.data() + i * dim, dim}; }
};

// *vecs interchange: per record a little-endian uint32 dimension followed by
// that many little-endian 4-byte values.
std::vector<std::uint8_t> encode_fvecs(const VectorDataset& data);
VectorDataset decode_fvecs(std::span<const std::uint8_t> bytes);
VectorDataset read_fvecs(const std::filesystem::path& path);
void write_fvecs(const std::filesystem::path& path, const VectorDataset& data);

std::vector<std::uint8_t> encode_ivecs(const std::vector<std::vector<std::int32_t>>& rows);
std::vector<std::vector<std::int32_t>> decode_ivecs(std::span<const std::uint8_t> bytes);
std::vector<std::vector<std::int32_t>> read_ivecs(const std::filesystem::path& path);
void write_ivecs(const std::filesystem::path& path, const std::vector<std::vector<std::int32_t>>& rows);

// Raw little-endian float32 matrix plus a JSON sidecar at <path>.json holding
// {"n", "d", "dtype": "float32", "ids"}.
void write_raw_matrix(const std::filesystem::path& path, const VectorDataset& data);
VectorDataset read_raw_matrix(const std::filesystem::path& path);

// Dispatches on extension: .fvecs, otherwise raw matrix with sidecar.
VectorDataset load_dataset(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

struct ClusteredDatasetParams {
  std::size_t n = 0;
  std::size_t dim = 0;
  std::size_t clusters = 1;
  double separation = 0.0;
  std::uint64_t seed = 0;
};

/// Mixture of `clusters` spherical unit-variance Gaussians. Component means
/// are drawn from N(0, separation^2 I), so the expected distance between two
/// means is separation times the expected distance between two points of one
/// component. Row i gets id i.
std::pair<VectorDataset, ClusterLabeling> generate_clustered_dataset(const ClusteredDatasetParams& params);

/// Shuffles rows with `seed` and cuts consecutive parts of floor(f * n) rows.
std::vector<VectorDataset> split_dataset(const VectorDataset& data, std::span<const double> fractions,
                                         std::uint64_t seed);

/// Row indices of each part, same contract as split_dataset.
std::vector<std::vector<std::size_t>> split_indices(std::size_t n, std::span<const double> fractions,
                                                    std::uint64_t seed);

}  // namespace streamlvq
