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

// Runtime-selected index: float32, LVQ or M-LVQ storage behind one
// interface, for the harness, the command-line tool and the bindings.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "streamlvq/dataio.hpp"
#include "streamlvq/index.hpp"
#include "streamlvq/layout.hpp"
#include "streamlvq/metric.hpp"
#include "streamlvq/mlvq.hpp"

namespace streamlvq {

struct EncodingConfig {
  unsigned primary_bits = 0;  // 0 keeps float32 vectors
  unsigned residual_bits = 0;
  Layout layout = Layout::turbo;
  std::size_t centers = 1;  // M; 1 is plain LVQ with the sample mean
  double mean_fraction = 1.0;

  bool quantized() const { return primary_bits != 0; }
  std::string label() const;  // "float32", "LVQ-4x8", "M16-LVQ-4x8", ...
};

/// Mean (M = 1) or k-means centers (M > 1, seeded with the mean) fitted on
/// `fit`. Cosine data is normalized first.
CenterSet fit_centers(const VectorDataset& fit, Metric metric, const EncodingConfig& encoding, std::uint64_t seed);

class AnyIndex {
 public:
  virtual ~AnyIndex() = default;

  virtual std::size_t dim() const = 0;
  virtual Metric metric() const = 0;
  virtual std::size_t size() const = 0;
  virtual bool has_residuals() const = 0;
  virtual const ProximityGraph& graph() const = 0;

  virtual void build(const VectorDataset& data) = 0;
  virtual void insert(std::span<const float> x, std::uint64_t id) = 0;
  virtual void insert_batch(const VectorDataset& batch) = 0;
  virtual void remove(std::uint64_t id) = 0;
  virtual std::size_t consolidate() = 0;
  virtual SearchResult search(std::span<const float> q, std::size_t k, std::size_t window, bool rerank) const = 0;
  virtual std::vector<std::uint64_t> live_ids() const = 0;
  virtual void save(const std::filesystem::path& prefix) const = 0;

  /// Searches every query, in parallel over queries.
  std::vector<SearchResult> search_batch(const VectorDataset& queries, std::size_t k, std::size_t window,
                                         bool rerank) const;
};

std::unique_ptr<AnyIndex> make_index(std::size_t dim, Metric metric, const EncodingConfig& encoding,
                                     const CenterSet& centers, const IndexParams& params);

/// Loads an index written by AnyIndex::save, picking the store from the file.
std::unique_ptr<AnyIndex> load_index(const std::filesystem::path& prefix);

}  // namespace streamlvq
