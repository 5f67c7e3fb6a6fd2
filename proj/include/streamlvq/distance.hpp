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

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "streamlvq/errors.hpp"
#include "streamlvq/metric.hpp"
#include "streamlvq/mlvq.hpp"
#include "streamlvq/quantize.hpp"

namespace streamlvq {

struct Neighbor {
  std::uint32_t id = 0;
  float similarity = 0.0f;
};

// Higher similarity first, ties by ascending id.
inline bool closer(const Neighbor& a, const Neighbor& b) {
  return a.similarity > b.similarity || (a.similarity == b.similarity && a.id < b.id);
}

/// Per-query state for scoring LVQ / M-LVQ encodings.
///   euclidean:      shifted holds q - mu_m for each center (M x d).
///   inner_product:  constants holds <q, mu_m> for each center.
/// Cosine queries are unit-normalized and prepared as inner_product.
struct PreparedQuery {
  Metric metric = Metric::euclidean;
  std::size_t dim = 0;
  std::size_t centers = 1;
  std::vector<float> raw;
  std::vector<float> shifted;
  std::vector<float> constants;

  std::span<const float> shifted_for(std::size_t m) const { return {shifted.data() + m * dim, dim}; }
};

PreparedQuery prepare_query(std::span<const float> q, Metric metric, const CenterSet& centers);

float dense_dot(std::span<const float> a, std::span<const float> b);
float dense_negated_l2(std::span<const float> a, std::span<const float> b);

/// Full-precision similarity. Cosine of a zero vector is an ArgumentError.
float similarity_full(std::span<const float> q, std::span<const float> x, Metric metric);

/// Scores an encoding's first level against a prepared query: -||q_m - Q(x)||^2
/// or <q, Q(x)> + c_m, with m the encoding's center id.
float similarity_encoded(const PreparedQuery& query, const EncodedVector& e);

/// Same, using the two-level reconstruction.
float similarity_encoded_two_level(const PreparedQuery& query, const EncodedVector& e);

void normalize_in_place(std::span<float> v);

/// Re-scores candidates with the store's two-level reconstructions and
/// returns the best k, stable with respect to the candidate order.
template <typename Store>
std::vector<Neighbor> rerank(std::span<const Neighbor> candidates, const typename Store::Query& query,
                             const Store& store, std::size_t k) {
  if (!store.has_residuals()) throw StateError("re-ranking needs second-level residual codes");
  if (candidates.size() < k) throw ArgumentError("fewer candidates than requested neighbors");
  std::vector<Neighbor> scored(candidates.begin(), candidates.end());
  for (auto& c : scored) c.similarity = store.residual_similarity(query, c.id);
  std::stable_sort(scored.begin(), scored.end(),
                   [](const Neighbor& a, const Neighbor& b) { return a.similarity > b.similarity; });
  scored.resize(k);
  return scored;
}

}  // namespace streamlvq
