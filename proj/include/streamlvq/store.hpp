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

// Vector storage backends for the graph index. Both expose the same
// duck-typed surface used by the templated graph algorithms:
//
//   Query prepare(span<const float> q) const;
//   float similarity(const Query&, uint32_t slot) const;
//   std::vector<float> reconstruct(uint32_t slot) const;
//   void set(uint32_t slot, span<const float> x);
//   bool has_residuals() const;
//   float residual_similarity(const Query&, uint32_t slot) const;

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "streamlvq/distance.hpp"
#include "streamlvq/layout.hpp"
#include "streamlvq/metric.hpp"
#include "streamlvq/mlvq.hpp"
#include "streamlvq/quantize.hpp"

namespace streamlvq {

/// Full-precision float32 vectors, with an optional second set of vectors
/// used only for re-ranking (the two-level reconstructions in analysis runs).
class FloatStore {
 public:
  struct Query {
    std::vector<float> values;
  };

  FloatStore() = default;
  FloatStore(std::size_t dim, Metric metric);

  std::size_t dim() const { return dim_; }
  Metric metric() const { return metric_; }
  std::size_t slots() const { return dim_ == 0 ? 0 : values_.size() / dim_; }

  void set(std::uint32_t slot, std::span<const float> x);
  void set_secondary(std::uint32_t slot, std::span<const float> x);

  Query prepare(std::span<const float> q) const;
  float similarity(const Query& q, std::uint32_t slot) const {
    const std::span<const float> x(values_.data() + static_cast<std::size_t>(slot) * dim_, dim_);
    return metric_ == Metric::euclidean ? dense_negated_l2(q.values, x) : dense_dot(q.values, x);
  }
  std::vector<float> reconstruct(std::uint32_t slot) const;
  void prefetch(std::uint32_t slot) const {
    __builtin_prefetch(values_.data() + static_cast<std::size_t>(slot) * dim_);
  }

  bool has_residuals() const { return !secondary_.empty(); }
  float residual_similarity(const Query& q, std::uint32_t slot) const;

  std::vector<std::uint8_t> serialize() const;
  static FloatStore deserialize(std::span<const std::uint8_t> bytes);

 private:
  std::size_t dim_ = 0;
  Metric metric_ = Metric::euclidean;
  std::vector<float> values_;
  std::vector<float> secondary_;
};

struct LvqStoreConfig {
  unsigned primary_bits = 4;   // 4 or 8 (packed layouts)
  unsigned residual_bits = 0;  // 0..8, stored one byte per dimension
  Layout layout = Layout::turbo;
};

/// LVQ / M-LVQ encoded vectors.
///
/// Record layout (record_bytes() per slot, a multiple of 32):
///   [0, P)          packed first-level codes, P = packed_size(d, B1, layout)
///   [P, P+4)        lower bound, float32
///   [P+4, P+8)      step, float32
///   [P+8, P+8+c)    center id, little-endian, c = ceil(ceil(log2 M) / 8) bytes
///   remainder       zero padding
/// Residual codes, when present, live in a parallel array of d bytes per slot.
class LvqStore {
 public:
  using Query = PreparedQuery;

  LvqStore() = default;
  LvqStore(std::size_t dim, Metric metric, LvqStoreConfig config, CenterSet centers);

  std::size_t dim() const { return dim_; }
  Metric metric() const { return metric_; }
  const LvqStoreConfig& config() const { return config_; }
  const CenterSet& centers() const { return centers_; }
  std::size_t slots() const { return record_bytes_ == 0 ? 0 : records_.size() / record_bytes_; }
  std::size_t record_bytes() const { return record_bytes_; }
  std::size_t packed_bytes() const { return packed_bytes_; }
  std::span<const std::uint8_t> record(std::uint32_t slot) const {
    return {records_.data() + static_cast<std::size_t>(slot) * record_bytes_, record_bytes_};
  }

  void set(std::uint32_t slot, std::span<const float> x);
  void set_encoded(std::uint32_t slot, const EncodedVector& e);
  EncodedVector encoded(std::uint32_t slot) const;

  Query prepare(std::span<const float> q) const { return prepare_query(q, metric_, centers_); }
  float similarity(const Query& q, std::uint32_t slot) const;
  std::vector<float> reconstruct(std::uint32_t slot) const;
  void prefetch(std::uint32_t slot) const {
    const std::uint8_t* p = records_.data() + static_cast<std::size_t>(slot) * record_bytes_;
    for (std::size_t off = 0; off < record_bytes_; off += 64) __builtin_prefetch(p + off);
  }

  bool has_residuals() const { return config_.residual_bits > 0; }
  float residual_similarity(const Query& q, std::uint32_t slot) const;

  std::vector<std::uint8_t> serialize() const;
  static LvqStore deserialize(std::span<const std::uint8_t> bytes);

  /// Record size for the given shape; exposed for footprint checks.
  static std::size_t record_size(std::size_t dim, unsigned primary_bits, Layout layout, std::size_t centers);

 private:
  struct Scalars {
    float lower;
    float step;
    std::uint32_t center;
  };
  Scalars scalars(std::uint32_t slot) const;
  QuantizerConfig quantizer() const;

  std::size_t dim_ = 0;
  Metric metric_ = Metric::euclidean;
  LvqStoreConfig config_;
  CenterSet centers_;
  std::size_t packed_bytes_ = 0;
  std::size_t center_bytes_ = 0;
  std::size_t record_bytes_ = 0;
  std::vector<std::uint8_t> records_;
  std::vector<std::uint8_t> residuals_;
};

}  // namespace streamlvq
