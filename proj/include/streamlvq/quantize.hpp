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

// Locally-adaptive vector quantization (LVQ).
//
// A vector x is de-meaned and scalar-quantized with its own bounds:
//   lower = min_j (x_j - mu_j), upper = max_j (x_j - mu_j),
//   step  = (upper - lower) / (2^B1 - 1),
//   code_j = floor((x_j - mu_j - lower) / step + 1/2),
//   Q(x)_j = step * code_j + lower.
// The optional second level quantizes the residual r = x - mu - Q(x), whose
// components lie in [-step/2, step/2], with B2 bits over that interval.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "streamlvq/dataio.hpp"

namespace streamlvq {

enum class MeanProvenance : std::uint8_t { full_sample, subsample, external };

struct MeanVector {
  std::vector<float> values;
  MeanProvenance provenance = MeanProvenance::external;
  double fraction = 1.0;
  std::uint64_t seed = 0;

  std::size_t dim() const { return values.size(); }
  std::span<const float> span() const { return values; }
};

struct QuantizerConfig {
  double primary_bits = 4.0;   // B1
  double residual_bits = 0.0;  // B2, zero means one level

  bool two_level() const { return residual_bits > 0.0; }
  // Storage encodings need integer bit counts: B1 in [1, 16], B2 in [0, 16].
  bool is_storage() const;
  void validate_storage() const;
};

struct EncodedVector {
  std::vector<std::uint16_t> primary;
  float lower = 0.0f;
  float step = 0.0f;
  std::vector<std::uint16_t> residual;  // empty for one-level encodings
  std::uint32_t center = 0;
  std::uint8_t primary_bits = 0;
  std::uint8_t residual_bits = 0;

  std::size_t dim() const { return primary.size(); }
  bool has_residual() const { return residual_bits > 0; }
};

struct Bounds {
  double lower = 0.0;
  double upper = 0.0;
};

struct ScalarCode {
  double value = 0.0;
  std::uint32_t code = 0;
};

enum class DecodeLevel : std::uint8_t { one, two };

struct FractionalEncoding {
  std::vector<double> first_level;  // Q(x)
  std::vector<double> two_level;    // Q(x) + Q_res(r); equals first_level when B2 == 0
};

struct QuantizationError {
  double total = 0.0;       // sum over vectors of squared first-level error
  double per_vector = 0.0;  // total / n
};

/// Mean of a random subsample of floor(fraction * n) rows (all rows when
/// fraction == 1), accumulated in double.
MeanVector compute_mean(const VectorDataset& data, double fraction = 1.0, std::uint64_t seed = 0);

Bounds vector_bounds(std::span<const float> x, std::span<const float> mean);

/// Scalar quantizer with 2^bits - 1 levels over [lower, upper]. `bits` may be
/// fractional. Degenerate bounds (lower == upper) return lower with code 0.
ScalarCode scalar_quantize(double v, double bits, double lower, double upper);

EncodedVector lvq_encode(std::span<const float> x, std::span<const float> mean, const QuantizerConfig& config);

/// mean + Q(x) (+ Q_res(r) for DecodeLevel::two), rounded to float.
std::vector<float> lvq_decode(const EncodedVector& e, DecodeLevel level, std::span<const float> mean);

/// Q(x) (+ Q_res(r)) without the mean, in double.
std::vector<double> decode_centered(const EncodedVector& e, DecodeLevel level);

/// Real-valued reconstructions for sub-bit analysis. Uses exactly the grid of
/// lvq_encode, so integer bit counts reproduce the storage path.
FractionalEncoding fractional_encode(std::span<const float> x, double primary_bits, double residual_bits,
                                     std::span<const float> mean);

QuantizationError epsilon1(const VectorDataset& data, std::span<const float> mean, double primary_bits);

namespace detail {

// Storage grid for one vector: lower rounded down and step rounded up to
// float so that [lower, lower + levels * step] still covers [lo, hi].
struct Grid {
  float lower = 0.0f;
  float step = 0.0f;
  std::uint32_t max_code = 0;
};

double level_count(double bits);
Grid make_grid(double lo, double hi, double bits);
ScalarCode quantize_on_grid(double v, double lower, double step, std::uint32_t max_code);

// ||x - mean - Q(x)||^2 for one vector, accumulated in double.
double squared_first_level_error(std::span<const float> x, std::span<const float> mean, double primary_bits);

}  // namespace detail

}  // namespace streamlvq
