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
#include "streamlvq/quantize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "streamlvq/errors.hpp"

namespace streamlvq {

bool QuantizerConfig::is_storage() const {
  return primary_bits == std::floor(primary_bits) && residual_bits == std::floor(residual_bits) &&
         primary_bits >= 1.0 && primary_bits <= 16.0 && residual_bits >= 0.0 && residual_bits <= 16.0;
}

void QuantizerConfig::validate_storage() const {
  if (!is_storage()) {
    throw ArgumentError("storage encodings need integer bits with 1 <= B1 <= 16 and 0 <= B2 <= 16 (got B1=" +
                        std::to_string(primary_bits) + ", B2=" + std::to_string(residual_bits) + ")");
  }
}

namespace detail {

double level_count(double bits) {
  if (!std::isfinite(bits)) throw ArgumentError("bit count must be finite");
  const double levels = std::exp2(bits) - 1.0;
  if (!(levels > 0.0)) throw ArgumentError("bit count must satisfy 2^B - 1 > 0");
  return levels;
}

Grid make_grid(double lo, double hi, double bits) {
  const double levels = level_count(bits);
  Grid g;
  g.max_code = static_cast<std::uint32_t>(std::floor(levels + 0.5));
  if (hi == lo) {
    g.lower = static_cast<float>(lo);
    g.step = 0.0f;
    return g;
  }
  float lower = static_cast<float>(lo);
  if (static_cast<double>(lower) > lo) lower = std::nextafter(lower, -std::numeric_limits<float>::infinity());
  const double step = (hi - static_cast<double>(lower)) / levels;
  float fstep = static_cast<float>(step);
  if (static_cast<double>(fstep) < step) fstep = std::nextafter(fstep, std::numeric_limits<float>::infinity());
  g.lower = lower;
  g.step = fstep;
  return g;
}

ScalarCode quantize_on_grid(double v, double lower, double step, std::uint32_t max_code) {
  if (step == 0.0) return {lower, 0};
  const double q = std::floor((v - lower) / step + 0.5);
  const double code = std::clamp(q, 0.0, static_cast<double>(max_code));
  return {step * code + lower, static_cast<std::uint32_t>(code)};
}

}  // namespace detail

namespace {

void require_finite(double v) {
  if (!std::isfinite(v)) throw ArgumentError("non-finite value cannot be quantized");
}

void require_same_dim(std::size_t a, std::size_t b) {
  if (a != b) throw ArgumentError("dimension mismatch: " + std::to_string(a) + " vs " + std::to_string(b));
}

// First-level grid and per-component reconstructions Q(x) for bits B1.
struct FirstLevel {
  detail::Grid grid;
  std::vector<double> centered;  // x - mu
  std::vector<std::uint32_t> codes;
  std::vector<double> values;  // Q(x)
};

FirstLevel first_level(std::span<const float> x, std::span<const float> mean, double bits) {
  require_same_dim(x.size(), mean.size());
  FirstLevel out;
  out.centered.resize(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    require_finite(x[j]);
    out.centered[j] = static_cast<double>(x[j]) - static_cast<double>(mean[j]);
  }
  double lo = 0.0, hi = 0.0;
  if (!x.empty()) {
    auto [mn, mx] = std::minmax_element(out.centered.begin(), out.centered.end());
    lo = *mn;
    hi = *mx;
  }
  out.grid = detail::make_grid(lo, hi, bits);
  out.codes.resize(x.size());
  out.values.resize(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    const auto c = detail::quantize_on_grid(out.centered[j], out.grid.lower, out.grid.step, out.grid.max_code);
    out.codes[j] = c.code;
    out.values[j] = c.value;
  }
  return out;
}

// Residual grid: [-step/2, step/2] with 2^B2 - 1 levels.
struct ResidualGrid {
  double lower;
  double step;
  std::uint32_t max_code;
};

ResidualGrid residual_grid(double first_step, double bits) {
  const double levels = detail::level_count(bits);
  return {-first_step / 2.0, first_step / levels, static_cast<std::uint32_t>(std::floor(levels + 0.5))};
}

}  // namespace

MeanVector compute_mean(const VectorDataset& data, double fraction, std::uint64_t seed) {
  if (data.empty()) throw ArgumentError("cannot compute the mean of an empty dataset");
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ArgumentError("subsample fraction must lie in (0, 1]");
  const std::size_t n = data.size();
  const auto m = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
  if (m == 0) throw ArgumentError("subsample fraction selects no vectors");

  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), 0);
  if (m < n) {
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < m; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, n - 1);
      std::swap(rows[i], rows[pick(rng)]);
    }
    rows.resize(m);
    std::sort(rows.begin(), rows.end());
  }

  std::vector<double> sum(data.dim, 0.0);
  for (std::size_t r : rows) {
    const auto v = data.row(r);
    for (std::size_t j = 0; j < data.dim; ++j) sum[j] += v[j];
  }
  MeanVector mean;
  mean.values.resize(data.dim);
  for (std::size_t j = 0; j < data.dim; ++j) mean.values[j] = static_cast<float>(sum[j] / static_cast<double>(m));
  mean.provenance = m == n ? MeanProvenance::full_sample : MeanProvenance::subsample;
  mean.fraction = fraction;
  mean.seed = seed;
  return mean;
}

Bounds vector_bounds(std::span<const float> x, std::span<const float> mean) {
  require_same_dim(x.size(), mean.size());
  if (x.empty()) return {};
  Bounds b{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (std::size_t j = 0; j < x.size(); ++j) {
    require_finite(x[j]);
    const double v = static_cast<double>(x[j]) - static_cast<double>(mean[j]);
    b.lower = std::min(b.lower, v);
    b.upper = std::max(b.upper, v);
  }
  return b;
}

ScalarCode scalar_quantize(double v, double bits, double lower, double upper) {
  require_finite(v);
  if (!std::isfinite(lower) || !std::isfinite(upper) || lower > upper) {
    throw ArgumentError("scalar quantizer needs finite bounds with lower <= upper");
  }
  const double levels = detail::level_count(bits);
  if (lower == upper) return {lower, 0};
  return detail::quantize_on_grid(v, lower, (upper - lower) / levels,
                                  static_cast<std::uint32_t>(std::floor(levels + 0.5)));
}

EncodedVector lvq_encode(std::span<const float> x, std::span<const float> mean, const QuantizerConfig& config) {
  config.validate_storage();
  const auto first = first_level(x, mean, config.primary_bits);
  EncodedVector e;
  e.primary.assign(first.codes.begin(), first.codes.end());
  e.lower = first.grid.lower;
  e.step = first.grid.step;
  e.primary_bits = static_cast<std::uint8_t>(config.primary_bits);
  if (config.two_level()) {
    e.residual_bits = static_cast<std::uint8_t>(config.residual_bits);
    const auto rg = residual_grid(e.step, config.residual_bits);
    e.residual.resize(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double r = first.centered[j] - first.values[j];
      e.residual[j] = static_cast<std::uint16_t>(detail::quantize_on_grid(r, rg.lower, rg.step, rg.max_code).code);
    }
  }
  return e;
}

std::vector<double> decode_centered(const EncodedVector& e, DecodeLevel level) {
  if (level == DecodeLevel::two && !e.has_residual()) {
    throw StateError("two-level decode requested for a one-level encoding");
  }
  std::vector<double> out(e.dim());
  const double step = e.step;
  const double lower = e.lower;
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = step * e.primary[j] + lower;
  if (level == DecodeLevel::two) {
    const auto rg = residual_grid(step, e.residual_bits);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += rg.step * e.residual[j] + rg.lower;
  }
  return out;
}

std::vector<float> lvq_decode(const EncodedVector& e, DecodeLevel level, std::span<const float> mean) {
  require_same_dim(e.dim(), mean.size());
  const auto centered = decode_centered(e, level);
  std::vector<float> out(centered.size());
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = static_cast<float>(static_cast<double>(mean[j]) + centered[j]);
  return out;
}

FractionalEncoding fractional_encode(std::span<const float> x, double primary_bits, double residual_bits,
                                     std::span<const float> mean) {
  if (!(primary_bits > 0.0)) throw ArgumentError("first-level bits must be positive");
  if (!(residual_bits >= 0.0)) throw ArgumentError("second-level bits must be non-negative");
  auto first = first_level(x, mean, primary_bits);
  FractionalEncoding out;
  out.two_level = first.values;
  if (residual_bits > 0.0) {
    const auto rg = residual_grid(first.grid.step, residual_bits);
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double r = first.centered[j] - first.values[j];
      out.two_level[j] += detail::quantize_on_grid(r, rg.lower, rg.step, rg.max_code).value;
    }
  }
  out.first_level = std::move(first.values);
  return out;
}

double detail::squared_first_level_error(std::span<const float> x, std::span<const float> mean,
                                         double primary_bits) {
  const auto first = first_level(x, mean, primary_bits);
  double total = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double diff = first.centered[j] - first.values[j];
    total += diff * diff;
  }
  return total;
}

QuantizationError epsilon1(const VectorDataset& data, std::span<const float> mean, double primary_bits) {
  if (data.empty()) throw ArgumentError("epsilon1 needs a non-empty dataset");
  QuantizationError err;
  for (std::size_t i = 0; i < data.size(); ++i) {
    err.total += detail::squared_first_level_error(data.row(i), mean, primary_bits);
  }
  err.per_vector = err.total / static_cast<double>(data.size());
  return err;
}

}  // namespace streamlvq
