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
#include "streamlvq/distance.hpp"

#include <cmath>

#if defined(__AVX512F__)
#include <immintrin.h>
#endif

#include "streamlvq/layout.hpp"

namespace streamlvq {

Metric parse_metric(std::string_view name) {
  if (name == "euclidean" || name == "l2") return Metric::euclidean;
  if (name == "inner_product" || name == "ip" || name == "mip") return Metric::inner_product;
  if (name == "cosine" || name == "cos") return Metric::cosine;
  throw ArgumentError("unknown metric '" + std::string(name) + "'");
}

std::string to_string(Metric metric) {
  switch (metric) {
    case Metric::euclidean:
      return "euclidean";
    case Metric::inner_product:
      return "inner_product";
    case Metric::cosine:
      return "cosine";
  }
  return "unknown";
}

namespace {

void require_dims(std::size_t a, std::size_t b) {
  if (a != b) throw ArgumentError("dimension mismatch: " + std::to_string(a) + " vs " + std::to_string(b));
}

}  // namespace

float dense_dot(std::span<const float> a, std::span<const float> b) {
  const std::size_t d = a.size();
  const float* pa = a.data();
  const float* pb = b.data();
#if defined(__AVX512F__)
  __m512 acc = _mm512_setzero_ps();
  std::size_t j = 0;
  for (; j + 16 <= d; j += 16) acc = _mm512_fmadd_ps(_mm512_loadu_ps(pa + j), _mm512_loadu_ps(pb + j), acc);
  if (j < d) {
    const auto m = static_cast<__mmask16>((1u << (d - j)) - 1u);
    acc = _mm512_fmadd_ps(_mm512_maskz_loadu_ps(m, pa + j), _mm512_maskz_loadu_ps(m, pb + j), acc);
  }
  return _mm512_reduce_add_ps(acc);
#else
  float acc = 0.0f;
  for (std::size_t j = 0; j < d; ++j) acc += pa[j] * pb[j];
  return acc;
#endif
}

float dense_negated_l2(std::span<const float> a, std::span<const float> b) {
  const std::size_t d = a.size();
  const float* pa = a.data();
  const float* pb = b.data();
#if defined(__AVX512F__)
  __m512 acc = _mm512_setzero_ps();
  std::size_t j = 0;
  for (; j + 16 <= d; j += 16) {
    const __m512 t = _mm512_sub_ps(_mm512_loadu_ps(pa + j), _mm512_loadu_ps(pb + j));
    acc = _mm512_fmadd_ps(t, t, acc);
  }
  if (j < d) {
    const auto m = static_cast<__mmask16>((1u << (d - j)) - 1u);
    const __m512 t = _mm512_sub_ps(_mm512_maskz_loadu_ps(m, pa + j), _mm512_maskz_loadu_ps(m, pb + j));
    acc = _mm512_fmadd_ps(t, t, acc);
  }
  return -_mm512_reduce_add_ps(acc);
#else
  float acc = 0.0f;
  for (std::size_t j = 0; j < d; ++j) {
    const float t = pa[j] - pb[j];
    acc += t * t;
  }
  return -acc;
#endif
}

void normalize_in_place(std::span<float> v) {
  double norm = 0.0;
  for (float x : v) norm += static_cast<double>(x) * x;
  norm = std::sqrt(norm);
  if (norm == 0.0) throw ArgumentError("cannot normalize a zero vector");
  for (float& x : v) x = static_cast<float>(x / norm);
}

float similarity_full(std::span<const float> q, std::span<const float> x, Metric metric) {
  require_dims(q.size(), x.size());
  switch (metric) {
    case Metric::euclidean:
      return dense_negated_l2(q, x);
    case Metric::inner_product:
      return dense_dot(q, x);
    case Metric::cosine: {
      const float qq = dense_dot(q, q);
      const float xx = dense_dot(x, x);
      if (qq == 0.0f || xx == 0.0f) throw ArgumentError("cosine similarity of a zero vector is undefined");
      return dense_dot(q, x) / std::sqrt(qq * xx);
    }
  }
  return 0.0f;
}

PreparedQuery prepare_query(std::span<const float> q, Metric metric, const CenterSet& centers) {
  require_dims(q.size(), centers.dim);
  if (centers.count() == 0) throw ArgumentError("center set is empty");
  PreparedQuery p;
  p.dim = q.size();
  p.centers = centers.count();
  p.raw.assign(q.begin(), q.end());
  if (metric == Metric::cosine) {
    normalize_in_place(p.raw);
    metric = Metric::inner_product;
  }
  p.metric = metric;
  if (metric == Metric::euclidean) {
    p.shifted.resize(p.centers * p.dim);
    for (std::size_t m = 0; m < p.centers; ++m) {
      const auto mu = centers.center(m);
      for (std::size_t j = 0; j < p.dim; ++j) p.shifted[m * p.dim + j] = p.raw[j] - mu[j];
    }
  } else {
    p.constants.resize(p.centers);
    for (std::size_t m = 0; m < p.centers; ++m) p.constants[m] = dense_dot(p.raw, centers.center(m));
  }
  return p;
}

namespace {

float score_reconstruction(const PreparedQuery& query, std::span<const double> centered, std::uint32_t center) {
  if (center >= query.centers) throw StateError("encoded center id is out of range for this query");
  require_dims(centered.size(), query.dim);
  float acc = 0.0f;
  if (query.metric == Metric::euclidean) {
    const auto q = query.shifted_for(center);
    for (std::size_t j = 0; j < query.dim; ++j) {
      const float t = q[j] - static_cast<float>(centered[j]);
      acc += t * t;
    }
    return -acc;
  }
  for (std::size_t j = 0; j < query.dim; ++j) acc += query.raw[j] * static_cast<float>(centered[j]);
  return acc + query.constants[center];
}

}  // namespace

float similarity_encoded(const PreparedQuery& query, const EncodedVector& e) {
  if (e.center >= query.centers) throw StateError("encoded center id is out of range for this query");
  require_dims(e.dim(), query.dim);
  if (layout_supports(e.primary_bits)) {
    const auto packed = pack(e.primary, e.primary_bits, Layout::sequential);
    if (query.metric == Metric::euclidean) {
      return fused_similarity_scan(packed.view(), query.shifted_for(e.center), Metric::euclidean, e.lower, e.step);
    }
    return fused_similarity_scan(packed.view(), query.raw, Metric::inner_product, e.lower, e.step) +
           query.constants[e.center];
  }
  return score_reconstruction(query, decode_centered(e, DecodeLevel::one), e.center);
}

float similarity_encoded_two_level(const PreparedQuery& query, const EncodedVector& e) {
  return score_reconstruction(query, decode_centered(e, DecodeLevel::two), e.center);
}

}  // namespace streamlvq
