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
#include "streamlvq/store.hpp"

#include <cstring>
#include <string>

#include "streamlvq/container.hpp"
#include "streamlvq/errors.hpp"

namespace streamlvq {

namespace {

void require_dim(std::size_t got, std::size_t want) {
  if (got != want) {
    throw ArgumentError("dimension mismatch: " + std::to_string(got) + " vs " + std::to_string(want));
  }
}

std::size_t round_up(std::size_t v, std::size_t m) { return (v + m - 1) / m * m; }

constexpr std::uint32_t kFormatVersion = 1;

}  // namespace

// ---- FloatStore ------------------------------------------------------------

FloatStore::FloatStore(std::size_t dim, Metric metric) : dim_(dim), metric_(metric) {
  if (dim == 0) throw ArgumentError("store dimension must be positive");
}

void FloatStore::set(std::uint32_t slot, std::span<const float> x) {
  require_dim(x.size(), dim_);
  const std::size_t need = (static_cast<std::size_t>(slot) + 1) * dim_;
  if (values_.size() < need) values_.resize(need, 0.0f);
  float* out = values_.data() + static_cast<std::size_t>(slot) * dim_;
  std::memcpy(out, x.data(), dim_ * sizeof(float));
  if (metric_ == Metric::cosine) normalize_in_place({out, dim_});
}

void FloatStore::set_secondary(std::uint32_t slot, std::span<const float> x) {
  require_dim(x.size(), dim_);
  const std::size_t need = (static_cast<std::size_t>(slot) + 1) * dim_;
  if (secondary_.size() < need) secondary_.resize(need, 0.0f);
  float* out = secondary_.data() + static_cast<std::size_t>(slot) * dim_;
  std::memcpy(out, x.data(), dim_ * sizeof(float));
  if (metric_ == Metric::cosine) normalize_in_place({out, dim_});
}

FloatStore::Query FloatStore::prepare(std::span<const float> q) const {
  require_dim(q.size(), dim_);
  Query out{{q.begin(), q.end()}};
  if (metric_ == Metric::cosine) normalize_in_place(out.values);
  return out;
}

std::vector<float> FloatStore::reconstruct(std::uint32_t slot) const {
  const float* p = values_.data() + static_cast<std::size_t>(slot) * dim_;
  return {p, p + dim_};
}

float FloatStore::residual_similarity(const Query& q, std::uint32_t slot) const {
  if (secondary_.size() < (static_cast<std::size_t>(slot) + 1) * dim_) {
    throw StateError("slot " + std::to_string(slot) + " has no re-ranking vector");
  }
  const std::span<const float> x(secondary_.data() + static_cast<std::size_t>(slot) * dim_, dim_);
  return metric_ == Metric::euclidean ? dense_negated_l2(q.values, x) : dense_dot(q.values, x);
}

std::vector<std::uint8_t> FloatStore::serialize() const {
  ByteWriter w;
  w.put_magic("SLVF");
  w.put<std::uint32_t>(kFormatVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(dim_));
  w.put<std::uint8_t>(static_cast<std::uint8_t>(metric_));
  w.put<std::uint64_t>(slots());
  w.put<std::uint8_t>(secondary_.empty() ? 0 : 1);
  w.put_array<float>(values_);
  if (!secondary_.empty()) {
    std::vector<float> padded(secondary_);
    padded.resize(values_.size(), 0.0f);
    w.put_array<float>(padded);
  }
  return w.take();
}

FloatStore FloatStore::deserialize(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "float store");
  r.expect_magic("SLVF");
  if (r.get<std::uint32_t>() != kFormatVersion) throw FormatError("float store: unsupported version");
  const auto dim = r.get<std::uint32_t>();
  const auto metric = r.get<std::uint8_t>();
  if (metric > 2) throw FormatError("float store: bad metric tag");
  const auto n = r.get<std::uint64_t>();
  const auto has_secondary = r.get<std::uint8_t>();
  FloatStore s(dim, static_cast<Metric>(metric));
  s.values_ = r.get_array<float>(n * dim);
  if (has_secondary) s.secondary_ = r.get_array<float>(n * dim);
  r.expect_end();
  return s;
}

// ---- LvqStore --------------------------------------------------------------

std::size_t LvqStore::record_size(std::size_t dim, unsigned primary_bits, Layout layout, std::size_t centers) {
  const std::size_t id_bytes = (center_id_bits(centers) + 7) / 8;
  return round_up(packed_size(dim, primary_bits, layout) + 2 * sizeof(float) + id_bytes, kPadBytes);
}

LvqStore::LvqStore(std::size_t dim, Metric metric, LvqStoreConfig config, CenterSet centers)
    : dim_(dim), metric_(metric), config_(config), centers_(std::move(centers)) {
  if (dim == 0) throw ArgumentError("store dimension must be positive");
  if (!layout_supports(config.primary_bits)) {
    throw ArgumentError("packed storage supports 4 or 8 first-level bits, got " + std::to_string(config.primary_bits));
  }
  if (config.residual_bits > 8) {
    throw ArgumentError("second-level bits must be in [0, 8], got " + std::to_string(config.residual_bits));
  }
  require_dim(centers_.dim, dim);
  if (centers_.count() == 0) throw ArgumentError("center set is empty");
  packed_bytes_ = packed_size(dim, config.primary_bits, config.layout);
  center_bytes_ = (center_id_bits(centers_.count()) + 7) / 8;
  record_bytes_ = record_size(dim, config.primary_bits, config.layout, centers_.count());
}

QuantizerConfig LvqStore::quantizer() const {
  return {static_cast<double>(config_.primary_bits), static_cast<double>(config_.residual_bits)};
}

void LvqStore::set(std::uint32_t slot, std::span<const float> x) {
  require_dim(x.size(), dim_);
  if (metric_ == Metric::cosine) {
    std::vector<float> unit(x.begin(), x.end());
    normalize_in_place(unit);
    set_encoded(slot, mlvq_encode(unit, centers_, quantizer()));
  } else {
    set_encoded(slot, mlvq_encode(x, centers_, quantizer()));
  }
}

void LvqStore::set_encoded(std::uint32_t slot, const EncodedVector& e) {
  require_dim(e.dim(), dim_);
  if (e.primary_bits != config_.primary_bits || e.residual_bits != config_.residual_bits) {
    throw ArgumentError("encoding bit widths do not match the store configuration");
  }
  if (e.center >= centers_.count()) throw ArgumentError("encoding center id out of range");
  const std::size_t s = slot;
  if (records_.size() < (s + 1) * record_bytes_) records_.resize((s + 1) * record_bytes_, 0);
  std::uint8_t* rec = records_.data() + s * record_bytes_;
  std::memset(rec, 0, record_bytes_);
  pack_into(e.primary, config_.primary_bits, config_.layout, {rec, packed_bytes_});
  std::memcpy(rec + packed_bytes_, &e.lower, sizeof(float));
  std::memcpy(rec + packed_bytes_ + 4, &e.step, sizeof(float));
  for (std::size_t b = 0; b < center_bytes_; ++b) rec[packed_bytes_ + 8 + b] = static_cast<std::uint8_t>(e.center >> (8 * b));
  if (config_.residual_bits > 0) {
    if (residuals_.size() < (s + 1) * dim_) residuals_.resize((s + 1) * dim_, 0);
    for (std::size_t j = 0; j < dim_; ++j) residuals_[s * dim_ + j] = static_cast<std::uint8_t>(e.residual[j]);
  }
}

LvqStore::Scalars LvqStore::scalars(std::uint32_t slot) const {
  const std::uint8_t* rec = records_.data() + static_cast<std::size_t>(slot) * record_bytes_;
  Scalars s{};
  std::memcpy(&s.lower, rec + packed_bytes_, sizeof(float));
  std::memcpy(&s.step, rec + packed_bytes_ + 4, sizeof(float));
  s.center = 0;
  for (std::size_t b = 0; b < center_bytes_; ++b) s.center |= static_cast<std::uint32_t>(rec[packed_bytes_ + 8 + b]) << (8 * b);
  return s;
}

EncodedVector LvqStore::encoded(std::uint32_t slot) const {
  if (slot >= slots()) throw ArgumentError("slot " + std::to_string(slot) + " out of range");
  const auto s = scalars(slot);
  EncodedVector e;
  e.primary = unpack(PackedView{record(slot).first(packed_bytes_), config_.layout, config_.primary_bits, dim_});
  e.lower = s.lower;
  e.step = s.step;
  e.center = s.center;
  e.primary_bits = static_cast<std::uint8_t>(config_.primary_bits);
  e.residual_bits = static_cast<std::uint8_t>(config_.residual_bits);
  if (config_.residual_bits > 0) {
    const std::uint8_t* r = residuals_.data() + static_cast<std::size_t>(slot) * dim_;
    e.residual.assign(r, r + dim_);
  }
  return e;
}

float LvqStore::similarity(const Query& q, std::uint32_t slot) const {
  const auto s = scalars(slot);
  const PackedView view{{records_.data() + static_cast<std::size_t>(slot) * record_bytes_, packed_bytes_},
                        config_.layout, config_.primary_bits, dim_};
  if (q.metric == Metric::euclidean) {
    return detail::fused_scan_unchecked(view, q.shifted.data() + s.center * dim_, Metric::euclidean, s.lower, s.step);
  }
  return detail::fused_scan_unchecked(view, q.raw.data(), Metric::inner_product, s.lower, s.step) +
         q.constants[s.center];
}

std::vector<float> LvqStore::reconstruct(std::uint32_t slot) const {
  // Same arithmetic as mlvq_decode(encoded(slot), DecodeLevel::one, centers()).
  const auto s = scalars(slot);
  const PackedView view{record(slot).first(packed_bytes_), config_.layout, config_.primary_bits, dim_};
  const auto mu = centers_.center(s.center);
  std::vector<float> out(dim_);
  const double step = s.step;
  const double lower = s.lower;
  for (std::size_t j = 0; j < dim_; ++j) {
    out[j] = static_cast<float>(static_cast<double>(mu[j]) + (step * view.code(j) + lower));
  }
  return out;
}

float LvqStore::residual_similarity(const Query& q, std::uint32_t slot) const {
  if (config_.residual_bits == 0) throw StateError("store has no second-level codes");
  const auto s = scalars(slot);
  const auto codes = unpack(PackedView{record(slot).first(packed_bytes_), config_.layout, config_.primary_bits, dim_});
  const std::uint8_t* r = residuals_.data() + static_cast<std::size_t>(slot) * dim_;
  const double rstep = static_cast<double>(s.step) / static_cast<double>((1u << config_.residual_bits) - 1);
  const double rlower = -0.5 * static_cast<double>(s.step);
  float acc = 0.0f;
  if (q.metric == Metric::euclidean) {
    const float* qs = q.shifted.data() + s.center * dim_;
    for (std::size_t j = 0; j < dim_; ++j) {
      const double v = static_cast<double>(s.step) * codes[j] + s.lower + rstep * r[j] + rlower;
      const float t = qs[j] - static_cast<float>(v);
      acc += t * t;
    }
    return -acc;
  }
  for (std::size_t j = 0; j < dim_; ++j) {
    const double v = static_cast<double>(s.step) * codes[j] + s.lower + rstep * r[j] + rlower;
    acc += q.raw[j] * static_cast<float>(v);
  }
  return acc + q.constants[s.center];
}

std::vector<std::uint8_t> LvqStore::serialize() const {
  ByteWriter w;
  w.put_magic("SLVQ");
  w.put<std::uint32_t>(kFormatVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(dim_));
  w.put<std::uint64_t>(slots());
  w.put<std::uint8_t>(static_cast<std::uint8_t>(config_.primary_bits));
  w.put<std::uint8_t>(static_cast<std::uint8_t>(config_.residual_bits));
  w.put<std::uint8_t>(static_cast<std::uint8_t>(config_.layout));
  w.put<std::uint8_t>(static_cast<std::uint8_t>(metric_));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(centers_.count()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(record_bytes_));
  w.put<std::uint64_t>(centers_.fit_seed);
  w.put<std::uint64_t>(centers_.fit_iterations);
  w.put_array<float>(centers_.centers);
  const std::size_t n = slots();
  for (std::size_t i = 0; i < n; ++i) {
    w.put_array<std::uint8_t>(record(static_cast<std::uint32_t>(i)));
    if (config_.residual_bits > 0) {
      const std::size_t have = residuals_.size() / dim_;
      if (i < have) {
        w.put_array<std::uint8_t>(std::span<const std::uint8_t>(residuals_.data() + i * dim_, dim_));
      } else {
        for (std::size_t j = 0; j < dim_; ++j) w.put<std::uint8_t>(0);
      }
    }
  }
  return w.take();
}

LvqStore LvqStore::deserialize(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "lvq store");
  r.expect_magic("SLVQ");
  if (r.get<std::uint32_t>() != kFormatVersion) throw FormatError("lvq store: unsupported version");
  const std::size_t dim = r.get<std::uint32_t>();
  const auto n = r.get<std::uint64_t>();
  LvqStoreConfig config;
  config.primary_bits = r.get<std::uint8_t>();
  config.residual_bits = r.get<std::uint8_t>();
  const auto layout = r.get<std::uint8_t>();
  const auto metric = r.get<std::uint8_t>();
  if (layout > 1) throw FormatError("lvq store: bad layout tag");
  if (metric > 2) throw FormatError("lvq store: bad metric tag");
  config.layout = static_cast<Layout>(layout);
  const auto m = r.get<std::uint32_t>();
  const auto record_bytes = r.get<std::uint32_t>();
  CenterSet centers;
  centers.dim = dim;
  centers.fit_seed = r.get<std::uint64_t>();
  centers.fit_iterations = r.get<std::uint64_t>();
  centers.centers = r.get_array<float>(static_cast<std::size_t>(m) * dim);
  LvqStore s;
  try {
    s = LvqStore(dim, static_cast<Metric>(metric), config, std::move(centers));
  } catch (const ArgumentError& e) {
    throw FormatError(std::string("lvq store: ") + e.what());
  }
  if (s.record_bytes_ != record_bytes) throw FormatError("lvq store: record size does not match its shape");
  s.records_.reserve(n * record_bytes);
  if (config.residual_bits > 0) s.residuals_.reserve(n * dim);
  for (std::uint64_t i = 0; i < n; ++i) {
    const auto rec = r.get_bytes(record_bytes);
    s.records_.insert(s.records_.end(), rec.begin(), rec.end());
    if (config.residual_bits > 0) {
      const auto res = r.get_bytes(dim);
      s.residuals_.insert(s.residuals_.end(), res.begin(), res.end());
    }
  }
  r.expect_end();
  return s;
}

}  // namespace streamlvq
