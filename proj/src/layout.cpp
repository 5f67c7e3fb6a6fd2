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
#include "streamlvq/layout.hpp"

#include <algorithm>
#include <cstring>

#if defined(__AVX512F__) && defined(__AVX512BW__)
#include <immintrin.h>
#define STREAMLVQ_HAVE_AVX512 1
#endif

#include "streamlvq/errors.hpp"

namespace streamlvq {

Layout parse_layout(std::string_view name) {
  if (name == "sequential") return Layout::sequential;
  if (name == "turbo") return Layout::turbo;
  throw ArgumentError("unknown layout '" + std::string(name) + "' (expected sequential or turbo)");
}

std::string to_string(Layout layout) { return layout == Layout::turbo ? "turbo" : "sequential"; }

bool layout_supports(unsigned bits) { return bits == 4 || bits == 8; }

namespace {

void require_bits(unsigned bits) {
  if (!layout_supports(bits)) {
    throw ArgumentError("packed layouts support 4 or 8 bits, got " + std::to_string(bits));
  }
}

inline std::uint32_t load_word(const std::uint8_t* p) {
  std::uint32_t w;
  std::memcpy(&w, p, 4);
  return w;
}

inline void store_word(std::uint8_t* p, std::uint32_t w) { std::memcpy(p, &w, 4); }

}  // namespace

std::size_t dims_per_block(unsigned bits, Layout layout) {
  require_bits(bits);
  (void)layout;
  return kBlockBytes * 8 / bits;
}

SlotAddress dim_slot_map(std::size_t j, unsigned bits, Layout layout) {
  require_bits(bits);
  SlotAddress slot;
  if (layout == Layout::sequential) {
    const std::size_t bit = j * bits;
    slot.block = bit / 512;
    slot.word = static_cast<std::uint32_t>((bit % 512) / 32);
    slot.sub = static_cast<std::uint32_t>((bit % 32) / bits);
  } else {
    const std::size_t per_block = kBlockBytes * 8 / bits;
    const std::size_t i = j % per_block;
    slot.block = j / per_block;
    slot.word = static_cast<std::uint32_t>(i % 16);
    slot.sub = static_cast<std::uint32_t>(i / 16);
  }
  return slot;
}

std::size_t word_offset(const SlotAddress& slot) { return slot.block * kBlockBytes + slot.word * 4; }

std::size_t packed_size(std::size_t dim, unsigned bits, Layout layout) {
  require_bits(bits);
  if (dim == 0) return 0;
  std::size_t raw;
  if (layout == Layout::sequential) {
    raw = (dim * bits + 7) / 8;
  } else {
    const std::size_t per_block = kBlockBytes * 8 / bits;
    raw = (dim + per_block - 1) / per_block * kBlockBytes;
  }
  return (raw + kPadBytes - 1) / kPadBytes * kPadBytes;
}

std::uint32_t PackedView::code(std::size_t j) const {
  if (j >= dim) throw ArgumentError("dimension " + std::to_string(j) + " out of range for d=" + std::to_string(dim));
  const auto slot = dim_slot_map(j, bits, layout);
  const std::uint32_t mask = (1u << bits) - 1u;
  return (load_word(bytes.data() + word_offset(slot)) >> (slot.sub * bits)) & mask;
}

PackedCodes::PackedCodes(Layout layout, unsigned bits, std::size_t dim, std::vector<std::uint8_t> bytes)
    : layout_(layout), bits_(bits), dim_(dim), bytes_(std::move(bytes)) {
  if (bytes_.size() != packed_size(dim, bits, layout)) throw ArgumentError("packed buffer has the wrong size");
}

void pack_into(std::span<const std::uint16_t> codes, unsigned bits, Layout layout, std::span<std::uint8_t> out) {
  require_bits(bits);
  if (out.size() != packed_size(codes.size(), bits, layout)) throw ArgumentError("output buffer has the wrong size");
  const std::uint32_t limit = 1u << bits;
  for (std::size_t j = 0; j < codes.size(); ++j) {
    if (codes[j] >= limit) {
      throw ArgumentError("code at index " + std::to_string(j) + " is " + std::to_string(codes[j]) +
                          ", exceeds the " + std::to_string(bits) + "-bit range");
    }
  }
  std::fill(out.begin(), out.end(), std::uint8_t{0});
  for (std::size_t j = 0; j < codes.size(); ++j) {
    const auto slot = dim_slot_map(j, bits, layout);
    std::uint8_t* p = out.data() + word_offset(slot);
    store_word(p, load_word(p) | (static_cast<std::uint32_t>(codes[j]) << (slot.sub * bits)));
  }
}

PackedCodes pack(std::span<const std::uint16_t> codes, unsigned bits, Layout layout) {
  std::vector<std::uint8_t> bytes(packed_size(codes.size(), bits, layout));
  pack_into(codes, bits, layout, bytes);
  return PackedCodes(layout, bits, codes.size(), std::move(bytes));
}

std::vector<std::uint16_t> unpack(const PackedView& packed, std::size_t first, std::size_t count) {
  if (first > packed.dim || count > packed.dim - first) {
    throw ArgumentError("unpack range [" + std::to_string(first) + ", " + std::to_string(first + count) +
                        ") exceeds d=" + std::to_string(packed.dim));
  }
  std::vector<std::uint16_t> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = static_cast<std::uint16_t>(packed.code(first + i));
  return out;
}

std::vector<std::uint16_t> unpack(const PackedView& packed) { return unpack(packed, 0, packed.dim); }

namespace {

// Accumulates one reconstructed component. Kept as a struct so the portable
// kernels for both layouts share the arithmetic.
struct ScalarAccumulator {
  Metric metric;
  float lower;
  float step;
  float acc = 0.0f;

  void add(float q, std::uint32_t code) {
    const float x = step * static_cast<float>(code) + lower;
    if (metric == Metric::euclidean) {
      const float t = q - x;
      acc += t * t;
    } else {
      acc += q * x;
    }
  }
  float result() const { return metric == Metric::euclidean ? -acc : acc; }
};

void check_scan_args(const PackedView& packed, std::span<const float> query, Metric metric) {
  if (query.size() != packed.dim) {
    throw ArgumentError("query dimension " + std::to_string(query.size()) + " does not match packed d=" +
                        std::to_string(packed.dim));
  }
  if (metric == Metric::cosine) throw ArgumentError("fused scan expects euclidean or inner_product");
  require_bits(packed.bits);
  if (packed.bytes.size() < packed_size(packed.dim, packed.bits, packed.layout)) {
    throw ArgumentError("packed buffer is shorter than its layout requires");
  }
}

#ifdef STREAMLVQ_HAVE_AVX512

inline __mmask16 tail_mask(std::size_t remaining) {
  return remaining >= 16 ? static_cast<__mmask16>(0xFFFF) : static_cast<__mmask16>((1u << remaining) - 1u);
}

struct WideAccumulator {
  Metric metric;
  __m512 lower;
  __m512 step;
  __m512 acc = _mm512_setzero_ps();

  WideAccumulator(Metric m, float lo, float st) : metric(m), lower(_mm512_set1_ps(lo)), step(_mm512_set1_ps(st)) {}

  void add(__m512i codes, const float* q, __mmask16 mask) {
    const __m512 x = _mm512_fmadd_ps(_mm512_cvtepi32_ps(codes), step, lower);
    const __m512 qv = _mm512_maskz_loadu_ps(mask, q);
    if (metric == Metric::euclidean) {
      const __m512 t = _mm512_maskz_sub_ps(mask, qv, x);
      acc = _mm512_fmadd_ps(t, t, acc);
    } else {
      acc = _mm512_fmadd_ps(qv, x, acc);
    }
  }
  float result() const {
    const float s = _mm512_reduce_add_ps(acc);
    return metric == Metric::euclidean ? -s : s;
  }
};

float scan_turbo_avx512(const PackedView& p, const float* q, Metric metric, float lower, float step) {
  WideAccumulator acc(metric, lower, step);
  const unsigned bits = p.bits;
  const __m512i mask = _mm512_set1_epi32(static_cast<int>((1u << bits) - 1u));
  const std::size_t per_block = kBlockBytes * 8 / bits;
  const std::size_t groups = 32 / bits;
  for (std::size_t base = 0, block = 0; base < p.dim; base += per_block, ++block) {
    __m512i words = _mm512_loadu_si512(p.bytes.data() + block * kBlockBytes);
    for (std::size_t g = 0; g < groups; ++g) {
      const std::size_t dim0 = base + g * 16;
      if (dim0 >= p.dim) break;
      acc.add(_mm512_and_si512(words, mask), q + dim0, tail_mask(p.dim - dim0));
      words = bits == 4 ? _mm512_srli_epi32(words, 4) : _mm512_srli_epi32(words, 8);
    }
  }
  return acc.result();
}

float scan_sequential_avx512(const PackedView& p, const float* q, Metric metric, float lower, float step) {
  WideAccumulator acc(metric, lower, step);
  const std::uint8_t* bytes = p.bytes.data();
  if (p.bits == 8) {
    for (std::size_t dim0 = 0; dim0 < p.dim; dim0 += 16) {
      const __m128i raw = _mm_loadu_si128(reinterpret_cast<const __m128i*>(bytes + dim0));
      acc.add(_mm512_cvtepu8_epi32(raw), q + dim0, tail_mask(p.dim - dim0));
    }
  } else {
    // Sixteen 4-bit codes live in 8 bytes: duplicate each byte into two lanes,
    // apply a per-lane variable shift of 0 or 4, then mask.
    const __m512i shifts = _mm512_set_epi32(4, 0, 4, 0, 4, 0, 4, 0, 4, 0, 4, 0, 4, 0, 4, 0);
    const __m512i nibble = _mm512_set1_epi32(0xF);
    for (std::size_t dim0 = 0; dim0 < p.dim; dim0 += 16) {
      const __m128i raw = _mm_loadl_epi64(reinterpret_cast<const __m128i*>(bytes + dim0 / 2));
      const __m512i wide = _mm512_cvtepu8_epi32(_mm_unpacklo_epi8(raw, raw));
      acc.add(_mm512_and_si512(_mm512_srlv_epi32(wide, shifts), nibble), q + dim0, tail_mask(p.dim - dim0));
    }
  }
  return acc.result();
}

#endif

}  // namespace

float fused_similarity_scan_portable(const PackedView& packed, std::span<const float> query, Metric metric,
                                     float lower, float step) {
  check_scan_args(packed, query, metric);
  ScalarAccumulator acc{metric, lower, step};
  const unsigned bits = packed.bits;
  const std::uint32_t mask = (1u << bits) - 1u;
  const std::uint8_t* bytes = packed.bytes.data();
  if (packed.layout == Layout::turbo) {
    const std::size_t per_block = kBlockBytes * 8 / bits;
    const std::size_t groups = 32 / bits;
    for (std::size_t base = 0, block = 0; base < packed.dim; base += per_block, ++block) {
      std::uint32_t words[16];
      std::memcpy(words, bytes + block * kBlockBytes, sizeof(words));
      for (std::size_t g = 0; g < groups; ++g) {
        const std::size_t dim0 = base + g * 16;
        if (dim0 >= packed.dim) break;
        const std::size_t lanes = std::min<std::size_t>(16, packed.dim - dim0);
        for (std::size_t w = 0; w < lanes; ++w) acc.add(query[dim0 + w], (words[w] >> (g * bits)) & mask);
      }
    }
  } else {
    const std::size_t per_word = 32 / bits;
    for (std::size_t dim0 = 0; dim0 < packed.dim; dim0 += per_word) {
      const std::uint32_t word = load_word(bytes + dim0 * bits / 8);
      const std::size_t lanes = std::min(per_word, packed.dim - dim0);
      for (std::size_t s = 0; s < lanes; ++s) acc.add(query[dim0 + s], (word >> (s * bits)) & mask);
    }
  }
  return acc.result();
}

bool fused_scan_accelerated(Layout layout, unsigned bits) {
#ifdef STREAMLVQ_HAVE_AVX512
  (void)layout;
  return layout_supports(bits);
#else
  (void)layout;
  (void)bits;
  return false;
#endif
}

float detail::fused_scan_unchecked(const PackedView& packed, const float* query, Metric metric, float lower,
                                   float step) {
#ifdef STREAMLVQ_HAVE_AVX512
  if (packed.layout == Layout::turbo) return scan_turbo_avx512(packed, query, metric, lower, step);
  return scan_sequential_avx512(packed, query, metric, lower, step);
#else
  return fused_similarity_scan_portable(packed, {query, packed.dim}, metric, lower, step);
#endif
}

float fused_similarity_scan(const PackedView& packed, std::span<const float> query, Metric metric, float lower,
                            float step) {
  check_scan_args(packed, query, metric);
  return detail::fused_scan_unchecked(packed, query.data(), metric, lower, step);
}

}  // namespace streamlvq
