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

// Bit-packed code layouts.
//
// Sequential: code j occupies bits [j*bits, (j+1)*bits) of a little-endian
// bit stream, i.e. eight 4-bit codes per 32-bit word, low nibble first.
//
// Turbo: 64-byte blocks viewed as sixteen 32-bit words. With 4-bit codes a
// block holds 128 dimensions and block-local dimension i lives in word
// i % 16, nibble i / 16. With 8-bit codes a block holds 64 dimensions and
// block-local dimension i lives in word i % 16, byte i / 16. Unpacking sixteen
// consecutive dimensions is then a single shift and mask over all words.
//
// Both layouts pad the buffer with zeros to a multiple of 32 bytes.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "streamlvq/metric.hpp"

namespace streamlvq {

enum class Layout : std::uint8_t { sequential = 0, turbo = 1 };

Layout parse_layout(std::string_view name);
std::string to_string(Layout layout);

struct SlotAddress {
  std::size_t block = 0;
  std::uint32_t word = 0;  // 32-bit word within the 64-byte block
  std::uint32_t sub = 0;   // nibble (4-bit) or byte (8-bit) index within the word

  friend bool operator==(const SlotAddress&, const SlotAddress&) = default;
};

inline constexpr std::size_t kBlockBytes = 64;
inline constexpr std::size_t kPadBytes = 32;

bool layout_supports(unsigned bits);
std::size_t dims_per_block(unsigned bits, Layout layout);
SlotAddress dim_slot_map(std::size_t j, unsigned bits, Layout layout);
std::size_t word_offset(const SlotAddress& slot);
std::size_t packed_size(std::size_t dim, unsigned bits, Layout layout);

struct PackedView {
  std::span<const std::uint8_t> bytes;
  Layout layout = Layout::sequential;
  unsigned bits = 4;
  std::size_t dim = 0;

  std::uint32_t code(std::size_t j) const;
};

class PackedCodes {
 public:
  PackedCodes() = default;
  PackedCodes(Layout layout, unsigned bits, std::size_t dim, std::vector<std::uint8_t> bytes);

  Layout layout() const { return layout_; }
  unsigned bits() const { return bits_; }
  std::size_t dim() const { return dim_; }
  const std::vector<std::uint8_t>& bytes() const { return bytes_; }
  PackedView view() const { return {bytes_, layout_, bits_, dim_}; }

 private:
  Layout layout_ = Layout::sequential;
  unsigned bits_ = 4;
  std::size_t dim_ = 0;
  std::vector<std::uint8_t> bytes_;
};

/// Writes codes into `out` (packed_size bytes), zeroing every slot first.
void pack_into(std::span<const std::uint16_t> codes, unsigned bits, Layout layout, std::span<std::uint8_t> out);
PackedCodes pack(std::span<const std::uint16_t> codes, unsigned bits, Layout layout);

std::vector<std::uint16_t> unpack(const PackedView& packed, std::size_t first, std::size_t count);
std::vector<std::uint16_t> unpack(const PackedView& packed);

/// Similarity between a query and a packed vector reconstructed as
/// step * code + lower, without materializing the reconstruction.
///   euclidean:      -sum_j (query_j - step * code_j - lower)^2
///   inner_product:   sum_j query_j * (step * code_j + lower)
/// Cosine is not accepted here; callers normalize and use inner_product.
float fused_similarity_scan(const PackedView& packed, std::span<const float> query, Metric metric, float lower,
                            float step);

/// Scalar reference for fused_similarity_scan; identical semantics on every platform.
float fused_similarity_scan_portable(const PackedView& packed, std::span<const float> query, Metric metric,
                                     float lower, float step);

namespace detail {
// fused_similarity_scan without argument validation, for hot loops over
// buffers the caller already laid out.
float fused_scan_unchecked(const PackedView& packed, const float* query, Metric metric, float lower, float step);
}  // namespace detail

/// True when fused_similarity_scan uses a wide-vector path for this layout and bit width.
bool fused_scan_accelerated(Layout layout, unsigned bits);

}  // namespace streamlvq
