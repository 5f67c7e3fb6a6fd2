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
#include "streamlvq/container.hpp"

#include <string>

namespace streamlvq {

void ByteWriter::put_varint(std::uint64_t value) {
  while (value >= 0x80) {
    bytes_.push_back(static_cast<std::uint8_t>(value | 0x80));
    value >>= 7;
  }
  bytes_.push_back(static_cast<std::uint8_t>(value));
}

void ByteReader::expect_magic(std::string_view magic) {
  const auto got = get_bytes(magic.size());
  if (std::string_view(reinterpret_cast<const char*>(got.data()), got.size()) != magic) {
    throw FormatError(std::string(what_) + ": bad magic, expected '" + std::string(magic) + "'");
  }
}

std::uint64_t ByteReader::get_varint() {
  std::uint64_t value = 0;
  for (unsigned shift = 0; shift < 64; shift += 7) {
    const auto byte = get<std::uint8_t>();
    value |= static_cast<std::uint64_t>(byte & 0x7f) << shift;
    if ((byte & 0x80) == 0) return value;
  }
  throw FormatError(std::string(what_) + ": varint longer than 10 bytes at offset " + std::to_string(pos_));
}

void ByteReader::expect_end() const {
  if (remaining() != 0) {
    throw FormatError(std::string(what_) + ": " + std::to_string(remaining()) + " trailing bytes");
  }
}

void ByteReader::truncated() const {
  throw FormatError(std::string(what_) + ": truncated at offset " + std::to_string(pos_));
}

}  // namespace streamlvq
