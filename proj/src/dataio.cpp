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
#include "streamlvq/dataio.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>
#include <string>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "streamlvq/errors.hpp"

static_assert(std::endian::native == std::endian::little, "streamlvq assumes a little-endian host");

namespace streamlvq {

void VectorDataset::append(std::span<const float> v, std::uint64_t id) {
  if (empty() && dim == 0) dim = v.size();
  if (v.size() != dim) {
    throw ArgumentError("row has dimension " + std::to_string(v.size()) + ", dataset has " + std::to_string(dim));
  }
  values.insert(values.end(), v.begin(), v.end());
  ids.push_back(id);
}

VectorDataset VectorDataset::select(std::span<const std::size_t> rows) const {
  VectorDataset out(dim);
  out.values.reserve(rows.size() * dim);
  out.ids.reserve(rows.size());
  for (std::size_t r : rows) {
    if (r >= size()) throw ArgumentError("row index " + std::to_string(r) + " out of range");
    out.append(row(r), ids[r]);
  }
  return out;
}

VectorDataset VectorDataset::select_ids(std::span<const std::uint64_t> wanted) const {
  std::unordered_map<std::uint64_t, std::size_t> where;
  where.reserve(size());
  for (std::size_t i = 0; i < size(); ++i) where.emplace(ids[i], i);
  std::vector<std::size_t> rows;
  rows.reserve(wanted.size());
  for (auto id : wanted) {
    auto it = where.find(id);
    if (it == where.end()) throw ArgumentError("unknown id " + std::to_string(id));
    rows.push_back(it->second);
  }
  return select(rows);
}

void VectorDataset::validate() const {
  if (values.size() != ids.size() * dim) throw ArgumentError("value count does not match n * d");
  if (!empty() && dim == 0) throw ArgumentError("dimension must be at least 1");
  std::unordered_set<std::uint64_t> seen;
  seen.reserve(ids.size());
  for (auto id : ids) {
    if (!seen.insert(id).second) throw ArgumentError("duplicate id " + std::to_string(id));
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw ArgumentError("non-finite value in row " + std::to_string(i / dim));
    }
  }
}

VectorDataset VectorDataset::from_rows(const std::vector<std::vector<float>>& rows) {
  VectorDataset out(rows.empty() ? 0 : rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) out.append(rows[i], i);
  return out;
}

namespace {

template <typename T>
std::vector<std::uint8_t> encode_records(std::size_t dim, std::size_t n, const T* data) {
  std::vector<std::uint8_t> out(n * (4 + 4 * dim));
  std::uint8_t* p = out.data();
  const auto d32 = static_cast<std::uint32_t>(dim);
  for (std::size_t i = 0; i < n; ++i) {
    std::memcpy(p, &d32, 4);
    std::memcpy(p + 4, data + i * dim, 4 * dim);
    p += 4 + 4 * dim;
  }
  return out;
}

// Walks *vecs records and hands each payload to `sink`. Returns the common dimension.
template <typename Sink>
std::size_t decode_records(std::span<const std::uint8_t> bytes, Sink&& sink) {
  std::size_t offset = 0;
  std::size_t dim = 0;
  while (offset < bytes.size()) {
    if (bytes.size() - offset < 4) {
      throw FormatError("truncated record at byte offset " + std::to_string(offset));
    }
    std::uint32_t d = 0;
    std::memcpy(&d, bytes.data() + offset, 4);
    if (d == 0) throw FormatError("zero dimension in record at byte offset " + std::to_string(offset));
    if (dim == 0) {
      dim = d;
    } else if (d != dim) {
      throw FormatError("inconsistent dimension at byte offset " + std::to_string(offset) + ": expected " +
                        std::to_string(dim) + ", found " + std::to_string(d));
    }
    const std::size_t need = 4 + 4 * static_cast<std::size_t>(d);
    if (bytes.size() - offset < need) {
      throw FormatError("truncated record at byte offset " + std::to_string(offset));
    }
    sink(bytes.data() + offset + 4, d);
    offset += need;
  }
  return dim;
}

}  // namespace

std::vector<std::uint8_t> encode_fvecs(const VectorDataset& data) {
  return encode_records(data.dim, data.size(), data.values.data());
}

VectorDataset decode_fvecs(std::span<const std::uint8_t> bytes) {
  VectorDataset out;
  std::size_t row = 0;
  out.dim = decode_records(bytes, [&](const std::uint8_t* payload, std::uint32_t d) {
    const std::size_t base = out.values.size();
    out.values.resize(base + d);
    std::memcpy(out.values.data() + base, payload, 4 * static_cast<std::size_t>(d));
    for (std::size_t j = 0; j < d; ++j) {
      if (!std::isfinite(out.values[base + j])) {
        throw FormatError("non-finite value in record " + std::to_string(row) + ", component " + std::to_string(j));
      }
    }
    out.ids.push_back(row++);
  });
  return out;
}

std::vector<std::uint8_t> encode_ivecs(const std::vector<std::vector<std::int32_t>>& rows) {
  if (rows.empty()) return {};
  const std::size_t dim = rows.front().size();
  std::vector<std::int32_t> flat;
  flat.reserve(rows.size() * dim);
  for (const auto& r : rows) {
    if (r.size() != dim) throw ArgumentError("ivecs rows must share one dimension");
    flat.insert(flat.end(), r.begin(), r.end());
  }
  return encode_records(dim, rows.size(), flat.data());
}

std::vector<std::vector<std::int32_t>> decode_ivecs(std::span<const std::uint8_t> bytes) {
  std::vector<std::vector<std::int32_t>> rows;
  decode_records(bytes, [&](const std::uint8_t* payload, std::uint32_t d) {
    std::vector<std::int32_t> r(d);
    std::memcpy(r.data(), payload, 4 * static_cast<std::size_t>(d));
    rows.push_back(std::move(r));
  });
  return rows;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ArgumentError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("short write to " + path.string());
}

VectorDataset read_fvecs(const std::filesystem::path& path) { return decode_fvecs(read_file_bytes(path)); }

void write_fvecs(const std::filesystem::path& path, const VectorDataset& data) {
  write_file_bytes(path, encode_fvecs(data));
}

std::vector<std::vector<std::int32_t>> read_ivecs(const std::filesystem::path& path) {
  return decode_ivecs(read_file_bytes(path));
}

void write_ivecs(const std::filesystem::path& path, const std::vector<std::vector<std::int32_t>>& rows) {
  write_file_bytes(path, encode_ivecs(rows));
}

void write_raw_matrix(const std::filesystem::path& path, const VectorDataset& data) {
  std::vector<std::uint8_t> bytes(data.values.size() * 4);
  if (!bytes.empty()) std::memcpy(bytes.data(), data.values.data(), bytes.size());
  write_file_bytes(path, bytes);
  nlohmann::json sidecar = {{"n", data.size()}, {"d", data.dim}, {"dtype", "float32"}, {"ids", data.ids}};
  std::ofstream meta(path.string() + ".json");
  meta << sidecar.dump(2) << "\n";
}

VectorDataset read_raw_matrix(const std::filesystem::path& path) {
  std::ifstream meta(path.string() + ".json");
  if (!meta) throw ArgumentError("missing sidecar " + path.string() + ".json");
  nlohmann::json sidecar;
  try {
    meta >> sidecar;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("bad sidecar " + path.string() + ".json: " + e.what());
  }
  if (sidecar.value("dtype", std::string("float32")) != "float32") throw FormatError("unsupported dtype in sidecar");
  const auto n = sidecar.at("n").get<std::size_t>();
  const auto d = sidecar.at("d").get<std::size_t>();
  auto bytes = read_file_bytes(path);
  if (bytes.size() != n * d * 4) {
    throw FormatError("raw matrix holds " + std::to_string(bytes.size()) + " bytes, sidecar implies " +
                      std::to_string(n * d * 4));
  }
  VectorDataset out(d);
  out.values.resize(n * d);
  if (!bytes.empty()) std::memcpy(out.values.data(), bytes.data(), bytes.size());
  if (sidecar.contains("ids")) {
    out.ids = sidecar["ids"].get<std::vector<std::uint64_t>>();
  } else {
    out.ids.resize(n);
    std::iota(out.ids.begin(), out.ids.end(), 0);
  }
  try {
    out.validate();
  } catch (const ArgumentError& e) {
    throw FormatError(std::string("invalid raw matrix: ") + e.what());
  }
  return out;
}

VectorDataset load_dataset(const std::filesystem::path& path) {
  if (path.extension() == ".fvecs") return read_fvecs(path);
  return read_raw_matrix(path);
}

std::pair<VectorDataset, ClusterLabeling> generate_clustered_dataset(const ClusteredDatasetParams& p) {
  if (p.dim == 0) throw ArgumentError("dimension must be at least 1");
  if (p.clusters == 0) throw ArgumentError("cluster count must be at least 1");
  if (p.n < p.clusters) throw ArgumentError("n must be at least the cluster count");
  if (!(p.separation >= 0.0) || !std::isfinite(p.separation)) throw ArgumentError("separation must be finite and >= 0");

  std::mt19937_64 rng(p.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  ClusterLabeling labeling;
  labeling.dim = p.dim;
  labeling.centroids.resize(p.clusters * p.dim);
  for (auto& c : labeling.centroids) c = static_cast<float>(p.separation * normal(rng));

  // Every component gets at least one point; the rest are assigned uniformly.
  labeling.labels.resize(p.n);
  std::uniform_int_distribution<std::size_t> pick(0, p.clusters - 1);
  for (std::size_t i = 0; i < p.n; ++i) labeling.labels[i] = static_cast<std::uint32_t>(i < p.clusters ? i : pick(rng));
  std::shuffle(labeling.labels.begin(), labeling.labels.end(), rng);

  VectorDataset data(p.dim);
  data.values.resize(p.n * p.dim);
  data.ids.resize(p.n);
  for (std::size_t i = 0; i < p.n; ++i) {
    const auto center = labeling.centroid(labeling.labels[i]);
    auto row = data.row(i);
    for (std::size_t j = 0; j < p.dim; ++j) row[j] = static_cast<float>(center[j] + normal(rng));
    data.ids[i] = i;
  }
  return {std::move(data), std::move(labeling)};
}

std::vector<std::vector<std::size_t>> split_indices(std::size_t n, std::span<const double> fractions,
                                                    std::uint64_t seed) {
  double total = 0.0;
  for (double f : fractions) {
    if (!(f > 0.0)) throw ArgumentError("split fractions must be positive");
    total += f;
  }
  if (total > 1.0 + 1e-12) throw ArgumentError("split fractions sum to more than 1");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<std::vector<std::size_t>> parts;
  std::size_t cursor = 0;
  for (std::size_t p = 0; p < fractions.size(); ++p) {
    const auto count = static_cast<std::size_t>(std::floor(fractions[p] * static_cast<double>(n) + 1e-9));
    if (count == 0) throw ArgumentError("split part " + std::to_string(p) + " would be empty");
    parts.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(cursor),
                       order.begin() + static_cast<std::ptrdiff_t>(cursor + count));
    cursor += count;
  }
  return parts;
}

std::vector<VectorDataset> split_dataset(const VectorDataset& data, std::span<const double> fractions,
                                         std::uint64_t seed) {
  std::vector<VectorDataset> out;
  for (const auto& rows : split_indices(data.size(), fractions, seed)) out.push_back(data.select(rows));
  return out;
}

}  // namespace streamlvq
