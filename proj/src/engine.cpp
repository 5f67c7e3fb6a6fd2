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
#include "streamlvq/engine.hpp"

#include <cstring>

#include "streamlvq/parallel.hpp"
#include "streamlvq/quantize.hpp"
#include "streamlvq/store.hpp"

namespace streamlvq {

std::string EncodingConfig::label() const {
  if (!quantized()) return "float32";
  std::string out = centers > 1 ? "M" + std::to_string(centers) + "-LVQ-" : "LVQ-";
  out += std::to_string(primary_bits);
  if (residual_bits > 0) out += "x" + std::to_string(residual_bits);
  return out;
}

CenterSet fit_centers(const VectorDataset& fit, Metric metric, const EncodingConfig& encoding, std::uint64_t seed) {
  if (fit.empty()) throw ArgumentError("cannot fit centers on an empty dataset");
  if (encoding.centers == 0) throw ArgumentError("center count must be at least 1");
  const VectorDataset* source = &fit;
  VectorDataset unit;
  if (metric == Metric::cosine) {
    unit = fit;
    for (std::size_t i = 0; i < unit.size(); ++i) normalize_in_place(unit.row(i));
    source = &unit;
  }
  const auto mean = compute_mean(*source, encoding.mean_fraction, seed);
  if (encoding.centers == 1) return CenterSet::from_mean(mean.values);
  KMeansOptions options;
  options.seed = seed;
  options.initial_centers.push_back(mean.values);
  return kmeans_fit(*source, encoding.centers, options);
}

std::vector<SearchResult> AnyIndex::search_batch(const VectorDataset& queries, std::size_t k, std::size_t window,
                                                 bool rerank) const {
  std::vector<SearchResult> out(queries.size());
  parallel_for(queries.size(), [&](std::size_t i) { out[i] = search(queries.row(i), k, window, rerank); });
  return out;
}

namespace {

template <typename Store>
class IndexImpl final : public AnyIndex {
 public:
  explicit IndexImpl(DynamicIndex<Store> index) : index_(std::move(index)) {}

  std::size_t dim() const override { return index_.store().dim(); }
  Metric metric() const override { return index_.store().metric(); }
  std::size_t size() const override { return index_.size(); }
  bool has_residuals() const override { return index_.store().has_residuals(); }
  const ProximityGraph& graph() const override { return index_.graph(); }

  void build(const VectorDataset& data) override { index_.build(data); }
  void insert(std::span<const float> x, std::uint64_t id) override { index_.insert(x, id); }
  void insert_batch(const VectorDataset& batch) override { index_.insert_batch(batch); }
  void remove(std::uint64_t id) override { index_.remove(id); }
  std::size_t consolidate() override { return index_.consolidate(); }
  SearchResult search(std::span<const float> q, std::size_t k, std::size_t window, bool rerank) const override {
    return index_.search(q, k, window, rerank);
  }
  std::vector<std::uint64_t> live_ids() const override { return index_.live_ids(); }
  void save(const std::filesystem::path& prefix) const override { index_.save(prefix); }

 private:
  DynamicIndex<Store> index_;
};

}  // namespace

std::unique_ptr<AnyIndex> make_index(std::size_t dim, Metric metric, const EncodingConfig& encoding,
                                     const CenterSet& centers, const IndexParams& params) {
  if (!encoding.quantized()) {
    if (encoding.residual_bits != 0) throw ArgumentError("second-level bits need a quantized first level");
    return std::make_unique<IndexImpl<FloatStore>>(DynamicIndex<FloatStore>(FloatStore(dim, metric), params));
  }
  LvqStoreConfig config;
  config.primary_bits = encoding.primary_bits;
  config.residual_bits = encoding.residual_bits;
  config.layout = encoding.layout;
  return std::make_unique<IndexImpl<LvqStore>>(
      DynamicIndex<LvqStore>(LvqStore(dim, metric, config, centers), params));
}

std::unique_ptr<AnyIndex> load_index(const std::filesystem::path& prefix) {
  const auto bytes = read_file_bytes(std::filesystem::path(prefix.string() + ".vectors"));
  if (bytes.size() < 4) throw FormatError("index vectors: file too short");
  if (std::memcmp(bytes.data(), "SLVF", 4) == 0) {
    return std::make_unique<IndexImpl<FloatStore>>(DynamicIndex<FloatStore>::load(prefix));
  }
  if (std::memcmp(bytes.data(), "SLVQ", 4) == 0) {
    return std::make_unique<IndexImpl<LvqStore>>(DynamicIndex<LvqStore>::load(prefix));
  }
  throw FormatError("index vectors: unknown store format");
}

}  // namespace streamlvq
