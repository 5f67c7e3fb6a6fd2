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

// A dynamic index pairing a proximity graph with a vector store and mapping
// caller-facing 64-bit ids to internal slots. Slots of consolidated nodes
// are reused by later insertions.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "streamlvq/container.hpp"
#include "streamlvq/dataio.hpp"
#include "streamlvq/errors.hpp"
#include "streamlvq/graph.hpp"

namespace streamlvq {

struct IndexParams {
  std::size_t max_degree = 64;
  std::size_t build_window = 200;
  float alpha = 0.0f;  // zero selects default_alpha(metric)
  PruneSchedule prune = PruneSchedule::staged;
  std::uint64_t seed = 0;
};

struct SearchResult {
  std::vector<std::uint64_t> ids;
  std::vector<float> similarities;
  std::size_t distance_computations = 0;
};

template <typename Store>
class DynamicIndex {
 public:
  DynamicIndex(Store store, IndexParams params)
      : store_(std::move(store)), params_(params), graph_(params.max_degree, resolved_alpha(), params.prune) {}

  const Store& store() const { return store_; }
  Store& store() { return store_; }
  const ProximityGraph& graph() const { return graph_; }
  const IndexParams& params() const { return params_; }
  float alpha() const { return resolved_alpha(); }
  std::size_t size() const { return graph_.live_count(); }

  /// Initial two-pass build; the index must be empty.
  void build(const VectorDataset& data) {
    if (graph_.node_count() != 0) throw StateError("build needs an empty index");
    data.validate();
    check_dim(data.dim);
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (slot_of_.count(data.ids[i])) throw ArgumentError("duplicate id " + std::to_string(data.ids[i]));
      slot_of_.emplace(data.ids[i], static_cast<std::uint32_t>(i));
      store_.set(static_cast<std::uint32_t>(i), data.row(i));
    }
    id_of_.assign(data.ids.begin(), data.ids.end());
    GraphBuildParams gp;
    gp.max_degree = params_.max_degree;
    gp.build_window = params_.build_window;
    gp.alphas = {1.0f, resolved_alpha()};
    gp.prune = params_.prune;
    gp.seed = params_.seed;
    graph_ = build_graph(store_, data.size(), [&](std::uint32_t i) { return data.row(i); }, gp);
  }

  void insert(std::span<const float> x, std::uint64_t id) {
    const auto slot = claim_slot(x, id);
    update_node(graph_, store_, slot, x, resolved_alpha(), params_.build_window, params_.max_degree);
  }

  /// Inserts rows in order. Neighbor lists may overflow R inside the batch
  /// and are pruned back before returning.
  void insert_batch(const VectorDataset& batch) {
    batch.validate();
    check_dim(batch.dim);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      if (slot_of_.count(batch.ids[i])) throw ArgumentError("id " + std::to_string(batch.ids[i]) + " is already live");
    }
    const auto capacity = static_cast<std::size_t>(kBatchSlack * static_cast<double>(params_.max_degree));
    std::vector<std::uint32_t> touched;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const auto slot = claim_slot(batch.row(i), batch.ids[i]);
      update_node(graph_, store_, slot, batch.row(i), resolved_alpha(), params_.build_window, capacity);
      touched.push_back(slot);
      for (const auto n : graph_.neighbors(slot)) touched.push_back(n);
    }
    std::sort(touched.begin(), touched.end());
    touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
    for (const auto s : touched) {
      if (graph_.present(s)) detail::reprune_to_degree(graph_, store_, s, resolved_alpha());
    }
  }

  void remove(std::uint64_t id) {
    const auto it = slot_of_.find(id);
    if (it == slot_of_.end()) throw ArgumentError("id " + std::to_string(id) + " is not live");
    tombstone_node(graph_, store_, it->second);
    slot_of_.erase(it);
  }

  bool contains(std::uint64_t id) const { return slot_of_.count(id) != 0; }

  /// Returns the number of nodes removed.
  std::size_t consolidate() {
    const auto removed = consolidate_graph(graph_, store_);
    for (const auto s : removed) free_slots_.push_back(s);
    std::sort(free_slots_.begin(), free_slots_.end(), std::greater<>());
    return removed.size();
  }

  SearchResult search(std::span<const float> q, std::size_t k, std::size_t window, bool rerank_results = false) const {
    if (k == 0) throw ArgumentError("k must be at least 1");
    if (window < k) throw ArgumentError("search window must be at least k");
    check_dim(q.size());
    SearchResult out;
    if (graph_.live_count() == 0) return out;
    const auto query = store_.prepare(q);
    SearchStats stats;
    const auto pool = greedy_search(graph_, store_, query, window, &stats);
    std::vector<Neighbor> top;
    if (rerank_results) {
      const auto live = live_top_k(graph_, pool, pool.size());
      top = rerank(std::span<const Neighbor>(live), query, store_, std::min(k, live.size()));
      stats.distance_computations += live.size();
    } else {
      top = live_top_k(graph_, pool, k);
    }
    out.distance_computations = stats.distance_computations;
    for (const auto& n : top) {
      out.ids.push_back(id_of_[n.id]);
      out.similarities.push_back(n.similarity);
    }
    return out;
  }

  std::vector<std::uint64_t> live_ids() const {
    std::vector<std::uint64_t> out;
    out.reserve(slot_of_.size());
    for (const auto s : graph_.live_ids()) out.push_back(id_of_[s]);
    return out;
  }

  std::uint32_t slot(std::uint64_t id) const {
    const auto it = slot_of_.find(id);
    if (it == slot_of_.end()) throw ArgumentError("id " + std::to_string(id) + " is not live");
    return it->second;
  }
  std::uint64_t id_at(std::uint32_t slot) const { return id_of_.at(slot); }

  void save(const std::filesystem::path& prefix) const {
    write_file_bytes(with_suffix(prefix, ".graph"), graph_.serialize());
    write_file_bytes(with_suffix(prefix, ".vectors"), store_.serialize());
    ByteWriter w;
    w.put_magic("SLVI");
    w.put<std::uint32_t>(2);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(params_.max_degree));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(params_.build_window));
    w.put<float>(params_.alpha);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(params_.prune));
    w.put<std::uint64_t>(params_.seed);
    w.put<std::uint64_t>(id_of_.size());
    w.put_array<std::uint64_t>(id_of_);
    write_file_bytes(with_suffix(prefix, ".ids"), w.bytes());
  }

  static DynamicIndex load(const std::filesystem::path& prefix) {
    auto graph = ProximityGraph::deserialize(read_file_bytes(with_suffix(prefix, ".graph")));
    auto store = Store::deserialize(read_file_bytes(with_suffix(prefix, ".vectors")));
    const auto bytes = read_file_bytes(with_suffix(prefix, ".ids"));
    ByteReader r(bytes, "index ids");
    r.expect_magic("SLVI");
    const auto version = r.get<std::uint32_t>();
    if (version != 1 && version != 2) throw FormatError("index ids: unsupported version");
    IndexParams params;
    params.max_degree = r.get<std::uint32_t>();
    params.build_window = r.get<std::uint32_t>();
    params.alpha = r.get<float>();
    params.prune = graph.prune_schedule();
    if (version >= 2 && r.get<std::uint8_t>() != static_cast<std::uint8_t>(params.prune)) {
      throw FormatError("index ids: prune schedule does not match the graph");
    }
    params.seed = r.get<std::uint64_t>();
    const auto n = r.get<std::uint64_t>();
    auto ids = r.get_array<std::uint64_t>(n);
    r.expect_end();
    if (n != graph.slot_count()) throw FormatError("index ids: slot count does not match the graph");
    DynamicIndex index(std::move(store), params);
    index.graph_ = std::move(graph);
    index.id_of_ = std::move(ids);
    for (std::uint32_t s = 0; s < n; ++s) {
      if (index.graph_.live(s)) index.slot_of_.emplace(index.id_of_[s], s);
      if (!index.graph_.present(s)) index.free_slots_.push_back(s);
    }
    std::sort(index.free_slots_.begin(), index.free_slots_.end(), std::greater<>());
    return index;
  }

 private:
  static std::filesystem::path with_suffix(const std::filesystem::path& prefix, const char* suffix) {
    return std::filesystem::path(prefix.string() + suffix);
  }

  float resolved_alpha() const { return params_.alpha > 0.0f ? params_.alpha : default_alpha(store_.metric()); }

  void check_dim(std::size_t d) const {
    if (d != store_.dim()) {
      throw ArgumentError("dimension mismatch: " + std::to_string(d) + " vs " + std::to_string(store_.dim()));
    }
  }

  std::uint32_t claim_slot(std::span<const float> x, std::uint64_t id) {
    check_dim(x.size());
    if (slot_of_.count(id)) throw ArgumentError("id " + std::to_string(id) + " is already live");
    std::uint32_t slot;
    if (!free_slots_.empty()) {
      slot = free_slots_.back();
      free_slots_.pop_back();
    } else {
      slot = static_cast<std::uint32_t>(graph_.slot_count());
    }
    store_.set(slot, x);
    if (id_of_.size() <= slot) id_of_.resize(static_cast<std::size_t>(slot) + 1, 0);
    id_of_[slot] = id;
    graph_.add_node(slot);
    slot_of_.emplace(id, slot);
    return slot;
  }

  Store store_;
  IndexParams params_;
  ProximityGraph graph_;
  std::unordered_map<std::uint64_t, std::uint32_t> slot_of_;
  std::vector<std::uint64_t> id_of_;
  std::vector<std::uint32_t> free_slots_;  // descending, so pop_back yields the smallest
};

}  // namespace streamlvq
