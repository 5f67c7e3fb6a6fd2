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

// Dynamic proximity graph: greedy search, alpha-pruning, two-pass build,
// insertion, lazy deletion and consolidation. The algorithms are templates
// over a vector store (see store.hpp); the graph itself only knows ids.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "streamlvq/distance.hpp"
#include "streamlvq/errors.hpp"
#include "streamlvq/metric.hpp"

namespace streamlvq {

inline constexpr std::uint32_t kNoNode = std::numeric_limits<std::uint32_t>::max();

/// single: one pass of the pruning rule at the configured alpha.
/// staged: a strict pass at alpha = 1 first, then the remaining slots are
/// filled at the configured alpha. Long edges picked in the strict pass are
/// not crowded out by near neighbors, which matters when the data has
/// well-separated clusters.
enum class PruneSchedule : std::uint8_t { single = 0, staged = 1 };

PruneSchedule parse_prune_schedule(std::string_view name);
std::string to_string(PruneSchedule schedule);

class ProximityGraph {
 public:
  explicit ProximityGraph(std::size_t max_degree = 64, float alpha = 1.2f,
                          PruneSchedule schedule = PruneSchedule::staged);

  std::size_t max_degree() const { return max_degree_; }
  float alpha() const { return alpha_; }
  void set_alpha(float alpha) { alpha_ = alpha; }
  PruneSchedule prune_schedule() const { return schedule_; }

  std::size_t slot_count() const { return state_.size(); }
  std::size_t node_count() const { return nodes_; }
  std::size_t live_count() const { return nodes_ - tombstones_; }
  std::size_t tombstone_count() const { return tombstones_; }

  bool present(std::uint32_t id) const { return id < state_.size() && state_[id] != kAbsent; }
  bool live(std::uint32_t id) const { return id < state_.size() && state_[id] == kLive; }
  bool tombstoned(std::uint32_t id) const { return id < state_.size() && state_[id] == kTombstone; }

  std::uint32_t entry_point() const { return entry_; }
  void set_entry_point(std::uint32_t id);

  std::span<const std::uint32_t> neighbors(std::uint32_t id) const { return out_[id]; }
  std::span<const std::uint32_t> in_neighbors(std::uint32_t id) const { return in_[id]; }

  /// Adds an edge-less live node. The first node becomes the entry point.
  void add_node(std::uint32_t id);

  /// Replaces N(id). Targets must be present, distinct and not id itself;
  /// at most `capacity` of them (max_degree() when zero).
  void set_neighbors(std::uint32_t id, std::span<const std::uint32_t> targets, std::size_t capacity = 0);

  /// Appends one edge; no-op when it already exists.
  void add_edge(std::uint32_t from, std::uint32_t to, std::size_t capacity = 0);

  /// Lazy deletion. A tombstoned entry point is handed to a live node.
  void tombstone(std::uint32_t id);

  /// Physically removes a node and every edge touching it.
  void remove_node(std::uint32_t id);

  std::vector<std::uint32_t> tombstoned_ids() const;
  std::vector<std::uint32_t> live_ids() const;

  /// Throws StateError describing the first violated structural invariant.
  void check_invariants() const;

  std::vector<std::uint8_t> serialize() const;
  static ProximityGraph deserialize(std::span<const std::uint8_t> bytes);

  friend bool operator==(const ProximityGraph& a, const ProximityGraph& b);

 private:
  static constexpr std::uint8_t kAbsent = 0;
  static constexpr std::uint8_t kLive = 1;
  static constexpr std::uint8_t kTombstone = 2;

  void grow(std::uint32_t id);
  void drop_in_edge(std::uint32_t target, std::uint32_t source);
  std::uint32_t any_live_node(std::uint32_t hint) const;

  std::size_t max_degree_;
  float alpha_;
  PruneSchedule schedule_;
  std::uint32_t entry_ = kNoNode;
  std::size_t nodes_ = 0;
  std::size_t tombstones_ = 0;
  std::vector<std::uint8_t> state_;
  std::vector<std::vector<std::uint32_t>> out_;
  std::vector<std::vector<std::uint32_t>> in_;
};

struct SearchStats {
  std::size_t distance_computations = 0;
  std::size_t expansions = 0;
};

namespace detail {

// Per-thread visited marks, cleared in O(1) by bumping a generation.
class VisitedSet {
 public:
  void reset(std::size_t n) {
    if (marks_.size() < n) marks_.resize(n, 0);
    if (++generation_ == 0) {
      std::fill(marks_.begin(), marks_.end(), 0);
      generation_ = 1;
    }
  }
  bool insert(std::uint32_t id) {
    if (marks_[id] == generation_) return false;
    marks_[id] = generation_;
    return true;
  }

 private:
  std::vector<std::uint32_t> marks_;
  std::uint32_t generation_ = 0;
};

inline VisitedSet& visited_set() {
  thread_local VisitedSet set;
  return set;
}

}  // namespace detail

/// Greedy best-first search from the entry point with a candidate window of
/// W. Returns the final window, best first, tombstoned nodes included.
template <typename Store>
std::vector<Neighbor> greedy_search(const ProximityGraph& graph, const Store& store,
                                    const typename Store::Query& query, std::size_t window,
                                    SearchStats* stats = nullptr) {
  std::vector<Neighbor> pool;
  const std::uint32_t entry = graph.entry_point();
  if (entry == kNoNode || window == 0) return pool;
  auto& visited = detail::visited_set();
  visited.reset(graph.slot_count());
  std::vector<std::uint8_t> expanded;
  std::vector<std::uint32_t> fresh;
  pool.reserve(window + 1);
  expanded.reserve(window + 1);

  std::size_t computations = 1;
  std::size_t expansions = 0;
  visited.insert(entry);
  pool.push_back({entry, store.similarity(query, entry)});
  expanded.push_back(0);

  std::size_t cursor = 0;
  while (cursor < pool.size()) {
    const std::uint32_t current = pool[cursor].id;
    expanded[cursor] = 1;
    ++expansions;
    std::size_t next = cursor + 1;
    fresh.clear();
    for (const std::uint32_t nb : graph.neighbors(current)) {
      if (!visited.insert(nb)) continue;
      store.prefetch(nb);
      fresh.push_back(nb);
    }
    for (const std::uint32_t nb : fresh) {
      const Neighbor cand{nb, store.similarity(query, nb)};
      ++computations;
      if (pool.size() == window && !closer(cand, pool.back())) continue;
      const auto pos = static_cast<std::size_t>(
          std::upper_bound(pool.begin(), pool.end(), cand, closer) - pool.begin());
      if (pool.size() == window) {
        pool.pop_back();
        expanded.pop_back();
      }
      pool.insert(pool.begin() + static_cast<std::ptrdiff_t>(pos), cand);
      expanded.insert(expanded.begin() + static_cast<std::ptrdiff_t>(pos), 0);
      if (pos < next) next = pos;
    }
    cursor = next;
    while (cursor < pool.size() && expanded[cursor]) ++cursor;
  }
  if (stats) {
    stats->distance_computations += computations;
    stats->expansions += expansions;
  }
  return pool;
}

/// First k live entries of a search window.
inline std::vector<Neighbor> live_top_k(const ProximityGraph& graph, std::span<const Neighbor> pool,
                                        std::size_t k) {
  std::vector<Neighbor> out;
  out.reserve(k);
  for (const auto& n : pool) {
    if (out.size() == k) break;
    if (graph.live(n.id)) out.push_back(n);
  }
  return out;
}

/// Pruning rule: does the selected neighbor x* (similarity s_star to x')
/// make x' redundant for x (similarity s_x to x')?
///   euclidean:  alpha * d(x*, x') <= d(x, x'), d the unsquared distance
///   otherwise:  alpha * s(x*, x') >= s(x, x')
inline bool dominated(Metric metric, float alpha, float s_star, float s_x) {
  if (metric == Metric::euclidean) {
    const float d_star = std::sqrt(std::max(0.0f, -s_star));
    const float d_x = std::sqrt(std::max(0.0f, -s_x));
    return alpha * d_star <= d_x;
  }
  return alpha * s_star >= s_x;
}

/// Alpha values applied in turn by a schedule: {alpha}, or {1, alpha} for
/// staged when alpha is looser than 1 for the metric.
std::vector<float> prune_rounds(Metric metric, float alpha, PruneSchedule schedule);

/// Alpha-pruning of a candidate set for node x. Candidates carry their
/// similarity to x; x itself and duplicate ids are dropped first. Each round
/// first drops candidates dominated by already selected ones, then selects
/// greedily as usual.
template <typename Store>
std::vector<std::uint32_t> prune_neighbors(const Store& store, std::uint32_t x, std::vector<Neighbor> candidates,
                                           float alpha, std::size_t max_degree,
                                           PruneSchedule schedule = PruneSchedule::single) {
  std::sort(candidates.begin(), candidates.end(), closer);
  {
    std::vector<std::uint32_t> seen;
    seen.reserve(candidates.size());
    std::vector<Neighbor> unique;
    unique.reserve(candidates.size());
    for (const auto& c : candidates) {
      if (c.id == x) continue;
      if (std::find(seen.begin(), seen.end(), c.id) != seen.end()) continue;
      seen.push_back(c.id);
      unique.push_back(c);
    }
    candidates.swap(unique);
  }
  const Metric metric = store.metric();
  std::vector<std::uint32_t> selected;
  selected.reserve(max_degree);
  std::vector<std::uint8_t> taken(candidates.size(), 0);
  std::vector<std::uint8_t> pruned(candidates.size(), 0);
  auto prune_after = [&](std::size_t i, float a, std::size_t from) {
    const auto star = store.prepare(store.reconstruct(candidates[i].id));
    for (std::size_t j = from; j < candidates.size(); ++j) {
      if (taken[j] || pruned[j]) continue;
      if (dominated(metric, a, store.similarity(star, candidates[j].id), candidates[j].similarity)) pruned[j] = 1;
    }
  };
  const auto rounds = prune_rounds(metric, alpha, schedule);
  for (std::size_t round = 0; round < rounds.size() && selected.size() < max_degree; ++round) {
    const float a = rounds[round];
    if (round > 0) {
      std::fill(pruned.begin(), pruned.end(), 0);
      for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (taken[i]) prune_after(i, a, 0);
      }
    }
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (taken[i] || pruned[i]) continue;
      selected.push_back(candidates[i].id);
      taken[i] = 1;
      if (selected.size() == max_degree) break;
      prune_after(i, a, i + 1);
    }
  }
  return selected;
}

struct GraphBuildParams {
  std::size_t max_degree = 64;
  std::size_t build_window = 200;
  std::vector<float> alphas = {1.0f, 1.2f};
  PruneSchedule prune = PruneSchedule::staged;
  std::uint64_t seed = 0;
};

/// Default pruning relaxation per metric: 1.2 for Euclidean, 0.95 otherwise.
float default_alpha(Metric metric);

// Neighbor lists may temporarily grow to this multiple of R inside batched
// operations; they are pruned back to R before the operation returns.
inline constexpr double kBatchSlack = 1.3;

namespace detail {

template <typename Store>
void add_backward_edge(ProximityGraph& graph, const Store& store, std::uint32_t y, std::uint32_t x, float alpha,
                       std::size_t capacity) {
  const auto current = graph.neighbors(y);
  if (std::find(current.begin(), current.end(), x) != current.end()) return;
  if (current.size() < capacity) {
    graph.add_edge(y, x, capacity);
    return;
  }
  const auto q = store.prepare(store.reconstruct(y));
  std::vector<Neighbor> cand;
  cand.reserve(current.size() + 1);
  for (const auto n : current) cand.push_back({n, store.similarity(q, n)});
  cand.push_back({x, store.similarity(q, x)});
  const auto kept = prune_neighbors(store, y, std::move(cand), alpha, graph.max_degree(), graph.prune_schedule());
  graph.set_neighbors(y, kept);
}

template <typename Store>
void reprune_to_degree(ProximityGraph& graph, const Store& store, std::uint32_t y, float alpha) {
  const auto current = graph.neighbors(y);
  if (current.size() <= graph.max_degree()) return;
  const auto q = store.prepare(store.reconstruct(y));
  std::vector<Neighbor> cand;
  cand.reserve(current.size());
  for (const auto n : current) cand.push_back({n, store.similarity(q, n)});
  const auto kept = prune_neighbors(store, y, std::move(cand), alpha, graph.max_degree(), graph.prune_schedule());
  graph.set_neighbors(y, kept);
}

}  // namespace detail

/// One search-and-prune update for node x with vector v, followed by
/// backward edges. Tombstoned nodes are never chosen as neighbors.
template <typename Store>
void update_node(ProximityGraph& graph, const Store& store, std::uint32_t x, std::span<const float> v, float alpha,
                 std::size_t window, std::size_t capacity) {
  if (graph.entry_point() == x && graph.neighbors(x).empty() && graph.node_count() == 1) return;
  const auto q = store.prepare(v);
  auto pool = greedy_search(graph, store, q, window);
  std::vector<Neighbor> cand;
  cand.reserve(pool.size() + graph.neighbors(x).size());
  for (const auto& n : pool) {
    if (n.id != x && graph.live(n.id)) cand.push_back(n);
  }
  for (const auto n : graph.neighbors(x)) {
    if (graph.live(n)) cand.push_back({n, store.similarity(q, n)});
  }
  const auto kept = prune_neighbors(store, x, std::move(cand), alpha, graph.max_degree(), graph.prune_schedule());
  graph.set_neighbors(x, kept, capacity);
  for (const auto y : kept) detail::add_backward_edge(graph, store, y, x, alpha, capacity);
}

/// Euclidean medoid of the given nodes: the one closest to their centroid,
/// ties by id.
template <typename Store>
std::uint32_t medoid(const Store& store, std::span<const std::uint32_t> ids) {
  if (ids.empty()) return kNoNode;
  const std::size_t d = store.dim();
  std::vector<double> sum(d, 0.0);
  std::vector<std::vector<float>> rows;
  rows.reserve(ids.size());
  for (const auto id : ids) {
    rows.push_back(store.reconstruct(id));
    for (std::size_t j = 0; j < d; ++j) sum[j] += rows.back()[j];
  }
  for (auto& s : sum) s /= static_cast<double>(ids.size());
  std::uint32_t best = kNoNode;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    double dist = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double t = rows[i][j] - sum[j];
      dist += t * t;
    }
    if (dist < best_dist || (dist == best_dist && ids[i] < best)) {
      best_dist = dist;
      best = ids[i];
    }
  }
  return best;
}

/// Builds the graph over nodes [0, data rows) whose vectors are already in
/// the store. `vector(i)` returns the full-precision vector of node i. One
/// pass per entry of params.alphas, entry point at the medoid.
template <typename Store, typename VectorFn>
ProximityGraph build_graph(const Store& store, std::size_t n, VectorFn&& vector, const GraphBuildParams& params) {
  if (params.max_degree == 0) throw ArgumentError("max degree must be positive");
  if (params.build_window == 0) throw ArgumentError("build window must be positive");
  if (params.alphas.empty()) throw ArgumentError("alpha schedule is empty");
  ProximityGraph graph(params.max_degree, params.alphas.back(), params.prune);
  for (std::uint32_t i = 0; i < n; ++i) graph.add_node(i);
  if (n == 0) return graph;
  std::vector<std::uint32_t> ids(n);
  std::iota(ids.begin(), ids.end(), 0u);
  graph.set_entry_point(medoid(store, ids));
  std::vector<std::uint32_t> order = ids;
  std::mt19937_64 rng(params.seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto capacity = static_cast<std::size_t>(std::floor(kBatchSlack * static_cast<double>(params.max_degree)));
  for (const float alpha : params.alphas) {
    for (const auto x : order) update_node(graph, store, x, vector(x), alpha, params.build_window, capacity);
    for (const auto x : ids) detail::reprune_to_degree(graph, store, x, alpha);
  }
  return graph;
}

/// Lazy deletion. A deleted entry point passes to its nearest live
/// out-neighbor: the graph was built by searches starting there, and nodes
/// around it navigate well while arbitrary nodes (even a fresh medoid) can
/// strand whole clusters.
template <typename Store>
void tombstone_node(ProximityGraph& graph, const Store& store, std::uint32_t id) {
  std::uint32_t next = kNoNode;
  if (graph.entry_point() == id) {
    const auto q = store.prepare(store.reconstruct(id));
    float best = -std::numeric_limits<float>::infinity();
    for (const auto n : graph.neighbors(id)) {
      if (!graph.live(n)) continue;
      const float s = store.similarity(q, n);
      if (next == kNoNode || s > best) {
        best = s;
        next = n;
      }
    }
  }
  graph.tombstone(id);
  if (next != kNoNode) graph.set_entry_point(next);
}

/// Bridges paths through tombstoned nodes, re-prunes affected lists that
/// exceed R and removes the tombstoned nodes. The entry point stays where it
/// is (see tombstone_node); the medoid is only a fallback when it is gone.
/// Returns the removed ids.
template <typename Store>
std::vector<std::uint32_t> consolidate_graph(ProximityGraph& graph, const Store& store) {
  const auto deleted = graph.tombstoned_ids();
  if (deleted.empty()) return deleted;
  std::vector<std::uint32_t> affected;
  for (const auto d : deleted) {
    for (const auto src : graph.in_neighbors(d)) {
      if (graph.live(src)) affected.push_back(src);
    }
  }
  std::sort(affected.begin(), affected.end());
  affected.erase(std::unique(affected.begin(), affected.end()), affected.end());

  for (const auto x : affected) {
    std::vector<std::uint32_t> cand;
    for (const auto n : graph.neighbors(x)) {
      if (!graph.tombstoned(n)) {
        cand.push_back(n);
        continue;
      }
      for (const auto nn : graph.neighbors(n)) {
        if (nn != x && !graph.tombstoned(nn)) cand.push_back(nn);
      }
    }
    std::sort(cand.begin(), cand.end());
    cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
    if (cand.size() > graph.max_degree()) {
      const auto q = store.prepare(store.reconstruct(x));
      std::vector<Neighbor> scored;
      scored.reserve(cand.size());
      for (const auto c : cand) scored.push_back({c, store.similarity(q, c)});
      cand = prune_neighbors(store, x, std::move(scored), graph.alpha(), graph.max_degree(), graph.prune_schedule());
    }
    graph.set_neighbors(x, cand);
  }
  for (const auto d : deleted) graph.remove_node(d);
  if (!graph.live(graph.entry_point())) {
    const auto live = graph.live_ids();
    graph.set_entry_point(live.empty() ? kNoNode : medoid(store, live));
  }
  return deleted;
}

}  // namespace streamlvq
