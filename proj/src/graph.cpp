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
#include "streamlvq/graph.hpp"

#include "streamlvq/container.hpp"

namespace streamlvq {

namespace {

constexpr std::uint32_t kGraphVersion = 2;  // 1: no prune schedule byte

std::string id_text(std::uint32_t id) { return std::to_string(id); }

}  // namespace

float default_alpha(Metric metric) { return metric == Metric::euclidean ? 1.2f : 0.95f; }

PruneSchedule parse_prune_schedule(std::string_view name) {
  if (name == "single") return PruneSchedule::single;
  if (name == "staged") return PruneSchedule::staged;
  throw ArgumentError("unknown prune schedule '" + std::string(name) + "' (expected single or staged)");
}

std::string to_string(PruneSchedule schedule) { return schedule == PruneSchedule::single ? "single" : "staged"; }

std::vector<float> prune_rounds(Metric metric, float alpha, PruneSchedule schedule) {
  const bool looser = metric == Metric::euclidean ? alpha > 1.0f : alpha < 1.0f;
  if (schedule == PruneSchedule::staged && looser) return {1.0f, alpha};
  return {alpha};
}

ProximityGraph::ProximityGraph(std::size_t max_degree, float alpha, PruneSchedule schedule)
    : max_degree_(max_degree), alpha_(alpha), schedule_(schedule) {
  if (max_degree == 0) throw ArgumentError("max degree must be positive");
}

void ProximityGraph::grow(std::uint32_t id) {
  if (id == kNoNode) throw ArgumentError("node id " + id_text(id) + " is reserved");
  if (id >= state_.size()) {
    state_.resize(static_cast<std::size_t>(id) + 1, kAbsent);
    out_.resize(state_.size());
    in_.resize(state_.size());
  }
}

void ProximityGraph::set_entry_point(std::uint32_t id) {
  if (id != kNoNode && !present(id)) throw ArgumentError("entry point " + id_text(id) + " is not in the graph");
  entry_ = id;
}

void ProximityGraph::add_node(std::uint32_t id) {
  grow(id);
  if (state_[id] != kAbsent) throw ArgumentError("node " + id_text(id) + " already in the graph");
  state_[id] = kLive;
  ++nodes_;
  if (entry_ == kNoNode || !live(entry_)) entry_ = id;
}

void ProximityGraph::drop_in_edge(std::uint32_t target, std::uint32_t source) {
  auto& list = in_[target];
  const auto it = std::find(list.begin(), list.end(), source);
  if (it != list.end()) {
    *it = list.back();
    list.pop_back();
  }
}

void ProximityGraph::set_neighbors(std::uint32_t id, std::span<const std::uint32_t> targets, std::size_t capacity) {
  if (!present(id)) throw ArgumentError("node " + id_text(id) + " is not in the graph");
  const std::size_t cap = capacity == 0 ? max_degree_ : capacity;
  if (targets.size() > cap) {
    throw ArgumentError("node " + id_text(id) + ": " + std::to_string(targets.size()) +
                        " neighbors exceed the degree bound " + std::to_string(cap));
  }
  std::vector<std::uint32_t> sorted(targets.begin(), targets.end());
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (sorted[i] == id) throw ArgumentError("self-edge on node " + id_text(id));
    if (!present(sorted[i])) throw ArgumentError("edge to unknown node " + id_text(sorted[i]));
    if (i > 0 && sorted[i] == sorted[i - 1]) throw ArgumentError("duplicate edge to node " + id_text(sorted[i]));
  }
  std::vector<std::uint32_t> old(out_[id].begin(), out_[id].end());
  std::sort(old.begin(), old.end());
  std::size_t a = 0;
  std::size_t b = 0;
  while (a < old.size() || b < sorted.size()) {
    if (b == sorted.size() || (a < old.size() && old[a] < sorted[b])) {
      drop_in_edge(old[a++], id);
    } else if (a == old.size() || sorted[b] < old[a]) {
      in_[sorted[b++]].push_back(id);
    } else {
      ++a;
      ++b;
    }
  }
  out_[id].assign(targets.begin(), targets.end());
}

void ProximityGraph::add_edge(std::uint32_t from, std::uint32_t to, std::size_t capacity) {
  if (!present(from) || !present(to)) throw ArgumentError("edge endpoints must be in the graph");
  if (from == to) throw ArgumentError("self-edge on node " + id_text(from));
  auto& list = out_[from];
  if (std::find(list.begin(), list.end(), to) != list.end()) return;
  const std::size_t cap = capacity == 0 ? max_degree_ : capacity;
  if (list.size() >= cap) throw ArgumentError("node " + id_text(from) + " is at its degree bound");
  list.push_back(to);
  in_[to].push_back(from);
}

std::uint32_t ProximityGraph::any_live_node(std::uint32_t hint) const {
  if (hint != kNoNode && present(hint)) {
    for (const auto n : out_[hint]) {
      if (live(n)) return n;
    }
  }
  for (std::uint32_t i = 0; i < state_.size(); ++i) {
    if (state_[i] == kLive) return i;
  }
  return kNoNode;
}

void ProximityGraph::tombstone(std::uint32_t id) {
  if (!present(id)) throw ArgumentError("node " + id_text(id) + " is not in the graph");
  if (state_[id] == kTombstone) throw ArgumentError("node " + id_text(id) + " is already deleted");
  state_[id] = kTombstone;
  ++tombstones_;
  if (entry_ == id) entry_ = any_live_node(id);
}

void ProximityGraph::remove_node(std::uint32_t id) {
  if (!present(id)) throw ArgumentError("node " + id_text(id) + " is not in the graph");
  for (const auto target : out_[id]) drop_in_edge(target, id);
  for (const auto source : in_[id]) {
    auto& list = out_[source];
    list.erase(std::remove(list.begin(), list.end(), id), list.end());
  }
  out_[id].clear();
  out_[id].shrink_to_fit();
  in_[id].clear();
  in_[id].shrink_to_fit();
  if (state_[id] == kTombstone) --tombstones_;
  state_[id] = kAbsent;
  --nodes_;
  if (entry_ == id) entry_ = any_live_node(kNoNode);
}

std::vector<std::uint32_t> ProximityGraph::tombstoned_ids() const {
  std::vector<std::uint32_t> out;
  out.reserve(tombstones_);
  for (std::uint32_t i = 0; i < state_.size(); ++i) {
    if (state_[i] == kTombstone) out.push_back(i);
  }
  return out;
}

std::vector<std::uint32_t> ProximityGraph::live_ids() const {
  std::vector<std::uint32_t> out;
  out.reserve(live_count());
  for (std::uint32_t i = 0; i < state_.size(); ++i) {
    if (state_[i] == kLive) out.push_back(i);
  }
  return out;
}

void ProximityGraph::check_invariants() const {
  std::size_t nodes = 0;
  std::size_t tombs = 0;
  std::vector<std::size_t> in_degree(state_.size(), 0);
  for (std::uint32_t i = 0; i < state_.size(); ++i) {
    if (state_[i] == kAbsent) {
      if (!out_[i].empty() || !in_[i].empty()) throw StateError("absent node " + id_text(i) + " has edges");
      continue;
    }
    ++nodes;
    if (state_[i] == kTombstone) ++tombs;
    if (out_[i].size() > max_degree_) {
      throw StateError("node " + id_text(i) + " has degree " + std::to_string(out_[i].size()) + " > " +
                       std::to_string(max_degree_));
    }
    std::vector<std::uint32_t> sorted(out_[i]);
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t k = 0; k < sorted.size(); ++k) {
      const auto n = sorted[k];
      if (n == i) throw StateError("self-edge on node " + id_text(i));
      if (!present(n)) throw StateError("node " + id_text(i) + " has a dangling edge to " + id_text(n));
      if (k > 0 && sorted[k - 1] == n) throw StateError("duplicate edge " + id_text(i) + " -> " + id_text(n));
      const auto& rev = in_[n];
      if (std::find(rev.begin(), rev.end(), i) == rev.end()) {
        throw StateError("reverse adjacency misses " + id_text(i) + " -> " + id_text(n));
      }
      ++in_degree[n];
    }
  }
  for (std::uint32_t i = 0; i < state_.size(); ++i) {
    if (in_[i].size() != in_degree[i]) throw StateError("reverse adjacency of node " + id_text(i) + " is stale");
  }
  if (nodes != nodes_ || tombs != tombstones_) throw StateError("node counters are stale");
  if (nodes - tombs > 0 && !live(entry_)) throw StateError("entry point is not a live node");
  if (nodes == 0 && entry_ != kNoNode) throw StateError("empty graph has an entry point");
}

std::vector<std::uint8_t> ProximityGraph::serialize() const {
  ByteWriter w;
  w.put_magic("SLVG");
  w.put<std::uint32_t>(kGraphVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(max_degree_));
  w.put<std::uint32_t>(entry_);
  w.put<std::uint64_t>(state_.size());
  w.put<float>(alpha_);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(schedule_));
  for (std::uint32_t i = 0; i < state_.size(); ++i) {
    w.put<std::uint8_t>(state_[i]);
    if (state_[i] == kAbsent) continue;
    w.put_varint(out_[i].size());
    std::int64_t prev = i;
    for (const auto n : out_[i]) {
      w.put_varint(zigzag_encode(static_cast<std::int64_t>(n) - prev));
      prev = n;
    }
  }
  return w.take();
}

ProximityGraph ProximityGraph::deserialize(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "graph");
  r.expect_magic("SLVG");
  const auto version = r.get<std::uint32_t>();
  if (version != 1 && version != kGraphVersion) throw FormatError("graph: unsupported version");
  const auto max_degree = r.get<std::uint32_t>();
  const auto entry = r.get<std::uint32_t>();
  const auto slots = r.get<std::uint64_t>();
  const auto alpha = r.get<float>();
  auto schedule = PruneSchedule::single;
  if (version >= 2) {
    const auto raw = r.get<std::uint8_t>();
    if (raw > 1) throw FormatError("graph: bad prune schedule");
    schedule = static_cast<PruneSchedule>(raw);
  }
  if (max_degree == 0) throw FormatError("graph: zero degree bound");
  if (slots >= kNoNode) throw FormatError("graph: too many slots");
  ProximityGraph g(max_degree, alpha, schedule);
  g.state_.resize(slots, kAbsent);
  g.out_.resize(slots);
  g.in_.resize(slots);
  for (std::uint64_t i = 0; i < slots; ++i) {
    const auto state = r.get<std::uint8_t>();
    if (state > kTombstone) throw FormatError("graph: bad node state at slot " + std::to_string(i));
    g.state_[i] = state;
    if (state == kAbsent) continue;
    ++g.nodes_;
    if (state == kTombstone) ++g.tombstones_;
    const auto degree = r.get_varint();
    if (degree > max_degree) throw FormatError("graph: degree bound exceeded at slot " + std::to_string(i));
    std::int64_t prev = static_cast<std::int64_t>(i);
    auto& list = g.out_[i];
    list.reserve(degree);
    for (std::uint64_t k = 0; k < degree; ++k) {
      prev += zigzag_decode(r.get_varint());
      if (prev < 0 || static_cast<std::uint64_t>(prev) >= slots) {
        throw FormatError("graph: edge target out of range at slot " + std::to_string(i));
      }
      list.push_back(static_cast<std::uint32_t>(prev));
    }
  }
  r.expect_end();
  for (std::uint32_t i = 0; i < slots; ++i) {
    for (const auto n : g.out_[i]) g.in_[n].push_back(i);
  }
  g.entry_ = entry;
  try {
    g.check_invariants();
  } catch (const StateError& e) {
    throw FormatError(std::string("graph: ") + e.what());
  }
  return g;
}

bool operator==(const ProximityGraph& a, const ProximityGraph& b) {
  return a.max_degree_ == b.max_degree_ && a.alpha_ == b.alpha_ && a.schedule_ == b.schedule_ && a.entry_ == b.entry_ && a.state_ == b.state_ &&
         a.out_ == b.out_;
}

}  // namespace streamlvq
