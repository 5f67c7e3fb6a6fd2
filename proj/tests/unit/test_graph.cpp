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
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "streamlvq/errors.hpp"
#include "streamlvq/graph.hpp"
#include "streamlvq/index.hpp"
#include "streamlvq/oracle.hpp"
#include "streamlvq/store.hpp"
#include "streamlvq/stream.hpp"
#include "test_support.hpp"

namespace streamlvq {
namespace {

using testing::gaussian;

FloatStore store_of(const VectorDataset& x, Metric m = Metric::euclidean) {
  FloatStore s(x.dim, m);
  for (std::uint32_t i = 0; i < x.size(); ++i) s.set(i, x.row(i));
  return s;
}

DynamicIndex<FloatStore> float_index(std::size_t d, std::size_t r = 16, std::size_t w = 48, Metric m = Metric::euclidean) {
  IndexParams p;
  p.max_degree = r;
  p.build_window = w;
  p.seed = 1;
  return DynamicIndex<FloatStore>(FloatStore(d, m), p);
}

double index_recall(const DynamicIndex<FloatStore>& idx, const VectorDataset& live, const VectorDataset& q,
                    std::size_t k, std::size_t w) {
  const auto gt = brute_force_knn(q, live, Metric::euclidean, k);
  double sum = 0;
  for (std::size_t i = 0; i < q.size(); ++i) sum += recall_at_k(idx.search(q.row(i), k, w).ids, gt.ids[i], k);
  return sum / static_cast<double>(q.size());
}

TEST(Search, SingleNode) {
  const auto x = gaussian(1, 4, 1);
  const auto s = store_of(x);
  ProximityGraph g(8);
  g.add_node(0);
  const auto pool = greedy_search(g, s, s.prepare(gaussian(1, 4, 2).row(0)), 5);
  ASSERT_EQ(pool.size(), 1u);
  EXPECT_EQ(pool[0].id, 0u);
}

TEST(Search, CompleteGraphExhaustive) {
  const auto x = gaussian(60, 5, 3);
  const auto s = store_of(x);
  ProximityGraph g(59);
  for (std::uint32_t i = 0; i < 60; ++i) g.add_node(i);
  for (std::uint32_t i = 0; i < 60; ++i) {
    std::vector<std::uint32_t> nb;
    for (std::uint32_t j = 0; j < 60; ++j) {
      if (j != i) nb.push_back(j);
    }
    g.set_neighbors(i, nb);
  }
  const auto q = gaussian(10, 5, 4);
  const auto gt = brute_force_knn(q, x, Metric::euclidean, 10);
  for (std::size_t i = 0; i < q.size(); ++i) {
    const auto top = live_top_k(g, greedy_search(g, s, s.prepare(q.row(i)), 60), 10);
    for (std::size_t j = 0; j < 10; ++j) EXPECT_EQ(top[j].id, gt.ids[i][j]);
  }
}

TEST(Prune, SingleCandidateKept) {
  const auto x = VectorDataset::from_rows({{0.0f}, {5.0f}});
  const auto s = store_of(x);
  for (const float alpha : {1.0f, 1.2f, 3.0f}) {
    const auto kept = prune_neighbors(s, 0, {{1, s.similarity(s.prepare(x.row(0)), 1)}}, alpha, 4);
    EXPECT_EQ(kept, std::vector<std::uint32_t>{1});
  }
}

TEST(Prune, CollinearPointsDominated) {
  const auto x = VectorDataset::from_rows({{0.0f}, {1.0f}, {2.0f}});
  const auto s = store_of(x);
  const auto q = s.prepare(x.row(0));
  const auto kept = prune_neighbors(s, 0, {{2, s.similarity(q, 2)}, {1, s.similarity(q, 1)}}, 1.0f, 4);
  EXPECT_EQ(kept, std::vector<std::uint32_t>{1});
}

TEST(Prune, InnerProductFormRespectsAlpha) {
  // Similarity form: x' is pruned when alpha * s(x*, x') >= s(x, x').
  EXPECT_TRUE(dominated(Metric::inner_product, 0.95f, 10.0f, 9.0f));
  EXPECT_FALSE(dominated(Metric::inner_product, 0.95f, 10.0f, 9.6f));
  // Distance form: pruned when alpha * d(x*, x') <= d(x, x').
  EXPECT_TRUE(dominated(Metric::euclidean, 1.2f, -1.0f, -1.44f));
  EXPECT_FALSE(dominated(Metric::euclidean, 1.2f, -1.0f, -1.4f));
}

TEST(Prune, FarCandidatesTruncateToMostSimilar) {
  // Candidates on orthogonal axes at slightly different radii: any two are
  // farther apart than either is from the origin, so nothing is dominated and
  // the rule reduces to sort-and-truncate.
  const std::size_t c = 12;
  VectorDataset x(c);
  x.append(std::vector<float>(c, 0.0f), 0);
  for (std::size_t i = 0; i < c; ++i) {
    std::vector<float> row(c, 0.0f);
    row[(i * 5) % c] = 1.0f + 0.01f * static_cast<float>(i);
    x.append(row, i + 1);
  }
  const auto s = store_of(x);
  const auto q = s.prepare(x.row(0));
  std::vector<Neighbor> cand;
  for (std::uint32_t i = 1; i <= c; ++i) cand.push_back({i, s.similarity(q, i)});
  const auto kept = prune_neighbors(s, 0, cand, 1.0f, 5);
  EXPECT_EQ(kept, (std::vector<std::uint32_t>{1, 2, 3, 4, 5}));
}

TEST(Prune, StagedKeepsLongEdge) {
  // Three candidates near x about 0.93 apart, one far away. At 1.2 none of
  // the near ones dominates another, so R = 3 fills up with them.
  auto at = [](float deg, float r) {
    const float t = deg * 3.14159265f / 180.0f;
    return std::vector<float>{r * std::cos(t), r * std::sin(t)};
  };
  const auto x = VectorDataset::from_rows({{0.0f, 0.0f}, at(0, 1.0f), at(55, 1.01f), at(-55, 1.02f), {-3.0f, 0.0f}});
  const auto s = store_of(x);
  const auto q = s.prepare(x.row(0));
  std::vector<Neighbor> cand;
  for (std::uint32_t i = 1; i <= 4; ++i) cand.push_back({i, s.similarity(q, i)});
  const auto single = prune_neighbors(s, 0, cand, 1.2f, 3, PruneSchedule::single);
  EXPECT_EQ(single, (std::vector<std::uint32_t>{1, 2, 3}));
  const auto staged = prune_neighbors(s, 0, cand, 1.2f, 3, PruneSchedule::staged);
  EXPECT_EQ(staged, (std::vector<std::uint32_t>{1, 4, 2}));
}

TEST(Prune, ScheduleRounds) {
  EXPECT_EQ(prune_rounds(Metric::euclidean, 1.2f, PruneSchedule::staged), (std::vector<float>{1.0f, 1.2f}));
  EXPECT_EQ(prune_rounds(Metric::euclidean, 1.0f, PruneSchedule::staged), (std::vector<float>{1.0f}));
  EXPECT_EQ(prune_rounds(Metric::euclidean, 1.2f, PruneSchedule::single), (std::vector<float>{1.2f}));
  EXPECT_EQ(prune_rounds(Metric::inner_product, 0.95f, PruneSchedule::staged), (std::vector<float>{1.0f, 0.95f}));
  EXPECT_EQ(prune_rounds(Metric::inner_product, 1.05f, PruneSchedule::staged), (std::vector<float>{1.05f}));
  EXPECT_EQ(parse_prune_schedule("single"), PruneSchedule::single);
  EXPECT_EQ(to_string(parse_prune_schedule("staged")), "staged");
  EXPECT_THROW(parse_prune_schedule("both"), ArgumentError);
}

TEST(Prune, StagedEqualsSingleAtUnitAlpha) {
  const auto x = gaussian(200, 6, 21);
  const auto s = store_of(x);
  const auto q = s.prepare(x.row(0));
  std::vector<Neighbor> cand;
  for (std::uint32_t i = 1; i < 200; ++i) cand.push_back({i, s.similarity(q, i)});
  EXPECT_EQ(prune_neighbors(s, 0, cand, 1.0f, 12, PruneSchedule::staged),
            prune_neighbors(s, 0, cand, 1.0f, 12, PruneSchedule::single));
}

TEST(Build, SingleVector) {
  auto idx = float_index(3);
  idx.build(gaussian(1, 3, 0));
  EXPECT_EQ(idx.graph().entry_point(), 0u);
  EXPECT_TRUE(idx.graph().neighbors(0).empty());
  EXPECT_EQ(idx.search(gaussian(1, 3, 1).row(0), 1, 1).ids, std::vector<std::uint64_t>{0});
}

TEST(Build, DegreeBoundOnRandomInput) {
  const auto x = gaussian(5000, 8, 7);
  auto idx = float_index(8, 12, 32);
  idx.build(x);
  idx.graph().check_invariants();
  for (std::uint32_t i = 0; i < 5000; ++i) EXPECT_LE(idx.graph().neighbors(i).size(), 12u);
}

TEST(Build, CalibratedRecallOnClusteredData) {
  const auto [all, lab] = generate_clustered_dataset({10100, 16, 8, 2.0, 7});
  std::vector<std::size_t> base(10000), held(100);
  std::iota(base.begin(), base.end(), 0);
  std::iota(held.begin(), held.end(), 10000);
  const auto x = all.select(base);
  const auto q = all.select(held);
  auto idx = float_index(16, 32, 64);
  idx.build(x);
  const auto r = calibrate_window([&](std::size_t w) { return index_recall(idx, x, q, 10, w); }, 10, 1000, 0.9);
  EXPECT_TRUE(r.reached) << r.recall;
  EXPECT_GE(index_recall(idx, x, q, 10, r.window), 0.9);
}

TEST(Build, MeetsRecallOnTwoThousandVectors) {
  const auto x = gaussian(2000, 12, 8);
  auto idx = float_index(12, 24, 64);
  idx.build(x);
  EXPECT_GE(index_recall(idx, x, gaussian(100, 12, 9), 10, 64), 0.95);
}

TEST(Build, EntryIsMedoid) {
  const auto x = VectorDataset::from_rows({{0.0f}, {10.0f}, {4.0f}, {5.0f}, {6.0f}});
  auto idx = float_index(1);
  idx.build(x);
  EXPECT_EQ(idx.graph().entry_point(), 3u);
}

TEST(Insert, EmptyIndexThenSelfQueries) {
  auto idx = float_index(6);
  const auto x = gaussian(1000, 6, 10);
  idx.insert(x.row(0), 0);
  EXPECT_EQ(idx.graph().entry_point(), idx.slot(0));
  for (std::size_t i = 1; i < x.size(); ++i) idx.insert(x.row(i), i);
  idx.graph().check_invariants();
  for (std::uint32_t s = 0; s < 1000; ++s) ASSERT_LE(idx.graph().neighbors(s).size(), 16u);
  for (std::size_t i = 0; i < x.size(); i += 37) EXPECT_EQ(idx.search(x.row(i), 1, 10).ids[0], i);
  EXPECT_THROW(idx.insert(x.row(3), 3), ArgumentError);
}

TEST(Delete, ExcludedImmediately) {
  const auto x = gaussian(300, 4, 11);
  auto idx = float_index(4);
  idx.build(x);
  idx.remove(42);
  EXPECT_NE(idx.search(x.row(42), 1, 20).ids[0], 42u);
  EXPECT_THROW(idx.remove(42), ArgumentError);
  EXPECT_THROW(idx.remove(999), ArgumentError);
}

TEST(Delete, EntryPointReassigned) {
  const auto x = gaussian(100, 4, 12);
  auto idx = float_index(4);
  idx.build(x);
  const auto entry = idx.graph().entry_point();
  const auto nb = idx.graph().neighbors(entry);
  const std::vector<std::uint32_t> old_neighbors(nb.begin(), nb.end());
  idx.remove(idx.id_at(entry));
  const auto next = idx.graph().entry_point();
  EXPECT_TRUE(idx.graph().live(next));
  const auto q = idx.store().prepare(x.row(entry));
  for (const auto n : old_neighbors) EXPECT_GE(idx.store().similarity(q, next), idx.store().similarity(q, n));
  idx.graph().check_invariants();
  idx.remove(idx.id_at(5 == next ? 6 : 5));
  idx.consolidate();
  EXPECT_EQ(idx.graph().entry_point(), next);
}

TEST(Delete, EverythingLeavesEmptyResults) {
  const auto x = gaussian(50, 4, 13);
  auto idx = float_index(4);
  idx.build(x);
  for (std::uint64_t i = 0; i < 50; ++i) idx.remove(i);
  EXPECT_TRUE(idx.search(x.row(0), 5, 10).ids.empty());
  EXPECT_EQ(idx.consolidate(), 50u);
  EXPECT_TRUE(idx.search(x.row(0), 5, 10).ids.empty());
  idx.insert(x.row(3), 3);
  EXPECT_EQ(idx.search(x.row(0), 1, 10).ids, std::vector<std::uint64_t>{3});
}

TEST(Consolidate, BridgesPath) {
  const auto x = VectorDataset::from_rows({{0.0f}, {1.0f}, {2.0f}});
  const auto s = store_of(x);
  ProximityGraph g(4);
  for (std::uint32_t i = 0; i < 3; ++i) g.add_node(i);
  g.add_edge(0, 1);
  g.add_edge(1, 2);
  g.tombstone(1);
  const auto removed = consolidate_graph(g, s);
  EXPECT_EQ(removed, std::vector<std::uint32_t>{1});
  EXPECT_EQ(std::vector<std::uint32_t>(g.neighbors(0).begin(), g.neighbors(0).end()), std::vector<std::uint32_t>{2});
  EXPECT_FALSE(g.present(1));
  g.check_invariants();
}

TEST(Consolidate, NoTombstonesIsNoOp) {
  const auto x = gaussian(200, 4, 14);
  auto idx = float_index(4);
  idx.build(x);
  const auto before = idx.graph();
  EXPECT_EQ(idx.consolidate(), 0u);
  EXPECT_TRUE(idx.graph() == before);
}

TEST(Consolidate, ReprunesOverfullLists) {
  // Hub 0 points at 1..4; 1 is deleted and points at 5..8, so the bridged
  // list exceeds R = 4 and must be pruned back.
  VectorDataset x(2);
  for (std::size_t i = 0; i < 9; ++i) x.append(std::vector<float>{static_cast<float>(i), static_cast<float>(i % 3)}, i);
  const auto s = store_of(x);
  ProximityGraph g(4);
  for (std::uint32_t i = 0; i < 9; ++i) g.add_node(i);
  g.set_neighbors(0, std::vector<std::uint32_t>{1, 2, 3, 4});
  g.set_neighbors(1, std::vector<std::uint32_t>{5, 6, 7, 8});
  g.tombstone(1);
  consolidate_graph(g, s);
  EXPECT_LE(g.neighbors(0).size(), 4u);
  g.check_invariants();
}

TEST(Graph, RandomMixedOperationsKeepInvariants) {
  const std::size_t d = 4;
  const auto pool = gaussian(3000, d, 15);
  auto idx = float_index(d, 8, 16);
  std::mt19937_64 rng(3);
  std::vector<std::uint64_t> live;
  std::vector<std::uint64_t> idle(3000);
  std::iota(idle.begin(), idle.end(), 0);
  std::shuffle(idle.begin(), idle.end(), rng);
  std::vector<std::uint64_t> tomb;
  for (std::size_t op = 0; op < 10000; ++op) {
    const auto r = rng() % 100;
    if ((r < 55 || live.size() < 20) && !idle.empty()) {
      const auto id = idle.back();
      idle.pop_back();
      idx.insert(pool.row(id), id);
      live.push_back(id);
    } else if (r < 95 && !live.empty()) {
      const auto pos = rng() % live.size();
      idx.remove(live[pos]);
      tomb.push_back(live[pos]);
      live.erase(live.begin() + static_cast<std::ptrdiff_t>(pos));
    } else {
      idx.consolidate();
      idle.insert(idle.end(), tomb.begin(), tomb.end());
      tomb.clear();
    }
    if (op % 500 == 0) idx.graph().check_invariants();
  }
  idx.consolidate();
  idx.graph().check_invariants();
  EXPECT_EQ(idx.size(), live.size());
}

TEST(Search, DeterministicAndMonotoneInWindow) {
  const auto x = gaussian(3000, 10, 16);
  auto idx = float_index(10, 12, 32);
  idx.build(x);
  const auto q = gaussian(200, 10, 17);
  const auto a = idx.search(q.row(0), 10, 30);
  const auto b = idx.search(q.row(0), 10, 30);
  EXPECT_EQ(a.ids, b.ids);
  double prev = 0;
  for (const std::size_t w : {10u, 20u, 40u, 80u, 160u}) {
    const double r = index_recall(idx, x, q, 10, w);
    EXPECT_GE(r + 1e-9, prev) << w;
    prev = r;
  }
}

TEST(Graph, SerializationRoundTrip) {
  const auto x = gaussian(500, 5, 18);
  auto idx = float_index(5);
  idx.build(x);
  for (std::uint64_t i = 0; i < 500; i += 7) idx.remove(i);
  const auto bytes = idx.graph().serialize();
  const auto back = ProximityGraph::deserialize(bytes);
  EXPECT_TRUE(back == idx.graph());
  EXPECT_EQ(back.serialize(), bytes);
  auto broken = bytes;
  broken.resize(bytes.size() - 3);
  EXPECT_THROW(ProximityGraph::deserialize(broken), FormatError);
}

TEST(Graph, SerializationKeepsPruneSchedule) {
  ProximityGraph g(4, 1.2f, PruneSchedule::single);
  g.add_node(0);
  g.add_node(1);
  g.set_neighbors(0, std::vector<std::uint32_t>{1});
  const auto back = ProximityGraph::deserialize(g.serialize());
  EXPECT_EQ(back.prune_schedule(), PruneSchedule::single);
  EXPECT_TRUE(back == g);
  EXPECT_FALSE(back == ProximityGraph::deserialize(ProximityGraph(4, 1.2f).serialize()));
}

TEST(Graph, InvariantCheckerCatchesCorruption) {
  ProximityGraph g(2);
  for (std::uint32_t i = 0; i < 4; ++i) g.add_node(i);
  g.set_neighbors(0, std::vector<std::uint32_t>{1, 2, 3}, 3);
  EXPECT_THROW(g.check_invariants(), StateError);
  EXPECT_THROW(g.add_edge(1, 1), ArgumentError);
}

}  // namespace
}  // namespace streamlvq
