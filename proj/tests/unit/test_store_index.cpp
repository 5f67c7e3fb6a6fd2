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

#include <numeric>

#include <filesystem>

#include "streamlvq/container.hpp"
#include "streamlvq/engine.hpp"
#include "streamlvq/errors.hpp"
#include "streamlvq/oracle.hpp"
#include "streamlvq/store.hpp"
#include "streamlvq/stream.hpp"
#include "test_support.hpp"

namespace streamlvq {
namespace {

using testing::gaussian;

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("streamlvq_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

TEST(Container, VarintAndZigzag) {
  ByteWriter w;
  for (const std::uint64_t v : {0ull, 1ull, 127ull, 128ull, 300ull, ~0ull}) w.put_varint(v);
  for (const std::int64_t v : {0ll, -1ll, 1ll, -64ll, 1ll << 40}) w.put_varint(zigzag_encode(v));
  const auto bytes = w.take();
  ByteReader r(bytes, "test");
  for (const std::uint64_t v : {0ull, 1ull, 127ull, 128ull, 300ull, ~0ull}) EXPECT_EQ(r.get_varint(), v);
  for (const std::int64_t v : {0ll, -1ll, 1ll, -64ll, 1ll << 40}) EXPECT_EQ(zigzag_decode(r.get_varint()), v);
  r.expect_end();
  EXPECT_THROW(r.get<std::uint32_t>(), FormatError);
}

TEST(LvqStoreTest, RecordsArePaddedAndRoundTrip) {
  const auto x = gaussian(100, 37, 1);
  const auto c = kmeans_fit(x, 5, {});
  for (const auto layout : {Layout::turbo, Layout::sequential}) {
    for (const unsigned b1 : {4u, 8u}) {
      LvqStore s(37, Metric::euclidean, {b1, 8, layout}, c);
      EXPECT_EQ(s.record_bytes() % 32, 0u);
      for (std::uint32_t i = 0; i < 100; ++i) s.set(i, x.row(i));
      for (std::uint32_t i = 0; i < 100; ++i) {
        const auto e = s.encoded(i);
        const auto ref = mlvq_encode(x.row(i), c, {double(b1), 8});
        EXPECT_EQ(e.primary, ref.primary);
        EXPECT_EQ(e.residual, ref.residual);
        EXPECT_EQ(e.center, ref.center);
        EXPECT_EQ(s.reconstruct(i), mlvq_decode(ref, DecodeLevel::one, c));
      }
      const auto bytes = s.serialize();
      EXPECT_EQ(LvqStore::deserialize(bytes).serialize(), bytes);
    }
  }
}

TEST(LvqStoreTest, SimilarityMatchesEncodedPath) {
  const auto x = gaussian(50, 70, 2);
  const auto c = kmeans_fit(x, 3, {});
  for (const auto m : {Metric::euclidean, Metric::inner_product}) {
    LvqStore s(70, m, {4, 8, Layout::turbo}, c);
    for (std::uint32_t i = 0; i < 50; ++i) s.set(i, x.row(i));
    const auto q = s.prepare(gaussian(1, 70, 3).row(0));
    for (std::uint32_t i = 0; i < 50; ++i) {
      const float ref = similarity_encoded(q, s.encoded(i));
      EXPECT_NEAR(s.similarity(q, i), ref, 1e-4f * std::max(1.0f, std::abs(ref)));
      const float ref2 = similarity_encoded_two_level(q, s.encoded(i));
      EXPECT_NEAR(s.residual_similarity(q, i), ref2, 1e-4f * std::max(1.0f, std::abs(ref2)));
    }
  }
}

TEST(FloatStoreTest, CosineNormalizes) {
  FloatStore s(2, Metric::cosine);
  s.set(0, std::vector<float>{3, 4});
  const auto r = s.reconstruct(0);
  EXPECT_NEAR(r[0], 0.6f, 1e-6);
  EXPECT_NEAR(s.similarity(s.prepare(std::vector<float>{6, 8}), 0), 1.0f, 1e-6);
  const auto bytes = s.serialize();
  EXPECT_EQ(FloatStore::deserialize(bytes).serialize(), bytes);
}

TEST(Index, SaveLoadReproducesSearches) {
  const auto dir = scratch("index");
  const auto x = gaussian(800, 16, 4);
  EncodingConfig enc{4, 8, Layout::turbo, 4, 1.0};
  IndexParams p;
  p.max_degree = 16;
  p.build_window = 40;
  auto idx = make_index(16, Metric::euclidean, enc, fit_centers(x, Metric::euclidean, enc, 1), p);
  idx->build(x);
  for (std::uint64_t i = 0; i < 800; i += 5) idx->remove(i);
  idx->save(dir / "a");
  const auto back = load_index(dir / "a");
  EXPECT_EQ(back->size(), idx->size());
  EXPECT_EQ(back->live_ids(), idx->live_ids());
  const auto q = gaussian(20, 16, 5);
  for (std::size_t i = 0; i < q.size(); ++i) {
    EXPECT_EQ(back->search(q.row(i), 10, 30, true).ids, idx->search(q.row(i), 10, 30, true).ids);
  }
  std::filesystem::remove_all(dir);
}

TEST(Index, FreedSlotsReusedSmallestFirst) {
  IndexParams p;
  p.max_degree = 8;
  p.build_window = 16;
  DynamicIndex<FloatStore> idx(FloatStore(3, Metric::euclidean), p);
  const auto x = gaussian(20, 3, 6);
  idx.build(x);
  idx.remove(9);
  idx.remove(4);
  EXPECT_EQ(idx.consolidate(), 2u);
  idx.insert(x.row(0), 100);
  EXPECT_EQ(idx.slot(100), 4u);
  idx.insert(x.row(1), 101);
  EXPECT_EQ(idx.slot(101), 9u);
  idx.graph().check_invariants();
}

TEST(Index, TombstonedIdCanBeReAdded) {
  IndexParams p;
  p.max_degree = 8;
  p.build_window = 16;
  DynamicIndex<FloatStore> idx(FloatStore(3, Metric::euclidean), p);
  const auto x = gaussian(30, 3, 7);
  idx.build(x);
  idx.remove(5);
  idx.insert(x.row(5), 5);
  EXPECT_EQ(idx.search(x.row(5), 1, 10).ids[0], 5u);
  idx.consolidate();
  EXPECT_EQ(idx.search(x.row(5), 1, 10).ids[0], 5u);
  idx.graph().check_invariants();
}

TEST(Index, BatchInsertRespectsDegreeBound) {
  IndexParams p;
  p.max_degree = 10;
  p.build_window = 24;
  DynamicIndex<FloatStore> idx(FloatStore(8, Metric::euclidean), p);
  const auto x = gaussian(1200, 8, 8);
  std::vector<std::size_t> a(600), b(600);
  std::iota(a.begin(), a.end(), 0);
  std::iota(b.begin(), b.end(), 600);
  idx.build(x.select(a));
  idx.insert_batch(x.select(b));
  idx.graph().check_invariants();
  EXPECT_EQ(idx.size(), 1200u);
  EXPECT_THROW(idx.insert_batch(x.select(b)), ArgumentError);
}

TEST(Index, SearchArgumentChecks) {
  IndexParams p;
  DynamicIndex<FloatStore> idx(FloatStore(3, Metric::euclidean), p);
  idx.build(gaussian(10, 3, 9));
  const std::vector<float> q{0, 0, 0};
  EXPECT_THROW(idx.search(q, 0, 5), ArgumentError);
  EXPECT_THROW(idx.search(q, 6, 5), ArgumentError);
  EXPECT_THROW(idx.search(std::vector<float>{0, 0}, 1, 5), ArgumentError);
  EXPECT_THROW(idx.search(q, 1, 5, true), StateError);
}

namespace {

std::pair<VectorDataset, VectorDataset> unit_split(double separation) {
  auto all = generate_clustered_dataset({3050, 24, 6, separation, 3}).first;
  for (std::size_t i = 0; i < all.size(); ++i) normalize_in_place(all.row(i));
  std::vector<std::size_t> base(3000), held(50);
  std::iota(base.begin(), base.end(), 0);
  std::iota(held.begin(), held.end(), 3000);
  return {all.select(base), all.select(held)};
}

double ip_recall(const VectorDataset& x, const VectorDataset& q, float alpha,
                 PruneSchedule prune = PruneSchedule::staged) {
  EncodingConfig enc{8, 0, Layout::turbo, 1, 1.0};
  IndexParams p;
  p.max_degree = 24;
  p.build_window = 64;
  p.alpha = alpha;
  p.prune = prune;
  auto idx = make_index(24, Metric::inner_product, enc, fit_centers(x, Metric::inner_product, enc, 0), p);
  idx->build(x);
  const auto gt = brute_force_knn(q, x, Metric::inner_product, 10);
  return mean_recall(idx->search_batch(q, 10, 100, false), gt, 10);
}

}  // namespace

TEST(Index, InnerProductLvqRecall) {
  // Unit-norm data; on raw mixtures low-norm points lose all in-edges.
  const auto [x, q] = unit_split(1.0);
  EXPECT_GE(ip_recall(x, q, 0.0f), 0.9);
}

TEST(Index, InnerProductTightClusters) {
  // Cosines near 1 inside each cluster, so 0.95 alone barely prunes there.
  const auto [x, q] = unit_split(2.0);
  EXPECT_GE(ip_recall(x, q, 0.0f), 0.9);
  EXPECT_GE(ip_recall(x, q, 1.0f), 0.9);
}

TEST(Index, SingleRoundPruneSplitsTightClusters) {
  // Without the alpha = 1 round the lists fill with same-cluster points and
  // whole clusters become unreachable.
  const auto [x, q] = unit_split(2.0);
  EXPECT_LT(ip_recall(x, q, 0.0f, PruneSchedule::single), 0.5);
}

}  // namespace
}  // namespace streamlvq
