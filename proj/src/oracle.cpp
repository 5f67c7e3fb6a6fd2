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
#include "streamlvq/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "streamlvq/errors.hpp"
#include "streamlvq/parallel.hpp"

namespace streamlvq {

double exact_similarity(std::span<const float> q, std::span<const float> x, Metric metric) {
  if (q.size() != x.size()) throw ArgumentError("dimension mismatch");
  double acc = 0.0;
  switch (metric) {
    case Metric::euclidean:
      for (std::size_t j = 0; j < q.size(); ++j) {
        const double t = static_cast<double>(q[j]) - static_cast<double>(x[j]);
        acc += t * t;
      }
      return -acc;
    case Metric::inner_product:
      for (std::size_t j = 0; j < q.size(); ++j) acc += static_cast<double>(q[j]) * static_cast<double>(x[j]);
      return acc;
    case Metric::cosine: {
      double nq = 0.0;
      double nx = 0.0;
      for (std::size_t j = 0; j < q.size(); ++j) {
        acc += static_cast<double>(q[j]) * static_cast<double>(x[j]);
        nq += static_cast<double>(q[j]) * static_cast<double>(q[j]);
        nx += static_cast<double>(x[j]) * static_cast<double>(x[j]);
      }
      if (nq == 0.0 || nx == 0.0) throw ArgumentError("cosine similarity of a zero vector");
      return acc / std::sqrt(nq * nx);
    }
  }
  return 0.0;
}

GroundTruth brute_force_knn(const VectorDataset& queries, const VectorDataset& live, Metric metric, std::size_t k) {
  if (live.empty()) throw ArgumentError("live set is empty");
  if (k == 0) throw ArgumentError("k must be at least 1");
  if (k > live.size()) {
    throw ArgumentError("k = " + std::to_string(k) + " exceeds the live-set size " + std::to_string(live.size()));
  }
  if (queries.dim != live.dim) throw ArgumentError("query and data dimensions differ");
  GroundTruth gt;
  gt.k = k;
  gt.ids.resize(queries.size());
  gt.similarities.resize(queries.size());
  parallel_for(queries.size(), [&](std::size_t qi) {
    struct Item {
      double sim;
      std::uint64_t id;
    };
    const auto better = [](const Item& a, const Item& b) { return a.sim > b.sim || (a.sim == b.sim && a.id < b.id); };
    std::vector<Item> items(live.size());
    const auto q = queries.row(qi);
    for (std::size_t i = 0; i < live.size(); ++i) items[i] = {exact_similarity(q, live.row(i), metric), live.ids[i]};
    std::partial_sort(items.begin(), items.begin() + static_cast<std::ptrdiff_t>(k), items.end(), better);
    auto& ids = gt.ids[qi];
    auto& sims = gt.similarities[qi];
    ids.resize(k);
    sims.resize(k);
    for (std::size_t j = 0; j < k; ++j) {
      ids[j] = items[j].id;
      sims[j] = items[j].sim;
    }
  });
  return gt;
}

void write_ground_truth(const std::filesystem::path& prefix, const GroundTruth& gt) {
  std::vector<std::vector<std::int32_t>> rows;
  VectorDataset sims(gt.k);
  rows.reserve(gt.ids.size());
  for (std::size_t q = 0; q < gt.ids.size(); ++q) {
    std::vector<std::int32_t> row;
    std::vector<float> srow;
    for (std::size_t j = 0; j < gt.ids[q].size(); ++j) {
      if (gt.ids[q][j] > static_cast<std::uint64_t>(std::numeric_limits<std::int32_t>::max())) {
        throw ArgumentError("id " + std::to_string(gt.ids[q][j]) + " does not fit the ivecs format");
      }
      row.push_back(static_cast<std::int32_t>(gt.ids[q][j]));
      srow.push_back(static_cast<float>(gt.similarities[q][j]));
    }
    rows.push_back(std::move(row));
    sims.append(srow, q);
  }
  write_ivecs(std::filesystem::path(prefix.string() + ".ivecs"), rows);
  write_fvecs(std::filesystem::path(prefix.string() + ".fvecs"), sims);
}

GroundTruth read_ground_truth(const std::filesystem::path& prefix) {
  const auto rows = read_ivecs(std::filesystem::path(prefix.string() + ".ivecs"));
  const auto sims = read_fvecs(std::filesystem::path(prefix.string() + ".fvecs"));
  if (rows.size() != sims.size()) throw FormatError("ground truth: id and similarity files disagree");
  GroundTruth gt;
  gt.k = rows.empty() ? 0 : rows.front().size();
  for (std::size_t q = 0; q < rows.size(); ++q) {
    if (rows[q].size() != gt.k || sims.dim != gt.k) throw FormatError("ground truth: ragged rows");
    std::vector<std::uint64_t> ids;
    std::vector<double> s;
    for (std::size_t j = 0; j < gt.k; ++j) {
      if (rows[q][j] < 0) throw FormatError("ground truth: negative id");
      ids.push_back(static_cast<std::uint64_t>(rows[q][j]));
      s.push_back(sims.row(q)[j]);
    }
    gt.ids.push_back(std::move(ids));
    gt.similarities.push_back(std::move(s));
  }
  return gt;
}

}  // namespace streamlvq
