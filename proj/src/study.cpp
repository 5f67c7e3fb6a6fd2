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
#include "streamlvq/study.hpp"

#include <algorithm>
#include <cmath>

#include "streamlvq/engine.hpp"
#include "streamlvq/graph.hpp"
#include "streamlvq/mlvq.hpp"
#include "streamlvq/oracle.hpp"
#include "streamlvq/parallel.hpp"
#include "streamlvq/quantize.hpp"
#include "streamlvq/store.hpp"
#include "streamlvq/stream.hpp"

namespace streamlvq {

namespace {

struct Searchable {
  const ProximityGraph* graph;
  const VectorDataset* base;
  const VectorDataset* queries;
  const GroundTruth* truth;
  std::size_t k;
};

template <typename Store>
std::pair<double, double> evaluate(const Searchable& s, const Store& store, std::size_t window, bool rerank_results) {
  std::vector<SearchResult> results(s.queries->size());
  parallel_for(s.queries->size(), [&](std::size_t qi) {
    const auto q = store.prepare(s.queries->row(qi));
    SearchStats stats;
    const auto pool = greedy_search(*s.graph, store, q, window, &stats);
    std::vector<Neighbor> top;
    if (rerank_results) {
      top = rerank(std::span<const Neighbor>(pool), q, store, std::min(s.k, pool.size()));
      stats.distance_computations += pool.size();
    } else {
      top = live_top_k(*s.graph, pool, s.k);
    }
    auto& r = results[qi];
    r.distance_computations = stats.distance_computations;
    for (const auto& n : top) r.ids.push_back(s.base->ids[n.id]);
  });
  double comps = 0.0;
  for (const auto& r : results) comps += static_cast<double>(r.distance_computations);
  return {mean_recall(results, *s.truth, s.k), comps / static_cast<double>(std::max<std::size_t>(1, results.size()))};
}

template <typename Store>
CalibrationResult calibrate(const Searchable& s, const Store& store, bool rerank_results, const StudyParams& params) {
  const std::size_t cap = std::max(s.k, std::min(params.window_cap, s.base->size()));
  return calibrate_window([&](std::size_t w) { return evaluate(s, store, w, rerank_results).first; }, s.k, cap,
                          params.target_recall);
}

ProximityGraph build_float_graph(const VectorDataset& base, const FloatStore& store, const StudyParams& params) {
  GraphBuildParams gp;
  gp.max_degree = params.index.max_degree;
  gp.build_window = params.index.build_window;
  gp.alphas = {1.0f, params.index.alpha > 0.0f ? params.index.alpha : default_alpha(params.metric)};
  gp.prune = params.index.prune;
  gp.seed = params.seed;
  return build_graph(store, base.size(), [&](std::uint32_t i) { return base.row(i); }, gp);
}

void check_inputs(const VectorDataset& base, const VectorDataset& queries, const StudyParams& params) {
  base.validate();
  queries.validate();
  if (base.empty() || queries.empty()) throw ArgumentError("studies need non-empty base and query sets");
  if (base.dim != queries.dim) throw ArgumentError("base and query dimensions differ");
  if (params.k == 0 || params.k > base.size()) throw ArgumentError("k must be in [1, n]");
  if (params.metric == Metric::cosine) throw ArgumentError("studies support euclidean and inner_product");
}

}  // namespace

QuantStudyResult quant_window_study(const VectorDataset& base, const VectorDataset& queries,
                                    const std::vector<double>& primary_bits, const std::vector<double>& residual_bits,
                                    const std::vector<std::size_t>& multi_centers, const StudyParams& params) {
  check_inputs(base, queries, params);
  for (const double b : primary_bits) {
    if (!(b > 0.0)) throw ArgumentError("first-level bits must be positive");
  }
  for (const double b : residual_bits) {
    if (!(b >= 0.0)) throw ArgumentError("second-level bits must be non-negative");
  }
  FloatStore full(base.dim, params.metric);
  for (std::size_t i = 0; i < base.size(); ++i) full.set(static_cast<std::uint32_t>(i), base.row(i));
  const auto graph = build_float_graph(base, full, params);
  const auto truth = brute_force_knn(queries, base, params.metric, params.k);
  const Searchable s{&graph, &base, &queries, &truth, params.k};

  QuantStudyResult out;
  const auto baseline = calibrate(s, full, false, params);
  out.base_window = baseline.window;
  out.base_grid_index = baseline.grid_index;
  out.base_recall = baseline.recall;
  out.base_reached = baseline.reached;

  const auto mean = compute_mean(base, 1.0, params.seed);
  for (const double b1 : primary_bits) {
    std::vector<std::vector<float>> two_level(residual_bits.size(), std::vector<float>(base.size() * base.dim));
    FloatStore first(base.dim, params.metric);
    for (std::size_t i = 0; i < base.size(); ++i) {
      std::vector<float> row(base.dim);
      for (std::size_t r = 0; r < residual_bits.size(); ++r) {
        const auto enc = fractional_encode(base.row(i), b1, residual_bits[r], mean.values);
        for (std::size_t j = 0; j < base.dim; ++j) {
          two_level[r][i * base.dim + j] = static_cast<float>(static_cast<double>(mean.values[j]) + enc.two_level[j]);
          row[j] = static_cast<float>(static_cast<double>(mean.values[j]) + enc.first_level[j]);
        }
      }
      if (residual_bits.empty()) {
        const auto enc = fractional_encode(base.row(i), b1, 0.0, mean.values);
        for (std::size_t j = 0; j < base.dim; ++j) {
          row[j] = static_cast<float>(static_cast<double>(mean.values[j]) + enc.first_level[j]);
        }
      }
      first.set(static_cast<std::uint32_t>(i), row);
    }
    for (std::size_t r = 0; r < residual_bits.size(); ++r) {
      WindowCell cell;
      cell.primary_bits = b1;
      cell.residual_bits = residual_bits[r];
      CalibrationResult cal;
      if (residual_bits[r] > 0.0) {
        FloatStore store = first;
        for (std::size_t i = 0; i < base.size(); ++i) {
          store.set_secondary(static_cast<std::uint32_t>(i),
                              std::span<const float>(two_level[r].data() + i * base.dim, base.dim));
        }
        cal = calibrate(s, store, true, params);
      } else {
        cal = calibrate(s, first, false, params);
      }
      cell.window = cal.window;
      cell.grid_index = cal.grid_index;
      cell.recall = cal.recall;
      cell.reached = cal.reached && out.base_reached;
      cell.ratio = static_cast<double>(cal.window) / static_cast<double>(out.base_window);
      out.cells.push_back(cell);
    }
    out.errors.push_back({b1, 1, epsilon1(base, mean.values, b1).per_vector});
  }
  for (const auto m : multi_centers) {
    if (m < 2) continue;
    EncodingConfig enc;
    enc.primary_bits = 4;
    enc.centers = m;
    const auto centers = fit_centers(base, params.metric, enc, params.seed);
    for (const double b1 : primary_bits) out.errors.push_back({b1, m, epsilon1(base, centers, b1).per_vector});
  }
  return out;
}

std::vector<MeanStudyRow> mean_subsample_study(const VectorDataset& base, const VectorDataset& queries,
                                               const std::vector<double>& fractions, unsigned primary_bits,
                                               unsigned residual_bits, const StudyParams& params) {
  check_inputs(base, queries, params);
  std::vector<double> all(fractions);
  for (const double f : all) {
    if (!(f > 0.0 && f <= 1.0)) throw ArgumentError("mean sample fractions must be in (0, 1]");
  }
  if (std::find(all.begin(), all.end(), 1.0) == all.end()) all.push_back(1.0);

  FloatStore full(base.dim, params.metric);
  for (std::size_t i = 0; i < base.size(); ++i) full.set(static_cast<std::uint32_t>(i), base.row(i));
  const auto graph = build_float_graph(base, full, params);
  const auto truth = brute_force_knn(queries, base, params.metric, params.k);
  const Searchable s{&graph, &base, &queries, &truth, params.k};

  LvqStoreConfig config;
  config.primary_bits = primary_bits;
  config.residual_bits = residual_bits;
  std::vector<MeanStudyRow> rows;
  for (const double f : all) {
    const auto mean = compute_mean(base, f, params.seed);
    LvqStore store(base.dim, params.metric, config, CenterSet::from_mean(mean.values));
    for (std::size_t i = 0; i < base.size(); ++i) store.set(static_cast<std::uint32_t>(i), base.row(i));
    const auto cal = calibrate(s, store, residual_bits > 0, params);
    MeanStudyRow row;
    row.fraction = f;
    row.window = cal.window;
    row.grid_index = cal.grid_index;
    row.recall = cal.recall;
    row.reached = cal.reached;
    row.dist_comps_per_query = evaluate(s, store, cal.window, residual_bits > 0).second;
    row.epsilon1 = epsilon1(base, mean.values, primary_bits).per_vector;
    rows.push_back(row);
  }
  const auto full_row = std::find_if(rows.begin(), rows.end(), [](const MeanStudyRow& r) { return r.fraction == 1.0; });
  for (auto& r : rows) r.ratio = static_cast<double>(r.window) / static_cast<double>(full_row->window);
  return rows;
}

}  // namespace streamlvq
