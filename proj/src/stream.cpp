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
#include "streamlvq/stream.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "streamlvq/errors.hpp"
#include "streamlvq/quantize.hpp"

namespace streamlvq {

double recall_at_k(std::span<const std::uint64_t> retrieved, std::span<const std::uint64_t> truth, std::size_t k) {
  if (k == 0) throw ArgumentError("k must be at least 1");
  if (retrieved.size() != k || truth.size() != k) {
    throw ArgumentError("recall@k needs exactly k ids on both sides (k = " + std::to_string(k) + ", got " +
                        std::to_string(retrieved.size()) + " and " + std::to_string(truth.size()) + ")");
  }
  std::vector<std::uint64_t> a(retrieved.begin(), retrieved.end());
  std::vector<std::uint64_t> b(truth.begin(), truth.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  a.erase(std::unique(a.begin(), a.end()), a.end());
  std::vector<std::uint64_t> common;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
  return static_cast<double>(common.size()) / static_cast<double>(k);
}

double mean_recall(const std::vector<SearchResult>& results, const GroundTruth& truth, std::size_t k) {
  if (results.size() != truth.ids.size()) throw ArgumentError("result and ground-truth query counts differ");
  if (results.empty()) return 0.0;
  if (truth.k < k) throw ArgumentError("ground truth holds fewer than k neighbors");
  double total = 0.0;
  for (std::size_t q = 0; q < results.size(); ++q) {
    std::vector<std::uint64_t> got(results[q].ids.begin(), results[q].ids.end());
    // A short result (tiny live set) counts its missing slots as misses.
    got.resize(k, std::numeric_limits<std::uint64_t>::max());
    total += recall_at_k(got, std::span<const std::uint64_t>(truth.ids[q]).first(k), k);
  }
  return total / static_cast<double>(results.size());
}

std::string to_string(EventKind kind) {
  switch (kind) {
    case EventKind::add:
      return "add";
    case EventKind::remove:
      return "remove";
    case EventKind::consolidate:
      return "consolidate";
    case EventKind::measure:
      return "measure";
  }
  return "unknown";
}

std::string to_string(Phase phase) {
  switch (phase) {
    case Phase::init:
      return "init";
    case Phase::ramp_up:
      return "ramp_up";
    case Phase::steady:
      return "steady";
  }
  return "unknown";
}

std::vector<std::size_t> StreamSchedule::live_counts() const {
  std::vector<std::size_t> out;
  std::size_t live = init_ids.size();
  for (const auto& e : events) {
    if (e.kind == EventKind::add) live += e.ids.size();
    if (e.kind == EventKind::remove) live -= e.ids.size();
    if (e.kind == EventKind::measure) out.push_back(live);
  }
  return out;
}

void StreamSchedule::validate() const {
  std::unordered_set<std::uint64_t> live;
  std::unordered_set<std::uint64_t> seen;
  for (const auto id : init_ids) {
    if (!live.insert(id).second) throw StateError("id " + std::to_string(id) + " appears twice in the initial set");
    seen.insert(id);
  }
  for (const auto& e : events) {
    for (const auto id : e.ids) {
      if (e.kind == EventKind::add) {
        if (!live.insert(id).second) {
          throw StateError("cycle " + std::to_string(e.cycle) + ": id " + std::to_string(id) + " added while live");
        }
        seen.insert(id);
      } else if (e.kind == EventKind::remove) {
        if (live.erase(id) == 0) {
          throw StateError("cycle " + std::to_string(e.cycle) + ": id " + std::to_string(id) +
                           (seen.count(id) ? " removed while not live" : " removed before it was added"));
        }
      }
    }
  }
}

std::size_t iid_batch_size(std::size_t live) { return std::max<std::size_t>(1, live / 100); }

namespace {

std::size_t fraction_of(std::size_t n, double f) {
  return static_cast<std::size_t>(std::floor(f * static_cast<double>(n) + 1e-9));
}

// k distinct elements of `from` chosen uniformly; `from` is reordered.
std::vector<std::uint64_t> sample_without_replacement(std::vector<std::uint64_t>& from, std::size_t k,
                                                      std::mt19937_64& rng) {
  k = std::min(k, from.size());
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, from.size() - 1);
    std::swap(from[i], from[pick(rng)]);
  }
  return {from.begin(), from.begin() + static_cast<std::ptrdiff_t>(k)};
}

StreamEvent event(EventKind kind, std::size_t cycle, Phase phase, std::vector<std::uint64_t> ids = {}) {
  StreamEvent e;
  e.kind = kind;
  e.cycle = cycle;
  e.phase = phase;
  e.ids = std::move(ids);
  return e;
}

}  // namespace

StreamSchedule make_iid_schedule(std::span<const std::uint64_t> ids, const IidScheduleParams& params) {
  const std::size_t n = ids.size();
  if (params.init_fraction <= 0.0 || params.init_fraction > 1.0) throw ArgumentError("init fraction must be in (0, 1]");
  if (params.consolidate_every == 0) throw ArgumentError("consolidation period must be positive");
  const std::size_t init = fraction_of(n, params.init_fraction);
  if (init == 0) throw ArgumentError("dataset too small for the IID protocol");
  {
    std::unordered_set<std::uint64_t> unique(ids.begin(), ids.end());
    if (unique.size() != n) throw ArgumentError("ids must be unique");
  }
  std::mt19937_64 rng(params.seed);
  std::vector<std::uint64_t> order(ids.begin(), ids.end());
  std::shuffle(order.begin(), order.end(), rng);

  StreamSchedule s;
  s.init_ids.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(init));
  std::vector<std::uint8_t> live(n, 0);
  std::unordered_map<std::uint64_t, std::size_t> pos;
  for (std::size_t i = 0; i < n; ++i) pos.emplace(ids[i], i);
  for (const auto id : s.init_ids) live[pos[id]] = 1;

  StreamEvent first = event(EventKind::measure, 0, Phase::init);
  first.calibrate = true;
  s.events.push_back(first);
  std::size_t live_count = init;
  for (std::size_t t = 1; t <= params.cycles; ++t) {
    std::vector<std::uint64_t> current;
    std::vector<std::uint64_t> pool;
    for (std::size_t i = 0; i < n; ++i) (live[i] ? current : pool).push_back(ids[i]);
    const std::size_t batch = std::max<std::size_t>(1, fraction_of(live_count, params.batch_fraction));
    if (pool.empty()) break;
    const std::size_t size = std::min(batch, pool.size());
    auto removed = sample_without_replacement(current, size, rng);
    auto added = sample_without_replacement(pool, size, rng);
    for (const auto id : removed) live[pos[id]] = 0;
    for (const auto id : added) live[pos[id]] = 1;
    s.events.push_back(event(EventKind::remove, t, Phase::steady, std::move(removed)));
    s.events.push_back(event(EventKind::add, t, Phase::steady, std::move(added)));
    if (t % params.consolidate_every == 0) s.events.push_back(event(EventKind::consolidate, t, Phase::steady));
    s.events.push_back(event(EventKind::measure, t, Phase::steady));
    s.cycles = t;
  }
  return s;
}

std::size_t farthest_cluster(const ClusterLabeling& labeling) {
  const std::size_t f = labeling.cluster_count();
  if (f == 0) throw ArgumentError("labeling has no clusters");
  std::size_t best = 0;
  double best_sum = -1.0;
  for (std::size_t i = 0; i < f; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < f; ++j) {
      const auto a = labeling.centroid(i);
      const auto b = labeling.centroid(j);
      for (std::size_t k = 0; k < labeling.dim; ++k) {
        const double t = static_cast<double>(a[k]) - static_cast<double>(b[k]);
        sum += t * t;
      }
    }
    if (sum > best_sum) {
      best_sum = sum;
      best = i;
    }
  }
  return best;
}

StreamSchedule make_shift_schedule(std::span<const std::uint64_t> ids, const ClusterLabeling& labeling,
                                   const ShiftScheduleParams& params) {
  const std::size_t n = ids.size();
  const std::size_t f = labeling.cluster_count();
  if (labeling.labels.size() != n) throw ArgumentError("labels and ids differ in length");
  if (f < 2) throw ArgumentError("the shift protocol needs at least two clusters");
  if (params.consolidate_every == 0) throw ArgumentError("consolidation period must be positive");
  if (!(params.init_fraction > 0.0 && params.init_fraction <= params.live_fraction && params.live_fraction <= 1.0)) {
    throw ArgumentError("need 0 < init fraction <= live fraction <= 1");
  }
  for (const auto l : labeling.labels) {
    if (l >= f) throw ArgumentError("label " + std::to_string(l) + " has no centroid");
  }
  const std::size_t batch = params.batch ? params.batch : std::max<std::size_t>(1, fraction_of(n, 0.02));
  const std::size_t init_target = std::max<std::size_t>(1, fraction_of(n, params.init_fraction));
  const std::size_t live_target = std::max(init_target, fraction_of(n, params.live_fraction));

  std::mt19937_64 rng(params.seed);
  std::vector<std::vector<std::uint64_t>> members(f);
  for (std::size_t i = 0; i < n; ++i) members[labeling.labels[i]].push_back(ids[i]);
  for (auto& m : members) std::shuffle(m.begin(), m.end(), rng);

  const std::size_t star = farthest_cluster(labeling);
  std::vector<std::pair<double, std::size_t>> by_distance;
  for (std::size_t j = 0; j < f; ++j) {
    if (j == star) continue;
    double dist = 0.0;
    for (std::size_t k = 0; k < labeling.dim; ++k) {
      const double t = static_cast<double>(labeling.centroid(j)[k]) - static_cast<double>(labeling.centroid(star)[k]);
      dist += t * t;
    }
    by_distance.emplace_back(dist, j);
  }
  std::sort(by_distance.begin(), by_distance.end());
  std::vector<std::size_t> order{star};
  for (const auto& [dist, j] : by_distance) order.push_back(j);

  // Consumption cursor over clusters in entry order.
  std::vector<std::size_t> taken(f, 0);
  std::size_t cursor = 0;
  auto take_ordered = [&](std::size_t count) {
    std::vector<std::uint64_t> out;
    while (out.size() < count && cursor < order.size()) {
      const auto c = order[cursor];
      while (out.size() < count && taken[c] < members[c].size()) out.push_back(members[c][taken[c]++]);
      if (taken[c] == members[c].size()) ++cursor;
    }
    return out;
  };

  StreamSchedule s;
  s.init_ids = take_ordered(init_target);
  std::vector<std::uint64_t> live(s.init_ids);
  s.events.push_back(event(EventKind::measure, 0, Phase::init));

  std::size_t t = 0;
  while (live.size() < live_target) {
    auto added = take_ordered(std::min(batch, live_target - live.size()));
    if (added.empty()) break;
    ++t;
    live.insert(live.end(), added.begin(), added.end());
    s.events.push_back(event(EventKind::add, t, Phase::ramp_up, std::move(added)));
    if (t % params.consolidate_every == 0) s.events.push_back(event(EventKind::consolidate, t, Phase::ramp_up));
    s.events.push_back(event(EventKind::measure, t, Phase::ramp_up));
  }
  s.events.back().calibrate = true;

  for (std::size_t cycle = 0; cycle < params.steady_cycles; ++cycle) {
    std::vector<std::size_t> open;
    for (std::size_t c = 0; c < f; ++c) {
      if (taken[c] < members[c].size()) open.push_back(c);
    }
    if (open.empty()) break;
    std::vector<std::uint64_t> added;
    while (added.size() < batch && !open.empty()) {
      std::uniform_int_distribution<std::size_t> pick(0, open.size() - 1);
      const std::size_t slot = pick(rng);
      const auto c = open[slot];
      while (added.size() < batch && taken[c] < members[c].size()) added.push_back(members[c][taken[c]++]);
      if (taken[c] == members[c].size()) open.erase(open.begin() + static_cast<std::ptrdiff_t>(slot));
    }
    ++t;
    auto removed = sample_without_replacement(live, added.size(), rng);
    live.erase(live.begin(), live.begin() + static_cast<std::ptrdiff_t>(removed.size()));
    live.insert(live.end(), added.begin(), added.end());
    s.events.push_back(event(EventKind::remove, t, Phase::steady, std::move(removed)));
    s.events.push_back(event(EventKind::add, t, Phase::steady, std::move(added)));
    if (t % params.consolidate_every == 0) s.events.push_back(event(EventKind::consolidate, t, Phase::steady));
    s.events.push_back(event(EventKind::measure, t, Phase::steady));
  }
  s.cycles = t;
  return s;
}

std::vector<std::size_t> window_grid(std::size_t k, std::size_t cap) {
  if (k == 0) throw ArgumentError("k must be at least 1");
  if (cap < k) throw ArgumentError("window cap " + std::to_string(cap) + " is below k = " + std::to_string(k));
  std::vector<std::size_t> grid;
  for (int i = 0;; ++i) {
    const auto w = static_cast<std::size_t>(std::llround(static_cast<double>(k) * std::exp2(i / 8.0)));
    if (w >= cap) break;
    if (grid.empty() || grid.back() != w) grid.push_back(w);
  }
  grid.push_back(cap);
  return grid;
}

CalibrationResult calibrate_window(const std::function<double(std::size_t)>& recall_at, std::size_t k,
                                   std::size_t cap, double target_recall) {
  const auto grid = window_grid(k, cap);
  std::map<std::size_t, double> cache;
  CalibrationResult out;
  auto probe = [&](std::size_t i) {
    auto it = cache.find(i);
    if (it != cache.end()) return it->second;
    const double r = recall_at(grid[i]);
    cache.emplace(i, r);
    out.probes.push_back({grid[i], r});
    return r;
  };
  auto finish = [&](std::size_t i, bool reached) {
    out.window = grid[i];
    out.grid_index = i;
    out.recall = probe(i);
    out.reached = reached;
    return out;
  };
  if (probe(0) >= target_recall) return finish(0, true);
  std::size_t lo = 0;
  std::size_t hi = 0;
  const std::size_t last = grid.size() - 1;
  for (std::size_t i = 1;; i = std::min(2 * i, last)) {
    if (probe(i) >= target_recall) {
      hi = i;
      break;
    }
    lo = i;
    if (i == last) return finish(last, false);
  }
  while (hi - lo > 1) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (probe(mid) >= target_recall) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return finish(hi, true);
}

CalibrationResult calibrate_window(const AnyIndex& index, const VectorDataset& queries, const GroundTruth& truth,
                                   double target_recall, std::size_t k, bool rerank, std::size_t cap) {
  if (cap == 0) cap = index.size();
  cap = std::max(cap, k);
  return calibrate_window(
      [&](std::size_t w) { return mean_recall(index.search_batch(queries, k, w, rerank), truth, k); }, k, cap,
      target_recall);
}

VectorDataset sample_matching_queries(const VectorDataset& pool, std::span<const std::uint32_t> pool_labels,
                                      std::span<const std::uint32_t> live_labels, std::size_t count,
                                      std::uint64_t seed) {
  if (pool_labels.size() != pool.size()) throw ArgumentError("query pool labels and rows differ in length");
  std::map<std::uint32_t, std::size_t> live_per;
  for (const auto l : live_labels) ++live_per[l];
  std::map<std::uint32_t, std::vector<std::size_t>> rows_per;
  for (std::size_t i = 0; i < pool.size(); ++i) rows_per[pool_labels[i]].push_back(i);
  if (live_labels.empty() || count == 0) return VectorDataset(pool.dim);

  struct Share {
    std::uint32_t label;
    std::size_t quota;
    double remainder;
  };
  std::vector<Share> shares;
  std::size_t assigned = 0;
  for (const auto& [label, c] : live_per) {
    const double exact = static_cast<double>(count) * static_cast<double>(c) / static_cast<double>(live_labels.size());
    const auto q = static_cast<std::size_t>(std::floor(exact));
    shares.push_back({label, q, exact - static_cast<double>(q)});
    assigned += q;
  }
  std::vector<std::size_t> by_remainder(shares.size());
  std::iota(by_remainder.begin(), by_remainder.end(), 0);
  std::stable_sort(by_remainder.begin(), by_remainder.end(),
                   [&](std::size_t a, std::size_t b) { return shares[a].remainder > shares[b].remainder; });
  for (std::size_t i = 0; assigned < count && i < by_remainder.size(); ++i, ++assigned) {
    ++shares[by_remainder[i]].quota;
  }

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> chosen;
  for (const auto& s : shares) {
    auto it = rows_per.find(s.label);
    if (it == rows_per.end()) continue;
    auto rows = it->second;
    std::shuffle(rows.begin(), rows.end(), rng);
    rows.resize(std::min(rows.size(), s.quota));
    chosen.insert(chosen.end(), rows.begin(), rows.end());
  }
  std::sort(chosen.begin(), chosen.end());
  return pool.select(chosen);
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

[[noreturn]] void rethrow_with_cycle(std::size_t cycle) {
  const std::string where = "cycle " + std::to_string(cycle) + ": ";
  try {
    throw;
  } catch (const ArgumentError& e) {
    throw ArgumentError(where + e.what());
  } catch (const FormatError& e) {
    throw FormatError(where + e.what());
  } catch (const StateError& e) {
    throw StateError(where + e.what());
  }
}

}  // namespace

std::vector<IterationMetrics> run_stream(const StreamSchedule& schedule, const StreamData& data,
                                         const StreamConfig& config, const MetricsCallback& on_measure) {
  const bool labelled = !data.base_labels.empty();
  if (labelled && data.base_labels.size() != data.base.size()) throw ArgumentError("base labels and rows differ");
  if (data.queries.empty()) throw ArgumentError("query pool is empty");
  if (config.k == 0) throw ArgumentError("k must be at least 1");
  std::unordered_map<std::uint64_t, std::size_t> row_of;
  row_of.reserve(data.base.size());
  for (std::size_t i = 0; i < data.base.size(); ++i) row_of.emplace(data.base.ids[i], i);
  auto rows_of = [&](std::span<const std::uint64_t> ids) {
    std::vector<std::size_t> rows;
    rows.reserve(ids.size());
    for (const auto id : ids) {
      const auto it = row_of.find(id);
      if (it == row_of.end()) throw ArgumentError("schedule id " + std::to_string(id) + " is not in the dataset");
      rows.push_back(it->second);
    }
    return rows;
  };

  const auto init = data.base.select(rows_of(schedule.init_ids));
  const auto centers = fit_centers(init, config.metric, config.encoding, config.seed);
  auto index = make_index(init.dim, config.metric, config.encoding, centers, config.index);
  index->build(init);

  // First-level error trackers, fitted once on the initial set.
  const bool track_error = config.encoding.quantized() && config.metric == Metric::euclidean;
  MeanVector init_mean;
  CenterSet multi_centers;
  if (track_error) {
    init_mean = compute_mean(init, 1.0, config.seed);
    if (config.epsilon_centers > 1) {
      EncodingConfig multi = config.encoding;
      multi.centers = config.epsilon_centers;
      multi.mean_fraction = 1.0;
      multi_centers = fit_centers(init, config.metric, multi, config.seed);
    }
  }

  const bool rerank = index->has_residuals();
  const VectorDataset& learn_pool = data.learn.empty() ? data.queries : data.learn;
  const auto& learn_labels = data.learn.empty() ? data.query_labels : data.learn_labels;
  std::size_t window = config.fixed_window;
  bool reached = true;
  double add_s = 0.0;
  double delete_s = 0.0;
  double consolidate_s = 0.0;
  std::vector<IterationMetrics> rows;

  for (const auto& e : schedule.events) {
    try {
      switch (e.kind) {
        case EventKind::add: {
          const auto batch = data.base.select(rows_of(e.ids));
          const auto t0 = Clock::now();
          index->insert_batch(batch);
          add_s += seconds_since(t0);
          break;
        }
        case EventKind::remove: {
          const auto t0 = Clock::now();
          for (const auto id : e.ids) index->remove(id);
          delete_s += seconds_since(t0);
          break;
        }
        case EventKind::consolidate: {
          const auto t0 = Clock::now();
          index->consolidate();
          consolidate_s += seconds_since(t0);
          break;
        }
        case EventKind::measure: {
          if (config.check_invariants) index->graph().check_invariants();
          const auto live_ids = index->live_ids();
          const auto live_rows = rows_of(live_ids);
          const auto live = data.base.select(live_rows);
          std::vector<std::uint32_t> live_labels;
          if (labelled) {
            for (const auto r : live_rows) live_labels.push_back(data.base_labels[r]);
          }
          auto pick_queries = [&](const VectorDataset& pool, const std::vector<std::uint32_t>& labels,
                                  std::uint64_t salt) {
            if (!labelled || labels.empty()) return pool;
            const std::size_t count = config.queries_per_measure ? config.queries_per_measure : pool.size();
            return sample_matching_queries(pool, labels, live_labels, count,
                                           config.seed * 1000003u + e.cycle * 2u + salt);
          };
          const std::size_t k = std::min(config.k, live.size());
          IterationMetrics m;
          m.t = e.cycle;
          m.phase = e.phase;
          m.live_count = live.size();
          if (config.fixed_window == 0 && (e.calibrate || window == 0)) {
            const auto learn = pick_queries(learn_pool, learn_labels, 1);
            const auto truth = brute_force_knn(learn, live, config.metric, k);
            const auto cal = calibrate_window(*index, learn, truth, config.target_recall, k, rerank,
                                              config.window_cap ? std::min(config.window_cap, live.size()) : 0);
            window = cal.window;
            reached = cal.reached;
            m.calibrated_here = true;
          }
          m.window = std::max(window, k);
          m.calibration_reached = reached;
          const auto queries = pick_queries(data.queries, data.query_labels, 0);
          const auto truth = brute_force_knn(queries, live, config.metric, k);
          const auto t0 = Clock::now();
          const auto results = index->search_batch(queries, k, m.window, rerank);
          m.search_seconds = seconds_since(t0);
          m.recall = mean_recall(results, truth, k);
          double comps = 0.0;
          for (const auto& r : results) comps += static_cast<double>(r.distance_computations);
          m.dist_comps_per_query = queries.empty() ? 0.0 : comps / static_cast<double>(queries.size());
          m.qps = m.search_seconds > 0.0 ? static_cast<double>(queries.size()) / m.search_seconds : 0.0;
          m.add_seconds = add_s;
          m.delete_seconds = delete_s;
          m.consolidate_seconds = consolidate_s;
          add_s = delete_s = consolidate_s = 0.0;
          if (track_error) {
            m.epsilon1 = epsilon1(live, init_mean.values, config.encoding.primary_bits).per_vector;
            if (config.epsilon_centers > 1) {
              m.epsilon1_multi = epsilon1(live, multi_centers, config.encoding.primary_bits).per_vector;
            }
          }
          rows.push_back(m);
          if (on_measure) on_measure(m);
          break;
        }
      }
    } catch (...) {
      rethrow_with_cycle(e.cycle);
    }
  }
  return rows;
}

std::string metrics_csv(const std::vector<IterationMetrics>& rows) {
  std::ostringstream out;
  out << "t,phase,live_count,W,recall,dist_comps_per_query,qps,add_seconds,consolidate_seconds\n";
  out.precision(10);
  for (const auto& m : rows) {
    out << m.t << ',' << to_string(m.phase) << ',' << m.live_count << ',' << m.window << ',' << m.recall << ','
        << m.dist_comps_per_query << ',' << m.qps << ',' << m.add_seconds << ',' << m.consolidate_seconds << '\n';
  }
  return out.str();
}

}  // namespace streamlvq
