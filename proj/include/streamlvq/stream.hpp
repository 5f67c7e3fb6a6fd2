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

// Streaming protocols, recall metrics, search-window calibration and the
// stream runner.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "streamlvq/dataio.hpp"
#include "streamlvq/engine.hpp"
#include "streamlvq/oracle.hpp"

namespace streamlvq {

/// |retrieved ∩ truth| / k. Both lists must hold exactly k ids.
double recall_at_k(std::span<const std::uint64_t> retrieved, std::span<const std::uint64_t> truth, std::size_t k);

/// Mean recall over queries, comparing each result with the first k truth ids.
double mean_recall(const std::vector<SearchResult>& results, const GroundTruth& truth, std::size_t k);

enum class EventKind : std::uint8_t { add, remove, consolidate, measure };
enum class Phase : std::uint8_t { init, ramp_up, steady };

std::string to_string(EventKind kind);
std::string to_string(Phase phase);

struct StreamEvent {
  EventKind kind = EventKind::measure;
  std::size_t cycle = 0;
  Phase phase = Phase::init;
  std::vector<std::uint64_t> ids;  // add/remove batches
  bool calibrate = false;          // measure events only: fix W here
};

struct StreamSchedule {
  std::vector<std::uint64_t> init_ids;
  std::vector<StreamEvent> events;
  std::size_t cycles = 0;

  /// Live-set size after each measure event, replaying the adds and removes.
  std::vector<std::size_t> live_counts() const;

  /// Throws StateError when an id is removed while not live or added while live.
  void validate() const;
};

/// Per-cycle batch size used by the IID protocol: 1% of the live set,
/// floored, at least 1.
std::size_t iid_batch_size(std::size_t live);

struct IidScheduleParams {
  std::size_t cycles = 20;
  double init_fraction = 0.70;
  double batch_fraction = 0.01;
  std::size_t consolidate_every = 5;
  std::uint64_t seed = 0;
};

/// Random 70% start; every cycle removes 1% of the live ids, then adds as
/// many ids drawn from those that were not live before the cycle.
StreamSchedule make_iid_schedule(std::span<const std::uint64_t> ids, const IidScheduleParams& params);

struct ShiftScheduleParams {
  std::size_t batch = 0;  // 0 selects 2% of n
  std::size_t steady_cycles = 15;
  double init_fraction = 0.05;
  double live_fraction = 0.70;
  std::size_t consolidate_every = 5;
  std::uint64_t seed = 0;
};

/// Index of the cluster maximizing the summed squared distance to all others.
std::size_t farthest_cluster(const ClusterLabeling& labeling);

/// Distribution-shift protocol over rows labeled by `labeling` (ids[i] is
/// the id of row i). Clusters enter nearest-first from the farthest one;
/// the steady state draws from randomly chosen reserved clusters.
StreamSchedule make_shift_schedule(std::span<const std::uint64_t> ids, const ClusterLabeling& labeling,
                                   const ShiftScheduleParams& params);

struct CalibrationProbe {
  std::size_t window = 0;
  double recall = 0.0;
};

struct CalibrationResult {
  std::size_t window = 0;       // smallest probed window meeting the target, or the cap
  std::size_t grid_index = 0;   // position of `window` in the calibration grid
  double recall = 0.0;          // recall at `window`
  bool reached = false;
  std::vector<CalibrationProbe> probes;
};

/// Candidate windows: distinct values of round(k * 2^(i/8)) below `cap`,
/// followed by `cap` itself. Adjacent entries are one calibration step apart.
std::vector<std::size_t> window_grid(std::size_t k, std::size_t cap);

/// Geometric probing over the grid followed by bisection. `recall_at` maps a
/// window to its mean recall.
CalibrationResult calibrate_window(const std::function<double(std::size_t)>& recall_at, std::size_t k,
                                   std::size_t cap, double target_recall);

/// Calibrates an index against fixed queries and ground truth.
CalibrationResult calibrate_window(const AnyIndex& index, const VectorDataset& queries, const GroundTruth& truth,
                                   double target_recall, std::size_t k, bool rerank, std::size_t cap = 0);

struct StreamConfig {
  Metric metric = Metric::euclidean;
  EncodingConfig encoding{4, 8, Layout::turbo, 1, 1.0};
  IndexParams index;
  std::size_t k = 10;
  double target_recall = 0.9;
  std::size_t fixed_window = 0;  // nonzero skips calibration
  std::size_t window_cap = 0;    // calibration cap; 0 means the live-set size
  std::size_t queries_per_measure = 0;  // shift protocol; 0 keeps the whole pool
  bool check_invariants = true;
  std::size_t epsilon_centers = 0;  // >1 also reports M-LVQ first-level error
  std::uint64_t seed = 0;
};

struct IterationMetrics {
  std::size_t t = 0;
  Phase phase = Phase::init;
  std::size_t live_count = 0;
  std::size_t window = 0;
  double recall = 0.0;
  double dist_comps_per_query = 0.0;
  double qps = 0.0;
  double add_seconds = 0.0;
  double delete_seconds = 0.0;
  double consolidate_seconds = 0.0;
  double search_seconds = 0.0;
  double epsilon1 = std::numeric_limits<double>::quiet_NaN();        // per vector, LVQ with the init mean
  double epsilon1_multi = std::numeric_limits<double>::quiet_NaN();  // per vector, M-LVQ with init centers
  bool calibrated_here = false;
  bool calibration_reached = true;
};

/// Vectors and query pools for a stream run. With labels present, each
/// measure samples queries cluster by cluster in proportion to the live set.
struct StreamData {
  VectorDataset base;
  VectorDataset queries;
  VectorDataset learn;
  std::vector<std::uint32_t> base_labels;
  std::vector<std::uint32_t> query_labels;
  std::vector<std::uint32_t> learn_labels;
};

/// Queries drawn per cluster in proportion to the live composition (largest
/// remainders), `count` in total, deterministic for a seed.
VectorDataset sample_matching_queries(const VectorDataset& pool, std::span<const std::uint32_t> pool_labels,
                                      std::span<const std::uint32_t> live_labels, std::size_t count,
                                      std::uint64_t seed);

using MetricsCallback = std::function<void(const IterationMetrics&)>;

std::vector<IterationMetrics> run_stream(const StreamSchedule& schedule, const StreamData& data,
                                         const StreamConfig& config, const MetricsCallback& on_measure = {});

/// CSV with the columns t, phase, live_count, W, recall, dist_comps_per_query,
/// qps, add_seconds, consolidate_seconds.
std::string metrics_csv(const std::vector<IterationMetrics>& rows);

}  // namespace streamlvq
