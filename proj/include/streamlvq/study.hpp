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

// Quantization-level studies over a static graph built from full-precision
// vectors: window size needed for a target recall as a function of the
// encoding, and sensitivity to the sample size used for the mean.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "streamlvq/dataio.hpp"
#include "streamlvq/index.hpp"
#include "streamlvq/metric.hpp"

namespace streamlvq {

struct StudyParams {
  Metric metric = Metric::euclidean;
  IndexParams index;
  std::size_t k = 10;
  double target_recall = 0.9;
  std::size_t window_cap = 4096;  // windows above this count as "not reached"
  std::uint64_t seed = 0;
};

struct WindowCell {
  double primary_bits = 0.0;
  double residual_bits = 0.0;
  std::size_t window = 0;
  std::size_t grid_index = 0;
  double recall = 0.0;
  bool reached = false;
  double ratio = 0.0;  // window / full-precision window; meaningful when reached
};

struct ErrorPoint {
  double primary_bits = 0.0;
  std::size_t centers = 1;  // 1 for LVQ, M for M-LVQ
  double epsilon1 = 0.0;    // per vector
};

struct QuantStudyResult {
  std::size_t base_window = 0;
  std::size_t base_grid_index = 0;
  double base_recall = 0.0;
  bool base_reached = false;
  std::vector<WindowCell> cells;  // primary-major order of the inputs
  std::vector<ErrorPoint> errors;
};

/// For every (B1, B2) pair, searches the graph with first-level
/// reconstructions (fractional bit counts allowed), re-ranks with two-level
/// reconstructions when B2 > 0, and calibrates the window. Also reports the
/// first-level error of LVQ for each B1 and of M-LVQ for each M in
/// `multi_centers`.
QuantStudyResult quant_window_study(const VectorDataset& base, const VectorDataset& queries,
                                    const std::vector<double>& primary_bits, const std::vector<double>& residual_bits,
                                    const std::vector<std::size_t>& multi_centers, const StudyParams& params);

struct MeanStudyRow {
  double fraction = 1.0;
  std::size_t window = 0;
  std::size_t grid_index = 0;
  double recall = 0.0;
  bool reached = false;
  double ratio = 0.0;  // window / window of the full-sample mean
  double dist_comps_per_query = 0.0;
  double epsilon1 = 0.0;  // per vector
};

/// LVQ-B1xB2 with the mean estimated from each sample fraction; the last row
/// set is compared against fraction 1.0, which is always evaluated.
std::vector<MeanStudyRow> mean_subsample_study(const VectorDataset& base, const VectorDataset& queries,
                                               const std::vector<double>& fractions, unsigned primary_bits,
                                               unsigned residual_bits, const StudyParams& params);

}  // namespace streamlvq
