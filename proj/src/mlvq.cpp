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
#include "streamlvq/mlvq.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "streamlvq/errors.hpp"

namespace streamlvq {

namespace {

double squared_distance(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double t = static_cast<double>(a[j]) - static_cast<double>(b[j]);
    s += t * t;
  }
  return s;
}

struct Nearest {
  std::uint32_t index = 0;
  double distance = 0.0;
};

Nearest nearest_center(std::span<const float> x, const CenterSet& centers) {
  Nearest best{0, std::numeric_limits<double>::infinity()};
  for (std::size_t m = 0; m < centers.count(); ++m) {
    const double d = squared_distance(x, centers.center(m));
    if (d < best.distance) best = {static_cast<std::uint32_t>(m), d};
  }
  return best;
}

std::vector<float> kmeans_plus_plus(const VectorDataset& data, std::size_t count, const KMeansOptions& options,
                                    std::mt19937_64& rng) {
  const std::size_t n = data.size();
  const std::size_t dim = data.dim;
  std::vector<float> centers;
  centers.reserve(count * dim);
  for (const auto& seed : options.initial_centers) {
    if (seed.size() != dim) throw ArgumentError("initial center has the wrong dimension");
    if (centers.size() / dim == count) break;
    centers.insert(centers.end(), seed.begin(), seed.end());
  }
  if (centers.empty()) {
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    const auto first = data.row(pick(rng));
    centers.insert(centers.end(), first.begin(), first.end());
  }

  std::vector<double> closest(n, std::numeric_limits<double>::infinity());
  std::size_t scored = 0;  // centers already folded into `closest`
  while (centers.size() / dim < count) {
    for (; scored < centers.size() / dim; ++scored) {
      std::span<const float> c(centers.data() + scored * dim, dim);
      for (std::size_t i = 0; i < n; ++i) closest[i] = std::min(closest[i], squared_distance(data.row(i), c));
    }
    double total = 0.0;
    for (double d : closest) total += d;
    std::size_t chosen = 0;
    if (total > 0.0) {
      std::uniform_real_distribution<double> uniform(0.0, total);
      double target = uniform(rng);
      chosen = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        if (closest[i] <= 0.0) continue;
        if (target < closest[i]) {
          chosen = i;
          break;
        }
        target -= closest[i];
      }
      while (closest[chosen] <= 0.0 && chosen > 0) --chosen;
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      chosen = pick(rng);
    }
    const auto row = data.row(chosen);
    centers.insert(centers.end(), row.begin(), row.end());
  }
  return centers;
}

}  // namespace

CenterSet CenterSet::from_mean(std::span<const float> mean) {
  CenterSet c;
  c.dim = mean.size();
  c.centers.assign(mean.begin(), mean.end());
  return c;
}

unsigned center_id_bits(std::size_t count) {
  unsigned bits = 0;
  while ((std::size_t{1} << bits) < count) ++bits;
  return bits;
}

std::uint32_t assign_center(std::span<const float> x, const CenterSet& centers) {
  if (centers.count() == 0) throw ArgumentError("center set is empty");
  if (x.size() != centers.dim) throw ArgumentError("dimension mismatch between vector and centers");
  return nearest_center(x, centers).index;
}

double kmeans_objective(const VectorDataset& data, const CenterSet& centers) {
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) total += nearest_center(data.row(i), centers).distance;
  return total;
}

KMeansResult kmeans(const VectorDataset& data, std::size_t count, const KMeansOptions& options) {
  if (count == 0) throw ArgumentError("k-means needs at least one center");
  if (count > data.size()) {
    throw ArgumentError("k-means with " + std::to_string(count) + " centers needs at least that many vectors, got " +
                        std::to_string(data.size()));
  }
  const std::size_t n = data.size();
  const std::size_t dim = data.dim;
  std::mt19937_64 rng(options.seed);

  KMeansResult result;
  result.centers.dim = dim;
  result.centers.fit_seed = options.seed;
  result.centers.centers = kmeans_plus_plus(data, count, options, rng);
  result.assignment.assign(n, 0);

  std::vector<double> distance(n);
  std::vector<double> sums(count * dim);
  std::vector<std::size_t> sizes(count);
  const std::size_t max_iterations = std::max<std::size_t>(1, options.max_iterations);
  for (std::size_t iter = 0; iter < max_iterations; ++iter) {
    double objective = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto best = nearest_center(data.row(i), result.centers);
      result.assignment[i] = best.index;
      distance[i] = best.distance;
      objective += best.distance;
    }
    result.objective_history.push_back(objective);
    result.centers.fit_iterations = iter + 1;
    if (result.objective_history.size() >= 2) {
      const double previous = result.objective_history[result.objective_history.size() - 2];
      if (previous - objective <= options.tolerance * previous) break;
    }
    if (iter + 1 == max_iterations) break;

    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(sizes.begin(), sizes.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto m = result.assignment[i];
      const auto row = data.row(i);
      ++sizes[m];
      for (std::size_t j = 0; j < dim; ++j) sums[m * dim + j] += row[j];
    }
    for (std::size_t m = 0; m < count; ++m) {
      float* c = result.centers.centers.data() + m * dim;
      if (sizes[m] > 0) {
        for (std::size_t j = 0; j < dim; ++j) c[j] = static_cast<float>(sums[m * dim + j] / static_cast<double>(sizes[m]));
        continue;
      }
      // Empty cluster: move it onto the point currently farthest from its center.
      const auto far = static_cast<std::size_t>(std::max_element(distance.begin(), distance.end()) - distance.begin());
      const auto row = data.row(far);
      std::copy(row.begin(), row.end(), c);
      distance[far] = 0.0;
    }
  }
  return result;
}

CenterSet kmeans_fit(const VectorDataset& data, std::size_t count, const KMeansOptions& options) {
  return kmeans(data, count, options).centers;
}

EncodedVector mlvq_encode(std::span<const float> x, const CenterSet& centers, const QuantizerConfig& config) {
  const auto m = assign_center(x, centers);
  auto e = lvq_encode(x, centers.center(m), config);
  e.center = m;
  return e;
}

std::vector<float> mlvq_decode(const EncodedVector& e, DecodeLevel level, const CenterSet& centers) {
  if (e.center >= centers.count()) throw StateError("encoded center id is out of range");
  return lvq_decode(e, level, centers.center(e.center));
}

QuantizationError epsilon1(const VectorDataset& data, const CenterSet& centers, double primary_bits) {
  if (data.empty()) throw ArgumentError("epsilon1 needs a non-empty dataset");
  QuantizationError err;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto row = data.row(i);
    err.total += detail::squared_first_level_error(row, centers.center(assign_center(row, centers)), primary_bits);
  }
  err.per_vector = err.total / static_cast<double>(data.size());
  return err;
}

RefitResult mlvq_refit_ideal(const VectorDataset& data, std::size_t count, const QuantizerConfig& config,
                             const KMeansOptions& options) {
  RefitResult out;
  out.centers = kmeans_fit(data, count, options);
  out.encoded.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) out.encoded.push_back(mlvq_encode(data.row(i), out.centers, config));
  return out;
}

}  // namespace streamlvq
