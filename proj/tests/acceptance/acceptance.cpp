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
// Acceptance run: one PASS/FAIL line per criterion. `--only 3,5` restricts
// the run; the exit status is nonzero when any selected criterion fails.

#include <fmt/core.h>

#include <CLI11.hpp>
#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <deque>
#include <exception>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "streamlvq/dataio.hpp"
#include "streamlvq/engine.hpp"
#include "streamlvq/errors.hpp"
#include "streamlvq/graph.hpp"
#include "streamlvq/index.hpp"
#include "streamlvq/layout.hpp"
#include "streamlvq/mlvq.hpp"
#include "streamlvq/oracle.hpp"
#include "streamlvq/quantize.hpp"
#include "streamlvq/store.hpp"
#include "streamlvq/stream.hpp"
#include "streamlvq/study.hpp"

using namespace streamlvq;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

VectorDataset gaussian(std::size_t n, std::size_t d, std::uint64_t seed, float scale = 1.0f) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> g(0.0f, scale);
  VectorDataset out(d);
  std::vector<float> row(d);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& v : row) v = g(rng);
    out.append(row, i);
  }
  return out;
}

// Clustered base set plus held-out queries drawn from the same mixture.
struct Workload {
  VectorDataset base, queries, learn;
  std::vector<std::uint32_t> base_labels, query_labels, learn_labels;
};

Workload clustered(std::size_t n, std::size_t nq, std::size_t nl, std::size_t d, std::size_t f, std::uint64_t seed) {
  const auto [all, labeling] = generate_clustered_dataset({n + nq + nl, d, f, 2.0, seed});
  const double total = static_cast<double>(n + nq + nl);
  std::vector<double> fractions{static_cast<double>(n) / total, static_cast<double>(nq) / total};
  if (nl) fractions.push_back(static_cast<double>(nl) / total);
  const auto parts = split_indices(all.size(), fractions, seed + 1);
  Workload w;
  auto take = [&](const std::vector<std::size_t>& rows, VectorDataset& out, std::vector<std::uint32_t>& labels) {
    out = all.select(rows);
    for (const auto r : rows) labels.push_back(labeling.labels[r]);
  };
  take(parts[0], w.base, w.base_labels);
  take(parts[1], w.queries, w.query_labels);
  if (nl) take(parts[2], w.learn, w.learn_labels);
  return w;
}

// 1. Per-component error bounds for both levels.
Outcome quantization_bounds() {
  const auto t0 = Clock::now();
  std::size_t vectors = 0;
  std::size_t checks = 0;
  for (const std::size_t d : {8u, 32u, 512u}) {
    auto x = gaussian(10000, d, d, 3.0f);
    std::vector<float> row(d);
    std::fill(row.begin(), row.end(), 4.0f);
    x.append(row, 90001);  // constant
    std::fill(row.begin(), row.end(), 0.0f);
    row[d / 2] = 1e4f;
    x.append(row, 90002);  // one spike
    for (std::size_t j = 0; j < d; ++j) row[j] = j % 2 ? -1.0f : 1.0f;
    x.append(row, 90003);  // alternating
    for (std::size_t j = 0; j < d; ++j) row[j] = 1e-7f * static_cast<float>(j);
    x.append(row, 90004);  // tiny range
    for (std::size_t j = 0; j < d; ++j) row[j] = j == 0 ? -3e4f : 3e4f;
    x.append(row, 90005);  // wide range, one outlier
    const auto mu = compute_mean(x).values;
    vectors += x.size();
    for (const unsigned b1 : {2u, 4u, 8u}) {
      for (const unsigned b2 : {0u, 2u, 8u}) {
        for (std::size_t i = 0; i < x.size(); ++i) {
          const auto e = lvq_encode(x.row(i), mu, {double(b1), double(b2)});
          const auto b = vector_bounds(x.row(i), mu);
          const double slack = 4 * std::numeric_limits<float>::epsilon() * (b.upper - b.lower + 1e-30);
          const double step = e.step;
          const auto one = decode_centered(e, DecodeLevel::one);
          const auto two = b2 ? decode_centered(e, DecodeLevel::two) : one;
          const double bound2 = b2 ? step / (2 * (std::exp2(b2) - 1)) : step / 2;
          for (std::size_t j = 0; j < d; ++j) {
            const double r = static_cast<double>(x.row(i)[j]) - mu[j];
            if (std::abs(r - one[j]) > step / 2 + slack || std::abs(r - two[j]) > bound2 + slack) {
              return {false, fmt::format("d={} B1={} B2={} vector {} component {} out of bounds", d, b1, b2, i, j)};
            }
            checks += 2;
          }
        }
      }
    }
  }
  const double s = seconds_since(t0);
  return {s < 10.0, fmt::format("{} vectors, {} component checks, {:.1f} s (limit 10 s)", vectors, checks, s)};
}

// 2. Turbo and sequential layouts: round trip, cross-layout agreement, zero
// padding.
Outcome layout_equivalence() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2);
  std::size_t cases = 0;
  for (const std::size_t d : {64u, 127u, 128u, 129u, 160u, 511u, 512u, 768u}) {
    for (const unsigned bits : {4u, 8u}) {
      std::uniform_int_distribution<unsigned> code(0, (1u << bits) - 1);
      for (int rep = 0; rep < 64; ++rep) {
        std::vector<std::uint16_t> codes(d);
        for (auto& c : codes) c = static_cast<std::uint16_t>(rep == 0 ? (1u << bits) - 1 : code(rng));
        const auto turbo = pack(codes, bits, Layout::turbo);
        const auto seq = pack(codes, bits, Layout::sequential);
        if (unpack(turbo.view()) != codes || unpack(seq.view()) != codes) {
          return {false, fmt::format("round trip failed for d={} bits={}", d, bits)};
        }
        for (std::size_t j = 0; j < d; ++j) {
          if (turbo.view().code(j) != seq.view().code(j)) {
            return {false, fmt::format("layouts disagree at d={} bits={} j={}", d, bits, j)};
          }
        }
        for (const auto* p : {&turbo, &seq}) {
          if (p->bytes().size() != packed_size(d, bits, p->layout()) || p->bytes().size() % 32 != 0) {
            return {false, fmt::format("unexpected size for d={} bits={}", d, bits)};
          }
          // Unused slots must be zero even when the target buffer was dirty.
          std::vector<std::uint8_t> dirty(p->bytes().size(), 0xff);
          pack_into(codes, bits, p->layout(), dirty);
          if (dirty != p->bytes()) return {false, fmt::format("padding not cleared for d={} bits={}", d, bits)};
          if (rep == 0) {
            std::size_t ones = 0;
            for (const auto b : p->bytes()) ones += static_cast<std::size_t>(std::popcount(b));
            if (ones != d * bits) return {false, fmt::format("nonzero padding for d={} bits={}", d, bits)};
          }
        }
        ++cases;
      }
    }
  }
  const double s = seconds_since(t0);
  return {s < 5.0, fmt::format("{} packed vectors bit-exact across layouts, {:.2f} s (limit 5 s)", cases, s)};
}

// 3. M-LVQ with the sample mean as its only center is plain LVQ.
Outcome single_center_reduction() {
  std::size_t compared = 0;
  for (const std::size_t d : {32u, 100u}) {
    const auto x = gaussian(2000, d, 30 + d, 2.0f);
    const auto mu = compute_mean(x).values;
    const auto centers = CenterSet::from_mean(mu);
    for (const auto& [b1, b2] : std::vector<std::pair<double, double>>{{4, 0}, {4, 8}, {8, 0}, {8, 8}, {2, 2}}) {
      for (std::size_t i = 0; i < x.size(); ++i) {
        const auto a = lvq_encode(x.row(i), mu, {b1, b2});
        const auto m = mlvq_encode(x.row(i), centers, {b1, b2});
        const bool same = a.primary == m.primary && a.residual == m.residual &&
                          std::bit_cast<std::uint32_t>(a.lower) == std::bit_cast<std::uint32_t>(m.lower) &&
                          std::bit_cast<std::uint32_t>(a.step) == std::bit_cast<std::uint32_t>(m.step) && m.center == 0;
        if (!same) return {false, fmt::format("encodings differ at d={} B1={} B2={} vector {}", d, b1, b2, i)};
        const auto level = b2 > 0 ? DecodeLevel::two : DecodeLevel::one;
        if (lvq_decode(a, level, mu) != mlvq_decode(m, level, centers)) {
          return {false, fmt::format("decodings differ at d={} B1={} B2={} vector {}", d, b1, b2, i)};
        }
        ++compared;
      }
    }
  }
  return {true, fmt::format("{} encodings identical", compared)};
}

bool connected_from_entry(const ProximityGraph& g) {
  std::vector<char> seen(g.slot_count(), 0);
  std::deque<std::uint32_t> todo{g.entry_point()};
  seen[g.entry_point()] = 1;
  std::size_t reached = 1;
  while (!todo.empty()) {
    const auto u = todo.front();
    todo.pop_front();
    for (const auto v : g.neighbors(u)) {
      if (!seen[v]) {
        seen[v] = 1;
        ++reached;
        todo.push_back(v);
      }
    }
  }
  return reached == g.live_count();
}

// 4. Exhaustive window returns the exact top-k.
Outcome exhaustive_oracle_equality() {
  const auto x = gaussian(2000, 16, 4);
  const auto q = gaussian(100, 16, 5);
  auto index = make_index(16, Metric::euclidean, EncodingConfig{0, 0, Layout::turbo, 1, 1.0}, {}, IndexParams{});
  index->build(x);
  if (!connected_from_entry(index->graph())) return {false, "built graph is not connected from its entry point"};
  const auto truth = brute_force_knn(q, x, Metric::euclidean, 10);
  const auto res = index->search_batch(q, 10, x.size(), false);
  std::size_t mismatches = 0;
  for (std::size_t i = 0; i < q.size(); ++i) mismatches += res[i].ids != truth.ids[i];
  const double recall = mean_recall(res, truth, 10);
  return {mismatches == 0, fmt::format("recall {:.4f}, {} of 100 result lists differ from brute force", recall,
                                       mismatches)};
}

// 5. Static recall at 1e5 vectors with LVQ-4x8 and re-ranking.
Outcome static_recall() {
  const auto t0 = Clock::now();
  const auto w = clustered(100000, 1000, 0, 32, 16, 5);
  const EncodingConfig enc{4, 8, Layout::turbo, 1, 1.0};
  auto index = make_index(32, Metric::euclidean, enc, fit_centers(w.base, Metric::euclidean, enc, 5), IndexParams{});
  index->build(w.base);
  const double build_s = seconds_since(t0);
  const auto truth = brute_force_knn(w.queries, w.base, Metric::euclidean, 10);
  const auto cal = calibrate_window(*index, w.queries, truth, 0.9, 10, true, 500);
  const double s = seconds_since(t0);
  return {cal.reached && cal.window <= 500 && s < 300.0,
          fmt::format("W={} recall {:.4f}{}, build {:.0f} s, total {:.0f} s (limit 300 s)", cal.window, cal.recall,
                      cal.reached ? "" : " (target not reached)", build_s, s)};
}

// 6. First-level error against bit count, including a fractional one.
Outcome error_monotonicity() {
  const auto t0 = Clock::now();
  const auto x = gaussian(5000, 64, 6);
  const auto mu = compute_mean(x).values;
  std::vector<double> eps;
  std::string trace;
  for (unsigned b = 2; b <= 8; ++b) {
    eps.push_back(epsilon1(x, mu, b).total);
    trace += fmt::format(" {}:{:.4g}", b, eps.back());
  }
  bool ok = true;
  for (std::size_t i = 1; i < eps.size(); ++i) ok = ok && eps[i] < eps[i - 1];
  const double half = epsilon1(x, mu, 4.5).total;
  ok = ok && half < eps[2] && half > eps[3];
  const double s = seconds_since(t0);
  return {ok && s < 30.0, fmt::format("eps1{} 4.5:{:.4g}, {:.1f} s", trace, half, s)};
}

// Unreached cells count as one step past the end of the grid.
std::size_t step_of(const WindowCell& c, std::size_t grid_size) { return c.reached ? c.grid_index : grid_size; }

// 7. Window ratio against first-level bits.
Outcome quant_study_shape() {
  const auto t0 = Clock::now();
  const auto w = clustered(20000, 500, 0, 32, 16, 7);
  const std::vector<double> b1{2, 3, 4, 5, 6, 7, 8};
  const std::vector<double> b2{2, 4, 8};
  StudyParams p;
  p.seed = 7;
  const auto res = quant_window_study(w.base, w.queries, b1, b2, {}, p);
  const std::size_t grid = window_grid(p.k, p.window_cap).size();
  if (!res.base_reached) return {false, "full precision never reached the target"};
  auto cell = [&](std::size_t i, std::size_t r) { return res.cells[i * b2.size() + r]; };
  bool ok = true;
  std::string ratios;
  for (std::size_t i = 0; i < b1.size(); ++i) {
    const auto c = cell(i, 2);
    ratios += c.reached ? fmt::format(" {:g}:{:.2f}", b1[i], c.ratio) : fmt::format(" {:g}:-", b1[i]);
    if (i > 0 && step_of(c, grid) > step_of(cell(i - 1, 2), grid) + 1) ok = false;
  }
  std::string top;
  for (std::size_t r = 0; r < b2.size(); ++r) {
    const auto c = cell(b1.size() - 1, r);
    top += fmt::format(" B2={:g}:{:.2f}", b2[r], c.ratio);
    ok = ok && c.reached && c.ratio <= 1.1;
  }
  const double s = seconds_since(t0);
  return {ok && s < 900.0, fmt::format("base W={}; ratio at B2=8 by B1{}; B1=8{}; {:.0f} s", res.base_window, ratios,
                                       top, s)};
}

// 8. Window against the sample fraction used for the mean.
Outcome mean_study_shape() {
  const auto t0 = Clock::now();
  const auto w = clustered(20000, 500, 0, 32, 16, 8);
  StudyParams p;
  p.seed = 8;
  const auto rows = mean_subsample_study(w.base, w.queries, {0.01, 0.05, 0.10, 1.0}, 4, 8, p);
  std::size_t full = 0;
  for (const auto& r : rows) {
    if (r.fraction == 1.0) full = r.grid_index;
  }
  bool ok = true;
  std::string trace;
  for (const auto& r : rows) {
    trace += fmt::format(" {:g}:W={}", r.fraction, r.window);
    const auto gap = r.grid_index > full ? r.grid_index - full : full - r.grid_index;
    ok = ok && r.reached && gap <= 1;
  }
  const double s = seconds_since(t0);
  return {ok && s < 900.0, fmt::format("{}; {:.0f} s", trace, s)};
}

// 9. IID stream on 1e5 vectors.
Outcome iid_stability() {
  const auto t0 = Clock::now();
  const auto w = clustered(100000, 1000, 1000, 32, 16, 9);
  IidScheduleParams sp;
  sp.seed = 9;
  const auto schedule = make_iid_schedule(w.base.ids, sp);
  StreamConfig cfg;
  cfg.seed = 9;
  const StreamData data{w.base, w.queries, w.learn, {}, {}, {}};
  std::vector<IterationMetrics> rows;
  try {
    rows = run_stream(schedule, data, cfg);
  } catch (const std::exception& e) {
    return {false, e.what()};
  }
  const double r0 = rows.front().recall;
  double worst = 0.0;
  for (const auto& m : rows) worst = std::max(worst, std::abs(m.recall - r0));
  const double s = seconds_since(t0);
  return {rows.size() == 21 && worst <= 0.05 && s < 600.0,
          fmt::format("W={} recall(0)={:.4f}, max drift {:.4f} over {} cycles, invariants held, {:.0f} s",
                      rows.front().window, r0, worst, rows.size() - 1, s)};
}

// 10. Distribution-shift stream on a 16-cluster mixture.
Outcome shift_stability() {
  const auto t0 = Clock::now();
  const auto w = clustered(30000, 1000, 1000, 32, 16, 10);
  ClusterLabeling labeling;
  labeling.dim = 32;
  labeling.labels = w.base_labels;
  std::vector<double> sums(16 * 32, 0.0);
  std::vector<std::size_t> counts(16, 0);
  for (std::size_t i = 0; i < w.base.size(); ++i) {
    ++counts[w.base_labels[i]];
    for (std::size_t j = 0; j < 32; ++j) sums[w.base_labels[i] * 32 + j] += w.base.row(i)[j];
  }
  for (std::size_t i = 0; i < sums.size(); ++i) {
    labeling.centroids.push_back(static_cast<float>(sums[i] / static_cast<double>(std::max<std::size_t>(1, counts[i / 32]))));
  }
  ShiftScheduleParams sp;
  sp.seed = 10;
  const auto schedule = make_shift_schedule(w.base.ids, labeling, sp);
  StreamConfig cfg;
  cfg.seed = 10;
  cfg.epsilon_centers = 16;
  cfg.queries_per_measure = 500;
  const StreamData data{w.base, w.queries, w.learn, w.base_labels, w.query_labels, w.learn_labels};
  std::vector<IterationMetrics> rows;
  try {
    rows = run_stream(schedule, data, cfg);
  } catch (const std::exception& e) {
    return {false, e.what()};
  }
  double anchor = -1.0;
  double worst = 0.0;
  std::size_t steady = 0, error_ok = 0, measured = 0;
  for (const auto& m : rows) {
    if (m.phase == Phase::steady) {
      if (anchor < 0.0) return {false, "no calibration before the steady state"};
      worst = std::max(worst, std::abs(m.recall - anchor));
      ++steady;
    } else if (m.calibrated_here && m.phase == Phase::ramp_up) {
      anchor = m.recall;
    }
    ++measured;
    error_ok += m.epsilon1_multi <= m.epsilon1;
  }
  const double s = seconds_since(t0);
  return {steady == 15 && worst <= 0.05 && error_ok == measured && s < 900.0,
          fmt::format("post-ramp recall {:.4f}, max drift {:.4f} over {} steady cycles; M=16 eps1 <= LVQ eps1 at {}/{} "
                      "measures; {:.0f} s",
                      anchor, worst, steady, error_ok, measured, s)};
}

// 11. Deletion: path bridging and tombstone filtering.
Outcome deletion_semantics() {
  {
    const auto x = VectorDataset::from_rows({{0.0f}, {1.0f}, {2.0f}});
    FloatStore store(1, Metric::euclidean);
    for (std::uint32_t i = 0; i < 3; ++i) store.set(i, x.row(i));
    ProximityGraph g(4);
    for (std::uint32_t i = 0; i < 3; ++i) g.add_node(i);
    g.add_edge(0, 1);
    g.add_edge(1, 2);
    g.tombstone(1);
    consolidate_graph(g, store);
    const auto n0 = g.neighbors(0);
    if (g.present(1) || std::find(n0.begin(), n0.end(), 2u) == n0.end()) return {false, "a->b->c did not become a->c"};
    g.check_invariants();
  }
  const auto x = gaussian(5000, 16, 11);
  const EncodingConfig enc{4, 8, Layout::turbo, 1, 1.0};
  IndexParams p;
  p.max_degree = 32;
  p.build_window = 64;
  auto index = make_index(16, Metric::euclidean, enc, fit_centers(x, Metric::euclidean, enc, 11), p);
  index->build(x);
  std::mt19937_64 rng(11);
  std::vector<std::uint64_t> ids(x.size());
  std::iota(ids.begin(), ids.end(), 0);
  std::shuffle(ids.begin(), ids.end(), rng);
  const std::set<std::uint64_t> deleted(ids.begin(), ids.begin() + 500);
  for (const auto id : deleted) index->remove(id);
  std::vector<std::size_t> rows(deleted.begin(), deleted.end());
  rows.resize(200);
  const auto probes = x.select(rows);  // the deleted vectors themselves
  std::size_t leaks = 0;
  auto scan = [&] {
    for (const std::size_t win : {10u, 50u, 400u}) {
      for (const bool rr : {false, true}) {
        for (const auto& r : index->search_batch(probes, 10, win, rr)) {
          for (const auto id : r.ids) leaks += deleted.count(id);
        }
      }
    }
  };
  scan();
  const std::size_t removed = index->consolidate();
  scan();
  index->graph().check_invariants();
  return {leaks == 0 && removed == 500,
          fmt::format("bridging ok; {} deleted ids returned before or after consolidating {} nodes", leaks, removed)};
}

// 12. Turbo versus sequential timing. Informational only.
Outcome kernel_timing() {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<float> uni(-1.0f, 1.0f);
  std::string trace;
  bool slower = false;
  for (const std::size_t d : {128u, 512u, 768u}) {
    std::vector<float> q(d);
    for (auto& v : q) v = uni(rng);
    std::uniform_int_distribution<unsigned> code(0, 15);
    std::vector<PackedCodes> turbo, seq;
    for (int i = 0; i < 500; ++i) {
      std::vector<std::uint16_t> codes(d);
      for (auto& c : codes) c = static_cast<std::uint16_t>(code(rng));
      turbo.push_back(pack(codes, 4, Layout::turbo));
      seq.push_back(pack(codes, 4, Layout::sequential));
    }
    auto time = [&](const std::vector<PackedCodes>& set) {
      double best = 1e300;
      volatile float sink = 0.0f;
      for (int rep = 0; rep < 200; ++rep) {
        float acc = 0.0f;
        const auto t0 = Clock::now();
        for (const auto& p : set) acc += detail::fused_scan_unchecked(p.view(), q.data(), Metric::inner_product, 0.1f, 0.05f);
        best = std::min(best, std::chrono::duration<double, std::nano>(Clock::now() - t0).count() / 500.0);
        sink = sink + acc;
      }
      return best;
    };
    const double tt = time(turbo), ts = time(seq);
    slower = slower || tt > ts;
    trace += fmt::format(" d={}: {:.1f} vs {:.1f} ns", d, tt, ts);
  }
  return {true, fmt::format("turbo vs sequential 4-bit{}{}", trace,
                            slower ? " (warning: turbo slower somewhere on this machine)" : "")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"streamlvq acceptance run"};
  std::vector<int> only;
  app.add_option("--only", only, "Criteria to run (default: all)")->delimiter(',')->check(CLI::Range(1, 12));
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"quantization error bounds", quantization_bounds},
      {"layout equivalence", layout_equivalence},
      {"single-center reduction", single_center_reduction},
      {"exhaustive search equals brute force", exhaustive_oracle_equality},
      {"static recall at 1e5", static_recall},
      {"first-level error monotone in bits", error_monotonicity},
      {"window ratio against bits", quant_study_shape},
      {"window against mean sample size", mean_study_shape},
      {"IID stream stability", iid_stability},
      {"shift stream stability", shift_stability},
      {"deletion semantics", deletion_semantics},
      {"kernel timing (informational)", kernel_timing},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int n = static_cast<int>(i + 1);
    if (!only.empty() && std::find(only.begin(), only.end(), n) == only.end()) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, fmt::format("exception: {}", e.what())};
    }
    failures += !o.pass;
    fmt::print("criterion {:>2} {}: {} ({})\n", n, o.pass ? "PASS" : "FAIL", criteria[i].first, o.detail);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
