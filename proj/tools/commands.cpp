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
#include "commands.hpp"

#include <fmt/format.h>

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "streamlvq/dataio.hpp"
#include "streamlvq/engine.hpp"
#include "streamlvq/errors.hpp"
#include "streamlvq/layout.hpp"
#include "streamlvq/oracle.hpp"
#include "streamlvq/parallel.hpp"
#include "streamlvq/stream.hpp"
#include "streamlvq/study.hpp"

namespace streamlvq::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// ---- shared plumbing -------------------------------------------------------

json config_echo(const CLI::App& sub) {
  json out;
  out["command"] = sub.get_name();
  for (const CLI::Option* opt : sub.get_options()) {
    if (opt->get_lnames().empty()) continue;
    const auto& name = opt->get_lnames().front();
    if (name == "help" || name == "config") continue;
    if (opt->count() > 0) {
      const auto& res = opt->results();
      out["options"][name] = res.size() == 1 ? json(res.front()) : json(res);
    } else {
      out["options"][name] = opt->get_default_str();
    }
  }
  out["threads"] = num_threads();
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw std::runtime_error("failed writing " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

fs::path sibling(const fs::path& path, const std::string& suffix) { return fs::path(path.string() + suffix); }

std::vector<std::uint32_t> read_labels(const fs::path& path, std::size_t n) {
  const auto rows = read_ivecs(path);
  if (rows.size() != n) {
    throw ArgumentError(fmt::format("{} holds {} labels for {} vectors", path.string(), rows.size(), n));
  }
  std::vector<std::uint32_t> labels;
  labels.reserve(n);
  for (const auto& r : rows) {
    if (r.size() != 1 || r[0] < 0) throw FormatError("label file rows must hold one non-negative integer");
    labels.push_back(static_cast<std::uint32_t>(r[0]));
  }
  return labels;
}

ClusterLabeling labeling_from(const VectorDataset& data, const std::vector<std::uint32_t>& labels) {
  ClusterLabeling out;
  out.dim = data.dim;
  out.labels = labels;
  std::uint32_t f = 0;
  for (const auto l : labels) f = std::max(f, l + 1);
  std::vector<double> sums(static_cast<std::size_t>(f) * data.dim, 0.0);
  std::vector<std::size_t> counts(f, 0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    ++counts[labels[i]];
    for (std::size_t j = 0; j < data.dim; ++j) sums[labels[i] * data.dim + j] += data.row(i)[j];
  }
  out.centroids.resize(sums.size());
  for (std::size_t c = 0; c < f; ++c) {
    for (std::size_t j = 0; j < data.dim; ++j) {
      out.centroids[c * data.dim + j] =
          counts[c] ? static_cast<float>(sums[c * data.dim + j] / static_cast<double>(counts[c])) : 0.0f;
    }
  }
  return out;
}

struct Splits {
  VectorDataset base, queries, learn;
  std::vector<std::uint32_t> base_labels, query_labels, learn_labels;
};

// Holds out query and learn rows from a single file unless a separate query
// file was given.
Splits make_splits(const VectorDataset& data, const std::vector<std::uint32_t>* labels,
                   const std::optional<VectorDataset>& queries, std::size_t query_count, std::size_t learn_count,
                   std::uint64_t seed) {
  const std::size_t n = data.size();
  const std::size_t nq = queries ? 0 : query_count;
  if (nq + learn_count >= n) throw ArgumentError("query and learn counts leave no base vectors");
  const double dn = static_cast<double>(n);
  std::vector<double> fractions{static_cast<double>(n - nq - learn_count) / dn};
  if (nq) fractions.push_back(static_cast<double>(nq) / dn);
  if (learn_count) fractions.push_back(static_cast<double>(learn_count) / dn);
  const auto parts = split_indices(n, fractions, seed);
  Splits s;
  auto take = [&](const std::vector<std::size_t>& rows, VectorDataset& out, std::vector<std::uint32_t>& out_labels) {
    out = data.select(rows);
    if (labels) {
      for (const auto r : rows) out_labels.push_back((*labels)[r]);
    }
  };
  std::size_t p = 0;
  take(parts[p++], s.base, s.base_labels);
  if (nq) take(parts[p++], s.queries, s.query_labels);
  if (learn_count) take(parts[p++], s.learn, s.learn_labels);
  if (queries) s.queries = *queries;
  if (learn_count == 0) {
    s.learn = s.queries;
    s.learn_labels = s.query_labels;
  }
  return s;
}

IndexParams index_params(std::size_t r, std::size_t w_build, float alpha, const std::string& prune,
                         std::uint64_t seed) {
  if (r == 0) throw ArgumentError("--R must be positive");
  if (w_build == 0) throw ArgumentError("--w-build must be positive");
  if (alpha < 0.0f) throw ArgumentError("--alpha must be non-negative");
  IndexParams p;
  p.max_degree = r;
  p.build_window = w_build;
  p.alpha = alpha;
  p.prune = parse_prune_schedule(prune);
  p.seed = seed;
  return p;
}

EncodingConfig encoding_config(unsigned b1, unsigned b2, const std::string& layout, std::size_t m) {
  EncodingConfig e;
  e.primary_bits = b1;
  e.residual_bits = b2;
  e.layout = parse_layout(layout);
  e.centers = m;
  if (b1 != 0 && !layout_supports(b1)) throw ArgumentError("--b1 must be 0 (float32), 4 or 8");
  if (b2 > 8) throw ArgumentError("--b2 must be in [0, 8]");
  if (b1 == 0 && b2 != 0) throw ArgumentError("--b2 needs a quantized first level");
  if (m == 0) throw ArgumentError("--M must be at least 1");
  return e;
}

json metrics_json(const IterationMetrics& m) {
  json j{{"t", m.t},
         {"phase", to_string(m.phase)},
         {"live_count", m.live_count},
         {"W", m.window},
         {"recall", m.recall},
         {"dist_comps_per_query", m.dist_comps_per_query},
         {"qps", m.qps},
         {"add_seconds", m.add_seconds},
         {"delete_seconds", m.delete_seconds},
         {"consolidate_seconds", m.consolidate_seconds},
         {"search_seconds", m.search_seconds},
         {"calibrated_here", m.calibrated_here},
         {"calibration_reached", m.calibration_reached}};
  if (!std::isnan(m.epsilon1)) j["epsilon1"] = m.epsilon1;
  if (!std::isnan(m.epsilon1_multi)) j["epsilon1_multi"] = m.epsilon1_multi;
  return j;
}

// ---- option records ---------------------------------------------------------

struct Common {
  std::uint64_t seed = 0;
  std::string metric = "euclidean";
  std::string plot_dir;
};

struct GenOpts {
  std::size_t n = 100000, d = 32, clusters = 16;
  double separation = 2.0;
  std::string out;
};

struct GtOpts {
  std::string data, queries, out;
  std::size_t k = 10;
};

struct IndexOpts {
  unsigned b1 = 4, b2 = 8;
  std::string layout = "turbo";
  std::size_t m = 1, r = 64, w_build = 200;
  float alpha = 0.0f;
  std::string prune = "staged";
};

struct BuildOpts {
  std::string data, out;
};

struct SearchOpts {
  std::string index, queries, gt, out;
  std::size_t k = 10, w = 50;
  std::string rerank = "auto";
};

struct StreamOpts {
  std::string data, queries, labels, out;
  std::size_t cycles = 20, batch = 0, steady_cycles = 15, query_count = 1000, learn_count = 1000;
  std::size_t queries_per_measure = 0, k = 10, fixed_w = 0, window_cap = 0, epsilon_centers = 0;
  double target = 0.9;
};

struct StudyOpts {
  std::string data, queries, out;
  std::vector<double> b1{2, 3, 4, 4.5, 8}, b2{0, 2, 8}, fractions{0.01, 0.05, 0.10, 1.0};
  std::vector<std::size_t> centers{16};
  unsigned mean_b1 = 4, mean_b2 = 8;
  std::size_t k = 10, query_count = 1000, window_cap = 4096, r = 64, w_build = 200;
  float alpha = 0.0f;
  std::string prune = "staged";
  double target = 0.9;
};

struct BenchOpts {
  std::vector<std::size_t> dims{64, 128, 512, 768};
  std::size_t vectors = 4096, reps = 20;
  std::string out;
};

void add_index_options(CLI::App* sub, IndexOpts& o) {
  sub->add_option("--b1", o.b1, "First-level bits: 0 for float32, 4 or 8");
  sub->add_option("--b2", o.b2, "Second-level bits for re-ranking (0 disables)");
  sub->add_option("--layout", o.layout, "Code layout: turbo or sequential");
  sub->add_option("--M", o.m, "Number of means (1 is plain LVQ)");
  sub->add_option("--R", o.r, "Maximum out-degree");
  sub->add_option("--w-build", o.w_build, "Search window used while building");
  sub->add_option("--alpha", o.alpha, "Pruning relaxation (0 picks the metric default)");
  sub->add_option("--prune", o.prune, "Prune schedule: staged (alpha 1 first) or single");
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--seed", c.seed, "Random seed");
  sub->add_option("--metric", c.metric, "euclidean, inner_product or cosine");
  sub->add_option("--emit-plot-data", c.plot_dir, "Directory for plot-ready CSV files");
  sub->set_config("--config", "", "key=value configuration file; flags take precedence");
}

VectorDataset load(const std::string& path) {
  if (path.empty()) throw ArgumentError("--data is required");
  return load_dataset(path);
}

std::optional<VectorDataset> maybe_load(const std::string& path) {
  if (path.empty()) return std::nullopt;
  return load_dataset(path);
}

// ---- commands ---------------------------------------------------------------

int cmd_gen(const CLI::App& sub, const Common& c, const GenOpts& o) {
  if (o.out.empty()) throw ArgumentError("--out is required");
  if (o.n == 0 || o.d == 0 || o.clusters == 0) throw ArgumentError("--n, --d and --clusters must be positive");
  if (o.clusters > o.n) throw ArgumentError("--clusters exceeds --n");
  if (!(o.separation >= 0.0)) throw ArgumentError("--separation must be non-negative");
  const auto [data, labeling] = generate_clustered_dataset({o.n, o.d, o.clusters, o.separation, c.seed});
  const fs::path out(o.out);
  if (out.extension() == ".fvecs") {
    write_fvecs(out, data);
  } else {
    write_raw_matrix(out, data);
  }
  std::vector<std::vector<std::int32_t>> rows;
  rows.reserve(labeling.labels.size());
  for (const auto l : labeling.labels) rows.push_back({static_cast<std::int32_t>(l)});
  write_ivecs(sibling(out, ".labels.ivecs"), rows);
  auto echo = config_echo(sub);
  echo["outputs"] = {out.string(), sibling(out, ".labels.ivecs").string()};
  write_json(sibling(out, ".config.json"), echo);
  fmt::print("wrote {} vectors of dimension {} in {} clusters to {}\n", o.n, o.d, o.clusters, out.string());
  return 0;
}

int cmd_gt(const CLI::App& sub, const Common& c, const GtOpts& o) {
  if (o.queries.empty() || o.out.empty()) throw ArgumentError("--queries and --out are required");
  const auto data = load(o.data);
  const auto queries = load_dataset(o.queries);
  const auto gt = brute_force_knn(queries, data, parse_metric(c.metric), o.k);
  write_ground_truth(o.out, gt);
  write_json(sibling(o.out, ".config.json"), config_echo(sub));
  fmt::print("ground truth for {} queries (k = {}) written to {}.ivecs/.fvecs\n", queries.size(), o.k, o.out);
  return 0;
}

int cmd_build(const CLI::App& sub, const Common& c, const IndexOpts& io, const BuildOpts& o) {
  if (o.out.empty()) throw ArgumentError("--out is required");
  const auto metric = parse_metric(c.metric);
  const auto enc = encoding_config(io.b1, io.b2, io.layout, io.m);
  const auto params = index_params(io.r, io.w_build, io.alpha, io.prune, c.seed);
  const auto data = load(o.data);
  const auto t0 = std::chrono::steady_clock::now();
  const auto centers = fit_centers(data, metric, enc, c.seed);
  auto index = make_index(data.dim, metric, enc, centers, params);
  index->build(data);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  index->save(o.out);
  auto echo = config_echo(sub);
  echo["encoding"] = enc.label();
  echo["build_seconds"] = seconds;
  echo["vectors"] = data.size();
  write_json(sibling(o.out, ".config.json"), echo);
  fmt::print("built {} index over {} vectors in {:.2f} s -> {}\n", enc.label(), data.size(), seconds, o.out);
  return 0;
}

int cmd_search(const CLI::App& sub, const SearchOpts& o) {
  if (o.index.empty() || o.queries.empty() || o.out.empty()) {
    throw ArgumentError("--index, --queries and --out are required");
  }
  if (o.rerank != "auto" && o.rerank != "on" && o.rerank != "off") throw ArgumentError("--rerank is auto, on or off");
  const auto index = load_index(o.index);
  const auto queries = load_dataset(o.queries);
  const bool rerank = o.rerank == "on" || (o.rerank == "auto" && index->has_residuals());
  const auto t0 = std::chrono::steady_clock::now();
  const auto results = index->search_batch(queries, o.k, o.w, rerank);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  json out = config_echo(sub);
  double comps = 0.0;
  json ids = json::array();
  for (const auto& r : results) {
    ids.push_back(r.ids);
    comps += static_cast<double>(r.distance_computations);
  }
  out["results"] = ids;
  out["qps"] = seconds > 0 ? static_cast<double>(queries.size()) / seconds : 0.0;
  out["dist_comps_per_query"] = queries.empty() ? 0.0 : comps / static_cast<double>(queries.size());
  if (!o.gt.empty()) {
    const auto gt = read_ground_truth(o.gt);
    out["recall"] = mean_recall(results, gt, o.k);
    fmt::print("{}-recall@{} = {:.4f}\n", o.k, o.k, out["recall"].get<double>());
  }
  write_json(o.out, out);
  fmt::print("searched {} queries at W = {} ({:.0f} QPS)\n", queries.size(), o.w, out["qps"].get<double>());
  return 0;
}

int finish_stream(const CLI::App& sub, const Common& c, const StreamOpts& o, const std::string& default_out,
                  const std::vector<IterationMetrics>& rows, const json& extra) {
  const fs::path out(o.out.empty() ? default_out : o.out);
  write_text(out, metrics_csv(rows));
  json j = config_echo(sub);
  j["rows"] = json::array();
  for (const auto& m : rows) j["rows"].push_back(metrics_json(m));
  for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
  write_json(sibling(out, ".json"), j);
  if (!c.plot_dir.empty()) {
    std::string csv = "t,phase,qps,dist_comps_per_query,add_seconds,consolidate_seconds,recall,W\n";
    for (const auto& m : rows) {
      csv += fmt::format("{},{},{},{},{},{},{},{}\n", m.t, to_string(m.phase), m.qps, m.dist_comps_per_query,
                         m.add_seconds, m.consolidate_seconds, m.recall, m.window);
    }
    write_text(fs::path(c.plot_dir) / (sub.get_name() + "_over_time.csv"), csv);
  }
  fmt::print("{} metric rows written to {}\n", rows.size(), out.string());
  return 0;
}

StreamConfig stream_config(const Common& c, const IndexOpts& io, const StreamOpts& o) {
  if (o.k == 0) throw ArgumentError("--k must be at least 1");
  if (!(o.target >= 0.0 && o.target <= 1.0)) throw ArgumentError("--target-recall must be in [0, 1]");
  StreamConfig cfg;
  cfg.metric = parse_metric(c.metric);
  cfg.encoding = encoding_config(io.b1, io.b2, io.layout, io.m);
  cfg.index = index_params(io.r, io.w_build, io.alpha, io.prune, c.seed);
  cfg.k = o.k;
  cfg.target_recall = o.target;
  cfg.fixed_window = o.fixed_w;
  cfg.window_cap = o.window_cap;
  cfg.queries_per_measure = o.queries_per_measure;
  cfg.epsilon_centers = o.epsilon_centers;
  cfg.seed = c.seed;
  return cfg;
}

int cmd_stream_iid(const CLI::App& sub, const Common& c, const IndexOpts& io, const StreamOpts& o) {
  const auto cfg = stream_config(c, io, o);
  const auto data = load(o.data);
  const auto splits = make_splits(data, nullptr, maybe_load(o.queries), o.query_count, o.learn_count, c.seed);
  IidScheduleParams sp;
  sp.cycles = o.cycles;
  sp.seed = c.seed;
  const auto schedule = make_iid_schedule(splits.base.ids, sp);
  StreamData sd{splits.base, splits.queries, splits.learn, {}, {}, {}};
  const auto rows = run_stream(schedule, sd, cfg, [](const IterationMetrics& m) {
    fmt::print("t={:<3} live={:<7} W={:<5} recall={:.4f} comps/q={:.0f}\n", m.t, m.live_count, m.window, m.recall,
               m.dist_comps_per_query);
  });
  return finish_stream(sub, c, o, "stream_iid.csv", rows, {{"encoding", cfg.encoding.label()}});
}

int cmd_stream_shift(const CLI::App& sub, const Common& c, const IndexOpts& io, const StreamOpts& o) {
  const auto cfg = stream_config(c, io, o);
  const auto data = load(o.data);
  const fs::path labels_path = o.labels.empty() ? sibling(o.data, ".labels.ivecs") : fs::path(o.labels);
  if (!fs::exists(labels_path)) throw ArgumentError("cluster labels not found at " + labels_path.string());
  const auto labels = read_labels(labels_path, data.size());
  if (!o.queries.empty()) throw ArgumentError("the shift protocol draws queries from a labelled holdout; omit --queries");
  const auto splits = make_splits(data, &labels, std::nullopt, o.query_count, o.learn_count, c.seed);
  ShiftScheduleParams sp;
  sp.batch = o.batch;
  sp.steady_cycles = o.steady_cycles;
  sp.seed = c.seed;
  const auto schedule = make_shift_schedule(splits.base.ids, labeling_from(splits.base, splits.base_labels), sp);
  StreamData sd{splits.base, splits.queries, splits.learn, splits.base_labels, splits.query_labels, splits.learn_labels};
  const auto rows = run_stream(schedule, sd, cfg, [](const IterationMetrics& m) {
    fmt::print("t={:<3} {:<8} live={:<7} W={:<5} recall={:.4f} comps/q={:.0f}\n", m.t, to_string(m.phase),
               m.live_count, m.window, m.recall, m.dist_comps_per_query);
  });
  return finish_stream(sub, c, o, "stream_shift.csv", rows, {{"encoding", cfg.encoding.label()}});
}

StudyParams study_params(const Common& c, const StudyOpts& o) {
  StudyParams p;
  p.metric = parse_metric(c.metric);
  p.index = index_params(o.r, o.w_build, o.alpha, o.prune, c.seed);
  p.k = o.k;
  p.target_recall = o.target;
  p.window_cap = o.window_cap;
  p.seed = c.seed;
  if (!(o.target >= 0.0 && o.target <= 1.0)) throw ArgumentError("--target-recall must be in [0, 1]");
  return p;
}

int cmd_study_quant(const CLI::App& sub, const Common& c, const StudyOpts& o) {
  const auto params = study_params(c, o);
  const auto data = load(o.data);
  const auto splits = make_splits(data, nullptr, maybe_load(o.queries), o.query_count, 0, c.seed);
  const auto res = quant_window_study(splits.base, splits.queries, o.b1, o.b2, o.centers, params);

  fmt::print("full precision: W = {} (recall {:.4f}{})\n", res.base_window, res.base_recall,
             res.base_reached ? "" : ", target not reached");
  std::string header = fmt::format("{:>8}", "B1\\B2");
  for (const double b2 : o.b2) header += fmt::format("{:>14}", fmt::format("{:g}", b2));
  fmt::print("{}\n", header);
  json cells = json::array();
  std::string heat = "b1,b2,window,recall,reached,ratio\n";
  for (std::size_t i = 0; i < o.b1.size(); ++i) {
    std::string line = fmt::format("{:>8g}", o.b1[i]);
    for (std::size_t r = 0; r < o.b2.size(); ++r) {
      const auto& cell = res.cells[i * o.b2.size() + r];
      line += cell.reached ? fmt::format("{:>14.3f}", cell.ratio) : fmt::format("{:>14}", "not reached");
      cells.push_back({{"b1", cell.primary_bits},
                       {"b2", cell.residual_bits},
                       {"window", cell.window},
                       {"grid_index", cell.grid_index},
                       {"recall", cell.recall},
                       {"reached", cell.reached},
                       {"ratio", cell.reached ? json(cell.ratio) : json(nullptr)}});
      heat += fmt::format("{},{},{},{},{},{}\n", cell.primary_bits, cell.residual_bits, cell.window, cell.recall,
                          cell.reached ? 1 : 0, cell.reached ? fmt::format("{}", cell.ratio) : "");
    }
    fmt::print("{}\n", line);
  }
  json errors = json::array();
  std::string err_csv = "b1,centers,epsilon1,ratio_b2_max\n";
  const double b2_max = o.b2.empty() ? 0.0 : *std::max_element(o.b2.begin(), o.b2.end());
  for (const auto& e : res.errors) {
    errors.push_back({{"b1", e.primary_bits}, {"centers", e.centers}, {"epsilon1", e.epsilon1}});
    std::string ratio;
    for (const auto& cell : res.cells) {
      if (e.centers == 1 && cell.primary_bits == e.primary_bits && cell.residual_bits == b2_max && cell.reached) {
        ratio = fmt::format("{}", cell.ratio);
      }
    }
    err_csv += fmt::format("{},{},{},{}\n", e.primary_bits, e.centers, e.epsilon1, ratio);
  }
  json out = config_echo(sub);
  out["base_window"] = res.base_window;
  out["base_recall"] = res.base_recall;
  out["base_reached"] = res.base_reached;
  out["cells"] = cells;
  out["errors"] = errors;
  const fs::path path(o.out.empty() ? "study_quant.json" : o.out);
  write_json(path, out);
  if (!c.plot_dir.empty()) {
    write_text(fs::path(c.plot_dir) / "window_ratio_heatmap.csv", heat);
    write_text(fs::path(c.plot_dir) / "error_vs_window.csv", err_csv);
  }
  return 0;
}

int cmd_study_mean(const CLI::App& sub, const Common& c, const StudyOpts& o) {
  const auto params = study_params(c, o);
  if (!layout_supports(o.mean_b1)) throw ArgumentError("--b1 must be 4 or 8 for this study");
  const auto data = load(o.data);
  const auto splits = make_splits(data, nullptr, maybe_load(o.queries), o.query_count, 0, c.seed);
  const auto rows = mean_subsample_study(splits.base, splits.queries, o.fractions, o.mean_b1, o.mean_b2, params);
  json list = json::array();
  std::string csv = "fraction,window,recall,reached,ratio,dist_comps_per_query,epsilon1\n";
  fmt::print("{:>9} {:>7} {:>8} {:>7} {:>12}\n", "fraction", "W", "recall", "ratio", "epsilon1");
  for (const auto& r : rows) {
    fmt::print("{:>9g} {:>7} {:>8.4f} {:>7.3f} {:>12.6g}{}\n", r.fraction, r.window, r.recall, r.ratio, r.epsilon1,
               r.reached ? "" : "  (not reached)");
    list.push_back({{"fraction", r.fraction},
                    {"window", r.window},
                    {"grid_index", r.grid_index},
                    {"recall", r.recall},
                    {"reached", r.reached},
                    {"ratio", r.ratio},
                    {"dist_comps_per_query", r.dist_comps_per_query},
                    {"epsilon1", r.epsilon1}});
    csv += fmt::format("{},{},{},{},{},{},{}\n", r.fraction, r.window, r.recall, r.reached ? 1 : 0, r.ratio,
                       r.dist_comps_per_query, r.epsilon1);
  }
  json out = config_echo(sub);
  out["rows"] = list;
  write_json(o.out.empty() ? "study_mean.json" : o.out, out);
  if (!c.plot_dir.empty()) write_text(fs::path(c.plot_dir) / "mean_fraction.csv", csv);
  return 0;
}

int cmd_bench(const CLI::App& sub, const Common& c, const BenchOpts& o) {
  if (o.vectors == 0 || o.reps == 0) throw ArgumentError("--vectors and --reps must be positive");
  std::mt19937_64 rng(c.seed);
  std::uniform_real_distribution<float> uni(-1.0f, 1.0f);
  json rows = json::array();
  std::string csv = "d,bits,turbo_ns,sequential_ns,speedup\n";
  bool slower = false;
  fmt::print("{:>6} {:>5} {:>12} {:>15} {:>9}\n", "d", "bits", "turbo ns", "sequential ns", "speedup");
  for (const std::size_t d : o.dims) {
    if (d == 0) throw ArgumentError("--dims entries must be positive");
    std::vector<float> q(d);
    for (auto& v : q) v = uni(rng);
    for (const unsigned bits : {4u, 8u}) {
      std::uniform_int_distribution<unsigned> code(0, (1u << bits) - 1);
      std::vector<std::vector<std::uint8_t>> turbo, seq;
      for (std::size_t i = 0; i < o.vectors; ++i) {
        std::vector<std::uint16_t> codes(d);
        for (auto& v : codes) v = static_cast<std::uint16_t>(code(rng));
        turbo.push_back(pack(codes, bits, Layout::turbo).bytes());
        seq.push_back(pack(codes, bits, Layout::sequential).bytes());
      }
      auto time_layout = [&](const std::vector<std::vector<std::uint8_t>>& buffers, Layout layout) {
        volatile float sink = 0.0f;
        double best = 1e300;
        for (std::size_t rep = 0; rep < o.reps; ++rep) {
          float acc = 0.0f;
          const auto t0 = std::chrono::steady_clock::now();
          for (const auto& b : buffers) {
            acc += detail::fused_scan_unchecked(PackedView{b, layout, bits, d}, q.data(), Metric::euclidean, 0.1f,
                                                0.05f);
          }
          const double ns = std::chrono::duration<double, std::nano>(std::chrono::steady_clock::now() - t0).count();
          best = std::min(best, ns / static_cast<double>(buffers.size()));
          sink = sink + acc;
        }
        return best;
      };
      const double t_turbo = time_layout(turbo, Layout::turbo);
      const double t_seq = time_layout(seq, Layout::sequential);
      slower = slower || t_turbo > t_seq;
      fmt::print("{:>6} {:>5} {:>12.2f} {:>15.2f} {:>8.2f}x\n", d, bits, t_turbo, t_seq, t_seq / t_turbo);
      rows.push_back({{"d", d}, {"bits", bits}, {"turbo_ns", t_turbo}, {"sequential_ns", t_seq}});
      csv += fmt::format("{},{},{},{},{}\n", d, bits, t_turbo, t_seq, t_seq / t_turbo);
    }
  }
  if (slower) fmt::print("warning: turbo layout was slower than sequential for at least one shape on this machine\n");
  fmt::print("wide kernels: turbo-4 {}, sequential-4 {}\n", fused_scan_accelerated(Layout::turbo, 4) ? "yes" : "no",
             fused_scan_accelerated(Layout::sequential, 4) ? "yes" : "no");
  if (!o.out.empty()) {
    json out = config_echo(sub);
    out["rows"] = rows;
    out["turbo_slower_somewhere"] = slower;
    write_json(o.out, out);
  }
  if (!c.plot_dir.empty()) write_text(fs::path(c.plot_dir) / "kernel_timings.csv", csv);
  return 0;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Streaming vector search with locally-adaptive quantization"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  std::size_t threads = 0;
  app.add_option("--threads", threads, "Worker threads (default: STREAMLVQ_THREADS or all cores)");

  Common common;
  GenOpts gen;
  GtOpts gt;
  IndexOpts io;
  BuildOpts build;
  SearchOpts search;
  StreamOpts stream;
  StudyOpts study;
  BenchOpts bench;

  auto* s_gen = app.add_subcommand("gen", "Generate a synthetic clustered dataset");
  add_common(s_gen, common);
  s_gen->add_option("--n", gen.n, "Number of vectors");
  s_gen->add_option("--d", gen.d, "Dimension");
  s_gen->add_option("--clusters", gen.clusters, "Number of mixture components");
  s_gen->add_option("--separation", gen.separation, "Spread of component means relative to their unit variance");
  s_gen->add_option("--out", gen.out, "Output path (.fvecs or raw float32 with a JSON sidecar)");

  auto* s_gt = app.add_subcommand("gt", "Exact ground truth by exhaustive scan");
  add_common(s_gt, common);
  s_gt->add_option("--data", gt.data, "Database vectors");
  s_gt->add_option("--queries", gt.queries, "Query vectors");
  s_gt->add_option("--k", gt.k, "Neighbors per query");
  s_gt->add_option("--out", gt.out, "Output prefix for .ivecs/.fvecs");

  auto* s_build = app.add_subcommand("build", "Build and save an index");
  add_common(s_build, common);
  add_index_options(s_build, io);
  s_build->add_option("--data", build.data, "Database vectors");
  s_build->add_option("--out", build.out, "Output prefix");

  auto* s_search = app.add_subcommand("search", "Search a saved index");
  s_search->set_config("--config", "", "key=value configuration file; flags take precedence");
  s_search->add_option("--index", search.index, "Index prefix");
  s_search->add_option("--queries", search.queries, "Query vectors");
  s_search->add_option("--gt", search.gt, "Ground-truth prefix for recall");
  s_search->add_option("--k", search.k, "Neighbors per query");
  s_search->add_option("--W", search.w, "Search window");
  s_search->add_option("--rerank", search.rerank, "auto, on or off");
  s_search->add_option("--out", search.out, "Output JSON path");

  auto stream_options = [&](CLI::App* sub) {
    add_common(sub, common);
    add_index_options(sub, io);
    sub->add_option("--data", stream.data, "Dataset to stream");
    sub->add_option("--query-count", stream.query_count, "Rows held out as queries");
    sub->add_option("--learn-count", stream.learn_count, "Rows held out for calibration");
    sub->add_option("--k", stream.k, "Neighbors per query");
    sub->add_option("--target-recall", stream.target, "Recall the window is calibrated for");
    sub->add_option("--W", stream.fixed_w, "Fixed search window (0 calibrates)");
    sub->add_option("--window-cap", stream.window_cap, "Largest window tried while calibrating (0: live size)");
    sub->add_option("--epsilon-centers", stream.epsilon_centers, "Also track M-LVQ error with this many means");
    sub->add_option("--out", stream.out, "Output CSV path; a JSON twin is written next to it");
  };
  auto* s_iid = app.add_subcommand("stream-iid", "Run the IID streaming protocol");
  stream_options(s_iid);
  s_iid->add_option("--queries", stream.queries, "Separate query file (default: held out from --data)");
  s_iid->add_option("--cycles", stream.cycles, "Number of add/delete cycles");

  auto* s_shift = app.add_subcommand("stream-shift", "Run the distribution-shift streaming protocol");
  stream_options(s_shift);
  s_shift->add_option("--labels", stream.labels, "Cluster labels (.ivecs, default <data>.labels.ivecs)");
  s_shift->add_option("--batch", stream.batch, "Vectors per cycle (0: 2% of n)");
  s_shift->add_option("--steady-cycles", stream.steady_cycles, "Cycles after the ramp-up");
  s_shift->add_option("--queries-per-measure", stream.queries_per_measure, "Queries sampled per measurement");

  auto study_options = [&](CLI::App* sub) {
    add_common(sub, common);
    sub->add_option("--data", study.data, "Dataset");
    sub->add_option("--queries", study.queries, "Separate query file (default: held out from --data)");
    sub->add_option("--query-count", study.query_count, "Rows held out as queries");
    sub->add_option("--k", study.k, "Neighbors per query");
    sub->add_option("--target-recall", study.target, "Target recall");
    sub->add_option("--window-cap", study.window_cap, "Largest window tried");
    sub->add_option("--R", study.r, "Maximum out-degree");
    sub->add_option("--w-build", study.w_build, "Search window used while building");
    sub->add_option("--alpha", study.alpha, "Pruning relaxation (0 picks the metric default)");
    sub->add_option("--prune", study.prune, "Prune schedule: staged (alpha 1 first) or single");
    sub->add_option("--out", study.out, "Output JSON path");
  };
  auto* s_quant = app.add_subcommand("study-quant", "Window size versus quantization level");
  study_options(s_quant);
  s_quant->add_option("--b1", study.b1, "First-level bit counts (fractional allowed)")->delimiter(',');
  s_quant->add_option("--b2", study.b2, "Second-level bit counts (fractional allowed)")->delimiter(',');
  s_quant->add_option("--M", study.centers, "Mean counts for M-LVQ error points")->delimiter(',');

  auto* s_mean = app.add_subcommand("study-mean", "Window size versus mean sample size");
  study_options(s_mean);
  s_mean->add_option("--fractions", study.fractions, "Sample fractions for the mean")->delimiter(',');
  s_mean->add_option("--b1", study.mean_b1, "First-level bits (4 or 8)");
  s_mean->add_option("--b2", study.mean_b2, "Second-level bits");

  auto* s_bench = app.add_subcommand("bench-kernels", "Time turbo versus sequential distance kernels");
  add_common(s_bench, common);
  s_bench->add_option("--dims", bench.dims, "Dimensions to time")->delimiter(',');
  s_bench->add_option("--vectors", bench.vectors, "Encoded vectors per run");
  s_bench->add_option("--reps", bench.reps, "Repetitions (best is reported)");
  s_bench->add_option("--out", bench.out, "Optional JSON output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (threads > 0) set_num_threads(threads);
    if (s_gen->parsed()) return cmd_gen(*s_gen, common, gen);
    if (s_gt->parsed()) return cmd_gt(*s_gt, common, gt);
    if (s_build->parsed()) return cmd_build(*s_build, common, io, build);
    if (s_search->parsed()) return cmd_search(*s_search, search);
    if (s_iid->parsed()) return cmd_stream_iid(*s_iid, common, io, stream);
    if (s_shift->parsed()) return cmd_stream_shift(*s_shift, common, io, stream);
    if (s_quant->parsed()) return cmd_study_quant(*s_quant, common, study);
    if (s_mean->parsed()) return cmd_study_mean(*s_mean, common, study);
    if (s_bench->parsed()) return cmd_bench(*s_bench, common, bench);
  } catch (const ArgumentError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
  return 2;
}

}  // namespace streamlvq::cli
