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
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <limits>
#include <memory>
#include <optional>
#include <string>

#include "streamlvq/dataio.hpp"
#include "streamlvq/engine.hpp"
#include "streamlvq/errors.hpp"
#include "streamlvq/oracle.hpp"
#include "streamlvq/parallel.hpp"
#include "streamlvq/quantize.hpp"
#include "streamlvq/stream.hpp"

namespace py = pybind11;
using namespace streamlvq;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using IdArray = py::array_t<std::uint64_t, py::array::c_style | py::array::forcecast>;

VectorDataset to_dataset(const FloatArray& a, const std::optional<IdArray>& ids) {
  if (a.ndim() != 2) throw ArgumentError("expected a 2-d array of vectors");
  const auto n = static_cast<std::size_t>(a.shape(0));
  VectorDataset out(static_cast<std::size_t>(a.shape(1)));
  out.values.assign(a.data(), a.data() + a.size());
  if (ids) {
    if (ids->ndim() != 1 || static_cast<std::size_t>(ids->shape(0)) != n) {
      throw ArgumentError("ids must be 1-d with one entry per vector");
    }
    out.ids.assign(ids->data(), ids->data() + n);
  } else {
    out.ids.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.ids[i] = i;
  }
  return out;
}

std::span<const float> to_span(const FloatArray& a) {
  if (a.ndim() != 1) throw ArgumentError("expected a 1-d vector");
  return {a.data(), static_cast<std::size_t>(a.size())};
}

class PyIndex {
 public:
  explicit PyIndex(std::unique_ptr<AnyIndex> impl) : impl_(std::move(impl)) {}

  static PyIndex create(std::size_t dim, const std::string& metric, unsigned b1, std::optional<unsigned> b2, const std::string& layout,
                        std::size_t centers, std::size_t max_degree, std::size_t build_window, float alpha,
                        const std::string& prune, std::uint64_t seed, const std::optional<FloatArray>& fit) {
    EncodingConfig enc;
    enc.primary_bits = b1;
    enc.residual_bits = b2.value_or(b1 == 0 ? 0 : 8);
    enc.layout = parse_layout(layout);
    enc.centers = centers;
    IndexParams params;
    params.max_degree = max_degree;
    params.build_window = build_window;
    params.alpha = alpha;
    params.prune = parse_prune_schedule(prune);
    params.seed = seed;
    const Metric m = parse_metric(metric);
    CenterSet cs;
    if (enc.quantized()) {
      if (!fit) throw ArgumentError("quantized indexes need sample vectors to fit their means");
      cs = fit_centers(to_dataset(*fit, std::nullopt), m, enc, seed);
    }
    return PyIndex(make_index(dim, m, enc, cs, params));
  }

  void build(const FloatArray& data, const std::optional<IdArray>& ids) {
    const auto ds = to_dataset(data, ids);
    py::gil_scoped_release release;
    impl_->build(ds);
  }
  void insert(const FloatArray& data, const std::optional<IdArray>& ids) {
    const auto ds = to_dataset(data, ids);
    py::gil_scoped_release release;
    impl_->insert_batch(ds);
  }
  void remove(const IdArray& ids) {
    for (py::ssize_t i = 0; i < ids.size(); ++i) impl_->remove(ids.data()[i]);
  }
  std::size_t consolidate() {
    py::gil_scoped_release release;
    return impl_->consolidate();
  }

  py::tuple search(FloatArray queries, std::size_t k, std::size_t window, std::optional<bool> rerank) const {
    const bool single = queries.ndim() == 1;
    const FloatArray q2 = single ? FloatArray(queries.reshape({py::ssize_t{1}, queries.shape(0)})) : queries;
    const auto ds = to_dataset(q2, std::nullopt);
    std::vector<SearchResult> results;
    {
      py::gil_scoped_release release;
      results = impl_->search_batch(ds, k, window, rerank.value_or(impl_->has_residuals()));
    }
    const auto nq = static_cast<py::ssize_t>(results.size());
    py::array_t<std::int64_t> ids({nq, static_cast<py::ssize_t>(k)});
    py::array_t<float> sims({nq, static_cast<py::ssize_t>(k)});
    auto iv = ids.mutable_unchecked<2>();
    auto sv = sims.mutable_unchecked<2>();
    for (py::ssize_t i = 0; i < nq; ++i) {
      const auto& r = results[static_cast<std::size_t>(i)];
      for (std::size_t j = 0; j < k; ++j) {
        const bool have = j < r.ids.size();
        iv(i, static_cast<py::ssize_t>(j)) = have ? static_cast<std::int64_t>(r.ids[j]) : -1;
        sv(i, static_cast<py::ssize_t>(j)) = have ? r.similarities[j] : std::numeric_limits<float>::quiet_NaN();
      }
    }
    if (single) return py::make_tuple(ids[py::int_(0)], sims[py::int_(0)]);
    return py::make_tuple(ids, sims);
  }

  std::vector<std::uint64_t> live_ids() const { return impl_->live_ids(); }
  std::size_t size() const { return impl_->size(); }
  std::size_t dim() const { return impl_->dim(); }
  std::string metric() const { return to_string(impl_->metric()); }
  bool has_residuals() const { return impl_->has_residuals(); }
  void check_invariants() const { impl_->graph().check_invariants(); }
  void save(const std::string& prefix) const { impl_->save(prefix); }
  static PyIndex load(const std::string& prefix) { return PyIndex(load_index(prefix)); }

 private:
  std::shared_ptr<AnyIndex> impl_;
};

}  // namespace

PYBIND11_MODULE(_streamlvq, m) {
  m.doc() = "Graph index over locally-adaptive quantized vectors";

  py::register_exception<ArgumentError>(m, "ArgumentError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_IOError);
  py::register_exception<StateError>(m, "StateError", PyExc_RuntimeError);

  py::class_<PyIndex>(m, "Index")
      .def(py::init(&PyIndex::create), py::arg("dim"), py::arg("metric") = "euclidean", py::arg("b1") = 4,
           py::arg("b2") = py::none(), py::arg("layout") = "turbo", py::arg("centers") = 1, py::arg("max_degree") = 64,
           py::arg("build_window") = 200, py::arg("alpha") = 0.0f, py::arg("prune") = "staged",
           py::arg("seed") = 0, py::arg("fit") = py::none())
      .def("build", &PyIndex::build, py::arg("data"), py::arg("ids") = py::none())
      .def("insert", &PyIndex::insert, py::arg("data"), py::arg("ids") = py::none())
      .def("remove", &PyIndex::remove, py::arg("ids"))
      .def("consolidate", &PyIndex::consolidate)
      .def("search", &PyIndex::search, py::arg("queries"), py::arg("k") = 10, py::arg("window") = 50,
           py::arg("rerank") = py::none())
      .def("live_ids", &PyIndex::live_ids)
      .def("check_invariants", &PyIndex::check_invariants)
      .def("save", &PyIndex::save, py::arg("prefix"))
      .def_static("load", &PyIndex::load, py::arg("prefix"))
      .def("__len__", &PyIndex::size)
      .def_property_readonly("dim", &PyIndex::dim)
      .def_property_readonly("metric", &PyIndex::metric)
      .def_property_readonly("has_residuals", &PyIndex::has_residuals);

  m.def(
      "lvq_encode",
      [](const FloatArray& x, const FloatArray& mean, double b1, double b2) {
        QuantizerConfig cfg{b1, b2};
        const auto e = lvq_encode(to_span(x), to_span(mean), cfg);
        py::dict out;
        out["primary"] = py::array_t<std::uint16_t>(static_cast<py::ssize_t>(e.primary.size()), e.primary.data());
        out["residual"] = py::array_t<std::uint16_t>(static_cast<py::ssize_t>(e.residual.size()), e.residual.data());
        out["lower"] = e.lower;
        out["step"] = e.step;
        const auto one = lvq_decode(e, DecodeLevel::one, to_span(mean));
        out["decoded_primary"] = py::array_t<float>(static_cast<py::ssize_t>(one.size()), one.data());
        if (!e.residual.empty()) {
          const auto two = lvq_decode(e, DecodeLevel::two, to_span(mean));
          out["decoded"] = py::array_t<float>(static_cast<py::ssize_t>(two.size()), two.data());
        }
        return out;
      },
      py::arg("x"), py::arg("mean"), py::arg("b1") = 4.0, py::arg("b2") = 0.0);

  m.def(
      "brute_force_knn",
      [](const FloatArray& queries, const FloatArray& data, const std::string& metric, std::size_t k) {
        const auto q = to_dataset(queries, std::nullopt);
        const auto d = to_dataset(data, std::nullopt);
        GroundTruth gt;
        {
          py::gil_scoped_release release;
          gt = brute_force_knn(q, d, parse_metric(metric), k);
        }
        const auto nq = static_cast<py::ssize_t>(q.size());
        py::array_t<std::int64_t> ids({nq, static_cast<py::ssize_t>(k)});
        auto iv = ids.mutable_unchecked<2>();
        for (py::ssize_t i = 0; i < nq; ++i) {
          for (std::size_t j = 0; j < k; ++j) {
            iv(i, static_cast<py::ssize_t>(j)) = static_cast<std::int64_t>(gt.ids[static_cast<std::size_t>(i)][j]);
          }
        }
        return ids;
      },
      py::arg("queries"), py::arg("data"), py::arg("metric") = "euclidean", py::arg("k") = 10);

  m.def("set_num_threads", &set_num_threads, py::arg("threads"));
  m.def("num_threads", &num_threads);
}
