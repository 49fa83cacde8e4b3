// Python bindings. Tensors cross the boundary as C-ordered float64 arrays of
// shape (n1, n2, n3), which matches the library's dense layout.

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "tlra/curt.hpp"
#include "tlra/distsim.hpp"
#include "tlra/fro_lra.hpp"
#include "tlra/io.hpp"
#include "tlra/l1_lra.hpp"
#include "tlra/planted.hpp"
#include "tlra/sampling.hpp"
#include "tlra/streaming.hpp"

namespace py = pybind11;
using namespace tlra;

namespace {

using Array3 = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor3 to_tensor(const Array3& a) {
  if (a.ndim() != 3) throw ShapeError("expected a 3-dimensional array");
  Dims d{a.shape(0), a.shape(1), a.shape(2)};
  return Tensor3::from_dense(d, std::vector<double>(a.data(), a.data() + a.size()));
}

Array3 to_array(const Tensor3& t) {
  Tensor3 dense = t.to_dense();
  Dims d = dense.dims();
  Array3 out({d.n1, d.n2, d.n3});
  std::copy(dense.values().begin(), dense.values().end(), out.mutable_data());
  return out;
}

py::tuple factor_tuple(const FactorTriple& f) { return py::make_tuple(f.U, f.V, f.W); }

FactorTriple from_tuple(const py::sequence& s) {
  if (py::len(s) != 3) throw ShapeError("factors must be a (U, V, W) triple");
  FactorTriple f{s[0].cast<Matrix>(), s[1].cast<Matrix>(), s[2].cast<Matrix>()};
  f.check();
  return f;
}

py::dict sample_dict(const SamplingOperator& s) {
  py::dict d;
  d["indices"] = s.indices;
  d["weights"] = s.weights;
  return d;
}

py::dict fro_result(const FactorTriple& f, const CostReport& c, const std::vector<double>& trial_costs, int best) {
  py::dict d;
  d["factors"] = factor_tuple(f);
  d["rank"] = f.rank();
  d["cost_fro2"] = c.fro2;
  d["cost_l1"] = c.l1;
  d["trial_costs"] = trial_costs;
  d["best_trial"] = best;
  return d;
}

AlgoParams make_params(Index k, double eps, int trials, std::uint64_t seed, Index s, Index t) {
  AlgoParams p;
  p.k = k;
  p.eps = eps;
  p.trials = trials;
  p.seed = seed;
  p.s = s;
  p.t = t;
  return p;
}

StreamMode parse_mode(const std::string& m) {
  if (m == "bicriteria") return StreamMode::bicriteria;
  if (m == "rank-k") return StreamMode::rank_k;
  throw InvalidParams("mode must be 'bicriteria' or 'rank-k'");
}

}  // namespace

PYBIND11_MODULE(_tlra, m) {
  m.doc() = "Sketching-based low-rank approximation of third-order tensors";

  static py::exception<Error> base(m, "TlraError", PyExc_RuntimeError);
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<InvalidParams>(m, "InvalidParams", base.ptr());
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<DegenerateInputError>(m, "DegenerateInputError", base.ptr());
  py::register_exception<NumericalError>(m, "NumericalError", base.ptr());

  m.def("set_reproducible", &set_reproducible, py::arg("on"));

  m.def(
      "decompose",
      [](const Array3& a, Index k, double eps, const std::string& mode, int trials, std::uint64_t seed, Index s,
         Index t) {
        Tensor3 x = to_tensor(a);
        AlgoParams p = make_params(k, eps, trials, seed, s, t);
        if (mode == "quadratic") {
          FroResult r = bicriteria_quadratic(x, p);
          return fro_result(r.factors, r.cost, r.trial_costs, r.best_trial);
        }
        if (mode == "cubic") {
          CubicResult r = bicriteria_cubic(x, p);
          py::dict d = fro_result(r.compressed(), r.cost, r.trial_costs, r.best_trial);
          d["core"] = to_array(r.tucker.core);
          d["tucker_factors"] = py::make_tuple(r.tucker.P, r.tucker.Q, r.tucker.R);
          return d;
        }
        if (mode == "rank-k") {
          FroResult r = fro_rank_k(x, p);
          return fro_result(r.factors, r.cost, r.trial_costs, r.best_trial);
        }
        throw InvalidParams("mode must be 'quadratic', 'cubic' or 'rank-k'");
      },
      py::arg("a"), py::arg("k"), py::arg("eps") = 0.5, py::arg("mode") = "quadratic", py::arg("trials") = 9,
      py::arg("seed") = 0, py::arg("s") = 0, py::arg("t") = 0,
      "Frobenius-norm low-rank approximation. Returns a dict with 'factors' (U, V, W) and costs.");

  m.def(
      "l1_decompose",
      [](const Array3& a, Index k, int trials, std::uint64_t seed, const std::string& sketch) {
        L1Params p;
        p.k = k;
        p.trials = trials;
        p.seed = seed;
        p.sketch = sketch_kind_from_string(sketch);
        L1Result r = l1_bicriteria(to_tensor(a), p);
        py::dict d = fro_result(r.factors, r.cost, r.trial_costs, r.best_trial);
        return d;
      },
      py::arg("a"), py::arg("k"), py::arg("trials") = 9, py::arg("seed") = 0, py::arg("sketch") = "cauchy_dense",
      "Entry-wise l1 bicriteria approximation of rank s^2.");

  m.def(
      "curt",
      [](const Array3& a, const py::sequence& factors, double eps, int trials, std::uint64_t seed, Index d) {
        CurtParams p;
        p.eps = eps;
        p.trials = trials;
        p.seed = seed;
        p.d = d;
        CurtResult r = curt_decompose(to_tensor(a), from_tuple(factors), p);
        py::dict out = fro_result(r.factors(), r.cost, r.trial_costs, r.best_trial);
        out["C"] = r.C;
        out["R"] = r.R;
        out["T"] = r.T;
        out["P"] = py::make_tuple(r.P1, r.P2, r.P3);
        out["cols"] = sample_dict(r.cols);
        out["rows"] = sample_dict(r.rows);
        out["tubes"] = sample_dict(r.tubes);
        return out;
      },
      py::arg("a"), py::arg("factors"), py::arg("eps") = 0.5, py::arg("trials") = 9, py::arg("seed") = 0,
      py::arg("d") = 0, "CURT decomposition starting from a rank-k factorization (U, V, W).");

  m.def(
      "cur",
      [](const Matrix& mat, Index k, double eps, std::uint64_t seed) {
        CurResult r = matrix_cur(mat, k, eps, seed);
        py::dict out;
        out["C"] = r.C;
        out["U"] = r.U;
        out["R"] = r.R;
        out["cost"] = r.cost;
        out["cols"] = sample_dict(r.cols);
        out["rows"] = sample_dict(r.rows);
        return out;
      },
      py::arg("m"), py::arg("k"), py::arg("eps") = 0.5, py::arg("seed") = 0);

  py::class_<StreamState>(m, "Stream", "Turnstile stream sketch; updates use 0-based indices.")
      .def(py::init([](py::object dims, Index k, double eps, std::uint64_t seed, Index s, Index t) {
             Dims d;
             if (py::isinstance<py::int_>(dims)) {
               Index n = dims.cast<Index>();
               d = {n, n, n};
             } else {
               auto v = dims.cast<std::vector<Index>>();
               if (v.size() != 3) throw InvalidParams("dims must be an int or a triple");
               d = {v[0], v[1], v[2]};
             }
             return StreamState(d, make_params(k, eps, 1, seed, s, t), seed);
           }),
           py::arg("dims"), py::arg("k"), py::arg("eps") = 0.5, py::arg("seed") = 0, py::arg("s") = 0,
           py::arg("t") = 0)
      .def("update", py::overload_cast<Index, Index, Index, double>(&StreamState::update), py::arg("i"),
           py::arg("j"), py::arg("l"), py::arg("delta"))
      .def("finalize",
           [](const StreamState& st, const std::string& mode) { return factor_tuple(st.finalize(parse_mode(mode)).factors); },
           py::arg("mode") = "bicriteria")
      .def_property_readonly("updates", &StreamState::updates)
      .def_property_readonly("space_words", &StreamState::space_words)
      .def_property_readonly("V", [](const StreamState& st) { return py::make_tuple(st.V()[0], st.V()[1], st.V()[2]); })
      .def_property_readonly("C", [](const StreamState& st) { return to_array(st.C()); });

  m.def(
      "distsim",
      [](const std::vector<Array3>& parts, Index k, double eps, std::uint64_t seed, const std::string& mode,
         bool skip_upload, Index s, Index t) {
        std::vector<Tensor3> ts;
        for (const Array3& p : parts) ts.push_back(to_tensor(p));
        DistOptions o;
        o.mode = parse_mode(mode);
        o.skip_upload = skip_upload;
        AlgoParams p = make_params(k, eps, 1, seed, s, t);
        DistResult r = distsim_run(ts, p, seed, o);
        py::dict out;
        out["factors"] = factor_tuple(r.factors);
        out["ledger"] = py::module_::import("json").attr("loads")(r.ledger.to_json());
        out["protocol_words"] = protocol_words(ts.front().dims(), p.resolved(), static_cast<int>(ts.size()), o);
        return out;
      },
      py::arg("partitions"), py::arg("k"), py::arg("eps") = 0.5, py::arg("seed") = 0, py::arg("mode") = "rank-k",
      py::arg("skip_upload") = false, py::arg("s") = 0, py::arg("t") = 0,
      "Simulated distributed protocol over a list of tensors summing to the input.");

  m.def(
      "planted",
      [](py::object dims, Index k, double noise, std::uint64_t seed) {
        auto v = py::isinstance<py::int_>(dims) ? std::vector<Index>(3, dims.cast<Index>()) : dims.cast<std::vector<Index>>();
        if (v.size() != 3) throw InvalidParams("dims must be an int or a triple");
        PlantedTensor p = planted_gaussian({v[0], v[1], v[2]}, k, noise, seed);
        return py::make_tuple(to_array(p.tensor), factor_tuple(p.factors));
      },
      py::arg("dims"), py::arg("k"), py::arg("noise") = 0.0, py::arg("seed") = 0,
      "Planted rank-k tensor plus Gaussian noise; returns (tensor, (U, V, W)).");

  m.def(
      "residual",
      [](const Array3& a, const py::sequence& factors) {
        CostReport c = residual_cost(to_tensor(a), from_tuple(factors));
        return py::make_tuple(c.fro2, c.l1);
      },
      py::arg("a"), py::arg("factors"), "(squared Frobenius, l1) residual of a factorization.");

  m.def("leverage_scores", &leverage_scores, py::arg("m"));
  m.def("read_tns", [](const std::string& path) { return to_array(read_tns(std::filesystem::path(path))); },
        py::arg("path"));
  m.def("write_tns", [](const std::string& path, const Array3& a) { write_tns(std::filesystem::path(path), to_tensor(a)); },
        py::arg("path"), py::arg("a"));
}
