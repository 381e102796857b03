// Copyright 2026 The NASCTY Authors.
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

#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "cli.hpp"
#include "nascty/attack_eval.hpp"
#include "nascty/evolution.hpp"
#include "nascty/genome.hpp"
#include "nascty/rng.hpp"
#include "nascty/trace_model.hpp"
#include "nascty/trace_store.hpp"

namespace py = pybind11;
using namespace nascty;

namespace {

template <typename T>
py::array_t<T> to_array(const std::vector<T>& v) {
  return py::array_t<T>(static_cast<py::ssize_t>(v.size()), v.data());
}

py::array_t<float> traces_array(const TraceSet& ts) {
  py::array_t<float> a({static_cast<py::ssize_t>(ts.n_traces), static_cast<py::ssize_t>(ts.n_samples)});
  std::copy(ts.traces.begin(), ts.traces.end(), a.mutable_data());
  return a;
}

py::dict report_dict(const AttackReport& r) {
  py::dict d;
  d["ge_curve"] = to_array(r.ge_curve);
  d["mean_incremental_key_rank"] = r.mean_incremental_key_rank;
  d["traces_to_rank0"] = r.traces_to_rank0 ? py::cast(*r.traces_to_rank0) : py::none();
  d["folds"] = r.folds;
  return d;
}

std::vector<std::uint8_t> bytes_of(const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& a) {
  return {a.data(), a.data() + a.size()};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Neuroevolution of CNN architectures for profiling side-channel attacks";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_IOError);

  m.def("sbox", [](int x) { return sbox(static_cast<std::uint8_t>(x)); }, py::arg("x"));

  py::class_<TraceSet>(m, "TraceSet")
      .def_readonly("n_traces", &TraceSet::n_traces)
      .def_readonly("n_samples", &TraceSet::n_samples)
      .def_readonly("normalized", &TraceSet::normalized)
      .def_property_readonly("traces", &traces_array)
      .def_property_readonly("plaintexts", [](const TraceSet& ts) { return to_array(ts.plaintexts); })
      .def_property_readonly("keys", [](const TraceSet& ts) { return to_array(ts.keys); })
      .def_property_readonly("labels", [](const TraceSet& ts) { return to_array(ts.labels); })
      .def_property_readonly("masks", [](const TraceSet& ts) -> py::object {
        return ts.masks ? py::object(to_array(*ts.masks)) : py::none();
      })
      .def("__len__", [](const TraceSet& ts) { return ts.n_traces; })
      .def("__repr__", [](const TraceSet& ts) {
        return "TraceSet(n_traces=" + std::to_string(ts.n_traces) +
               ", n_samples=" + std::to_string(ts.n_samples) + ")";
      });

  m.def(
      "generate_traces",
      [](std::size_t n_traces, std::size_t n_samples, std::size_t leak_point,
         std::optional<std::size_t> mask_point, double noise_sigma, bool masking, int key,
         std::uint64_t seed, std::size_t max_desync) {
        TraceParams p;
        p.n_samples = n_samples;
        p.leak_point_value = leak_point;
        p.leak_point_mask = mask_point;
        p.noise_sigma = noise_sigma;
        p.masking_enabled = masking;
        p.key_byte = static_cast<std::uint8_t>(key);
        p.seed = seed;
        p.max_desync = max_desync;
        return generate(p, n_traces);
      },
      py::arg("n_traces"), py::arg("n_samples") = 700, py::arg("leak_point") = 350,
      py::arg("mask_point") = py::none(), py::arg("noise_sigma") = 1.0, py::arg("masking") = false,
      py::arg("key") = 0x4d, py::arg("seed") = 0, py::arg("max_desync") = 0);
  m.def("normalize", &normalize, py::arg("traces"));
  m.def("read_traceset", &read_traceset, py::arg("path"));
  m.def("write_traceset", &write_traceset, py::arg("traces"), py::arg("path"));

  m.def(
      "log_prob_vector",
      [](py::array_t<double, py::array::c_style | py::array::forcecast> probs,
         py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast> plaintexts) {
        const std::span<const double> p(probs.data(), static_cast<std::size_t>(probs.size()));
        const auto pts = bytes_of(plaintexts);
        const auto scores = log_prob_vector(p, pts);
        return std::vector<double>(scores.begin(), scores.end());
      },
      py::arg("probs"), py::arg("plaintexts"));
  m.def(
      "key_rank",
      [](std::vector<double> scores, int key) {
        return key_rank(scores, static_cast<std::uint8_t>(key));
      },
      py::arg("scores"), py::arg("key"));
  m.def(
      "guessing_entropy",
      [](py::array_t<float, py::array::c_style | py::array::forcecast> probs,
         py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast> plaintexts, int key,
         std::size_t n_traces, std::size_t folds, std::uint64_t seed) {
        const std::span<const float> p(probs.data(), static_cast<std::size_t>(probs.size()));
        const auto pts = bytes_of(plaintexts);
        return report_dict(
            guessing_entropy(p, pts, static_cast<std::uint8_t>(key), n_traces, folds, seed));
      },
      py::arg("probs"), py::arg("plaintexts"), py::arg("key"), py::arg("n_traces"),
      py::arg("folds") = 100, py::arg("seed") = 0);

  py::class_<Genome>(m, "Genome")
      .def_static("random", [](std::uint64_t seed) {
        Rng rng(seed);
        return random_genome(rng);
      }, py::arg("seed"))
      .def_static("from_json", &parse_genome, py::arg("text"))
      .def("to_json", &serialize_genome)
      .def("is_valid", &Genome::is_valid)
      .def_property_readonly("n_conv_blocks", [](const Genome& g) { return g.conv_blocks.size(); })
      .def_property_readonly("n_dense_layers", [](const Genome& g) { return g.dense_layers.size(); })
      .def("__eq__", [](const Genome& a, const Genome& b) { return a == b; })
      .def("__repr__", [](const Genome& g) { return "Genome(" + summarize(g) + ")"; });

  m.def(
      "evolve",
      [](const std::string& config_json, const std::function<double(const Genome&, std::uint64_t)>& fitness) {
        const EvolutionConfig cfg = decode_config(config_json);
        FitnessFunction f = [&fitness](const Genome& g, std::uint64_t seed) {
          py::gil_scoped_acquire gil;
          return fitness(g, seed);
        };
        RunResult r;
        {
          py::gil_scoped_release release;
          r = run(cfg, f);
        }
        py::dict d;
        d["best_genome"] = r.best_genome;
        d["best_fitness"] = r.best_fitness;
        d["generations_csv"] = generations_csv(r.records);
        py::list best;
        for (const auto& rec : r.records) best.append(rec.best_so_far);
        d["best_so_far"] = best;
        return d;
      },
      py::arg("config_json"), py::arg("fitness"),
      "Runs the GA with a Python fitness callable (genome, training_seed) -> float; lower is "
      "better.");

  m.def(
      "run_cli",
      [](std::vector<std::string> args) {
        py::gil_scoped_release release;
        return cli::run(args);
      },
      py::arg("args"), "Runs a nascty subcommand in-process and returns its exit code.");
}
