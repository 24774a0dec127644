#include "ivaear/auxdata/auxiliary.hpp"
#include "ivaear/cli/commands.hpp"
#include "ivaear/error.hpp"
#include "ivaear/eval/metrics.hpp"
#include "ivaear/field/covariance.hpp"
#include "ivaear/field/simulate.hpp"
#include "ivaear/forecast/forecast.hpp"
#include "ivaear/model/checkpoint.hpp"
#include "ivaear/model/ivaear.hpp"
#include "ivaear/nn/adam.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace ivaear;
using Eigen::Index;
using Matrix = Eigen::MatrixXd;

namespace {

data::SpatioTemporalDataset make_dataset(Matrix coords, std::vector<std::int64_t> times, Matrix x,
                                         std::optional<Matrix> z) {
  data::SpatioTemporalDataset d{std::move(coords), std::move(times), std::move(x), std::move(z)};
  d.validate();
  return d;
}

auxdata::AuxiliarySpec rbf_spec(std::vector<Index> H, std::vector<Index> G) {
  auxdata::AuxiliarySpec s;
  s.spatial_levels = std::move(H);
  s.temporal_levels = std::move(G);
  s.validate();
  return s;
}

}  // namespace

PYBIND11_MODULE(_ivaear, m) {
  // Translators registered later are tried first: bases before subclasses.
  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<CheckpointFormatError>(m, "CheckpointFormatError", PyExc_RuntimeError);
  py::register_exception<UnsupportedVersion>(m, "UnsupportedVersion", PyExc_RuntimeError);
  py::register_exception<TrainingDiverged>(m, "TrainingDiverged", PyExc_RuntimeError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);

  py::class_<data::SpatioTemporalDataset>(m, "Dataset")
      .def(py::init(&make_dataset), py::arg("coords"), py::arg("times"), py::arg("x"),
           py::arg("z") = std::nullopt)
      .def_readwrite("coords", &data::SpatioTemporalDataset::coords)
      .def_readwrite("times", &data::SpatioTemporalDataset::times)
      .def_readwrite("x", &data::SpatioTemporalDataset::x)
      .def_readwrite("z", &data::SpatioTemporalDataset::z)
      .def("__len__", &data::SpatioTemporalDataset::rows)
      .def("head_until", [](const data::SpatioTemporalDataset& d, std::int64_t t) { return data::head_until(d, t); })
      .def("tail_after", [](const data::SpatioTemporalDataset& d, std::int64_t t) { return data::tail_after(d, t); })
      .def("to_csv", [](const data::SpatioTemporalDataset& d, const std::string& p) { data::write_csv(p, d); })
      .def_static("from_csv", [](const std::string& p) { return data::read_csv(p); });

  m.def(
      "simulate",
      [](int setting, Index P, Index S, Index n_s, Index n_t, Index R, Index L, std::uint64_t seed,
         Index burn_in) {
        field::SimulationSpec spec;
        spec.setting = setting;
        spec.P = P;
        spec.S = S;
        spec.n_s = n_s;
        spec.n_t = n_t;
        spec.R = R;
        spec.L = L;
        spec.seed = seed;
        spec.burn_in = burn_in;
        spec.validate();
        return field::simulate_dataset(spec).dataset;
      },
      py::arg("setting") = 1, py::arg("P") = 6, py::arg("S") = 6, py::arg("n_s") = 100,
      py::arg("n_t") = 500, py::arg("R") = 1, py::arg("L") = 1, py::arg("seed") = 0,
      py::arg("burn_in") = 100);

  m.def("matern", &field::matern, py::arg("h"), py::arg("range"), py::arg("shape"));

  m.def(
      "build_rbf",
      [](const data::SpatioTemporalDataset& d, std::vector<Index> H, std::vector<Index> G) {
        auto spec = auxdata::resolve_time_range(rbf_spec(std::move(H), std::move(G)), d.times);
        return auxdata::build_auxiliary(spec, d.coords, d.times);
      },
      py::arg("data"), py::arg("H") = std::vector<Index>{2, 9},
      py::arg("G") = std::vector<Index>{9, 17, 37});

  m.def(
      "lr_schedule",
      [](std::int64_t step, double base, double end, std::int64_t decay_steps, double power) {
        nn::AdamConfig c;
        c.base_rate = base;
        c.end_rate = end;
        c.decay_steps = decay_steps;
        c.power = power;
        return nn::lr_schedule(step, c);
      },
      py::arg("step"), py::arg("base") = 1e-3, py::arg("end") = 1e-4, py::arg("decay_steps") = 10000,
      py::arg("power") = 2.0);

  m.def("correlation_matrix", &eval::correlation_matrix, py::arg("z"), py::arg("z_hat"));
  m.def(
      "mcc",
      [](const Matrix& omega) {
        const auto r = eval::mcc(omega);
        return py::make_tuple(r.value, r.permutation);
      },
      py::arg("omega"));
  m.def(
      "knee_index",
      [](const std::vector<double>& curve) { return model::knee_index(curve); }, py::arg("curve"));

  py::class_<model::IVaeArModel>(m, "Model")
      .def_property_readonly("S", [](const model::IVaeArModel& mm) { return mm.dims.S; })
      .def_property_readonly("P", [](const model::IVaeArModel& mm) { return mm.dims.P; })
      .def_property_readonly("W", [](const model::IVaeArModel& mm) { return mm.dims.W; })
      .def_property_readonly("m", [](const model::IVaeArModel& mm) { return mm.dims.m; })
      .def_readonly("beta", &model::IVaeArModel::beta)
      .def("save", [](const model::IVaeArModel& mm, const std::string& p) { model::checkpoint_save(mm, p); })
      .def_static("load", &model::checkpoint_load)
      .def("__eq__", [](const model::IVaeArModel& a, const model::IVaeArModel& b) { return a == b; });

  m.def(
      "fit",
      [](const data::SpatioTemporalDataset& d, Index P, Index W, int epochs, Index batch_size,
         std::uint64_t seed, double beta, std::vector<Index> hidden, std::vector<Index> aux_hidden,
         std::vector<Index> H, std::vector<Index> G) {
        auto spec = auxdata::resolve_time_range(rbf_spec(std::move(H), std::move(G)), d.times);
        const Matrix aux = auxdata::build_auxiliary(spec, d.coords, d.times);
        model::TrainingConfig c;
        c.epochs = epochs;
        c.batch_size = batch_size;
        c.seed = seed;
        c.beta = beta;
        c.W = W;
        c.hidden = std::move(hidden);
        c.aux_hidden = std::move(aux_hidden);
        model::TrainResult r;
        {
          py::gil_scoped_release release;
          r = model::fit(d, aux, P, c);
        }
        r.model.aux_spec = spec;
        return py::make_tuple(std::move(r.model), std::move(r.elbo_trace));
      },
      py::arg("data"), py::arg("P"), py::arg("W") = 1, py::arg("epochs") = 60, py::arg("batch_size") = 64,
      py::arg("seed") = 0, py::arg("beta") = 1.0, py::arg("hidden") = model::kDefaultHidden,
      py::arg("aux_hidden") = model::kDefaultHidden, py::arg("H") = std::vector<Index>{2, 9},
      py::arg("G") = std::vector<Index>{9, 17, 37});

  m.def(
      "extract_latents",
      [](const model::IVaeArModel& mm, const data::SpatioTemporalDataset& d) {
        if (!mm.aux_spec) throw InvalidArgument("model has no stored auxiliary spec");
        return model::extract_latents(mm, d, auxdata::build_auxiliary(*mm.aux_spec, d.coords, d.times));
      },
      py::arg("model"), py::arg("data"));

  m.def(
      "forecast",
      [](const model::IVaeArModel& mm, const data::SpatioTemporalDataset& history, Index horizon,
         bool sampled, std::uint64_t seed) {
        const auto mode = sampled ? forecast::ForecastMode::Sampled : forecast::ForecastMode::Mean;
        return forecast::forecast(mm, forecast::make_request(mm, history, horizon, mode, seed)).predictions;
      },
      py::arg("model"), py::arg("history"), py::arg("horizon"), py::arg("sampled") = false,
      py::arg("seed") = 0);
  m.def("persistence", &forecast::persistence_baseline, py::arg("history"), py::arg("horizon"));

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = cli::run(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"));
}
