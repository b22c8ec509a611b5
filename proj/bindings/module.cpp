#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <utility>

#include "memda/checkpoint.hpp"
#include "memda/data.hpp"
#include "memda/model.hpp"
#include "memda/trainer.hpp"

namespace py = pybind11;
using namespace memda;

namespace {

py::array_t<double> to_numpy(const Tensor& t) {
    std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
    py::array_t<double> arr(shape);
    std::memcpy(arr.mutable_data(), t.data(), sizeof(double) * static_cast<std::size_t>(t.size()));
    return arr;
}

Tensor from_numpy(const py::array& src) {
    auto a = py::array_t<double, py::array::c_style | py::array::forcecast>::ensure(src);
    if (!a) throw py::type_error("expected an array convertible to float64");
    std::vector<int> shape(static_cast<std::size_t>(a.ndim()));
    for (py::ssize_t i = 0; i < a.ndim(); ++i) shape[static_cast<std::size_t>(i)] = static_cast<int>(a.shape(i));
    Tensor t(shape);
    std::memcpy(t.data(), a.data(), sizeof(double) * static_cast<std::size_t>(t.size()));
    return t;
}

nlohmann::json kwargs_to_json(const py::kwargs& kw) {
    nlohmann::json j = nlohmann::json::object();
    for (auto item : kw) {
        const std::string key = py::cast<std::string>(item.first);
        const py::handle v = item.second;
        if (py::isinstance<py::bool_>(v))
            j[key] = py::cast<bool>(v);
        else if (py::isinstance<py::int_>(v))
            j[key] = py::cast<long long>(v);
        else if (py::isinstance<py::float_>(v))
            j[key] = py::cast<double>(v);
        else if (py::isinstance<py::str>(v))
            j[key] = py::cast<std::string>(v);
        else
            throw py::type_error("config value for '" + key + "' must be str, int, float or bool");
    }
    return j;
}

py::object json_to_py(const nlohmann::json& j) {
    switch (j.type()) {
        case nlohmann::json::value_t::object: {
            py::dict d;
            for (auto it = j.begin(); it != j.end(); ++it) d[py::str(it.key())] = json_to_py(it.value());
            return d;
        }
        case nlohmann::json::value_t::array: {
            py::list l;
            for (const auto& v : j) l.append(json_to_py(v));
            return l;
        }
        case nlohmann::json::value_t::string:
            return py::str(j.get<std::string>());
        case nlohmann::json::value_t::boolean:
            return py::bool_(j.get<bool>());
        case nlohmann::json::value_t::number_integer:
            return py::int_(j.get<long long>());
        case nlohmann::json::value_t::number_unsigned:
            return py::int_(j.get<unsigned long long>());
        case nlohmann::json::value_t::number_float:
            return py::float_(j.get<double>());
        default:
            return py::none();
    }
}

py::dict report_to_py(const EvalReport& r) {
    py::dict d = py::cast<py::dict>(json_to_py(r.to_json()));
    py::list w;
    for (const WeightSample& ws : r.weights) {
        py::dict row;
        row["t"] = ws.anchor_t;
        row["w"] = py::cast(ws.w);
        w.append(row);
    }
    d["weights"] = w;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "memory-based drift adaptation for multivariate urban time-series forecasting";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
    py::register_exception<WindowError>(m, "WindowError", PyExc_IndexError);

    py::class_<UrbanSeries>(m, "Series")
        .def(py::init([](const py::array& values, int samples_per_day,
                         std::vector<std::string> node_ids, std::int64_t start_epoch_s) {
                 UrbanSeries s;
                 s.values = from_numpy(values);
                 if (s.values.rank() != 3)
                     throw ShapeError("series values must be (T x N x C), got " +
                                      s.values.shape_str());
                 s.samples_per_day = samples_per_day;
                 s.start_epoch_s = start_epoch_s;
                 if (node_ids.empty())
                     for (int i = 0; i < s.values.dim(1); ++i)
                         node_ids.push_back("n" + std::to_string(i));
                 s.node_ids = std::move(node_ids);
                 return s;
             }),
             py::arg("values"), py::arg("samples_per_day"),
             py::arg("node_ids") = std::vector<std::string>{}, py::arg("start_epoch_s") = 0)
        .def_property_readonly("values", [](const UrbanSeries& s) { return to_numpy(s.values); })
        .def_readonly("samples_per_day", &UrbanSeries::samples_per_day)
        .def_readonly("start_epoch_s", &UrbanSeries::start_epoch_s)
        .def_readonly("node_ids", &UrbanSeries::node_ids)
        .def_property_readonly("T", &UrbanSeries::T)
        .def_property_readonly("N", &UrbanSeries::N)
        .def_property_readonly("C", &UrbanSeries::C)
        .def("__repr__", [](const UrbanSeries& s) {
            return "Series(T=" + std::to_string(s.T()) + ", N=" + std::to_string(s.N()) +
                   ", C=" + std::to_string(s.C()) + ", p=" + std::to_string(s.samples_per_day) + ")";
        });

    m.def(
        "generate",
        [](const py::kwargs& kw) { return generate_synthetic_drift(drift_config_from_json(kwargs_to_json(kw))); },
        "Synthesize a periodic multivariate series with an injected drift.\n"
        "Keys: drift_kind, drift_time, magnitude, base_period, noise_std, n_nodes, n_days, seed.");
    m.def("load_csv", &load_csv, py::arg("path"), py::arg("samples_per_day"), py::arg("channels") = 1,
          py::arg("strict") = false);
    m.def("save_csv", &save_csv, py::arg("series"), py::arg("path"));

    py::class_<DriftAwareInput>(m, "DriftAwareInput")
        .def_readonly("anchor_t", &DriftAwareInput::anchor_t)
        .def_readonly("alpha", &DriftAwareInput::alpha)
        .def_readonly("K", &DriftAwareInput::K)
        .def_readonly("segment_ends", &DriftAwareInput::segment_ends)
        .def_property_readonly("segments", [](const DriftAwareInput& in) {
            py::list out;
            for (const Tensor& s : in.segments) out.append(to_numpy(s));
            return out;
        });
    m.def("build_input", &build_drift_aware_input, py::arg("series"), py::arg("t"), py::arg("alpha"),
          py::arg("K"));
    m.def("earliest_anchor", &earliest_anchor, py::arg("alpha"), py::arg("p"), py::arg("K"));

    py::class_<ModelConfig>(m, "ModelConfig")
        .def(py::init([](const py::kwargs& kw) {
            ModelConfig c = model_config_from_json(kwargs_to_json(kw));
            c.validate();
            return c;
        }))
        .def_property_readonly("variant", [](const ModelConfig& c) { return to_string(c.variant); })
        .def_readonly("alpha", &ModelConfig::alpha)
        .def_readonly("K", &ModelConfig::K)
        .def_readonly("C_e", &ModelConfig::C_e)
        .def_property_readonly("segment_count", &ModelConfig::segment_count)
        .def_property_readonly("fusion_count", &ModelConfig::fusion_count)
        .def("to_dict", [](const ModelConfig& c) { return json_to_py(model_config_to_json(c)); });
    m.def("variant_names", &variant_names);

    py::class_<Model>(m, "Model")
        .def(py::init<const ModelConfig&>(), py::arg("config"))
        .def_property_readonly("config", &Model::config)
        .def_property_readonly("encoder_calls", &Model::encoder_calls)
        .def("parameters",
             [](Model& mod) {
                 py::dict d;
                 for (Parameter* p : mod.parameters()) d[py::str(p->name)] = to_numpy(p->value);
                 return d;
             })
        .def(
            "predict",
            [](Model& mod, const DriftAwareInput& input, const py::object& replayed) {
                std::vector<Tensor> rep;
                if (!replayed.is_none())
                    for (const py::handle h : py::cast<py::iterable>(replayed))
                        rep.push_back(from_numpy(py::cast<py::array>(h)));
                Tensor weights;
                Tensor pred = mod.predict(input, rep, &weights);
                return py::make_tuple(to_numpy(pred), to_numpy(weights));
            },
            py::arg("input"), py::arg("replayed") = py::none(),
            "Forecast (alpha x N x C) plus the fusion weights used.");

    py::class_<Dataset>(m, "Dataset")
        .def_property_readonly("train_anchors", [](const Dataset& d) { return d.train_anchors; })
        .def_property_readonly("val_anchors", [](const Dataset& d) { return d.val_anchors; })
        .def_property_readonly("test_anchors", [](const Dataset& d) { return d.test_anchors; })
        .def_property_readonly("normalized", [](const Dataset& d) { return d.norm; })
        .def_property_readonly("raw", [](const Dataset& d) { return d.raw; });
    m.def("prepare_dataset", &prepare_dataset, py::arg("series"), py::arg("train_end"),
          py::arg("val_fraction"), py::arg("alpha"), py::arg("K"));

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init([](const py::kwargs& kw) { return train_config_from_json(kwargs_to_json(kw)); }))
        .def("to_dict", [](const TrainConfig& c) { return json_to_py(train_config_to_json(c)); });
    m.def(
        "train",
        [](Model& mod, const Dataset& data, const TrainConfig& cfg) {
            return json_to_py(train(mod, data, cfg).to_json());
        },
        py::arg("model"), py::arg("dataset"), py::arg("config"),
        "Mini-batch training with early stopping; returns the epoch history.");
    m.def(
        "evaluate_online",
        [](Model& mod, const Dataset& data, const py::object& anchors, long long metrics_from,
           bool record_weights) {
            EvalOptions opts;
            opts.metrics_from = metrics_from;
            opts.record_weights = record_weights;
            const std::vector<long long> a = anchors.is_none()
                                                 ? data.test_anchors
                                                 : py::cast<std::vector<long long>>(anchors);
            return report_to_py(evaluate_online(mod, data, a, opts));
        },
        py::arg("model"), py::arg("dataset"), py::arg("anchors") = py::none(),
        py::arg("metrics_from") = -1, py::arg("record_weights") = true,
        "Chronological test-then-update pass with a rolling replay memory.");
    m.def(
        "evaluate_copy_last_day",
        [](const UrbanSeries& series, const std::vector<long long>& anchors, int alpha,
           long long metrics_from) {
            return report_to_py(evaluate_copy_last_day(series, anchors, alpha, metrics_from));
        },
        py::arg("series"), py::arg("anchors"), py::arg("alpha"), py::arg("metrics_from") = -1);

    m.def("save_checkpoint", &save_checkpoint, py::arg("model"), py::arg("path"));
    m.def("load_checkpoint", &load_checkpoint, py::arg("path"));
}
