#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "kerrsim/analysis.hpp"
#include "kerrsim/circuit_model.hpp"
#include "kerrsim/config.hpp"
#include "kerrsim/duffing.hpp"
#include "kerrsim/error.hpp"
#include "kerrsim/experiments.hpp"
#include "kerrsim/measurement.hpp"

namespace py = pybind11;
using namespace kerrsim;

namespace {

py::dict fit_dict(const FitResult& f) {
    py::dict values, sigmas;
    for (std::size_t i = 0; i < f.names.size(); ++i) {
        values[py::str(f.names[i])] = f.values[i];
        sigmas[py::str(f.names[i])] = f.sigmas[i];
    }
    py::dict out;
    out["values"] = values;
    out["sigmas"] = sigmas;
    out["residual_rms"] = f.residual_rms;
    out["converged"] = f.converged;
    return out;
}

py::dict outputs_dict(const Outputs& outputs) {
    py::dict d;
    for (const auto& f : outputs) d[py::str(f.name)] = f.content;
    return d;
}

using Command = Outputs (*)(const ExperimentConfig&);

auto command(Command fn) {
    return [fn](const std::string& config_text) {
        Outputs out;
        {
            const ExperimentConfig config = parse_config(config_text);
            py::gil_scoped_release release;
            out = fn(config);
        }
        return outputs_dict(out);
    };
}

}  // namespace

PYBIND11_MODULE(_kerrsim, m) {
    m.doc() = "Kerr resonator bifurcation amplifier simulator";

    static py::exception<Error> error(m, "KerrsimError", PyExc_RuntimeError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            PyObject* type = error.ptr();
            PyObject* value = PyObject_CallFunction(type, "s", e.what());
            PyObject_SetAttrString(value, "code", py::str(std::string(to_string(e.code()))).ptr());
            PyErr_SetObject(type, value);
            Py_DECREF(value);
        }
    });

    py::class_<CircuitParams>(m, "CircuitParams")
        .def(py::init<>())
        .def_readwrite("n_squids", &CircuitParams::n_squids)
        .def_readwrite("i_c", &CircuitParams::i_c)
        .def_readwrite("c_end", &CircuitParams::c_end)
        .def_readwrite("nu1_bare", &CircuitParams::nu1_bare)
        .def_readwrite("z0", &CircuitParams::z0)
        .def_property_readonly("l_wg", &CircuitParams::l_wg)
        .def("validate", &CircuitParams::validate);

    m.def("reference_device", &reference_device);
    m.def("calibrate", &calibrate, py::arg("start"), py::arg("target_nu3"), py::arg("target_beta"));
    m.def(
        "mode_frequency", [](const CircuitParams& p, int n, double phi) { return mode_frequency(p, n, FluxPoint{phi}); },
        py::arg("params"), py::arg("n"), py::arg("phi") = 0.0);
    m.def(
        "array_inductance", [](const CircuitParams& p, double phi) { return array_inductance(p, FluxPoint{phi}); },
        py::arg("params"), py::arg("phi") = 0.0);
    m.def(
        "beta", [](const CircuitParams& p, double phi) { return beta(p, FluxPoint{phi}); }, py::arg("params"),
        py::arg("phi") = 0.0);
    m.def(
        "kerr_coefficients",
        [](const CircuitParams& p, double phi, const std::vector<int>& modes) {
            const ModeSpectrum s = kerr_coefficients(p, FluxPoint{phi}, modes);
            py::dict out;
            for (std::size_t i = 0; i < s.modes.size(); ++i) {
                py::dict mode;
                mode["frequency"] = s.frequencies[i];
                mode["self_kerr"] = s.self_kerr[i];
                mode["linewidth"] = s.linewidths[i];
                out[py::int_(s.modes[i])] = mode;
            }
            return out;
        },
        py::arg("params"), py::arg("phi") = 0.0, py::arg("modes") = std::vector<int>{1, 2, 3, 4, 5, 7, 9});
    m.def("critical_photon_number", &critical_photon_number, py::arg("gamma"), py::arg("k_self"));
    m.def("effective_temperature", &effective_temperature, py::arg("temperature"), py::arg("nu"));

    m.def(
        "width_10_90",
        [](const std::vector<double>& nu, const std::vector<double>& p) { return width_10_90(make_curve(nu, p)); },
        py::arg("nu"), py::arg("p"));
    m.def(
        "lorentzian_fit",
        [](const std::vector<double>& nu, const std::vector<double>& value, std::optional<std::vector<double>> sigma) {
            if (nu.size() != value.size() || (sigma && sigma->size() != nu.size())) {
                throw Error(ErrorCode::InvalidParameter, "nu, value and sigma must have equal length");
            }
            std::vector<TracePoint> trace;
            for (std::size_t i = 0; i < nu.size(); ++i) trace.push_back({nu[i], value[i], sigma ? (*sigma)[i] : 0.0});
            return fit_dict(lorentzian_fit(trace));
        },
        py::arg("nu"), py::arg("value"), py::arg("sigma") = py::none());

    m.def("default_config", []() { return dump_config(ExperimentConfig{}); });
    m.def(
        "normalize_config", [](const std::string& text) { return dump_config(parse_config(text)); },
        py::arg("text"));
    m.def("tune", command(&cmd_tune), py::arg("config") = "");
    m.def("scurve", command(&cmd_scurve), py::arg("config") = "");
    m.def("spectroscopy", command(&cmd_spectroscopy), py::arg("config") = "");
    m.def("noise_sweep", command(&cmd_noise_sweep), py::arg("config") = "");
    m.def("fit", command(&cmd_fit), py::arg("config") = "");
    m.def("calibrate_device", command(&cmd_calibrate), py::arg("config") = "");
}
