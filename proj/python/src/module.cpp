#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cglmix/config.hpp"
#include "cglmix/ensemble.hpp"
#include "cglmix/errors.hpp"
#include "cglmix/estimators.hpp"
#include "cglmix/experiments.hpp"
#include "cglmix/fields.hpp"
#include "cglmix/rng.hpp"

namespace py = pybind11;
using namespace cglmix;

namespace {

py::array_t<std::complex<double>> to_numpy(std::span<const cplx> v) {
    return py::array_t<std::complex<double>>(static_cast<py::ssize_t>(v.size()), v.data());
}

ExperimentConfig with_kind(const std::string& text, const std::optional<std::string>& kind) {
    auto c = parse_config(text);
    if (kind) {
        auto k = parse_kind(*kind);
        if (!k) throw ConfigError({"unknown experiment kind '" + *kind + "'"});
        c.kind = *k;
    }
    return c;
}

py::dict simulate_path(const std::string& text, std::uint64_t path) {
    const auto c = parse_config(text);
    const Model model = build_model(c);
    const Field u0 = make_shape(c.initial, model.grid, stream_for(c.run.seed, 0, 3));
    Integrator integ(model);
    integ.set_energy_tracking(true);
    auto s = integ.initial_state(u0);
    const double D = model.params.dissipation();
    EnergyRecord rec;
    record_energy(rec, s, D);
    const auto steps = static_cast<std::uint64_t>(std::llround(c.run.horizon / c.run.dt));
    {
        py::gil_scoped_release release;
        evolve_truncated(integ, s, stream_for(c.run.seed, path), steps, std::nullopt, [&](const TrajectoryState& st) {
            if (st.step % c.run.sample_every == 0 || st.step == steps) record_energy(rec, st, D);
        });
    }
    py::dict out;
    out["t"] = py::array(py::cast(rec.t));
    out["E"] = py::array(py::cast(rec.E));
    out["E_hat"] = py::array(py::cast(rec.E_hat));
    out["E_psi"] = py::array(py::cast(rec.E_psi));
    out["norm_sq"] = py::array(py::cast(rec.norm_sq));
    out["u0"] = to_numpy(u0.samples());
    out["u"] = to_numpy(s.u.samples());
    std::vector<double> x(model.grid->size());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = model.grid->x(i);
    out["x"] = py::array(py::cast(x));
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Stochastic complex Ginzburg-Landau Monte Carlo lab";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<BlowUpError>(m, "BlowUpError", PyExc_RuntimeError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const ConfigError& e) {
            py::object type = py::module_::import("cglmix._core").attr("ConfigError");
            PyErr_SetObject(type.ptr(), py::make_tuple(e.what(), e.violations()).ptr());
        } catch (const IoError& e) {
            PyErr_SetString(PyExc_OSError, e.what());
        } catch (const DomainError& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        } catch (const PreconditionError& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        }
    });

    m.def("canonical_config", [](const std::string& text) { return to_ini(parse_config(text)); }, py::arg("text"),
          "Parses INI text and returns the canonical echo with every key.");
    m.def("config_hash", [](const std::string& text) { return config_hash(parse_config(text)); }, py::arg("text"));
    m.def("git_blob_sha1", [](const py::bytes& b) { return git_blob_sha1(std::string(b)); }, py::arg("content"));
    m.def("kinds", [] {
        std::vector<std::string> out;
        for (auto k : {ExperimentKind::Simulate, ExperimentKind::Couple, ExperimentKind::Mixing, ExperimentKind::Tails,
                       ExperimentKind::Poincare, ExperimentKind::Validate}) {
            out.emplace_back(kind_name(k));
        }
        return out;
    });

    m.def(
        "run",
        [](const std::string& text, const std::optional<std::string>& kind, const std::string& out_root,
           const std::optional<std::string>& directory, unsigned workers) {
            RunOptions opt;
            opt.out_root = out_root;
            if (directory) opt.directory = *directory;
            opt.workers = workers;
            const auto c = with_kind(text, kind);
            ResultRecord r;
            {
                py::gil_scoped_release release;
                r = run(c, opt);
            }
            py::dict out;
            out["kind"] = std::string(kind_name(r.kind));
            out["config_hash"] = r.config_hash;
            out["seed"] = r.seed;
            out["directory"] = r.directory.string();
            out["files"] = r.files;
            out["pass"] = r.pass ? py::cast(*r.pass) : py::none();
            out["report_json"] = r.report_json;
            out["wall_seconds"] = r.wall_seconds;
            return out;
        },
        py::arg("text") = "", py::arg("kind") = py::none(), py::arg("out_root") = "runs",
        py::arg("directory") = py::none(), py::arg("workers") = 1u,
        "Runs one experiment and returns its record; the report itself is JSON text.");

    m.def(
        "validation_suite",
        [](const std::string& text, unsigned workers) {
            std::vector<std::tuple<std::string, bool, std::string>> out;
            for (auto& c : run_validation_suite(parse_config(text), workers)) out.emplace_back(c.name, c.pass, c.detail);
            return out;
        },
        py::arg("text") = "", py::arg("workers") = 1u);

    m.def("simulate_path", &simulate_path, py::arg("text") = "", py::arg("path") = 0,
          "One tracked trajectory from the configured initial condition: energies and final field.");

    m.def(
        "read_snapshot",
        [](const std::string& path) {
            auto s = read_snapshot(path);
            return py::make_tuple(s.t, to_numpy(s.samples));
        },
        py::arg("path"));

    m.def(
        "ou_oracle",
        [](const std::string& text, std::size_t j, double t) {
            auto c = parse_config(text);
            Model model = build_model(c);
            model.params.alpha = 0.0;
            auto o = ou_oracle(model.params, model.noise, *model.basis, j, t);
            return py::make_tuple(std::complex<double>(o.mean_factor), o.variance);
        },
        py::arg("text"), py::arg("j"), py::arg("t"),
        "Mean factor and variance of coordinate j of the alpha = 0 equation at time t.");

    m.def("philox4x32_10", [](std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key) {
        return philox4x32_10(ctr, key);
    });

    m.attr("EXIT_OK") = static_cast<int>(kExitOk);
    m.attr("EXIT_USAGE") = static_cast<int>(kExitUsage);
    m.attr("EXIT_VALIDATION") = static_cast<int>(kExitValidation);
    m.attr("EXIT_BLOWUP") = static_cast<int>(kExitBlowUp);
    m.attr("EXIT_IO") = static_cast<int>(kExitIo);
}
