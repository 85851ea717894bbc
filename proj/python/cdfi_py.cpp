#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <limits>
#include <map>
#include <sstream>

#include "cdfi/error.hpp"
#include "cdfi/hypoexp.hpp"
#include "cdfi/moments.hpp"
#include "cdfi/rates.hpp"
#include "cdfi/regime.hpp"
#include "cdfi/simulate.hpp"
#include "cdfi/stats.hpp"
#include "cdfi/transforms.hpp"
#include "cdfi/varenv.hpp"

namespace py = pybind11;
using namespace cdfi;

namespace {

std::map<std::string, std::vector<double>> table_columns(const AnalysisTable& t) {
    std::map<std::string, std::vector<double>> c;
    for (const auto& r : t.rows()) {
        c["n"].push_back(double(r.n));
        c["log_pi"].push_back(r.log_pi);
        c["m_n"].push_back(r.m);
        c["E_inf_T"].push_back(r.E_inf_T);
        c["var_tau"].push_back(r.var_tau);
        c["var_T"].push_back(r.var_T);
        c["r_n"].push_back(r.r);
    }
    return c;
}

} // namespace

PYBIND11_MODULE(_cdfi, m) {
    m.doc() = "birth-death processes coming down from infinity";
    m.attr("__version__") = CDFI_VERSION;

    py::register_exception<ModelError>(m, "ModelError", PyExc_ValueError);
    py::register_exception<ConvergenceError>(m, "ConvergenceError", PyExc_ArithmeticError);
    py::register_exception<ResourceError>(m, "ResourceError", PyExc_RuntimeError);

    py::class_<RateModel>(m, "RateModel")
        .def_static("preset", [](const std::string& name, const std::map<std::string, double>& params) {
            ParamList p(params.begin(), params.end());
            return RateModel::preset(name, p);
        }, py::arg("name"), py::arg("params") = std::map<std::string, double>{})
        .def_static("from_text", [](const std::string& t) { return RateModel::from_text(t); })
        .def_static("from_file", &RateModel::from_file)
        .def_property_readonly("name", &RateModel::name)
        .def_property_readonly("params", [](const RateModel& r) {
            std::map<std::string, double> out(r.params().begin(), r.params().end());
            return out;
        })
        .def_property_readonly("pure_death", &RateModel::pure_death)
        .def_property_readonly("absorbing_level", &RateModel::absorbing_level)
        .def("birth", &RateModel::birth)
        .def("death", &RateModel::death)
        .def("canonical", &RateModel::canonical)
        .def("to_text", &RateModel::to_text)
        .def("__repr__", [](const RateModel& r) { return "RateModel('" + r.canonical() + "')"; });

    m.def("presets", &preset_names);
    m.def("tau_mean", &tau_mean, py::arg("model"), py::arg("n"), py::arg("tol") = 1e-12);
    m.def("hitting_mean_from_infinity", &hitting_mean_from_infinity, py::arg("model"), py::arg("n"),
          py::arg("tol") = 1e-9);
    m.def("var_T_from_infinity", &var_T_from_infinity, py::arg("model"), py::arg("n"), py::arg("tol") = 1e-9);
    m.def("analysis_table", [](const RateModel& model, std::int64_t lo, std::int64_t hi, double tol) {
        return table_columns(AnalysisTable::build(model, lo, hi, tol));
    }, py::arg("model"), py::arg("lo"), py::arg("hi"), py::arg("tol") = 1e-9,
       "Per-level columns n, log_pi, m_n, E_inf_T, var_tau, var_T, r_n.");
    m.def("regime", [](const RateModel& model, std::int64_t lo, std::int64_t hi) {
        return regime(model, lo, hi).to_json();
    }, py::arg("model"), py::arg("lo"), py::arg("hi"), "Regime report as a JSON string.");
    m.def("laplace_T0", &laplace_T0, py::arg("model"), py::arg("a"), py::arg("tol") = 1e-10);
    m.def("limit_law_G", &limit_law_G, py::arg("l"), py::arg("alpha"), py::arg("a"), py::arg("tol") = 1e-12);
    m.def("hypoexp_cdf", [](const std::vector<double>& rates, const std::vector<double>& ts) {
        return hypoexp_cdf(rates, ts);
    }, py::arg("rates"), py::arg("ts"));
    m.def("pure_death_rates", &pure_death_rates);

    m.def("simulate_tau", [](const RateModel& model, std::int64_t n, std::int64_t reps, std::uint64_t seed, int workers) {
        py::gil_scoped_release release;
        return simulate_tau(model, n, reps, seed, workers).tau;
    }, py::arg("model"), py::arg("n"), py::arg("reps"), py::arg("seed"), py::arg("workers") = 1);
    m.def("hitting_times", [](const RateModel& model, std::int64_t N0, std::int64_t n, std::int64_t reps,
                              std::uint64_t seed, int workers, bool from_infinity) {
        py::gil_scoped_release release;
        EnsemblePlan plan;
        plan.N0 = N0;
        plan.reps = reps;
        plan.levels = {n};
        plan.stop_level = n;
        plan.master_seed = seed;
        plan.workers = workers;
        plan.keep_records = true;
        plan.entrance = from_infinity ? Entrance::mean_offset : Entrance::finite;
        std::vector<double> out;
        for (const auto& r : monte_carlo(model, plan).records)
            out.push_back(r.T(n).value_or(std::numeric_limits<double>::quiet_NaN()));
        return out;
    }, py::arg("model"), py::arg("N0"), py::arg("n"), py::arg("reps"), py::arg("seed"), py::arg("workers") = 1,
       py::arg("from_infinity") = false, "Samples of T_n started from N0 (plus the mean descent from infinity).");
    m.def("extinction_cdf", [](const RateModel& model, std::int64_t N0, const std::vector<double>& grid,
                               std::int64_t reps, std::uint64_t seed, int workers) {
        py::gil_scoped_release release;
        std::vector<std::tuple<double, double, double, double>> out;
        for (const auto& p : estimate_extinction_cdf(model, N0, grid, reps, seed, workers))
            out.emplace_back(p.t, p.estimate, p.lo, p.hi);
        return out;
    }, py::arg("model"), py::arg("N0"), py::arg("grid"), py::arg("reps"), py::arg("seed"), py::arg("workers") = 1,
       "(t, estimate, lo, hi) per grid point.");
    m.def("ks_statistic", [](std::vector<double> x, const std::function<double(double)>& cdf) {
        return ks_statistic(std::move(x), cdf);
    });
    m.def("survival", [](const RateModel& harsh, double mild_lambda, double c, double beta, std::int64_t epochs,
                         std::int64_t N0, std::int64_t reps, std::uint64_t seed) {
        py::gil_scoped_release release;
        const auto s = make_schedule(harsh, MildPhase::constant_birth(mild_lambda), c, beta, epochs, 1.0);
        return run_schedule(s, N0, epochs, reps, seed).survivors;
    }, py::arg("harsh"), py::arg("mild_lambda"), py::arg("c"), py::arg("beta"), py::arg("epochs"), py::arg("N0"),
       py::arg("reps"), py::arg("seed"), "Survivor counts after each harsh epoch (unit mild gaps).");
}
