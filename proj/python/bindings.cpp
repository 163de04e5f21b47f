#include "weyllab/errors.hpp"
#include "weyllab/invariants.hpp"
#include "weyllab/models.hpp"
#include "weyllab/recurrence.hpp"
#include "weyllab/spectra.hpp"
#include "weyllab/surfrev.hpp"
#include "weyllab/weyl.hpp"

#include <nlohmann/json.hpp>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace weyllab;

namespace {

ModelPtr model_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("model descriptor: ") + e.what());
    }
    return make_model(j);
}

Matrix to_matrix(const std::vector<std::vector<double>>& rows) {
    const auto n = static_cast<Eigen::Index>(rows.size());
    Matrix M(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (static_cast<Eigen::Index>(rows[i].size()) != n) throw DomainError("basis must be square");
        for (Eigen::Index j = 0; j < n; ++j) M(i, j) = rows[i][j];
    }
    return M;
}

py::dict row_dict(const WeylSeriesRow& r) { return py::dict(py::arg("h") = r.h, py::arg("N") = r.N, py::arg("leading") = r.leading, py::arg("R_h") = r.R_h); }

std::vector<WeylSeriesRow> rows_from(const std::vector<py::dict>& rows) {
    std::vector<WeylSeriesRow> out;
    for (const auto& d : rows)
        out.push_back({d["h"].cast<double>(), d["N"].cast<std::int64_t>(), d["leading"].cast<double>(),
                       d["R_h"].cast<double>()});
    return out;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "weyllab numerical core";
    py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_RuntimeError);

    py::class_<FlowModel, std::shared_ptr<FlowModel>>(m, "Model")
        .def(py::init([](const std::string& text) { return std::const_pointer_cast<FlowModel>(model_from_json(text)); }),
             py::arg("descriptor"))
        .def_property_readonly("name", &FlowModel::name)
        .def_property_readonly("level_dimension", &FlowModel::level_dimension)
        .def_property_readonly("level_volume", &FlowModel::level_volume)
        .def_property_readonly("shortest_period", &FlowModel::shortest_period)
        .def_property_readonly("polynomial_growth", &FlowModel::polynomial_growth)
        .def_property_readonly("descriptor", [](const FlowModel& f) { return f.descriptor().dump(); });

    m.def("torus_count", [](const std::vector<std::vector<double>>& basis, double R) { return torus_count(to_matrix(basis), R); },
          py::arg("basis"), py::arg("R"));
    m.def("sphere3_count", &sphere3_count, py::arg("lam"));
    m.def("eigenvalue_count", [](const FlowModel& f, double lam, unsigned threads) { return eigenvalue_count(f, lam, threads); },
          py::arg("model"), py::arg("lam"), py::arg("threads") = 0);
    m.def("weyl_leading", &weyl_leading, py::arg("model"), py::arg("h"));

    m.def("weyl_series",
          [](const FlowModel& f, const std::vector<double>& hs, unsigned threads) {
              std::vector<py::dict> out;
              for (const auto& r : weyl_series(f, hs, threads)) out.push_back(row_dict(r));
              return out;
          },
          py::arg("model"), py::arg("hs"), py::arg("threads") = 0);
    m.def("remainder_exponent_fit",
          [](const std::vector<py::dict>& rows, bool log_mode) {
              const auto fit = remainder_exponent_fit(rows_from(rows), log_mode);
              return py::dict(py::arg("exponent") = fit.exponent, py::arg("constant") = fit.constant,
                              py::arg("residual") = fit.residual, py::arg("rows") = fit.rows);
          },
          py::arg("rows"), py::arg("log_mode") = false);
    m.def("verify_bound",
          [](const std::vector<py::dict>& rows, double exponent, bool inverse_log, double slack) {
              const BoundShape shape{inverse_log ? BoundShape::Kind::InverseLog : BoundShape::Kind::Power, exponent};
              const auto rep = verify_bound(rows_from(rows), shape, slack);
              return py::dict(py::arg("pass") = rep.pass, py::arg("constant") = rep.constant,
                              py::arg("worst_ratio") = rep.worst_ratio, py::arg("worst_index") = rep.worst_index,
                              py::arg("violations") = rep.violations);
          },
          py::arg("rows"), py::arg("exponent") = 0.0, py::arg("inverse_log") = false, py::arg("slack") = 1.5);
    m.def("plan_json",
          [](const std::string& cls, int order, double h, double ell, std::optional<double> lambda_max, double c) {
              return plan_to_json(plan_parameters({plan_class_from_string(cls), order, h, ell, lambda_max, c})).dump();
          },
          py::arg("cls"), py::arg("order") = 1, py::arg("h"), py::arg("ell") = 0.01, py::arg("lambda_max") = py::none(),
          py::arg("c") = 1.0);

    m.def("recurrence_grid",
          [](const FlowModel& f, const std::vector<double>& eps, const std::vector<double>& T, std::size_t samples,
             std::uint64_t seed, unsigned threads, std::optional<double> t_min) {
              std::vector<py::dict> out;
              for (const auto& r : recurrence_grid(f, eps, T, samples, seed, threads, t_min))
                  out.push_back(py::dict(py::arg("eps") = r.spec.eps, py::arg("T") = r.spec.T,
                                         py::arg("volume") = r.volume, py::arg("ci_low") = r.ci_low,
                                         py::arg("ci_high") = r.ci_high, py::arg("hits") = r.hits,
                                         py::arg("samples") = r.samples, py::arg("failed") = r.failed));
              return out;
          },
          py::arg("model"), py::arg("eps"), py::arg("T"), py::arg("samples"), py::arg("seed"), py::arg("threads") = 0,
          py::arg("t_min") = py::none());

    m.def("invariants",
          [](const FlowModel& f, std::uint64_t seed, std::size_t entropy_samples, unsigned threads) {
              InvariantOptions o;
              o.seed = seed;
              o.entropy_samples = entropy_samples;
              o.threads = threads;
              const auto r = compute_invariants(f, o);
              return py::dict(py::arg("lambda_max") = r.lambda_max, py::arg("polynomial") = r.polynomial,
                              py::arg("lyapunov") = r.lyapunov, py::arg("chi") = r.chi, py::arg("h_top") = r.h_top,
                              py::arg("entropy_unstable") = r.entropy_unstable);
          },
          py::arg("model"), py::arg("seed") = 1, py::arg("entropy_samples") = 20000, py::arg("threads") = 0);

    m.def("return_map",
          [](const FlowModel& f, const std::vector<double>& alphas, unsigned threads) {
              const auto* s = dynamic_cast<const SurfaceOfRevolution*>(&f);
              if (!s) throw ConfigError("return_map needs a surfrev model");
              std::vector<py::dict> out;
              for (const auto& r : return_map(*s, alphas, threads))
                  out.push_back(py::dict(py::arg("alpha") = r.alpha, py::arg("tau") = r.tau,
                                         py::arg("theta") = r.theta, py::arg("clairaut") = r.clairaut));
              return out;
          },
          py::arg("model"), py::arg("alphas"), py::arg("threads") = 0);
}
