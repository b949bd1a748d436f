#include "dktax/analysis.hpp"
#include "dktax/pipeline.hpp"
#include "dktax/synth.hpp"
#include "dktax/version.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace dktax;

namespace {

py::dict to_dict(const ElasticityResult& e) {
    py::dict d;
    d["epsilon"] = e.epsilon;
    d["se"] = e.se;
    d["mech_t"] = e.mech_t;
    d["mech_c"] = e.mech_c;
    return d;
}

PipelineConfig make_config(const std::optional<std::string>& config,
                           const std::optional<std::string>& out,
                           const std::optional<std::uint64_t>& seed,
                           const std::optional<int>& threads,
                           const std::optional<double>& deflation_factor,
                           const std::optional<std::string>& groups,
                           const std::optional<std::size_t>& n_individuals,
                           const std::optional<double>& elasticity) {
    PipelineConfig c = config ? load_pipeline_config(*config) : PipelineConfig{};
    if (out) c.output_dir = *out;
    if (seed) c.dgp.seed = *seed;
    if (threads) c.threads = *threads;
    if (deflation_factor) c.deflation_factor = *deflation_factor;
    if (groups) apply_group_spec(c, *groups);
    if (n_individuals) c.dgp.n_individuals = *n_individuals;
    if (elasticity) c.dgp.gamma = gamma_for_elasticity(*elasticity);
    return c;
}

}  // namespace

PYBIND11_MODULE(_dktax, m) {
    m.doc() = "Tax engine, synthetic panel and estimation pipeline";
    m.attr("__version__") = kVersion;

    py::register_exception<Error>(m, "Error", PyExc_RuntimeError);

    py::class_<IncomeRecord>(m, "IncomeRecord")
        .def(py::init([](double li, double ci, double d, bool married, double li_w, double ci_w,
                         double d_w) {
                 IncomeRecord r;
                 r.li = li;
                 r.ci = ci;
                 r.d = d;
                 r.married = married;
                 r.li_w = li_w;
                 r.ci_w = ci_w;
                 r.d_w = d_w;
                 return r;
             }),
             py::arg("li"), py::arg("ci") = 0.0, py::arg("d") = 0.0, py::arg("married") = false,
             py::arg("li_w") = 0.0, py::arg("ci_w") = 0.0, py::arg("d_w") = 0.0)
        .def_readwrite("li", &IncomeRecord::li)
        .def_readwrite("ci", &IncomeRecord::ci)
        .def_readwrite("d", &IncomeRecord::d)
        .def_readwrite("married", &IncomeRecord::married)
        .def_readwrite("li_w", &IncomeRecord::li_w)
        .def_readwrite("ci_w", &IncomeRecord::ci_w)
        .def_readwrite("d_w", &IncomeRecord::d_w);

    py::class_<TaxSystem>(m, "TaxSystem")
        .def_readonly("year", &TaxSystem::year)
        .def("__str__", &format_tax_system);

    m.def("system_1986", &system_1986);
    m.def("system_1987", &system_1987);
    m.def("parse_tax_system", [](const std::string& s) { return parse_tax_system(s); });
    m.def("load_tax_system", &load_tax_system);
    m.def("deflate_system", &deflate_system, py::arg("sys"), py::arg("factor") = 1.02);
    m.def("tax_liability", &tax_liability);
    m.def("effective_mtr", &effective_mtr);
    m.def("joint_middle_transfer", &joint_middle_transfer);
    m.def("bracket_location", [](const IncomeRecord& r, const TaxSystem& s) {
        return std::string(to_string(bracket_location(r, s)));
    });
    m.def("mechanical_ntr_change", &mechanical_ntr_change);

    m.def("gamma_for_elasticity", &gamma_for_elasticity);
    m.def("normalized_difference", &normalized_difference);
    m.def(
        "elasticity",
        [](double beta, double se, double mech_t, double mech_c) {
            return to_dict(elasticity(beta, se, mech_t, mech_c));
        },
        py::arg("beta_tot"), py::arg("se_tot"), py::arg("mech_t"), py::arg("mech_c"));

    m.def(
        "generate_panel",
        [](const std::string& path, std::size_t n, std::uint64_t seed, double eps,
           double factor, int threads) {
            DgpConfig c;
            c.n_individuals = n;
            c.seed = seed;
            c.gamma = gamma_for_elasticity(eps);
            c.cpi_growth = factor;
            c.threads = threads;
            const Panel p = generate_panel(c);
            write_panel(p, path);
            return p.size();
        },
        py::arg("path"), py::arg("n_individuals") = 40000, py::arg("seed") = 1,
        py::arg("elasticity") = 0.4, py::arg("deflation_factor") = 1.02, py::arg("threads") = 1,
        py::call_guard<py::gil_scoped_release>());

    m.def(
        "run",
        [](const std::string& stage, std::optional<std::string> config,
           std::optional<std::string> out, std::optional<std::uint64_t> seed,
           std::optional<int> threads, std::optional<double> deflation_factor,
           std::optional<std::string> groups, std::optional<std::size_t> n_individuals,
           std::optional<double> elasticity) {
            Pipeline p(make_config(config, out, seed, threads, deflation_factor, groups,
                                   n_individuals, elasticity));
            py::gil_scoped_release release;
            if (stage == "generate")
                p.generate();
            else if (stage == "assign")
                p.assign();
            else if (stage == "balance")
                p.balance();
            else if (stage == "estimate")
                p.estimate();
            else if (stage == "diagnose")
                p.diagnose();
            else if (stage == "pipeline")
                p.run_all();
            else
                throw InvalidArgument("unknown stage '" + stage + "'");
            std::vector<std::string> files;
            for (const auto& f : p.written()) files.push_back(p.out(f));
            return files;
        },
        py::arg("stage") = "pipeline", py::kw_only(), py::arg("config") = py::none(),
        py::arg("out") = py::none(), py::arg("seed") = py::none(),
        py::arg("threads") = py::none(), py::arg("deflation_factor") = py::none(),
        py::arg("groups") = py::none(), py::arg("n_individuals") = py::none(),
        py::arg("elasticity") = py::none());

    m.def("dump_config", [](std::optional<std::string> path) {
        return dump_pipeline_config(path ? load_pipeline_config(*path) : PipelineConfig{});
    }, py::arg("path") = py::none());
}
