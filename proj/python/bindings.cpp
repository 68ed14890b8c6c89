#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "burgers4dvar/analysis.hpp"
#include "burgers4dvar/cli.hpp"
#include "burgers4dvar/optimize.hpp"
#include "burgers4dvar/problem.hpp"

namespace py = pybind11;
using namespace burgers4dvar;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Field to_field(const Grid1D& grid, const Array& a) {
  if (a.ndim() != 1) throw std::invalid_argument("expected a 1-D array");
  return Field(grid, std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Field& f) {
  Array out(static_cast<py::ssize_t>(f.size()));
  std::copy(f.values().begin(), f.values().end(), out.mutable_data());
  return out;
}

Grid1D grid_for(const Array& a) { return Grid1D(static_cast<std::size_t>(a.size())); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Burgers 4D-Var core: forward/adjoint solvers, cost, fixed-point map";
  m.attr("__version__") = library_version();

  m.def("grid_nodes", [](std::size_t n) {
    const Grid1D g(n);
    return to_array(Field::sample(g, [](double x) { return x; }));
  }, py::arg("n"));
  m.def("poincare_rate", [](std::size_t n) { return poincare_rate(Grid1D(n)); }, py::arg("n"));
  m.def("v_norm", [](const Array& u) { return v_norm(to_field(grid_for(u), u)); }, py::arg("u"));

  m.def("solve_forward", [](const Array& u, double T, double eps, double dt) {
    const Grid1D g = grid_for(u);
    const Field u0 = to_field(g, u);
    SolverConfig cfg = dt > 0.0 ? SolverConfig{} : SolverConfig::default_for(g, eps, u0.max_abs());
    if (dt > 0.0) cfg.dt = dt;
    const Trajectory traj = solve_forward(u0, T, cfg, eps);
    py::array_t<double> states({traj.states.size(), g.size()});
    auto s = states.mutable_unchecked<2>();
    for (std::size_t k = 0; k < traj.states.size(); ++k) {
      for (std::size_t i = 0; i < g.size(); ++i) s(k, i) = traj.states[k].values()[i];
    }
    return py::make_tuple(py::array(py::cast(traj.time.times())), states);
  }, py::arg("u"), py::arg("T"), py::arg("eps"), py::arg("dt") = 0.0);

  m.def("cole_hopf_reference", [](const Array& u, double t, double eps, int n_modes) {
    const Grid1D g = grid_for(u);
    return to_array(cole_hopf_reference(to_field(g, u), t, eps, n_modes));
  }, py::arg("u"), py::arg("t"), py::arg("eps"), py::arg("n_modes") = 512);

  py::class_<ProfileSpec>(m, "Profile")
      .def_static("zero", &ProfileSpec::zero)
      .def_static("sines", &ProfileSpec::sines, py::arg("amplitudes"))
      .def_static("hat", &ProfileSpec::hat, py::arg("center"), py::arg("height"))
      .def("__call__", &ProfileSpec::operator(), py::arg("x"))
      .def("sample", [](const ProfileSpec& p, std::size_t n) { return to_array(p.sample(Grid1D(n))); },
           py::arg("n"));

  py::class_<ProblemTemplate>(m, "ProblemTemplate")
      .def(py::init<>())
      .def_readwrite("n_interior", &ProblemTemplate::n_interior)
      .def_readwrite("eps", &ProblemTemplate::eps)
      .def_readwrite("beta", &ProblemTemplate::beta)
      .def_readwrite("T", &ProblemTemplate::T)
      .def_readwrite("background", &ProblemTemplate::background)
      .def_readwrite("truth", &ProblemTemplate::truth)
      .def_readwrite("obs_variance", &ProblemTemplate::obs_variance)
      .def_readwrite("add_noise", &ProblemTemplate::add_noise)
      .def_readwrite("seed", &ProblemTemplate::seed)
      .def_readwrite("dt", &ProblemTemplate::dt)
      .def("instantiate", &ProblemTemplate::instantiate);

  py::class_<AssimilationProblem>(m, "Problem")
      .def_readonly("eps", &AssimilationProblem::eps)
      .def_readonly("beta", &AssimilationProblem::beta)
      .def_readonly("T", &AssimilationProblem::T)
      .def_property_readonly("n_interior", [](const AssimilationProblem& p) { return p.grid().size(); })
      .def_property_readonly("dt", [](const AssimilationProblem& p) { return p.cfg.dt; })
      .def_property_readonly("background", [](const AssimilationProblem& p) { return to_array(p.background); })
      .def("cost", [](const AssimilationProblem& p, const Array& u) { return eval_cost(p, to_field(p.grid(), u)); },
           py::arg("u"))
      .def("gradient", [](const AssimilationProblem& p, const Array& u) {
        // L2 representer of the full derivative of J.
        const GradientPair g = grad_J(p, to_field(p.grid(), u));
        return to_array(2.0 * g.l2_repr);
      }, py::arg("u"))
      .def("apply_ST", [](const AssimilationProblem& p, const Array& u) {
        return to_array(apply_ST(p, to_field(p.grid(), u)));
      }, py::arg("u"))
      .def("critical_residual", [](const AssimilationProblem& p, const Array& u) {
        return critical_residual(p, to_field(p.grid(), u));
      }, py::arg("u"))
      .def("minimize", [](const AssimilationProblem& p, const Array& u0, int max_iterations, double grad_tol) {
        OptimOptions o;
        o.max_iterations = max_iterations;
        o.grad_tol = grad_tol;
        const Field start = to_field(p.grid(), u0);
        std::optional<OptimResult> r;
        {
          py::gil_scoped_release release;
          r = nonlinear_cg(p, start, o);
        }
        py::dict d;
        d["u"] = to_array(r->u_final);
        d["J"] = r->J_history;
        d["grad_norm"] = r->grad_norm_history;
        d["iterations"] = r->iterations;
        d["status"] = to_string(r->status);
        return d;
      }, py::arg("u0"), py::arg("max_iterations") = 500, py::arg("grad_tol") = 1e-6);

  m.def("run_command", [](const std::string& command, const std::filesystem::path& config,
                          std::optional<std::filesystem::path> out, std::optional<std::uint64_t> seed,
                          unsigned jobs) {
    CliOptions opts{command, config, std::move(out), seed, jobs};
    RunRecord r;
    {
      py::gil_scoped_release release;
      r = run_command(opts);
    }
    py::dict d;
    d["status"] = r.status;
    d["message"] = r.message;
    d["files"] = r.files;
    return d;
  }, py::arg("command"), py::arg("config"), py::arg("out") = py::none(), py::arg("seed") = py::none(),
     py::arg("jobs") = 1);
}
