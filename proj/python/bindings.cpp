#include <sstream>

#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "natbound/bridge.hpp"
#include "natbound/cli.hpp"
#include "natbound/expression.hpp"
#include "natbound/feller.hpp"
#include "natbound/hydro.hpp"
#include "natbound/kernels.hpp"
#include "natbound/path_integral.hpp"
#include "natbound/problem.hpp"
#include "natbound/sde.hpp"
#include "natbound/spectral.hpp"

namespace py = pybind11;
using namespace natbound;

namespace {

ExtendedReal to_endpoint(const py::object& o) {
    if (py::isinstance<py::str>(o)) {
        const auto s = o.cast<std::string>();
        if (s == "-inf") return ExtendedReal::neg_inf();
        if (s == "+inf" || s == "inf") return ExtendedReal::pos_inf();
        throw ParseError("endpoint must be a number, '-inf' or '+inf'");
    }
    return ExtendedReal::from_double(o.cast<double>());
}

py::object from_endpoint(const ExtendedReal& e) {
    if (e.is_finite()) return py::float_(e.value());
    return py::str(e.to_string());
}

Interval to_interval(const py::object& o) {
    if (o.is_none()) return Interval::real_line();
    const auto t = o.cast<py::sequence>();
    if (t.size() != 2) throw ParseError("domain must be a pair (r1, r2)");
    return {to_endpoint(t[0]), to_endpoint(t[1])};
}

py::tuple interval_tuple(const Interval& iv) { return py::make_tuple(from_endpoint(iv.r1()), from_endpoint(iv.r2())); }

std::vector<double> to_vector(std::span<const double> s) { return {s.begin(), s.end()}; }

GridField to_field(double lo, double hi, const std::vector<double>& values) {
    return {UniformGrid(lo, hi, values.size()), values};
}

py::dict trace_dict(const IntegrabilityTrace& t) {
    py::dict d;
    d["verdict"] = to_string(t.verdict);
    d["rule"] = t.rule;
    d["cutoffs"] = t.cutoffs;
    d["totals"] = t.totals;
    return d;
}

py::dict boundary_dict(const BoundaryClass& bc) {
    py::dict d;
    d["endpoint"] = from_endpoint(bc.endpoint);
    d["class"] = to_string(bc.kind);
    d["x0"] = bc.x0;
    d["l1"] = trace_dict(bc.l1);
    d["l2"] = trace_dict(bc.l2);
    return d;
}

py::dict estimate_dict(const McEstimate& e) {
    py::dict d;
    d["value"] = e.value;
    d["std_error"] = e.std_error;
    d["n_effective"] = e.n_effective;
    d["seed"] = e.seed;
    d["n_paths"] = e.n_paths;
    d["n_steps"] = e.n_steps;
    d["chunk_size"] = e.chunk_size;
    d["discarded"] = e.discarded;
    d["killed"] = e.killed;
    d["reliable"] = e.reliable;
    return d;
}

McOptions mc_options(int threads, std::size_t chunk_size, const std::string& rule, bool correction) {
    McOptions o;
    o.threads = threads;
    o.chunk_size = chunk_size;
    if (rule == "trapezoid") {
        o.rule = TimeRule::Trapezoid;
    } else if (rule == "midpoint") {
        o.rule = TimeRule::MidpointPosition;
    } else {
        throw ParseError("rule must be 'trapezoid' or 'midpoint'");
    }
    o.crossing_correction = correction;
    return o;
}

DiffusionSpec spec_from_expression(const std::string& drift, double D, const py::object& domain,
                                   const std::optional<std::string>& potential, const std::vector<double>& nodes) {
    DiffusionSpec s;
    s.D = D;
    s.drift = parse_drift(drift);
    s.domain = to_interval(domain);
    if (potential) s.drift_potential = parse_drift_expression(*potential);
    s.nodes = nodes;
    std::sort(s.nodes.begin(), s.nodes.end());
    s.validate();
    return s;
}

py::dict member_dict(const EquivalenceClassMember& m) {
    py::dict d;
    d["n"] = m.n;
    d["component"] = m.component;
    d["interval"] = interval_tuple(m.interval);
    d["epsilon"] = m.epsilon;
    d["component_mass"] = m.component_mass;
    d["anchor"] = m.anchor;
    py::list b;
    for (const auto& bc : m.boundaries) b.append(boundary_dict(bc));
    d["boundaries"] = b;
    d["spec"] = m.spec();
    d["density"] = m.density;
    return d;
}

py::dict state_dict(const EigenState& s) {
    py::dict d;
    d["n"] = s.n;
    d["epsilon"] = s.epsilon;
    d["nodes"] = s.nodes;
    d["psi"] = s.psi;
    if (s.samples) d["samples"] = to_vector(s.samples->values());
    return d;
}

}  // namespace

PYBIND11_MODULE(_natbound, m) {
    m.doc() = "Diffusions with natural boundaries: kernels, bridges, path integrals, simulation";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ParseError>(m, "ParseError", base.ptr());
    py::register_exception<DomainError>(m, "DomainError", base.ptr());
    py::register_exception<RangeError>(m, "RangeError", base.ptr());
    py::register_exception<NumericalError>(m, "NumericalError", base.ptr());
    py::register_exception<InconclusiveError>(m, "InconclusiveError", base.ptr());
    py::register_exception<InvariantError>(m, "InvariantError", base.ptr());

    // Expressions and specs.
    m.def("parse_expression", [](const std::string& text) { return parse_drift_expression(text); },
          py::arg("text"), "Compile an arithmetic formula in x into a callable.");

    py::class_<DiffusionSpec>(m, "DiffusionSpec")
        .def_readonly("D", &DiffusionSpec::D)
        .def_readonly("nodes", &DiffusionSpec::nodes)
        .def_property_readonly("domain", [](const DiffusionSpec& s) { return interval_tuple(s.domain); })
        .def("drift", [](const DiffusionSpec& s, double x) { return s.drift(x); }, py::arg("x"))
        .def("drift_jet",
             [](const DiffusionSpec& s, double x) {
                 const Jet j = s.drift.jet(x);
                 return py::make_tuple(j.v, j.d1, j.d2);
             },
             py::arg("x"))
        .def("potential",
             [](const DiffusionSpec& s, double x) {
                 if (!s.drift_potential) throw DomainError("spec has no drift potential");
                 return (*s.drift_potential)(x);
             },
             py::arg("x"));

    m.def("ou_spec", &ou_spec, py::arg("omega") = 1.0, py::arg("D") = 0.5);
    m.def("bessel_spec", &bessel_spec, py::arg("a"), py::arg("D") = 0.5);
    m.def("hermite_spec", &hermite_spec, py::arg("n"), py::arg("omega") = 1.0, py::arg("D") = 0.5);
    m.def("spec_from_expression", &spec_from_expression, py::arg("drift"), py::arg("D") = 0.5,
          py::arg("domain") = py::none(), py::arg("potential") = std::nullopt,
          py::arg("nodes") = std::vector<double>{});

    // Boundary classification.
    m.def("hille_l1", &hille_l1, py::arg("spec"), py::arg("x0"), py::arg("x"));
    m.def("hille_l2", &hille_l2, py::arg("spec"), py::arg("x0"), py::arg("x"));
    m.def("classify_boundary",
          [](const DiffusionSpec& s, const py::object& endpoint, double x0) {
              return boundary_dict(classify_boundary(s, to_endpoint(endpoint), x0));
          },
          py::arg("spec"), py::arg("endpoint"), py::arg("x0"));
    m.def("transmission_at_node",
          [](double lo, double hi, const std::vector<double>& rho, double node) {
              const Transmission t = transmission_at_node(to_field(lo, hi, rho), node);
              py::dict d;
              d["class"] = to_string(t.kind);
              d["alpha_left"] = t.left.alpha;
              d["alpha_right"] = t.right.alpha;
              d["std_error_left"] = t.left.std_error;
              d["std_error_right"] = t.right.std_error;
              d["tolerance"] = t.tolerance;
              return d;
          },
          py::arg("lo"), py::arg("hi"), py::arg("rho"), py::arg("node"));

    // Kernels.
    py::class_<KernelOracle>(m, "KernelOracle")
        .def("__call__", &KernelOracle::operator(), py::arg("y"), py::arg("s"), py::arg("x"), py::arg("t"))
        .def("log", &KernelOracle::log, py::arg("y"), py::arg("s"), py::arg("x"), py::arg("t"))
        .def_property_readonly("D", &KernelOracle::D);
    m.def("heat_kernel", &heat_kernel, py::arg("D") = 0.5);
    m.def("mehler_kernel", &mehler_kernel);
    m.def("ou_transition_density", &ou_transition_density, py::arg("y"), py::arg("x"), py::arg("t"));
    m.def("bessel_i", &bessel_i, py::arg("a"), py::arg("z"));
    m.def("bessel_density",
          [](double a, double t, double xi0, double xi) { return BesselDensity(a)(t, xi0, xi); }, py::arg("a"),
          py::arg("t"), py::arg("xi0"), py::arg("xi"));
    m.def("check_semigroup",
          [](const KernelOracle& k, double s, double u, double t, double y, double x) {
              return check_semigroup(k, s, u, t, y, x);
          },
          py::arg("kernel"), py::arg("s"), py::arg("u"), py::arg("t"), py::arg("y"), py::arg("x"));

    // Bridge.
    py::class_<BridgeSolution>(m, "BridgeSolution")
        .def_readonly("converged", &BridgeSolution::converged)
        .def_readonly("iterations", &BridgeSolution::iterations)
        .def_readonly("marginal_residual", &BridgeSolution::marginal_residual)
        .def_readonly("log_domain", &BridgeSolution::log_domain)
        .def_readonly("gauge", &BridgeSolution::gauge)
        .def_readonly("log_theta_star_0", &BridgeSolution::log_theta_star_0)
        .def_readonly("log_theta_T", &BridgeSolution::log_theta_T)
        .def_property_readonly("x", [](const BridgeSolution& s) { return s.grid.points(); })
        .def("density", [](const BridgeSolution& s, double t) { return to_vector(interpolate_density(s, t).values()); },
             py::arg("t"))
        .def("drift", [](const BridgeSolution& s, double t) { return to_vector(bridge_drift(s, t).values()); },
             py::arg("t"))
        .def("current_velocity",
             [](const BridgeSolution& s, double t) { return to_vector(bridge_current_velocity(s, t).values()); },
             py::arg("t"));
    m.def("solve_bridge",
          [](double lo, double hi, const std::vector<double>& rho0, const std::vector<double>& rhoT, double T,
             const KernelOracle& kernel, double tol, int max_iter) {
              return solve_bridge({to_field(lo, hi, rho0), to_field(lo, hi, rhoT), T, kernel, kernel.D()}, tol,
                                  max_iter);
          },
          py::arg("lo"), py::arg("hi"), py::arg("rho0"), py::arg("rhoT"), py::arg("T"), py::arg("kernel"),
          py::arg("tol") = 1e-12, py::arg("max_iter") = 10000, py::call_guard<py::gil_scoped_release>());
    m.def("gaussian_density",
          [](double lo, double hi, std::size_t n, double mean, double variance) {
              return to_vector(gaussian_density(UniformGrid(lo, hi, n), mean, variance).values());
          },
          py::arg("lo"), py::arg("hi"), py::arg("n"), py::arg("mean"), py::arg("variance"));

    // Path integrals. Omega is an expression string so that worker threads never need the GIL.
    m.def("fk_kernel_mc",
          [](const std::string& omega, const py::object& domain, double D, double y, double s, double x, double t,
             std::size_t n_paths, std::size_t n_steps, std::uint64_t seed, int threads, std::size_t chunk_size,
             const std::string& rule, bool correction) {
              const ScalarFn om = parse_drift_expression(omega);
              const Interval dom = to_interval(domain);
              const McOptions o = mc_options(threads, chunk_size, rule, correction);
              McEstimate e;
              {
                  py::gil_scoped_release release;
                  e = fk_kernel_mc(om, dom, D, y, s, x, t, n_paths, n_steps, seed, o);
              }
              return estimate_dict(e);
          },
          py::arg("omega"), py::arg("domain") = py::none(), py::arg("D") = 0.5, py::arg("y") = 0.0,
          py::arg("s") = 0.0, py::arg("x") = 0.0, py::arg("t") = 1.0, py::arg("n_paths") = 100000,
          py::arg("n_steps") = 200, py::arg("seed") = 0, py::arg("threads") = 1, py::arg("chunk_size") = 16384,
          py::arg("rule") = "trapezoid", py::arg("correction") = true);
    m.def("girsanov_density_mc",
          [](const DiffusionSpec& spec, const std::string& omega, double y, double s, double x, double t,
             std::size_t n_paths, std::size_t n_steps, std::uint64_t seed, int threads) {
              const ScalarFn om = parse_drift_expression(omega);
              McEstimate e;
              {
                  py::gil_scoped_release release;
                  e = girsanov_density_mc(spec, om, y, s, x, t, n_paths, n_steps, seed,
                                          mc_options(threads, 16384, "trapezoid", true));
              }
              return estimate_dict(e);
          },
          py::arg("spec"), py::arg("omega"), py::arg("y"), py::arg("s"), py::arg("x"), py::arg("t"),
          py::arg("n_paths") = 100000, py::arg("n_steps") = 200, py::arg("seed") = 0, py::arg("threads") = 1);
    m.def("absorbing_limit_study",
          [](const std::string& omega, double D, double y, double x, double t, const std::vector<double>& cutoffs,
             std::size_t n_paths, std::size_t n_steps, std::uint64_t seed, int threads) {
              const ScalarFn om = parse_drift_expression(omega);
              std::vector<McEstimate> seq;
              {
                  py::gil_scoped_release release;
                  seq = absorbing_limit_study(om, D, y, x, t, cutoffs, n_paths, n_steps, seed,
                                              mc_options(threads, 16384, "trapezoid", true));
              }
              py::list out;
              for (const auto& e : seq) out.append(estimate_dict(e));
              return out;
          },
          py::arg("omega"), py::arg("D"), py::arg("y"), py::arg("x"), py::arg("t"), py::arg("cutoffs"),
          py::arg("n_paths") = 100000, py::arg("n_steps") = 200, py::arg("seed") = 0, py::arg("threads") = 1);

    // Simulation.
    m.def("simulate",
          [](const DiffusionSpec& spec, double x0, double dt, double T, std::size_t n_paths, std::uint64_t seed,
             double node_guard, int threads) {
              SimConfig c;
              c.dt = dt;
              c.T = T;
              c.n_paths = n_paths;
              c.seed = seed;
              c.node_guard = node_guard;
              c.threads = threads;
              SimResult r;
              {
                  py::gil_scoped_release release;
                  r = simulate(spec, x0, c);
              }
              py::dict d;
              d["terminals"] = r.terminals;
              d["flagged"] = r.flagged;
              d["flagged_fraction"] = r.flagged_fraction;
              d["reliable"] = r.reliable;
              d["rejections"] = r.rejections;
              d["seed"] = r.seed;
              return d;
          },
          py::arg("spec"), py::arg("x0"), py::arg("dt") = 1e-3, py::arg("T") = 1.0, py::arg("n_paths") = 1000,
          py::arg("seed") = 0, py::arg("node_guard") = 0.0, py::arg("threads") = 1);
    m.def("first_passage_fraction",
          [](const DiffusionSpec& spec, double x0, double R, double dt, double T, std::size_t n_paths,
             std::uint64_t seed) {
              SimConfig c;
              c.dt = dt;
              c.T = T;
              c.n_paths = n_paths;
              c.seed = seed;
              PassageReport r;
              {
                  py::gil_scoped_release release;
                  r = first_passage_fraction(spec, x0, R, c);
              }
              py::dict d;
              d["target"] = r.target;
              d["hits"] = r.hits;
              d["fraction_hit"] = r.fraction_hit;
              d["mean_hit_time"] = r.mean_hit_time ? py::object(py::float_(*r.mean_hit_time)) : py::object(py::none());
              d["level_is_wall"] = r.level_is_wall;
              d["reliable"] = r.reliable;
              return d;
          },
          py::arg("spec"), py::arg("x0"), py::arg("R"), py::arg("dt") = 1e-3, py::arg("T") = 1.0,
          py::arg("n_paths") = 1000, py::arg("seed") = 0);
    m.def("chi_square_test",
          [](const std::vector<double>& samples, const std::function<double(double)>& cdf, double lo, double hi,
             int bins) {
              const ChiSquareResult r = chi_square_test(samples, cdf, lo, hi, bins);
              return py::make_tuple(r.statistic, r.dof, r.p_value);
          },
          py::arg("samples"), py::arg("cdf"), py::arg("lo"), py::arg("hi"), py::arg("bins") = 30);

    // Hydrodynamics.
    m.def("build_hydro",
          [](const DiffusionSpec& spec, double lo, double hi, const std::vector<double>& rho) {
              const HydroFields h = build_hydro(spec, to_field(lo, hi, rho));
              py::dict d;
              d["b"] = to_vector(h.b.values());
              d["b_star"] = to_vector(h.b_star.values());
              d["v"] = to_vector(h.v.values());
              d["u"] = to_vector(h.u.values());
              d["Q"] = to_vector(h.Q.values());
              d["P"] = to_vector(h.P.values());
              d["grad_Q"] = to_vector(h.grad_Q.values());
              d["grad_P"] = to_vector(h.grad_P.values());
              if (h.Omega) d["Omega"] = to_vector(h.Omega->values());
              d["mask"] = h.mask;
              const EhrenfestResult er = ehrenfest_check(h);
              d["ehrenfest_lhs"] = er.lhs;
              d["ehrenfest_rhs"] = er.rhs;
              return d;
          },
          py::arg("spec"), py::arg("lo"), py::arg("hi"), py::arg("rho"));
    m.def("acceleration_field",
          [](const DiffusionSpec& spec, double lo, double hi, std::size_t n) {
              const MaskedField f = acceleration_field(spec, UniformGrid(lo, hi, n));
              return py::make_tuple(to_vector(f.field.values()), f.mask);
          },
          py::arg("spec"), py::arg("lo"), py::arg("hi"), py::arg("n"));

    // Spectral.
    m.def("hermite_state", [](int n) { return state_dict(hermite_state(n)); }, py::arg("n"));
    m.def("sturm_liouville_solve",
          [](double lo, double hi, const std::vector<double>& omega, double D, int n_max) {
              py::list out;
              for (const auto& s : sturm_liouville_solve(to_field(lo, hi, omega), D, n_max)) out.append(state_dict(s));
              return out;
          },
          py::arg("lo"), py::arg("hi"), py::arg("omega"), py::arg("D"), py::arg("n_max"));
    m.def("nodal_decomposition",
          [](int n) {
              py::list out;
              for (const auto& mem : nodal_decomposition(hermite_state(n))) out.append(member_dict(mem));
              return out;
          },
          py::arg("n"), "Nodal components of the n-th harmonic state.");
    m.def("equivalence_class",
          [](const DiffusionSpec& reference, int n_max) {
              py::list out;
              for (const auto& mem : equivalence_class(reference, n_max)) out.append(member_dict(mem));
              return out;
          },
          py::arg("reference"), py::arg("n_max"));

    // Command line.
    m.def("run_cli",
          [](const std::vector<std::string>& args) {
              std::ostringstream out, err;
              int code = 0;
              {
                  py::gil_scoped_release release;
                  code = cli::run(args, out, err);
              }
              return py::make_tuple(code, out.str(), err.str());
          },
          py::arg("args"), "Run one subcommand in-process; returns (exit_code, stdout, stderr).");
}
