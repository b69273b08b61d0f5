// Acceptance harness: one PASS/FAIL line per criterion.
//   acceptance                  run all criteria
//   acceptance --criterion N    run criterion N only (exit code 1 on FAIL)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "natbound/bridge.hpp"
#include "natbound/cli.hpp"
#include "natbound/feller.hpp"
#include "natbound/hydro.hpp"
#include "natbound/kernels.hpp"
#include "natbound/path_integral.hpp"
#include "natbound/problem.hpp"
#include "natbound/sde.hpp"
#include "natbound/spectral.hpp"

#include "../oracles/oracles.hpp"

using namespace natbound;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

std::string sci(double a) { return fmt("%.3e", a); }

// 1. Finite-difference eigenvalues of -1/2 d^2 + x^2/2.
Outcome spectral_fidelity() {
    const UniformGrid grid(-8.0, 8.0, 1601);
    const GridField omega = GridField::sample(grid, [](double x) { return 0.5 * x * x; });
    const auto states = sturm_liouville_solve(omega, 0.5, 3);
    double worst = 0.0;
    std::string eps;
    for (int n = 0; n <= 3; ++n) {
        worst = std::max(worst, std::abs(states[n].epsilon - (n + 0.5)));
        eps += fmt("%.6f ", states[n].epsilon);
    }
    return {worst <= 1e-3, "eps_0..3 = " + eps + "max |eps_n - (n+1/2)| = " + sci(worst) + " (tol 1e-3)"};
}

// 2. b_n b_n' + b_n''/2 = xi away from nodes, n = 0..3.
Outcome dynamical_equivalence() {
    const UniformGrid grid(-8.0, 8.0, 1601);
    double worst = 0.0;
    std::size_t checked = 0;
    for (int n = 0; n <= 3; ++n) {
        const MaskedField acc = acceleration_field(hermite_spec(n), grid, 3.0);
        for (std::size_t i = 0; i < grid.size(); ++i) {
            if (!acc.mask[i]) continue;
            worst = std::max(worst, std::abs(acc.field[i] - grid[i]));
            ++checked;
        }
    }
    return {worst <= 1e-8 && checked > 4 * 1500,
            "max |grad Omega_n - xi| = " + sci(worst) + " over " + std::to_string(checked) + " points (tol 1e-8)"};
}

// 3. Mehler symmetry, Chapman-Kolmogorov and OU normalisation.
Outcome mehler_chain() {
    const KernelOracle k = mehler_kernel();
    double sym = 0.0;
    for (double y : {-2.0, -0.7, 0.0, 0.3, 1.5}) {
        for (double x : {-1.1, 0.0, 0.4, 2.2}) {
            for (double t : {0.1, 0.5, 1.0, 3.0}) {
                const double a = k(y, 0.0, x, t);
                const double b = k(x, 0.0, y, t);
                sym = std::max(sym, std::abs(a - b) / std::max(1.0, std::abs(a)));
            }
        }
    }
    double ck = 0.0;
    for (double y : {-1.0, 0.0, 0.5}) {
        for (double x : {-0.5, 0.0, 1.2}) ck = std::max(ck, check_semigroup(k, 0.0, 0.5, 1.0, y, x));
    }
    double mass_err = 0.0;
    const UniformGrid g(-12.0, 12.0, 4801);
    for (double y : {-1.0, 0.0, 2.0}) {
        for (double t : {0.1, 1.0, 4.0}) {
            const GridField p = GridField::sample(g, [&](double x) { return ou_transition_density(y, x, t); });
            mass_err = std::max(mass_err, std::abs(integrate(p) - 1.0));
        }
    }
    const bool ok = sym <= 1e-12 && ck < 1e-7 && mass_err <= 1e-8;
    return {ok, "symmetry " + sci(sym) + " (tol 1e-12), CK " + sci(ck) + " (tol 1e-7), OU mass " + sci(mass_err) +
                    " (tol 1e-8)"};
}

// 4. Bridge between two copies of the ground-state density.
Outcome bridge_recovery() {
    const UniformGrid grid(-8.0, 8.0, 801);
    const GridField rho0 = gaussian_density(grid, 0.0, 0.5);
    const KernelOracle k = mehler_kernel();
    const BridgeSolution sol = solve_bridge({rho0, rho0, 1.0, k, k.D()}, 1e-12, 10000);
    const GridField mid = interpolate_density(sol, 0.5);
    double rho_err = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) rho_err = std::max(rho_err, std::abs(mid[i] - rho0[i]));
    const GridField drift = bridge_drift(sol, 0.5);
    double drift_err = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (std::abs(grid[i]) <= 4.0) drift_err = std::max(drift_err, std::abs(drift[i] + grid[i]));
    }
    const bool ok = sol.converged && sol.marginal_residual < 1e-10 && rho_err <= 1e-6 && drift_err <= 2e-3;
    return {ok, "residual " + sci(sol.marginal_residual) + " (tol 1e-10), |rho(T/2) - rho0| " + sci(rho_err) +
                    " (tol 1e-6), |b + xi| on |xi|<=4 " + sci(drift_err) + " (tol 2e-3)"};
}

ScalarFn harmonic_omega() {
    return [](double x) { return 0.5 * x * x - 0.5; };
}

// 5. Feynman-Kac estimate of the Mehler kernel on the line.
Outcome path_integral_accuracy() {
    const auto t0 = std::chrono::steady_clock::now();
    const McEstimate e =
        fk_kernel_mc(harmonic_omega(), Interval::real_line(), 0.5, 0.0, 0.0, 0.0, 1.0, 1000000, 200, 20240501);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const double target = 0.606737;
    const double z = std::abs(e.value - target) / e.std_error;
    const double rel_se = e.std_error / e.value;
    const bool ok = z <= 3.0 && rel_se < 0.01 && e.reliable;
    return {ok, "k = " + fmt("%.6f", e.value) + " +- " + sci(e.std_error) + " vs 0.606737: " + fmt("%.2f", z) +
                    " SE (tol 3), SE/value " + sci(rel_se) + " (tol 1e-2), " + fmt("%.1f", secs) + " s"};
}

// 6. Dirichlet kernel on the half-line against the image construction.
Outcome dirichlet_half_line() {
    const Interval half(0.0, ExtendedReal::pos_inf());
    const McEstimate e = fk_kernel_mc(harmonic_omega(), half, 0.5, 0.8, 0.0, 1.2, 0.5, 400000, 200, 77);
    const double oracle = oracles::kHalfLineImageKernel;
    const double z = std::abs(e.value - oracle) / e.std_error;
    return {z <= 3.0 && e.reliable, "k = " + fmt("%.6f", e.value) + " +- " + sci(e.std_error) + " vs image " +
                                        fmt("%.6f", oracle) + ": " + fmt("%.2f", z) + " SE (tol 3)"};
}

// 7. Killed kernels on (-R, R) approach the full-line kernel from below.
Outcome absorbing_convergence() {
    const std::vector<double> cutoffs{1.0, 2.0, 3.0, 5.0};
    const auto seq = absorbing_limit_study(harmonic_omega(), 0.5, 0.0, 0.0, 1.0, cutoffs, 200000, 200, 99);
    bool monotone = true;
    std::string vals;
    for (std::size_t i = 0; i < seq.size(); ++i) {
        vals += fmt("%.5f ", seq[i].value);
        if (i == 0) continue;
        const double sigma = std::hypot(seq[i].std_error, seq[i - 1].std_error);
        if (seq[i].value < seq[i - 1].value - 3.0 * sigma) monotone = false;
    }
    const double rel = std::abs(seq.back().value - oracles::kMehler001) / oracles::kMehler001;
    return {monotone && rel <= 0.02, "R=1,2,3,5: " + vals + (monotone ? "non-decreasing" : "NOT non-decreasing") +
                                         " within 3 sigma, |k_5 - k| / k = " + sci(rel) + " (tol 2e-2)"};
}

// 8. Boundary classes.
Outcome boundary_classification() {
    std::vector<std::string> bad;
    auto expect = [&](const DiffusionSpec& s, ExtendedReal e, double x0, BoundaryKind want, const std::string& what) {
        const BoundaryClass bc = classify_boundary(s, e, x0);
        if (bc.kind != want) bad.push_back(what + " -> " + to_string(bc.kind));
    };
    const DiffusionSpec ou = ou_spec(1.0);
    expect(ou, ExtendedReal::neg_inf(), 0.0, BoundaryKind::NaturalRepulsive, "OU at -inf");
    expect(ou, ExtendedReal::pos_inf(), 0.0, BoundaryKind::NaturalRepulsive, "OU at +inf");
    const DiffusionSpec bes = bessel_spec(0.5);
    expect(bes, 0.0, 1.0, BoundaryKind::NaturalRepulsive, "Bessel at 0");
    expect(bes, ExtendedReal::pos_inf(), 1.0, BoundaryKind::NaturalAttractive, "Bessel at +inf");
    std::size_t endpoints = 0;
    for (int n = 1; n <= 3; ++n) {
        for (const auto& m : nodal_decomposition(hermite_state(n))) {
            for (const auto& bc : m.boundaries) {
                ++endpoints;
                if (bc.kind == BoundaryKind::NotNatural) {
                    bad.push_back("n=" + std::to_string(n) + " component " + std::to_string(m.component) + " at " +
                                  bc.endpoint.to_string());
                }
            }
        }
    }
    std::string d = "OU +-inf, Bessel 0/+inf and " + std::to_string(endpoints) + " nodal endpoints (n=1..3)";
    for (const auto& b : bad) d += "; wrong: " + b;
    return {bad.empty() && endpoints == 18, d};
}

// 9. Paths of b = 1/xi - xi never reach the node; terminal law matches.
Outcome inaccessibility() {
    const DiffusionSpec spec = hermite_spec(1);
    SimConfig cfg;
    cfg.dt = 1e-4;
    cfg.T = 5.0;
    cfg.n_paths = 10000;
    cfg.seed = 31337;
    const SimResult sim = simulate(spec, 1.0, cfg);
    const PassageReport pass = first_passage_fraction(spec, 1.0, 0.0, cfg);
    std::size_t wrong_side = 0;
    for (double x : sim.terminals) wrong_side += x <= 0.0 ? 1 : 0;
    const auto cdf = [](double x) {
        return x <= 0.0 ? 0.0 : std::erf(x) - oracles::kTwoOverSqrtPi * x * std::exp(-x * x);
    };
    const ChiSquareResult chi = chi_square_test(sim.terminals, cdf, 0.0, 8.0, 30);
    const bool ok = pass.hits == 0 && wrong_side == 0 && sim.flagged == 0 && chi.p_value > 0.01;
    return {ok, "crossings " + std::to_string(pass.hits) + ", terminals <= 0: " + std::to_string(wrong_side) +
                    ", flagged " + std::to_string(sim.flagged) + ", rejected proposals " +
                    std::to_string(sim.rejections) + ", chi2 " + fmt("%.2f", chi.statistic) + " on " +
                    std::to_string(chi.dof) + " dof, p = " + fmt("%.4f", chi.p_value) + " (tol > 0.01)"};
}

// 10. Hydrodynamic identities.
Outcome hydrodynamic_identities() {
    const UniformGrid grid(-8.0, 8.0, 3201);
    // Ground state.
    const DiffusionSpec s0 = hermite_spec(0);
    const GridField rho0 = GridField::sample(grid, [](double x) { return std::exp(-x * x) / oracles::kSqrtPi; });
    const HydroFields h0 = build_hydro(s0, rho0);
    double lo = 1e300, hi = -1e300;
    double identity = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!h0.mask[i]) continue;
        const double d = (*h0.Omega)[i] - h0.Q[i];
        lo = std::min(lo, d);
        hi = std::max(hi, d);
        if (rho0[i] > 1e-8) identity = std::max(identity, std::abs(h0.grad_Q[i] - h0.grad_P[i] / rho0[i]));
    }
    const double spread = hi - lo;

    // First excited state: identities per nodal component.
    const DiffusionSpec s1 = hermite_spec(1);
    const EigenState st1 = hermite_state(1);
    const GridField rho1 = GridField::sample(grid, [&](double x) {
        const double p = st1.psi(x);
        return p * p;
    });
    const HydroFields h1 = build_hydro(s1, rho1);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (h1.mask[i] && rho1[i] > 1e-8) {
            identity = std::max(identity, std::abs(h1.grad_Q[i] - h1.grad_P[i] / rho1[i]));
        }
    }
    // E[grad Q] over each component, density renormalised on the component.
    const auto w = quadrature_weights(grid);
    double worst_mean = std::abs(ehrenfest_check(h0).lhs);
    std::string means = "ground " + sci(worst_mean);
    for (int side = 0; side < 2; ++side) {
        double num = 0.0, mass = 0.0;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const bool in = side == 0 ? grid[i] < 0.0 : grid[i] > 0.0;
            if (!in) continue;
            mass += w[i] * rho1[i];
            if (h1.mask[i]) num += w[i] * rho1[i] * h1.grad_Q[i];
        }
        const double m = num / mass;
        worst_mean = std::max(worst_mean, std::abs(m));
        means += std::string(side == 0 ? ", n=1 (-inf,0) " : ", n=1 (0,inf) ") + fmt("%.6f", m);
    }
    const MomentumBalance mb = momentum_balance(h1, 0.5, 2.0);
    const bool ok = spread <= 1e-6 && identity <= 1e-5 && worst_mean <= 1e-6 && std::abs(mb.residual) <= 1e-5;
    return {ok, "Omega-Q spread " + sci(spread) + " (tol 1e-6); |grad Q - grad P/rho| " + sci(identity) +
                    " (tol 1e-5); E[grad Q] per component: " + means + " (tol 1e-6); momentum balance on [0.5,2] " +
                    sci(std::abs(mb.residual)) + " (tol 1e-5)"};
}

// 11. Exponent fits at density nodes.
Outcome transmission_criterion() {
    const UniformGrid grid(-1.0, 1.0, 2001);
    struct Case {
        const char* label;
        double power;
        TransmissionKind want;
    };
    const Case cases[] = {{"xi^2", 2.0, TransmissionKind::Blocked},
                          {"|xi|^(1/2)", 0.5, TransmissionKind::Transmitting},
                          {"|xi|", 1.0, TransmissionKind::Blocked}};
    bool ok = true;
    std::string d;
    for (const auto& c : cases) {
        const GridField rho = GridField::sample(grid, [&](double x) { return std::pow(std::abs(x), c.power); });
        const Transmission t = transmission_at_node(rho, 0.0);
        ok = ok && t.kind == c.want;
        d += std::string(c.label) + " -> " + to_string(t.kind) + " (alpha " + fmt("%.4f", t.left.alpha) + "/" +
             fmt("%.4f", t.right.alpha) + "); ";
    }
    return {ok, d};
}

std::string run_cli(const std::vector<std::string>& args, int& code) {
    std::ostringstream out, err;
    code = cli::run(args, out, err);
    return out.str();
}

// 12. Stochastic subcommands are bitwise reproducible.
Outcome reproducibility() {
    const auto dir = std::filesystem::temp_directory_path() / "natbound_acceptance_c12";
    std::filesystem::create_directories(dir);
    const auto problem = dir / "problem.json";
    std::ofstream(problem) << R"J({
  "diffusion": {"D": 0.5, "drift": "hermite(1)"},
  "grid": {"lo": -3, "hi": 3, "n": 61},
  "kernel": {"kind": "mc", "omega": "x^2/2 - 0.5", "y": 0, "times": [1]},
  "pathint": {"omega": "x^2/2 - 0.5", "domain": [0, "+inf"], "y": 0.8, "x": 1.2, "t": 0.5},
  "simulate": {"x0": 1, "T": 0.5, "dt": 0.001, "target": 2}
})J";
    bool ok = true;
    std::string d;
    const std::vector<std::vector<std::string>> commands = {
        {"pathint", "--problem", problem.string(), "--seed", "2024", "--paths", "50000", "--chunk-size", "4096",
         "--threads", "2"},
        {"simulate", "--problem", problem.string(), "--seed", "2024", "--paths", "2000", "--chunk-size", "256"},
        {"kernel", "--problem", problem.string(), "--seed", "5", "--paths", "2000", "--steps", "50"},
    };
    for (const auto& cmd : commands) {
        int c1 = 0, c2 = 0;
        const std::string a = run_cli(cmd, c1);
        const std::string b = run_cli(cmd, c2);
        const bool same = c1 == 0 && c2 == 0 && a == b;
        ok = ok && same;
        d += cmd[0] + (same ? " identical (" + std::to_string(a.size()) + " bytes); " : " DIFFERS; ");
    }
    // Thread count is a scheduling detail: results must not depend on it.
    int c1 = 0, c2 = 0;
    auto cmd = commands[0];
    const std::string a = run_cli(cmd, c1);
    cmd.back() = "1";
    std::string b = run_cli(cmd, c2);
    const auto strip_threads = [](std::string s) {
        const auto p = s.find("\"threads\"");
        if (p != std::string::npos) s.erase(p, s.find('\n', p) - p);
        return s;
    };
    const bool same = c1 == 0 && c2 == 0 && strip_threads(a) == strip_threads(b);
    ok = ok && same;
    d += same ? "pathint threads 1 vs 2 identical" : "pathint threads 1 vs 2 DIFFER";
    std::filesystem::remove_all(dir);
    return {ok, d};
}

struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> all = {
        {1, "spectral fidelity", spectral_fidelity},
        {2, "dynamical equivalence", dynamical_equivalence},
        {3, "Mehler oracle chain", mehler_chain},
        {4, "bridge recovery", bridge_recovery},
        {5, "path-integral accuracy", path_integral_accuracy},
        {6, "Dirichlet half-line kernel", dirichlet_half_line},
        {7, "absorbing-barrier convergence", absorbing_convergence},
        {8, "boundary classification", boundary_classification},
        {9, "inaccessibility", inaccessibility},
        {10, "hydrodynamic identities", hydrodynamic_identities},
        {11, "transmission criterion", transmission_criterion},
        {12, "reproducibility", reproducibility},
    };
    int only = 0;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--criterion" && i + 1 < argc) {
            only = std::stoi(argv[++i]);
        } else {
            std::cerr << "usage: acceptance [--criterion N]\n";
            return 2;
        }
    }
    int failures = 0;
    for (const auto& c : all) {
        if (only != 0 && c.id != only) continue;
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        std::printf("C%02d %s  %s: %s\n", c.id, o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str());
        std::fflush(stdout);
        failures += o.pass ? 0 : 1;
    }
    return failures == 0 ? 0 : 1;
}
