#include <cmath>

#include "doctest.h"

#include "natbound/problem.hpp"
#include "natbound/spectral.hpp"

using namespace natbound;

TEST_CASE("Hermite functions are orthonormal with n nodes") {
    const UniformGrid g(-12.0, 12.0, 4801);
    for (int n = 0; n <= 6; ++n) {
        const EigenState a = hermite_state(n);
        CHECK(a.epsilon == doctest::Approx(n + 0.5));
        CHECK(a.nodes.size() == static_cast<std::size_t>(n));
        for (double z : a.nodes) CHECK(std::abs(a.psi(z)) < 1e-12);
        for (int m = 0; m <= n; ++m) {
            const EigenState b = hermite_state(m);
            const double ip = integrate(GridField::sample(g, [&](double x) { return a.psi(x) * b.psi(x); }));
            CHECK(ip == doctest::Approx(m == n ? 1.0 : 0.0).epsilon(1e-10));
        }
    }
    CHECK(hermite_state(2).nodes[1] == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
    CHECK_THROWS(hermite_state(-1));
}

TEST_CASE("state drifts match the closed forms") {
    const Drift b1 = drift_from_state(hermite_state(1));
    CHECK(b1(2.0) == doctest::Approx(0.5 - 2.0));
    const Drift b2 = drift_from_state(hermite_state(2));
    CHECK(b2(1.0) == doctest::Approx(3.0));
    CHECK_THROWS_AS(b1(0.0), DomainError);
}

TEST_CASE("Omega_n differs from xi^2/2 by -(n + 1/2)") {
    for (int n = 0; n <= 4; ++n) {
        const ScalarFn om = omega_from_drift(drift_from_state(hermite_state(n)), 0.5);
        for (double x : {-2.3, 0.17, 1.9}) {
            if (n > 0 && std::abs(hermite_poly(n, x)) < 1e-3) continue;
            CHECK(om(x) == doctest::Approx(0.5 * x * x - (n + 0.5)).epsilon(1e-10));
        }
    }
}

TEST_CASE("finite-difference spectrum of the harmonic potential") {
    const UniformGrid g(-8.0, 8.0, 1601);
    const auto states = sturm_liouville_solve(GridField::sample(g, [](double x) { return 0.5 * x * x; }), 0.5, 4);
    REQUIRE(states.size() == 5);
    for (int n = 0; n <= 4; ++n) {
        CHECK(std::abs(states[n].epsilon - (n + 0.5)) < 1e-3);
        CHECK(states[n].nodes.size() == static_cast<std::size_t>(n));
        const auto& s = *states[n].samples;
        const double nrm = integrate(GridField::sample(g, [&](double x) { return s.interpolate(x) * s.interpolate(x); }));
        CHECK(nrm == doctest::Approx(1.0).epsilon(1e-3));
    }
}

TEST_CASE("coarse grids are refused") {
    const UniformGrid g(-8.0, 8.0, 41);
    CHECK_THROWS_AS(sturm_liouville_solve(GridField::sample(g, [](double x) { return 0.5 * x * x; }), 0.5, 3),
                    NumericalError);
}

TEST_CASE("nodal decomposition of the second excited state") {
    const auto members = nodal_decomposition(hermite_state(2));
    REQUIRE(members.size() == 3);
    double mass = 0.0;
    for (const auto& m : members) {
        mass += m.component_mass;
        const DiffusionSpec s = m.spec();
        const Jet j = s.drift.jet(m.anchor);
        CHECK(j.v * j.d1 + 0.5 * j.d2 == doctest::Approx(m.anchor).epsilon(1e-9));
    }
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(members[1].interval.r1().value() == doctest::Approx(-std::sqrt(0.5)));
    CHECK(members[1].interval.r2().value() == doctest::Approx(std::sqrt(0.5)));
}

TEST_CASE("equivalence class of the Ornstein-Uhlenbeck process") {
    const auto members = equivalence_class(ou_spec(1.0), 2);
    // 1 + 2 + 3 components.
    REQUIRE(members.size() == 6);
    for (const auto& m : members) {
        CHECK(m.epsilon == doctest::Approx(m.n).epsilon(1e-3));
        const double x = m.anchor;
        const Jet j = m.drift.jet(x);
        CHECK(j.v * j.d1 + 0.5 * j.d2 == doctest::Approx(x).epsilon(1e-5));
        for (const auto& bc : m.boundaries) CHECK(bc.kind != BoundaryKind::NotNatural);
    }
}

TEST_CASE("equivalence classes need a drift potential") {
    DiffusionSpec s = ou_spec(1.0);
    s.drift_potential.reset();
    CHECK_THROWS(equivalence_class(s, 1));
}
