#include <cmath>

#include "doctest.h"

#include "natbound/kernels.hpp"

#include "../oracles/oracles.hpp"

using namespace natbound;

TEST_CASE("heat and Mehler kernels match reference values") {
    const KernelOracle heat = heat_kernel(0.5);
    CHECK(heat(0.0, 0.0, 1.0, 1.0) == doctest::Approx(oracles::kHeatHalf011).epsilon(1e-14));
    CHECK(heat(0.0, 0.0, 0.0, 1.0) == doctest::Approx(oracles::kHeatHalf001).epsilon(1e-14));
    const KernelOracle m = mehler_kernel();
    CHECK(m(0.0, 0.0, 0.0, 1.0) == doctest::Approx(oracles::kMehler001).epsilon(1e-14));
    CHECK(m(0.0, 0.0, 1.0, 1.0) == doctest::Approx(oracles::kMehler011).epsilon(1e-14));
    CHECK(m(0.0, 2.0, 1.0, 3.0) == doctest::Approx(oracles::kMehler011).epsilon(1e-14));
    CHECK(std::exp(m.log(0.3, 0.0, -0.4, 0.7)) == doctest::Approx(m(0.3, 0.0, -0.4, 0.7)).epsilon(1e-13));
}

TEST_CASE("kernels reject non-increasing times") {
    CHECK_THROWS_AS(mehler_kernel()(0.0, 1.0, 0.0, 1.0), DomainError);
    CHECK_THROWS_AS(heat_kernel(0.5)(0.0, 1.0, 0.0, 0.5), DomainError);
}

TEST_CASE("Mehler kernel is symmetric and satisfies Chapman-Kolmogorov") {
    const KernelOracle m = mehler_kernel();
    for (double y : {-1.5, 0.0, 0.9}) {
        for (double x : {-0.3, 2.0}) {
            CHECK(m(y, 0.0, x, 0.8) == doctest::Approx(m(x, 0.0, y, 0.8)).epsilon(1e-13));
            CHECK(check_semigroup(m, 0.0, 0.5, 1.0, y, x) < 1e-7);
        }
    }
    CHECK(check_semigroup(heat_kernel(0.5), 0.0, 0.3, 1.0, 0.2, -0.6) < 1e-7);
}

TEST_CASE("Ornstein-Uhlenbeck density: reference value, unit mass, mean reversion") {
    CHECK(ou_transition_density(0.5, 0.2, 1.0) == doctest::Approx(oracles::kOu05_02_1).epsilon(1e-13));
    const UniformGrid g(-12.0, 12.0, 4801);
    for (double t : {0.05, 1.0, 6.0}) {
        const GridField p = GridField::sample(g, [t](double x) { return ou_transition_density(1.5, x, t); });
        CHECK(std::abs(integrate(p) - 1.0) < 1e-9);
        const GridField xp = GridField::sample(g, [t](double x) { return x * ou_transition_density(1.5, x, t); });
        CHECK(integrate(xp) == doctest::Approx(1.5 * std::exp(-t)).epsilon(1e-8));
    }
}

TEST_CASE("Ornstein-Uhlenbeck density is the ground-state transform of Mehler") {
    const KernelOracle m = mehler_kernel();
    const auto theta = [](double x, double) { return std::exp(-x * x / 2.0); };
    const TransitionDensity p = make_transition_density(m, theta);
    for (double x : {-1.0, 0.2, 1.7}) {
        CHECK(p(0.5, 0.0, x, 1.0) == doctest::Approx(ou_transition_density(0.5, x, 1.0)).epsilon(1e-12));
    }
}

TEST_CASE("modified Bessel functions") {
    CHECK(bessel_i(0.5, 1.0) == doctest::Approx(oracles::kBesselI_05_1).epsilon(1e-13));
    CHECK(bessel_i(0.0, 2.5) == doctest::Approx(oracles::kBesselI_0_25).epsilon(1e-13));
    CHECK(bessel_i(1.3, 40.0) == doctest::Approx(oracles::kBesselI_13_40).epsilon(1e-12));
    CHECK(bessel_i_scaled(1.3, 40.0) == doctest::Approx(oracles::kBesselI_13_40 * std::exp(-40.0)).epsilon(1e-12));
    CHECK(std::isfinite(bessel_i_scaled(2.0, 5000.0)));
}

TEST_CASE("Bessel density: closed form for a = 1/2 and unit mass") {
    const BesselDensity p(0.5);
    CHECK(p(1.0, 1.0, 1.0) == doctest::Approx(oracles::kBesselHalf111).epsilon(1e-10));
    for (double a : {0.0, 0.5, 1.7}) {
        const BesselDensity q(a);
        const UniformGrid g(1e-9, 20.0, 8001);
        const GridField f = GridField::sample(g, [&](double x) { return q(0.7, 1.3, x); });
        CHECK(std::abs(integrate(f) - 1.0) < 1e-7);
    }
    CHECK_THROWS_AS(p(1.0, 0.0, 1.0), DomainError);
    CHECK_THROWS_AS(p(0.0, 1.0, 1.0), DomainError);
}

TEST_CASE("backward density reverses a stationary flow") {
    const TransitionDensity p(
        [](double y, double s, double x, double t) { return ou_transition_density(y, x, t - s); },
        Interval::real_line());
    const auto rho = [](double x, double) { return std::exp(-x * x) / std::sqrt(M_PI); };
    const TransitionDensity back = backward_density(p, rho);
    // Stationary OU is reversible.
    CHECK(back(0.4, 0.0, -0.9, 1.0) == doctest::Approx(p(-0.9, 0.0, 0.4, 1.0)).epsilon(1e-12));
}
