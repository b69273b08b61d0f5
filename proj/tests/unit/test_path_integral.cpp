#include <cmath>

#include "doctest.h"

#include "natbound/kernels.hpp"
#include "natbound/path_integral.hpp"
#include "natbound/problem.hpp"

#include "../oracles/oracles.hpp"

using namespace natbound;

namespace {

ScalarFn harmonic() {
    return [](double x) { return 0.5 * x * x - 0.5; };
}

bool within(const McEstimate& e, double target, double sigmas) {
    return std::abs(e.value - target) <= sigmas * e.std_error;
}

}  // namespace

TEST_CASE("bridges are pinned and have Brownian-bridge moments") {
    const PathBundle b = sample_brownian_bridges(0.5, -1.0, 0.0, 2.0, 0.5, 20000, 20, 3);
    REQUIRE(b.times.size() == 21);
    double m = 0.0, m2 = 0.0;
    for (std::size_t p = 0; p < b.n_paths; ++p) {
        CHECK(b.at(p, 0) == 0.5);
        CHECK(b.at(p, 20) == -1.0);
        const double x = b.at(p, 10);
        m += x;
        m2 += x * x;
    }
    m /= b.n_paths;
    const double var = m2 / b.n_paths - m * m;
    // Midpoint: mean (y + x)/2, variance 2D * (t/2)(t/2)/t = 0.5.
    CHECK(m == doctest::Approx(-0.25).epsilon(0.02));
    CHECK(var == doctest::Approx(0.5).epsilon(0.03));
}

TEST_CASE("killing marks paths dead from the first exit onward") {
    PathBundle b = sample_brownian_bridges(0.5, 0.5, 0.0, 1.0, 0.5, 2000, 50, 8);
    apply_killing(b, Interval(0.0, ExtendedReal::pos_inf()));
    std::size_t dead = 0;
    for (std::size_t p = 0; p < b.n_paths; ++p) {
        bool seen_dead = false;
        for (std::size_t k = 0; k <= b.n_steps; ++k) {
            if (!b.alive_at(p, k)) seen_dead = true;
            if (seen_dead) CHECK_FALSE(b.alive_at(p, k));
            if (b.at(p, k) <= 0.0) CHECK_FALSE(b.alive_at(p, k));
        }
        dead += b.survived(p) ? 0 : 1;
    }
    CHECK(dead > 0);
}

TEST_CASE("free Feynman-Kac kernel is the heat kernel exactly") {
    const McEstimate e = fk_kernel_mc([](double) { return 0.0; }, Interval::real_line(), 0.5, 0.0, 0.0, 1.0, 1.0,
                                      1000, 10, 1);
    CHECK(e.value == doctest::Approx(oracles::kHeatHalf011).epsilon(1e-14));
    CHECK(e.std_error == 0.0);
}

TEST_CASE("harmonic kernel within a few standard errors") {
    const McEstimate e = fk_kernel_mc(harmonic(), Interval::real_line(), 0.5, 0.0, 0.0, 1.0, 1.0, 100000, 100, 17);
    CHECK(within(e, oracles::kMehler011, 4.0));
    CHECK(e.reliable);
    CHECK(e.n_effective == 100000);
}

TEST_CASE("half-line kernel matches the image construction") {
    const McEstimate e =
        fk_kernel_mc(harmonic(), Interval(0.0, ExtendedReal::pos_inf()), 0.5, 0.8, 0.0, 1.2, 0.5, 100000, 100, 5);
    CHECK(within(e, oracles::kHalfLineImageKernel, 4.0));
    const KernelOracle heat = heat_kernel(0.5);
    const McEstimate f = fk_kernel_mc([](double) { return 0.0; }, Interval(0.0, ExtendedReal::pos_inf()), 0.5, 0.8,
                                      0.0, 1.2, 0.5, 100000, 50, 6);
    CHECK(within(f, heat(0.8, 0.0, 1.2, 0.5) - heat(-0.8, 0.0, 1.2, 0.5), 4.0));
}

TEST_CASE("the crossing correction removes the discrete-monitoring bias") {
    McOptions raw;
    raw.crossing_correction = false;
    const Interval half(0.0, ExtendedReal::pos_inf());
    const KernelOracle heat = heat_kernel(0.5);
    const double oracle = heat(0.3, 0.0, 0.3, 1.0) - heat(-0.3, 0.0, 0.3, 1.0);
    const auto zero = [](double) { return 0.0; };
    const McEstimate biased = fk_kernel_mc(zero, half, 0.5, 0.3, 0.0, 0.3, 1.0, 50000, 10, 2, raw);
    const McEstimate fixed = fk_kernel_mc(zero, half, 0.5, 0.3, 0.0, 0.3, 1.0, 50000, 10, 2);
    CHECK(biased.value - oracle > 5.0 * biased.std_error);
    CHECK(within(fixed, oracle, 4.0));
}

TEST_CASE("estimates are bitwise reproducible and independent of thread count") {
    McOptions one;
    one.chunk_size = 1000;
    McOptions many = one;
    many.threads = 3;
    const auto a = fk_kernel_mc(harmonic(), Interval::real_line(), 0.5, 0.1, 0.0, -0.2, 0.7, 9500, 40, 123, one);
    const auto b = fk_kernel_mc(harmonic(), Interval::real_line(), 0.5, 0.1, 0.0, -0.2, 0.7, 9500, 40, 123, one);
    const auto c = fk_kernel_mc(harmonic(), Interval::real_line(), 0.5, 0.1, 0.0, -0.2, 0.7, 9500, 40, 123, many);
    CHECK(a.value == b.value);
    CHECK(a.std_error == b.std_error);
    CHECK(a.value == c.value);
    CHECK(a.std_error == c.std_error);
    const auto d = fk_kernel_mc(harmonic(), Interval::real_line(), 0.5, 0.1, 0.0, -0.2, 0.7, 9500, 40, 124, one);
    CHECK(a.value != d.value);
}

TEST_CASE("absorbing limit is monotone in the cutoff") {
    const auto seq =
        absorbing_limit_study(harmonic(), 0.5, 0.0, 0.0, 1.0, {0.5, 1.0, 2.0, 4.0}, 40000, 100, 77);
    REQUIRE(seq.size() == 4);
    for (std::size_t i = 1; i < seq.size(); ++i) CHECK(seq[i].value >= seq[i - 1].value);
    CHECK(std::abs(seq.back().value - oracles::kMehler001) / oracles::kMehler001 < 0.02);
}

TEST_CASE("Girsanov weights recover the Ornstein-Uhlenbeck density") {
    const DiffusionSpec ou = ou_spec(1.0);
    const McEstimate e = girsanov_density_mc(ou, harmonic(), 0.5, 0.0, 0.2, 1.0, 100000, 100, 9);
    CHECK(within(e, oracles::kOu05_02_1, 4.0));
}

TEST_CASE("single-path Girsanov weight is positive and finite") {
    const DiffusionSpec ou = ou_spec(1.0);
    const PathBundle b = sample_brownian_bridges(0.0, 0.3, 0.0, 1.0, 0.5, 10, 20, 4);
    for (std::size_t p = 0; p < b.n_paths; ++p) {
        const double w = girsanov_weight(b, p, ou, harmonic());
        CHECK(std::isfinite(w));
        CHECK(w > 0.0);
    }
}

TEST_CASE("argument checks") {
    CHECK_THROWS_AS(fk_kernel_mc(harmonic(), Interval::real_line(), 0.5, 0.0, 1.0, 0.0, 1.0, 10, 10, 1),
                    DomainError);
    CHECK_THROWS(fk_kernel_mc(harmonic(), Interval::real_line(), 0.5, 0.0, 0.0, 0.0, 1.0, 0, 10, 1));
    CHECK_THROWS(fk_kernel_mc(harmonic(), Interval(0.0, 1.0), 0.5, 2.0, 0.0, 0.5, 1.0, 10, 10, 1));
}
