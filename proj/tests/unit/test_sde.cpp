#include <cmath>

#include "doctest.h"

#include "natbound/problem.hpp"
#include "natbound/sde.hpp"

#include "../oracles/oracles.hpp"

using namespace natbound;

namespace {

DiffusionSpec brownian() {
    DiffusionSpec s;
    s.drift = Drift::zero();
    return s;
}

}  // namespace

TEST_CASE("Ornstein-Uhlenbeck terminal moments") {
    SimConfig cfg;
    cfg.dt = 1e-2;
    cfg.T = 2.0;
    cfg.n_paths = 20000;
    cfg.seed = 4;
    const SimResult r = simulate(ou_spec(1.0), 1.0, cfg);
    double m = 0.0, m2 = 0.0;
    for (double x : r.terminals) {
        m += x;
        m2 += x * x;
    }
    m /= r.terminals.size();
    const double var = m2 / r.terminals.size() - m * m;
    CHECK(std::abs(m - std::exp(-2.0)) < 4.0 * std::sqrt(0.5 / 20000.0) + 2e-3);
    CHECK(var == doctest::Approx(0.5 * (1.0 - std::exp(-4.0))).epsilon(0.04));
    CHECK(r.reliable);
}

TEST_CASE("Brownian first passage obeys the reflection principle") {
    SimConfig cfg;
    cfg.dt = 1e-2;
    cfg.T = 1.0;
    cfg.n_paths = 20000;
    cfg.seed = 21;
    const PassageReport rep = first_passage_fraction(brownian(), 0.0, 1.0, cfg);
    const double p = oracles::kReflection;
    const double sigma = std::sqrt(p * (1.0 - p) / cfg.n_paths);
    CHECK(std::abs(rep.fraction_hit - p) < 4.0 * sigma);
    CHECK_FALSE(rep.level_is_wall);
    REQUIRE(rep.mean_hit_time.has_value());
    CHECK(*rep.mean_hit_time < 1.0);
}

TEST_CASE("singular drift keeps paths on their side of the node") {
    SimConfig cfg;
    cfg.dt = 1e-3;
    cfg.T = 2.0;
    cfg.n_paths = 2000;
    cfg.seed = 8;
    cfg.keep_paths = true;
    const DiffusionSpec s = hermite_spec(1);
    const SimResult r = simulate(s, 0.3, cfg);
    REQUIRE(r.paths.size() == r.n_slices * cfg.n_paths);
    for (double x : r.paths) CHECK(x > 0.0);
    const PassageReport rep = first_passage_fraction(s, 0.3, 0.0, cfg);
    CHECK(rep.level_is_wall);
    CHECK(rep.hits == 0);
}

TEST_CASE("simulation is reproducible and thread-count independent") {
    SimConfig cfg;
    cfg.dt = 1e-2;
    cfg.T = 0.5;
    cfg.n_paths = 3000;
    cfg.seed = 99;
    cfg.chunk_size = 256;
    const SimResult a = simulate(ou_spec(1.0), 0.0, cfg);
    cfg.threads = 3;
    const SimResult b = simulate(ou_spec(1.0), 0.0, cfg);
    CHECK(a.terminals == b.terminals);
    cfg.seed = 100;
    const SimResult c = simulate(ou_spec(1.0), 0.0, cfg);
    CHECK(a.terminals != c.terminals);
}

TEST_CASE("empirical density: bins centred on grid points") {
    const UniformGrid g(0.0, 1.0, 11);
    const EmpiricalDensity e = empirical_density({0.0, 0.04, 0.06, 0.5, 2.0}, g);
    CHECK(e.density[0] == doctest::Approx(2.0 / 5.0 / 0.1));
    CHECK(e.density[1] == doctest::Approx(1.0 / 5.0 / 0.1));
    CHECK(e.density[5] == doctest::Approx(1.0 / 5.0 / 0.1));
    CHECK(e.mass_outside == doctest::Approx(0.2));
}

TEST_CASE("chi-square test accepts the right law and rejects a wrong one") {
    SimConfig cfg;
    cfg.dt = 1e-2;
    cfg.T = 8.0;
    cfg.n_paths = 5000;
    cfg.seed = 12;
    const SimResult r = simulate(ou_spec(1.0), 0.0, cfg);
    const auto normal_cdf = [](double sd) {
        return [sd](double x) { return 0.5 * std::erfc(-x / (sd * std::sqrt(2.0))); };
    };
    const double sd = std::sqrt(0.5 / (1.0 - 0.005));  // Euler stationary variance for dt = 0.01
    CHECK(chi_square_test(r.terminals, normal_cdf(sd), -6.0, 6.0, 30).p_value > 1e-3);
    CHECK(chi_square_test(r.terminals, normal_cdf(1.0), -6.0, 6.0, 30).p_value < 1e-6);
}

TEST_CASE("configuration checks") {
    SimConfig cfg;
    cfg.dt = 0.0;
    CHECK_THROWS(simulate(ou_spec(1.0), 0.0, cfg));
    cfg.dt = 1e-2;
    CHECK_THROWS_AS(simulate(bessel_spec(0.5), -1.0, cfg), DomainError);
    CHECK_THROWS_AS(simulate(hermite_spec(1), 0.0, cfg), DomainError);
}
