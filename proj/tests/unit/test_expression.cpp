#include <cmath>
#include <random>

#include "doctest.h"

#include "natbound/expression.hpp"

using namespace natbound;

TEST_CASE("expression examples") {
    CHECK(parse_drift_expression("1/x - x")(2.0) == doctest::Approx(-1.5));
    CHECK(parse_drift_expression("4*x/(2*x^2-1) - x")(1.0) == doctest::Approx(3.0));
    CHECK(parse_drift_expression("exp(-x^2/2)")(0.0) == 1.0);
    CHECK(parse_drift_expression("ln(exp(2.5))")(0.0) == doctest::Approx(2.5));
    CHECK(parse_drift_expression("1.5e-3 * x")(2.0) == doctest::Approx(3e-3));
}

TEST_CASE("precedence holds on random triples") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    const auto sum_prod = parse_drift_expression("x + 2*x*x");
    const auto neg_pow = parse_drift_expression("-x^2");
    const auto right_assoc = parse_drift_expression("2^x^2");
    for (int i = 0; i < 200; ++i) {
        const double a = u(rng), b = u(rng), c = u(rng);
        const std::string text = std::to_string(a) + "+" + std::to_string(b) + "*" + std::to_string(c);
        const double expected = std::stod(std::to_string(a)) + std::stod(std::to_string(b)) * std::stod(std::to_string(c));
        CHECK(parse_drift_expression(text)(0.0) == doctest::Approx(expected).epsilon(1e-12));
        CHECK(sum_prod(a) == doctest::Approx(a + 2 * a * a).epsilon(1e-12));
        CHECK(neg_pow(a) == doctest::Approx(-(a * a)).epsilon(1e-12));
        CHECK(right_assoc(b) == doctest::Approx(std::pow(2.0, b * b)).epsilon(1e-12));
    }
}

TEST_CASE("syntax errors carry the byte position") {
    try {
        parse_drift_expression("1 + * x");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.position() == 4);
    }
    CHECK_THROWS_AS(parse_drift_expression(""), ParseError);
    CHECK_THROWS_AS(parse_drift_expression("y + 1"), ParseError);
    CHECK_THROWS_AS(parse_drift_expression("(x + 1"), ParseError);
    CHECK_THROWS_AS(parse_drift_expression("sin(x)"), ParseError);
}

TEST_CASE("evaluation errors name the offending point") {
    const auto f = parse_drift_expression("1/x");
    CHECK_THROWS_WITH_AS(f(0.0), doctest::Contains("x=0"), DomainError);
    CHECK_THROWS_AS(parse_drift_expression("ln(x)")(-1.0), DomainError);
    CHECK_THROWS_AS(parse_drift_expression("x^0.5")(-1.0), DomainError);
    CHECK(parse_drift_expression("x^3")(-2.0) == doctest::Approx(-8.0));
}

TEST_CASE("parsed drifts differentiate exactly") {
    const Drift b = parse_drift("1/x - x");
    const Jet j = b.jet(0.5);
    CHECK(j.v == doctest::Approx(1.5));
    CHECK(j.d1 == doctest::Approx(-5.0));
    CHECK(j.d2 == doctest::Approx(16.0));
    const Jet e = parse_drift("exp(-x^2)").jet(1.0);
    CHECK(e.d1 == doctest::Approx(-2.0 * std::exp(-1.0)));
    CHECK(e.d2 == doctest::Approx(2.0 * std::exp(-1.0)));
}
