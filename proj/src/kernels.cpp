#include "natbound/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace natbound {

namespace {

constexpr double kMinTimeStep = 1e-12;

void require_time_step(double s, double t) {
    if (!(t - s >= kMinTimeStep)) {
        throw DomainError("kernel evaluated with t - s = " + std::to_string(t - s) +
                          " (must be at least 1e-12)");
    }
}

}  // namespace

KernelOracle::KernelOracle(Fn fn, Interval domain, bool homogeneous, double D, Fn log_fn)
    : fn_(std::move(fn)), log_fn_(std::move(log_fn)), domain_(std::move(domain)),
      homogeneous_(homogeneous), D_(D) {
    if (!(D > 0.0)) throw InvariantError("kernel diffusion coefficient must be positive");
}

double KernelOracle::operator()(double y, double s, double x, double t) const {
    require_time_step(s, t);
    return fn_(y, s, x, t);
}

double KernelOracle::log(double y, double s, double x, double t) const {
    require_time_step(s, t);
    if (log_fn_) return log_fn_(y, s, x, t);
    return std::log(fn_(y, s, x, t));
}

KernelOracle heat_kernel(double D) {
    if (!(D > 0.0)) throw InvariantError("heat kernel requires D > 0");
    auto log_k = [D](double y, double s, double x, double t) {
        const double tau = t - s;
        return -0.5 * std::log(4.0 * std::numbers::pi * D * tau) - (x - y) * (x - y) / (4.0 * D * tau);
    };
    auto k = [log_k](double y, double s, double x, double t) { return std::exp(log_k(y, s, x, t)); };
    return {k, Interval::real_line(), true, D, log_k};
}

namespace {

double mehler_log(double y, double x, double tau) {
    // e^{tau/2} (2 pi sinh tau)^{-1/2} = pi^{-1/2} (1 - e^{-2 tau})^{-1/2}
    const double pref = -0.5 * std::log(std::numbers::pi * -std::expm1(-2.0 * tau));
    return pref - (x * x + y * y) / (2.0 * std::tanh(tau)) + x * y / std::sinh(tau);
}

}  // namespace

KernelOracle mehler_kernel() {
    auto log_k = [](double y, double s, double x, double t) { return mehler_log(y, x, t - s); };
    auto k = [](double y, double s, double x, double t) { return std::exp(mehler_log(y, x, t - s)); };
    return {k, Interval::real_line(), true, 0.5, log_k};
}

double ou_transition_density(double y, double x, double t) {
    if (!(t > 0.0)) throw DomainError("OU density requires t > 0");
    const double var = -0.5 * std::expm1(-2.0 * t);
    const double m = std::exp(-t) * y;
    return std::exp(-(x - m) * (x - m) / (2.0 * var)) / std::sqrt(2.0 * std::numbers::pi * var);
}

double bessel_i_scaled(double a, double z) {
    if (a < 0.0) throw DomainError("bessel_i requires order a >= 0");
    if (z < 0.0) throw DomainError("bessel_i requires argument z >= 0");
    if (z == 0.0) return a == 0.0 ? 1.0 : 0.0;
    if (z <= 30.0) {
        // sum_j (z/2)^{2j+a} / (j! Gamma(j+a+1)), scaled by e^{-z}
        double term = std::exp(a * std::log(0.5 * z) - std::lgamma(a + 1.0) - z);
        double sum = term;
        const double q = 0.25 * z * z;
        for (int j = 0; j < 500; ++j) {
            term *= q / ((j + 1.0) * (j + 1.0 + a));
            sum += term;
            if (term < 1e-17 * sum) break;
        }
        return sum;
    }
    // Hankel asymptotic expansion.
    const double mu = 4.0 * a * a;
    double term = 1.0;
    double sum = 1.0;
    for (int k = 1; k < 200; ++k) {
        const double odd = 2.0 * k - 1.0;
        const double next = -term * (mu - odd * odd) / (k * 8.0 * z);
        if (std::abs(next) > std::abs(term)) break;
        term = next;
        sum += term;
        if (std::abs(term) < 1e-17 * std::abs(sum)) break;
    }
    return sum / std::sqrt(2.0 * std::numbers::pi * z);
}

double bessel_i(double a, double z) {
    const double s = bessel_i_scaled(a, z);
    return s * std::exp(z);
}

BesselDensity::BesselDensity(double a) : a_(a) {
    if (!(a >= 0.0)) throw DomainError("Bessel density requires a >= 0");
    // Normalise at a reference start point: int_0^inf p(1; 1, xi) dxi = 1.
    const UniformGrid g(0.0, 40.0, 40001);
    std::vector<double> v(g.size());
    for (std::size_t i = 1; i < g.size(); ++i) v[i] = unnormalized(1.0, 1.0, g[i]);
    const double mass = integrate(GridField(g, std::move(v)));
    if (!(mass > 0.0) || !std::isfinite(mass)) throw NumericalError("Bessel normalisation failed");
    c_ = 1.0 / mass;
}

double BesselDensity::unnormalized(double t, double xi0, double xi) const {
    // (xi/t)(xi/xi0)^a exp(-(xi^2 + xi0^2)/2t) I_a(xi xi0 / t), written with
    // the exponentially scaled Bessel function.
    const double z = xi * xi0 / t;
    const double gauss = std::exp(-(xi - xi0) * (xi - xi0) / (2.0 * t));
    return (xi / t) * std::pow(xi / xi0, a_) * gauss * bessel_i_scaled(a_, z);
}

double BesselDensity::operator()(double t, double xi0, double xi) const {
    if (!(t > 0.0)) throw DomainError("Bessel density requires t > 0");
    if (!(xi0 > 0.0) || !(xi > 0.0)) throw DomainError("Bessel density requires xi, xi0 > 0");
    return c_ * unnormalized(t, xi0, xi);
}

TransitionDensity BesselDensity::as_transition_density() const {
    auto self = *this;
    return {[self](double y, double s, double x, double t) { return self(t - s, y, x); },
            Interval(0.0, ExtendedReal::pos_inf())};
}

BesselDensity bessel_density(double a) { return BesselDensity(a); }

TransitionDensity make_transition_density(const KernelOracle& k, SpaceTimeFn theta) {
    auto fn = [k, theta = std::move(theta)](double y, double s, double x, double t) {
        const double ty = theta(y, s);
        const double tx = theta(x, t);
        if (!(ty > 0.0) || !(tx > 0.0)) {
            throw DomainError("Theta is not positive at an evaluation point");
        }
        return k(y, s, x, t) * tx / ty;
    };
    return {fn, k.domain()};
}

TransitionDensity backward_density(const TransitionDensity& p, SpaceTimeFn rho) {
    auto fn = [p, rho = std::move(rho)](double y, double s, double x, double t) {
        const double ry = rho(y, s);
        const double rx = rho(x, t);
        if (!(ry > 0.0) || !(rx > 0.0)) throw DomainError("rho is not positive at an evaluation point");
        return p(y, s, x, t) * ry / rx;
    };
    return {fn, p.domain()};
}

double check_semigroup(const KernelOracle& k, double s, double u, double t, double y, double x,
                       const SemigroupOptions& opts) {
    if (!(s < u && u < t)) throw DomainError("semigroup check requires s < u < t");
    const double sigma = std::sqrt(2.0 * k.D() * std::min(u - s, t - u));
    const double spread = std::sqrt(2.0 * k.D() * (t - s));
    const double half = opts.half_width.value_or(0.5 * std::abs(x - y) + 12.0 * spread + 1.0);
    const double c = 0.5 * (x + y);
    double lo = c - half;
    double hi = c + half;
    if (k.domain().r1().is_finite()) lo = std::max(lo, k.domain().r1().value());
    if (k.domain().r2().is_finite()) hi = std::min(hi, k.domain().r2().value());
    std::size_t n = opts.points;
    if (n == 0) n = static_cast<std::size_t>(std::ceil((hi - lo) / (sigma / 40.0))) + 1;
    if (n % 2 == 0) ++n;
    const UniformGrid g(lo, hi, n);
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double z = g[i];
        v[i] = k.domain().contains(z) ? k(y, s, z, u) * k(z, u, x, t) : 0.0;
    }
    return std::abs(integrate(GridField(g, std::move(v))) - k(y, s, x, t));
}

}  // namespace natbound
