#pragma once

#include <functional>
#include <optional>

#include "natbound/core.hpp"

namespace natbound {

/// Two-point function k(y, s, x, t) for s < t.
class KernelOracle {
public:
    using Fn = std::function<double(double y, double s, double x, double t)>;

    KernelOracle(Fn fn, Interval domain, bool homogeneous, double D, Fn log_fn = nullptr);

    /// Throws DomainError when t - s < 1e-12.
    double operator()(double y, double s, double x, double t) const;
    /// log k; falls back to log of the value when no closed form was given.
    double log(double y, double s, double x, double t) const;

    const Interval& domain() const { return domain_; }
    bool homogeneous() const { return homogeneous_; }
    double D() const { return D_; }

private:
    Fn fn_;
    Fn log_fn_;
    Interval domain_;
    bool homogeneous_;
    double D_;
};

/// Transition density p(y, s, x, t).
class TransitionDensity {
public:
    using Fn = KernelOracle::Fn;

    TransitionDensity(Fn fn, Interval domain) : fn_(std::move(fn)), domain_(std::move(domain)) {}

    double operator()(double y, double s, double x, double t) const { return fn_(y, s, x, t); }
    const Interval& domain() const { return domain_; }

private:
    Fn fn_;
    Interval domain_;
};

/// Time-dependent positive function Theta(x, t) or rho(x, t).
using SpaceTimeFn = std::function<double(double x, double t)>;

/// Free heat kernel (4 pi D t)^{-1/2} exp(-(x - y)^2 / 4Dt) on the line.
KernelOracle heat_kernel(double D);

/// exp(-tH)(y, x) for H = -1/2 d^2 + x^2/2 - 1/2 (D = 1/2, symmetric form).
KernelOracle mehler_kernel();

/// Ornstein-Uhlenbeck transition density (b = -x, D = 1/2), closed form.
double ou_transition_density(double y, double x, double t);

/// Modified Bessel function of the first kind I_a(z), a >= 0, z >= 0.
double bessel_i(double a, double z);
/// exp(-z) I_a(z), finite for large z.
double bessel_i_scaled(double a, double z);

/// Transition density of the Bessel diffusion with generator
/// 1/2 d^2 + (1 + 2a)/(2 xi) d on (0, inf).
class BesselDensity {
public:
    explicit BesselDensity(double a);

    /// p(t; xi0, xi); throws DomainError for xi0 <= 0, xi <= 0 or t <= 0.
    double operator()(double t, double xi0, double xi) const;
    double a() const { return a_; }
    /// Multiplicative constant fixed at construction by normalisation.
    double normalization() const { return c_; }
    TransitionDensity as_transition_density() const;

private:
    double unnormalized(double t, double xi0, double xi) const;

    double a_;
    double c_ = 1.0;
};

BesselDensity bessel_density(double a);

/// p = k(y, s, x, t) Theta(x, t) / Theta(y, s).
TransitionDensity make_transition_density(const KernelOracle& k, SpaceTimeFn theta);

/// p*(y, s, x, t) = p(y, s, x, t) rho(y, s) / rho(x, t).
TransitionDensity backward_density(const TransitionDensity& p, SpaceTimeFn rho);

struct SemigroupOptions {
    std::optional<double> half_width;  ///< integration window around the probes
    std::size_t points = 0;            ///< 0: chosen from the time steps
};

/// |int k(y, s, z, u) k(z, u, x, t) dz - k(y, s, x, t)|.
double check_semigroup(const KernelOracle& k, double s, double u, double t, double y, double x,
                       const SemigroupOptions& opts = {});

}  // namespace natbound
