#pragma once

#include <compare>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "natbound/error.hpp"
#include "natbound/jet.hpp"

namespace natbound {

using ScalarFn = std::function<double(double)>;

/// A point of the extended real line.
class ExtendedReal {
public:
    enum class Kind { NegInf, Finite, PosInf };

    constexpr ExtendedReal() = default;
    constexpr ExtendedReal(double value) : kind_(Kind::Finite), value_(value) {}  // NOLINT

    static constexpr ExtendedReal neg_inf() { return ExtendedReal(Kind::NegInf); }
    static constexpr ExtendedReal pos_inf() { return ExtendedReal(Kind::PosInf); }
    /// Maps IEEE infinities onto the tags; rejects NaN.
    static ExtendedReal from_double(double x);

    constexpr Kind kind() const { return kind_; }
    constexpr bool is_finite() const { return kind_ == Kind::Finite; }
    /// Finite value; throws DomainError on an infinite point.
    double value() const;
    /// Finite value, or +-infinity as a double.
    double as_double() const;
    std::string to_string() const;

    friend std::partial_ordering operator<=>(const ExtendedReal& a, const ExtendedReal& b);
    friend bool operator==(const ExtendedReal& a, const ExtendedReal& b) { return (a <=> b) == 0; }

private:
    constexpr explicit ExtendedReal(Kind k) : kind_(k) {}

    Kind kind_ = Kind::Finite;
    double value_ = 0.0;
};

/// Open interval (r1, r2) with r1 < r2.
class Interval {
public:
    Interval(ExtendedReal r1, ExtendedReal r2);

    static Interval real_line() { return {ExtendedReal::neg_inf(), ExtendedReal::pos_inf()}; }

    const ExtendedReal& r1() const { return r1_; }
    const ExtendedReal& r2() const { return r2_; }
    bool contains(double x) const;
    /// True when x lies in the closure (touching an endpoint is allowed).
    bool contains_closed(double x) const;
    bool is_full_line() const { return !r1_.is_finite() && !r2_.is_finite(); }
    std::string to_string() const;

private:
    ExtendedReal r1_;
    ExtendedReal r2_;
};

/// Uniform grid x_i = lo + i h, i = 0..n-1.
class UniformGrid {
public:
    UniformGrid(double lo, double hi, std::size_t n);

    double lo() const { return lo_; }
    double hi() const { return hi_; }
    std::size_t size() const { return n_; }
    double spacing() const { return (hi_ - lo_) / static_cast<double>(n_ - 1); }
    double operator[](std::size_t i) const { return lo_ + static_cast<double>(i) * spacing(); }
    std::vector<double> points() const;
    /// Index of the grid point nearest to x (clamped to the grid).
    std::size_t nearest_index(double x) const;

    friend bool operator==(const UniformGrid&, const UniformGrid&) = default;

private:
    double lo_;
    double hi_;
    std::size_t n_;
};

/// A scalar function sampled on a uniform grid. All values finite.
class GridField {
public:
    GridField(UniformGrid grid, std::vector<double> values);

    static GridField sample(const UniformGrid& grid, const ScalarFn& f);
    static GridField constant(const UniformGrid& grid, double c);

    const UniformGrid& grid() const { return grid_; }
    std::span<const double> values() const { return values_; }
    std::size_t size() const { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }
    /// Piecewise-linear interpolation; throws DomainError outside [lo, hi].
    double interpolate(double x) const;

private:
    UniformGrid grid_;
    std::vector<double> values_;
};

/// Drift field b(x), evaluable on doubles and on jets (exact first and second
/// derivatives).
class Drift {
public:
    Drift() = default;
    Drift(std::function<double(double)> value, std::function<Jet(const Jet&)> jet)
        : value_(std::move(value)), jet_(std::move(jet)) {}

    /// Builds both evaluation paths from one generic callable.
    template <class F>
    static Drift from(F f) {
        return Drift([f](double x) { return static_cast<double>(f(x)); },
                     [f](const Jet& x) { return static_cast<Jet>(f(x)); });
    }

    static Drift zero() {
        return Drift::from([](const auto& x) { return 0.0 * x; });
    }

    bool valid() const { return static_cast<bool>(value_); }
    double operator()(double x) const { return value_(x); }
    /// (b, b', b'') at x.
    Jet jet(double x) const { return jet_(Jet::variable(x)); }
    const std::function<double(double)>& fn() const { return value_; }

private:
    std::function<double(double)> value_;
    std::function<Jet(const Jet&)> jet_;
};

/// Time-homogeneous diffusion dX = b(X) dt + sqrt(2D) dW on an open interval.
struct DiffusionSpec {
    double D = 0.5;
    Drift drift;
    Interval domain = Interval::real_line();
    /// Optional potential Phi with b = 2D Phi'.
    std::optional<ScalarFn> drift_potential;
    /// Registered nodes: interior points where the drift is singular and which
    /// the process cannot cross.
    std::vector<double> nodes;

    /// Throws InvariantError on D <= 0, a missing drift, or (when Phi is
    /// present) |b - 2D Phi'| above tol on the grid.
    void validate(const UniformGrid* check_grid = nullptr, double tol = 1e-6) const;
};

/// Composite quadrature weights: Simpson for odd n; for even n, Simpson on the
/// first n-1 points plus a trapezoid on the last panel.
std::vector<double> quadrature_weights(const UniformGrid& grid);

double integrate(const GridField& f);

/// Finite-difference derivative of order 1 or 2: fourth-order central
/// differences in the interior, second-order stencils at and next to the edges.
GridField derivative(const GridField& f, int order);

/// Same stencils on raw samples with spacing h.
std::vector<double> derivative(std::span<const double> values, double h, int order);

/// Symmetric truncation [lo, hi] of an interval for grid work: infinite
/// endpoints are replaced by center -+ cutoff.
std::pair<double, double> truncate(const Interval& domain, double cutoff, double center = 0.0);

}  // namespace natbound
