#include "natbound/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace natbound {

ExtendedReal ExtendedReal::from_double(double x) {
    if (std::isnan(x)) throw InvariantError("extended real cannot be NaN");
    if (x == std::numeric_limits<double>::infinity()) return pos_inf();
    if (x == -std::numeric_limits<double>::infinity()) return neg_inf();
    return ExtendedReal(x);
}

double ExtendedReal::value() const {
    if (!is_finite()) throw DomainError("infinite endpoint has no finite value");
    return value_;
}

double ExtendedReal::as_double() const {
    switch (kind_) {
        case Kind::NegInf: return -std::numeric_limits<double>::infinity();
        case Kind::PosInf: return std::numeric_limits<double>::infinity();
        case Kind::Finite: break;
    }
    return value_;
}

std::string ExtendedReal::to_string() const {
    switch (kind_) {
        case Kind::NegInf: return "-inf";
        case Kind::PosInf: return "+inf";
        case Kind::Finite: break;
    }
    std::ostringstream os;
    os.precision(17);
    os << value_;
    return os.str();
}

std::partial_ordering operator<=>(const ExtendedReal& a, const ExtendedReal& b) {
    return a.as_double() <=> b.as_double();
}

Interval::Interval(ExtendedReal r1, ExtendedReal r2) : r1_(r1), r2_(r2) {
    if (!(r1_ < r2_)) {
        throw InvariantError("interval requires r1 < r2, got (" + r1_.to_string() + ", " +
                             r2_.to_string() + ")");
    }
}

bool Interval::contains(double x) const { return r1_.as_double() < x && x < r2_.as_double(); }

bool Interval::contains_closed(double x) const {
    return r1_.as_double() <= x && x <= r2_.as_double();
}

std::string Interval::to_string() const {
    return "(" + r1_.to_string() + ", " + r2_.to_string() + ")";
}

UniformGrid::UniformGrid(double lo, double hi, std::size_t n) : lo_(lo), hi_(hi), n_(n) {
    if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi)) {
        throw InvariantError("grid requires finite lo < hi");
    }
    if (n < 3) throw InvariantError("grid requires at least 3 points");
}

std::vector<double> UniformGrid::points() const {
    std::vector<double> xs(n_);
    for (std::size_t i = 0; i < n_; ++i) xs[i] = (*this)[i];
    return xs;
}

std::size_t UniformGrid::nearest_index(double x) const {
    const double r = std::round((x - lo_) / spacing());
    if (r <= 0.0) return 0;
    if (r >= static_cast<double>(n_ - 1)) return n_ - 1;
    return static_cast<std::size_t>(r);
}

GridField::GridField(UniformGrid grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values)) {
    if (values_.size() != grid_.size()) {
        throw InvariantError("grid field length " + std::to_string(values_.size()) +
                             " does not match grid size " + std::to_string(grid_.size()));
    }
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!std::isfinite(values_[i])) {
            throw InvariantError("grid field value at x=" + std::to_string(grid_[i]) +
                                 " is not finite");
        }
    }
}

GridField GridField::sample(const UniformGrid& grid, const ScalarFn& f) {
    std::vector<double> v(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) v[i] = f(grid[i]);
    return {grid, std::move(v)};
}

GridField GridField::constant(const UniformGrid& grid, double c) {
    return {grid, std::vector<double>(grid.size(), c)};
}

double GridField::interpolate(double x) const {
    if (x < grid_.lo() || x > grid_.hi()) {
        throw DomainError("interpolation point " + std::to_string(x) + " outside grid");
    }
    const double s = (x - grid_.lo()) / grid_.spacing();
    auto i = static_cast<std::size_t>(std::floor(s));
    if (i >= grid_.size() - 1) i = grid_.size() - 2;
    const double f = s - static_cast<double>(i);
    return (1.0 - f) * values_[i] + f * values_[i + 1];
}

void DiffusionSpec::validate(const UniformGrid* check_grid, double tol) const {
    if (!(D > 0.0) || !std::isfinite(D)) throw InvariantError("diffusion coefficient must be positive");
    if (!drift.valid()) throw InvariantError("diffusion spec has no drift");
    if (!drift_potential || check_grid == nullptr) return;
    const auto& phi = *drift_potential;
    const double h = check_grid->spacing();
    for (std::size_t i = 1; i + 1 < check_grid->size(); ++i) {
        const double x = (*check_grid)[i];
        if (!domain.contains(x - h) || !domain.contains(x + h)) continue;
        const double dphi = (phi(x + h) - phi(x - h)) / (2.0 * h);
        const double b = drift(x);
        if (!std::isfinite(b) || !std::isfinite(dphi)) continue;
        if (std::abs(b - 2.0 * D * dphi) > tol * (1.0 + std::abs(b))) {
            throw InvariantError("drift is not 2D * potential' at x=" + std::to_string(x));
        }
    }
}

std::vector<double> quadrature_weights(const UniformGrid& grid) {
    const std::size_t n = grid.size();
    const double h = grid.spacing();
    std::vector<double> w(n, 0.0);
    const std::size_t simpson_n = (n % 2 == 1) ? n : n - 1;
    for (std::size_t i = 0; i < simpson_n; ++i) {
        if (i == 0 || i == simpson_n - 1) {
            w[i] = h / 3.0;
        } else {
            w[i] = (i % 2 == 1) ? 4.0 * h / 3.0 : 2.0 * h / 3.0;
        }
    }
    if (simpson_n != n) {
        w[n - 2] += 0.5 * h;
        w[n - 1] += 0.5 * h;
    }
    return w;
}

double integrate(const GridField& f) {
    const auto w = quadrature_weights(f.grid());
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * f[i];
    return s;
}

std::vector<double> derivative(std::span<const double> f, double h, int order) {
    const std::size_t n = f.size();
    if (order != 1 && order != 2) {
        throw DomainError("derivative order must be 1 or 2, got " + std::to_string(order));
    }
    if (n < 5) throw InvariantError("derivative requires at least 5 points");
    std::vector<double> d(n);
    if (order == 1) {
        const double c = 1.0 / (12.0 * h);
        for (std::size_t i = 2; i + 2 < n; ++i) {
            d[i] = (-f[i + 2] + 8.0 * f[i + 1] - 8.0 * f[i - 1] + f[i - 2]) * c;
        }
        d[1] = (f[2] - f[0]) / (2.0 * h);
        d[n - 2] = (f[n - 1] - f[n - 3]) / (2.0 * h);
        d[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h);
        d[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * h);
    } else {
        const double c = 1.0 / (12.0 * h * h);
        for (std::size_t i = 2; i + 2 < n; ++i) {
            d[i] = (-f[i + 2] + 16.0 * f[i + 1] - 30.0 * f[i] + 16.0 * f[i - 1] - f[i - 2]) * c;
        }
        const double h2 = h * h;
        d[1] = (f[2] - 2.0 * f[1] + f[0]) / h2;
        d[n - 2] = (f[n - 1] - 2.0 * f[n - 2] + f[n - 3]) / h2;
        d[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / h2;
        d[n - 1] = (2.0 * f[n - 1] - 5.0 * f[n - 2] + 4.0 * f[n - 3] - f[n - 4]) / h2;
    }
    return d;
}

GridField derivative(const GridField& f, int order) {
    return {f.grid(), derivative(f.values(), f.grid().spacing(), order)};
}

std::pair<double, double> truncate(const Interval& domain, double cutoff, double center) {
    const double lo = domain.r1().is_finite() ? domain.r1().value() : center - cutoff;
    const double hi = domain.r2().is_finite() ? domain.r2().value() : center + cutoff;
    if (!(lo < hi)) throw DomainError("truncation cutoff leaves an empty interval");
    return {lo, hi};
}

}  // namespace natbound
