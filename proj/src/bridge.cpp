#include "natbound/bridge.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>

namespace natbound {

void BridgeProblem::validate() const {
    if (!(rho0.grid() == rhoT.grid())) throw InvariantError("rho0 and rhoT must share one grid");
    if (!(T > 0.0)) throw InvariantError("bridge horizon T must be positive");
    if (!(D > 0.0)) throw InvariantError("bridge diffusion coefficient must be positive");
    for (const GridField* f : {&rho0, &rhoT}) {
        for (std::size_t i = 1; i + 1 < f->size(); ++i) {
            if (!((*f)[i] > 0.0)) {
                throw InvariantError("boundary density is not strictly positive at x=" +
                                     std::to_string(f->grid()[i]));
            }
        }
        const double mass = integrate(*f);
        if (std::abs(mass - 1.0) > 1e-8) {
            throw InvariantError("boundary density has mass " + std::to_string(mass) + ", expected 1");
        }
    }
}

namespace {

double log_sum_exp(const std::vector<double>& v) {
    double m = -std::numeric_limits<double>::infinity();
    for (double x : v) m = std::max(m, x);
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

constexpr double kUnderflowGuard = 1e-290;

std::optional<GridField> linear_if_finite(const UniformGrid& g, const std::vector<double>& logs) {
    std::vector<double> v(logs.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] = std::exp(logs[i]);
        if (!std::isfinite(v[i])) return std::nullopt;
    }
    return GridField(g, std::move(v));
}

}  // namespace

BridgeSolution solve_bridge(const BridgeProblem& problem, double tol, int max_iter) {
    problem.validate();
    if (!(tol > 0.0)) throw DomainError("bridge tolerance must be positive");
    const UniformGrid& g = problem.rho0.grid();
    const std::size_t n = g.size();
    const auto w = quadrature_weights(g);
    const auto r0 = problem.rho0.values();
    const auto rT = problem.rhoT.values();

    std::vector<double> logk(n * n);
    std::vector<double> k(n * n);
    bool underflow = false;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double lk = problem.kernel.log(g[i], 0.0, g[j], problem.T);
            if (std::isnan(lk) || lk == std::numeric_limits<double>::infinity()) {
                throw NumericalError("kernel is not finite at (" + std::to_string(g[i]) + ", " +
                                     std::to_string(g[j]) + ")");
            }
            if (lk == -std::numeric_limits<double>::infinity()) {
                throw DomainError("kernel entry is not positive at (" + std::to_string(g[i]) + ", " +
                                  std::to_string(g[j]) + ")");
            }
            logk[i * n + j] = lk;
            k[i * n + j] = std::exp(lk);
            if (k[i * n + j] == 0.0) underflow = true;
        }
    }

    std::vector<double> ts(n, 1.0);  // Theta*(., 0)
    std::vector<double> th(n, 1.0);  // Theta(., T)
    std::vector<double> row(n);
    std::vector<double> col(n);
    bool log_mode = underflow;
    std::vector<double> f(n, 0.0);  // log Theta*
    std::vector<double> gl(n, 0.0);  // log Theta

    auto residual_linear = [&]() {
        double res = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double a = 0.0;
            for (std::size_t j = 0; j < n; ++j) a += k[i * n + j] * w[j] * th[j];
            res = std::max(res, std::abs(ts[i] * a - r0[i]));
        }
        for (std::size_t j = 0; j < n; ++j) {
            double c = 0.0;
            for (std::size_t i = 0; i < n; ++i) c += w[i] * ts[i] * k[i * n + j];
            res = std::max(res, std::abs(th[j] * c - rT[j]));
        }
        return res;
    };

    auto residual_log = [&]() {
        double res = 0.0;
        std::vector<double> buf(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) buf[j] = logk[i * n + j] + std::log(w[j]) + gl[j];
            res = std::max(res, std::abs(std::exp(f[i] + log_sum_exp(buf)) - r0[i]));
        }
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t i = 0; i < n; ++i) buf[i] = logk[i * n + j] + std::log(w[i]) + f[i];
            res = std::max(res, std::abs(std::exp(gl[j] + log_sum_exp(buf)) - rT[j]));
        }
        return res;
    };

    BridgeSolution sol{g, w, {}, {}, {}, {}, {}, false, 0, std::numeric_limits<double>::infinity(), false,
                       "sum_i w_i theta_star_i = 1", 1, problem.T, problem.D, problem.kernel};

    int it = 0;
    double res = std::numeric_limits<double>::infinity();
    while (it < max_iter) {
        ++it;
        if (!log_mode) {
            for (std::size_t i = 0; i < n; ++i) {
                double a = 0.0;
                for (std::size_t j = 0; j < n; ++j) a += k[i * n + j] * w[j] * th[j];
                ts[i] = r0[i] / a;
            }
            std::fill(col.begin(), col.end(), 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                const double wi = w[i] * ts[i];
                for (std::size_t j = 0; j < n; ++j) col[j] += wi * k[i * n + j];
            }
            for (std::size_t j = 0; j < n; ++j) th[j] = rT[j] / col[j];
            bool tiny = false;
            for (std::size_t i = 0; i < n; ++i) {
                if ((ts[i] > 0.0 && ts[i] < kUnderflowGuard) || (th[i] > 0.0 && th[i] < kUnderflowGuard) ||
                    !std::isfinite(ts[i]) || !std::isfinite(th[i])) {
                    tiny = true;
                }
            }
            if (tiny) {
                // Restart this sweep in log space from the last finite iterate.
                log_mode = true;
                for (std::size_t i = 0; i < n; ++i) {
                    f[i] = std::isfinite(ts[i]) && ts[i] > 0.0 ? std::log(ts[i]) : 0.0;
                    gl[i] = std::isfinite(th[i]) && th[i] > 0.0 ? std::log(th[i]) : 0.0;
                }
                continue;
            }
            res = residual_linear();
        } else {
            std::vector<double> buf(n);
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < n; ++j) buf[j] = logk[i * n + j] + std::log(w[j]) + gl[j];
                f[i] = std::log(r0[i]) - log_sum_exp(buf);
            }
            for (std::size_t j = 0; j < n; ++j) {
                for (std::size_t i = 0; i < n; ++i) buf[i] = logk[i * n + j] + std::log(w[i]) + f[i];
                gl[j] = std::log(rT[j]) - log_sum_exp(buf);
            }
            res = residual_log();
        }
        if (res < tol) break;
    }

    if (!log_mode) {
        for (std::size_t i = 0; i < n; ++i) {
            f[i] = ts[i] > 0.0 ? std::log(ts[i]) : -std::numeric_limits<double>::infinity();
            gl[i] = th[i] > 0.0 ? std::log(th[i]) : -std::numeric_limits<double>::infinity();
        }
    }
    // Gauge sum_i w_i Theta*_i = 1, applied in log space.
    {
        std::vector<double> buf(n);
        for (std::size_t i = 0; i < n; ++i) buf[i] = f[i] + std::log(w[i]);
        const double shift = log_sum_exp(buf);
        for (std::size_t i = 0; i < n; ++i) {
            f[i] -= shift;
            gl[i] += shift;
        }
    }

    sol.joint.resize(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            sol.joint[i * n + j] = std::exp(std::log(w[i]) + std::log(w[j]) + logk[i * n + j] + f[i] + gl[j]);
        }
    }
    sol.log_theta_star_0 = f;
    sol.log_theta_T = gl;
    sol.theta_star_0 = linear_if_finite(g, f);
    sol.theta_T = linear_if_finite(g, gl);
    sol.iterations = it;
    sol.marginal_residual = res;
    sol.converged = res < tol;
    sol.log_domain = log_mode;
    return sol;
}

std::vector<double> BridgeSolution::log_theta_star_at(double t) const {
    if (t < 0.0 || t > T) throw DomainError("time outside [0, T]");
    if (t == 0.0) return log_theta_star_0;
    const std::size_t n = grid.size();
    std::vector<double> out(n), buf(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            buf[j] = std::log(weights[j]) + kernel.log(grid[j], 0.0, grid[i], t) + log_theta_star_0[j];
        }
        out[i] = log_sum_exp(buf);
    }
    return out;
}

std::vector<double> BridgeSolution::log_theta_at(double t) const {
    if (t < 0.0 || t > T) throw DomainError("time outside [0, T]");
    if (t == T) return log_theta_T;
    const std::size_t n = grid.size();
    std::vector<double> out(n), buf(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            buf[j] = std::log(weights[j]) + kernel.log(grid[i], t, grid[j], T) + log_theta_T[j];
        }
        out[i] = log_sum_exp(buf);
    }
    return out;
}

GridField BridgeSolution::theta_star_at(double t) const {
    auto v = linear_if_finite(grid, log_theta_star_at(t));
    if (!v) throw RangeError("Theta* overflows at t=" + std::to_string(t) + "; use log_theta_star_at");
    return *v;
}

GridField BridgeSolution::theta_at(double t) const {
    auto v = linear_if_finite(grid, log_theta_at(t));
    if (!v) throw RangeError("Theta overflows at t=" + std::to_string(t) + "; use log_theta_at");
    return *v;
}

GridField interpolate_density(const BridgeSolution& sol, double t) {
    if (t < 0.0 || t > sol.T) throw DomainError("interpolation time outside [0, T]");
    const auto a = sol.log_theta_star_at(t);
    const auto b = sol.log_theta_at(t);
    std::vector<double> rho(a.size());
    for (std::size_t i = 0; i < rho.size(); ++i) rho[i] = std::exp(a[i] + b[i]);
    return {sol.grid, std::move(rho)};
}

namespace {

void require_finite(const std::vector<double>& logs, const UniformGrid& g, const char* name) {
    for (std::size_t i = 0; i < logs.size(); ++i) {
        if (!std::isfinite(logs[i])) {
            throw DomainError(std::string(name) + " is not positive at x=" + std::to_string(g[i]));
        }
    }
}

}  // namespace

GridField bridge_drift(const BridgeSolution& sol, double t) {
    const auto lt = sol.log_theta_at(t);
    require_finite(lt, sol.grid, "Theta");
    auto d = derivative(lt, sol.grid.spacing(), 1);
    for (double& v : d) v *= 2.0 * sol.D;
    return {sol.grid, std::move(d)};
}

GridField bridge_current_velocity(const BridgeSolution& sol, double t) {
    const auto lt = sol.log_theta_at(t);
    const auto ls = sol.log_theta_star_at(t);
    require_finite(lt, sol.grid, "Theta");
    require_finite(ls, sol.grid, "Theta*");
    std::vector<double> diff(lt.size());
    for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = lt[i] - ls[i];
    auto d = derivative(diff, sol.grid.spacing(), 1);
    for (double& v : d) v *= sol.D;
    return {sol.grid, std::move(d)};
}

GridField gaussian_density(const UniformGrid& grid, double mean, double variance) {
    if (!(variance > 0.0)) throw DomainError("Gaussian variance must be positive");
    return GridField::sample(grid, [&](double x) {
        return std::exp(-(x - mean) * (x - mean) / (2.0 * variance)) /
               std::sqrt(2.0 * std::numbers::pi * variance);
    });
}

}  // namespace natbound
