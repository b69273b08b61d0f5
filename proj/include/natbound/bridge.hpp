#pragma once

#include <optional>
#include <string>
#include <vector>

#include "natbound/core.hpp"
#include "natbound/kernels.hpp"

namespace natbound {

struct BridgeProblem {
    GridField rho0;
    GridField rhoT;
    double T;
    KernelOracle kernel;
    double D;

    /// Positivity, unit mass within 1e-8, shared grid, T > 0, D > 0.
    void validate() const;
};

struct BridgeSolution {
    UniformGrid grid;
    std::vector<double> weights;  ///< quadrature weights of the grid
    std::vector<double> log_theta_star_0;  ///< ln Theta*(., 0), gauge applied
    std::vector<double> log_theta_T;       ///< ln Theta(., T)
    /// Linear potentials; empty when a value overflows a double.
    std::optional<GridField> theta_star_0;
    std::optional<GridField> theta_T;
    /// Joint mass matrix m_ij = w_i Theta*_i k(x_i, 0, x_j, T) Theta_j w_j,
    /// row-major n x n.
    std::vector<double> joint;
    bool converged = false;
    int iterations = 0;
    double marginal_residual = 0.0;  ///< sup-norm density residual of both marginals
    bool log_domain = false;         ///< iteration switched to log space
    std::string gauge = "sum_i w_i theta_star_i = 1";
    int threads = 1;

    double T;
    double D;
    KernelOracle kernel;

    /// ln Theta*(., t) by forward kernel propagation of Theta*(., 0).
    std::vector<double> log_theta_star_at(double t) const;
    /// ln Theta(., t) by backward kernel propagation of Theta(., T).
    std::vector<double> log_theta_at(double t) const;
    /// Linear versions; throw RangeError when a value overflows.
    GridField theta_star_at(double t) const;
    GridField theta_at(double t) const;
};

/// Alternating proportional fitting of the discretised marginal system.
/// Returns the best iterate with converged = false when max_iter runs out.
BridgeSolution solve_bridge(const BridgeProblem& problem, double tol, int max_iter);

/// rho(., t) = Theta*(., t) Theta(., t).
GridField interpolate_density(const BridgeSolution& sol, double t);

/// Forward drift 2D grad Theta / Theta at time t.
GridField bridge_drift(const BridgeSolution& sol, double t);

/// Current velocity v = D grad ln(Theta / Theta*) at time t.
GridField bridge_current_velocity(const BridgeSolution& sol, double t);

/// Normalised Gaussian density sampled on a grid.
GridField gaussian_density(const UniformGrid& grid, double mean, double variance);

}  // namespace natbound
