#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "natbound/core.hpp"
#include "natbound/feller.hpp"

namespace natbound {

using JetFn = std::function<Jet(const Jet&)>;

/// Stationary state psi_n of -D Laplacian + V on a line or interval.
struct EigenState {
    int n = 0;
    std::optional<double> omega_freq;  ///< set for harmonic states
    double D = 0.5;
    ScalarFn psi;
    double epsilon = 0.0;
    std::vector<double> nodes;  ///< sorted interior zeros
    Interval domain = Interval::real_line();

    /// Exact psi'/psi with derivatives (analytic states).
    JetFn log_derivative;
    /// ln|psi| (analytic states).
    std::optional<ScalarFn> log_abs_psi;
    /// Grid eigenvector (finite-difference states), Dirichlet zeros at the edges.
    std::optional<GridField> samples;
    /// Operator potential V with exact derivative, when the state came from
    /// an evaluable potential; enables Riccati drifts.
    JetFn potential;
};

struct EquivalenceClassMember {
    int n = 0;                  ///< index of the generating state
    std::size_t component = 0;  ///< nodal component, left to right
    Interval interval = Interval::real_line();
    double D = 0.5;
    Drift drift;
    ScalarFn omega_potential;
    ScalarFn density;  ///< psi^2 normalised on the interval
    std::optional<ScalarFn> drift_potential;
    double epsilon = 0.0;
    double component_mass = 0.0;  ///< share of |psi|^2 carried by this component
    double anchor = 0.0;          ///< interior reference point
    std::vector<BoundaryClass> boundaries;

    DiffusionSpec spec() const;
};

/// Normalised Hermite function h_n(xi) exp(-xi^2/2), D = 1/2, omega = 1.
EigenState hermite_state(int n);

/// Polynomial part h_n of the normalised Hermite function, by the
/// three-term recurrence.
double hermite_poly(int n, double x);

/// psi'/psi for the state (D = 1/2 convention; multiply by 2D otherwise).
/// Evaluation within 1e-9 of a node throws DomainError.
Drift drift_from_state(const EigenState& state);

/// Omega = b^2/2 + D b'.
ScalarFn omega_from_drift(const Drift& b, double D);
/// (Omega, Omega', .) from exact drift jets; the second slot is not filled.
JetFn omega_jet_from_drift(const Drift& b, double D);

struct DecompositionOptions {
    bool classify = true;
    IntegrabilityOptions integrability;
};

/// One member per nodal component, densities renormalised, endpoints checked
/// natural.
std::vector<EquivalenceClassMember> nodal_decomposition(const EigenState& state,
                                                        const DecompositionOptions& opts = {});

struct SturmLiouvilleOptions {
    /// Richardson estimate of the discretisation error allowed per
    /// eigenvalue, relative to max(1, |epsilon|).
    double coarse_tol = 1e-3;
    bool coarse_check = true;
};

/// Lowest n_max + 1 eigenpairs of -D Laplacian + Omega / (2D) with Dirichlet
/// edges, from a symmetric tridiagonal discretisation.
std::vector<EigenState> sturm_liouville_solve(const GridField& omega_potential, double D, int n_max,
                                              const SturmLiouvilleOptions& opts = {});

/// Same, with an evaluable potential V = Omega / (2D) carried on the states.
std::vector<EigenState> sturm_liouville_solve(const JetFn& potential, const UniformGrid& grid, double D,
                                              int n_max, const SturmLiouvilleOptions& opts = {});

struct EquivalenceOptions {
    double cutoff = 8.0;  ///< half-width replacing infinite endpoints
    std::size_t points = 1601;
    double acceleration_tol = 1e-6;
    DecompositionOptions decomposition;
    SturmLiouvilleOptions solver;
};

/// Diffusions sharing the reference acceleration field: nodal components of
/// the states 0..n_max of the reference Omega.
std::vector<EquivalenceClassMember> equivalence_class(const DiffusionSpec& reference, int n_max,
                                                      const EquivalenceOptions& opts = {});

}  // namespace natbound
