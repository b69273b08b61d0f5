#pragma once

#include <optional>
#include <vector>

#include "natbound/core.hpp"

namespace natbound {

/// A grid field with a validity mask; masked entries hold 0.
struct MaskedField {
    GridField field;
    std::vector<bool> mask;  ///< true where the value is meaningful

    /// Throws DomainError when index i is masked.
    double at(std::size_t i) const;
};

struct HydroOptions {
    double floor = 1e-12;         ///< positivity floor for logarithms
    double node_mask_spacings = 3.0;
};

struct HydroFields {
    GridField rho;
    GridField b;       ///< forward drift
    GridField b_star;  ///< backward drift b - 2D grad ln rho
    GridField v;       ///< current velocity (b + b_star) / 2
    GridField u;       ///< osmotic velocity (b - b_star) / 2
    GridField Q;       ///< 2D^2 Laplacian(sqrt rho) / sqrt rho
    GridField P;       ///< D^2 rho Laplacian(ln rho), as 2D^2 (s s'' - s'^2) with s = sqrt rho
    GridField grad_Q;  ///< finite-difference gradient of Q
    GridField grad_P;  ///< finite-difference gradient of P
    std::optional<GridField> Omega;       ///< b^2/2 + D b' from the drift
    std::optional<GridField> grad_Omega;  ///< b b' + D b''
    std::vector<bool> mask;  ///< points where every derivative quantity is valid
    double D = 0.5;
};

/// Hydrodynamic fields of a stationary diffusion with density rho.
HydroFields build_hydro(const DiffusionSpec& spec, const GridField& rho, const HydroOptions& opts = {});

/// b b' + D b'' from exact drift derivatives; masked within 3h of registered
/// nodes and finite endpoints, and outside the domain.
MaskedField acceleration_field(const DiffusionSpec& spec, const UniformGrid& grid,
                               double node_mask_spacings = 3.0);

/// max over interior points and interior slices of |d_t rho + grad(rho v)|,
/// central differences in time with step dt.
double continuity_residual(const std::vector<GridField>& rho_t, const std::vector<GridField>& v_t, double dt);

struct EhrenfestResult {
    double lhs = 0.0;  ///< int rho grad Q
    double rhs = 0.0;  ///< int rho grad Omega
    /// Stationary balance int rho v grad v against int rho grad(Omega - Q).
    double convective = 0.0;
    double potential_gap = 0.0;
};

EhrenfestResult ehrenfest_check(const HydroFields& hydro);

struct MomentumBalance {
    double alpha = 0.0;  ///< window actually used (snapped to grid points)
    double beta = 0.0;
    double volume_force = 0.0;   ///< int_alpha^beta rho grad Omega
    double pressure_term = 0.0;  ///< P(alpha) - P(beta)
    double total = 0.0;
    double reference = 0.0;  ///< int_alpha^beta rho grad(Omega - Q)
    double residual = 0.0;   ///< total - reference
    double pointwise = 0.0;  ///< max |grad P - rho grad Q| on the window
};

MomentumBalance momentum_balance(const HydroFields& hydro, double alpha, double beta);

}  // namespace natbound
