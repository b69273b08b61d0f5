#pragma once

#include <string>
#include <vector>

#include "natbound/core.hpp"

namespace natbound {

enum class BoundaryKind { NaturalRepulsive, NaturalAttractive, NotNatural };

std::string to_string(BoundaryKind k);

/// Verdict of one cutoff-sequence integrability test.
enum class Integrability { Integrable, Divergent, NotTested };

std::string to_string(Integrability v);

struct IntegrabilityTrace {
    Integrability verdict = Integrability::NotTested;
    std::vector<double> cutoffs;  ///< distance to the endpoint (finite) or |x| (infinite)
    std::vector<double> totals;   ///< running integral at each cutoff
    std::string rule;             ///< which stopping rule fired
};

struct BoundaryClass {
    BoundaryKind kind = BoundaryKind::NotNatural;
    ExtendedReal endpoint;
    double x0 = 0.0;
    IntegrabilityTrace l1;
    IntegrabilityTrace l2;
};

/// Settings of the cutoff-sequence integrability test.
struct IntegrabilityOptions {
    int steps = 12;
    double increment_tol = 1e-9;    ///< relative increment for "converged"
    int converged_run = 3;          ///< consecutive small increments required
    double divergence_cap = 1e12;
    double ratio_converging = 0.9;  ///< geometric-decay ratio bound for the tail test
    double ratio_diverging = 0.99;  ///< increments that stop shrinking
    int substeps = 256;             ///< RK4 substeps per cutoff segment
};

/// L1(x) = exp(-(1/D) int_{x0}^{x} b). Uses exp(-2(Phi(x) - Phi(x0))) when the
/// spec carries a potential.
double hille_l1(const DiffusionSpec& spec, double x0, double x);

/// L2(x) = L1(x) int_{x0}^{x} dz / L1(z).
double hille_l2(const DiffusionSpec& spec, double x0, double x);

/// Natural-repulsive / natural-attractive / not-natural verdict for one
/// endpoint. Throws InconclusiveError when a sequence stalls.
BoundaryClass classify_boundary(const DiffusionSpec& spec, const ExtendedReal& endpoint, double x0,
                                const IntegrabilityOptions& opts = {});

enum class TransmissionKind { Blocked, Transmitting, Indeterminate };

std::string to_string(TransmissionKind k);

struct SideFit {
    double alpha = 0.0;      ///< fitted local exponent
    double std_error = 0.0;
    std::size_t points = 0;
};

struct Transmission {
    TransmissionKind kind = TransmissionKind::Indeterminate;
    SideFit left;
    SideFit right;
    double tolerance = 0.0;  ///< band below 1 still counted as "exponent 1"
};

struct TransmissionOptions {
    std::size_t min_points = 8;
    std::size_t max_points = 40;
    double exclusion_spacings = 2.0;  ///< drop points with |x - node| < this * h
    double node_tol = 1e-6;           ///< rho(node) <= node_tol * max rho
    double unit_band = 1e-3;          ///< minimum band for alpha == 1
};

/// Power-law exponent test for crossing a density node.
Transmission transmission_at_node(const GridField& rho, double node,
                                  const TransmissionOptions& opts = {});

}  // namespace natbound
