#pragma once

#include <cstdint>
#include <vector>

#include "natbound/core.hpp"

namespace natbound {

/// Pinned Brownian paths on uniform time slices.
struct PathBundle {
    std::size_t n_paths = 0;
    std::size_t n_steps = 0;
    double D = 0.5;
    std::vector<double> times;      ///< n_steps + 1 slices
    std::vector<double> positions;  ///< row-major n_paths x (n_steps + 1)
    /// Survival flags, same layout as positions; monotone along each path.
    std::vector<std::uint8_t> alive;
    std::uint64_t seed = 0;

    double at(std::size_t path, std::size_t slice) const { return positions[path * (n_steps + 1) + slice]; }
    bool alive_at(std::size_t path, std::size_t slice) const { return alive[path * (n_steps + 1) + slice] != 0; }
    /// Survival at the final slice.
    bool survived(std::size_t path) const { return alive_at(path, n_steps); }
};

struct McEstimate {
    double value = 0.0;
    double std_error = 0.0;
    std::size_t n_effective = 0;  ///< paths that produced a finite weight
    std::uint64_t seed = 0;
    std::size_t n_paths = 0;
    std::size_t n_steps = 0;
    std::size_t chunk_size = 0;
    std::size_t discarded = 0;  ///< non-finite weights
    std::size_t killed = 0;     ///< paths stopped by the discrete position indicator
    bool reliable = true;       ///< false when more than 1% of paths were discarded
};

/// How the time integral of Omega is discretised on each slice.
enum class TimeRule {
    Trapezoid,         ///< (Omega(X_k) + Omega(X_k+1)) / 2
    MidpointPosition,  ///< Omega((X_k + X_k+1) / 2); biased by O(D delta), diagnostic only
};

struct McOptions {
    std::size_t chunk_size = 16384;
    int threads = 1;
    TimeRule rule = TimeRule::Trapezoid;
    /// Apply the per-slice bridge crossing probability at finite boundaries.
    /// Turning it off leaves only the discrete indicator (diagnostic mode).
    bool crossing_correction = true;
};

/// Exact bridge sampling from (y, s) to (x, t) on n_steps uniform slices.
PathBundle sample_brownian_bridges(double y, double x, double s, double t, double D, std::size_t n_paths,
                                   std::size_t n_steps, std::uint64_t seed, std::size_t chunk_size = 16384);

/// Marks paths dead from the first slice that leaves the open domain.
void apply_killing(PathBundle& bundle, const Interval& domain);

/// k(y, s, x, t) = heat(y, s, x, t) E_bridge[alpha exp(-(1/2D) int Omega)].
McEstimate fk_kernel_mc(const ScalarFn& omega, const Interval& domain, double D, double y, double s, double x,
                        double t, std::size_t n_paths, std::size_t n_steps, std::uint64_t seed,
                        const McOptions& opts = {});

/// exp[Phi(X_t) - Phi(X_s) - (1/2D) int Omega] for one alive path of the bundle.
double girsanov_weight(const PathBundle& bundle, std::size_t path, const DiffusionSpec& spec,
                       const ScalarFn& omega, TimeRule rule = TimeRule::Trapezoid);

/// heat(y, s, x, t) E_bridge[girsanov weight]: the transition density of the
/// diffusion with potential Phi, streamed without storing paths.
McEstimate girsanov_density_mc(const DiffusionSpec& spec, const ScalarFn& omega, double y, double s, double x,
                               double t, std::size_t n_paths, std::size_t n_steps, std::uint64_t seed,
                               const McOptions& opts = {});

/// fk_kernel_mc on (-R, R) for each cutoff, all with the same seed so the
/// sequence shares its random numbers.
std::vector<McEstimate> absorbing_limit_study(const ScalarFn& omega, double D, double y, double x, double t,
                                              const std::vector<double>& cutoffs, std::size_t n_paths,
                                              std::size_t n_steps, std::uint64_t seed,
                                              const McOptions& opts = {});

}  // namespace natbound
