#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "natbound/core.hpp"

namespace natbound {

struct SimConfig {
    double dt = 1e-3;
    double T = 1.0;
    std::size_t n_paths = 1000;
    std::uint64_t seed = 0;
    /// A proposal closer than this to a finite endpoint or registered node is
    /// rejected like one that leaves the domain.
    double node_guard = 0.0;
    int max_halvings = 20;
    bool keep_paths = false;  ///< store positions at every dt slice
    std::size_t chunk_size = 1024;
    int threads = 1;

    void validate() const;
};

struct SimResult {
    std::vector<double> terminals;
    /// Row-major n_paths x (n_slices) when keep_paths is set.
    std::vector<double> paths;
    std::size_t n_slices = 0;
    std::size_t flagged = 0;  ///< paths that exhausted the halving budget
    double flagged_fraction = 0.0;
    bool reliable = true;     ///< false when more than 0.1% of paths are flagged
    std::size_t rejections = 0;
    std::uint64_t seed = 0;
};

struct PassageReport {
    double target = 0.0;
    std::size_t hits = 0;
    double fraction_hit = 0.0;
    std::optional<double> mean_hit_time;
    std::size_t n_paths = 0;
    /// True when the level is a wall of the process (domain endpoint or
    /// registered node); hits then require an accepted step onto the level.
    bool level_is_wall = false;
    std::size_t flagged = 0;
    bool reliable = true;
};

/// Euler-Maruyama for dX = b dt + sqrt(2D) dW with rejection and step halving
/// at the domain walls and registered nodes.
SimResult simulate(const DiffusionSpec& spec, double x0, const SimConfig& cfg);

/// Fraction of paths reaching level R before T, with the per-step bridge
/// crossing probability added for levels inside the domain.
PassageReport first_passage_fraction(const DiffusionSpec& spec, double x0, double R, const SimConfig& cfg);

struct EmpiricalDensity {
    GridField density;          ///< bin mass / bin width at each grid point
    double mass_outside = 0.0;  ///< fraction of samples outside all bins
};

/// Histogram with one bin of width h centred on every grid point.
EmpiricalDensity empirical_density(const std::vector<double>& samples, const UniformGrid& grid);

struct ChiSquareResult {
    double statistic = 0.0;
    int dof = 0;
    double p_value = 0.0;
};

/// Pearson test against a distribution given by its CDF on [lo, hi], using
/// `bins` equiprobable bins.
ChiSquareResult chi_square_test(const std::vector<double>& samples, const std::function<double(double)>& cdf,
                                double lo, double hi, int bins);

}  // namespace natbound
