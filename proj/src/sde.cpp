#include "natbound/sde.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <boost/math/distributions/chi_squared.hpp>

#include "natbound/rng.hpp"

namespace natbound {

void SimConfig::validate() const {
    if (!(dt > 0.0)) throw DomainError("dt must be positive");
    if (!(T > 0.0)) throw DomainError("T must be positive");
    if (!(dt < T)) throw DomainError("dt must be smaller than T");
    if (n_paths < 1) throw DomainError("n_paths must be at least 1");
    if (max_halvings < 0) throw DomainError("max_halvings must be non-negative");
    if (node_guard < 0.0) throw DomainError("node_guard must be non-negative");
}

namespace {

class Walls {
public:
    Walls(const DiffusionSpec& spec, double guard) : domain_(spec.domain), nodes_(spec.nodes), guard_(guard) {}

    bool admissible(double from, double to) const {
        if (!std::isfinite(to) || !domain_.contains(to)) return false;
        if (guard_ > 0.0) {
            if (domain_.r1().is_finite() && to - domain_.r1().value() <= guard_) return false;
            if (domain_.r2().is_finite() && domain_.r2().value() - to <= guard_) return false;
        }
        for (double n : nodes_) {
            if ((from - n) * (to - n) <= 0.0) return false;
            if (std::abs(to - n) <= guard_) return false;
        }
        return true;
    }

    bool is_wall(double level) const {
        if (domain_.r1().is_finite() && level == domain_.r1().value()) return true;
        if (domain_.r2().is_finite() && level == domain_.r2().value()) return true;
        return std::find(nodes_.begin(), nodes_.end(), level) != nodes_.end();
    }

private:
    const Interval& domain_;
    const std::vector<double>& nodes_;
    double guard_;
};

struct StepCounts {
    std::size_t rejections = 0;
};

/// Advances one path from 0 to T. `on_step(prev, next, time_after, h, rng)`
/// is called after each accepted substep and returns true to stop the path.
/// Returns false when the halving budget ran out (flagged path).
template <class OnStep, class OnSlice>
bool run_path(const DiffusionSpec& spec, const Walls& walls, double x0, const SimConfig& cfg, std::mt19937_64& rng,
              std::normal_distribution<double>& normal, double& x, StepCounts& counts, OnStep&& on_step,
              OnSlice&& on_slice) {
    const double sig = std::sqrt(2.0 * spec.D);
    const auto n_slices = static_cast<std::size_t>(std::ceil(cfg.T / cfg.dt - 1e-9));
    x = x0;
    double t = 0.0;
    for (std::size_t k = 0; k < n_slices; ++k) {
        const double slice_end = k + 1 == n_slices ? cfg.T : static_cast<double>(k + 1) * cfg.dt;
        double h = slice_end - t;
        int halvings = 0;
        while (slice_end - t > 1e-15 * cfg.T) {
            h = std::min(h, slice_end - t);
            const double b = spec.drift(x);
            if (!std::isfinite(b)) return false;
            const double proposal = x + b * h + sig * std::sqrt(h) * normal(rng);
            if (!walls.admissible(x, proposal)) {
                ++counts.rejections;
                if (++halvings > cfg.max_halvings) return false;
                h *= 0.5;
                continue;
            }
            const double prev = x;
            x = proposal;
            t += h;
            if (on_step(prev, x, t, h, rng)) return true;
        }
        t = slice_end;
        on_slice(k + 1, x);
    }
    return true;
}

}  // namespace

SimResult simulate(const DiffusionSpec& spec, double x0, const SimConfig& cfg) {
    cfg.validate();
    spec.validate();
    if (!spec.domain.contains(x0)) throw DomainError("x0 must lie inside the domain");
    if (!std::isfinite(spec.drift(x0))) throw DomainError("drift is not finite at x0");
    const Walls walls(spec, cfg.node_guard);
    const auto n_slices = static_cast<std::size_t>(std::ceil(cfg.T / cfg.dt - 1e-9)) + 1;

    SimResult res;
    res.seed = cfg.seed;
    res.terminals.assign(cfg.n_paths, 0.0);
    if (cfg.keep_paths) {
        res.n_slices = n_slices;
        res.paths.assign(cfg.n_paths * n_slices, 0.0);
    }
    const std::size_t chunk = cfg.chunk_size == 0 ? cfg.n_paths : cfg.chunk_size;
    const std::size_t n_chunks = (cfg.n_paths + chunk - 1) / chunk;
    std::vector<std::size_t> flagged(n_chunks, 0);
    std::vector<std::size_t> rejections(n_chunks, 0);
    for_each_chunk(n_chunks, cfg.threads, [&](std::size_t c) {
        auto rng = chunk_engine(cfg.seed, c);
        std::normal_distribution<double> normal(0.0, 1.0);
        const std::size_t last = std::min(cfg.n_paths, (c + 1) * chunk);
        for (std::size_t p = c * chunk; p < last; ++p) {
            double x = x0;
            StepCounts counts;
            double* row = cfg.keep_paths ? res.paths.data() + p * n_slices : nullptr;
            std::size_t written = 0;
            if (row) row[0] = x0;
            const bool ok = run_path(
                spec, walls, x0, cfg, rng, normal, x, counts,
                [](double, double, double, double, std::mt19937_64&) { return false; },
                [&](std::size_t slice, double xs) {
                    if (row) row[slice] = xs;
                    written = slice;
                });
            if (!ok) {
                ++flagged[c];
                // The path stays at its last accepted position.
                if (row) std::fill(row + written + 1, row + n_slices, x);
            }
            rejections[c] += counts.rejections;
            res.terminals[p] = x;
        }
    });
    for (std::size_t c = 0; c < n_chunks; ++c) {
        res.flagged += flagged[c];
        res.rejections += rejections[c];
    }
    res.flagged_fraction = static_cast<double>(res.flagged) / static_cast<double>(cfg.n_paths);
    res.reliable = res.flagged_fraction <= 1e-3;
    return res;
}

PassageReport first_passage_fraction(const DiffusionSpec& spec, double x0, double R, const SimConfig& cfg) {
    cfg.validate();
    spec.validate();
    if (R == x0) throw DomainError("target level must differ from x0");
    if (!spec.domain.contains(x0)) throw DomainError("x0 must lie inside the domain");
    const Walls walls(spec, cfg.node_guard);
    const bool wall = walls.is_wall(R);
    const bool reachable_interior = spec.domain.contains(R) && !wall;

    const std::size_t chunk = cfg.chunk_size == 0 ? cfg.n_paths : cfg.chunk_size;
    const std::size_t n_chunks = (cfg.n_paths + chunk - 1) / chunk;
    struct Slot {
        std::size_t hits = 0;
        double time_sum = 0.0;
        std::size_t flagged = 0;
    };
    std::vector<Slot> slots(n_chunks);
    for_each_chunk(n_chunks, cfg.threads, [&](std::size_t c) {
        auto rng = chunk_engine(cfg.seed, c);
        std::normal_distribution<double> normal(0.0, 1.0);
        std::uniform_real_distribution<double> uniform(0.0, 1.0);
        const std::size_t last = std::min(cfg.n_paths, (c + 1) * chunk);
        for (std::size_t p = c * chunk; p < last; ++p) {
            double x = x0;
            StepCounts counts;
            bool hit = false;
            double hit_time = 0.0;
            const bool ok = run_path(
                spec, walls, x0, cfg, rng, normal, x, counts,
                [&](double prev, double next, double t, double h, std::mt19937_64& g) {
                    const double ab = (prev - R) * (next - R);
                    if (ab <= 0.0) {
                        hit = true;
                    } else if (reachable_interior) {
                        if (uniform(g) < std::exp(-ab / (spec.D * h))) hit = true;
                    }
                    if (hit) hit_time = t;
                    return hit;
                },
                [](std::size_t, double) {});
            if (!ok) ++slots[c].flagged;
            if (hit) {
                ++slots[c].hits;
                slots[c].time_sum += hit_time;
            }
        }
    });
    PassageReport rep;
    rep.target = R;
    rep.n_paths = cfg.n_paths;
    rep.level_is_wall = wall || !spec.domain.contains(R);
    double time_sum = 0.0;
    for (const auto& s : slots) {
        rep.hits += s.hits;
        rep.flagged += s.flagged;
        time_sum += s.time_sum;
    }
    rep.fraction_hit = static_cast<double>(rep.hits) / static_cast<double>(cfg.n_paths);
    if (rep.hits > 0) rep.mean_hit_time = time_sum / static_cast<double>(rep.hits);
    rep.reliable = static_cast<double>(rep.flagged) <= 1e-3 * static_cast<double>(cfg.n_paths);
    return rep;
}

EmpiricalDensity empirical_density(const std::vector<double>& samples, const UniformGrid& grid) {
    if (samples.empty()) throw DomainError("empirical density of an empty sample");
    const double h = grid.spacing();
    const double lo = grid.lo() - 0.5 * h;
    std::vector<double> counts(grid.size(), 0.0);
    std::size_t outside = 0;
    for (double s : samples) {
        const double pos = (s - lo) / h;
        if (!(pos >= 0.0) || pos >= static_cast<double>(grid.size())) {
            ++outside;
            continue;
        }
        counts[static_cast<std::size_t>(pos)] += 1.0;
    }
    const double n = static_cast<double>(samples.size());
    for (double& c : counts) c /= n * h;
    return {GridField(grid, std::move(counts)), static_cast<double>(outside) / n};
}

ChiSquareResult chi_square_test(const std::vector<double>& samples, const std::function<double(double)>& cdf,
                                double lo, double hi, int bins) {
    if (bins < 2) throw DomainError("chi-square test needs at least 2 bins");
    if (samples.empty()) throw DomainError("chi-square test of an empty sample");
    const double f_lo = cdf(lo);
    const double f_hi = cdf(hi);
    if (!(f_hi > f_lo)) throw DomainError("CDF must increase over [lo, hi]");
    // Interior bin edges at equal probability steps, located by bisection.
    std::vector<double> edges;
    for (int k = 1; k < bins; ++k) {
        const double target = f_lo + (f_hi - f_lo) * k / bins;
        double a = lo;
        double b = hi;
        for (int it = 0; it < 200 && b - a > 1e-14 * (1.0 + std::abs(a)); ++it) {
            const double m = 0.5 * (a + b);
            (cdf(m) < target ? a : b) = m;
        }
        edges.push_back(0.5 * (a + b));
    }
    std::vector<double> observed(static_cast<std::size_t>(bins), 0.0);
    for (double s : samples) {
        const auto it = std::upper_bound(edges.begin(), edges.end(), s);
        observed[static_cast<std::size_t>(it - edges.begin())] += 1.0;
    }
    const double expected = static_cast<double>(samples.size()) / bins;
    ChiSquareResult r;
    for (double o : observed) r.statistic += (o - expected) * (o - expected) / expected;
    r.dof = bins - 1;
    const boost::math::chi_squared dist(r.dof);
    r.p_value = boost::math::cdf(boost::math::complement(dist, r.statistic));
    return r;
}

}  // namespace natbound
