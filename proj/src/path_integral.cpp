#include "natbound/path_integral.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "natbound/rng.hpp"

namespace natbound {

namespace {

struct BridgeSetup {
    double y;
    double x;
    double s;
    double t;
    double D;
    std::size_t n_steps;
};

void check_setup(const BridgeSetup& b, std::size_t n_paths) {
    if (!(b.t - b.s >= 1e-12)) throw DomainError("bridge time span t - s must be at least 1e-12");
    if (b.n_steps < 2) throw DomainError("bridges need at least 2 time steps");
    if (n_paths == 0) throw DomainError("n_paths must be positive");
    if (!(b.D > 0.0)) throw DomainError("diffusion coefficient must be positive");
    if (!std::isfinite(b.x) || !std::isfinite(b.y)) throw DomainError("bridge endpoints must be finite");
}

/// Fills out[0..n_steps] with one exact bridge sample.
void draw_bridge(const BridgeSetup& b, std::mt19937_64& rng, std::normal_distribution<double>& normal,
                 double* out) {
    const std::size_t m = b.n_steps;
    const double total = b.t - b.s;
    const double delta = total / static_cast<double>(m);
    out[0] = b.y;
    double cur = b.y;
    for (std::size_t k = 0; k + 1 < m; ++k) {
        const double remaining = total - static_cast<double>(k) * delta;
        const double mean = cur + (b.x - cur) * delta / remaining;
        const double var = 2.0 * b.D * delta * (remaining - delta) / remaining;
        cur = mean + std::sqrt(var) * normal(rng);
        out[k + 1] = cur;
    }
    out[m] = b.x;
}

struct Moments {
    std::size_t count = 0;
    double mean = 0.0;
    double m2 = 0.0;
    std::size_t discarded = 0;
    std::size_t killed = 0;

    void add(double w) {
        ++count;
        const double d = w - mean;
        mean += d / static_cast<double>(count);
        m2 += d * (w - mean);
    }

    void merge(const Moments& o) {
        discarded += o.discarded;
        killed += o.killed;
        if (o.count == 0) return;
        if (count == 0) {
            count = o.count;
            mean = o.mean;
            m2 = o.m2;
            return;
        }
        const double n1 = static_cast<double>(count);
        const double n2 = static_cast<double>(o.count);
        const double d = o.mean - mean;
        mean += d * n2 / (n1 + n2);
        m2 += o.m2 + d * d * n1 * n2 / (n1 + n2);
        count += o.count;
    }
};

/// Outcome of one path: weight, or discarded / killed markers.
struct PathWeight {
    double weight = 0.0;
    bool killed = false;
};

template <class WeightOf>
McEstimate stream_bridges(const BridgeSetup& b, std::size_t n_paths, std::uint64_t seed, const McOptions& opts,
                          WeightOf&& weight_of) {
    check_setup(b, n_paths);
    const std::size_t chunk = opts.chunk_size == 0 ? n_paths : opts.chunk_size;
    const std::size_t n_chunks = (n_paths + chunk - 1) / chunk;
    std::vector<Moments> slots(n_chunks);
    for_each_chunk(n_chunks, opts.threads, [&](std::size_t c) {
        auto rng = chunk_engine(seed, c);
        std::normal_distribution<double> normal(0.0, 1.0);
        std::vector<double> path(b.n_steps + 1);
        const std::size_t first = c * chunk;
        const std::size_t last = std::min(n_paths, first + chunk);
        Moments& acc = slots[c];
        for (std::size_t p = first; p < last; ++p) {
            draw_bridge(b, rng, normal, path.data());
            const PathWeight pw = weight_of(path);
            if (pw.killed) ++acc.killed;
            if (!std::isfinite(pw.weight)) {
                ++acc.discarded;
                continue;
            }
            acc.add(pw.weight);
        }
    });
    Moments total;
    for (const auto& m : slots) total.merge(m);

    const double heat = std::exp(-(b.x - b.y) * (b.x - b.y) / (4.0 * b.D * (b.t - b.s))) /
                        std::sqrt(4.0 * std::numbers::pi * b.D * (b.t - b.s));
    McEstimate est;
    est.seed = seed;
    est.n_paths = n_paths;
    est.n_steps = b.n_steps;
    est.chunk_size = chunk;
    est.n_effective = total.count;
    est.discarded = total.discarded;
    est.killed = total.killed;
    est.reliable = static_cast<double>(total.discarded) <= 0.01 * static_cast<double>(n_paths);
    if (total.count == 0) {
        est.value = std::nan("");
        est.std_error = std::nan("");
        est.reliable = false;
        return est;
    }
    est.value = heat * total.mean;
    const double var = total.count > 1 ? total.m2 / static_cast<double>(total.count - 1) : 0.0;
    est.std_error = heat * std::sqrt(var / static_cast<double>(total.count));
    return est;
}

/// Killing factor and time integral of Omega along one path.
struct PathFunctional {
    const ScalarFn& omega;
    const Interval& domain;
    double D;
    double delta;
    TimeRule rule;
    bool correction;

    PathWeight operator()(const std::vector<double>& path, double extra_log = 0.0) const {
        const bool lo_finite = domain.r1().is_finite();
        const bool hi_finite = domain.r2().is_finite();
        const double lo = lo_finite ? domain.r1().value() : 0.0;
        const double hi = hi_finite ? domain.r2().value() : 0.0;
        double survival = 1.0;
        double integral = 0.0;
        double om_prev = 0.0;
        for (std::size_t k = 0; k < path.size(); ++k) {
            const double xk = path[k];
            // Touching a boundary exactly is not a crossing.
            if ((lo_finite && xk < lo) || (hi_finite && xk > hi)) return {0.0, true};
            if (k == 0) {
                if (rule == TimeRule::Trapezoid) om_prev = omega(xk);
                continue;
            }
            const double xp = path[k - 1];
            if (correction) {
                for (int side = 0; side < 2; ++side) {
                    const bool finite = side == 0 ? lo_finite : hi_finite;
                    if (!finite) continue;
                    const double r = side == 0 ? lo : hi;
                    const double ab = (xp - r) * (xk - r);
                    if (ab > 0.0) survival *= -std::expm1(-ab / (D * delta));
                }
            }
            if (rule == TimeRule::Trapezoid) {
                const double om = omega(xk);
                integral += 0.5 * delta * (om_prev + om);
                om_prev = om;
            } else {
                integral += delta * omega(0.5 * (xp + xk));
            }
        }
        return {survival * std::exp(extra_log - integral / (2.0 * D)), false};
    }
};

}  // namespace

PathBundle sample_brownian_bridges(double y, double x, double s, double t, double D, std::size_t n_paths,
                                   std::size_t n_steps, std::uint64_t seed, std::size_t chunk_size) {
    const BridgeSetup b{y, x, s, t, D, n_steps};
    check_setup(b, n_paths);
    PathBundle bundle;
    bundle.n_paths = n_paths;
    bundle.n_steps = n_steps;
    bundle.D = D;
    bundle.seed = seed;
    bundle.times.resize(n_steps + 1);
    for (std::size_t k = 0; k <= n_steps; ++k) {
        bundle.times[k] = s + (t - s) * static_cast<double>(k) / static_cast<double>(n_steps);
    }
    bundle.times[n_steps] = t;
    bundle.positions.resize(n_paths * (n_steps + 1));
    bundle.alive.assign(n_paths * (n_steps + 1), 1);
    const std::size_t chunk = chunk_size == 0 ? n_paths : chunk_size;
    const std::size_t n_chunks = (n_paths + chunk - 1) / chunk;
    for (std::size_t c = 0; c < n_chunks; ++c) {
        auto rng = chunk_engine(seed, c);
        std::normal_distribution<double> normal(0.0, 1.0);
        const std::size_t last = std::min(n_paths, (c + 1) * chunk);
        for (std::size_t p = c * chunk; p < last; ++p) {
            draw_bridge(b, rng, normal, bundle.positions.data() + p * (n_steps + 1));
        }
    }
    return bundle;
}

void apply_killing(PathBundle& bundle, const Interval& domain) {
    const std::size_t m = bundle.n_steps + 1;
    for (std::size_t p = 0; p < bundle.n_paths; ++p) {
        bool dead = false;
        for (std::size_t k = 0; k < m; ++k) {
            if (!dead && !domain.contains_closed(bundle.positions[p * m + k])) dead = true;
            if (dead) bundle.alive[p * m + k] = 0;
        }
    }
}

McEstimate fk_kernel_mc(const ScalarFn& omega, const Interval& domain, double D, double y, double s, double x,
                        double t, std::size_t n_paths, std::size_t n_steps, std::uint64_t seed,
                        const McOptions& opts) {
    if (!domain.contains(y) || !domain.contains(x)) throw DomainError("kernel endpoints must lie inside the domain");
    const BridgeSetup b{y, x, s, t, D, n_steps};
    check_setup(b, n_paths);
    const PathFunctional f{omega, domain, D, (t - s) / static_cast<double>(n_steps), opts.rule,
                           opts.crossing_correction};
    return stream_bridges(b, n_paths, seed, opts, [&](const std::vector<double>& path) { return f(path); });
}

double girsanov_weight(const PathBundle& bundle, std::size_t path, const DiffusionSpec& spec,
                       const ScalarFn& omega, TimeRule rule) {
    if (!spec.drift_potential) throw DomainError("Girsanov weight needs a drift potential");
    if (path >= bundle.n_paths) throw DomainError("path index out of range");
    if (!bundle.survived(path)) throw DomainError("Girsanov weight requested for a killed path");
    const std::size_t m = bundle.n_steps + 1;
    std::vector<double> xs(bundle.positions.begin() + static_cast<std::ptrdiff_t>(path * m),
                           bundle.positions.begin() + static_cast<std::ptrdiff_t>((path + 1) * m));
    const auto& phi = *spec.drift_potential;
    const double phi_t = phi(xs.back());
    const double phi_s = phi(xs.front());
    if (!std::isfinite(phi_t) || !std::isfinite(phi_s)) throw NumericalError("Phi is not finite on the path");
    const double delta = (bundle.times.back() - bundle.times.front()) / static_cast<double>(bundle.n_steps);
    const Interval line = Interval::real_line();
    const PathFunctional f{omega, line, bundle.D, delta, rule, false};
    return f(xs, phi_t - phi_s).weight;
}

McEstimate girsanov_density_mc(const DiffusionSpec& spec, const ScalarFn& omega, double y, double s, double x,
                               double t, std::size_t n_paths, std::size_t n_steps, std::uint64_t seed,
                               const McOptions& opts) {
    if (!spec.drift_potential) throw DomainError("Girsanov weight needs a drift potential");
    if (!spec.domain.contains(y) || !spec.domain.contains(x)) {
        throw DomainError("density endpoints must lie inside the domain");
    }
    const auto& phi = *spec.drift_potential;
    const double shift = phi(x) - phi(y);
    if (!std::isfinite(shift)) throw NumericalError("Phi is not finite at the path endpoints");
    const BridgeSetup b{y, x, s, t, spec.D, n_steps};
    check_setup(b, n_paths);
    const PathFunctional f{omega, spec.domain, spec.D, (t - s) / static_cast<double>(n_steps), opts.rule,
                           opts.crossing_correction};
    return stream_bridges(b, n_paths, seed, opts,
                          [&](const std::vector<double>& path) { return f(path, shift); });
}

std::vector<McEstimate> absorbing_limit_study(const ScalarFn& omega, double D, double y, double x, double t,
                                              const std::vector<double>& cutoffs, std::size_t n_paths,
                                              std::size_t n_steps, std::uint64_t seed, const McOptions& opts) {
    if (cutoffs.empty()) throw DomainError("absorbing limit study needs at least one cutoff");
    for (std::size_t i = 0; i < cutoffs.size(); ++i) {
        if (!(cutoffs[i] > 0.0)) throw DomainError("cutoffs must be positive");
        if (i > 0 && !(cutoffs[i] > cutoffs[i - 1])) throw DomainError("cutoffs must be increasing");
    }
    if (!(std::abs(y) < cutoffs.front() && std::abs(x) < cutoffs.front())) {
        throw DomainError("endpoints must lie inside the smallest cutoff interval");
    }
    std::vector<McEstimate> out;
    out.reserve(cutoffs.size());
    for (double r : cutoffs) {
        out.push_back(fk_kernel_mc(omega, Interval(-r, r), D, y, 0.0, x, t, n_paths, n_steps, seed, opts));
    }
    return out;
}

}  // namespace natbound
