#include "natbound/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>

#include "natbound/hydro.hpp"

namespace natbound {

namespace {

/// h_n and h_{n-1} by the normalised recurrence
/// h_{k+1} = sqrt(2/(k+1)) x h_k - sqrt(k/(k+1)) h_{k-1}, h_0 = pi^{-1/4}.
template <class T>
std::pair<T, T> hermite_pair(int n, const T& x) {
    const double h0c = std::pow(std::numbers::pi, -0.25);
    T prev = T(0.0);
    T cur = T(h0c);
    for (int k = 0; k < n; ++k) {
        T next = std::sqrt(2.0 / (k + 1.0)) * x * cur - std::sqrt(k / (k + 1.0)) * prev;
        prev = cur;
        cur = next;
    }
    return {cur, prev};
}

double simpson_fn(const ScalarFn& f, double a, double b, double h_target) {
    auto n = static_cast<std::size_t>(std::ceil((b - a) / h_target)) + 1;
    if (n < 3) n = 3;
    if (n % 2 == 0) ++n;
    const UniformGrid g(a, b, n);
    return integrate(GridField::sample(g, f));
}

void check_node_distance(const std::vector<double>& nodes, double x) {
    for (double n : nodes) {
        if (std::abs(x - n) < 1e-9) {
            throw DomainError("drift evaluated within 1e-9 of the node " + std::to_string(n) +
                              " (x=" + std::to_string(x) + ")");
        }
    }
}

/// psi'/psi on one nodal component, from the Riccati equation
/// w' = (V - epsilon)/D - w^2 integrated from both ends toward the anchor,
/// the stable direction for an eigenfunction.
class RiccatiLogDerivative {
public:
    RiccatiLogDerivative(JetFn V, double D, double eps, ExtendedReal l, ExtendedReal r, double lo_trunc,
                         double hi_trunc, double anchor)
        : V_(std::move(V)), D_(D), eps_(eps), l_(l), r_(r), lo_(lo_trunc), hi_(hi_trunc), anchor_(anchor) {
        build_left();
        build_right();
    }

    Jet operator()(double x) const {
        const double w = value(x);
        const Jet v = V_(Jet::variable(x));
        const double vr = (v.v - eps_) / D_;
        const double vr1 = v.d1 / D_;
        const double w1 = vr - w * w;
        return {w, w1, vr1 - 2.0 * w * w1};
    }

private:
    static constexpr double kMaxStep = 2e-3;

    double vr(double x) const { return (V_(Jet(x)).v - eps_) / D_; }
    double rhs(double x, double w) const { return vr(x) - w * w; }

    double rk4(double x, double w, double h) const {
        const double k1 = rhs(x, w);
        const double k2 = rhs(x + 0.5 * h, w + 0.5 * h * k1);
        const double k3 = rhs(x + 0.5 * h, w + 0.5 * h * k2);
        const double k4 = rhs(x + h, w + h * k3);
        return w + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
    }

    double start_offset(double end) const { return std::min(1e-3, std::abs(anchor_ - end) / 10.0); }

    void build_left() {
        double x;
        double w;
        if (l_.is_finite()) {
            const double d0 = start_offset(l_.value());
            x = l_.value() + d0;
            w = 1.0 / d0 + vr(l_.value()) * d0 / 3.0;
        } else {
            x = lo_;
            w = std::sqrt(std::max(vr(x), 0.0));
        }
        left_x_.push_back(x);
        left_w_.push_back(w);
        while (x < anchor_) {
            double h = kMaxStep;
            if (l_.is_finite()) h = std::min(h, 0.05 * (x - l_.value()));
            h = std::min(h, anchor_ - x);
            w = rk4(x, w, h);
            x += h;
            left_x_.push_back(x);
            left_w_.push_back(w);
        }
    }

    void build_right() {
        double x;
        double w;
        if (r_.is_finite()) {
            const double d0 = start_offset(r_.value());
            x = r_.value() - d0;
            w = -1.0 / d0 - vr(r_.value()) * d0 / 3.0;
        } else {
            x = hi_;
            w = -std::sqrt(std::max(vr(x), 0.0));
        }
        std::vector<double> xs{x};
        std::vector<double> ws{w};
        while (x > anchor_) {
            double h = kMaxStep;
            if (r_.is_finite()) h = std::min(h, 0.05 * (r_.value() - x));
            h = std::min(h, x - anchor_);
            w = rk4(x, w, -h);
            x -= h;
            xs.push_back(x);
            ws.push_back(w);
        }
        right_x_.assign(xs.rbegin(), xs.rend());
        right_w_.assign(ws.rbegin(), ws.rend());
    }

    double from_table(const std::vector<double>& xs, const std::vector<double>& ws, double x) const {
        auto it = std::lower_bound(xs.begin(), xs.end(), x);
        std::size_t j = static_cast<std::size_t>(it - xs.begin());
        if (j == xs.size()) j = xs.size() - 1;
        if (j > 0 && std::abs(xs[j - 1] - x) < std::abs(xs[j] - x)) --j;
        double w = ws[j];
        const double span = x - xs[j];
        if (span == 0.0) return w;
        const double h = span / 4.0;
        double xc = xs[j];
        for (int k = 0; k < 4; ++k) {
            w = rk4(xc, w, h);
            xc += h;
        }
        return w;
    }

    double value(double x) const {
        if (l_.is_finite()) {
            const double d = x - l_.value();
            if (d < left_x_.front() - l_.value()) return 1.0 / d + vr(l_.value()) * d / 3.0;
        } else if (x < lo_) {
            return std::sqrt(std::max(vr(x), 0.0));
        }
        if (r_.is_finite()) {
            const double d = r_.value() - x;
            if (d < r_.value() - right_x_.back()) return -1.0 / d - vr(r_.value()) * d / 3.0;
        } else if (x > hi_) {
            return -std::sqrt(std::max(vr(x), 0.0));
        }
        return x <= anchor_ ? from_table(left_x_, left_w_, x) : from_table(right_x_, right_w_, x);
    }

    JetFn V_;
    double D_;
    double eps_;
    ExtendedReal l_;
    ExtendedReal r_;
    double lo_;
    double hi_;
    double anchor_;
    std::vector<double> left_x_, left_w_, right_x_, right_w_;
};

/// Component boundaries of a state: domain endpoints with nodes in between.
std::vector<std::pair<ExtendedReal, ExtendedReal>> components(const EigenState& s) {
    std::vector<std::pair<ExtendedReal, ExtendedReal>> out;
    ExtendedReal left = s.domain.r1();
    for (double n : s.nodes) {
        out.emplace_back(left, ExtendedReal(n));
        left = ExtendedReal(n);
    }
    out.emplace_back(left, s.domain.r2());
    return out;
}

/// Grid index of the largest |psi| inside (l, r).
double anchor_from_samples(const GridField& psi, const ExtendedReal& l, const ExtendedReal& r) {
    const UniformGrid& g = psi.grid();
    double best = -1.0;
    double where = 0.5 * (g.lo() + g.hi());
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double x = g[i];
        if ((l.is_finite() && x <= l.value()) || (r.is_finite() && x >= r.value())) continue;
        if (std::abs(psi[i]) > best) {
            best = std::abs(psi[i]);
            where = x;
        }
    }
    if (best < 0.0) throw NumericalError("nodal component contains no grid point");
    return where;
}

double analytic_anchor(const ExtendedReal& l, const ExtendedReal& r) {
    if (l.is_finite() && r.is_finite()) return 0.5 * (l.value() + r.value());
    if (l.is_finite()) return l.value() + 1.0;
    if (r.is_finite()) return r.value() - 1.0;
    return 0.0;
}

Drift grid_log_derivative(const GridField& psi, const std::vector<double>& nodes) {
    const UniformGrid& g = psi.grid();
    const auto dpsi = derivative(psi.values(), g.spacing(), 1);
    std::vector<double> w(g.size(), 0.0);
    for (std::size_t i = 0; i < g.size(); ++i) {
        w[i] = std::abs(psi[i]) > 1e-300 ? dpsi[i] / psi[i] : 0.0;
    }
    auto wf = std::make_shared<GridField>(g, w);
    auto w1 = std::make_shared<GridField>(g, derivative(w, g.spacing(), 1));
    auto w2 = std::make_shared<GridField>(g, derivative(w, g.spacing(), 2));
    auto value = [wf, nodes](double x) {
        check_node_distance(nodes, x);
        return wf->interpolate(x);
    };
    auto jet = [wf, w1, w2, nodes](const Jet& x) {
        check_node_distance(nodes, x.v);
        return compose(x, wf->interpolate(x.v), w1->interpolate(x.v), w2->interpolate(x.v));
    };
    return Drift(value, jet);
}

/// Finds sorted interior nodes from grid samples by sign changes, ignoring
/// sign flips of negligible tails.
std::vector<double> sample_nodes(const std::vector<double>& psi, const UniformGrid& g) {
    double peak = 0.0;
    for (double v : psi) peak = std::max(peak, std::abs(v));
    const double thresh = 1e-8 * peak;
    std::vector<double> nodes;
    for (std::size_t i = 1; i + 2 < psi.size(); ++i) {
        const double a = psi[i];
        const double b = psi[i + 1];
        if (std::max(std::abs(a), std::abs(b)) < thresh) continue;
        if (a == 0.0 && psi[i - 1] * b < 0.0) {
            nodes.push_back(g[i]);
        } else if (a * b < 0.0) {
            nodes.push_back(g[i] + g.spacing() * a / (a - b));
        }
    }
    return nodes;
}

struct TridiagSolution {
    std::vector<double> eigenvalues;
    std::vector<std::vector<double>> vectors;  ///< interior values
};

int sturm_count(const std::vector<double>& d, double e2, double lambda) {
    int count = 0;
    double q = 1.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        q = d[i] - lambda - (i == 0 ? 0.0 : e2 / q);
        if (q == 0.0) q = -1e-300;
        if (q < 0.0) ++count;
    }
    return count;
}

std::vector<double> lowest_eigenvalues(const std::vector<double>& d, double e, int k_max) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (double v : d) {
        lo = std::min(lo, v - 2.0 * std::abs(e));
        hi = std::max(hi, v + 2.0 * std::abs(e));
    }
    std::vector<double> out;
    for (int k = 0; k <= k_max; ++k) {
        double a = lo;
        double b = hi;
        for (int it = 0; it < 200; ++it) {
            const double m = 0.5 * (a + b);
            if (m <= a || m >= b) break;
            (sturm_count(d, e * e, m) >= k + 1 ? b : a) = m;
        }
        out.push_back(0.5 * (a + b));
    }
    return out;
}

std::vector<double> inverse_iteration(const std::vector<double>& d, double e, double lambda) {
    const std::size_t m = d.size();
    const double shift = lambda + 1e-12 * std::max(1.0, std::abs(lambda));
    std::vector<double> x(m);
    for (std::size_t i = 0; i < m; ++i) {
        x[i] = 1.0 + 0.5 * std::sin(1.3 * static_cast<double>(i)) + static_cast<double>(i) / static_cast<double>(m);
    }
    std::vector<double> c(m), y(m);
    for (int it = 0; it < 4; ++it) {
        // Thomas algorithm on (T - shift I) y = x.
        double piv = d[0] - shift;
        if (piv == 0.0) piv = 1e-300;
        c[0] = e / piv;
        y[0] = x[0] / piv;
        for (std::size_t i = 1; i < m; ++i) {
            piv = d[i] - shift - e * c[i - 1];
            if (piv == 0.0) piv = 1e-300;
            c[i] = e / piv;
            y[i] = (x[i] - e * y[i - 1]) / piv;
        }
        for (std::size_t i = m - 1; i-- > 0;) y[i] -= c[i] * y[i + 1];
        double nrm = 0.0;
        for (double v : y) nrm = std::max(nrm, std::abs(v));
        if (!(nrm > 0.0) || !std::isfinite(nrm)) throw NumericalError("inverse iteration failed");
        for (std::size_t i = 0; i < m; ++i) x[i] = y[i] / nrm;
    }
    return x;
}

std::vector<double> eigenvalues_only(const std::vector<double>& v, double h, double D, int n_max) {
    std::vector<double> d(v.size() - 2);
    for (std::size_t i = 1; i + 1 < v.size(); ++i) d[i - 1] = 2.0 * D / (h * h) + v[i];
    return lowest_eigenvalues(d, -D / (h * h), n_max);
}

std::vector<EigenState> solve_states(const UniformGrid& grid, const std::vector<double>& v, double D, int n_max,
                                     const SturmLiouvilleOptions& opts,
                                     const std::function<std::vector<double>(const UniformGrid&)>& coarse_values,
                                     const JetFn& potential) {
    if (!(D > 0.0)) throw DomainError("diffusion coefficient must be positive");
    if (n_max < 0) throw DomainError("n_max must be non-negative");
    const std::size_t n = grid.size();
    if (n < static_cast<std::size_t>(n_max) + 5) throw DomainError("grid has too few points for n_max");
    for (double x : v) {
        if (!std::isfinite(x)) throw DomainError("potential is not finite on the grid");
    }
    const double h = grid.spacing();
    std::vector<double> d(n - 2);
    for (std::size_t i = 1; i + 1 < n; ++i) d[i - 1] = 2.0 * D / (h * h) + v[i];
    const double e = -D / (h * h);
    const auto eig = lowest_eigenvalues(d, e, n_max);

    const double edge = std::min(v.front(), v.back());
    if (!(edge > eig.back())) {
        throw DomainError("potential is not confining on the grid: edge value " + std::to_string(edge) +
                          " does not exceed epsilon_" + std::to_string(n_max) + " = " +
                          std::to_string(eig.back()));
    }

    if (opts.coarse_check) {
        const std::size_t nc = (n + 1) / 2;
        if (nc >= static_cast<std::size_t>(n_max) + 5) {
            const UniformGrid cg(grid.lo(), grid.hi(), nc);
            const auto ceig = eigenvalues_only(coarse_values(cg), cg.spacing(), D, n_max);
            const double ratio = (cg.spacing() / h) * (cg.spacing() / h);
            for (int k = 0; k <= n_max; ++k) {
                const double est = std::abs(eig[k] - ceig[k]) / (ratio - 1.0);
                if (est > opts.coarse_tol * std::max(1.0, std::abs(eig[k]))) {
                    throw NumericalError("grid too coarse: eigenvalue " + std::to_string(k) + " moves by " +
                                      std::to_string(std::abs(eig[k] - ceig[k])) + " under h -> 2h");
                }
            }
        }
    }

    const auto w = quadrature_weights(grid);
    std::vector<EigenState> out;
    for (int k = 0; k <= n_max; ++k) {
        const auto inner = inverse_iteration(d, e, eig[k]);
        std::vector<double> psi(n, 0.0);
        std::copy(inner.begin(), inner.end(), psi.begin() + 1);
        double norm = 0.0;
        double peak = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            norm += w[i] * psi[i] * psi[i];
            peak = std::max(peak, std::abs(psi[i]));
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (std::abs(psi[i]) > 1e-3 * peak) {
                if (psi[i] < 0.0) norm = -norm;
                break;
            }
        }
        const double scale = (norm < 0.0 ? -1.0 : 1.0) / std::sqrt(std::abs(norm));
        for (double& p : psi) p *= scale;

        EigenState s;
        s.n = k;
        s.D = D;
        s.epsilon = eig[k];
        s.nodes = sample_nodes(psi, grid);
        if (s.nodes.size() != static_cast<std::size_t>(k)) {
            throw NumericalError("state " + std::to_string(k) + " has " + std::to_string(s.nodes.size()) +
                                 " sign changes");
        }
        auto field = std::make_shared<GridField>(grid, psi);
        s.samples = *field;
        s.psi = [field](double x) {
            const UniformGrid& g = field->grid();
            if (x < g.lo() || x > g.hi()) return 0.0;
            return field->interpolate(x);
        };
        s.potential = potential;
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace

double hermite_poly(int n, double x) {
    if (n < 0) throw DomainError("Hermite index must be non-negative");
    return hermite_pair(n, x).first;
}

EigenState hermite_state(int n) {
    if (n < 0 || n > 12) throw DomainError("hermite_state supports 0 <= n <= 12, got " + std::to_string(n));
    EigenState s;
    s.n = n;
    s.omega_freq = 1.0;
    s.D = 0.5;
    s.epsilon = n + 0.5;
    s.psi = [n](double x) { return hermite_pair(n, x).first * std::exp(-0.5 * x * x); };
    s.log_abs_psi = [n](double x) { return std::log(std::abs(hermite_pair(n, x).first)) - 0.5 * x * x; };
    s.log_derivative = [n](const Jet& x) -> Jet {
        if (n == 0) return -x;
        const auto [h, hm] = hermite_pair(n, x);
        return std::sqrt(2.0 * n) * hm / h - x;
    };

    // Zeros of h_n: sign changes on a fine scan, refined by bisection.
    const double reach = std::sqrt(2.0 * n + 1.0) + 1.0;
    const double step = 1e-3;
    const auto m = static_cast<int>(std::ceil(reach / step));
    double prev_x = -m * step;
    double prev_v = hermite_poly(n, prev_x);
    for (int i = -m + 1; i <= m; ++i) {
        const double x = i * step;
        const double v = hermite_poly(n, x);
        if (v == 0.0) {
            s.nodes.push_back(x);
        } else if (prev_v != 0.0 && prev_v * v < 0.0) {
            double a = prev_x;
            double b = x;
            double fa = prev_v;
            while (b - a > 1e-13) {
                const double c = 0.5 * (a + b);
                const double fc = hermite_poly(n, c);
                if (fc == 0.0) {
                    a = b = c;
                    break;
                }
                if ((fa < 0.0) == (fc < 0.0)) {
                    a = c;
                    fa = fc;
                } else {
                    b = c;
                }
            }
            s.nodes.push_back(0.5 * (a + b));
        }
        prev_x = x;
        prev_v = v;
    }
    // Exact zeros where they are known in closed form.
    if (n == 1) s.nodes = {0.0};
    if (n == 2) s.nodes = {-std::sqrt(0.5), std::sqrt(0.5)};
    if (n == 3) s.nodes = {-std::sqrt(1.5), 0.0, std::sqrt(1.5)};
    if (s.nodes.size() != static_cast<std::size_t>(n)) {
        throw NumericalError("found " + std::to_string(s.nodes.size()) + " zeros of h_" + std::to_string(n));
    }
    return s;
}

Drift drift_from_state(const EigenState& state) {
    const auto nodes = state.nodes;
    if (state.log_derivative) {
        auto lj = state.log_derivative;
        auto value = [lj, nodes](double x) {
            check_node_distance(nodes, x);
            return lj(Jet(x)).v;
        };
        auto jet = [lj, nodes](const Jet& x) {
            check_node_distance(nodes, x.v);
            return lj(x);
        };
        return Drift(value, jet);
    }
    if (state.samples && state.potential) {
        const GridField& psi = *state.samples;
        std::vector<std::shared_ptr<RiccatiLogDerivative>> parts;
        const auto comps = components(state);
        for (const auto& [l, r] : comps) {
            const double anchor = anchor_from_samples(psi, l, r);
            parts.push_back(std::make_shared<RiccatiLogDerivative>(state.potential, state.D, state.epsilon, l, r,
                                                                   psi.grid().lo(), psi.grid().hi(), anchor));
        }
        auto domain = state.domain;
        auto pick = [parts, nodes, domain](double x) -> const RiccatiLogDerivative& {
            if (!domain.contains(x)) throw DomainError("drift evaluated outside " + domain.to_string());
            check_node_distance(nodes, x);
            const auto idx = static_cast<std::size_t>(std::upper_bound(nodes.begin(), nodes.end(), x) - nodes.begin());
            return *parts[idx];
        };
        auto value = [pick](double x) { return pick(x)(x).v; };
        auto jet = [pick](const Jet& x) {
            const Jet w = pick(x.v)(x.v);
            return compose(x, w.v, w.d1, w.d2);
        };
        return Drift(value, jet);
    }
    if (state.samples) return grid_log_derivative(*state.samples, nodes);
    throw DomainError("state carries neither an analytic form nor samples");
}

ScalarFn omega_from_drift(const Drift& b, double D) {
    if (!(D > 0.0)) throw DomainError("diffusion coefficient must be positive");
    return [b, D](double x) {
        const Jet j = b.jet(x);
        return 0.5 * j.v * j.v + D * j.d1;
    };
}

JetFn omega_jet_from_drift(const Drift& b, double D) {
    if (!(D > 0.0)) throw DomainError("diffusion coefficient must be positive");
    return [b, D](const Jet& x) {
        const Jet j = b.jet(x.v);
        return compose(x, 0.5 * j.v * j.v + D * j.d1, j.v * j.d1 + D * j.d2, 0.0);
    };
}

DiffusionSpec EquivalenceClassMember::spec() const {
    DiffusionSpec s;
    s.D = D;
    s.drift = drift;
    s.domain = interval;
    s.drift_potential = drift_potential;
    return s;
}

std::vector<EquivalenceClassMember> nodal_decomposition(const EigenState& state, const DecompositionOptions& opts) {
    const Drift w = drift_from_state(state);
    const double D = state.D;
    // Member drift b = 2D psi'/psi.
    const Drift b([w, D](double x) { return 2.0 * D * w(x); },
                  [w, D](const Jet& x) {
                      const Jet j = w.jet(x.v);
                      return compose(x, 2.0 * D * j.v, 2.0 * D * j.d1, 2.0 * D * j.d2);
                  });
    const ScalarFn omega = omega_from_drift(b, D);
    const auto comps = components(state);

    // Integration range for |psi|^2 on infinite components.
    double lo_int;
    double hi_int;
    if (state.samples) {
        lo_int = state.samples->grid().lo();
        hi_int = state.samples->grid().hi();
    } else {
        const double reach = std::sqrt(2.0 * state.n + 1.0) + 12.0;
        lo_int = -reach;
        hi_int = reach;
    }
    const ScalarFn psi = state.psi;
    const ScalarFn psi2 = [psi](double x) {
        const double p = psi(x);
        return p * p;
    };

    std::vector<EquivalenceClassMember> out;
    for (std::size_t c = 0; c < comps.size(); ++c) {
        const auto& [l, r] = comps[c];
        EquivalenceClassMember m;
        m.n = state.n;
        m.component = c;
        m.interval = Interval(l, r);
        m.D = D;
        m.drift = b;
        m.omega_potential = omega;
        m.epsilon = state.epsilon;
        if (state.log_abs_psi) m.drift_potential = *state.log_abs_psi;
        const double a = l.is_finite() ? l.value() : lo_int;
        const double z = r.is_finite() ? r.value() : hi_int;
        m.component_mass = simpson_fn(psi2, a, z, 1e-3);
        if (!(m.component_mass > 0.0)) throw NumericalError("nodal component carries no mass");
        const double mass = m.component_mass;
        const Interval iv = m.interval;
        m.density = [psi2, mass, iv](double x) { return iv.contains(x) ? psi2(x) / mass : 0.0; };
        m.anchor = state.samples ? anchor_from_samples(*state.samples, l, r) : analytic_anchor(l, r);

        if (opts.classify) {
            const std::string name = "component " + std::to_string(c) + " " + m.interval.to_string() +
                                     " of state " + std::to_string(state.n);
            for (const ExtendedReal& end : {l, r}) {
                BoundaryClass bc;
                try {
                    bc = classify_boundary(m.spec(), end, m.anchor, opts.integrability);
                } catch (const InconclusiveError& e) {
                    throw InconclusiveError(name + ": " + e.what());
                }
                if (bc.kind == BoundaryKind::NotNatural) {
                    throw InvariantError(name + ": endpoint " + end.to_string() + " is not natural");
                }
                m.boundaries.push_back(bc);
            }
        }
        out.push_back(std::move(m));
    }
    return out;
}

std::vector<EigenState> sturm_liouville_solve(const GridField& omega_potential, double D, int n_max,
                                              const SturmLiouvilleOptions& opts) {
    if (!(D > 0.0)) throw DomainError("diffusion coefficient must be positive");
    const UniformGrid& g = omega_potential.grid();
    std::vector<double> v(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) v[i] = omega_potential[i] / (2.0 * D);
    auto coarse = [&](const UniformGrid& cg) {
        std::vector<double> cv(cg.size());
        for (std::size_t i = 0; i < cg.size(); ++i) cv[i] = omega_potential.interpolate(cg[i]) / (2.0 * D);
        return cv;
    };
    return solve_states(g, v, D, n_max, opts, coarse, nullptr);
}

std::vector<EigenState> sturm_liouville_solve(const JetFn& potential, const UniformGrid& grid, double D, int n_max,
                                              const SturmLiouvilleOptions& opts) {
    auto sample = [&](const UniformGrid& g) {
        std::vector<double> v(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) v[i] = potential(Jet(g[i])).v;
        return v;
    };
    return solve_states(grid, sample(grid), D, n_max, opts, sample, potential);
}

std::vector<EquivalenceClassMember> equivalence_class(const DiffusionSpec& reference, int n_max,
                                                      const EquivalenceOptions& opts) {
    reference.validate();
    if (!reference.drift_potential) throw InvariantError("reference drift needs a potential Phi");
    const double D = reference.D;
    const JetFn omega = omega_jet_from_drift(reference.drift, D);
    const JetFn potential = [omega, D](const Jet& x) {
        const Jet o = omega(x);
        return Jet(o.v / (2.0 * D), o.d1 / (2.0 * D), o.d2 / (2.0 * D));
    };
    const auto [lo, hi] = truncate(reference.domain, opts.cutoff);
    const UniformGrid grid(lo, hi, opts.points);
    auto states = sturm_liouville_solve(potential, grid, D, n_max, opts.solver);

    const MaskedField ref_acc = acceleration_field(reference, grid);
    std::vector<EquivalenceClassMember> out;
    for (auto& s : states) {
        s.domain = reference.domain;
        auto members = nodal_decomposition(s, opts.decomposition);
        for (auto& m : members) {
            const MaskedField acc = acceleration_field(m.spec(), grid);
            for (std::size_t i = 0; i < grid.size(); ++i) {
                if (!acc.mask[i] || !ref_acc.mask[i]) continue;
                const double diff = std::abs(acc.field[i] - ref_acc.field[i]);
                if (!(diff <= opts.acceleration_tol)) {
                    throw InvariantError("acceleration field of state " + std::to_string(m.n) + " component " +
                                         std::to_string(m.component) + " differs from the reference by " +
                                         std::to_string(diff) + " at x=" + std::to_string(grid[i]));
                }
            }
            out.push_back(std::move(m));
        }
    }
    return out;
}

}  // namespace natbound
