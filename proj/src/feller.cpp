#include "natbound/feller.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace natbound {

std::string to_string(BoundaryKind k) {
    switch (k) {
        case BoundaryKind::NaturalRepulsive: return "NaturalRepulsive";
        case BoundaryKind::NaturalAttractive: return "NaturalAttractive";
        case BoundaryKind::NotNatural: return "NotNatural";
    }
    return "?";
}

std::string to_string(Integrability v) {
    switch (v) {
        case Integrability::Integrable: return "integrable";
        case Integrability::Divergent: return "divergent";
        case Integrability::NotTested: return "not-tested";
    }
    return "?";
}

std::string to_string(TransmissionKind k) {
    switch (k) {
        case TransmissionKind::Blocked: return "Blocked";
        case TransmissionKind::Transmitting: return "Transmitting";
        case TransmissionKind::Indeterminate: return "Indeterminate";
    }
    return "?";
}

namespace {

// Running quantities along a path away from x0:
//   log_l1 = -log L1(x)          (= (1/D) int b, or 2(Phi(x) - Phi(x0)))
//   inv    = int_{x0}^{x} dz / L1(z)
//   s1     = int |L1|,  s2 = int |L2|   (measured in |dx|)
struct HilleState {
    double log_inv_l1 = 0.0;
    double inv = 0.0;
    double s1 = 0.0;
    double s2 = 0.0;
};

class HilleMarcher {
public:
    HilleMarcher(const DiffusionSpec& spec, double x0) : spec_(spec), x0_(x0) {
        if (spec.drift_potential) phi0_ = (*spec.drift_potential)(x0);
    }

    // -log L1 at x, either closed form (needs potential) or from the carried
    // integral of b.
    double log_inv_l1(double x, double carried) const {
        if (spec_.drift_potential) return 2.0 * ((*spec_.drift_potential)(x) - phi0_);
        return carried;
    }

    double drift_over_d(double x) const {
        const double b = spec_.drift(x);
        if (!std::isfinite(b)) {
            throw DomainError("drift is not finite at x=" + std::to_string(x) +
                              " inside the integration range");
        }
        return b / spec_.D;
    }

    // d/dx of the state, with `dir` = sign of the marching direction.
    std::array<double, 4> rhs(double x, const std::array<double, 4>& y, double dir) const {
        const double g = log_inv_l1(x, y[0]);
        const double inv_l1 = std::exp(g);
        const double l1 = std::exp(-g);
        std::array<double, 4> d{};
        d[0] = spec_.drift_potential ? 0.0 : drift_over_d(x);
        d[1] = inv_l1;
        d[2] = dir * std::abs(l1);
        d[3] = dir * std::abs(l1 * y[1]);
        return d;
    }

    // Classical RK4 from a to b in n steps; stops early and returns false once
    // either absolute integral exceeds cap.
    bool march(double a, double b, int n, HilleState& st, double cap) const {
        const double dir = (b >= a) ? 1.0 : -1.0;
        const double h = (b - a) / n;
        std::array<double, 4> y{st.log_inv_l1, st.inv, st.s1, st.s2};
        auto axpy = [](const std::array<double, 4>& u, double s, const std::array<double, 4>& v) {
            return std::array<double, 4>{u[0] + s * v[0], u[1] + s * v[1], u[2] + s * v[2],
                                         u[3] + s * v[3]};
        };
        for (int i = 0; i < n; ++i) {
            const double x = a + i * h;
            const auto k1 = rhs(x, y, dir);
            const auto k2 = rhs(x + 0.5 * h, axpy(y, 0.5 * h, k1), dir);
            const auto k3 = rhs(x + 0.5 * h, axpy(y, 0.5 * h, k2), dir);
            const auto k4 = rhs(x + h, axpy(y, h, k3), dir);
            for (int j = 0; j < 4; ++j) y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
            if (y[2] > cap || y[3] > cap || !std::isfinite(y[2])) {
                st = {y[0], y[1], y[2], y[3]};
                return false;
            }
        }
        // The potential form tracks -log L1 in closed form.
        st = {spec_.drift_potential ? log_inv_l1(b, 0.0) : y[0], y[1], y[2], y[3]};
        return true;
    }

private:
    const DiffusionSpec& spec_;
    double x0_;
    double phi0_ = 0.0;
};

void require_inside(const DiffusionSpec& spec, double x0, double x) {
    if (!spec.domain.contains(x0) || !spec.domain.contains(x)) {
        throw DomainError("range [" + std::to_string(std::min(x0, x)) + ", " +
                          std::to_string(std::max(x0, x)) + "] is not inside the domain " +
                          spec.domain.to_string());
    }
}

constexpr int kDirectSteps = 4000;

}  // namespace

double hille_l1(const DiffusionSpec& spec, double x0, double x) {
    require_inside(spec, x0, x);
    if (x == x0) return 1.0;
    HilleMarcher m(spec, x0);
    if (spec.drift_potential) return std::exp(-m.log_inv_l1(x, 0.0));
    HilleState st;
    m.march(x0, x, kDirectSteps, st, std::numeric_limits<double>::infinity());
    return std::exp(-st.log_inv_l1);
}

double hille_l2(const DiffusionSpec& spec, double x0, double x) {
    require_inside(spec, x0, x);
    if (x == x0) return 0.0;
    HilleMarcher m(spec, x0);
    HilleState st;
    m.march(x0, x, kDirectSteps, st, std::numeric_limits<double>::infinity());
    if (!std::isfinite(st.inv)) throw RangeError("1/L1 overflows on the integration range");
    const double l2 = std::exp(-st.log_inv_l1) * st.inv;
    if (!std::isfinite(l2)) throw RangeError("L2 overflows at x=" + std::to_string(x));
    return l2;
}

namespace {

// Apply the stopping rules to the running totals. Returns NotTested while the
// sequence is still undecided.
Integrability judge(const std::vector<double>& totals, const IntegrabilityOptions& o,
                    bool final_step, std::string& rule) {
    const std::size_t k = totals.size() - 1;
    if (totals[k] > o.divergence_cap || !std::isfinite(totals[k])) {
        rule = "running total exceeded cap";
        return Integrability::Divergent;
    }
    if (k >= static_cast<std::size_t>(o.converged_run)) {
        bool small = true;
        for (std::size_t j = k + 1 - o.converged_run; j <= k; ++j) {
            const double inc = totals[j] - totals[j - 1];
            if (!(std::abs(inc) < o.increment_tol * (1.0 + std::abs(totals[j])))) small = false;
        }
        if (small) {
            rule = "increments below tolerance";
            return Integrability::Integrable;
        }
    }
    if (!final_step) return Integrability::NotTested;
    if (k < 4) return Integrability::NotTested;
    // Geometric cutoffs turn power-law tails into geometric increment
    // sequences: ratio < 1 converges, ratio >= 1 diverges.
    bool grows = true;
    bool decays = true;
    for (std::size_t j = k - 2; j <= k; ++j) {
        const double prev = totals[j - 1] - totals[j - 2];
        const double cur = totals[j] - totals[j - 1];
        if (!(prev > 0.0)) {
            grows = false;
            if (cur > 0.0) decays = false;
            continue;
        }
        const double q = cur / prev;
        if (!(q >= o.ratio_diverging)) grows = false;
        if (!(q <= o.ratio_converging)) decays = false;
    }
    if (grows) {
        rule = "increments not decaying";
        return Integrability::Divergent;
    }
    if (decays) {
        rule = "geometric tail";
        return Integrability::Integrable;
    }
    return Integrability::NotTested;
}

}  // namespace

BoundaryClass classify_boundary(const DiffusionSpec& spec, const ExtendedReal& endpoint, double x0,
                                const IntegrabilityOptions& opts) {
    if (!spec.domain.contains(x0)) {
        throw DomainError("x0=" + std::to_string(x0) + " is not interior to " + spec.domain.to_string());
    }
    if (!(endpoint == spec.domain.r1()) && !(endpoint == spec.domain.r2())) {
        throw DomainError("endpoint " + endpoint.to_string() + " is not an endpoint of " +
                          spec.domain.to_string());
    }
    const bool toward_right = endpoint == spec.domain.r2();
    const double dir = toward_right ? 1.0 : -1.0;

    // Cutoff points approaching the endpoint.
    std::vector<double> cut;
    std::vector<double> dist;
    if (endpoint.is_finite()) {
        const double e = endpoint.value();
        const double d0 = std::abs(x0 - e);
        for (int k = 0; k < opts.steps; ++k) {
            const double eps = d0 * std::ldexp(1.0, -(k + 1));
            cut.push_back(e - dir * eps);
            dist.push_back(eps);
        }
    } else {
        const double l0 = std::max(1.0, 2.0 * std::abs(x0));
        for (int k = 0; k < opts.steps; ++k) {
            const double lk = l0 * std::ldexp(1.0, k);
            cut.push_back(dir * lk);
            dist.push_back(lk);
        }
    }

    BoundaryClass out;
    out.endpoint = endpoint;
    out.x0 = x0;

    HilleMarcher m(spec, x0);
    HilleState st;
    double from = x0;
    IntegrabilityTrace t1;
    IntegrabilityTrace t2;
    std::vector<double> totals1;
    std::vector<double> totals2;
    bool l1_done = false;
    bool l2_done = false;
    for (std::size_t k = 0; k < cut.size() && !(l1_done && l2_done); ++k) {
        const bool finite = m.march(from, cut[k], opts.substeps, st, opts.divergence_cap);
        from = cut[k];
        const bool last = k + 1 == cut.size();
        if (!l1_done) {
            totals1.push_back(st.s1);
            t1.cutoffs.push_back(dist[k]);
            t1.totals.push_back(st.s1);
            const auto v = judge(totals1, opts, last, t1.rule);
            if (v != Integrability::NotTested) {
                t1.verdict = v;
                l1_done = true;
            }
        }
        if (!l2_done) {
            totals2.push_back(st.s2);
            t2.cutoffs.push_back(dist[k]);
            t2.totals.push_back(st.s2);
            const auto v = judge(totals2, opts, last, t2.rule);
            if (v != Integrability::NotTested) {
                t2.verdict = v;
                l2_done = true;
            }
        }
        // L2 only matters when L1 is integrable.
        if (l1_done && t1.verdict == Integrability::Divergent) break;
        if (!finite && l1_done && l2_done) break;
        if (!finite) {
            // Only one of the integrals blew past the cap; the other cannot be
            // continued past an overflowing state.
            if (!l1_done && st.s1 > opts.divergence_cap) {
                t1.verdict = Integrability::Divergent;
                t1.rule = "running total exceeded cap";
                l1_done = true;
            }
            if (!l2_done && st.s2 > opts.divergence_cap) {
                t2.verdict = Integrability::Divergent;
                t2.rule = "running total exceeded cap";
                l2_done = true;
            }
            if (!l1_done || (t1.verdict == Integrability::Integrable && !l2_done)) {
                throw InconclusiveError("integrability test toward " + endpoint.to_string() +
                                        " overflowed before deciding");
            }
            break;
        }
    }

    if (!l1_done) {
        throw InconclusiveError("integral of L1 toward " + endpoint.to_string() +
                                " neither converged nor diverged");
    }
    if (t1.verdict == Integrability::Divergent) {
        t2 = IntegrabilityTrace{};
        out.kind = BoundaryKind::NaturalRepulsive;
    } else {
        if (!l2_done) {
            throw InconclusiveError("integral of L2 toward " + endpoint.to_string() +
                                    " neither converged nor diverged");
        }
        out.kind = t2.verdict == Integrability::Divergent ? BoundaryKind::NaturalAttractive
                                                          : BoundaryKind::NotNatural;
    }
    out.l1 = std::move(t1);
    out.l2 = std::move(t2);
    return out;
}

namespace {

// Least squares for log rho = c + alpha log r + beta s + gamma s^2 with
// s = r / r_max, via modified Gram-Schmidt.
SideFit fit_side(const std::vector<double>& r, const std::vector<double>& logrho) {
    constexpr std::size_t p = 4;
    const std::size_t m = r.size();
    const double rmax = *std::max_element(r.begin(), r.end());
    std::vector<std::array<double, p>> a(m);
    for (std::size_t i = 0; i < m; ++i) {
        const double s = r[i] / rmax;
        a[i] = {1.0, std::log(r[i]), s, s * s};
    }
    // Columns q_j and upper-triangular R.
    std::array<std::vector<double>, p> q;
    std::array<std::array<double, p>, p> rr{};
    for (std::size_t j = 0; j < p; ++j) {
        q[j].resize(m);
        for (std::size_t i = 0; i < m; ++i) q[j][i] = a[i][j];
        for (std::size_t k = 0; k < j; ++k) {
            double dot = 0.0;
            for (std::size_t i = 0; i < m; ++i) dot += q[k][i] * q[j][i];
            rr[k][j] = dot;
            for (std::size_t i = 0; i < m; ++i) q[j][i] -= dot * q[k][i];
        }
        double nrm = 0.0;
        for (std::size_t i = 0; i < m; ++i) nrm += q[j][i] * q[j][i];
        nrm = std::sqrt(nrm);
        if (!(nrm > 0.0)) throw NumericalError("degenerate exponent fit window");
        rr[j][j] = nrm;
        for (std::size_t i = 0; i < m; ++i) q[j][i] /= nrm;
    }
    std::array<double, p> qty{};
    for (std::size_t j = 0; j < p; ++j) {
        for (std::size_t i = 0; i < m; ++i) qty[j] += q[j][i] * logrho[i];
    }
    std::array<double, p> coef{};
    for (std::size_t jj = p; jj-- > 0;) {
        double s = qty[jj];
        for (std::size_t k = jj + 1; k < p; ++k) s -= rr[jj][k] * coef[k];
        coef[jj] = s / rr[jj][jj];
    }
    double rss = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        double fit = 0.0;
        for (std::size_t j = 0; j < p; ++j) fit += a[i][j] * coef[j];
        rss += (logrho[i] - fit) * (logrho[i] - fit);
    }
    // Variance of the alpha coefficient: row 1 of R^{-1} squared.
    std::array<std::array<double, p>, p> rinv{};
    for (std::size_t j = 0; j < p; ++j) {
        rinv[j][j] = 1.0 / rr[j][j];
        for (std::size_t i = j; i-- > 0;) {
            double s = 0.0;
            for (std::size_t k = i + 1; k <= j; ++k) s += rr[i][k] * rinv[k][j];
            rinv[i][j] = -s / rr[i][i];
        }
    }
    double var_factor = 0.0;
    for (std::size_t j = 0; j < p; ++j) var_factor += rinv[1][j] * rinv[1][j];
    const double s2 = m > p ? rss / static_cast<double>(m - p) : 0.0;
    return SideFit{coef[1], std::sqrt(s2 * var_factor), m};
}

}  // namespace

Transmission transmission_at_node(const GridField& rho, double node, const TransmissionOptions& opts) {
    const auto& g = rho.grid();
    if (!(node > g.lo() && node < g.hi())) {
        throw DomainError("node " + std::to_string(node) + " is not interior to the density grid");
    }
    const auto vals = rho.values();
    const double rho_max = *std::max_element(vals.begin(), vals.end());
    if (!(rho_max > 0.0)) throw DomainError("density is not positive anywhere");
    if (rho.interpolate(node) > opts.node_tol * rho_max) {
        throw DomainError("density does not vanish at the node " + std::to_string(node));
    }
    const double h = g.spacing();
    auto collect = [&](int side) {
        std::vector<double> r;
        std::vector<double> lr;
        const std::size_t n = g.size();
        const std::size_t c = g.nearest_index(node);
        for (std::size_t step = 0; step < n && r.size() < opts.max_points; ++step) {
            const long idx = static_cast<long>(c) + side * static_cast<long>(step);
            if (idx < 0 || idx >= static_cast<long>(n)) break;
            const double x = g[static_cast<std::size_t>(idx)];
            const double dist = side * (x - node);
            if (dist < opts.exclusion_spacings * h - 1e-12 * h) continue;
            const double v = rho[static_cast<std::size_t>(idx)];
            if (!(v > 0.0)) {
                throw DomainError("non-positive density at x=" + std::to_string(x) +
                                  " inside the exponent fit window");
            }
            r.push_back(dist);
            lr.push_back(std::log(v));
        }
        if (r.size() < opts.min_points) {
            throw DomainError("fewer than " + std::to_string(opts.min_points) +
                              " grid points on one side of the node");
        }
        return fit_side(r, lr);
    };
    Transmission t;
    t.left = collect(-1);
    t.right = collect(+1);
    const double se = std::max(t.left.std_error, t.right.std_error);
    t.tolerance = std::max(3.0 * se, opts.unit_band);
    const double one = 1.0 - t.tolerance;
    if (t.left.alpha >= one || t.right.alpha >= one) {
        t.kind = TransmissionKind::Blocked;
    } else if (t.left.alpha > 0.0 && t.right.alpha > 0.0) {
        t.kind = TransmissionKind::Transmitting;
    } else {
        t.kind = TransmissionKind::Indeterminate;
    }
    return t;
}

}  // namespace natbound
