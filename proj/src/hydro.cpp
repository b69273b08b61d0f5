#include "natbound/hydro.hpp"

#include <algorithm>
#include <cmath>

namespace natbound {

double MaskedField::at(std::size_t i) const {
    if (i >= mask.size()) throw DomainError("index outside the grid");
    if (!mask[i]) throw DomainError("value requested inside a mask at x=" + std::to_string(field.grid()[i]));
    return field[i];
}

namespace {

/// Derivative stencils reach two points; nested derivatives need four.
constexpr std::size_t kErosion = 4;

std::vector<bool> node_mask(const DiffusionSpec& spec, const UniformGrid& grid, double spacings) {
    // Slack so that points exactly `spacings` grid steps away are masked despite round-off.
    const double reach = spacings * grid.spacing() * (1.0 + 1e-9);
    std::vector<bool> ok(grid.size(), true);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double x = grid[i];
        if (!spec.domain.contains(x)) ok[i] = false;
        // Finite endpoints of a natural-boundary domain are singular like nodes.
        if (spec.domain.r1().is_finite() && x - spec.domain.r1().value() <= reach) ok[i] = false;
        if (spec.domain.r2().is_finite() && spec.domain.r2().value() - x <= reach) ok[i] = false;
        for (double n : spec.nodes) {
            if (std::abs(x - n) <= reach) ok[i] = false;
        }
    }
    return ok;
}

/// Maximal runs [first, last) of true entries.
std::vector<std::pair<std::size_t, std::size_t>> runs(const std::vector<bool>& ok) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    std::size_t i = 0;
    while (i < ok.size()) {
        if (!ok[i]) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < ok.size() && ok[j]) ++j;
        out.emplace_back(i, j);
        i = j;
    }
    return out;
}

std::vector<double> segment_derivative(const std::vector<double>& v, std::size_t a, std::size_t b, double h,
                                       int order) {
    return derivative(std::span<const double>(v.data() + a, b - a), h, order);
}

double masked_integral(const UniformGrid& grid, const std::vector<bool>& mask, const std::vector<double>& f) {
    const auto w = quadrature_weights(grid);
    double s = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        if (mask[i]) s += w[i] * f[i];
    }
    return s;
}

}  // namespace

HydroFields build_hydro(const DiffusionSpec& spec, const GridField& rho, const HydroOptions& opts) {
    if (!(spec.D > 0.0)) throw InvariantError("diffusion coefficient must be positive");
    if (!spec.drift.valid()) throw InvariantError("diffusion spec has no drift");
    const UniformGrid& g = rho.grid();
    const std::size_t n = g.size();
    const double h = g.spacing();
    const double D = spec.D;

    std::vector<bool> base = node_mask(spec, g, opts.node_mask_spacings);
    std::vector<double> bv(n, 0.0), om(n, 0.0), gom(n, 0.0);
    bool have_omega = true;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(rho[i] > opts.floor)) base[i] = false;
        if (!base[i]) continue;
        try {
            const Jet j = spec.drift.jet(g[i]);
            if (!std::isfinite(j.v)) {
                base[i] = false;
                continue;
            }
            bv[i] = j.v;
            if (std::isfinite(j.d1) && std::isfinite(j.d2)) {
                om[i] = 0.5 * j.v * j.v + D * j.d1;
                gom[i] = j.v * j.d1 + D * j.d2;
            } else {
                have_omega = false;
            }
        } catch (const DomainError&) {
            base[i] = false;
        }
    }

    // Amplitude form s = sqrt(rho): Q = 2D^2 s''/s, P = 2D^2 (s s'' - s'^2), u = 2D s'/s.
    // These stay smooth at nodes, where ln rho and its derivatives do not.
    std::vector<double> sq(n, 0.0), u(n, 0.0), q(n, 0.0), p(n, 0.0), gq(n, 0.0), gp(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (base[i]) sq[i] = std::sqrt(rho[i]);
    }
    std::vector<bool> mask(n, false);
    for (const auto& [a, b] : runs(base)) {
        if (b - a < 2 * kErosion + 5) continue;
        const auto d1 = segment_derivative(sq, a, b, h, 1);
        const auto d2 = segment_derivative(sq, a, b, h, 2);
        for (std::size_t i = a; i < b; ++i) {
            const double s0 = sq[i];
            const double s1 = d1[i - a];
            const double s2 = d2[i - a];
            u[i] = 2.0 * D * s1 / s0;
            q[i] = 2.0 * D * D * s2 / s0;
            p[i] = 2.0 * D * D * (s0 * s2 - s1 * s1);
        }
        const auto dq = segment_derivative(q, a, b, h, 1);
        const auto dp = segment_derivative(p, a, b, h, 1);
        for (std::size_t i = a; i < b; ++i) {
            gq[i] = dq[i - a];
            gp[i] = dp[i - a];
        }
        for (std::size_t i = a + kErosion; i + kErosion < b; ++i) mask[i] = true;
    }

    std::vector<double> bs(n, 0.0), vv(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (!mask[i]) {
            bv[i] = u[i] = q[i] = p[i] = gq[i] = gp[i] = om[i] = gom[i] = 0.0;
            continue;
        }
        bs[i] = bv[i] - 2.0 * u[i];
        vv[i] = 0.5 * (bv[i] + bs[i]);
    }

    HydroFields out{rho,
                    GridField(g, bv),
                    GridField(g, bs),
                    GridField(g, vv),
                    GridField(g, u),
                    GridField(g, q),
                    GridField(g, p),
                    GridField(g, gq),
                    GridField(g, gp),
                    std::nullopt,
                    std::nullopt,
                    mask,
                    D};
    if (have_omega) {
        out.Omega = GridField(g, om);
        out.grad_Omega = GridField(g, gom);
    }
    return out;
}

MaskedField acceleration_field(const DiffusionSpec& spec, const UniformGrid& grid, double node_mask_spacings) {
    if (!spec.drift.valid()) throw InvariantError("diffusion spec has no drift");
    std::vector<bool> mask = node_mask(spec, grid, node_mask_spacings);
    std::vector<double> a(grid.size(), 0.0);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!mask[i]) continue;
        try {
            const Jet j = spec.drift.jet(grid[i]);
            const double val = j.v * j.d1 + spec.D * j.d2;
            if (std::isfinite(val)) {
                a[i] = val;
            } else {
                mask[i] = false;
            }
        } catch (const DomainError&) {
            mask[i] = false;
        }
    }
    return {GridField(grid, std::move(a)), std::move(mask)};
}

double continuity_residual(const std::vector<GridField>& rho_t, const std::vector<GridField>& v_t, double dt) {
    if (rho_t.size() < 3) throw DomainError("continuity residual needs at least 3 time slices");
    if (rho_t.size() != v_t.size()) throw DomainError("density and velocity slice counts differ");
    if (!(dt > 0.0)) throw DomainError("time step must be positive");
    const UniformGrid& g = rho_t.front().grid();
    for (std::size_t k = 0; k < rho_t.size(); ++k) {
        if (!(rho_t[k].grid() == g) || !(v_t[k].grid() == g)) throw DomainError("time slices use mismatched grids");
    }
    const std::size_t n = g.size();
    double worst = 0.0;
    for (std::size_t k = 1; k + 1 < rho_t.size(); ++k) {
        std::vector<double> flux(n);
        for (std::size_t i = 0; i < n; ++i) flux[i] = rho_t[k][i] * v_t[k][i];
        const auto dflux = derivative(flux, g.spacing(), 1);
        for (std::size_t i = 2; i + 2 < n; ++i) {
            const double dtrho = (rho_t[k + 1][i] - rho_t[k - 1][i]) / (2.0 * dt);
            worst = std::max(worst, std::abs(dtrho + dflux[i]));
        }
    }
    return worst;
}

EhrenfestResult ehrenfest_check(const HydroFields& hydro) {
    const UniformGrid& g = hydro.rho.grid();
    const std::size_t n = g.size();
    std::vector<double> f(n, 0.0);
    EhrenfestResult r;
    for (std::size_t i = 0; i < n; ++i) f[i] = hydro.rho[i] * hydro.grad_Q[i];
    r.lhs = masked_integral(g, hydro.mask, f);
    if (hydro.grad_Omega) {
        for (std::size_t i = 0; i < n; ++i) f[i] = hydro.rho[i] * (*hydro.grad_Omega)[i];
        r.rhs = masked_integral(g, hydro.mask, f);
        for (std::size_t i = 0; i < n; ++i) f[i] = hydro.rho[i] * ((*hydro.grad_Omega)[i] - hydro.grad_Q[i]);
        r.potential_gap = masked_integral(g, hydro.mask, f);
    } else {
        r.rhs = std::nan("");
        r.potential_gap = std::nan("");
    }
    std::vector<double> v(hydro.v.values().begin(), hydro.v.values().end());
    std::vector<double> dv(n, 0.0);
    for (const auto& [a, b] : runs(hydro.mask)) {
        if (b - a < 5) continue;
        const auto d = segment_derivative(v, a, b, g.spacing(), 1);
        for (std::size_t i = a; i < b; ++i) dv[i] = d[i - a];
    }
    for (std::size_t i = 0; i < n; ++i) f[i] = hydro.rho[i] * v[i] * dv[i];
    r.convective = masked_integral(g, hydro.mask, f);
    return r;
}

MomentumBalance momentum_balance(const HydroFields& hydro, double alpha, double beta) {
    if (!(alpha < beta)) throw DomainError("momentum window needs alpha < beta");
    const UniformGrid& g = hydro.rho.grid();
    if (alpha < g.lo() || beta > g.hi()) throw DomainError("momentum window leaves the grid");
    const std::size_t ia = g.nearest_index(alpha);
    const std::size_t ib = g.nearest_index(beta);
    if (ib < ia + 2) throw DomainError("momentum window spans fewer than 3 grid points");
    for (std::size_t i = ia; i <= ib; ++i) {
        if (!hydro.mask[i]) {
            throw DomainError("density below floor or masked inside the window at x=" + std::to_string(g[i]));
        }
    }
    if (!hydro.grad_Omega) throw DomainError("momentum balance needs Omega from the drift");
    const UniformGrid sub(g[ia], g[ib], ib - ia + 1);
    std::vector<double> vf(sub.size()), ref(sub.size());
    MomentumBalance m;
    for (std::size_t i = ia; i <= ib; ++i) {
        vf[i - ia] = hydro.rho[i] * (*hydro.grad_Omega)[i];
        ref[i - ia] = hydro.rho[i] * ((*hydro.grad_Omega)[i] - hydro.grad_Q[i]);
        m.pointwise = std::max(m.pointwise, std::abs(hydro.grad_P[i] - hydro.rho[i] * hydro.grad_Q[i]));
    }
    m.alpha = g[ia];
    m.beta = g[ib];
    m.volume_force = integrate(GridField(sub, std::move(vf)));
    m.pressure_term = hydro.P[ia] - hydro.P[ib];
    m.total = m.volume_force + m.pressure_term;
    m.reference = integrate(GridField(sub, std::move(ref)));
    m.residual = m.total - m.reference;
    return m;
}

}  // namespace natbound
