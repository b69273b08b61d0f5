#include "natbound/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"

#include "natbound/bridge.hpp"
#include "natbound/expression.hpp"
#include "natbound/feller.hpp"
#include "natbound/hydro.hpp"
#include "natbound/kernels.hpp"
#include "natbound/path_integral.hpp"
#include "natbound/problem.hpp"
#include "natbound/sde.hpp"
#include "natbound/spectral.hpp"

namespace natbound::cli {

using nlohmann::json;

namespace {

struct Flags {
    std::string problem;
    std::uint64_t seed = 0;
    std::size_t paths = 0;
    std::size_t steps = 0;
    std::string out;
    bool json_stdout = false;
    bool csv = false;
    int threads = 1;
    std::size_t chunk_size = 0;
    int n_max = 0;

    CLI::Option* seed_opt = nullptr;
    CLI::Option* paths_opt = nullptr;
    CLI::Option* steps_opt = nullptr;
    CLI::Option* n_max_opt = nullptr;

    bool has_seed() const { return seed_opt && seed_opt->count() > 0; }
    std::size_t paths_or(std::size_t d) const { return paths_opt && paths_opt->count() > 0 ? paths : d; }
    std::size_t steps_or(std::size_t d) const { return steps_opt && steps_opt->count() > 0 ? steps : d; }
};

struct Context {
    std::string command;
    Flags flags;
    std::optional<ProblemFile> problem;
    std::vector<std::pair<std::string, GridField>> csv;

    const ProblemFile& need_problem() const {
        if (!problem) throw ParseError(command + " requires --problem");
        return *problem;
    }
    const DiffusionSpec& need_diffusion() const {
        const auto& p = need_problem();
        if (!p.diffusion) throw ParseError(command + " requires a 'diffusion' block");
        return *p.diffusion;
    }
    const UniformGrid& need_grid() const {
        const auto& p = need_problem();
        if (!p.grid) throw ParseError(command + " requires a 'grid' block");
        return *p.grid;
    }
    json block() const { return problem ? problem->block(command) : json::object(); }
    std::uint64_t need_seed() const {
        if (!flags.has_seed()) throw ParseError(command + " is stochastic and requires --seed");
        return flags.seed;
    }
    McOptions mc_options() const {
        McOptions o;
        o.threads = flags.threads;
        if (flags.chunk_size > 0) o.chunk_size = flags.chunk_size;
        return o;
    }
};

json endpoint_json(const ExtendedReal& e) {
    if (e.is_finite()) return e.value();
    return e.to_string();
}

json interval_json(const Interval& iv) { return json::array({endpoint_json(iv.r1()), endpoint_json(iv.r2())}); }

json trace_json(const IntegrabilityTrace& t) {
    return {{"verdict", to_string(t.verdict)}, {"rule", t.rule}, {"cutoffs", t.cutoffs}, {"totals", t.totals}};
}

json boundary_json(const BoundaryClass& bc) {
    return {{"endpoint", endpoint_json(bc.endpoint)},
            {"class", to_string(bc.kind)},
            {"x0", bc.x0},
            {"l1", trace_json(bc.l1)},
            {"l2", trace_json(bc.l2)}};
}

json estimate_json(const McEstimate& e) {
    return {{"value", e.value},           {"std_error", e.std_error}, {"n_effective", e.n_effective},
            {"n_paths", e.n_paths},       {"n_steps", e.n_steps},     {"seed", e.seed},
            {"chunk_size", e.chunk_size}, {"discarded", e.discarded}, {"killed", e.killed},
            {"reliable", e.reliable}};
}

double get_double(const json& b, const char* key, const std::string& where) { return get_number(b, key, where); }

std::size_t get_count(const json& b, const char* key, std::size_t fallback, const std::string& where) {
    if (!b.contains(key)) return fallback;
    const double v = get_number(b, key, where);
    if (v < 0 || v != std::floor(v)) throw ParseError("key '" + std::string(key) + "' in " + where + " must be a count");
    return static_cast<std::size_t>(v);
}

std::vector<double> get_numbers(const json& b, const char* key, const std::string& where) {
    if (!b.contains(key)) return {};
    const json& a = b.at(key);
    if (!a.is_array()) throw ParseError("key '" + std::string(key) + "' in " + where + " must be an array");
    std::vector<double> out;
    for (const auto& v : a) {
        if (!v.is_number()) throw ParseError("key '" + std::string(key) + "' in " + where + " must hold numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

std::string get_string_or(const json& b, const char* key, const std::string& fallback, const std::string& where) {
    if (!b.contains(key)) return fallback;
    if (!b.at(key).is_string()) throw ParseError("key '" + std::string(key) + "' in " + where + " must be a string");
    return b.at(key).get<std::string>();
}

bool get_bool_or(const json& b, const char* key, bool fallback, const std::string& where) {
    if (!b.contains(key)) return fallback;
    if (!b.at(key).is_boolean()) throw ParseError("key '" + std::string(key) + "' in " + where + " must be a boolean");
    return b.at(key).get<bool>();
}

Interval get_interval_or(const json& b, const char* key, const Interval& fallback, const std::string& where) {
    if (!b.contains(key)) return fallback;
    const json& a = b.at(key);
    if (!a.is_array() || a.size() != 2) throw ParseError("key '" + std::string(key) + "' in " + where + " must be [r1, r2]");
    return {parse_endpoint(a[0]), parse_endpoint(a[1])};
}

json field_summary(const GridField& f) {
    double lo = f[0];
    double hi = f[0];
    for (double v : f.values()) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    return {{"min", lo}, {"max", hi}, {"integral", integrate(f)}};
}

/// Density on a grid from a block: {"gaussian": {...}} or {"expression": "..."}.
GridField density_from_block(const json& d, const UniformGrid& grid, const std::string& where) {
    require_keys(d, {"gaussian", "expression"}, where);
    if (d.contains("gaussian")) {
        const json& g = d.at("gaussian");
        require_keys(g, {"mean", "variance"}, where + ".gaussian");
        return gaussian_density(grid, get_double(g, "mean", where), get_double(g, "variance", where));
    }
    if (!d.contains("expression") || !d.at("expression").is_string()) {
        throw ParseError(where + " needs 'gaussian' or a string 'expression'");
    }
    const auto f = parse_drift_expression(d.at("expression").get<std::string>());
    auto raw = GridField::sample(grid, f);
    const double mass = integrate(raw);
    if (!(mass > 0.0)) throw DomainError(where + " has no positive mass on the grid");
    std::vector<double> v(raw.values().begin(), raw.values().end());
    for (double& x : v) x /= mass;
    return {grid, std::move(v)};
}

/// Stationary density proportional to exp(2 Phi) on the domain, zero elsewhere.
GridField stationary_density(const DiffusionSpec& spec, const UniformGrid& grid) {
    if (!spec.drift_potential) throw DomainError("stationary density needs a drift potential");
    const auto& phi = *spec.drift_potential;
    std::vector<double> lp(grid.size(), -std::numeric_limits<double>::infinity());
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double x = grid[i];
        if (!spec.domain.contains(x)) continue;
        const double v = 2.0 * phi(x);
        if (std::isnan(v)) continue;
        lp[i] = v;
        top = std::max(top, v);
    }
    if (!std::isfinite(top)) throw DomainError("stationary density vanishes on the grid");
    std::vector<double> rho(grid.size(), 0.0);
    for (std::size_t i = 0; i < grid.size(); ++i) rho[i] = std::isfinite(lp[i]) ? std::exp(lp[i] - top) : 0.0;
    const double mass = integrate(GridField(grid, rho));
    for (double& r : rho) r /= mass;
    return {grid, std::move(rho)};
}

// ---------------------------------------------------------------- classify

json cmd_classify(Context& ctx) {
    const DiffusionSpec& spec = ctx.need_diffusion();
    const json b = ctx.block();
    const std::string where = "classify";
    require_keys(b, {"x0", "endpoints", "steps", "increment_tol", "divergence_cap"}, where);
    IntegrabilityOptions io;
    io.steps = static_cast<int>(get_count(b, "steps", static_cast<std::size_t>(io.steps), where));
    io.increment_tol = get_number_or(b, "increment_tol", io.increment_tol, where);
    io.divergence_cap = get_number_or(b, "divergence_cap", io.divergence_cap, where);

    // Registered nodes split the domain into components that are classified separately.
    std::vector<Interval> comps;
    {
        ExtendedReal left = spec.domain.r1();
        for (double z : spec.nodes) {
            comps.emplace_back(left, ExtendedReal(z));
            left = ExtendedReal(z);
        }
        comps.emplace_back(left, spec.domain.r2());
    }
    auto default_x0 = [](const Interval& iv) {
        if (iv.r1().is_finite() && iv.r2().is_finite()) return 0.5 * (iv.r1().value() + iv.r2().value());
        if (iv.r1().is_finite()) return iv.r1().value() + 1.0;
        if (iv.r2().is_finite()) return iv.r2().value() - 1.0;
        return 0.0;
    };
    auto classify_in = [&](const Interval& iv, double x0, const std::vector<ExtendedReal>& ends) {
        DiffusionSpec sub = spec;
        sub.domain = iv;
        json arr = json::array();
        for (const auto& e : ends) arr.push_back(boundary_json(classify_boundary(sub, e, x0, io)));
        return arr;
    };
    json out = json::array();
    if (b.contains("x0") || b.contains("endpoints")) {
        const double x0 = b.contains("x0") ? get_double(b, "x0", where) : default_x0(comps.front());
        const Interval* iv = nullptr;
        for (const auto& c : comps) {
            if (c.contains(x0)) iv = &c;
        }
        if (!iv) throw DomainError("classify.x0 lies on a node or outside the domain");
        std::vector<ExtendedReal> ends;
        if (b.contains("endpoints")) {
            if (!b.at("endpoints").is_array()) throw ParseError("classify.endpoints must be an array");
            for (const auto& e : b.at("endpoints")) ends.push_back(parse_endpoint(e));
        } else {
            ends = {iv->r1(), iv->r2()};
        }
        out = classify_in(*iv, x0, ends);
    } else {
        for (const auto& c : comps) {
            for (auto& e : classify_in(c, default_x0(c), {c.r1(), c.r2()})) {
                e["component"] = interval_json(c);
                out.push_back(e);
            }
        }
    }
    json res = {{"boundaries", out}};

    if (!spec.nodes.empty() && ctx.problem->grid && spec.drift_potential) {
        const GridField rho = stationary_density(spec, *ctx.problem->grid);
        json tr = json::array();
        for (double node : spec.nodes) {
            const Transmission t = transmission_at_node(rho, node);
            tr.push_back({{"node", node},
                          {"class", to_string(t.kind)},
                          {"alpha_left", t.left.alpha},
                          {"alpha_right", t.right.alpha},
                          {"std_error_left", t.left.std_error},
                          {"std_error_right", t.right.std_error},
                          {"tolerance", t.tolerance}});
        }
        res["transmission"] = tr;
    }
    return res;
}

// ---------------------------------------------------------------- bridge

KernelOracle kernel_by_name(const std::string& name, double D) {
    if (name == "mehler") return mehler_kernel();
    if (name == "heat") return heat_kernel(D);
    throw ParseError("unknown bridge kernel '" + name + "' (expected mehler or heat)");
}

json cmd_bridge(Context& ctx) {
    const UniformGrid& grid = ctx.need_grid();
    const json b = ctx.block();
    const std::string where = "bridge";
    require_keys(b, {"T", "kernel", "rho0", "rhoT", "tol", "max_iter", "times", "D"}, where);
    const double T = get_double(b, "T", where);
    const std::string kname = get_string_or(b, "kernel", "mehler", where);
    const double D = get_number_or(b, "D", ctx.problem->diffusion ? ctx.problem->diffusion->D : 0.5, where);
    if (!b.contains("rho0") || !b.contains("rhoT")) throw ParseError("bridge needs 'rho0' and 'rhoT'");
    const GridField rho0 = density_from_block(b.at("rho0"), grid, "bridge.rho0");
    const GridField rhoT = density_from_block(b.at("rhoT"), grid, "bridge.rhoT");
    const double tol = get_number_or(b, "tol", 1e-12, where);
    const auto max_iter = static_cast<int>(get_count(b, "max_iter", 10000, where));
    const KernelOracle k = kernel_by_name(kname, D);
    const BridgeProblem problem{rho0, rhoT, T, k, k.D()};
    const BridgeSolution sol = solve_bridge(problem, tol, max_iter);

    json res = {{"converged", sol.converged},
                {"iterations", sol.iterations},
                {"marginal_residual", sol.marginal_residual},
                {"log_domain", sol.log_domain},
                {"gauge", sol.gauge},
                {"threads", sol.threads}};
    if (sol.theta_star_0) ctx.csv.emplace_back("theta_star_0", *sol.theta_star_0);
    if (sol.theta_T) ctx.csv.emplace_back("theta_T", *sol.theta_T);
    json slices = json::array();
    const auto times = get_numbers(b, "times", where);
    for (std::size_t i = 0; i < times.size(); ++i) {
        const double t = times[i];
        const GridField rho = interpolate_density(sol, t);
        json s = {{"t", t}, {"mass", integrate(rho)}, {"rho", field_summary(rho)}};
        ctx.csv.emplace_back("rho_" + std::to_string(i), rho);
        try {
            const GridField drift = bridge_drift(sol, t);
            s["drift"] = field_summary(drift);
            ctx.csv.emplace_back("drift_" + std::to_string(i), drift);
        } catch (const DomainError& e) {
            s["drift_error"] = e.what();
        }
        slices.push_back(s);
    }
    res["slices"] = slices;
    return res;
}

// ---------------------------------------------------------------- kernel

json cmd_kernel(Context& ctx) {
    const UniformGrid& grid = ctx.need_grid();
    const json b = ctx.block();
    const std::string where = "kernel";
    require_keys(b, {"kind", "y", "s", "times", "a", "omega", "domain", "D"}, where);
    const std::string kind = get_string_or(b, "kind", "mehler", where);
    const double y = get_double(b, "y", where);
    const double s = get_number_or(b, "s", 0.0, where);
    const auto times = get_numbers(b, "times", where);
    if (times.empty()) throw ParseError("kernel needs a non-empty 'times' array");
    const double D = get_number_or(b, "D", ctx.problem->diffusion ? ctx.problem->diffusion->D : 0.5, where);

    std::function<double(double, double)> analytic;
    std::optional<BesselDensity> bessel;
    if (kind == "heat") {
        const KernelOracle k = heat_kernel(D);
        analytic = [k, y, s](double x, double t) { return k(y, s, x, t); };
    } else if (kind == "mehler") {
        const KernelOracle k = mehler_kernel();
        analytic = [k, y, s](double x, double t) { return k(y, s, x, t); };
    } else if (kind == "ou") {
        analytic = [y, s](double x, double t) { return ou_transition_density(y, x, t - s); };
    } else if (kind == "bessel") {
        bessel.emplace(get_double(b, "a", where));
        const BesselDensity bd = *bessel;
        analytic = [bd, y, s](double x, double t) { return x > 0.0 ? bd(t - s, y, x) : 0.0; };
    } else if (kind != "mc") {
        throw ParseError("unknown kernel kind '" + kind + "'");
    }

    json table = json::array();
    json res;
    if (kind == "mc") {
        const std::uint64_t seed = ctx.need_seed();
        if (!b.contains("omega") || !b.at("omega").is_string()) throw ParseError("kernel kind mc needs an 'omega' expression");
        const ScalarFn omega = parse_drift_expression(b.at("omega").get<std::string>());
        const Interval dom = get_interval_or(b, "domain", Interval::real_line(), where);
        const std::size_t paths = ctx.flags.paths_or(10000);
        const std::size_t steps = ctx.flags.steps_or(200);
        for (double t : times) {
            std::vector<double> vals(grid.size(), 0.0);
            for (std::size_t i = 0; i < grid.size(); ++i) {
                const double x = grid[i];
                if (!dom.contains(x)) {
                    table.push_back({{"t", t}, {"x", x}, {"value", 0.0}, {"std_error", 0.0}});
                    continue;
                }
                const McEstimate e = fk_kernel_mc(omega, dom, D, y, s, x, t, paths, steps, seed, ctx.mc_options());
                vals[i] = std::isfinite(e.value) ? e.value : 0.0;
                table.push_back({{"t", t}, {"x", x}, {"value", e.value}, {"std_error", e.std_error}});
            }
            ctx.csv.emplace_back("kernel_t" + std::to_string(ctx.csv.size()), GridField(grid, vals));
        }
        res["provenance"] = {{"seed", seed}, {"paths", paths}, {"steps", steps}};
    } else {
        for (double t : times) {
            std::vector<double> vals(grid.size(), 0.0);
            for (std::size_t i = 0; i < grid.size(); ++i) {
                vals[i] = analytic(grid[i], t);
                table.push_back({{"t", t}, {"x", grid[i]}, {"value", vals[i]}});
            }
            ctx.csv.emplace_back("kernel_t" + std::to_string(ctx.csv.size()), GridField(grid, vals));
        }
    }
    res["kind"] = kind;
    res["table"] = table;
    return res;
}

// ---------------------------------------------------------------- pathint

json cmd_pathint(Context& ctx) {
    const json b = ctx.block();
    const std::string where = "pathint";
    require_keys(b, {"omega", "domain", "y", "x", "s", "t", "cutoffs", "rule", "correction", "girsanov", "D"}, where);
    const std::uint64_t seed = ctx.need_seed();
    const DiffusionSpec* spec = ctx.problem && ctx.problem->diffusion ? &*ctx.problem->diffusion : nullptr;
    const double D = get_number_or(b, "D", spec ? spec->D : 0.5, where);
    const std::string om_text = get_string_or(b, "omega", "0", where);
    const ScalarFn omega = parse_drift_expression(om_text);
    const Interval dom = get_interval_or(b, "domain", spec ? spec->domain : Interval::real_line(), where);
    const double y = get_double(b, "y", where);
    const double s = get_number_or(b, "s", 0.0, where);
    const double t = get_double(b, "t", where);
    const std::size_t paths = ctx.flags.paths_or(100000);
    const std::size_t steps = ctx.flags.steps_or(200);
    McOptions opts = ctx.mc_options();
    const std::string rule = get_string_or(b, "rule", "trapezoid", where);
    if (rule == "trapezoid") {
        opts.rule = TimeRule::Trapezoid;
    } else if (rule == "midpoint") {
        opts.rule = TimeRule::MidpointPosition;
    } else {
        throw ParseError("pathint.rule must be 'trapezoid' or 'midpoint'");
    }
    opts.crossing_correction = get_bool_or(b, "correction", true, where);
    const bool girsanov = get_bool_or(b, "girsanov", false, where);

    json res = {{"omega", om_text}, {"domain", interval_json(dom)}, {"D", D}};
    const auto cutoffs = get_numbers(b, "cutoffs", where);
    if (!cutoffs.empty()) {
        const double x = get_double(b, "x", where);
        const auto seq = absorbing_limit_study(omega, D, y, x, t - s, cutoffs, paths, steps, seed, opts);
        json arr = json::array();
        for (std::size_t i = 0; i < seq.size(); ++i) {
            json e = estimate_json(seq[i]);
            e["R"] = cutoffs[i];
            arr.push_back(e);
        }
        res["absorbing_limit"] = arr;
        return res;
    }
    auto one = [&](double x) {
        if (girsanov) {
            if (!spec) throw ParseError("girsanov weights need a 'diffusion' block with a potential");
            return girsanov_density_mc(*spec, omega, y, s, x, t, paths, steps, seed, opts);
        }
        return fk_kernel_mc(omega, dom, D, y, s, x, t, paths, steps, seed, opts);
    };
    if (b.contains("x")) {
        res["estimate"] = estimate_json(one(get_double(b, "x", where)));
        return res;
    }
    const UniformGrid& grid = ctx.need_grid();
    json table = json::array();
    std::vector<double> vals(grid.size(), 0.0);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!dom.contains(grid[i])) continue;
        const McEstimate e = one(grid[i]);
        json row = estimate_json(e);
        row["x"] = grid[i];
        table.push_back(row);
        vals[i] = std::isfinite(e.value) ? e.value : 0.0;
    }
    ctx.csv.emplace_back("kernel", GridField(grid, vals));
    res["table"] = table;
    return res;
}

// ---------------------------------------------------------------- simulate

json cmd_simulate(Context& ctx) {
    const DiffusionSpec& spec = ctx.need_diffusion();
    const json b = ctx.block();
    const std::string where = "simulate";
    require_keys(b, {"x0", "T", "dt", "node_guard", "target", "max_halvings"}, where);
    SimConfig cfg;
    cfg.seed = ctx.need_seed();
    cfg.T = get_double(b, "T", where);
    cfg.dt = get_double(b, "dt", where);
    cfg.node_guard = get_number_or(b, "node_guard", 0.0, where);
    cfg.max_halvings = static_cast<int>(get_count(b, "max_halvings", 20, where));
    cfg.n_paths = ctx.flags.paths_or(10000);
    cfg.threads = ctx.flags.threads;
    if (ctx.flags.chunk_size > 0) cfg.chunk_size = ctx.flags.chunk_size;
    const double x0 = get_double(b, "x0", where);

    const SimResult sim = simulate(spec, x0, cfg);
    double mean = 0.0;
    for (double v : sim.terminals) mean += v;
    mean /= static_cast<double>(sim.terminals.size());
    double var = 0.0;
    for (double v : sim.terminals) var += (v - mean) * (v - mean);
    var /= static_cast<double>(std::max<std::size_t>(1, sim.terminals.size() - 1));
    double lo = sim.terminals.front();
    double hi = lo;
    for (double v : sim.terminals) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    json res = {{"n_paths", cfg.n_paths}, {"dt", cfg.dt},           {"T", cfg.T},
                {"seed", cfg.seed},       {"chunk_size", cfg.chunk_size}, {"flagged", sim.flagged},
                {"flagged_fraction", sim.flagged_fraction}, {"reliable", sim.reliable},
                {"rejections", sim.rejections}, {"terminal_mean", mean}, {"terminal_variance", var},
                {"terminal_min", lo}, {"terminal_max", hi}};
    if (ctx.problem->grid) {
        const EmpiricalDensity ed = empirical_density(sim.terminals, *ctx.problem->grid);
        res["density"] = {{"mass_outside", ed.mass_outside}, {"summary", field_summary(ed.density)}};
        ctx.csv.emplace_back("density", ed.density);
    }
    if (b.contains("target")) {
        const PassageReport rep = first_passage_fraction(spec, x0, get_double(b, "target", where), cfg);
        res["passage"] = {{"target", rep.target},
                          {"hits", rep.hits},
                          {"fraction_hit", rep.fraction_hit},
                          {"mean_hit_time", rep.mean_hit_time ? json(*rep.mean_hit_time) : json(nullptr)},
                          {"level_is_wall", rep.level_is_wall},
                          {"flagged", rep.flagged},
                          {"reliable", rep.reliable}};
    }
    return res;
}

// ---------------------------------------------------------------- hydro

json cmd_hydro(Context& ctx) {
    const DiffusionSpec& spec = ctx.need_diffusion();
    const UniformGrid& grid = ctx.need_grid();
    const json b = ctx.block();
    const std::string where = "hydro";
    require_keys(b, {"density", "window", "floor"}, where);
    GridField rho = GridField::constant(grid, 0.0);
    if (!b.contains("density") || (b.at("density").is_string() && b.at("density").get<std::string>() == "stationary")) {
        rho = stationary_density(spec, grid);
    } else if (b.at("density").is_object()) {
        rho = density_from_block(b.at("density"), grid, "hydro.density");
    } else {
        throw ParseError("hydro.density must be \"stationary\" or a density object");
    }
    HydroOptions ho;
    ho.floor = get_number_or(b, "floor", ho.floor, where);
    const HydroFields hf = build_hydro(spec, rho, ho);

    double spread_lo = std::numeric_limits<double>::infinity();
    double spread_hi = -spread_lo;
    double identity = 0.0;
    double vmax = 0.0;
    std::size_t valid = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!hf.mask[i]) continue;
        ++valid;
        if (hf.Omega) {
            const double d = (*hf.Omega)[i] - hf.Q[i];
            spread_lo = std::min(spread_lo, d);
            spread_hi = std::max(spread_hi, d);
        }
        if (rho[i] > 1e-8) identity = std::max(identity, std::abs(hf.grad_Q[i] - hf.grad_P[i] / rho[i]));
        vmax = std::max(vmax, std::abs(hf.v[i]));
    }
    const EhrenfestResult er = ehrenfest_check(hf);
    json res = {{"valid_points", valid},
                {"max_abs_v", vmax},
                {"grad_q_minus_grad_p_over_rho", identity},
                {"ehrenfest",
                 {{"lhs", er.lhs}, {"rhs", er.rhs}, {"convective", er.convective}, {"potential_gap", er.potential_gap}}}};
    if (hf.Omega && valid > 0) res["omega_minus_q_spread"] = spread_hi - spread_lo;
    if (b.contains("window")) {
        const auto w = get_numbers(b, "window", where);
        if (w.size() != 2) throw ParseError("hydro.window must be [alpha, beta]");
        const MomentumBalance mb = momentum_balance(hf, w[0], w[1]);
        res["momentum_balance"] = {{"alpha", mb.alpha},
                                   {"beta", mb.beta},
                                   {"volume_force", mb.volume_force},
                                   {"pressure_term", mb.pressure_term},
                                   {"total", mb.total},
                                   {"reference", mb.reference},
                                   {"residual", mb.residual},
                                   {"pointwise", mb.pointwise}};
    }
    ctx.csv.emplace_back("rho", hf.rho);
    ctx.csv.emplace_back("b", hf.b);
    ctx.csv.emplace_back("b_star", hf.b_star);
    ctx.csv.emplace_back("v", hf.v);
    ctx.csv.emplace_back("u", hf.u);
    ctx.csv.emplace_back("Q", hf.Q);
    ctx.csv.emplace_back("P", hf.P);
    if (hf.Omega) ctx.csv.emplace_back("Omega", *hf.Omega);
    return res;
}

// ---------------------------------------------------------------- spectral

json member_json(const EquivalenceClassMember& m, double omega_constant) {
    json bounds = json::array();
    for (const auto& bc : m.boundaries) bounds.push_back({{"endpoint", endpoint_json(bc.endpoint)}, {"class", to_string(bc.kind)}});
    return {{"n", m.n},
            {"component", m.component},
            {"interval", interval_json(m.interval)},
            {"epsilon", m.epsilon},
            {"component_mass", m.component_mass},
            {"omega_constant", omega_constant},
            {"boundaries", bounds}};
}

json cmd_spectral(Context& ctx) {
    const json b = ctx.block();
    const std::string where = "spectral";
    require_keys(b, {"n_max", "cutoff", "points"}, where);
    int n_max = static_cast<int>(get_count(b, "n_max", 3, where));
    if (ctx.flags.n_max_opt && ctx.flags.n_max_opt->count() > 0) n_max = ctx.flags.n_max;
    if (n_max < 0) throw ParseError("--n-max must be non-negative");
    const double cutoff = get_number_or(b, "cutoff", 8.0, where);
    const std::size_t points = get_count(b, "points", 1601, where);
    json res = {{"n_max", n_max}};
    json states = json::array();
    json members = json::array();
    json omega_constants = json::array();

    if (!ctx.problem || !ctx.problem->diffusion) {
        // Harmonic family in the rescaled variables, D = 1/2.
        const UniformGrid grid(-cutoff, cutoff, points);
        for (int n = 0; n <= n_max; ++n) {
            const EigenState st = hermite_state(n);
            const double oc = -0.5 - (st.epsilon - 0.5);
            states.push_back({{"n", n}, {"epsilon", st.epsilon}, {"nodes", st.nodes}});
            omega_constants.push_back(oc);
            for (const auto& m : nodal_decomposition(st)) members.push_back(member_json(m, oc));
            ctx.csv.emplace_back("psi_" + std::to_string(n), GridField::sample(grid, st.psi));
        }
        res["reference"] = "hermite";
    } else {
        const DiffusionSpec& ref = *ctx.problem->diffusion;
        EquivalenceOptions eo;
        eo.cutoff = cutoff;
        eo.points = points;
        const auto [lo, hi] = truncate(ref.domain, cutoff);
        const UniformGrid grid(lo, hi, points);
        const JetFn om = omega_jet_from_drift(ref.drift, ref.D);
        const double center = 0.5 * (lo + hi);
        const double om_center = om(Jet(center)).v;
        const auto ms = equivalence_class(ref, n_max, eo);
        std::vector<double> eps(static_cast<std::size_t>(n_max) + 1, 0.0);
        for (const auto& m : ms) eps[static_cast<std::size_t>(m.n)] = m.epsilon;
        for (int n = 0; n <= n_max; ++n) {
            const double oc = om_center - 2.0 * ref.D * (eps[n] - eps[0]);
            omega_constants.push_back(oc);
            states.push_back({{"n", n}, {"epsilon", eps[n]}});
        }
        for (const auto& m : ms) {
            const double oc = om_center - 2.0 * ref.D * (m.epsilon - eps[0]);
            members.push_back(member_json(m, oc));
        }
        res["reference"] = ctx.problem->drift_label;
        res["grid"] = {{"lo", lo}, {"hi", hi}, {"n", points}};
    }
    res["states"] = states;
    res["omega_constants"] = omega_constants;
    res["members"] = members;
    return res;
}

// ---------------------------------------------------------------- plumbing

void write_csv(const std::filesystem::path& path, const GridField& f) {
    std::ofstream o(path);
    if (!o) throw NumericalError("cannot write " + path.string());
    o << "x,value\n";
    char buf[64];
    for (std::size_t i = 0; i < f.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", f.grid()[i], f[i]);
        o << buf;
    }
}

json error_json(const std::string& kind, const std::string& message, int code,
                std::size_t position = ParseError::npos) {
    json e = {{"kind", kind}, {"message", message}, {"exit_code", code}};
    if (position != ParseError::npos) e["position"] = position;
    return {{"error", e}};
}

void add_common(CLI::App* sc, Flags& f, bool stochastic) {
    sc->add_option("--problem", f.problem, "Problem file (JSON)");
    f.seed_opt = sc->add_option("--seed", f.seed, stochastic ? "RNG seed (required)" : "RNG seed");
    f.paths_opt = sc->add_option("--paths", f.paths, "Number of sample paths");
    f.steps_opt = sc->add_option("--steps", f.steps, "Time steps per path");
    sc->add_option("--out", f.out, "Directory for result.json and CSV dumps");
    sc->add_flag("--json", f.json_stdout, "Print the JSON result to stdout");
    sc->add_flag("--csv", f.csv, "Write grid fields as CSV files into --out");
    sc->add_option("--threads", f.threads, "Worker threads for chunked Monte Carlo")->check(CLI::PositiveNumber);
    sc->add_option("--chunk-size", f.chunk_size, "Paths per RNG chunk");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Diffusions with natural boundaries: classification, bridges, path integrals"};
    app.name("natbound");
    app.require_subcommand(1, 1);
    Flags flags;
    struct Sub {
        const char* name;
        const char* help;
        bool stochastic;
    };
    const Sub subs[] = {
        {"classify", "Feller boundary classification", false},
        {"bridge", "Schrodinger bridge between two densities", false},
        {"kernel", "Kernel tables, analytic or Monte Carlo", false},
        {"pathint", "Feynman-Kac path-integral estimates", true},
        {"simulate", "Euler-Maruyama ensembles", true},
        {"hydro", "Hydrodynamic fields and identities", false},
        {"spectral", "Eigenstates, drifts and equivalence classes", false},
    };
    for (const auto& s : subs) {
        auto* sc = app.add_subcommand(s.name, s.help);
        add_common(sc, flags, s.stochastic);
        if (std::string(s.name) == "spectral") sc->add_option("--n-max", flags.n_max, "Highest state");
    }

    auto emit_error = [&](const std::string& kind, const std::string& msg, int code,
                          std::size_t pos = ParseError::npos) {
        const json e = error_json(kind, msg, code, pos);
        out << e.dump(2) << "\n";
        err << "natbound: " << msg << "\n";
        if (!flags.out.empty()) {
            std::error_code ec;
            std::filesystem::create_directories(flags.out, ec);
            std::ofstream(std::filesystem::path(flags.out) / "result.json") << e.dump(2) << "\n";
        }
        return code;
    };

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kSuccess;
    } catch (const CLI::ParseError& e) {
        return emit_error("ParseError", e.what(), kParseError);
    }

    Context ctx;
    CLI::App* chosen = app.get_subcommands().front();
    ctx.command = chosen->get_name();
    flags.seed_opt = chosen->get_option("--seed");
    flags.paths_opt = chosen->get_option("--paths");
    flags.steps_opt = chosen->get_option("--steps");
    flags.n_max_opt = chosen->get_option_no_throw("--n-max");
    ctx.flags = flags;
    try {
        if (!flags.problem.empty()) ctx.problem = load_problem(flags.problem);
        if (flags.csv && flags.out.empty()) throw ParseError("--csv requires --out");
        if (ctx.command == "kernel" && ctx.problem && ctx.problem->block("kernel").value("kind", "") == "mc") {
            ctx.need_seed();
        }

        json results;
        if (ctx.command == "classify") results = cmd_classify(ctx);
        if (ctx.command == "bridge") results = cmd_bridge(ctx);
        if (ctx.command == "kernel") results = cmd_kernel(ctx);
        if (ctx.command == "pathint") results = cmd_pathint(ctx);
        if (ctx.command == "simulate") results = cmd_simulate(ctx);
        if (ctx.command == "hydro") results = cmd_hydro(ctx);
        if (ctx.command == "spectral") results = cmd_spectral(ctx);

        json flags_echo = {{"threads", flags.threads}};
        if (flags.has_seed()) flags_echo["seed"] = flags.seed;
        if (flags.paths_opt->count() > 0) flags_echo["paths"] = flags.paths;
        if (flags.steps_opt->count() > 0) flags_echo["steps"] = flags.steps;
        if (flags.chunk_size > 0) flags_echo["chunk_size"] = flags.chunk_size;
        if (flags.n_max_opt && flags.n_max_opt->count() > 0) flags_echo["n_max"] = flags.n_max;
        const json doc = {{"command", ctx.command},
                          {"inputs", {{"problem", ctx.problem ? ctx.problem->document : json(nullptr)},
                                      {"flags", flags_echo}}},
                          {"results", results}};

        if (!flags.out.empty()) {
            std::filesystem::create_directories(flags.out);
            std::ofstream(std::filesystem::path(flags.out) / "result.json") << doc.dump(2) << "\n";
            if (flags.csv) {
                for (const auto& [name, field] : ctx.csv) {
                    write_csv(std::filesystem::path(flags.out) / (name + ".csv"), field);
                }
            }
        }
        if (flags.out.empty() || flags.json_stdout) out << doc.dump(2) << "\n";
        return kSuccess;
    } catch (const ParseError& e) {
        return emit_error("ParseError", e.what(), kParseError, e.position());
    } catch (const InconclusiveError& e) {
        return emit_error("InconclusiveError", e.what(), kInconclusive);
    } catch (const DomainError& e) {
        return emit_error("DomainError", e.what(), kNumericalFailure);
    } catch (const RangeError& e) {
        return emit_error("RangeError", e.what(), kNumericalFailure);
    } catch (const InvariantError& e) {
        return emit_error("InvariantError", e.what(), kNumericalFailure);
    } catch (const NumericalError& e) {
        return emit_error("NumericalError", e.what(), kNumericalFailure);
    } catch (const std::exception& e) {
        return emit_error("Error", e.what(), kNumericalFailure);
    }
}

}  // namespace natbound::cli
