#include "natbound/problem.hpp"

#include <cmath>
#include <fstream>
#include <regex>
#include <sstream>

#include "natbound/expression.hpp"
#include "natbound/spectral.hpp"

namespace natbound {

using nlohmann::json;

DiffusionSpec ou_spec(double omega, double D) {
    if (!(omega > 0.0)) throw DomainError("OU frequency must be positive");
    DiffusionSpec s;
    s.D = D;
    s.drift = Drift::from([omega](const auto& x) { return -omega * x; });
    s.drift_potential = [omega, D](double x) { return -omega * x * x / (4.0 * D); };
    return s;
}

DiffusionSpec bessel_spec(double a, double D) {
    if (!(a >= 0.0)) throw DomainError("Bessel index a must be non-negative");
    DiffusionSpec s;
    s.D = D;
    const double c = D * (1.0 + 2.0 * a);
    s.drift = Drift::from([c](const auto& x) { return c / x; });
    s.drift_potential = [a](double x) { return 0.5 * (1.0 + 2.0 * a) * std::log(x); };
    s.domain = Interval(0.0, ExtendedReal::pos_inf());
    return s;
}

DiffusionSpec hermite_spec(int n, double omega, double D) {
    if (!(omega > 0.0)) throw DomainError("harmonic frequency must be positive");
    const EigenState st = hermite_state(n);
    const double alpha = std::sqrt(omega / (2.0 * D));
    const auto w = st.log_derivative;
    const auto nodes = st.nodes;
    DiffusionSpec s;
    s.D = D;
    auto value = [w, alpha, D, nodes](double x) {
        const double xi = alpha * x;
        for (double z : nodes) {
            if (std::abs(xi - z) < 1e-9) throw DomainError("drift evaluated on a node at x=" + std::to_string(x));
        }
        return 2.0 * D * alpha * w(Jet(xi)).v;
    };
    auto jet = [w, alpha, D, nodes](const Jet& x) {
        const double xi = alpha * x.v;
        for (double z : nodes) {
            if (std::abs(xi - z) < 1e-9) throw DomainError("drift evaluated on a node at x=" + std::to_string(x.v));
        }
        const Jet j = w(Jet::variable(xi));
        const double k = 2.0 * D * alpha;
        return compose(x, k * j.v, k * alpha * j.d1, k * alpha * alpha * j.d2);
    };
    s.drift = Drift(value, jet);
    const auto log_abs = *st.log_abs_psi;
    s.drift_potential = [log_abs, alpha](double x) { return log_abs(alpha * x); };
    for (double z : nodes) s.nodes.push_back(z / alpha);
    return s;
}

void require_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!obj.is_object()) throw ParseError(where + " must be an object");
    for (const auto& [key, value] : obj.items()) {
        bool ok = false;
        for (const char* a : allowed) {
            if (key == a) ok = true;
        }
        if (!ok) throw ParseError("unknown key '" + key + "' in " + where);
    }
}

double get_number(const json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key)) throw ParseError("missing key '" + std::string(key) + "' in " + where);
    const json& v = obj.at(key);
    if (!v.is_number()) throw ParseError("key '" + std::string(key) + "' in " + where + " must be a number");
    return v.get<double>();
}

double get_number_or(const json& obj, const char* key, double fallback, const std::string& where) {
    if (!obj.contains(key)) return fallback;
    return get_number(obj, key, where);
}

ExtendedReal parse_endpoint(const json& j) {
    if (j.is_number()) return ExtendedReal(j.get<double>());
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "-inf") return ExtendedReal::neg_inf();
        if (s == "+inf" || s == "inf") return ExtendedReal::pos_inf();
    }
    throw ParseError("endpoint must be a number, \"-inf\" or \"+inf\", got " + j.dump());
}

namespace {

std::vector<double> call_args(const std::string& text, const std::string& name) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
        } catch (const std::logic_error&) {
            throw ParseError("bad argument '" + item + "' to drift preset " + name);
        }
    }
    return out;
}

DiffusionSpec preset_from_call(const std::string& name, const std::vector<double>& args, double D) {
    auto want = [&](std::size_t lo, std::size_t hi) {
        if (args.size() < lo || args.size() > hi) {
            throw ParseError("drift preset " + name + " takes " + std::to_string(lo) +
                             (lo == hi ? "" : "-" + std::to_string(hi)) + " arguments");
        }
    };
    if (name == "ou") {
        want(0, 1);
        return ou_spec(args.empty() ? 1.0 : args[0], D);
    }
    if (name == "bessel") {
        want(1, 1);
        return bessel_spec(args[0], D);
    }
    want(1, 2);
    if (args[0] != std::floor(args[0])) throw ParseError("hermite index must be an integer");
    return hermite_spec(static_cast<int>(args[0]), args.size() > 1 ? args[1] : 1.0, D);
}

DiffusionSpec parse_drift_block(const json& d, double D, std::string& label) {
    static const std::regex call(R"(^\s*(ou|bessel|hermite)\s*\((.*)\)\s*$)");
    if (d.is_string()) {
        const auto text = d.get<std::string>();
        label = text;
        std::smatch m;
        if (std::regex_match(text, m, call)) {
            const std::string inner = m[2].str();
            const auto args = inner.find_first_not_of(" \t") == std::string::npos ? std::vector<double>{}
                                                                                    : call_args(inner, m[1].str());
            return preset_from_call(m[1].str(), args, D);
        }
        DiffusionSpec s;
        s.D = D;
        s.drift = parse_drift(text);
        return s;
    }
    if (!d.is_object()) throw ParseError("diffusion.drift must be a string or an object");
    if (d.contains("preset")) {
        require_keys(d, {"preset", "omega", "a", "n"}, "diffusion.drift");
        const auto name = d.at("preset").get<std::string>();
        if (name == "ou") {
            const double omega = get_number_or(d, "omega", 1.0, "diffusion.drift");
            label = "ou(" + json(omega).dump() + ")";
            return ou_spec(omega, D);
        }
        if (name == "bessel") {
            const double a = get_number(d, "a", "diffusion.drift");
            label = "bessel(" + json(a).dump() + ")";
            return bessel_spec(a, D);
        }
        if (name == "hermite") {
            const double n = get_number(d, "n", "diffusion.drift");
            if (n != std::floor(n)) throw ParseError("hermite index must be an integer");
            const double omega = get_number_or(d, "omega", 1.0, "diffusion.drift");
            label = "hermite(" + json(static_cast<int>(n)).dump() + "," + json(omega).dump() + ")";
            return hermite_spec(static_cast<int>(n), omega, D);
        }
        throw ParseError("unknown drift preset '" + name + "'");
    }
    require_keys(d, {"expression", "potential"}, "diffusion.drift");
    if (!d.contains("expression") || !d.at("expression").is_string()) {
        throw ParseError("diffusion.drift needs a string 'expression' or a 'preset'");
    }
    const auto text = d.at("expression").get<std::string>();
    label = text;
    DiffusionSpec s;
    s.D = D;
    s.drift = parse_drift(text);
    if (d.contains("potential")) {
        if (!d.at("potential").is_string()) throw ParseError("diffusion.drift.potential must be a string");
        s.drift_potential = parse_drift_expression(d.at("potential").get<std::string>());
    }
    return s;
}

}  // namespace

json ProblemFile::block(const std::string& name) const {
    if (document.contains(name)) return document.at(name);
    return json::object();
}

ProblemFile parse_problem(const std::string& text) {
    ProblemFile pf;
    try {
        pf.document = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("problem file is not valid JSON: ") + e.what(), e.byte);
    }
    const json& doc = pf.document;
    require_keys(doc, {"diffusion", "grid", "classify", "bridge", "kernel", "pathint", "simulate", "hydro", "spectral"},
                 "problem file");
    try {
        if (doc.contains("diffusion")) {
            const json& d = doc.at("diffusion");
            require_keys(d, {"D", "drift", "domain", "nodes"}, "diffusion");
            const double D = get_number_or(d, "D", 0.5, "diffusion");
            if (!(D > 0.0)) throw ParseError("diffusion.D must be positive");
            if (!d.contains("drift")) throw ParseError("missing key 'drift' in diffusion");
            DiffusionSpec s = parse_drift_block(d.at("drift"), D, pf.drift_label);
            if (d.contains("domain")) {
                const json& dom = d.at("domain");
                if (!dom.is_array() || dom.size() != 2) throw ParseError("diffusion.domain must be [r1, r2]");
                s.domain = Interval(parse_endpoint(dom[0]), parse_endpoint(dom[1]));
            }
            if (d.contains("nodes")) {
                const json& nd = d.at("nodes");
                if (!nd.is_array()) throw ParseError("diffusion.nodes must be an array of numbers");
                s.nodes.clear();
                for (const auto& v : nd) {
                    if (!v.is_number()) throw ParseError("diffusion.nodes must be an array of numbers");
                    s.nodes.push_back(v.get<double>());
                }
                std::sort(s.nodes.begin(), s.nodes.end());
            }
            pf.diffusion = std::move(s);
        }
        if (doc.contains("grid")) {
            const json& g = doc.at("grid");
            require_keys(g, {"lo", "hi", "n"}, "grid");
            const double n = get_number(g, "n", "grid");
            if (n != std::floor(n) || n < 3) throw ParseError("grid.n must be an integer >= 3");
            pf.grid = UniformGrid(get_number(g, "lo", "grid"), get_number(g, "hi", "grid"),
                                  static_cast<std::size_t>(n));
        }
    } catch (const InvariantError& e) {
        throw ParseError(e.what());
    } catch (const json::exception& e) {
        throw ParseError(std::string("problem file: ") + e.what());
    }
    return pf;
}

ProblemFile load_problem(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open problem file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_problem(ss.str());
}

}  // namespace natbound
