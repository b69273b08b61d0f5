#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"

#include "natbound/core.hpp"

namespace natbound {

/// b = -omega x, Phi = -omega x^2 / 4D.
DiffusionSpec ou_spec(double omega, double D = 0.5);
/// b = D (1 + 2a) / x on (0, inf), Phi = ((1 + 2a)/2) ln x.
DiffusionSpec bessel_spec(double a, double D = 0.5);
/// b = 2D psi_n'/psi_n for the n-th harmonic state of frequency omega; the
/// zeros of psi_n are registered as nodes.
DiffusionSpec hermite_spec(int n, double omega = 1.0, double D = 0.5);

/// Parsed problem document. Task blocks stay as JSON and are read by the
/// subcommands, which reject keys they do not know.
struct ProblemFile {
    nlohmann::json document;
    std::optional<DiffusionSpec> diffusion;
    std::string drift_label;  ///< preset call or expression text, for echoing
    std::optional<UniformGrid> grid;

    /// Task block by name, or an empty object.
    nlohmann::json block(const std::string& name) const;
};

ProblemFile parse_problem(const std::string& text);
ProblemFile load_problem(const std::filesystem::path& path);

/// Reads an endpoint: a number, or one of "-inf", "+inf", "inf".
ExtendedReal parse_endpoint(const nlohmann::json& j);

/// Throws ParseError naming the first key of `obj` outside `allowed`.
void require_keys(const nlohmann::json& obj, std::initializer_list<const char*> allowed, const std::string& where);

/// Typed member access with ParseError on a missing or mistyped key.
double get_number(const nlohmann::json& obj, const char* key, const std::string& where);
double get_number_or(const nlohmann::json& obj, const char* key, double fallback, const std::string& where);

}  // namespace natbound
