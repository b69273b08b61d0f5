#pragma once

#include <memory>
#include <string>
#include <string_view>

#include "natbound/core.hpp"

namespace natbound {

namespace detail {
struct ExprNode;
}

/// Arithmetic formula in one variable x: + - * / ^, unary minus, exp, ln,
/// parentheses and numeric literals. Precedence, tightest first:
/// ^ (right-associative), unary -, * /, + -.
class Expression {
public:
    /// Throws ParseError carrying the byte offset of the offending token.
    static Expression parse(std::string_view text);

    /// Throws DomainError (division by zero, ln of a non-positive value,
    /// non-integer power of a negative base) naming the offending x.
    double operator()(double x) const;
    Jet operator()(const Jet& x) const;

    const std::string& text() const { return text_; }

private:
    Expression(std::string text, std::shared_ptr<const detail::ExprNode> root)
        : text_(std::move(text)), root_(std::move(root)) {}

    std::string text_;
    std::shared_ptr<const detail::ExprNode> root_;
};

ScalarFn parse_drift_expression(std::string_view text);

/// Parsed expression as a Drift with exact jets.
Drift parse_drift(std::string_view text);

}  // namespace natbound
