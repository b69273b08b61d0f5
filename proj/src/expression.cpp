#include "natbound/expression.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <vector>

namespace natbound {

namespace detail {

enum class Op { Number, Var, Add, Sub, Mul, Div, Pow, Neg, Exp, Ln };

struct ExprNode {
    Op op;
    double number = 0.0;
    std::unique_ptr<ExprNode> lhs;
    std::unique_ptr<ExprNode> rhs;
};

}  // namespace detail

namespace {

using detail::ExprNode;
using detail::Op;
using NodePtr = std::unique_ptr<ExprNode>;

NodePtr make(Op op, NodePtr lhs = nullptr, NodePtr rhs = nullptr) {
    auto n = std::make_unique<ExprNode>();
    n->op = op;
    n->lhs = std::move(lhs);
    n->rhs = std::move(rhs);
    return n;
}

class Parser {
public:
    explicit Parser(std::string_view text) : text_(text) {}

    NodePtr parse() {
        skip_space();
        if (pos_ == text_.size()) fail("empty expression");
        auto node = expr();
        skip_space();
        if (pos_ != text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
        return node;
    }

private:
    // expr := term (('+' | '-') term)*
    NodePtr expr() {
        auto lhs = term();
        for (;;) {
            skip_space();
            if (accept('+')) {
                lhs = make(Op::Add, std::move(lhs), term());
            } else if (accept('-')) {
                lhs = make(Op::Sub, std::move(lhs), term());
            } else {
                return lhs;
            }
        }
    }

    // term := unary (('*' | '/') unary)*
    NodePtr term() {
        auto lhs = unary();
        for (;;) {
            skip_space();
            if (accept('*')) {
                lhs = make(Op::Mul, std::move(lhs), unary());
            } else if (accept('/')) {
                lhs = make(Op::Div, std::move(lhs), unary());
            } else {
                return lhs;
            }
        }
    }

    // unary := '-' unary | power
    NodePtr unary() {
        skip_space();
        if (accept('-')) return make(Op::Neg, unary());
        if (accept('+')) return unary();
        return power();
    }

    // power := primary ('^' unary)?   (right-associative through unary)
    NodePtr power() {
        auto base = primary();
        skip_space();
        if (accept('^')) return make(Op::Pow, std::move(base), unary());
        return base;
    }

    NodePtr primary() {
        skip_space();
        if (pos_ == text_.size()) fail("unexpected end of expression");
        const char c = text_[pos_];
        if (c == '(') {
            ++pos_;
            auto inner = expr();
            skip_space();
            if (!accept(')')) fail("expected ')'");
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c))) {
            const std::size_t start = pos_;
            while (pos_ < text_.size() && std::isalnum(static_cast<unsigned char>(text_[pos_]))) ++pos_;
            const std::string_view name = text_.substr(start, pos_ - start);
            if (name == "x") return make(Op::Var);
            Op fn;
            if (name == "exp") {
                fn = Op::Exp;
            } else if (name == "ln") {
                fn = Op::Ln;
            } else {
                pos_ = start;
                fail("unknown identifier '" + std::string(name) + "'");
            }
            skip_space();
            if (!accept('(')) fail("expected '(' after " + std::string(name));
            auto arg = expr();
            skip_space();
            if (!accept(')')) fail("expected ')'");
            return make(fn, std::move(arg));
        }
        fail("unexpected '" + std::string(1, c) + "'");
    }

    NodePtr number() {
        const std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.')) {
            ++pos_;
        }
        if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
            std::size_t p = pos_ + 1;
            if (p < text_.size() && (text_[p] == '+' || text_[p] == '-')) ++p;
            if (p < text_.size() && std::isdigit(static_cast<unsigned char>(text_[p]))) {
                pos_ = p;
                while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
            }
        }
        double value = 0.0;
        const auto* first = text_.data() + start;
        const auto* last = text_.data() + pos_;
        auto [ptr, ec] = std::from_chars(first, last, value);
        if (ec != std::errc() || ptr != last) {
            pos_ = start;
            fail("malformed number");
        }
        auto n = make(Op::Number);
        n->number = value;
        return n;
    }

    bool accept(char c) {
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void skip_space() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    [[noreturn]] void fail(const std::string& msg) const {
        throw ParseError("expression syntax error at position " + std::to_string(pos_) + ": " + msg,
                         pos_);
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

[[noreturn]] void eval_fail(const std::string& what, double x) {
    throw DomainError(what + " at x=" + std::to_string(x));
}

template <class T>
T eval(const ExprNode& n, const T& x, double x0) {
    switch (n.op) {
        case Op::Number: return T(n.number);
        case Op::Var: return x;
        case Op::Add: return eval(*n.lhs, x, x0) + eval(*n.rhs, x, x0);
        case Op::Sub: return eval(*n.lhs, x, x0) - eval(*n.rhs, x, x0);
        case Op::Mul: return eval(*n.lhs, x, x0) * eval(*n.rhs, x, x0);
        case Op::Div: {
            const T den = eval(*n.rhs, x, x0);
            if (value_of(den) == 0.0) eval_fail("division by zero", x0);
            return eval(*n.lhs, x, x0) / den;
        }
        case Op::Pow: {
            const T base = eval(*n.lhs, x, x0);
            const T ex = eval(*n.rhs, x, x0);
            const double b = value_of(base);
            const double e = value_of(ex);
            if (b < 0.0 && e != std::floor(e)) eval_fail("non-integer power of a negative base", x0);
            if (b == 0.0 && e < 0.0) eval_fail("division by zero", x0);
            if constexpr (std::is_same_v<T, double>) {
                return std::pow(base, ex);
            } else {
                return natbound::pow(base, ex);
            }
        }
        case Op::Neg: return -eval(*n.lhs, x, x0);
        case Op::Exp: {
            using std::exp;
            using natbound::exp;
            return exp(eval(*n.lhs, x, x0));
        }
        case Op::Ln: {
            const T a = eval(*n.lhs, x, x0);
            if (!(value_of(a) > 0.0)) eval_fail("ln of a non-positive value", x0);
            using std::log;
            using natbound::log;
            return log(a);
        }
    }
    return T(0.0);
}

}  // namespace

Expression Expression::parse(std::string_view text) {
    Parser p(text);
    std::shared_ptr<const ExprNode> root = p.parse();
    return Expression(std::string(text), std::move(root));
}

double Expression::operator()(double x) const { return eval<double>(*root_, x, x); }

Jet Expression::operator()(const Jet& x) const { return eval<Jet>(*root_, x, x.v); }

ScalarFn parse_drift_expression(std::string_view text) {
    auto e = Expression::parse(text);
    return [e](double x) { return e(x); };
}

Drift parse_drift(std::string_view text) {
    auto e = Expression::parse(text);
    return Drift([e](double x) { return e(x); }, [e](const Jet& x) { return e(x); });
}

}  // namespace natbound
