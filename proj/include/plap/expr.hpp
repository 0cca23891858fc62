#pragma once

#include <cctype>
#include <cmath>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace plap {

/// Small arithmetic expression grammar for coefficients and nonlinearities.
///
/// Variables: x1..xN (x is an alias for x1), t. Constant: pi.
/// Operators: + - * / ^ (power, right associative), unary minus.
/// Functions: abs, sin, cos, exp.
///
/// Evaluation follows the parse tree: strictly left-to-right within each
/// precedence level, no re-association. Two evaluations of the same parsed
/// expression on the same inputs are bit-identical.
class Expr {
public:
    /// Parses `text` against a domain with `dims` spatial variables.
    /// Throws std::invalid_argument with a character position on bad input.
    static Expr parse(const std::string& text, int dims) {
        Parser p(text, dims);
        Expr e;
        e.root_ = p.parse_expression();
        p.expect_end();
        e.uses_t_ = uses_t(*e.root_);
        e.text_ = text;
        return e;
    }

    /// Evaluates with spatial coordinates `x` (size >= dims used) and scalar t.
    double eval(std::span<const double> x, double t) const {
        return eval_node(*root_, x, t);
    }

    double eval_spatial(std::span<const double> x) const { return eval(x, 0.0); }

    bool depends_on_t() const { return uses_t_; }
    const std::string& text() const { return text_; }

private:
    enum class Op { Const, Var, Add, Sub, Mul, Div, Pow, Neg, Abs, Sin, Cos, Exp };

    struct Node {
        Op op;
        double value = 0.0; // Const
        int var = -1;       // Var: 0..N-1 spatial, -1 means t
        std::unique_ptr<Node> a, b;
    };

    std::shared_ptr<Node> root_;
    bool uses_t_ = false;
    std::string text_;

    static bool uses_t(const Node& n) {
        if (n.op == Op::Var && n.var == -1) return true;
        if (n.a && uses_t(*n.a)) return true;
        if (n.b && uses_t(*n.b)) return true;
        return false;
    }

    static double eval_node(const Node& n, std::span<const double> x, double t) {
        switch (n.op) {
            case Op::Const: return n.value;
            case Op::Var: return n.var < 0 ? t : x[static_cast<std::size_t>(n.var)];
            case Op::Add: return eval_node(*n.a, x, t) + eval_node(*n.b, x, t);
            case Op::Sub: return eval_node(*n.a, x, t) - eval_node(*n.b, x, t);
            case Op::Mul: return eval_node(*n.a, x, t) * eval_node(*n.b, x, t);
            case Op::Div: return eval_node(*n.a, x, t) / eval_node(*n.b, x, t);
            case Op::Pow: return std::pow(eval_node(*n.a, x, t), eval_node(*n.b, x, t));
            case Op::Neg: return -eval_node(*n.a, x, t);
            case Op::Abs: return std::abs(eval_node(*n.a, x, t));
            case Op::Sin: return std::sin(eval_node(*n.a, x, t));
            case Op::Cos: return std::cos(eval_node(*n.a, x, t));
            case Op::Exp: return std::exp(eval_node(*n.a, x, t));
        }
        return 0.0;
    }

    class Parser {
    public:
        Parser(const std::string& s, int dims) : s_(s), dims_(dims) {}

        std::unique_ptr<Node> parse_expression() {
            auto lhs = parse_term();
            for (;;) {
                skip_ws();
                if (match('+')) {
                    lhs = binary(Op::Add, std::move(lhs), parse_term());
                } else if (match('-')) {
                    lhs = binary(Op::Sub, std::move(lhs), parse_term());
                } else {
                    return lhs;
                }
            }
        }

        void expect_end() {
            skip_ws();
            if (pos_ != s_.size()) fail("unexpected trailing input");
        }

    private:
        const std::string& s_;
        int dims_;
        std::size_t pos_ = 0;

        [[noreturn]] void fail(const std::string& msg) const {
            throw std::invalid_argument("expression error at position " + std::to_string(pos_) +
                                        " in '" + s_ + "': " + msg);
        }

        void skip_ws() {
            while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
        }

        bool match(char c) {
            if (pos_ < s_.size() && s_[pos_] == c) {
                ++pos_;
                return true;
            }
            return false;
        }

        std::unique_ptr<Node> binary(Op op, std::unique_ptr<Node> a, std::unique_ptr<Node> b) {
            auto n = std::make_unique<Node>();
            n->op = op;
            n->a = std::move(a);
            n->b = std::move(b);
            return n;
        }

        std::unique_ptr<Node> parse_term() {
            auto lhs = parse_factor();
            for (;;) {
                skip_ws();
                if (match('*')) {
                    lhs = binary(Op::Mul, std::move(lhs), parse_factor());
                } else if (match('/')) {
                    lhs = binary(Op::Div, std::move(lhs), parse_factor());
                } else {
                    return lhs;
                }
            }
        }

        // power binds tighter than unary minus on the left: -x^2 = -(x^2)
        std::unique_ptr<Node> parse_factor() {
            skip_ws();
            if (match('-')) {
                auto n = std::make_unique<Node>();
                n->op = Op::Neg;
                n->a = parse_factor();
                return n;
            }
            auto base = parse_primary();
            skip_ws();
            if (match('^')) {
                return binary(Op::Pow, std::move(base), parse_factor());
            }
            return base;
        }

        std::unique_ptr<Node> parse_primary() {
            skip_ws();
            if (pos_ >= s_.size()) fail("unexpected end of expression");
            char c = s_[pos_];
            if (c == '(') {
                ++pos_;
                auto inner = parse_expression();
                skip_ws();
                if (!match(')')) fail("missing ')'");
                return inner;
            }
            if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
            if (std::isalpha(static_cast<unsigned char>(c))) return parse_ident();
            fail(std::string("unexpected character '") + c + "'");
        }

        std::unique_ptr<Node> parse_number() {
            std::size_t start = pos_;
            while (pos_ < s_.size() &&
                   (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.' ||
                    s_[pos_] == 'e' || s_[pos_] == 'E' ||
                    ((s_[pos_] == '+' || s_[pos_] == '-') && pos_ > start &&
                     (s_[pos_ - 1] == 'e' || s_[pos_ - 1] == 'E'))))
                ++pos_;
            auto n = std::make_unique<Node>();
            n->op = Op::Const;
            try {
                n->value = std::stod(s_.substr(start, pos_ - start));
            } catch (const std::exception&) {
                pos_ = start;
                fail("malformed number");
            }
            return n;
        }

        std::unique_ptr<Node> parse_ident() {
            std::size_t start = pos_;
            while (pos_ < s_.size() &&
                   (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
                ++pos_;
            std::string name = s_.substr(start, pos_ - start);
            if (name == "pi") {
                auto n = std::make_unique<Node>();
                n->op = Op::Const;
                n->value = 3.14159265358979323846;
                return n;
            }
            if (name == "t") {
                auto n = std::make_unique<Node>();
                n->op = Op::Var;
                n->var = -1;
                return n;
            }
            if (name == "x") name = "x1";
            if (name.size() >= 2 && name[0] == 'x') {
                int idx = 0;
                try {
                    idx = std::stoi(name.substr(1));
                } catch (const std::exception&) {
                    idx = 0;
                }
                if (idx >= 1 && idx <= dims_) {
                    auto n = std::make_unique<Node>();
                    n->op = Op::Var;
                    n->var = idx - 1;
                    return n;
                }
                pos_ = start;
                fail("variable '" + name + "' out of range for " + std::to_string(dims_) +
                     " dimension(s)");
            }
            // function call
            skip_ws();
            if (!match('(')) {
                pos_ = start;
                fail("unknown identifier '" + name + "'");
            }
            auto arg = parse_expression();
            skip_ws();
            if (!match(')')) fail("missing ')' after function argument");
            auto n = std::make_unique<Node>();
            if (name == "abs") n->op = Op::Abs;
            else if (name == "sin") n->op = Op::Sin;
            else if (name == "cos") n->op = Op::Cos;
            else if (name == "exp") n->op = Op::Exp;
            else {
                pos_ = start;
                fail("unknown function '" + name + "'");
            }
            n->a = std::move(arg);
            return n;
        }
    };
};

} // namespace plap
