#pragma once

// Scalar expressions in one variable `s`.
//
// Grammar (lowest to highest precedence):
//   expr    := sum (relop sum)?          relop: < <= > >= == !=
//   sum     := product (('+'|'-') product)*
//   product := unary (('*'|'/') unary)*
//   unary   := ('-'|'+') unary | power
//   power   := atom ('^' unary)?         right associative, -s^2 == -(s^2)
//   atom    := number | s | pi | e | name '(' expr (',' expr)* ')' | '(' expr ')'
//
// Functions: exp log sqrt sin cos abs (1 argument), max min (2 arguments),
// piecewise(c1, v1, ..., ck, vk, default) with k >= 1. A condition is true
// when it evaluates to a nonzero value; only the selected branch is evaluated.

#include <natgrow/error.hpp>

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

namespace natgrow {

enum class ExprOp : std::uint8_t {
    constant,
    variable,
    negate,
    add,
    subtract,
    multiply,
    divide,
    power,
    exp,
    log,
    sqrt,
    sin,
    cos,
    abs,
    max,
    min,
    less,
    less_equal,
    greater,
    greater_equal,
    equal,
    not_equal,
    piecewise,
};

struct ExprNode {
    ExprOp op = ExprOp::constant;
    double value = 0.0;
    std::uint32_t first = 0; // offset into the argument list
    std::uint32_t count = 0; // number of children

    bool operator==(const ExprNode&) const = default;
};

/// Immutable expression tree stored as a flat node array.
class ExprAst {
public:
    ExprAst() = default;

    double operator()(double s) const { return eval(root_, s); }

    /// Fully parenthesised text that parses back to an identical tree.
    std::string str() const {
        std::string out;
        print(root_, out);
        return out;
    }

    bool empty() const noexcept { return nodes_.empty(); }
    std::size_t size() const noexcept { return nodes_.size(); }

    bool operator==(const ExprAst& other) const { return equal(root_, other, other.root_); }

private:
    friend class ExprParser;

    std::vector<ExprNode> nodes_;
    std::vector<std::uint32_t> args_;
    std::uint32_t root_ = 0;

    std::uint32_t child(const ExprNode& n, std::uint32_t i) const { return args_[n.first + i]; }

    double eval(std::uint32_t id, double s) const {
        const ExprNode& n = nodes_[id];
        switch (n.op) {
        case ExprOp::constant: return n.value;
        case ExprOp::variable: return s;
        case ExprOp::negate: return -eval(child(n, 0), s);
        case ExprOp::add: return eval(child(n, 0), s) + eval(child(n, 1), s);
        case ExprOp::subtract: return eval(child(n, 0), s) - eval(child(n, 1), s);
        case ExprOp::multiply: return eval(child(n, 0), s) * eval(child(n, 1), s);
        case ExprOp::divide: return eval(child(n, 0), s) / eval(child(n, 1), s);
        case ExprOp::power: return pow_node(eval(child(n, 0), s), eval(child(n, 1), s));
        case ExprOp::exp: return std::exp(eval(child(n, 0), s));
        case ExprOp::log: return std::log(eval(child(n, 0), s));
        case ExprOp::sqrt: return std::sqrt(eval(child(n, 0), s));
        case ExprOp::sin: return std::sin(eval(child(n, 0), s));
        case ExprOp::cos: return std::cos(eval(child(n, 0), s));
        case ExprOp::abs: return std::abs(eval(child(n, 0), s));
        case ExprOp::max: return std::fmax(eval(child(n, 0), s), eval(child(n, 1), s));
        case ExprOp::min: return std::fmin(eval(child(n, 0), s), eval(child(n, 1), s));
        case ExprOp::less: return eval(child(n, 0), s) < eval(child(n, 1), s) ? 1.0 : 0.0;
        case ExprOp::less_equal: return eval(child(n, 0), s) <= eval(child(n, 1), s) ? 1.0 : 0.0;
        case ExprOp::greater: return eval(child(n, 0), s) > eval(child(n, 1), s) ? 1.0 : 0.0;
        case ExprOp::greater_equal: return eval(child(n, 0), s) >= eval(child(n, 1), s) ? 1.0 : 0.0;
        case ExprOp::equal: return eval(child(n, 0), s) == eval(child(n, 1), s) ? 1.0 : 0.0;
        case ExprOp::not_equal: return eval(child(n, 0), s) != eval(child(n, 1), s) ? 1.0 : 0.0;
        case ExprOp::piecewise: {
            const std::uint32_t pairs = (n.count - 1) / 2;
            for (std::uint32_t k = 0; k < pairs; ++k) {
                if (eval(child(n, 2 * k), s) != 0.0) return eval(child(n, 2 * k + 1), s);
            }
            return eval(child(n, n.count - 1), s);
        }
        }
        return std::numeric_limits<double>::quiet_NaN();
    }

    // Integer exponents go through repeated multiplication so that negative
    // bases with integral powers stay real.
    static double pow_node(double base, double expo) {
        if (expo == 2.0) return base * base;
        if (expo == 1.0) return base;
        return std::pow(base, expo);
    }

    static const char* op_name(ExprOp op) {
        switch (op) {
        case ExprOp::exp: return "exp";
        case ExprOp::log: return "log";
        case ExprOp::sqrt: return "sqrt";
        case ExprOp::sin: return "sin";
        case ExprOp::cos: return "cos";
        case ExprOp::abs: return "abs";
        case ExprOp::max: return "max";
        case ExprOp::min: return "min";
        case ExprOp::piecewise: return "piecewise";
        case ExprOp::add: return " + ";
        case ExprOp::subtract: return " - ";
        case ExprOp::multiply: return " * ";
        case ExprOp::divide: return " / ";
        case ExprOp::power: return "^";
        case ExprOp::less: return " < ";
        case ExprOp::less_equal: return " <= ";
        case ExprOp::greater: return " > ";
        case ExprOp::greater_equal: return " >= ";
        case ExprOp::equal: return " == ";
        case ExprOp::not_equal: return " != ";
        default: return "";
        }
    }

    void print(std::uint32_t id, std::string& out) const {
        const ExprNode& n = nodes_[id];
        switch (n.op) {
        case ExprOp::constant: {
            char buf[40];
            std::snprintf(buf, sizeof buf, "%.17g", n.value);
            out += buf;
            return;
        }
        case ExprOp::variable: out += 's'; return;
        case ExprOp::negate:
            out += "(-";
            print(child(n, 0), out);
            out += ')';
            return;
        case ExprOp::add:
        case ExprOp::subtract:
        case ExprOp::multiply:
        case ExprOp::divide:
        case ExprOp::power:
        case ExprOp::less:
        case ExprOp::less_equal:
        case ExprOp::greater:
        case ExprOp::greater_equal:
        case ExprOp::equal:
        case ExprOp::not_equal:
            out += '(';
            print(child(n, 0), out);
            out += op_name(n.op);
            print(child(n, 1), out);
            out += ')';
            return;
        default:
            out += op_name(n.op);
            out += '(';
            for (std::uint32_t i = 0; i < n.count; ++i) {
                if (i) out += ", ";
                print(child(n, i), out);
            }
            out += ')';
            return;
        }
    }

    bool equal(std::uint32_t a, const ExprAst& other, std::uint32_t b) const {
        if (empty() || other.empty()) return empty() == other.empty();
        const ExprNode& x = nodes_[a];
        const ExprNode& y = other.nodes_[b];
        if (x.op != y.op || x.count != y.count) return false;
        if (x.op == ExprOp::constant && x.value != y.value) return false;
        for (std::uint32_t i = 0; i < x.count; ++i) {
            if (!equal(child(x, i), other, other.child(y, i))) return false;
        }
        return true;
    }
};

class ExprParser {
public:
    explicit ExprParser(std::string_view text) : text_(text) {}

    ExprAst parse() {
        if (text_.find_first_not_of(" \t\n\r") == std::string_view::npos) {
            throw ParseError("empty expression", 0);
        }
        ast_.root_ = parse_compare();
        skip_space();
        if (pos_ != text_.size()) throw ParseError("unexpected character '" + std::string(1, text_[pos_]) + "'", pos_);
        return std::move(ast_);
    }

private:
    std::string_view text_;
    std::size_t pos_ = 0;
    ExprAst ast_;

    std::uint32_t push(ExprOp op, double value, std::initializer_list<std::uint32_t> kids) {
        return push(op, value, std::vector<std::uint32_t>(kids));
    }

    std::uint32_t push(ExprOp op, double value, const std::vector<std::uint32_t>& kids) {
        ExprNode n;
        n.op = op;
        n.value = value;
        n.first = static_cast<std::uint32_t>(ast_.args_.size());
        n.count = static_cast<std::uint32_t>(kids.size());
        ast_.args_.insert(ast_.args_.end(), kids.begin(), kids.end());
        ast_.nodes_.push_back(n);
        return static_cast<std::uint32_t>(ast_.nodes_.size() - 1);
    }

    void skip_space() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool accept(std::string_view token) {
        skip_space();
        if (text_.substr(pos_, token.size()) == token) {
            pos_ += token.size();
            return true;
        }
        return false;
    }

    std::uint32_t parse_compare() {
        std::uint32_t lhs = parse_sum();
        static constexpr std::pair<std::string_view, ExprOp> relops[] = {
            {"<=", ExprOp::less_equal}, {">=", ExprOp::greater_equal}, {"==", ExprOp::equal},
            {"!=", ExprOp::not_equal},  {"<", ExprOp::less},           {">", ExprOp::greater},
        };
        for (const auto& [tok, op] : relops) {
            if (accept(tok)) return push(op, 0.0, {lhs, parse_sum()});
        }
        return lhs;
    }

    std::uint32_t parse_sum() {
        std::uint32_t lhs = parse_product();
        for (;;) {
            if (accept("+")) {
                lhs = push(ExprOp::add, 0.0, {lhs, parse_product()});
            } else if (accept("-")) {
                lhs = push(ExprOp::subtract, 0.0, {lhs, parse_product()});
            } else {
                return lhs;
            }
        }
    }

    std::uint32_t parse_product() {
        std::uint32_t lhs = parse_unary();
        for (;;) {
            if (accept("*")) {
                lhs = push(ExprOp::multiply, 0.0, {lhs, parse_unary()});
            } else if (accept("/")) {
                lhs = push(ExprOp::divide, 0.0, {lhs, parse_unary()});
            } else {
                return lhs;
            }
        }
    }

    std::uint32_t parse_unary() {
        if (accept("-")) return push(ExprOp::negate, 0.0, {parse_unary()});
        if (accept("+")) return parse_unary();
        return parse_power();
    }

    std::uint32_t parse_power() {
        std::uint32_t base = parse_atom();
        if (accept("^")) return push(ExprOp::power, 0.0, {base, parse_unary()});
        return base;
    }

    std::uint32_t parse_atom() {
        skip_space();
        if (pos_ >= text_.size()) throw ParseError("unexpected end of expression", pos_);
        const char c = text_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_name();
        if (c == '(') {
            ++pos_;
            std::uint32_t inner = parse_compare();
            if (!accept(")")) throw ParseError("expected ')'", pos_);
            return inner;
        }
        throw ParseError("unexpected character '" + std::string(1, c) + "'", pos_);
    }

    std::uint32_t parse_number() {
        const std::size_t start = pos_;
        std::string buf(text_.substr(pos_));
        char* end = nullptr;
        const double v = std::strtod(buf.c_str(), &end);
        const std::size_t used = static_cast<std::size_t>(end - buf.c_str());
        if (used == 0) throw ParseError("malformed number", start);
        pos_ += used;
        return push(ExprOp::constant, v, {});
    }

    std::uint32_t parse_name() {
        const std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
            ++pos_;
        }
        const std::string_view name = text_.substr(start, pos_ - start);
        if (name == "s") return push(ExprOp::variable, 0.0, {});
        if (name == "pi") return push(ExprOp::constant, std::numbers::pi, {});
        if (name == "e") return push(ExprOp::constant, std::numbers::e, {});

        struct Fn {
            std::string_view name;
            ExprOp op;
            int arity; // -1: piecewise
        };
        static constexpr Fn table[] = {
            {"exp", ExprOp::exp, 1},   {"log", ExprOp::log, 1}, {"sqrt", ExprOp::sqrt, 1},
            {"sin", ExprOp::sin, 1},   {"cos", ExprOp::cos, 1}, {"abs", ExprOp::abs, 1},
            {"max", ExprOp::max, 2},   {"min", ExprOp::min, 2}, {"piecewise", ExprOp::piecewise, -1},
        };
        const Fn* fn = nullptr;
        for (const Fn& f : table) {
            if (f.name == name) fn = &f;
        }
        if (!fn) throw ParseError("unknown identifier '" + std::string(name) + "'", start);
        if (!accept("(")) throw ParseError("expected '(' after " + std::string(name), pos_);

        std::vector<std::uint32_t> kids;
        kids.push_back(parse_compare());
        while (accept(",")) kids.push_back(parse_compare());
        if (!accept(")")) throw ParseError("expected ')'", pos_);

        const bool ok = fn->arity >= 0 ? static_cast<int>(kids.size()) == fn->arity
                                       : kids.size() >= 3 && kids.size() % 2 == 1;
        if (!ok) {
            throw ParseError("wrong number of arguments for " + std::string(name) + " (got " +
                                 std::to_string(kids.size()) + ")",
                             start);
        }
        return push(fn->op, 0.0, kids);
    }
};

inline ExprAst parse_expression(std::string_view text) { return ExprParser(text).parse(); }

} // namespace natgrow
