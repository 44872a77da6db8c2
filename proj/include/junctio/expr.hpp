#pragma once

// Arithmetic expressions over the position `x` and the control `a`.
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | primary
//   primary := number | 'x' | 'a' | func '(' args ')' | '(' expr ')'
//   func    := abs | exp (one argument), min | max (two arguments)
//
// Expressions are parsed once into a node table and compiled to a postfix
// program; evaluation walks the program on a fixed-size stack.

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace junctio {

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : std::runtime_error("syntax error at byte " + std::to_string(offset) + ": " + what),
          offset_(offset) {}
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

class EvalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class Expr {
public:
    enum class Op : unsigned char { Lit, VarX, VarA, Neg, Add, Sub, Mul, Div, Abs, Exp, Min, Max };

    struct Node {
        Op op = Op::Lit;
        double value = 0.0;
        int lhs = -1;
        int rhs = -1;
    };

    Expr() : Expr(constant(0.0)) {}

    static Expr constant(double v) {
        Expr e(0);
        e.nodes_.push_back({Op::Lit, v, -1, -1});
        e.root_ = 0;
        e.compile();
        return e;
    }

    static Expr parse(std::string_view source);

    /// Throws EvalError on division by zero.
    double operator()(double x, double a) const {
        std::array<double, kMaxStack> stack;
        std::size_t top = 0;
        for (const Node& n : program_) {
            switch (n.op) {
            case Op::Lit: stack[top++] = n.value; break;
            case Op::VarX: stack[top++] = x; break;
            case Op::VarA: stack[top++] = a; break;
            case Op::Neg: stack[top - 1] = -stack[top - 1]; break;
            case Op::Abs: stack[top - 1] = std::fabs(stack[top - 1]); break;
            case Op::Exp: stack[top - 1] = std::exp(stack[top - 1]); break;
            default: {
                const double r = stack[--top];
                double& l = stack[top - 1];
                switch (n.op) {
                case Op::Add: l += r; break;
                case Op::Sub: l -= r; break;
                case Op::Mul: l *= r; break;
                case Op::Div:
                    if (r == 0.0) throw EvalError("division by zero");
                    l /= r;
                    break;
                case Op::Min: l = std::fmin(l, r); break;
                case Op::Max: l = std::fmax(l, r); break;
                default: break;
                }
            }
            }
        }
        return stack[0];
    }

    /// Fully parenthesised infix form; parse(str()) reproduces the same tree.
    std::string str() const { return print(root_); }

    /// Structural equality of the parse trees.
    bool same_tree(const Expr& other) const { return same(root_, other, other.root_); }

    bool depends_on_x() const { return uses(Op::VarX); }
    bool depends_on_a() const { return uses(Op::VarA); }

    const std::string& source() const noexcept { return source_; }

private:
    static constexpr std::size_t kMaxStack = 64;

    explicit Expr(int) {}

    int add(Node n) {
        nodes_.push_back(n);
        return static_cast<int>(nodes_.size()) - 1;
    }

    bool uses(Op op) const {
        for (const Node& n : nodes_)
            if (n.op == op) return true;
        return false;
    }

    void emit(int id, std::size_t depth, std::size_t& max_depth) {
        const Node& n = nodes_[static_cast<std::size_t>(id)];
        if (n.lhs >= 0) emit(n.lhs, depth, max_depth);
        if (n.rhs >= 0) emit(n.rhs, depth + 1, max_depth);
        max_depth = std::max(max_depth, depth + 1);
        program_.push_back({n.op, n.value, -1, -1});
    }

    void compile() {
        program_.clear();
        std::size_t max_depth = 0;
        emit(root_, 0, max_depth);
        if (max_depth > kMaxStack) throw ParseError("expression nests too deeply", 0);
    }

    static std::string number(double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return buf;
    }

    std::string print(int id) const {
        const Node& n = nodes_[static_cast<std::size_t>(id)];
        switch (n.op) {
        case Op::Lit: return number(n.value);
        case Op::VarX: return "x";
        case Op::VarA: return "a";
        case Op::Neg: return "(-" + print(n.lhs) + ")";
        case Op::Add: return "(" + print(n.lhs) + " + " + print(n.rhs) + ")";
        case Op::Sub: return "(" + print(n.lhs) + " - " + print(n.rhs) + ")";
        case Op::Mul: return "(" + print(n.lhs) + " * " + print(n.rhs) + ")";
        case Op::Div: return "(" + print(n.lhs) + " / " + print(n.rhs) + ")";
        case Op::Abs: return "abs(" + print(n.lhs) + ")";
        case Op::Exp: return "exp(" + print(n.lhs) + ")";
        case Op::Min: return "min(" + print(n.lhs) + ", " + print(n.rhs) + ")";
        case Op::Max: return "max(" + print(n.lhs) + ", " + print(n.rhs) + ")";
        }
        return {};
    }

    bool same(int id, const Expr& other, int oid) const {
        const Node& a = nodes_[static_cast<std::size_t>(id)];
        const Node& b = other.nodes_[static_cast<std::size_t>(oid)];
        if (a.op != b.op) return false;
        if (a.op == Op::Lit) return a.value == b.value;
        if ((a.lhs >= 0) != (b.lhs >= 0) || (a.rhs >= 0) != (b.rhs >= 0)) return false;
        if (a.lhs >= 0 && !same(a.lhs, other, b.lhs)) return false;
        if (a.rhs >= 0 && !same(a.rhs, other, b.rhs)) return false;
        return true;
    }

    friend class ExprParser;

    std::vector<Node> nodes_;
    std::vector<Node> program_;
    int root_ = -1;
    std::string source_;
};

class ExprParser {
public:
    explicit ExprParser(std::string_view src) : src_(src), expr_(0) {}

    Expr run() {
        skip();
        if (pos_ >= src_.size()) throw ParseError("empty expression", pos_);
        expr_.root_ = expression(0);
        skip();
        if (pos_ != src_.size())
            throw ParseError(std::string("unexpected '") + src_[pos_] + "'", pos_);
        expr_.source_ = std::string(src_);
        expr_.compile();
        return std::move(expr_);
    }

private:
    static constexpr int kMaxNesting = 48;

    void skip() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip();
        if (pos_ < src_.size() && src_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c) {
        if (!accept(c)) {
            if (pos_ >= src_.size())
                throw ParseError(std::string("expected '") + c + "' but input ended", pos_);
            throw ParseError(std::string("expected '") + c + "'", pos_);
        }
    }

    void guard(int nesting) const {
        if (nesting > kMaxNesting) throw ParseError("expression nests too deeply", pos_);
    }

    int expression(int nesting) {
        guard(nesting);
        int lhs = term(nesting);
        for (;;) {
            if (accept('+')) lhs = expr_.add({Expr::Op::Add, 0.0, lhs, term(nesting)});
            else if (accept('-')) lhs = expr_.add({Expr::Op::Sub, 0.0, lhs, term(nesting)});
            else return lhs;
        }
    }

    int term(int nesting) {
        int lhs = unary(nesting);
        for (;;) {
            if (accept('*')) lhs = expr_.add({Expr::Op::Mul, 0.0, lhs, unary(nesting)});
            else if (accept('/')) lhs = expr_.add({Expr::Op::Div, 0.0, lhs, unary(nesting)});
            else return lhs;
        }
    }

    int unary(int nesting) {
        guard(nesting);
        if (accept('-')) return expr_.add({Expr::Op::Neg, 0.0, unary(nesting + 1), -1});
        return primary(nesting);
    }

    int primary(int nesting) {
        skip();
        if (pos_ >= src_.size()) throw ParseError("unexpected end of input", pos_);
        const char c = src_[pos_];
        if (c == '(') {
            ++pos_;
            const int inner = expression(nesting + 1);
            expect(')');
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return literal();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier(nesting);
        throw ParseError(std::string("unexpected '") + c + "'", pos_);
    }

    int literal() {
        const std::size_t start = pos_;
        while (pos_ < src_.size() &&
               (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.'))
            ++pos_;
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            std::size_t p = pos_ + 1;
            if (p < src_.size() && (src_[p] == '+' || src_[p] == '-')) ++p;
            if (p < src_.size() && std::isdigit(static_cast<unsigned char>(src_[p]))) {
                pos_ = p;
                while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
            }
        }
        double v = 0.0;
        const auto* first = src_.data() + start;
        const auto* last = src_.data() + pos_;
        auto [ptr, ec] = std::from_chars(first, last, v);
        if (ec != std::errc() || ptr != last) throw ParseError("malformed number", start);
        return expr_.add({Expr::Op::Lit, v, -1, -1});
    }

    int identifier(int nesting) {
        const std::size_t start = pos_;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
            ++pos_;
        const std::string_view name = src_.substr(start, pos_ - start);
        if (name == "x") return expr_.add({Expr::Op::VarX, 0.0, -1, -1});
        if (name == "a") return expr_.add({Expr::Op::VarA, 0.0, -1, -1});

        Expr::Op op;
        int arity;
        if (name == "abs") op = Expr::Op::Abs, arity = 1;
        else if (name == "exp") op = Expr::Op::Exp, arity = 1;
        else if (name == "min") op = Expr::Op::Min, arity = 2;
        else if (name == "max") op = Expr::Op::Max, arity = 2;
        else throw ParseError("unknown identifier '" + std::string(name) + "'", start);

        expect('(');
        const int first = expression(nesting + 1);
        int second = -1;
        if (arity == 2) {
            expect(',');
            second = expression(nesting + 1);
        }
        expect(')');
        return expr_.add({op, 0.0, first, second});
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    Expr expr_;
};

inline Expr Expr::parse(std::string_view source) { return ExprParser(source).run(); }

}  // namespace junctio
