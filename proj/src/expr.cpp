#include "bsynth/expr.hpp"

#include <algorithm>
#include <array>
#include <cassert>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>

namespace bsynth {

namespace {

using NodePtr = std::shared_ptr<const ExprNode>;

NodePtr make(Op op, double value, std::size_t index, int exponent, NodePtr a, NodePtr b) {
    auto n = std::make_shared<ExprNode>();
    n->op = op;
    n->value = value;
    n->index = index;
    n->exponent = exponent;
    n->a = std::move(a);
    n->b = std::move(b);
    return n;
}

const NodePtr& zero_node() {
    static const NodePtr zero = make(Op::Const, 0.0, 0, 0, nullptr, nullptr);
    return zero;
}

NodePtr share(const Expr& e) {
    return e.shared();
}

Expr node1(Op op, const Expr& a) {
    return Expr(make(op, 0.0, 0, 0, share(a), nullptr));
}

Expr node2(Op op, const Expr& a, const Expr& b) {
    return Expr(make(op, 0.0, 0, 0, share(a), share(b)));
}


}  // namespace

ParseError::ParseError(const std::string& message, std::size_t position)
    : std::runtime_error(message), position_(position) {}

Expr::Expr() : node_(zero_node()) {}

Expr Expr::constant(double value) {
    return Expr(make(Op::Const, value, 0, 0, nullptr, nullptr));
}

Expr Expr::variable(std::size_t index) {
    return Expr(make(Op::Var, 0.0, index, 0, nullptr, nullptr));
}

Op Expr::op() const { return node_->op; }
double Expr::value() const { return node_->value; }
std::size_t Expr::index() const { return node_->index; }
int Expr::exponent() const { return node_->exponent; }

Expr Expr::arg(std::size_t i) const {
    return Expr(i == 0 ? node_->a : node_->b);
}

std::size_t Expr::arity() const {
    if (node_->b) return 2;
    if (node_->a) return 1;
    return 0;
}

namespace {

std::size_t bound_of(const ExprNode* n) {
    if (n->op == Op::Var) return n->index + 1;
    std::size_t r = 0;
    if (n->a) r = std::max(r, bound_of(n->a.get()));
    if (n->b) r = std::max(r, bound_of(n->b.get()));
    return r;
}

bool uses(const ExprNode* n, std::size_t index) {
    if (n->op == Op::Var) return n->index == index;
    return (n->a && uses(n->a.get(), index)) || (n->b && uses(n->b.get(), index));
}

std::size_t count(const ExprNode* n) {
    return 1 + (n->a ? count(n->a.get()) : 0) + (n->b ? count(n->b.get()) : 0);
}

}  // namespace

std::size_t Expr::variable_bound() const { return bound_of(node_.get()); }
bool Expr::uses_variable(std::size_t index) const { return uses(node_.get(), index); }
std::size_t Expr::node_count() const { return count(node_.get()); }

// ---------------------------------------------------------------------------
// Builders

Expr operator-(const Expr& a) {
    if (a.is_constant()) return Expr::constant(-a.value());
    if (a.op() == Op::Neg) return a.arg(0);
    return node1(Op::Neg, a);
}

Expr operator+(const Expr& a, const Expr& b) {
    if (a.is_constant() && b.is_constant()) return Expr::constant(a.value() + b.value());
    if (a.is_constant(0.0)) return b;
    if (b.is_constant(0.0)) return a;
    return node2(Op::Add, a, b);
}

Expr operator-(const Expr& a, const Expr& b) {
    if (a.is_constant() && b.is_constant()) return Expr::constant(a.value() - b.value());
    if (b.is_constant(0.0)) return a;
    if (a.is_constant(0.0)) return -b;
    return node2(Op::Sub, a, b);
}

Expr operator*(const Expr& a, const Expr& b) {
    if (a.is_constant() && b.is_constant()) return Expr::constant(a.value() * b.value());
    if (a.is_constant(0.0) || b.is_constant(0.0)) return Expr::constant(0.0);
    if (a.is_constant(1.0)) return b;
    if (b.is_constant(1.0)) return a;
    return node2(Op::Mul, a, b);
}

Expr operator/(const Expr& a, const Expr& b) {
    if (a.is_constant() && b.is_constant() && b.value() != 0.0) {
        return Expr::constant(a.value() / b.value());
    }
    if (b.is_constant(1.0)) return a;
    return node2(Op::Div, a, b);
}

Expr operator*(double c, const Expr& a) {
    return Expr::constant(c) * a;
}

Expr pow(const Expr& a, int exponent) {
    if (exponent < 0) throw std::invalid_argument("negative integer exponent");
    if (exponent == 0) return Expr::constant(1.0);
    if (exponent == 1) return a;
    if (a.is_constant()) return Expr::constant(std::pow(a.value(), exponent));
    return Expr(make(Op::Pow, 0.0, 0, exponent, share(a), nullptr));
}

Expr sin(const Expr& a) {
    if (a.is_constant()) return Expr::constant(std::sin(a.value()));
    return node1(Op::Sin, a);
}

Expr cos(const Expr& a) {
    if (a.is_constant()) return Expr::constant(std::cos(a.value()));
    return node1(Op::Cos, a);
}

Expr ln(const Expr& a) {
    if (a.is_constant() && a.value() > 0.0) return Expr::constant(std::log(a.value()));
    return node1(Op::Ln, a);
}

Expr sqrt(const Expr& a) {
    if (a.is_constant() && a.value() >= 0.0) return Expr::constant(std::sqrt(a.value()));
    return node1(Op::Sqrt, a);
}

Expr exp(const Expr& a) {
    if (a.is_constant() && std::isfinite(std::exp(a.value()))) return Expr::constant(std::exp(a.value()));
    return node1(Op::Exp, a);
}

bool equal(const Expr& a, const Expr& b) {
    const ExprNode* x = a.node();
    const ExprNode* y = b.node();
    if (x == y) return true;
    if (x->op != y->op) return false;
    switch (x->op) {
        case Op::Const: return x->value == y->value;
        case Op::Var: return x->index == y->index;
        case Op::Pow:
            if (x->exponent != y->exponent) return false;
            break;
        default: break;
    }
    if (static_cast<bool>(x->a) != static_cast<bool>(y->a)) return false;
    if (static_cast<bool>(x->b) != static_cast<bool>(y->b)) return false;
    if (x->a && !equal(a.arg(0), b.arg(0))) return false;
    if (x->b && !equal(a.arg(1), b.arg(1))) return false;
    return true;
}

// ---------------------------------------------------------------------------
// Parser

namespace {

class Parser {
public:
    Parser(std::string_view text, std::span<const std::string> vars) : text_(text), vars_(vars) {}

    Expr run() {
        Expr e = expression();
        skip_ws();
        if (pos_ < text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
        return e;
    }

private:
    [[noreturn]] void fail(const std::string& what) const {
        if (pos_ >= text_.size()) {
            throw ParseError("syntax error at end of input: " + what, text_.size());
        }
        throw ParseError("syntax error at position " + std::to_string(pos_) + ": " + what, pos_);
    }

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    Expr expression() {
        Expr e = term();
        for (;;) {
            if (accept('+')) {
                e = e + term();
            } else if (accept('-')) {
                e = e - term();
            } else {
                return e;
            }
        }
    }

    Expr term() {
        Expr e = unary_expr();
        for (;;) {
            if (accept('*')) {
                e = e * unary_expr();
            } else if (accept('/')) {
                e = e / unary_expr();
            } else {
                return e;
            }
        }
    }

    Expr unary_expr() {
        if (accept('-')) return -unary_expr();
        return power();
    }

    Expr power() {
        Expr base = primary();
        skip_ws();
        const std::size_t at = pos_;
        if (!accept('^')) return base;
        Expr ex = unary_expr();
        if (!ex.is_constant() || ex.value() < 0.0 || ex.value() != std::floor(ex.value()) ||
            ex.value() > 1e6) {
            pos_ = at;
            fail("exponent must be a non-negative integer constant");
        }
        return pow(base, static_cast<int>(ex.value()));
    }

    Expr primary() {
        skip_ws();
        if (pos_ >= text_.size()) fail("expected an operand");
        const char c = text_[pos_];
        if (c == '(') {
            ++pos_;
            Expr e = expression();
            if (!accept(')')) fail("expected ')'");
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
        fail("unexpected '" + std::string(1, c) + "'");
    }

    Expr number() {
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
        const std::string literal(text_.substr(start, pos_ - start));
        char* end = nullptr;
        const double v = std::strtod(literal.c_str(), &end);
        if (end != literal.c_str() + literal.size() || !std::isfinite(v)) {
            pos_ = start;
            fail("malformed number '" + literal + "'");
        }
        return Expr::constant(v);
    }

    Expr identifier() {
        const std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
            ++pos_;
        }
        const std::string name(text_.substr(start, pos_ - start));
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == '(') {
            static constexpr std::array<std::string_view, 5> kFunctions{"sin", "cos", "ln", "sqrt", "exp"};
            if (std::find(kFunctions.begin(), kFunctions.end(), name) == kFunctions.end()) {
                pos_ = start;
                fail("unknown function '" + name + "'");
            }
            ++pos_;
            Expr a = expression();
            if (!accept(')')) fail("expected ')'");
            if (name == "sin") return sin(a);
            if (name == "cos") return cos(a);
            if (name == "ln") return ln(a);
            if (name == "sqrt") return sqrt(a);
            return exp(a);
        }
        for (std::size_t i = 0; i < vars_.size(); ++i) {
            if (vars_[i] == name) return Expr::variable(i);
        }
        pos_ = start;
        fail("unknown identifier '" + name + "'");
    }

    std::string_view text_;
    std::span<const std::string> vars_;
    std::size_t pos_ = 0;
};

// Binding strength used by the printer; higher binds tighter.
int level(const Expr& e) {
    switch (e.op()) {
        case Op::Add:
        case Op::Sub: return 1;
        case Op::Mul:
        case Op::Div: return 2;
        case Op::Neg: return 3;
        case Op::Pow: return 4;
        case Op::Const: return e.value() < 0.0 || std::signbit(e.value()) ? 3 : 5;
        default: return 5;
    }
}

void print(const Expr& e, std::span<const std::string> vars, std::string& out);

void print_at(const Expr& e, int min_level, std::span<const std::string> vars, std::string& out) {
    if (level(e) < min_level) {
        out += '(';
        print(e, vars, out);
        out += ')';
    } else {
        print(e, vars, out);
    }
}

void print(const Expr& e, std::span<const std::string> vars, std::string& out) {
    switch (e.op()) {
        case Op::Const: {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.17g", e.value());
            out += buf;
            return;
        }
        case Op::Var:
            if (e.index() < vars.size()) {
                out += vars[e.index()];
            } else {
                out += "v" + std::to_string(e.index());
            }
            return;
        case Op::Neg:
            out += '-';
            print_at(e.arg(0), 3, vars, out);
            return;
        case Op::Add:
        case Op::Sub:
            print_at(e.arg(0), 1, vars, out);
            out += e.op() == Op::Add ? " + " : " - ";
            print_at(e.arg(1), 2, vars, out);
            return;
        case Op::Mul:
        case Op::Div:
            print_at(e.arg(0), 2, vars, out);
            out += e.op() == Op::Mul ? "*" : "/";
            print_at(e.arg(1), 3, vars, out);
            return;
        case Op::Pow:
            print_at(e.arg(0), 5, vars, out);
            out += '^';
            out += std::to_string(e.exponent());
            return;
        case Op::Sin: out += "sin("; break;
        case Op::Cos: out += "cos("; break;
        case Op::Ln: out += "ln("; break;
        case Op::Sqrt: out += "sqrt("; break;
        case Op::Exp: out += "exp("; break;
    }
    print(e.arg(0), vars, out);
    out += ')';
}

}  // namespace

Expr parse(std::string_view text, std::span<const std::string> variables) {
    return Parser(text, variables).run();
}

std::string to_string(const Expr& e, std::span<const std::string> variables) {
    std::string out;
    print(e, variables, out);
    return out;
}

// ---------------------------------------------------------------------------
// Real evaluation

namespace {

double eval_node(const ExprNode* n, std::span<const double> env) {
    switch (n->op) {
        case Op::Const: return n->value;
        case Op::Var: return env[n->index];
        case Op::Neg: return -eval_node(n->a.get(), env);
        case Op::Sin: return std::sin(eval_node(n->a.get(), env));
        case Op::Cos: return std::cos(eval_node(n->a.get(), env));
        case Op::Exp: return std::exp(eval_node(n->a.get(), env));
        case Op::Ln: {
            const double v = eval_node(n->a.get(), env);
            if (!(v > 0.0)) throw DomainError("ln of non-positive value");
            return std::log(v);
        }
        case Op::Sqrt: {
            const double v = eval_node(n->a.get(), env);
            if (!(v >= 0.0)) throw DomainError("sqrt of negative value");
            return std::sqrt(v);
        }
        case Op::Add: return eval_node(n->a.get(), env) + eval_node(n->b.get(), env);
        case Op::Sub: return eval_node(n->a.get(), env) - eval_node(n->b.get(), env);
        case Op::Mul: return eval_node(n->a.get(), env) * eval_node(n->b.get(), env);
        case Op::Div: {
            const double num = eval_node(n->a.get(), env);
            const double den = eval_node(n->b.get(), env);
            if (den == 0.0) throw DomainError("division by zero");
            return num / den;
        }
        case Op::Pow: {
            const double v = eval_node(n->a.get(), env);
            switch (n->exponent) {
                case 2: return v * v;
                case 3: return v * v * v;
                default: return std::pow(v, n->exponent);
            }
        }
    }
    return 0.0;
}

}  // namespace

double eval(const Expr& e, std::span<const double> env) {
    assert(e.variable_bound() <= env.size());
    return eval_node(e.node(), env);
}

// ---------------------------------------------------------------------------
// Symbolic differentiation

Expr differentiate(const Expr& e, std::size_t v) {
    switch (e.op()) {
        case Op::Const: return Expr::constant(0.0);
        case Op::Var: return Expr::constant(e.index() == v ? 1.0 : 0.0);
        default: break;
    }
    const Expr a = e.arg(0);
    const Expr da = differentiate(a, v);
    switch (e.op()) {
        case Op::Neg: return -da;
        case Op::Sin: return cos(a) * da;
        case Op::Cos: return -(sin(a) * da);
        case Op::Exp: return e * da;
        case Op::Ln: return da / a;
        case Op::Sqrt: return da / (Expr::constant(2.0) * e);
        case Op::Pow:
            return Expr::constant(e.exponent()) * pow(a, e.exponent() - 1) * da;
        default: break;
    }
    const Expr b = e.arg(1);
    const Expr db = differentiate(b, v);
    switch (e.op()) {
        case Op::Add: return da + db;
        case Op::Sub: return da - db;
        case Op::Mul: return da * b + a * db;
        case Op::Div:
            if (db.is_constant(0.0)) return da / b;
            return (da * b - a * db) / pow(b, 2);
        default: return Expr::constant(0.0);
    }
}

Expr substitute(const Expr& e, std::span<const Expr> replacements) {
    switch (e.op()) {
        case Op::Const: return e;
        case Op::Var:
            if (e.index() >= replacements.size()) throw std::invalid_argument("substitution out of range");
            return replacements[e.index()];
        case Op::Neg: return -substitute(e.arg(0), replacements);
        case Op::Sin: return sin(substitute(e.arg(0), replacements));
        case Op::Cos: return cos(substitute(e.arg(0), replacements));
        case Op::Ln: return ln(substitute(e.arg(0), replacements));
        case Op::Sqrt: return sqrt(substitute(e.arg(0), replacements));
        case Op::Exp: return exp(substitute(e.arg(0), replacements));
        case Op::Pow: return pow(substitute(e.arg(0), replacements), e.exponent());
        case Op::Add: return substitute(e.arg(0), replacements) + substitute(e.arg(1), replacements);
        case Op::Sub: return substitute(e.arg(0), replacements) - substitute(e.arg(1), replacements);
        case Op::Mul: return substitute(e.arg(0), replacements) * substitute(e.arg(1), replacements);
        case Op::Div: return substitute(e.arg(0), replacements) / substitute(e.arg(1), replacements);
    }
    return e;
}

// ---------------------------------------------------------------------------
// Interval evaluation

namespace {

IntervalValue undefined() {
    return {Definedness::Undefined, Interval::entire()};
}

IntervalValue maybe_undefined() {
    return {Definedness::MaybeUndefined, Interval::entire()};
}

IntervalValue ieval(const ExprNode* n, std::span<const Interval> box) {
    switch (n->op) {
        case Op::Const: return {Definedness::Defined, Interval(n->value)};
        case Op::Var: return {Definedness::Defined, box[n->index]};
        default: break;
    }
    const IntervalValue a = ieval(n->a.get(), box);
    if (a.status == Definedness::Undefined) return a;
    IntervalValue b;
    if (n->b) {
        b = ieval(n->b.get(), box);
        if (b.status == Definedness::Undefined) return b;
    }
    if (a.status != Definedness::Defined || b.status != Definedness::Defined) return maybe_undefined();

    const Interval& x = a.range;
    switch (n->op) {
        case Op::Neg: return {Definedness::Defined, -x};
        case Op::Sin: return {Definedness::Defined, sin(x)};
        case Op::Cos: return {Definedness::Defined, cos(x)};
        case Op::Exp: return {Definedness::Defined, exp(x)};
        case Op::Pow: return {Definedness::Defined, pow(x, n->exponent)};
        case Op::Ln:
            if (x.upper() <= 0.0) return undefined();
            if (x.lower() <= 0.0) return maybe_undefined();
            return {Definedness::Defined, log(x)};
        case Op::Sqrt:
            if (x.upper() < 0.0) return undefined();
            if (x.lower() < 0.0) return maybe_undefined();
            return {Definedness::Defined, sqrt(x)};
        case Op::Add: return {Definedness::Defined, x + b.range};
        case Op::Sub: return {Definedness::Defined, x - b.range};
        case Op::Mul: return {Definedness::Defined, x * b.range};
        case Op::Div:
            if (b.range.lower() == 0.0 && b.range.upper() == 0.0) return undefined();
            if (b.range.contains(0.0)) return maybe_undefined();
            return {Definedness::Defined, x / b.range};
        default: break;
    }
    return undefined();
}

}  // namespace

IntervalValue interval_eval(const Expr& e, std::span<const Interval> box) {
    if (e.variable_bound() > box.size()) {
        throw std::invalid_argument("box dimension smaller than the variables referenced");
    }
    return ieval(e.node(), box);
}

}  // namespace bsynth
