#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "bsynth/interval.hpp"

namespace bsynth {

enum class Op { Var, Const, Neg, Sin, Cos, Ln, Sqrt, Exp, Add, Sub, Mul, Div, Pow };

/// Raised by parse(); position is a 0-based character offset into the input.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& message, std::size_t position);
    std::size_t position() const { return position_; }

private:
    std::size_t position_;
};

/// Raised by real evaluation outside the domain of ln, sqrt or division.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

struct ExprNode;

/// Immutable symbolic scalar term over indexed variables.
///
/// Nodes are shared, so copying an Expr is cheap and the same tree may be
/// evaluated from several threads at once. The builder functions below fold
/// constants and drop additive zeros and multiplicative ones; nothing else is
/// rewritten.
class Expr {
public:
    /// The constant 0.
    Expr();

    static Expr constant(double value);
    static Expr variable(std::size_t index);

    Op op() const;
    double value() const;         // Const only
    std::size_t index() const;    // Var only
    int exponent() const;         // Pow only
    Expr arg(std::size_t i) const;  // operand 0 or 1
    std::size_t arity() const;

    bool is_constant() const { return op() == Op::Const; }
    bool is_constant(double v) const { return is_constant() && value() == v; }

    /// One past the largest variable index used, 0 for closed terms.
    std::size_t variable_bound() const;
    bool uses_variable(std::size_t index) const;
    std::size_t node_count() const;

    const ExprNode* node() const { return node_.get(); }
    const std::shared_ptr<const ExprNode>& shared() const { return node_; }

    explicit Expr(std::shared_ptr<const ExprNode> node) : node_(std::move(node)) {}

private:
    std::shared_ptr<const ExprNode> node_;
};

struct ExprNode {
    Op op = Op::Const;
    double value = 0.0;
    std::size_t index = 0;
    int exponent = 0;
    std::shared_ptr<const ExprNode> a;
    std::shared_ptr<const ExprNode> b;
};

Expr operator-(const Expr& a);
Expr operator+(const Expr& a, const Expr& b);
Expr operator-(const Expr& a, const Expr& b);
Expr operator*(const Expr& a, const Expr& b);
Expr operator/(const Expr& a, const Expr& b);
Expr operator*(double c, const Expr& a);
Expr pow(const Expr& a, int exponent);
Expr sin(const Expr& a);
Expr cos(const Expr& a);
Expr ln(const Expr& a);
Expr sqrt(const Expr& a);
Expr exp(const Expr& a);

/// Structural equality of two trees.
bool equal(const Expr& a, const Expr& b);

/// Parses the infix grammar
///   expr  := term (('+'|'-') term)*
///   term  := unary (('*'|'/') unary)*
///   unary := '-' unary | power
///   power := primary ('^' unary)?
/// where exponents must fold to non-negative integer constants and primaries
/// are numbers, variables, parenthesised expressions or calls of
/// sin, cos, ln, sqrt, exp.
Expr parse(std::string_view text, std::span<const std::string> variables);

/// Prints with minimal parentheses such that parse(to_string(e)) == e.
std::string to_string(const Expr& e, std::span<const std::string> variables);

/// env must cover every variable the term references.
double eval(const Expr& e, std::span<const double> env);

Expr differentiate(const Expr& e, std::size_t variable);

/// Replaces variable i by replacements[i].
Expr substitute(const Expr& e, std::span<const Expr> replacements);

enum class Definedness { Defined, MaybeUndefined, Undefined };

/// Result of interval evaluation. range is a sound enclosure only when
/// status is Defined.
struct IntervalValue {
    Definedness status = Definedness::Defined;
    Interval range;

    bool defined() const { return status == Definedness::Defined; }
};

IntervalValue interval_eval(const Expr& e, std::span<const Interval> box);

}  // namespace bsynth
