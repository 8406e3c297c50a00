#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "bsynth/expr.hpp"
#include "bsynth/interval.hpp"

namespace bsynth {

using Point = std::vector<double>;

/// Raised when a problem or template violates one of its structural
/// invariants (dimension mismatch, guard outside the state space, ...).
class ModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Broken internal invariant (not a user error).
class InternalError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Axis-aligned hyper-rectangle. Membership is closed (bounds included).
struct Box {
    std::vector<Interval> dims;

    Box() = default;
    explicit Box(std::vector<Interval> d) : dims(std::move(d)) {}

    std::size_t dimension() const { return dims.size(); }
    const Interval& operator[](std::size_t i) const { return dims[i]; }
    Interval& operator[](std::size_t i) { return dims[i]; }

    bool contains(std::span<const double> x) const;
    bool contains(const Box& other) const;
    Point midpoint() const;
    Point lower() const;
    Point upper() const;
    /// Nearest point of the box.
    Point clamp(std::span<const double> x) const;
    /// Signed distance-like membership function: positive strictly inside,
    /// zero on the boundary, negative outside (min over all faces).
    double margin(std::span<const double> x) const;

    friend bool operator==(const Box&, const Box&) = default;
};

/// Corner points, lexicographic in (low, high) per dimension, with
/// duplicates from zero-width dimensions removed.
std::vector<Point> vertices(const Box& b);

/// Scales every dimension about its midpoint by factor (>= 1).
Box bloat(const Box& b, double factor);

struct ModePoint {
    std::size_t mode = 0;
    Point x;
};

struct ModeBox {
    std::size_t mode = 0;
    Box box;
};

struct ModeDef {
    std::string name;
    Box omega;
    /// One term per state dimension over (states..., disturbances...).
    std::vector<Expr> flow;
};

struct ResetRule {
    std::size_t source = 0;
    Box guard;
    std::size_t target = 0;
    /// One term per state dimension over the state variables.
    std::vector<Expr> map;
    std::optional<std::vector<Expr>> inverse;
    /// Image of the guard under map, used as the guard of the inverse jump.
    std::optional<Box> image;
};

struct ProblemData {
    std::string name;
    std::vector<std::string> state_names;
    std::vector<std::string> disturbance_names;
    Box disturbance_box;
    std::vector<ModeDef> modes;
    std::vector<ResetRule> resets;
    std::vector<ModeBox> initial;
    std::vector<ModeBox> unsafe;
};

/// Validated safety verification problem with cached symbolic derivatives
/// of the dynamics. Immutable after construction.
class Problem {
public:
    explicit Problem(ProblemData data);

    const ProblemData& data() const { return data_; }
    const std::string& name() const { return data_.name; }
    std::size_t state_dim() const { return data_.state_names.size(); }
    std::size_t disturbance_dim() const { return data_.disturbance_names.size(); }
    std::size_t mode_count() const { return data_.modes.size(); }
    const ModeDef& mode(std::size_t m) const { return data_.modes[m]; }
    const Box& omega(std::size_t m) const { return data_.modes[m].omega; }
    const Box& disturbance_box() const { return data_.disturbance_box; }
    const std::vector<ResetRule>& resets() const { return data_.resets; }
    const std::vector<ModeBox>& initial() const { return data_.initial; }
    const std::vector<ModeBox>& unsafe() const { return data_.unsafe; }
    /// State names followed by disturbance names.
    std::vector<std::string> variable_names() const;
    std::optional<std::size_t> find_mode(const std::string& name) const;

    bool in_initial(const ModePoint& s) const;
    bool in_unsafe(const ModePoint& s) const;

    /// out = f_m(x, d).
    void flow(std::size_t m, std::span<const double> x, std::span<const double> d,
              std::span<double> out) const;
    /// Row-major n x n (state) and n x l (disturbance) Jacobians of f_m.
    void flow_jacobian(std::size_t m, std::span<const double> x, std::span<const double> d,
                       std::span<double> jx, std::span<double> jd) const;
    /// True when every partial derivative of f_m in a disturbance is
    /// independent of the disturbances.
    bool affine_in_disturbance(std::size_t m) const { return affine_[m]; }

    void reset_map(std::size_t r, std::span<const double> x, std::span<double> out) const;
    /// Row-major n x n Jacobian of reset r.
    void reset_jacobian(std::size_t r, std::span<const double> x, std::span<double> out) const;

private:
    ProblemData data_;
    std::vector<std::vector<Expr>> jac_x_;   // per mode, n*n
    std::vector<std::vector<Expr>> jac_d_;   // per mode, n*l
    std::vector<std::vector<Expr>> reset_jac_;  // per reset, n*n
    std::vector<bool> affine_;
};

/// Exponents of a power product over the state variables.
using Monomial = std::vector<int>;

/// Template V(p, m, x) = sum_i p_{m,i} * monomial_{m,i}(x), linear in p.
/// Parameter blocks are concatenated in mode order.
class Template {
public:
    Template(std::vector<std::vector<Monomial>> per_mode, std::size_t state_dim);

    /// 1, x_1, ..., x_n in every mode.
    static Template linear(std::size_t modes, std::size_t state_dim);
    /// 1, x^2, x*y, y^2, x, y in every mode (two state variables).
    static Template quadratic_2d(std::size_t modes);

    std::size_t state_dim() const { return n_; }
    std::size_t mode_count() const { return monomials_.size(); }
    std::size_t parameter_count() const { return k_; }
    std::size_t offset(std::size_t mode) const { return offsets_[mode]; }
    const std::vector<Monomial>& monomials(std::size_t mode) const { return monomials_[mode]; }
    bool is_constant() const;

    double value(std::span<const double> p, std::size_t mode, std::span<const double> x) const;
    /// Fills a (length k) so that dot(a, p) == value(p, mode, x); entries of
    /// other modes' blocks are zero.
    void coeff_row(std::size_t mode, std::span<const double> x, std::span<double> a) const;
    void gradient(std::span<const double> p, std::size_t mode, std::span<const double> x,
                  std::span<double> grad) const;
    /// Row-major n x n Hessian in x.
    void hessian(std::span<const double> p, std::size_t mode, std::span<const double> x,
                 std::span<double> hess) const;

    /// The polynomial V(p, mode, .) as a term over the state variables.
    Expr to_expr(std::span<const double> p, std::size_t mode) const;

private:
    std::vector<std::vector<Monomial>> monomials_;
    std::vector<std::size_t> offsets_;
    std::size_t n_ = 0;
    std::size_t k_ = 0;
};

Point coeff_row(const Template& t, std::size_t mode, std::span<const double> x);
double template_value(const Template& t, std::span<const double> p, const ModePoint& s);
Point template_grad_x(const Template& t, std::span<const double> p, const ModePoint& s);

/// Text form of a monomial: "1", "x", "x^2*y".
std::string monomial_to_string(const Monomial& m, std::span<const std::string> names);
Monomial parse_monomial(const std::string& text, std::span<const std::string> names);

/// A simulation segment (s, s') with endpoint classifications.
struct Segment {
    ModePoint start;
    ModePoint end;
    bool start_in_initial = false;
    bool end_in_initial = false;
    bool start_in_unsafe = false;
    bool end_in_unsafe = false;
};

Segment make_segment(const Problem& prob, ModePoint start, ModePoint end);

}  // namespace bsynth
