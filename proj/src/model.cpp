#include "bsynth/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace bsynth {

// ---------------------------------------------------------------------------
// Box

bool Box::contains(std::span<const double> x) const {
    if (x.size() != dims.size()) return false;
    for (std::size_t i = 0; i < dims.size(); ++i) {
        if (!dims[i].contains(x[i])) return false;
    }
    return true;
}

bool Box::contains(const Box& other) const {
    if (other.dims.size() != dims.size()) return false;
    for (std::size_t i = 0; i < dims.size(); ++i) {
        if (!dims[i].contains(other.dims[i])) return false;
    }
    return true;
}

Point Box::midpoint() const {
    Point m(dims.size());
    for (std::size_t i = 0; i < dims.size(); ++i) m[i] = dims[i].mid();
    return m;
}

Point Box::lower() const {
    Point m(dims.size());
    for (std::size_t i = 0; i < dims.size(); ++i) m[i] = dims[i].lower();
    return m;
}

Point Box::upper() const {
    Point m(dims.size());
    for (std::size_t i = 0; i < dims.size(); ++i) m[i] = dims[i].upper();
    return m;
}

Point Box::clamp(std::span<const double> x) const {
    Point c(dims.size());
    for (std::size_t i = 0; i < dims.size(); ++i) {
        c[i] = std::clamp(x[i], dims[i].lower(), dims[i].upper());
    }
    return c;
}

double Box::margin(std::span<const double> x) const {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < dims.size(); ++i) {
        m = std::min({m, x[i] - dims[i].lower(), dims[i].upper() - x[i]});
    }
    return m;
}

std::vector<Point> vertices(const Box& b) {
    const std::size_t n = b.dimension();
    std::vector<Point> out{Point{}};
    for (std::size_t i = 0; i < n; ++i) {
        const bool flat = b[i].lower() == b[i].upper();
        std::vector<Point> next;
        next.reserve(out.size() * (flat ? 1 : 2));
        for (const Point& prefix : out) {
            Point lo = prefix;
            lo.push_back(b[i].lower());
            next.push_back(std::move(lo));
            if (!flat) {
                Point hi = prefix;
                hi.push_back(b[i].upper());
                next.push_back(std::move(hi));
            }
        }
        out = std::move(next);
    }
    return out;
}

Box bloat(const Box& b, double factor) {
    if (!(factor >= 1.0)) throw ModelError("bloat factor must be at least 1");
    Box out;
    out.dims.reserve(b.dimension());
    for (const Interval& iv : b.dims) {
        const double c = 0.5 * (iv.lower() + iv.upper());
        out.dims.emplace_back(c - factor * (c - iv.lower()), c + factor * (iv.upper() - c));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Problem

namespace {

void require(bool ok, const std::string& message) {
    if (!ok) throw ModelError(message);
}

}  // namespace

Problem::Problem(ProblemData data) : data_(std::move(data)) {
    const std::size_t n = state_dim();
    const std::size_t l = disturbance_dim();
    require(n > 0, "problem needs at least one state variable");
    require(!data_.modes.empty(), "problem needs at least one mode");
    {
        std::set<std::string> names;
        for (const auto& s : data_.state_names) require(names.insert(s).second, "duplicate variable '" + s + "'");
        for (const auto& s : data_.disturbance_names) {
            require(names.insert(s).second, "duplicate variable '" + s + "'");
        }
    }
    require(data_.disturbance_box.dimension() == l, "disturbance box dimension does not match disturbances");

    for (const ModeDef& m : data_.modes) {
        require(m.omega.dimension() == n, "mode '" + m.name + "': state space dimension mismatch");
        require(m.flow.size() == n, "mode '" + m.name + "': dimension mismatch, flow has " +
                                        std::to_string(m.flow.size()) + " components for " +
                                        std::to_string(n) + " state variables");
        for (const Expr& f : m.flow) {
            require(f.variable_bound() <= n + l, "mode '" + m.name + "': flow uses undeclared variable");
        }
    }
    for (std::size_t i = 0; i < data_.modes.size(); ++i) {
        for (std::size_t j = i + 1; j < data_.modes.size(); ++j) {
            require(data_.modes[i].name != data_.modes[j].name, "duplicate mode '" + data_.modes[i].name + "'");
        }
    }

    for (std::size_t r = 0; r < data_.resets.size(); ++r) {
        const ResetRule& rule = data_.resets[r];
        const std::string tag = "reset " + std::to_string(r);
        require(rule.source < mode_count() && rule.target < mode_count(), tag + ": unknown mode");
        require(rule.guard.dimension() == n, tag + ": guard dimension mismatch");
        require(omega(rule.source).contains(rule.guard), tag + ": guard outside the source state space");
        require(rule.map.size() == n, tag + ": dimension mismatch in reset map");
        for (const Expr& e : rule.map) require(e.variable_bound() <= n, tag + ": reset map uses non-state variable");
        if (rule.inverse) {
            require(rule.inverse->size() == n, tag + ": dimension mismatch in inverse map");
            for (const Expr& e : *rule.inverse) {
                require(e.variable_bound() <= n, tag + ": inverse map uses non-state variable");
            }
            require(rule.image.has_value(), tag + ": inverse map needs the guard image box");
        }
        if (rule.image) {
            require(rule.image->dimension() == n, tag + ": image dimension mismatch");
            require(omega(rule.target).contains(*rule.image), tag + ": image outside the target state space");
        }
        if (rule.inverse) {
            // Spot check inverse(map(x)) == x at the guard corners and centre.
            std::vector<Point> probes = vertices(rule.guard);
            probes.push_back(rule.guard.midpoint());
            Point y(n);
            for (const Point& x : probes) {
                for (std::size_t i = 0; i < n; ++i) y[i] = eval(rule.map[i], x);
                for (std::size_t i = 0; i < n; ++i) {
                    const double back = eval((*rule.inverse)[i], y);
                    require(std::fabs(back - x[i]) <= 1e-6 * (1.0 + std::fabs(x[i])),
                            tag + ": inverse map does not invert the reset map on the guard");
                }
            }
        }
    }

    for (const auto* list : {&data_.initial, &data_.unsafe}) {
        const char* what = list == &data_.initial ? "initial" : "unsafe";
        for (const ModeBox& mb : *list) {
            require(mb.mode < mode_count(), std::string(what) + ": unknown mode");
            require(mb.box.dimension() == n, std::string(what) + ": box dimension mismatch");
            require(omega(mb.mode).contains(mb.box), std::string(what) + ": box outside the state space of its mode");
        }
    }

    jac_x_.resize(mode_count());
    jac_d_.resize(mode_count());
    affine_.assign(mode_count(), true);
    for (std::size_t m = 0; m < mode_count(); ++m) {
        const auto& flow = data_.modes[m].flow;
        jac_x_[m].reserve(n * n);
        jac_d_[m].reserve(n * l);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) jac_x_[m].push_back(differentiate(flow[i], j));
            for (std::size_t j = 0; j < l; ++j) {
                Expr dj = differentiate(flow[i], n + j);
                for (std::size_t k = 0; k < l; ++k) {
                    if (dj.uses_variable(n + k)) affine_[m] = false;
                }
                jac_d_[m].push_back(std::move(dj));
            }
        }
    }
    reset_jac_.resize(data_.resets.size());
    for (std::size_t r = 0; r < data_.resets.size(); ++r) {
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) reset_jac_[r].push_back(differentiate(data_.resets[r].map[i], j));
        }
    }
}

std::vector<std::string> Problem::variable_names() const {
    std::vector<std::string> v = data_.state_names;
    v.insert(v.end(), data_.disturbance_names.begin(), data_.disturbance_names.end());
    return v;
}

std::optional<std::size_t> Problem::find_mode(const std::string& name) const {
    for (std::size_t m = 0; m < data_.modes.size(); ++m) {
        if (data_.modes[m].name == name) return m;
    }
    return std::nullopt;
}

bool Problem::in_initial(const ModePoint& s) const {
    return std::any_of(data_.initial.begin(), data_.initial.end(),
                       [&](const ModeBox& mb) { return mb.mode == s.mode && mb.box.contains(s.x); });
}

bool Problem::in_unsafe(const ModePoint& s) const {
    return std::any_of(data_.unsafe.begin(), data_.unsafe.end(),
                       [&](const ModeBox& mb) { return mb.mode == s.mode && mb.box.contains(s.x); });
}

namespace {

// Small on-stack environment for (x, d).
struct Env {
    double buf[64];
    std::vector<double> heap;
    std::span<const double> view;

    Env(std::span<const double> x, std::span<const double> d) {
        const std::size_t total = x.size() + d.size();
        double* dst = buf;
        if (total > 64) {
            heap.resize(total);
            dst = heap.data();
        }
        std::copy(x.begin(), x.end(), dst);
        std::copy(d.begin(), d.end(), dst + x.size());
        view = std::span<const double>(dst, total);
    }
};

}  // namespace

void Problem::flow(std::size_t m, std::span<const double> x, std::span<const double> d,
                   std::span<double> out) const {
    const Env env(x, d);
    const auto& f = data_.modes[m].flow;
    for (std::size_t i = 0; i < f.size(); ++i) out[i] = eval(f[i], env.view);
}

void Problem::flow_jacobian(std::size_t m, std::span<const double> x, std::span<const double> d,
                            std::span<double> jx, std::span<double> jd) const {
    const Env env(x, d);
    for (std::size_t i = 0; i < jac_x_[m].size(); ++i) jx[i] = eval(jac_x_[m][i], env.view);
    for (std::size_t i = 0; i < jac_d_[m].size(); ++i) jd[i] = eval(jac_d_[m][i], env.view);
}

void Problem::reset_map(std::size_t r, std::span<const double> x, std::span<double> out) const {
    const auto& map = data_.resets[r].map;
    for (std::size_t i = 0; i < map.size(); ++i) out[i] = eval(map[i], x);
}

void Problem::reset_jacobian(std::size_t r, std::span<const double> x, std::span<double> out) const {
    for (std::size_t i = 0; i < reset_jac_[r].size(); ++i) out[i] = eval(reset_jac_[r][i], x);
}

// ---------------------------------------------------------------------------
// Template

Template::Template(std::vector<std::vector<Monomial>> per_mode, std::size_t state_dim)
    : monomials_(std::move(per_mode)), n_(state_dim) {
    require(!monomials_.empty(), "template needs at least one mode");
    for (std::size_t m = 0; m < monomials_.size(); ++m) {
        const auto& list = monomials_[m];
        bool has_constant = false;
        std::set<Monomial> seen;
        for (const Monomial& mono : list) {
            require(mono.size() == n_, "template monomial dimension mismatch");
            for (int e : mono) require(e >= 0, "template monomial with negative exponent");
            require(seen.insert(mono).second, "duplicate monomial in template");
            if (std::all_of(mono.begin(), mono.end(), [](int e) { return e == 0; })) has_constant = true;
        }
        require(has_constant, "template mode " + std::to_string(m) + " lacks the constant monomial");
        offsets_.push_back(k_);
        k_ += list.size();
    }
}

Template Template::linear(std::size_t modes, std::size_t state_dim) {
    std::vector<Monomial> list;
    list.emplace_back(state_dim, 0);
    for (std::size_t i = 0; i < state_dim; ++i) {
        Monomial m(state_dim, 0);
        m[i] = 1;
        list.push_back(std::move(m));
    }
    return Template(std::vector<std::vector<Monomial>>(modes, list), state_dim);
}

Template Template::quadratic_2d(std::size_t modes) {
    const std::vector<Monomial> list{{0, 0}, {2, 0}, {1, 1}, {0, 2}, {1, 0}, {0, 1}};
    return Template(std::vector<std::vector<Monomial>>(modes, list), 2);
}

bool Template::is_constant() const {
    for (const auto& list : monomials_) {
        if (list.size() > 1) return false;
    }
    return true;
}

namespace {

double monomial_value(const Monomial& m, std::span<const double> x) {
    double v = 1.0;
    for (std::size_t j = 0; j < m.size(); ++j) {
        switch (m[j]) {
            case 0: break;
            case 1: v *= x[j]; break;
            case 2: v *= x[j] * x[j]; break;
            default: v *= std::pow(x[j], m[j]);
        }
    }
    return v;
}

// Product of x_i^(m_i - drop_i) with coefficient prod of falling factorials.
double monomial_derivative(const Monomial& m, std::span<const double> x, std::size_t a, std::size_t b,
                           int order) {
    Monomial e = m;
    double c = 1.0;
    if (order >= 1) {
        if (e[a] == 0) return 0.0;
        c *= e[a];
        e[a] -= 1;
    }
    if (order >= 2) {
        if (e[b] == 0) return 0.0;
        c *= e[b];
        e[b] -= 1;
    }
    return c * monomial_value(e, x);
}

}  // namespace

double Template::value(std::span<const double> p, std::size_t mode, std::span<const double> x) const {
    const auto& list = monomials_[mode];
    const std::size_t off = offsets_[mode];
    double v = 0.0;
    for (std::size_t i = 0; i < list.size(); ++i) {
        if (p[off + i] != 0.0) v += p[off + i] * monomial_value(list[i], x);
    }
    return v;
}

void Template::coeff_row(std::size_t mode, std::span<const double> x, std::span<double> a) const {
    std::fill(a.begin(), a.end(), 0.0);
    const auto& list = monomials_[mode];
    for (std::size_t i = 0; i < list.size(); ++i) a[offsets_[mode] + i] = monomial_value(list[i], x);
}

void Template::gradient(std::span<const double> p, std::size_t mode, std::span<const double> x,
                        std::span<double> grad) const {
    const auto& list = monomials_[mode];
    const std::size_t off = offsets_[mode];
    for (std::size_t j = 0; j < n_; ++j) {
        double g = 0.0;
        for (std::size_t i = 0; i < list.size(); ++i) {
            if (p[off + i] != 0.0 && list[i][j] > 0) g += p[off + i] * monomial_derivative(list[i], x, j, 0, 1);
        }
        grad[j] = g;
    }
}

void Template::hessian(std::span<const double> p, std::size_t mode, std::span<const double> x,
                       std::span<double> hess) const {
    const auto& list = monomials_[mode];
    const std::size_t off = offsets_[mode];
    for (std::size_t a = 0; a < n_; ++a) {
        for (std::size_t b = 0; b < n_; ++b) {
            double h = 0.0;
            for (std::size_t i = 0; i < list.size(); ++i) {
                if (p[off + i] != 0.0) h += p[off + i] * monomial_derivative(list[i], x, a, b, 2);
            }
            hess[a * n_ + b] = h;
        }
    }
}

Expr Template::to_expr(std::span<const double> p, std::size_t mode) const {
    const auto& list = monomials_[mode];
    const std::size_t off = offsets_[mode];
    Expr sum = Expr::constant(0.0);
    for (std::size_t i = 0; i < list.size(); ++i) {
        if (p[off + i] == 0.0) continue;
        Expr term = Expr::constant(p[off + i]);
        for (std::size_t j = 0; j < n_; ++j) {
            if (list[i][j] > 0) term = term * pow(Expr::variable(j), list[i][j]);
        }
        sum = sum + term;
    }
    return sum;
}

Point coeff_row(const Template& t, std::size_t mode, std::span<const double> x) {
    Point a(t.parameter_count());
    t.coeff_row(mode, x, a);
    return a;
}

double template_value(const Template& t, std::span<const double> p, const ModePoint& s) {
    return t.value(p, s.mode, s.x);
}

Point template_grad_x(const Template& t, std::span<const double> p, const ModePoint& s) {
    Point g(t.state_dim());
    t.gradient(p, s.mode, s.x, g);
    return g;
}

std::string monomial_to_string(const Monomial& m, std::span<const std::string> names) {
    std::string out;
    for (std::size_t j = 0; j < m.size(); ++j) {
        if (m[j] == 0) continue;
        if (!out.empty()) out += '*';
        out += names[j];
        if (m[j] > 1) out += '^' + std::to_string(m[j]);
    }
    return out.empty() ? "1" : out;
}

Monomial parse_monomial(const std::string& text, std::span<const std::string> names) {
    Monomial m(names.size(), 0);
    std::string s;
    for (char c : text) {
        if (c != ' ') s += c;
    }
    if (s == "1") return m;
    require(!s.empty(), "empty monomial");
    std::size_t start = 0;
    while (start <= s.size()) {
        const std::size_t end = std::min(s.find('*', start), s.size());
        const std::string factor = s.substr(start, end - start);
        const std::size_t caret = factor.find('^');
        const std::string name = factor.substr(0, caret);
        int e = 1;
        if (caret != std::string::npos) {
            const std::string digits = factor.substr(caret + 1);
            require(!digits.empty() && std::all_of(digits.begin(), digits.end(), ::isdigit),
                    "monomial '" + text + "': exponent must be a non-negative integer");
            e = std::stoi(digits);
        }
        const auto it = std::find(names.begin(), names.end(), name);
        require(it != names.end(), "monomial '" + text + "': unknown variable '" + name + "'");
        m[static_cast<std::size_t>(it - names.begin())] += e;
        start = end + 1;
    }
    return m;
}

Segment make_segment(const Problem& prob, ModePoint start, ModePoint end) {
    Segment seg;
    seg.start_in_initial = prob.in_initial(start);
    seg.start_in_unsafe = prob.in_unsafe(start);
    seg.end_in_initial = prob.in_initial(end);
    seg.end_in_unsafe = prob.in_unsafe(end);
    seg.start = std::move(start);
    seg.end = std::move(end);
    return seg;
}

}  // namespace bsynth
