#include "bsynth/falsify.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <random>
#include <thread>

namespace bsynth {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double norm2(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// Value with DomainError (and any non-finite result) mapped to NaN.
template <class F>
double guarded(F&& f) {
    try {
        const double v = f();
        return std::isfinite(v) ? v : kNaN;
    } catch (const DomainError&) {
        return kNaN;
    }
}

Point random_point(const Box& b, std::mt19937_64& rng) {
    Point x(b.dimension());
    for (std::size_t i = 0; i < x.size(); ++i) {
        std::uniform_real_distribution<double> u(b[i].lower(), b[i].upper());
        x[i] = b[i].lower() == b[i].upper() ? b[i].lower() : u(rng);
    }
    return x;
}

Box product(const Box& a, const Box& b) {
    Box out = a;
    out.dims.insert(out.dims.end(), b.dims.begin(), b.dims.end());
    return out;
}

// Runs one job per start, in parallel when cores allow, and keeps the
// smallest value; ties go to the lower start index.
PointSearch multi_start(std::size_t starts, const std::function<PointSearch(std::size_t)>& job) {
    std::vector<PointSearch> results(starts);
    const std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
    if (workers == 1 || starts <= 1) {
        for (std::size_t i = 0; i < starts; ++i) results[i] = job(i);
    } else {
        for (std::size_t begin = 0; begin < starts; begin += workers) {
            std::vector<std::future<PointSearch>> batch;
            const std::size_t end = std::min(starts, begin + workers);
            for (std::size_t i = begin; i < end; ++i) batch.push_back(std::async(std::launch::async, job, i));
            for (std::size_t i = begin; i < end; ++i) results[i] = batch[i - begin].get();
        }
    }
    PointSearch best;
    best.value = kInf;
    bool any = false;
    for (const PointSearch& r : results) {
        if (std::isnan(r.value)) continue;
        if (!any || r.value < best.value) {
            best = r;
            any = true;
        }
    }
    return best;
}

std::mt19937_64 start_rng(std::uint64_t seed, std::uint64_t objective, std::size_t start) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(objective), static_cast<std::uint32_t>(start)};
    return std::mt19937_64(seq);
}

PointSearch min_sign_over(const std::vector<ModeBox>& boxes, const Template& t, std::span<const double> p,
                          double sign, std::size_t starts, std::uint64_t seed, std::uint64_t tag) {
    if (boxes.empty()) throw InternalError("counter-example search over an empty set");
    return multi_start(starts, [&](std::size_t i) {
        const ModeBox& mb = boxes[i % boxes.size()];
        auto rng = start_rng(seed, tag, i);
        const BoxObjective f = [&](std::span<const double> x, std::span<double> grad) {
            return guarded([&] {
                if (!grad.empty()) {
                    t.gradient(p, mb.mode, x, grad);
                    for (double& g : grad) g *= sign;
                }
                return sign * t.value(p, mb.mode, x);
            });
        };
        LocalResult r = minimize_projected(f, mb.box, random_point(mb.box, rng));
        PointSearch out;
        out.x = {mb.mode, std::move(r.z)};
        out.value = r.value;
        return out;
    });
}

// F_grad and its gradient in (x, d); NaN where a direction is undefined.
double transversality_eval(const Problem& prob, const Template& t, std::span<const double> p, std::size_t mode,
                           std::span<const double> x, std::span<const double> d, std::span<double> gx,
                           std::span<double> gd) {
    const std::size_t n = prob.state_dim(), l = prob.disturbance_dim();
    std::vector<double> g(n), h(n);
    t.gradient(p, mode, x, g);
    prob.flow(mode, x, d, h);
    const double ng = norm2(g), nh = norm2(h);
    if (!(ng >= 1e-12) || !(nh >= 1e-12)) return kNaN;
    std::vector<double> u(n), w(n);
    for (std::size_t i = 0; i < n; ++i) {
        u[i] = g[i] / ng;
        w[i] = h[i] / nh;
    }
    const double uw = dot(u, w);
    if (gx.empty()) return -uw;

    std::vector<double> hess(n * n), jx(n * n), jd(n * l);
    t.hessian(p, mode, x, hess);
    prob.flow_jacobian(mode, x, d, jx, jd);
    // a = (I - u u^T) w / |g|,  b = (I - w w^T) u / |h|
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
        a[i] = (w[i] - u[i] * uw) / ng;
        b[i] = (u[i] - w[i] * uw) / nh;
    }
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += hess[i * n + j] * a[j] + jx[j * n + i] * b[j];
        gx[i] = -s;
    }
    for (std::size_t k = 0; k < l; ++k) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += jd[j * l + k] * b[j];
        gd[k] = -s;
    }
    return -uw;
}

// Newton steps along grad V towards V = 0, staying in the box.
bool project_to_zero_level(const Template& t, std::span<const double> p, std::size_t mode, const Box& box,
                           Point& x, double tol) {
    const double tight = 1e-12 * (1.0 + norm2(p));
    std::vector<double> g(x.size());
    for (int it = 0; it < 60; ++it) {
        const double v = t.value(p, mode, x);
        if (!std::isfinite(v)) return false;
        if (std::fabs(v) <= tight) return true;
        t.gradient(p, mode, x, g);
        const double gg = dot(g, g);
        if (!(gg >= 1e-24)) break;
        Point next = x;
        for (std::size_t i = 0; i < x.size(); ++i) next[i] -= v * g[i] / gg;
        next = box.clamp(next);
        if (next == x) break;
        x = std::move(next);
    }
    return std::fabs(t.value(p, mode, x)) <= tol;
}

// Descent along the zero level: tangential gradient step, then Newton
// back onto V = 0. Polishes the penalty result, whose conditioning at
// large weights stalls plain gradient steps.
void descend_on_level(const Problem& prob, const Template& t, std::span<const double> p, std::size_t mode,
                      Point& x, Point& d, double tol) {
    const std::size_t n = x.size(), l = d.size();
    const Box& omega = prob.omega(mode);
    const Box& dbox = prob.disturbance_box();
    std::vector<double> gx(n), gd(l), gv(n);
    double step = 1.0;
    for (int it = 0; it < 200; ++it) {
        const double val = guarded([&] { return transversality_eval(prob, t, p, mode, x, d, gx, gd); });
        if (std::isnan(val)) return;
        t.gradient(p, mode, x, gv);
        const double vv = dot(gv, gv);
        if (!(vv >= 1e-24)) return;
        const double c = dot(gx, gv) / vv;
        for (std::size_t i = 0; i < n; ++i) gx[i] -= c * gv[i];
        bool accepted = false;
        for (int back = 0; back < 50; ++back, step *= 0.5) {
            Point xt(n), dt(l);
            double moved = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                xt[i] = std::clamp(x[i] - step * gx[i], omega[i].lower(), omega[i].upper());
                moved = std::max(moved, std::fabs(xt[i] - x[i]));
            }
            for (std::size_t i = 0; i < l; ++i) {
                dt[i] = std::clamp(d[i] - step * gd[i], dbox[i].lower(), dbox[i].upper());
                moved = std::max(moved, std::fabs(dt[i] - d[i]));
            }
            if (moved <= 1e-12) return;
            if (!project_to_zero_level(t, p, mode, omega, xt, tol)) continue;
            const double v = guarded([&] { return transversality_eval(prob, t, p, mode, xt, dt, {}, {}); });
            if (!std::isnan(v) && v < val - 1e-4 * step * (dot(gx, gx) + dot(gd, gd))) {
                x = std::move(xt);
                d = std::move(dt);
                accepted = true;
                break;
            }
        }
        if (!accepted) return;
        step = std::min(step * 2.0, 1e6);
    }
}

}  // namespace

LocalResult minimize_projected(const BoxObjective& f, const Box& box, Point z0, const LocalOptions& opt) {
    const std::size_t n = z0.size();
    LocalResult res;
    res.z = box.clamp(z0);
    std::vector<double> g(n);
    res.value = f(res.z, g);
    if (std::isnan(res.value)) return res;
    double step = 1.0;
    Point trial(n);
    for (; res.iterations < opt.max_iterations; ++res.iterations) {
        // Projected gradient P(z - g) - z as the stationarity measure.
        double pg_norm = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double target = std::clamp(res.z[i] - g[i], box[i].lower(), box[i].upper());
            pg_norm = std::max(pg_norm, std::fabs(target - res.z[i]));
        }
        if (pg_norm <= opt.gradient_tol) break;

        bool accepted = false;
        for (int back = 0; back < 60 && step > 1e-20; ++back, step *= 0.5) {
            double decrease = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                trial[i] = std::clamp(res.z[i] - step * g[i], box[i].lower(), box[i].upper());
                decrease += g[i] * (trial[i] - res.z[i]);
            }
            const double v = f(trial, {});
            if (!std::isnan(v) && v <= res.value + opt.armijo * decrease) {
                res.z = trial;
                res.value = f(res.z, g);
                accepted = true;
                break;
            }
        }
        if (!accepted || std::isnan(res.value)) break;
        step = std::min(step * 2.0, 1e6);
    }
    return res;
}

double initial_objective(const Template& t, std::span<const double> p, const ModePoint& x) {
    return -t.value(p, x.mode, x.x);
}

double unsafe_objective(const Template& t, std::span<const double> p, const ModePoint& x) {
    return t.value(p, x.mode, x.x);
}

double transversality_objective(const Problem& prob, const Template& t, std::span<const double> p,
                                const ModePoint& x, std::span<const double> d, std::span<double> grad_x,
                                std::span<double> grad_d) {
    return transversality_eval(prob, t, p, x.mode, x.x, d, grad_x, grad_d);
}

double reset_objective(const Problem& prob, const Template& t, std::span<const double> p, std::size_t reset,
                       std::span<const double> x) {
    const ResetRule& r = prob.resets()[reset];
    Point y(x.size());
    prob.reset_map(reset, x, y);
    return std::max(t.value(p, r.source, x), -t.value(p, r.target, y));
}

PointSearch min_initial(const Problem& prob, const Template& t, std::span<const double> p, std::size_t starts,
                        std::uint64_t seed) {
    return min_sign_over(prob.initial(), t, p, -1.0, starts, seed, 1);
}

PointSearch min_unsafe(const Problem& prob, const Template& t, std::span<const double> p, std::size_t starts,
                       std::uint64_t seed) {
    return min_sign_over(prob.unsafe(), t, p, 1.0, starts, seed, 2);
}

PointSearch min_transversality(const Problem& prob, const Template& t, std::span<const double> p,
                               std::size_t starts, std::uint64_t seed) {
    if (t.is_constant()) throw InternalError("transversality search needs a non-constant template");
    const std::size_t n = prob.state_dim(), l = prob.disturbance_dim();
    const double tol = 1e-6 * (1.0 + norm2(p));
    return multi_start(starts, [&](std::size_t i) {
        PointSearch out;
        out.value = kNaN;
        const std::size_t mode = i % prob.mode_count();
        const Box& omega = prob.omega(mode);
        const Box zbox = product(omega, prob.disturbance_box());
        auto rng = start_rng(seed, 3, i);
        Point x = random_point(omega, rng);
        Point d = random_point(prob.disturbance_box(), rng);
        try {
            project_to_zero_level(t, p, mode, omega, x, tol);
            Point z = x;
            z.insert(z.end(), d.begin(), d.end());
            for (double mu = 1e2; mu <= 1e6 * 1.000001; mu *= 10.0) {
                const BoxObjective f = [&, mu](std::span<const double> zz, std::span<double> grad) {
                    return guarded([&] {
                        const auto xs = zz.first(n);
                        const auto ds = zz.subspan(n, l);
                        const double v = t.value(p, mode, xs);
                        double val;
                        if (grad.empty()) {
                            val = transversality_eval(prob, t, p, mode, xs, ds, {}, {});
                        } else {
                            val = transversality_eval(prob, t, p, mode, xs, ds, grad.first(n), grad.subspan(n, l));
                            if (std::isnan(val)) return kNaN;
                            std::vector<double> gv(n);
                            t.gradient(p, mode, xs, gv);
                            for (std::size_t j = 0; j < n; ++j) grad[j] += 2.0 * mu * v * gv[j];
                        }
                        return val + mu * v * v;
                    });
                };
                LocalResult r = minimize_projected(f, zbox, z);
                if (std::isnan(r.value)) return out;
                z = std::move(r.z);
            }
            x.assign(z.begin(), z.begin() + static_cast<std::ptrdiff_t>(n));
            d.assign(z.begin() + static_cast<std::ptrdiff_t>(n), z.end());
            if (!project_to_zero_level(t, p, mode, omega, x, tol)) return out;
            descend_on_level(prob, t, p, mode, x, d, tol);
            out.value = guarded([&] { return transversality_eval(prob, t, p, mode, x, d, {}, {}); });
        } catch (const DomainError&) {
            return out;
        }
        out.x = {mode, std::move(x)};
        out.d = std::move(d);
        return out;
    });
}

PointSearch min_reset(const Problem& prob, const Template& t, std::span<const double> p, std::size_t starts,
                      std::uint64_t seed) {
    if (prob.resets().empty()) {
        PointSearch none;
        none.value = kInf;
        return none;
    }
    const std::size_t n = prob.state_dim();
    return multi_start(starts, [&](std::size_t i) {
        const std::size_t ri = i % prob.resets().size();
        const ResetRule& rule = prob.resets()[ri];
        auto rng = start_rng(seed, 4, i);
        const BoxObjective f = [&](std::span<const double> x, std::span<double> grad) {
            return guarded([&] {
                Point y(n);
                prob.reset_map(ri, x, y);
                const double before = t.value(p, rule.source, x);
                const double after = -t.value(p, rule.target, y);
                if (!grad.empty()) {
                    if (before >= after) {
                        t.gradient(p, rule.source, x, grad);
                    } else {
                        std::vector<double> gy(n), jr(n * n);
                        t.gradient(p, rule.target, y, gy);
                        prob.reset_jacobian(ri, x, jr);
                        for (std::size_t j = 0; j < n; ++j) {
                            double s = 0.0;
                            for (std::size_t k = 0; k < n; ++k) s += jr[k * n + j] * gy[k];
                            grad[j] = -s;
                        }
                    }
                }
                return std::max(before, after);
            });
        };
        LocalResult r = minimize_projected(f, rule.guard, random_point(rule.guard, rng));
        PointSearch out;
        out.x = {rule.source, std::move(r.z)};
        out.reset = ri;
        out.value = r.value;
        return out;
    });
}

const char* to_string(CounterexampleKind k) {
    switch (k) {
        case CounterexampleKind::Initial: return "initial";
        case CounterexampleKind::Unsafe: return "unsafe";
        case CounterexampleKind::Transversality: return "transversality";
        case CounterexampleKind::Reset: return "reset";
    }
    return "unknown";
}

Segment counterexample_segment(const Problem& prob, const Problem& reversed, const Template& t,
                               std::span<const double> p, CounterexampleKind kind, const ModePoint& x,
                               std::size_t reset, double max_time, const SimOptions& opt) {
    switch (kind) {
        case CounterexampleKind::Initial:
            return make_segment(prob, x, omega(prob, t, p, x, max_time, opt));
        case CounterexampleKind::Unsafe:
            return make_segment(prob, alpha(reversed, t, p, x, max_time, opt), x);
        case CounterexampleKind::Transversality:
            return make_segment(prob, alpha(reversed, t, p, x, max_time, opt), omega(prob, t, p, x, max_time, opt));
        case CounterexampleKind::Reset: {
            const ResetRule& rule = prob.resets().at(reset);
            ModePoint after{rule.target, Point(prob.state_dim())};
            prob.reset_map(reset, x.x, after.x);
            return make_segment(prob, alpha(reversed, t, p, x, max_time, opt),
                                omega(prob, t, p, after, max_time, opt));
        }
    }
    throw InternalError("unknown counter-example kind");
}

bool refutes(const Template& t, std::span<const double> p, const Segment& seg) {
    // Margins of the normalized rows, as in the sampled constraint.
    const double vs = t.value(p, seg.start.mode, seg.start.x) / norm2(coeff_row(t, seg.start.mode, seg.start.x));
    const double ve = t.value(p, seg.end.mode, seg.end.x) / norm2(coeff_row(t, seg.end.mode, seg.end.x));
    double m = std::max(vs, -ve);
    if (seg.start_in_initial) m = std::min(m, -vs);
    if (seg.start_in_unsafe) m = std::min(m, vs);
    if (seg.end_in_initial) m = std::min(m, -ve);
    if (seg.end_in_unsafe) m = std::min(m, ve);
    return m <= 0.0;
}

CheckResult find_counterexample(const Problem& prob, const Problem& reversed, const Template& t,
                                std::span<const double> p, const FalsifyConfig& cfg) {
    const PointSearch found[4] = {
        min_initial(prob, t, p, cfg.starts, cfg.seed),
        min_unsafe(prob, t, p, cfg.starts, cfg.seed),
        min_transversality(prob, t, p, cfg.starts, cfg.seed),
        min_reset(prob, t, p, cfg.starts, cfg.seed),
    };
    CheckResult res;
    std::size_t arg = 0;
    for (std::size_t i = 0; i < 4; ++i) {
        res.values[i] = found[i].value;
        if (found[i].value < found[arg].value) arg = i;
    }
    if (!(found[arg].value < -cfg.eps)) return res;

    Counterexample ce;
    ce.kind = static_cast<CounterexampleKind>(arg);
    ce.x = found[arg].x;
    ce.d = found[arg].d;
    ce.reset = found[arg].reset;
    ce.value = found[arg].value;
    ce.segment = counterexample_segment(prob, reversed, t, p, ce.kind, ce.x, ce.reset, cfg.max_time, cfg.sim);
    if (!refutes(t, p, ce.segment)) {
        throw InternalError(std::string("counter-example segment does not refute the candidate (") +
                            to_string(ce.kind) + ")");
    }
    res.counterexample = std::move(ce);
    return res;
}

}  // namespace bsynth
