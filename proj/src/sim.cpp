#include "bsynth/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <set>

namespace bsynth {

const char* to_string(StopReason r) {
    switch (r) {
        case StopReason::Horizon: return "horizon";
        case StopReason::LeftBloatedSpace: return "left-bloated-space";
        case StopReason::Event: return "event";
        case StopReason::Livelock: return "livelock";
        case StopReason::IntegrationFailure: return "integration-failure";
    }
    return "unknown";
}

DisturbancePolicy constant_disturbance(Point d) {
    return [d = std::move(d)](std::size_t, std::span<const double>, std::span<double> out) {
        std::copy(d.begin(), d.end(), out.begin());
    };
}

DisturbancePolicy center_disturbance(const Problem& prob) {
    return constant_disturbance(prob.disturbance_box().midpoint());
}

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

class Stepper {
public:
    Stepper(const Problem& prob, std::size_t mode, const SimOptions& opt)
        : prob_(prob), mode_(mode), opt_(opt), n_(prob.state_dim()), d_(prob.disturbance_dim()),
          k_(7, std::vector<double>(n_)), tmp_(n_) {}

    std::span<double> disturbance() { return d_; }

    // One step of size h from x; returns the weighted RMS error estimate,
    // or +inf when the right-hand side is undefined or not finite.
    double step(std::span<const double> x, double h, std::span<double> y) {
        auto& k = k_;
        if (!rhs(x, k[0])) return kInf;
        for (std::size_t i = 0; i < n_; ++i) tmp_[i] = x[i] + h * a21 * k[0][i];
        if (!rhs(tmp_, k[1])) return kInf;
        for (std::size_t i = 0; i < n_; ++i) tmp_[i] = x[i] + h * (a31 * k[0][i] + a32 * k[1][i]);
        if (!rhs(tmp_, k[2])) return kInf;
        for (std::size_t i = 0; i < n_; ++i) tmp_[i] = x[i] + h * (a41 * k[0][i] + a42 * k[1][i] + a43 * k[2][i]);
        if (!rhs(tmp_, k[3])) return kInf;
        for (std::size_t i = 0; i < n_; ++i) {
            tmp_[i] = x[i] + h * (a51 * k[0][i] + a52 * k[1][i] + a53 * k[2][i] + a54 * k[3][i]);
        }
        if (!rhs(tmp_, k[4])) return kInf;
        for (std::size_t i = 0; i < n_; ++i) {
            tmp_[i] = x[i] + h * (a61 * k[0][i] + a62 * k[1][i] + a63 * k[2][i] + a64 * k[3][i] + a65 * k[4][i]);
        }
        if (!rhs(tmp_, k[5])) return kInf;
        for (std::size_t i = 0; i < n_; ++i) {
            y[i] = x[i] + h * (b1 * k[0][i] + b3 * k[2][i] + b4 * k[3][i] + b5 * k[4][i] + b6 * k[5][i]);
        }
        if (!rhs(y, k[6])) return kInf;
        double sum = 0.0;
        for (std::size_t i = 0; i < n_; ++i) {
            const double err =
                h * (e1 * k[0][i] + e3 * k[2][i] + e4 * k[3][i] + e5 * k[4][i] + e6 * k[5][i] + e7 * k[6][i]);
            const double scale = opt_.atol + opt_.rtol * std::max(std::fabs(x[i]), std::fabs(y[i]));
            sum += (err / scale) * (err / scale);
        }
        const double norm = std::sqrt(sum / static_cast<double>(n_));
        return std::isfinite(norm) ? norm : kInf;
    }

private:
    static constexpr double kInf = std::numeric_limits<double>::infinity();

    bool rhs(std::span<const double> x, std::span<double> out) {
        try {
            prob_.flow(mode_, x, d_, out);
        } catch (const DomainError&) {
            return false;
        }
        return std::all_of(out.begin(), out.end(), [](double v) { return std::isfinite(v); });
    }

    const Problem& prob_;
    std::size_t mode_;
    const SimOptions& opt_;
    std::size_t n_;
    std::vector<double> d_;
    std::vector<std::vector<double>> k_;
    std::vector<double> tmp_;
};

double guard_tolerance(const Interval& iv) {
    return 1e-7 * (1.0 + std::max(std::fabs(iv.lower()), std::fabs(iv.upper())));
}

bool in_guard(const Box& guard, std::span<const double> x) {
    for (std::size_t i = 0; i < guard.dimension(); ++i) {
        const double tol = guard_tolerance(guard[i]);
        if (x[i] < guard[i].lower() - tol || x[i] > guard[i].upper() + tol) return false;
    }
    return true;
}

std::optional<std::size_t> guard_at(const Problem& prob, std::size_t mode, std::span<const double> x) {
    for (std::size_t r = 0; r < prob.resets().size(); ++r) {
        const ResetRule& rule = prob.resets()[r];
        if (rule.source == mode && in_guard(rule.guard, x)) return r;
    }
    return std::nullopt;
}

enum class Trigger { None, Bloat, Guard, Event };

struct PhaseEnd {
    Point x;
    double t = 0.0;
    StopReason reason = StopReason::Horizon;
    std::optional<std::size_t> reset;
};

struct Phase {
    const Problem& prob;
    std::size_t mode;
    const DisturbancePolicy& policy;
    std::span<const EventFunction> events;
    const Box& bloated;
    bool with_guards;
    const SimOptions& opt;
};

// Smallest tau in (0, h] where pred holds, to within the time tolerance.
// Returns (tau_lo, tau_hi) with pred(tau_hi) true and the states at both.
struct Bracket {
    double lo, hi;
    Point x_lo, x_hi;
};

template <class Pred>
Bracket bisect(Stepper& stepper, std::span<const double> x, double h, std::span<const double> y, double tol,
               Pred pred) {
    Bracket b{0.0, h, Point(x.begin(), x.end()), Point(y.begin(), y.end())};
    Point mid_state(x.size());
    while (b.hi - b.lo > tol) {
        const double mid = 0.5 * (b.lo + b.hi);
        const double err = stepper.step(x, mid, mid_state);
        const bool hit = !std::isfinite(err) || pred(std::span<const double>(mid_state));
        if (hit) {
            b.hi = mid;
            b.x_hi = mid_state;
        } else {
            b.lo = mid;
            b.x_lo = mid_state;
        }
    }
    return b;
}

PhaseEnd run_phase(const Phase& ph, Point x, double t, double t_end, std::size_t& steps) {
    const Problem& prob = ph.prob;
    const std::size_t mode = ph.mode;
    const SimOptions& opt = ph.opt;
    const std::size_t n = prob.state_dim();

    auto event_value = [&](std::size_t k, std::span<const double> s) { return ph.events[k](mode, s); };

    if (ph.bloated.margin(x) < 0.0) return {x, t, StopReason::LeftBloatedSpace, std::nullopt};
    try {
        for (std::size_t k = 0; k < ph.events.size(); ++k) {
            if (!(event_value(k, x) > 0.0)) return {x, t, StopReason::Event, std::nullopt};
        }
    } catch (const DomainError&) {
        return {x, t, StopReason::IntegrationFailure, std::nullopt};
    }
    if (t >= t_end) return {x, t, StopReason::Horizon, std::nullopt};

    Stepper stepper(prob, mode, opt);
    Point y(n);
    std::vector<double> f0(n);

    // Initial step from the local time scale |x| / |f|.
    double h;
    {
        try {
            ph.policy(mode, x, stepper.disturbance());
            prob.flow(mode, x, stepper.disturbance(), f0);
        } catch (const DomainError&) {
            return {x, t, StopReason::IntegrationFailure, std::nullopt};
        }
        double nx = 0.0, nf = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            nx = std::max(nx, std::fabs(x[i]));
            nf = std::max(nf, std::fabs(f0[i]));
        }
        h = (nx < 1e-5 || nf < 1e-5) ? 1e-4 : 0.01 * nx / nf;
        h = std::min(h, opt.max_step);
    }

    std::vector<std::size_t> guards;
    if (ph.with_guards) {
        for (std::size_t r = 0; r < prob.resets().size(); ++r) {
            if (prob.resets()[r].source == mode) guards.push_back(r);
        }
    }

    while (true) {
        if (++steps > opt.max_steps) return {x, t, StopReason::IntegrationFailure, std::nullopt};
        try {
            ph.policy(mode, x, stepper.disturbance());
        } catch (const DomainError&) {
            return {x, t, StopReason::IntegrationFailure, std::nullopt};
        }
        const double remaining = t_end - t;
        const bool last = h >= remaining;
        const double step = last ? remaining : h;
        const double err = stepper.step(x, step, y);
        if (!(err <= 1.0)) {
            const double factor = std::isfinite(err) ? std::max(0.1, 0.9 * std::pow(err, -0.2)) : 0.25;
            h = step * factor;
            if (h < 1e-14 * std::max(1.0, std::fabs(t))) {
                return {x, t, StopReason::IntegrationFailure, std::nullopt};
            }
            continue;
        }

        // Earliest trigger within the accepted step.
        Trigger which = Trigger::None;
        double best = std::numeric_limits<double>::infinity();
        PhaseEnd end;
        const double tol = opt.event_time_tol;

        if (ph.bloated.margin(y) < 0.0) {
            Bracket b = bisect(stepper, x, step, y, tol,
                               [&](std::span<const double> s) { return ph.bloated.margin(s) < 0.0; });
            which = Trigger::Bloat;
            best = b.hi;
            end = {b.x_lo, t + b.lo, StopReason::LeftBloatedSpace, std::nullopt};
        }
        for (std::size_t r : guards) {
            const Box& g = prob.resets()[r].guard;
            for (std::size_t i = 0; i < n; ++i) {
                for (int side = 0; side < 2; ++side) {
                    auto face = [&, i, side](std::span<const double> s) {
                        return side == 0 ? s[i] - g[i].lower() : g[i].upper() - s[i];
                    };
                    if (!(face(x) < 0.0 && face(y) >= 0.0)) continue;
                    Bracket b = bisect(stepper, x, step, y, tol,
                                       [&](std::span<const double> s) { return face(s) >= 0.0; });
                    if (b.hi < best && in_guard(g, b.x_hi)) {
                        which = Trigger::Guard;
                        best = b.hi;
                        end = {b.x_hi, t + b.hi, StopReason::Horizon, r};
                    }
                }
            }
        }
        try {
            for (std::size_t k = 0; k < ph.events.size(); ++k) {
                if (event_value(k, y) > 0.0) continue;
                Bracket b = bisect(stepper, x, step, y, tol,
                                   [&](std::span<const double> s) { return !(event_value(k, s) > 0.0); });
                if (b.hi < best) {
                    which = Trigger::Event;
                    best = b.hi;
                    end = {b.x_hi, t + b.hi, StopReason::Event, std::nullopt};
                }
            }
        } catch (const DomainError&) {
            return {x, t, StopReason::IntegrationFailure, std::nullopt};
        }
        if (which != Trigger::None) return end;

        x.swap(y);
        t = last ? t_end : t + step;
        if (last) return {x, t, StopReason::Horizon, std::nullopt};
        h = step * std::min(5.0, std::max(0.2, 0.9 * std::pow(std::max(err, 1e-12), -0.2)));
        h = std::min(h, opt.max_step);
    }
}

}  // namespace

Trajectory integrate(const Problem& prob, std::size_t mode, Point x0, const DisturbancePolicy& policy,
                     double horizon, std::span<const EventFunction> events, const Box& bloated,
                     const SimOptions& opt) {
    Trajectory tr;
    tr.start = {mode, x0};
    std::size_t steps = 0;
    const Phase ph{prob, mode, policy, events, bloated, false, opt};
    PhaseEnd e = run_phase(ph, std::move(x0), 0.0, horizon, steps);
    tr.end = {mode, std::move(e.x)};
    tr.end_time = e.t;
    tr.reason = e.reason;
    return tr;
}

Trajectory flow_hybrid(const Problem& prob, const ModePoint& start, const DisturbancePolicy& policy,
                       double horizon, const SimOptions& opt, std::span<const EventFunction> events) {
    Trajectory tr;
    tr.start = start;
    ModePoint cur = start;
    double t = 0.0;
    std::size_t stalled = 0;  // resets since the last continuous progress
    std::size_t steps = 0;
    std::vector<Box> bloated;
    for (std::size_t m = 0; m < prob.mode_count(); ++m) bloated.push_back(bloat(prob.omega(m), opt.bloat));
    const std::size_t n = prob.state_dim();

    auto finish = [&](StopReason reason) {
        tr.end = cur;
        tr.end_time = t;
        tr.reason = reason;
        return tr;
    };
    auto jump = [&](std::size_t r) {
        const ResetRule& rule = prob.resets()[r];
        Point next(n);
        prob.reset_map(r, cur.x, next);
        cur = {rule.target, std::move(next)};
        ++tr.resets;
        ++stalled;
    };

    while (true) {
        if (t >= horizon) return finish(StopReason::Horizon);
        if (auto r = guard_at(prob, cur.mode, cur.x)) {
            if (stalled >= opt.max_resets) return finish(StopReason::Livelock);
            try {
                jump(*r);
            } catch (const DomainError&) {
                return finish(StopReason::IntegrationFailure);
            }
            continue;
        }
        const Phase ph{prob, cur.mode, policy, events, bloated[cur.mode], true, opt};
        PhaseEnd e = run_phase(ph, cur.x, t, horizon, steps);
        if (e.t > t) stalled = 0;
        cur.x = std::move(e.x);
        t = e.t;
        if (!e.reset) return finish(e.reason);
        if (stalled >= opt.max_resets) return finish(StopReason::Livelock);
        try {
            jump(*e.reset);
        } catch (const DomainError&) {
            return finish(StopReason::IntegrationFailure);
        }
    }
}

Problem reverse(const Problem& prob) {
    ProblemData data = prob.data();
    for (ModeDef& m : data.modes) {
        for (Expr& f : m.flow) f = -f;
    }
    for (std::size_t r = 0; r < data.resets.size(); ++r) {
        ResetRule& rule = data.resets[r];
        if (!rule.inverse || !rule.image) {
            throw ModelError("reset " + std::to_string(r) + ": backward simulation needs an inverse map and image");
        }
        ResetRule inv;
        inv.source = rule.target;
        inv.target = rule.source;
        inv.guard = *rule.image;
        inv.image = rule.guard;
        inv.map = *rule.inverse;
        inv.inverse = rule.map;
        rule = std::move(inv);
    }
    std::swap(data.initial, data.unsafe);
    return Problem(std::move(data));
}

namespace {

std::vector<Point> capped_vertices(const Box& box, std::size_t cap, std::mt19937_64& rng) {
    std::vector<std::size_t> free_dims;
    for (std::size_t i = 0; i < box.dimension(); ++i) {
        if (box[i].lower() != box[i].upper()) free_dims.push_back(i);
    }
    const std::size_t nd = free_dims.size();
    if (nd < 63 && (std::size_t{1} << nd) <= cap) return vertices(box);

    std::set<std::vector<char>> picks;
    std::bernoulli_distribution coin(0.5);
    while (picks.size() < cap) {
        std::vector<char> bits(nd);
        for (char& b : bits) b = coin(rng) ? 1 : 0;
        picks.insert(std::move(bits));
    }
    std::vector<Point> out;
    out.reserve(cap);
    for (const auto& bits : picks) {
        Point v = box.lower();
        for (std::size_t j = 0; j < nd; ++j) {
            if (bits[j]) v[free_dims[j]] = box[free_dims[j]].upper();
        }
        out.push_back(std::move(v));
    }
    return out;
}

}  // namespace

std::vector<Segment> init_segments(const Problem& prob, double sigma, std::size_t vertex_cap,
                                   std::uint64_t seed, const SimOptions& opt) {
    if (!(sigma >= 0.0)) throw ModelError("simulation length must be non-negative");
    std::mt19937_64 rng(seed);
    std::vector<Segment> out;
    const DisturbancePolicy policy = center_disturbance(prob);
    for (const ModeBox& mb : prob.initial()) {
        for (Point& v : capped_vertices(mb.box, vertex_cap, rng)) {
            const ModePoint s{mb.mode, std::move(v)};
            const Trajectory tr = flow_hybrid(prob, s, policy, sigma, opt);
            out.push_back(make_segment(prob, s, tr.end));
        }
    }
    if (!prob.unsafe().empty()) {
        const Problem rev = reverse(prob);
        for (const ModeBox& mb : prob.unsafe()) {
            for (Point& v : capped_vertices(mb.box, vertex_cap, rng)) {
                const ModePoint s{mb.mode, std::move(v)};
                const Trajectory tr = flow_hybrid(rev, s, policy, sigma, opt);
                out.push_back(make_segment(prob, tr.end, s));
            }
        }
    }
    return out;
}

double extremal_lie_derivative(const Problem& prob, const Template& t, std::span<const double> p,
                               std::size_t mode, std::span<const double> x, bool maximize, std::span<double> d) {
    const std::size_t n = prob.state_dim();
    const std::size_t l = prob.disturbance_dim();
    const Box& dbox = prob.disturbance_box();
    std::vector<double> grad(n), f(n);
    t.gradient(p, mode, x, grad);
    auto lie = [&](std::span<const double> dist) {
        prob.flow(mode, x, dist, f);
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += grad[i] * f[i];
        return s;
    };
    if (l == 0) return lie(d);

    if (prob.affine_in_disturbance(mode)) {
        const Point mid = dbox.midpoint();
        std::vector<double> jx(n * n), jd(n * l);
        prob.flow_jacobian(mode, x, mid, jx, jd);
        for (std::size_t j = 0; j < l; ++j) {
            double c = 0.0;
            for (std::size_t i = 0; i < n; ++i) c += grad[i] * jd[i * l + j];
            if (c == 0.0) {
                d[j] = mid[j];
            } else {
                d[j] = ((c > 0.0) == maximize) ? dbox[j].upper() : dbox[j].lower();
            }
        }
        return lie(d);
    }

    double best = maximize ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
    for (const Point& v : vertices(dbox)) {
        const double val = lie(v);
        if (maximize ? val > best : val < best) {
            best = val;
            std::copy(v.begin(), v.end(), d.begin());
        }
    }
    return best;
}

namespace {

ModePoint monotone_flow(const Problem& prob, const Template& t, std::span<const double> p, const ModePoint& start,
                        double max_time, const SimOptions& opt, bool maximize) {
    const std::size_t l = prob.disturbance_dim();
    // Continue while the extreme of grad V . f keeps its sign: positive for
    // forward (maximize), negative for the reversed system (minimize).
    auto value = [&, l](std::size_t mode, std::span<const double> x) {
        double buf[16];
        std::vector<double> heap;
        std::span<double> d(buf, std::min<std::size_t>(l, 16));
        if (l > 16) {
            heap.resize(l);
            d = heap;
        }
        const double v = extremal_lie_derivative(prob, t, p, mode, x, maximize, d);
        return maximize ? v : -v;
    };
    if (!(value(start.mode, start.x) > 0.0)) return start;
    const DisturbancePolicy policy = [&](std::size_t mode, std::span<const double> x, std::span<double> d) {
        extremal_lie_derivative(prob, t, p, mode, x, maximize, d);
    };
    const EventFunction event = value;
    const Trajectory tr = flow_hybrid(prob, start, policy, max_time, opt, std::span<const EventFunction>(&event, 1));
    return tr.end;
}

}  // namespace

ModePoint omega(const Problem& prob, const Template& t, std::span<const double> p, const ModePoint& start,
                double max_time, const SimOptions& opt) {
    return monotone_flow(prob, t, p, start, max_time, opt, true);
}

ModePoint alpha(const Problem& reversed, const Template& t, std::span<const double> p, const ModePoint& start,
                double max_time, const SimOptions& opt) {
    return monotone_flow(reversed, t, p, start, max_time, opt, false);
}

}  // namespace bsynth
