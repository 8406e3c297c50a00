#include "bsynth/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <limits>
#include <optional>
#include <queue>

namespace bsynth {

namespace {

using Clock = std::chrono::steady_clock;

// A term with its symbolic partial derivatives, for the mean-value form.
struct Enclosable {
    Expr f;
    std::vector<Expr> grad;

    Enclosable(Expr e, std::size_t vars) : f(std::move(e)) {
        for (std::size_t j = 0; j < vars; ++j) grad.push_back(differentiate(f, j));
    }
};

// Natural extension intersected with the mean-value form about the midpoint.
IntervalValue enclose(const Enclosable& e, std::span<const Interval> box) {
    const IntervalValue nat = interval_eval(e.f, box);
    if (!nat.defined()) return nat;
    std::vector<Interval> c(box.begin(), box.end());
    for (Interval& v : c) v = Interval(v.mid());
    const IntervalValue fc = interval_eval(e.f, c);
    if (!fc.defined()) return nat;
    Interval mv = fc.range;
    for (std::size_t j = 0; j < e.grad.size(); ++j) {
        if (box[j].is_point()) continue;
        const IntervalValue g = interval_eval(e.grad[j], box);
        if (!g.defined()) return nat;
        mv = mv + g.range * (box[j] - c[j]);
    }
    const double lo = std::max(nat.range.lower(), mv.lower());
    const double hi = std::min(nat.range.upper(), mv.upper());
    if (!(lo <= hi)) return nat;
    return {Definedness::Defined, Interval(lo, hi)};
}

std::optional<double> point_eval(const Expr& e, std::span<const double> x) {
    try {
        const double v = eval(e, x);
        if (std::isfinite(v)) return v;
    } catch (const DomainError&) {
    }
    return std::nullopt;
}

double norm2(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

enum class Decision { Proved, Undecided };

struct Witness {
    Point x;  // state followed by disturbance coordinates
};

// Outcome of branch and bound over one region of one condition.
struct RegionOutcome {
    VerdictKind kind = VerdictKind::Verified;
    Witness witness;
    std::vector<Box> unresolved;
    std::size_t unresolved_count = 0;
    double smallest_width = std::numeric_limits<double>::infinity();
    std::size_t proved = 0;
    std::size_t split = 0;
    double covered = 0.0;
    double volume = 0.0;
};

double volume_of(const Box& b, const Box& region) {
    double v = 1.0;
    for (std::size_t i = 0; i < b.dimension(); ++i) {
        if (region[i].width() > 0.0) v *= b[i].width() / region[i].width();
    }
    return v;
}

double max_width(const Box& b) {
    double w = 0.0;
    for (const Interval& i : b.dims) w = std::max(w, i.width());
    return w;
}

template <class Decide, class FindWitness>
RegionOutcome branch_and_bound(const Box& region, const Box& scale, std::size_t x_dims, const VerifyConfig& cfg,
                               Decide&& decide, FindWitness&& find_witness) {
    RegionOutcome out;
    out.volume = volume_of(region, region);
    const std::size_t dims = region.dimension();
    auto rel = [&](const Box& b, std::size_t i) {
        return scale[i].width() > 0.0 ? b[i].width() / scale[i].width() : 0.0;
    };
    auto key = [&](const Box& b) {
        double w = 0.0;
        for (std::size_t i = 0; i < dims; ++i) w = std::max(w, rel(b, i));
        return w;
    };
    struct Item {
        double width;
        std::size_t id;
        Box box;
    };
    auto later = [](const Item& a, const Item& b) {
        if (a.width != b.width) return a.width < b.width;
        return a.id > b.id;
    };
    std::priority_queue<Item, std::vector<Item>, decltype(later)> queue(later);
    std::size_t next_id = 0;
    queue.push({key(region), next_id++, region});
    std::size_t processed = 0;

    auto leave_unresolved = [&](const Box& b) {
        ++out.unresolved_count;
        out.smallest_width = std::min(out.smallest_width, max_width(b));
        if (out.unresolved.size() < cfg.max_listed) out.unresolved.push_back(b);
    };

    while (!queue.empty()) {
        Item item = queue.top();
        queue.pop();
        if (++processed > cfg.max_boxes) {
            leave_unresolved(item.box);
            while (!queue.empty()) {
                leave_unresolved(queue.top().box);
                queue.pop();
            }
            out.kind = VerdictKind::Unknown;
            break;
        }
        const Box& b = item.box;
        if (decide(b) == Decision::Proved) {
            ++out.proved;
            out.covered += volume_of(b, region);
            continue;
        }
        if (auto w = find_witness(b)) {
            out.kind = VerdictKind::Refuted;
            out.witness = std::move(*w);
            return out;
        }
        // Split the widest state dimension; disturbances only once every
        // state dimension is within ten minimum widths.
        std::size_t split = dims;
        bool x_coarse = false;
        for (std::size_t i = 0; i < x_dims; ++i) {
            if (rel(b, i) > 10.0 * cfg.min_box_width) x_coarse = true;
        }
        auto widest = [&](std::size_t from, std::size_t to) {
            std::size_t best = dims;
            for (std::size_t i = from; i < to; ++i) {
                if (rel(b, i) <= cfg.min_box_width) continue;
                if (best == dims || rel(b, i) > rel(b, best)) best = i;
            }
            return best;
        };
        if (!x_coarse) split = widest(x_dims, dims);
        if (split == dims) split = widest(0, x_dims);
        if (split == dims) {
            out.covered += volume_of(b, region);
            leave_unresolved(b);
            out.kind = VerdictKind::Unknown;
            continue;
        }
        ++out.split;
        Box lo = b, hi = b;
        const double mid = b[split].mid();
        lo[split] = Interval(b[split].lower(), mid);
        hi[split] = Interval(mid, b[split].upper());
        queue.push({key(lo), next_id++, std::move(lo)});
        queue.push({key(hi), next_id++, std::move(hi)});
    }
    return out;
}

// Midpoint plus all corners when there are few of them.
std::vector<Point> sample_points(const Box& b) {
    std::vector<Point> pts{b.midpoint()};
    if (b.dimension() <= 6) {
        for (Point& v : vertices(b)) pts.push_back(std::move(v));
    }
    return pts;
}

struct ConditionOutcome {
    ConditionReport report;
    std::optional<Verdict> failure;
};

void merge(ConditionOutcome& acc, const RegionOutcome& r, int condition, std::size_t mode, std::size_t n,
           std::size_t reset, double& volume, double& covered) {
    acc.report.proved += r.proved;
    acc.report.split += r.split;
    acc.report.unresolved += r.unresolved_count;
    volume += r.volume;
    covered += r.covered;
    if (r.kind == VerdictKind::Verified) return;
    if (acc.failure && acc.failure->kind == VerdictKind::Refuted) return;
    if (r.kind == VerdictKind::Refuted) {
        Verdict v;
        v.kind = VerdictKind::Refuted;
        v.condition = condition;
        v.witness = {mode, Point(r.witness.x.begin(), r.witness.x.begin() + static_cast<std::ptrdiff_t>(n))};
        v.witness_d.assign(r.witness.x.begin() + static_cast<std::ptrdiff_t>(n), r.witness.x.end());
        v.reset = reset;
        acc.failure = std::move(v);
        return;
    }
    if (!acc.failure) {
        Verdict v;
        v.kind = VerdictKind::Unknown;
        v.condition = condition;
        v.smallest_width = std::numeric_limits<double>::infinity();
        acc.failure = std::move(v);
    }
    for (const Box& b : r.unresolved) {
        if (acc.failure->unresolved.size() < 32) acc.failure->unresolved.push_back({mode, b});
    }
    acc.failure->smallest_width = std::min(acc.failure->smallest_width, r.smallest_width);
}

class Verifier {
public:
    Verifier(const Problem& prob, const Template& t, std::span<const double> p, const VerifyConfig& cfg)
        : prob_(prob), cfg_(cfg), n_(prob.state_dim()), l_(prob.disturbance_dim()) {
        for (std::size_t m = 0; m < prob.mode_count(); ++m) {
            Expr v = t.to_expr(p, m);
            Expr lie = Expr::constant(0.0);
            for (std::size_t i = 0; i < n_; ++i) lie = lie + differentiate(v, i) * prob.mode(m).flow[i];
            value_.emplace_back(v, n_);
            lie_.emplace_back(lie, n_ + l_);
        }
        for (const ResetRule& r : prob.resets()) {
            after_reset_.emplace_back(substitute(value_[r.target].f, r.map), n_);
        }
    }

    ConditionOutcome sign_condition(int condition) const {
        const bool initial = condition == 1;
        const auto& regions = initial ? prob_.initial() : prob_.unsafe();
        ConditionOutcome acc;
        double volume = 0.0, covered = 0.0;
        for (const ModeBox& mb : regions) {
            const Enclosable& v = value_[mb.mode];
            auto decide = [&](const Box& b) {
                const IntervalValue r = enclose(v, b.dims);
                if (!r.defined()) return Decision::Undecided;
                const bool ok = initial ? r.range.upper() < 0.0 : r.range.lower() > 0.0;
                return ok ? Decision::Proved : Decision::Undecided;
            };
            auto witness = [&](const Box& b) -> std::optional<Witness> {
                for (Point& x : sample_points(b)) {
                    const auto val = point_eval(v.f, x);
                    if (val && (initial ? *val >= 0.0 : *val <= 0.0)) return Witness{std::move(x)};
                }
                return std::nullopt;
            };
            const RegionOutcome r = branch_and_bound(mb.box, prob_.omega(mb.mode), n_, cfg_, decide, witness);
            merge(acc, r, condition, mb.mode, n_, 0, volume, covered);
            if (acc.failure && acc.failure->kind == VerdictKind::Refuted) break;
        }
        finish(acc, volume, covered);
        return acc;
    }

    ConditionOutcome transversality() const {
        ConditionOutcome acc;
        double volume = 0.0, covered = 0.0;
        for (std::size_t m = 0; m < prob_.mode_count(); ++m) {
            Box region = prob_.omega(m);
            region.dims.insert(region.dims.end(), prob_.disturbance_box().dims.begin(),
                               prob_.disturbance_box().dims.end());
            const Enclosable& v = value_[m];
            const Enclosable& lie = lie_[m];
            auto decide = [&](const Box& b) {
                const IntervalValue r = enclose(v, b.dims);
                if (r.defined() && (r.range.upper() < 0.0 || r.range.lower() > 0.0)) return Decision::Proved;
                const IntervalValue d = enclose(lie, b.dims);
                if (d.defined() && d.range.upper() < 0.0) return Decision::Proved;
                return Decision::Undecided;
            };
            auto witness = [&](const Box& b) { return level_witness(b, v, lie); };
            const RegionOutcome r = branch_and_bound(region, region, n_, cfg_, decide, witness);
            merge(acc, r, 3, m, n_, 0, volume, covered);
            if (acc.failure && acc.failure->kind == VerdictKind::Refuted) break;
        }
        finish(acc, volume, covered);
        return acc;
    }

    ConditionOutcome reset_condition() const {
        ConditionOutcome acc;
        double volume = 0.0, covered = 0.0;
        for (std::size_t k = 0; k < prob_.resets().size(); ++k) {
            const ResetRule& rule = prob_.resets()[k];
            const Enclosable& before = value_[rule.source];
            const Enclosable& after = after_reset_[k];
            auto decide = [&](const Box& b) {
                const IntervalValue r = enclose(before, b.dims);
                if (r.defined() && r.range.lower() > 0.0) return Decision::Proved;
                const IntervalValue a = enclose(after, b.dims);
                if (a.defined() && a.range.upper() < 0.0) return Decision::Proved;
                return Decision::Undecided;
            };
            auto witness = [&](const Box& b) -> std::optional<Witness> {
                for (Point& x : sample_points(b)) {
                    const auto v0 = point_eval(before.f, x);
                    const auto v1 = point_eval(after.f, x);
                    if (v0 && v1 && *v0 <= 0.0 && *v1 >= 0.0) return Witness{std::move(x)};
                }
                return std::nullopt;
            };
            const RegionOutcome r = branch_and_bound(rule.guard, prob_.omega(rule.source), n_, cfg_, decide, witness);
            merge(acc, r, 4, rule.source, n_, k, volume, covered);
            if (acc.failure && acc.failure->kind == VerdictKind::Refuted) break;
        }
        finish(acc, volume, covered);
        return acc;
    }

private:
    static void finish(ConditionOutcome& acc, double volume, double covered) {
        acc.report.covered = volume > 0.0 ? covered / volume : 1.0;
        acc.report.outcome = acc.failure ? acc.failure->kind : VerdictKind::Verified;
    }

    // A point on V = 0 (bisection between sample points of opposite sign)
    // where grad V . f >= 0 for some sampled disturbance.
    std::optional<Witness> level_witness(const Box& b, const Enclosable& v, const Enclosable& lie) const {
        Box xb(std::vector<Interval>(b.dims.begin(), b.dims.begin() + static_cast<std::ptrdiff_t>(n_)));
        Box db(std::vector<Interval>(b.dims.begin() + static_cast<std::ptrdiff_t>(n_), b.dims.end()));
        std::vector<Point> ds{db.midpoint()};
        if (l_ > 0 && l_ <= 4) {
            for (Point& d : vertices(db)) ds.push_back(std::move(d));
        }
        const Point mid = xb.midpoint();
        const auto vm = point_eval(v.f, mid);
        if (!vm) return std::nullopt;
        std::vector<Point> others;
        for (std::size_t i = 0; i < n_; ++i) {
            for (double end : {xb[i].lower(), xb[i].upper()}) {
                Point q = mid;
                q[i] = end;
                others.push_back(std::move(q));
            }
        }
        if (n_ <= 6) {
            for (Point& q : vertices(xb)) others.push_back(std::move(q));
        }
        auto check = [&](const Point& x) -> std::optional<Witness> {
            for (const Point& d : ds) {
                Point z = x;
                z.insert(z.end(), d.begin(), d.end());
                const auto g = point_eval(lie.f, z);
                if (g && *g >= 0.0) return Witness{std::move(z)};
            }
            return std::nullopt;
        };
        if (*vm == 0.0) return check(mid);
        for (const Point& q : others) {
            const auto vq = point_eval(v.f, q);
            if (!vq) continue;
            if (*vq == 0.0) {
                if (auto w = check(q)) return w;
                continue;
            }
            if ((*vq > 0.0) == (*vm > 0.0)) continue;
            // bisection on the segment from mid to q
            Point a = mid, c = q, x(n_);
            double va = *vm;
            for (int it = 0; it < 80; ++it) {
                for (std::size_t i = 0; i < n_; ++i) x[i] = 0.5 * (a[i] + c[i]);
                const auto vx = point_eval(v.f, x);
                if (!vx) break;
                if (*vx == 0.0) break;
                if ((*vx > 0.0) == (va > 0.0)) {
                    a = x;
                    va = *vx;
                } else {
                    c = x;
                }
            }
            if (auto w = check(x)) return w;
        }
        return std::nullopt;
    }

    const Problem& prob_;
    const VerifyConfig& cfg_;
    std::size_t n_, l_;
    std::vector<Enclosable> value_;
    std::vector<Enclosable> lie_;
    std::vector<Enclosable> after_reset_;
};

}  // namespace

const char* to_string(VerdictKind k) {
    switch (k) {
        case VerdictKind::Verified: return "verified";
        case VerdictKind::Refuted: return "refuted";
        case VerdictKind::Unknown: return "unknown";
    }
    return "unknown";
}

VerifyReport verify(const Problem& prob, const Template& t, std::span<const double> p, const VerifyConfig& cfg) {
    for (double v : p) {
        if (!std::isfinite(v)) throw std::invalid_argument("verify: non-finite barrier coefficient");
    }
    const auto start = Clock::now();
    const Verifier verifier(prob, t, p, cfg);
    auto timed = [&](int condition) {
        const auto t0 = Clock::now();
        ConditionOutcome out = condition == 3   ? verifier.transversality()
                               : condition == 4 ? verifier.reset_condition()
                                                : verifier.sign_condition(condition);
        out.report.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
        return out;
    };
    ConditionOutcome outcomes[4];
    if (cfg.parallel) {
        std::future<ConditionOutcome> jobs[4];
        for (int c = 0; c < 4; ++c) jobs[c] = std::async(std::launch::async, timed, c + 1);
        for (int c = 0; c < 4; ++c) outcomes[c] = jobs[c].get();
    } else {
        for (int c = 0; c < 4; ++c) outcomes[c] = timed(c + 1);
    }

    VerifyReport report;
    for (int c = 0; c < 4; ++c) report.conditions[c] = outcomes[c].report;
    // Refuted dominates Unknown dominates Verified; lower conditions first.
    for (VerdictKind kind : {VerdictKind::Refuted, VerdictKind::Unknown}) {
        for (const ConditionOutcome& o : outcomes) {
            if (o.failure && o.failure->kind == kind) {
                report.verdict = *o.failure;
                break;
            }
        }
        if (report.verdict.kind != VerdictKind::Verified) break;
    }
    report.seconds = std::chrono::duration<double>(Clock::now() - start).count();
    return report;
}

bool witness_violates(const Problem& prob, const Template& t, std::span<const double> p, const Verdict& v) {
    if (v.kind != VerdictKind::Refuted) return false;
    const ModePoint& s = v.witness;
    switch (v.condition) {
        case 1: return prob.in_initial(s) && t.value(p, s.mode, s.x) >= 0.0;
        case 2: return prob.in_unsafe(s) && t.value(p, s.mode, s.x) <= 0.0;
        case 3: {
            if (!prob.omega(s.mode).contains(s.x) || !prob.disturbance_box().contains(v.witness_d)) return false;
            if (std::fabs(t.value(p, s.mode, s.x)) > 1e-9 * (1.0 + norm2(p))) return false;
            std::vector<double> g(prob.state_dim()), f(prob.state_dim());
            t.gradient(p, s.mode, s.x, g);
            prob.flow(s.mode, s.x, v.witness_d, f);
            double lie = 0.0;
            for (std::size_t i = 0; i < g.size(); ++i) lie += g[i] * f[i];
            return lie >= 0.0;
        }
        case 4: {
            const ResetRule& rule = prob.resets().at(v.reset);
            if (!rule.guard.contains(s.x)) return false;
            Point y(prob.state_dim());
            prob.reset_map(v.reset, s.x, y);
            return t.value(p, rule.source, s.x) <= 0.0 && t.value(p, rule.target, y) >= 0.0;
        }
        default: return false;
    }
}

}  // namespace bsynth
