#include "bsynth/chebyshev.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <set>

#include "bsynth/lp.hpp"

namespace bsynth {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

std::vector<double> negated(std::vector<double> v) {
    for (double& x : v) x = -x;
    return v;
}

}  // namespace

double SampledConstraint::margin(std::span<const double> p) const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& r : hard) m = std::min(m, dot(r, p));
    for (const auto& d : disjunctions) m = std::min(m, std::max(dot(d.first, p), dot(d.second, p)));
    return m;
}

std::vector<double> normalized(std::span<const double> a) {
    double norm = 0.0;
    for (double v : a) norm += v * v;
    norm = std::sqrt(norm);
    if (!(norm > 0.0) || !std::isfinite(norm)) throw InternalError("zero or non-finite coefficient vector");
    std::vector<double> out(a.begin(), a.end());
    for (double& v : out) v /= norm;
    return out;
}

SampledConstraint build(std::span<const Segment> segments, const Template& t, const Problem& prob) {
    (void)prob;  // classifications are already stored on the segments
    SampledConstraint c;
    c.k = t.parameter_count();
    for (const Segment& seg : segments) {
        const std::vector<double> as = normalized(coeff_row(t, seg.start.mode, seg.start.x));
        const std::vector<double> ae = normalized(coeff_row(t, seg.end.mode, seg.end.x));
        if (seg.start_in_initial) c.hard.push_back(negated(as));
        if (seg.start_in_unsafe) c.hard.push_back(as);
        if (seg.end_in_initial) c.hard.push_back(negated(ae));
        if (seg.end_in_unsafe) c.hard.push_back(ae);
        c.disjunctions.push_back({as, negated(ae)});
    }
    return c;
}

namespace {

struct Node {
    double bound;
    std::size_t id;
    std::vector<signed char> choice;  // per open disjunction: -1 unresolved, 0 first, 1 second
    std::vector<double> z;            // LP optimum (p, delta)
};

struct WorseNode {
    bool operator()(const Node& a, const Node& b) const {
        if (a.bound != b.bound) return a.bound < b.bound;
        return a.id > b.id;
    }
};

class Search {
public:
    Search(const SampledConstraint& c, const SolveOptions& opt) : c_(c), opt_(opt), k_(c.k) {
        std::set<std::vector<double>> hard(c.hard.begin(), c.hard.end());
        std::set<std::vector<double>> base = hard;
        for (std::size_t j = 0; j < c.disjunctions.size(); ++j) {
            const auto& d = c.disjunctions[j];
            if (hard.count(d.first) || hard.count(d.second)) continue;  // implied by a hard row
            // With delta > 0 a disjunct opposite to a hard row is impossible.
            if (hard.count(negated(d.first))) {
                base.insert(d.second);
            } else if (hard.count(negated(d.second))) {
                base.insert(d.first);
            } else {
                open_.push_back(j);
            }
        }
        base_.assign(base.begin(), base.end());
        lower_.assign(k_ + 1, -1.0);
        upper_.assign(k_ + 1, 1.0);
        lower_[k_] = 0.0;
        upper_[k_] = std::sqrt(static_cast<double>(k_)) + 1.0;
        objective_.assign(k_ + 1, 0.0);
        objective_[k_] = 1.0;
    }

    SolveResult run() {
        SolveResult res;
        best_p_.assign(k_, 0.0);
        best_ = 0.0;

        if (opt_.warm_start && opt_.warm_start->size() == k_) {
            std::vector<signed char> choice(open_.size());
            for (std::size_t i = 0; i < open_.size(); ++i) {
                const auto& d = c_.disjunctions[open_[i]];
                choice[i] = dot(d.first, *opt_.warm_start) >= dot(d.second, *opt_.warm_start) ? 0 : 1;
            }
            relax(choice, res);
        }

        std::priority_queue<Node, std::vector<Node>, WorseNode> queue;
        std::size_t next_id = 0;
        {
            std::vector<signed char> root(open_.size(), -1);
            auto [bound, z] = relax(root, res);
            if (bound > best_ + opt_.opt_tol) queue.push({bound, next_id++, std::move(root), std::move(z)});
        }
        while (!queue.empty()) {
            Node node = queue.top();
            queue.pop();
            if (node.bound <= best_ + opt_.opt_tol) break;
            if (++res.nodes > opt_.node_limit) {
                res.node_limit_hit = true;
                break;
            }
            const std::span<const double> p(node.z.data(), k_);
            const double delta = node.z[k_];
            std::size_t branch = open_.size();
            double worst = opt_.opt_tol;
            for (std::size_t i = 0; i < open_.size(); ++i) {
                if (node.choice[i] >= 0) continue;
                const auto& d = c_.disjunctions[open_[i]];
                const double violation = delta - std::max(dot(d.first, p), dot(d.second, p));
                if (violation > worst) {
                    worst = violation;
                    branch = i;
                }
            }
            if (branch == open_.size()) continue;  // relaxation optimum is feasible
            for (signed char side : {0, 1}) {
                std::vector<signed char> choice = node.choice;
                choice[branch] = side;
                auto [bound, z] = relax(choice, res);
                if (bound > best_ + opt_.opt_tol) queue.push({bound, next_id++, std::move(choice), std::move(z)});
            }
        }
        res.delta = best_;
        res.p = best_p_;
        if (best_ > opt_.delta_min) res.candidate = Candidate{best_p_, best_};
        return res;
    }

private:
    // Solves the LP of a node and offers its optimum as an incumbent.
    std::pair<double, std::vector<double>> relax(const std::vector<signed char>& choice, SolveResult& res) {
        std::vector<LinearConstraint> rows;
        rows.reserve(base_.size() + open_.size());
        auto add = [&](const std::vector<double>& r) {
            LinearConstraint row;
            row.a.resize(k_ + 1);
            for (std::size_t i = 0; i < k_; ++i) row.a[i] = -r[i];
            row.a[k_] = 1.0;
            rows.push_back(std::move(row));
        };
        for (const auto& r : base_) add(r);
        for (std::size_t i = 0; i < open_.size(); ++i) {
            if (choice[i] < 0) continue;
            const auto& d = c_.disjunctions[open_[i]];
            add(choice[i] == 0 ? d.first : d.second);
        }
        LpOptions lo;
        ++res.lp_solves;
        LpResult lp = lp_max(objective_, rows, lower_, upper_, lo);
        if (lp.status != LpStatus::Optimal) {
            // p = 0, delta = 0 is always feasible, so only an iteration limit
            // lands here; keep the node with a safe bound.
            if (lp.status == LpStatus::Infeasible) throw InternalError("sampled constraint LP reported infeasible");
            return {upper_[k_], std::vector<double>(k_ + 1, 0.0)};
        }
        const std::span<const double> p(lp.x.data(), k_);
        const double m = c_.margin(p);
        if (m > best_) {
            best_ = m;
            best_p_.assign(p.begin(), p.end());
        }
        return {lp.value, std::move(lp.x)};
    }

    const SampledConstraint& c_;
    const SolveOptions& opt_;
    std::size_t k_;
    std::vector<std::vector<double>> base_;
    std::vector<std::size_t> open_;
    std::vector<double> lower_, upper_, objective_;
    double best_ = 0.0;
    std::vector<double> best_p_;
};

}  // namespace

SolveResult solve(const SampledConstraint& c, const SolveOptions& opt) {
    if (c.k == 0) throw InternalError("sampled constraint without parameters");
    return Search(c, opt).run();
}

}  // namespace bsynth
