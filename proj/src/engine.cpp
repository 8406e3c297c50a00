#include "bsynth/engine.hpp"

#include <chrono>
#include <stdexcept>
#include <string>

#include "bsynth/chebyshev.hpp"

namespace bsynth {

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

double segment_margin(const Problem& prob, const Template& t, std::span<const double> p, const Segment& seg) {
    return build(std::span<const Segment>(&seg, 1), t, prob).margin(p);
}

CounterexampleKind kind_of_condition(int condition) {
    switch (condition) {
        case 1: return CounterexampleKind::Initial;
        case 2: return CounterexampleKind::Unsafe;
        case 3: return CounterexampleKind::Transversality;
        default: return CounterexampleKind::Reset;
    }
}

}  // namespace

const char* to_string(RunStatus s) {
    switch (s) {
        case RunStatus::BarrierFound: return "barrier-found";
        case RunStatus::NoCandidate: return "no-candidate";
        case RunStatus::IterationLimit: return "iteration-limit";
    }
    return "unknown";
}

RunReport run(const Problem& prob, const Template& t, const RunConfig& cfg) {
    if (!(cfg.sigma >= 0.0) || !(cfg.bloat >= 1.0) || cfg.max_iterations < 1) {
        throw std::invalid_argument("run: need sigma >= 0, bloat >= 1, max iterations >= 1");
    }
    if (t.state_dim() != prob.state_dim() || t.mode_count() != prob.mode_count()) {
        throw ModelError("template does not match the problem");
    }
    const auto start = Clock::now();
    RunReport report;
    SimOptions sim = cfg.sim;
    sim.bloat = cfg.bloat;

    auto t0 = Clock::now();
    std::vector<Segment> segments = init_segments(prob, cfg.sigma, cfg.vertex_cap, cfg.seed, sim);
    const Problem reversed = reverse(prob);
    report.times.simulation += since(t0);

    FalsifyConfig fcfg;
    fcfg.starts = cfg.starts;
    fcfg.eps = cfg.eps_ce;
    fcfg.max_time = cfg.flow_time_factor * cfg.sigma;
    fcfg.sim = sim;

    std::optional<std::vector<double>> warm;
    auto finish = [&](RunStatus status) {
        report.status = status;
        report.segments = segments.size();
        report.total_seconds = since(start);
        return report;
    };

    for (std::size_t iter = 1; iter <= cfg.max_iterations; ++iter) {
        report.iterations = iter;
        IterationRecord rec;

        t0 = Clock::now();
        SolveOptions sopt;
        sopt.delta_min = cfg.delta_min;
        sopt.warm_start = warm;
        const SolveResult sol = solve(build(segments, t, prob), sopt);
        report.times.candidate += since(t0);
        rec.delta = sol.delta;
        rec.p = sol.p;
        rec.nodes = sol.nodes;
        report.delta = sol.delta;
        if (!sol.candidate) {
            report.log.push_back(std::move(rec));
            report.p.reset();
            return finish(RunStatus::NoCandidate);
        }
        const std::vector<double>& p = sol.candidate->p;
        warm = p;

        t0 = Clock::now();
        fcfg.seed = cfg.seed + iter;
        const CheckResult check = find_counterexample(prob, reversed, t, p, fcfg);
        report.times.counterexample += since(t0);

        std::optional<Segment> added;
        if (check.counterexample) {
            rec.kind = check.counterexample->kind;
            rec.value = check.counterexample->value;
            added = check.counterexample->segment;
        } else {
            report.p = p;
            if (!cfg.verify) {
                report.log.push_back(std::move(rec));
                return finish(RunStatus::BarrierFound);
            }
            t0 = Clock::now();
            report.verification = verify(prob, t, p, cfg.verifier);
            report.times.verification += since(t0);
            const Verdict& v = report.verification->verdict;
            if (v.kind == VerdictKind::Refuted) {
                // Recycle the witness as a counter-example point.
                t0 = Clock::now();
                const CounterexampleKind kind = kind_of_condition(v.condition);
                Segment seg = counterexample_segment(prob, reversed, t, p, kind, v.witness, v.reset, fcfg.max_time, sim);
                report.times.counterexample += since(t0);
                if (refutes(t, p, seg)) {
                    rec.kind = kind;
                    rec.from_verifier = true;
                    added = std::move(seg);
                    report.p.reset();
                }
            }
            if (!added) {
                report.log.push_back(std::move(rec));
                return finish(RunStatus::BarrierFound);
            }
        }

        rec.added_margin = segment_margin(prob, t, p, *added);
        if (!(rec.added_margin <= 0.0)) {
            throw InternalError("added segment does not refute the candidate of iteration " + std::to_string(iter));
        }
        rec.segment = *added;
        segments.push_back(std::move(*added));
        report.log.push_back(std::move(rec));
    }
    report.p.reset();
    return finish(RunStatus::IterationLimit);
}

}  // namespace bsynth
