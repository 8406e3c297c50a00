#include "bsynth/report.hpp"

#include "bsynth/io.hpp"

namespace bsynth {

using nlohmann::json;

namespace {

json box_json(const Box& b) {
    json out = json::array();
    for (const Interval& i : b.dims) out.push_back({i.lower(), i.upper()});
    return out;
}

json verdict_json(const Problem& prob, const Verdict& v) {
    json out{{"kind", to_string(v.kind)}};
    if (v.kind == VerdictKind::Verified) return out;
    out["condition"] = v.condition;
    if (v.kind == VerdictKind::Refuted) {
        out["witness"] = {{"mode", prob.mode(v.witness.mode).name}, {"x", v.witness.x}, {"d", v.witness_d}};
        if (v.condition == 4) out["reset"] = v.reset;
    } else {
        json boxes = json::array();
        for (const ModeBox& b : v.unresolved) boxes.push_back({{"mode", prob.mode(b.mode).name}, {"box", box_json(b.box)}});
        out["unresolved"] = std::move(boxes);
        out["smallest_width"] = v.smallest_width;
    }
    return out;
}

}  // namespace

json verify_report_to_json(const Problem& prob, const VerifyReport& r) {
    json conditions = json::array();
    for (int c = 0; c < 4; ++c) {
        const ConditionReport& cr = r.conditions[c];
        conditions.push_back({{"condition", c + 1},
                              {"outcome", to_string(cr.outcome)},
                              {"boxes_proved", cr.proved},
                              {"boxes_split", cr.split},
                              {"boxes_unresolved", cr.unresolved},
                              {"covered", cr.covered},
                              {"seconds", cr.seconds}});
    }
    json out = verdict_json(prob, r.verdict);
    out["conditions"] = std::move(conditions);
    out["seconds"] = r.seconds;
    return out;
}

json run_report_to_json(const Problem& prob, const Template& t, const RunReport& r, const RunConfig& cfg) {
    json log = json::array();
    for (const IterationRecord& rec : r.log) {
        json entry{{"delta", rec.delta}, {"p", rec.p}, {"nodes", rec.nodes}};
        if (rec.kind) {
            entry["counterexample"] = {{"kind", to_string(*rec.kind)},
                                       {"value", rec.value},
                                       {"added_margin", rec.added_margin},
                                       {"from_verifier", rec.from_verifier}};
        }
        log.push_back(std::move(entry));
    }
    json out{{"schema", kReportSchema},
             {"tool", {{"name", kToolName}, {"version", kToolVersion}}},
             {"problem", prob.name()},
             {"status", to_string(r.status)},
             {"delta", r.delta},
             {"iterations", r.iterations},
             {"segments", r.segments},
             {"timings",
              {{"simulation", r.times.simulation},
               {"candidate", r.times.candidate},
               {"counterexample", r.times.counterexample},
               {"verification", r.times.verification},
               {"total", r.total_seconds}}},
             {"seed", cfg.seed},
             {"settings",
              {{"sigma", cfg.sigma},
               {"bloat", cfg.bloat},
               {"starts", cfg.starts},
               {"max_iter", cfg.max_iterations},
               {"delta_min", cfg.delta_min},
               {"min_box_width", cfg.verifier.min_box_width}}},
             {"verdict", r.verification ? verify_report_to_json(prob, *r.verification) : json(nullptr)},
             {"log", std::move(log)}};
    if (r.status == RunStatus::BarrierFound && r.p) out["barrier"] = barrier_to_json(prob, t, *r.p)["modes"];
    return out;
}

}  // namespace bsynth
