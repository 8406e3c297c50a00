#include <cmath>

#include "doctest.h"

#include "bsynth/engine.hpp"
#include "bsynth/io.hpp"
#include "support.hpp"

using namespace bsynth;
using nlohmann::json;
using testing_support::simple_doc;

namespace {

ProblemDocument load(const std::string& name) {
    return load_problem_file(std::string(BSYNTH_DATA_DIR) + "/" + name + ".json");
}

RunConfig config_of(const ProblemDocument& doc) {
    RunConfig cfg;
    if (doc.run.sigma) cfg.sigma = *doc.run.sigma;
    if (doc.run.bloat) cfg.bloat = *doc.run.bloat;
    return cfg;
}

void check_log_invariants(const RunReport& r, std::size_t initial_segments) {
    std::size_t added = 0;
    for (std::size_t i = 0; i < r.log.size(); ++i) {
        if (i > 0) CHECK(r.log[i].delta <= r.log[i - 1].delta + 1e-9);
        if (r.log[i].kind) {
            ++added;
            CHECK(r.log[i].added_margin <= 0.0);
        }
    }
    CHECK(r.segments == initial_segments + added);
    CHECK(r.log.size() == r.iterations);
    const double phases = r.times.simulation + r.times.candidate + r.times.counterexample + r.times.verification;
    CHECK(phases <= r.total_seconds + 1e-9);
}

}  // namespace

TEST_CASE("composition: barrier found and verified") {
    ProblemDocument doc = load("composition");
    RunConfig cfg = config_of(doc);
    RunReport r = run(doc.problem, doc.templ, cfg);
    REQUIRE(r.status == RunStatus::BarrierFound);
    REQUIRE(r.p);
    CHECK(r.iterations <= 5);
    REQUIRE(r.verification);
    CHECK(r.verification->verdict.kind == VerdictKind::Verified);
    const std::size_t initial = init_segments(doc.problem, cfg.sigma, cfg.vertex_cap, cfg.seed).size();
    check_log_invariants(r, initial);
    // V is dominated by -x1 like the listed barrier
    const std::vector<double>& p = *r.p;
    CHECK(p[1] < 0);
    CHECK(std::fabs(p[2]) + std::fabs(p[3]) < 0.1 * std::fabs(p[1]));
}

TEST_CASE("identical initial and unsafe sets give no candidate") {
    Problem prob = testing_support::problem(simple_doc({"x", "y"}, {"y", "-x"}, {{-10, 10}, {-10, 10}},
                                                       {{1, 2}, {1, 2}}, {{1, 2}, {1, 2}}));
    RunConfig cfg;
    cfg.sigma = 0.5;
    RunReport r = run(prob, Template::linear(1, 2), cfg);
    CHECK(r.status == RunStatus::NoCandidate);
    CHECK_FALSE(r.p);
    CHECK(r.delta == doctest::Approx(0).epsilon(1e-12));
}

TEST_CASE("iteration budget of one") {
    ProblemDocument doc = load("pendulum");
    RunConfig cfg = config_of(doc);
    cfg.max_iterations = 1;
    RunReport r = run(doc.problem, doc.templ, cfg);
    CHECK(r.status == RunStatus::IterationLimit);
    CHECK(r.iterations == 1);
    CHECK_FALSE(r.p);
}

TEST_CASE("pendulum and ln-dynamics: refutation, monotonicity and reproducibility") {
    for (const char* name : {"pendulum", "ln-dynamics"}) {
        CAPTURE(name);
        ProblemDocument doc = load(name);
        RunConfig cfg = config_of(doc);
        cfg.max_iterations = 30;
        RunReport a = run(doc.problem, doc.templ, cfg);
        RunReport b = run(doc.problem, doc.templ, cfg);
        const std::size_t initial = init_segments(doc.problem, cfg.sigma, cfg.vertex_cap, cfg.seed).size();
        check_log_invariants(a, initial);
        REQUIRE(a.log.size() == b.log.size());
        for (std::size_t i = 0; i < a.log.size(); ++i) {
            CHECK(a.log[i].p == b.log[i].p);
            CHECK(a.log[i].delta == b.log[i].delta);
        }
        CHECK(a.status == b.status);
        CHECK(a.status == RunStatus::BarrierFound);
    }
}

TEST_CASE("configuration invariants") {
    ProblemDocument doc = load("composition");
    RunConfig cfg;
    cfg.bloat = 0.5;
    CHECK_THROWS_AS(run(doc.problem, doc.templ, cfg), std::invalid_argument);
    cfg = RunConfig{};
    cfg.max_iterations = 0;
    CHECK_THROWS_AS(run(doc.problem, doc.templ, cfg), std::invalid_argument);
    cfg = RunConfig{};
    CHECK_THROWS_AS(run(doc.problem, Template::linear(1, 2), cfg), ModelError);
}
