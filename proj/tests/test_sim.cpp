#include <cmath>
#include <set>

#include "doctest.h"

#include "bsynth/sim.hpp"
#include "support.hpp"

using namespace bsynth;
using nlohmann::json;
using testing_support::problem;
using testing_support::simple_doc;

namespace {

Problem decay() {
    return problem(simple_doc({"x"}, {"-x"}, {{-10, 10}}, {{0.9, 1}}, {{-10, -9}}));
}

Problem pendulum() {
    return problem(simple_doc({"x", "y"}, {"y", "-sin(x) - y"}, {{-10, 10}, {-10, 10}}, {{-10, 10}, {8, 10}},
                              {{-10, 10}, {-10, -5}}));
}

Problem composition() {
    return problem(simple_doc({"x1", "x2", "x3"}, {"1", "x3", "-10*sin(x2) - x3"},
                              {{-10, 10}, {-10, 10}, {-10, 10}}, {{9, 10}, {-10, 10}, {-10, 10}},
                              {{-10, -9}, {-10, 10}, {-10, 10}}));
}

Problem drift(double lo = -1, double hi = 1) {
    return problem(simple_doc({"x"}, {"1"}, {{lo, hi}}, {{lo, lo}}, {{hi, hi}}));
}

Problem sawtooth(const std::string& map = "0", const std::string& inverse = "1", double image = 0.0) {
    json doc = simple_doc({"x"}, {"1"}, {{0, 2}}, {{0, 0.1}}, {{1.9, 2}});
    doc["resets"] = {{{"source", "m"},
                      {"target", "m"},
                      {"guard", {{1, 1}}},
                      {"map", {map}},
                      {"inverse", {inverse}},
                      {"image", {{image, image}}}}};
    return problem(doc);
}

Problem parabola(const std::string& ydot) {
    return problem(simple_doc({"x", "y"}, {"y", ydot}, {{-10, 10}, {-10, 10}}, {{-10, -9}, {-10, -9}},
                              {{9, 10}, {9, 10}}));
}

const DisturbancePolicy none = constant_disturbance({});

}  // namespace

TEST_CASE("integrate linear decay to the analytic solution") {
    Problem p = decay();
    Trajectory tr = integrate(p, 0, {1.0}, none, 1.0, {}, bloat(p.omega(0), 1.1));
    CHECK(tr.reason == StopReason::Horizon);
    CHECK(tr.end_time == 1.0);
    CHECK(std::fabs(tr.end.x[0] - std::exp(-1.0)) <= 1e-6);
}

TEST_CASE("integrate stays at an equilibrium") {
    Problem p = pendulum();
    Trajectory tr = integrate(p, 0, {0.0, 0.0}, none, 10.0, {}, bloat(p.omega(0), 1.1));
    CHECK(tr.reason == StopReason::Horizon);
    CHECK(std::fabs(tr.end.x[0]) <= 1e-9);
    CHECK(std::fabs(tr.end.x[1]) <= 1e-9);
}

TEST_CASE("integrate stops on leaving the bloated box (fixed-step oracle)") {
    Problem p = drift(-1, 1);
    Box bloated({Interval(-1, 0.5)});
    Trajectory tr = integrate(p, 0, {0.0}, none, 10.0, {}, bloated);
    CHECK(tr.reason == StopReason::LeftBloatedSpace);

    // Classical RK4 at step 1e-5 until the state leaves [-1, 0.5].
    double x = 0, t = 0;
    const double h = 1e-5;
    while (true) {
        const double next = x + h * (1 + 2 * 1 + 2 * 1 + 1) / 6;
        if (next > 0.5) break;
        x = next;
        t += h;
    }
    CHECK(std::fabs(tr.end.x[0] - x) <= 2e-5);
    CHECK(std::fabs(tr.end_time - t) <= 2e-5);
    CHECK(bloated.contains(tr.end.x));
}

TEST_CASE("integrate localizes event crossings") {
    Problem p = decay();
    // Stop where x = 0.5: t = ln 2.
    EventFunction above_half = [](std::size_t, std::span<const double> x) { return x[0] - 0.5; };
    Trajectory tr = integrate(p, 0, {1.0}, none, 5.0, std::span(&above_half, 1), bloat(p.omega(0), 1.1));
    CHECK(tr.reason == StopReason::Event);
    CHECK(tr.end_time == doctest::Approx(std::log(2.0)).epsilon(1e-8));
}

TEST_CASE("convergence: tighter tolerances reduce the error") {
    Problem p = decay();
    double ratio_sum = 0;
    for (double horizon : {1.0, 5.0, 10.0}) {
        SimOptions loose;
        loose.rtol = 1e-6;
        loose.atol = 1e-8;
        loose.max_step = 1e9;
        SimOptions tight = loose;
        tight.rtol /= 2;
        tight.atol /= 2;
        const Box b = bloat(p.omega(0), 1.1);
        const double exact = std::exp(-horizon);
        const double e1 = std::fabs(integrate(p, 0, {1.0}, none, horizon, {}, b, loose).end.x[0] - exact);
        const double e2 = std::fabs(integrate(p, 0, {1.0}, none, horizon, {}, b, tight).end.x[0] - exact);
        ratio_sum += e1 / std::max(e2, 1e-300);
    }
    CHECK(ratio_sum / 3 >= 2.0);
}

TEST_CASE("hybrid sawtooth flow") {
    Problem p = sawtooth();
    Trajectory tr = flow_hybrid(p, {0, {0.0}}, none, 1.5);
    CHECK(tr.reason == StopReason::Horizon);
    CHECK(tr.resets == 1);
    CHECK(std::fabs(tr.end.x[0] - 0.5) <= 1e-6);

    Trajectory zero = flow_hybrid(p, {0, {0.3}}, none, 0.0);
    CHECK(zero.end.x == Point{0.3});
    CHECK(zero.resets == 0);
    CHECK(zero.end_time == 0.0);

    // Starting on the guard resets at once.
    Trajectory on_guard = flow_hybrid(p, {0, {1.0}}, none, 0.25);
    CHECK(on_guard.resets == 1);
    CHECK(std::fabs(on_guard.end.x[0] - 0.25) <= 1e-6);
}

TEST_CASE("hybrid flow detects livelocks") {
    Problem p = sawtooth("1", "1", 1.0);
    Trajectory tr = flow_hybrid(p, {0, {0.0}}, none, 5.0);
    CHECK(tr.reason == StopReason::Livelock);
    CHECK(tr.end_time == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("flow prefix consistency") {
    for (const Problem& p : {sawtooth(), pendulum()}) {
        const ModePoint s{0, Point(p.state_dim(), 0.3)};
        const Trajectory whole = flow_hybrid(p, s, none, 2.5);
        const Trajectory first = flow_hybrid(p, s, none, 1.2);
        const Trajectory rest = flow_hybrid(p, first.end, none, 1.3);
        for (std::size_t i = 0; i < p.state_dim(); ++i) {
            CHECK(std::fabs(whole.end.x[i] - rest.end.x[i]) <= 1e-6);
        }
    }
}

TEST_CASE("reverse negates flows, inverts resets and swaps sets") {
    Problem p = pendulum();
    Problem r = reverse(p);
    const Point x{0.4, -1.2};
    std::vector<double> f(2);
    r.flow(0, x, {}, f);
    CHECK(f[0] == doctest::Approx(1.2));
    CHECK(f[1] == doctest::Approx(std::sin(0.4) - 1.2));
    CHECK(r.initial()[0].box == p.unsafe()[0].box);
    CHECK(r.unsafe()[0].box == p.initial()[0].box);

    Problem rr = reverse(r);
    for (std::size_t i = 0; i < 2; ++i) CHECK(equal(rr.mode(0).flow[i], p.mode(0).flow[i]));

    Problem s = sawtooth();
    Problem rs = reverse(s);
    CHECK(rs.resets()[0].guard == Box({Interval(0, 0)}));
    Problem rrs = reverse(rs);
    CHECK(rrs.resets()[0].guard == s.resets()[0].guard);
    CHECK(equal(rrs.resets()[0].map[0], s.resets()[0].map[0]));

    // Backward through the jump: from 0.5 back 1.0 lands at 0.5 after the reset.
    Trajectory back = flow_hybrid(rs, {0, {0.5}}, none, 1.0);
    CHECK(back.resets == 1);
    CHECK(std::fabs(back.end.x[0] - 0.5) <= 1e-6);
}

TEST_CASE("reversibility on benchmark dynamics") {
    const double sigma = 0.5;
    for (const Problem& p : {pendulum(), composition()}) {
        const Problem r = reverse(p);
        for (double c : {-3.0, 0.5, 4.0}) {
            const ModePoint s{0, Point(p.state_dim(), c)};
            const Trajectory fwd = flow_hybrid(p, s, none, sigma);
            const Trajectory bwd = flow_hybrid(r, fwd.end, none, sigma);
            double err = 0, norm = 0;
            for (std::size_t i = 0; i < p.state_dim(); ++i) {
                err += std::pow(bwd.end.x[i] - s.x[i], 2);
                norm += s.x[i] * s.x[i];
            }
            CHECK(std::sqrt(err) <= 1e-4 * (1 + std::sqrt(norm)));
        }
    }
}

TEST_CASE("init_segments from box vertices") {
    Problem p = pendulum();
    auto segs = init_segments(p, 0.5, 256, 1);
    REQUIRE(segs.size() == 8);
    for (int i = 0; i < 4; ++i) CHECK(segs[i].start_in_initial);
    for (int i = 4; i < 8; ++i) CHECK(segs[i].end_in_unsafe);

    auto still = init_segments(p, 0.0, 256, 1);
    for (const Segment& s : still) CHECK(s.start.x == s.end.x);
}

TEST_CASE("init_segments caps the vertex count reproducibly") {
    std::vector<std::string> vars, flow;
    json omega = json::array(), init = json::array(), unsafe = json::array();
    for (int i = 0; i < 10; ++i) {
        vars.push_back("x" + std::to_string(i));
        flow.push_back("0");
        omega.push_back({-1, 1});
        init.push_back(i == 0 ? json{-1, -0.5} : json{-1, 1});
        unsafe.push_back(i == 0 ? json{0.5, 1} : json{-1, 1});
    }
    Problem p = problem(simple_doc(vars, flow, omega, init, unsafe));
    auto a = init_segments(p, 0.1, 256, 42);
    auto b = init_segments(p, 0.1, 256, 42);
    REQUIRE(a.size() == 512);
    std::set<Point> starts;
    for (std::size_t i = 0; i < 256; ++i) starts.insert(a[i].start.x);
    CHECK(starts.size() == 256);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].start.x == b[i].start.x);
        CHECK(a[i].end.x == b[i].end.x);
    }
}

TEST_CASE("omega examples") {
    const Template lin1 = Template::linear(1, 1);
    const std::vector<double> v_is_x{0, 1};
    CHECK(omega(decay(), lin1, v_is_x, {0, {1.0}}, 10).x == Point{1.0});

    Problem drifting = drift(-1, 1);
    ModePoint end = omega(drifting, lin1, v_is_x, {0, {0.0}}, 10);
    CHECK(end.x[0] == doctest::Approx(1.1).epsilon(1e-6));

    const Template lin2 = Template::linear(1, 2);
    const std::vector<double> v_is_x2{0, 1, 0};
    ModePoint top = omega(parabola("-1"), lin2, v_is_x2, {0, {0.0, 1.0}}, 10);
    CHECK(std::fabs(top.x[0] - 0.5) <= 1e-5);
    CHECK(std::fabs(top.x[1]) <= 1e-5);
}

TEST_CASE("alpha examples") {
    const Template lin1 = Template::linear(1, 1);
    const std::vector<double> v_is_x{0, 1};
    Problem drifting = drift(-1, 1);
    Problem back = reverse(drifting);
    CHECK(alpha(back, lin1, v_is_x, {0, {0.0}}, 10).x[0] == doctest::Approx(-1.1).epsilon(1e-6));

    // V = -x on the same drift increases backward in time: no simulation.
    const std::vector<double> v_is_minus_x{0, -1};
    CHECK(alpha(back, lin1, v_is_minus_x, {0, {0.3}}, 10).x == Point{0.3});

    // x' = y, y' = 1: backward from (0, 1) V = x decreases until y = 0 at (-0.5, 0).
    const Template lin2 = Template::linear(1, 2);
    const std::vector<double> v_is_x2{0, 1, 0};
    Problem up = parabola("1");
    ModePoint start = alpha(reverse(up), lin2, v_is_x2, {0, {0.0, 1.0}}, 10);
    CHECK(std::fabs(start.x[0] + 0.5) <= 1e-5);
    CHECK(std::fabs(start.x[1]) <= 1e-5);
}

TEST_CASE("event endpoints have vanishing Lie derivative") {
    Problem p = pendulum();
    Template q = Template::quadratic_2d(1);
    std::vector<double> params{-0.3, 0.05, 0.02, 0.1, 0.2, -0.1};
    for (double a : {-2.0, -0.5, 1.0, 2.5}) {
        for (double b : {-3.0, 0.5, 2.0}) {
            ModePoint end = omega(p, q, params, {0, {a, b}}, 50);
            std::vector<double> g(2), f(2);
            q.gradient(params, 0, end.x, g);
            p.flow(0, end.x, {}, f);
            const double lie = g[0] * f[0] + g[1] * f[1];
            if (bloat(p.omega(0), 1.1).margin(end.x) > 1e-3 && !(end.x == Point{a, b})) {
                const double scale = std::hypot(g[0], g[1]) * std::hypot(f[0], f[1]);
                CHECK(std::fabs(lie) <= 1e-6 * (1 + scale));
            }
        }
    }
}

TEST_CASE("extremal disturbance choice") {
    json doc = simple_doc({"x"}, {"d - x"}, {{-5, 5}}, {{0, 0.1}}, {{4, 5}});
    doc["disturbances"] = {{"names", {"d"}}, {"box", {{-1, 2}}}};
    Problem p = problem(doc);
    Template lin = Template::linear(1, 1);
    std::vector<double> params{0, 1};
    double d = 0;
    CHECK(extremal_lie_derivative(p, lin, params, 0, Point{0.5}, true, std::span(&d, 1)) == doctest::Approx(1.5));
    CHECK(d == 2.0);
    CHECK(extremal_lie_derivative(p, lin, params, 0, Point{0.5}, false, std::span(&d, 1)) == doctest::Approx(-1.5));
    CHECK(d == -1.0);

    doc["modes"][0]["flow"] = {"d^2 - x"};
    Problem nonaffine = problem(doc);
    CHECK_FALSE(nonaffine.affine_in_disturbance(0));
    CHECK(extremal_lie_derivative(nonaffine, lin, params, 0, Point{0.5}, true, std::span(&d, 1)) ==
          doctest::Approx(3.5));
    CHECK(d == 2.0);
}
