#include <cmath>
#include <random>
#include <set>

#include "doctest.h"

#include "bsynth/model.hpp"
#include "support.hpp"

using namespace bsynth;
using nlohmann::json;

TEST_CASE("vertices enumerate corners lexicographically") {
    auto v = vertices(Box({Interval(0, 1), Interval(2, 3)}));
    REQUIRE(v.size() == 4);
    CHECK(v[0] == Point{0, 2});
    CHECK(v[1] == Point{0, 3});
    CHECK(v[2] == Point{1, 2});
    CHECK(v[3] == Point{1, 3});
    CHECK(vertices(Box({Interval(5, 5)})) == std::vector<Point>{{5}});
    CHECK(vertices(Box({Interval(-1, 4)})) == std::vector<Point>{{-1}, {4}});
}

TEST_CASE("property: vertices are distinct members of the box") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-5, 5);
    std::bernoulli_distribution flat(0.3);
    for (int i = 0; i < 50; ++i) {
        Box b;
        for (int k = 0; k < 4; ++k) {
            double a = u(rng), c = flat(rng) ? a : u(rng);
            b.dims.emplace_back(std::min(a, c), std::max(a, c));
        }
        auto v = vertices(b);
        std::set<Point> distinct(v.begin(), v.end());
        CHECK(distinct.size() == v.size());
        for (const Point& p : v) CHECK(b.contains(p));
    }
}

TEST_CASE("bloat scales about the midpoint") {
    Box b = bloat(Box({Interval(0, 2)}), 1.1);
    CHECK(b[0].lower() == doctest::Approx(-0.1));
    CHECK(b[0].upper() == doctest::Approx(2.1));
    Box s = bloat(Box({Interval(-10, 10)}), 1.1);
    CHECK(s[0].lower() == doctest::Approx(-11));
    CHECK(s[0].upper() == doctest::Approx(11));
    Box same({Interval(-3, 7), Interval(1, 1)});
    CHECK(bloat(same, 1.0) == same);
    CHECK_THROWS_AS(bloat(same, 0.9), ModelError);
}

TEST_CASE("template value, coefficients and gradient examples") {
    // 0.12774317671 - x1 on three variables.
    Template lin = Template::linear(1, 3);
    std::vector<double> p{0.12774317671, -1, 0, 0};
    CHECK(template_value(lin, p, {0, {0.12774317671, 5, -5}}) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(template_grad_x(lin, p, {0, {3, 1, 2}}) == Point{-1, 0, 0});

    std::vector<double> scaled{2.5 * p[0], 2.5 * p[1], 0, 0};
    const ModePoint s{0, {0.4, 1, 1}};
    CHECK(template_value(lin, scaled, s) == doctest::Approx(2.5 * template_value(lin, p, s)));
    CHECK(template_value(lin, std::vector<double>(4, 0.0), s) == 0.0);
    CHECK(template_grad_x(lin, std::vector<double>(4, 0.0), s) == Point{0, 0, 0});

    Template sq({{{0}, {2}}}, 1);
    CHECK(template_grad_x(sq, std::vector<double>{0, 1}, {0, {3}}) == Point{6});

    Template q({{{2, 0}, {1, 1}, {0, 2}, {1, 0}, {0, 1}, {0, 0}}}, 2);
    CHECK(coeff_row(q, 0, Point{1, 2}) == Point{1, 2, 4, 1, 2, 1});
    Template c({{{0, 0}}}, 2);
    CHECK(coeff_row(c, 0, Point{3, 4}) == Point{1});

    Template two = Template::linear(2, 2);
    CHECK(two.parameter_count() == 6);
    CHECK(coeff_row(two, 1, Point{2, 3}) == Point{0, 0, 0, 1, 2, 3});
}

TEST_CASE("quadratic template order") {
    Template q = Template::quadratic_2d(1);
    CHECK(coeff_row(q, 0, Point{2, 3}) == Point{1, 4, 6, 9, 2, 3});
}

TEST_CASE("template invariants are enforced") {
    CHECK_THROWS_AS(Template({{{1, 0}, {0, 1}}}, 2), ModelError);
    CHECK_THROWS_AS(Template({{{0, 0}, {0, 0}}}, 2), ModelError);
    CHECK_THROWS_AS(Template({{{0, 0}, {0}}}, 2), ModelError);
}

TEST_CASE("property: coefficient row linearity and gradient accuracy") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-2, 2);
    std::uniform_int_distribution<int> ex(0, 3);
    for (int i = 0; i < 200; ++i) {
        std::vector<Monomial> list{{0, 0, 0}};
        std::set<Monomial> seen(list.begin(), list.end());
        for (int k = 0; k < 5; ++k) {
            Monomial m{ex(rng), ex(rng), ex(rng)};
            if (seen.insert(m).second) list.push_back(m);
        }
        Template t({list}, 3);
        std::vector<double> p(t.parameter_count());
        for (double& v : p) v = u(rng);
        Point x{u(rng), u(rng), u(rng)};
        Point a = coeff_row(t, 0, x);
        double dot = 0;
        for (std::size_t k = 0; k < a.size(); ++k) dot += a[k] * p[k];
        const double v = t.value(p, 0, x);
        CHECK(dot == doctest::Approx(v).epsilon(1e-12));

        Point g = template_grad_x(t, p, {0, x});
        for (std::size_t j = 0; j < 3; ++j) {
            const double h = 1e-6;
            Point lo = x, hi = x;
            lo[j] -= h;
            hi[j] += h;
            const double fd = (t.value(p, 0, hi) - t.value(p, 0, lo)) / (2 * h);
            CHECK(std::fabs(fd - g[j]) <= 1e-6 * (1 + std::fabs(g[j])));
        }
    }
}

TEST_CASE("hessian matches differences of the gradient") {
    Template q = Template::quadratic_2d(1);
    std::vector<double> p{0.3, 1.0, -2.0, 0.5, 0.1, -0.7};
    std::vector<double> hess(4);
    q.hessian(p, 0, Point{0.4, -0.2}, hess);
    CHECK(hess[0] == doctest::Approx(2.0));
    CHECK(hess[1] == doctest::Approx(-2.0));
    CHECK(hess[2] == doctest::Approx(-2.0));
    CHECK(hess[3] == doctest::Approx(1.0));
}

TEST_CASE("template as expression agrees with the template") {
    Template q = Template::quadratic_2d(1);
    std::vector<double> p{0.3, 1.0, -2.0, 0.5, 0.1, -0.7};
    Expr e = q.to_expr(p, 0);
    Point x{1.3, -0.4};
    CHECK(eval(e, x) == doctest::Approx(q.value(p, 0, x)));
}

TEST_CASE("monomial text round trip") {
    const std::vector<std::string> names{"x", "y", "z"};
    CHECK(monomial_to_string({0, 0, 0}, names) == "1");
    CHECK(monomial_to_string({2, 1, 0}, names) == "x^2*y");
    CHECK(parse_monomial("x^2*y", names) == Monomial{2, 1, 0});
    CHECK(parse_monomial("z * z", names) == Monomial{0, 0, 2});
    CHECK(parse_monomial("1", names) == Monomial{0, 0, 0});
    CHECK_THROWS_AS(parse_monomial("w", names), ModelError);
    CHECK_THROWS_AS(parse_monomial("x^-1", names), ModelError);
}

TEST_CASE("problem validation") {
    using testing_support::simple_doc;
    json ok = simple_doc({"x", "y"}, {"y", "-sin(x) - y"}, {{-10, 10}, {-10, 10}}, {{-10, 10}, {8, 10}},
                         {{-10, 10}, {-10, -5}});
    Problem p = testing_support::problem(ok);
    CHECK(p.state_dim() == 2);
    CHECK(p.in_initial({0, {0, 9}}));
    CHECK(p.in_initial({0, {10, 8}}));
    CHECK_FALSE(p.in_initial({0, {0, 7.9}}));
    CHECK(p.in_unsafe({0, {-10, -5}}));

    ProblemData data = p.data();
    data.modes[0].flow.pop_back();
    CHECK_THROWS_AS(Problem{data}, ModelError);

    data = p.data();
    data.initial[0].box = Box({Interval(-10, 10), Interval(8, 11)});
    CHECK_THROWS_AS(Problem{data}, ModelError);

    data = p.data();
    data.resets.push_back({0, Box({Interval(0, 20), Interval(0, 1)}), 0,
                           {Expr::variable(0), Expr::variable(1)}, std::nullopt, std::nullopt});
    CHECK_THROWS_AS(Problem{data}, ModelError);

    data = p.data();
    const std::vector<std::string> names{"x", "y"};
    data.resets.push_back({0, Box({Interval(0, 1), Interval(0, 1)}), 0,
                           {parse("x + 1", names), Expr::variable(1)},
                           std::vector<Expr>{parse("x + 2", names), Expr::variable(1)},
                           Box({Interval(1, 2), Interval(0, 1)})});
    CHECK_THROWS_AS(Problem{data}, ModelError);
}

TEST_CASE("segment flags follow membership") {
    using testing_support::simple_doc;
    Problem p = testing_support::problem(simple_doc({"x"}, {"1"}, {{-10, 10}}, {{9, 10}}, {{-10, -9}}));
    Segment s = make_segment(p, {0, {9.5}}, {0, {-9.5}});
    CHECK(s.start_in_initial);
    CHECK_FALSE(s.start_in_unsafe);
    CHECK(s.end_in_unsafe);
    CHECK_FALSE(s.end_in_initial);
}

TEST_CASE("affine-in-disturbance detection") {
    json doc = testing_support::simple_doc({"x"}, {"x*d + e"}, {{-1, 1}}, {{0, 0.1}}, {{0.5, 1}});
    doc["disturbances"] = {{"names", {"d", "e"}}, {"box", {{-1, 1}, {0, 1}}}};
    CHECK(testing_support::problem(doc).affine_in_disturbance(0));
    doc["modes"][0]["flow"] = {"x*d*e"};
    CHECK_FALSE(testing_support::problem(doc).affine_in_disturbance(0));
}
