#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"

#include "bsynth/expr.hpp"
#include "support.hpp"

using namespace bsynth;

namespace {

const std::vector<std::string> xy{"x", "y"};
const std::vector<std::string> x_only{"x"};

}  // namespace

TEST_CASE("parse builds the grammar-forced tree") {
    Expr e = parse("-sin(x) - y", xy);
    CHECK(e.op() == Op::Sub);
    CHECK(e.arg(0).op() == Op::Neg);
    CHECK(e.arg(0).arg(0).op() == Op::Sin);
    CHECK(e.arg(0).arg(0).arg(0).op() == Op::Var);
    CHECK(e.arg(1).op() == Op::Var);
    CHECK(e.arg(1).index() == 1);

    Expr f = parse("x^2 + 1", x_only);
    CHECK(f.op() == Op::Add);
    CHECK(f.arg(0).op() == Op::Pow);
    CHECK(f.arg(0).exponent() == 2);
    CHECK(f.arg(1).is_constant(1.0));
}

TEST_CASE("parse precedence: power above unary minus above product") {
    // -x^2 is -(x^2)
    CHECK(eval(parse("-x^2", x_only), std::vector<double>{3.0}) == doctest::Approx(-9.0));
    CHECK(eval(parse("2*3^2", x_only), std::vector<double>{0.0}) == doctest::Approx(18.0));
    CHECK(eval(parse("1 - 2 - 3", x_only), std::vector<double>{0.0}) == doctest::Approx(-4.0));
    CHECK(eval(parse("8 / 4 / 2", x_only), std::vector<double>{0.0}) == doctest::Approx(1.0));
    CHECK(eval(parse("1.5e1 + x", x_only), std::vector<double>{1.0}) == doctest::Approx(16.0));
}

TEST_CASE("parse reports errors with positions") {
    try {
        parse("x +", x_only);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("end of input") != std::string::npos);
        CHECK(e.position() == 3);
    }
    CHECK_THROWS_AS(parse("x + z", x_only), ParseError);
    CHECK_THROWS_AS(parse("foo(x)", x_only), ParseError);
    CHECK_THROWS_AS(parse("x^(-1)", x_only), ParseError);
    CHECK_THROWS_AS(parse("x^1.5", x_only), ParseError);
    CHECK_THROWS_AS(parse("(x", x_only), ParseError);
    CHECK_THROWS_AS(parse("x y", xy), ParseError);
}

TEST_CASE("eval examples") {
    CHECK(eval(parse("sin(x)", x_only), std::vector<double>{0.0}) == 0.0);
    CHECK(eval(parse("ln(x^2 + 1)", x_only), std::vector<double>{0.0}) == 0.0);
    CHECK(eval(parse("-sin(x) - y", xy), std::vector<double>{0.0, 0.0}) == 0.0);
}

TEST_CASE("eval reports domain errors") {
    CHECK_THROWS_AS(eval(parse("ln(x)", x_only), std::vector<double>{0.0}), DomainError);
    CHECK_THROWS_AS(eval(parse("ln(x)", x_only), std::vector<double>{-1.0}), DomainError);
    CHECK_THROWS_AS(eval(parse("sqrt(x)", x_only), std::vector<double>{-1.0}), DomainError);
    CHECK_THROWS_AS(eval(parse("1 / x", x_only), std::vector<double>{0.0}), DomainError);
}

TEST_CASE("differentiate examples") {
    const std::vector<double> at{0.7, -1.3};
    CHECK(eval(differentiate(parse("sin(x)", xy), 0), at) == doctest::Approx(std::cos(0.7)));
    CHECK(eval(differentiate(parse("x^2*y", xy), 0), at) == doctest::Approx(2 * 0.7 * -1.3));
    CHECK(eval(differentiate(parse("ln(x^2+1)", xy), 0), at) == doctest::Approx(2 * 0.7 / (0.49 + 1)));
    CHECK(equal(differentiate(parse("sin(x)", xy), 0), parse("cos(x)", xy)));
    CHECK(differentiate(parse("y^3", xy), 0).is_constant(0.0));
}

TEST_CASE("interval_eval examples") {
    IntervalValue sq = interval_eval(parse("x^2", x_only), std::vector<Interval>{Interval(-2, 1)});
    REQUIRE(sq.defined());
    CHECK(sq.range.lower() == 0.0);
    CHECK(sq.range.upper() >= 4.0);
    CHECK(sq.range.upper() <= 4.0 + 1e-12);

    IntervalValue diff = interval_eval(parse("x - x", x_only), std::vector<Interval>{Interval(0, 1)});
    CHECK(diff.range.lower() <= -1.0);
    CHECK(diff.range.lower() >= -1.0 - 1e-12);
    CHECK(diff.range.upper() >= 1.0);
    CHECK(diff.range.upper() <= 1.0 + 1e-12);

    IntervalValue s = interval_eval(parse("sin(x)", x_only), std::vector<Interval>{Interval(0, std::numbers::pi)});
    CHECK(s.range.lower() <= 0.0);
    CHECK(s.range.lower() >= -1e-12);
    CHECK(s.range.upper() == 1.0);
}

TEST_CASE("interval_eval tri-state definedness") {
    auto ln_on = [](double lo, double hi) {
        return interval_eval(parse("ln(x)", x_only), std::vector<Interval>{Interval(lo, hi)}).status;
    };
    CHECK(ln_on(1, 2) == Definedness::Defined);
    CHECK(ln_on(-1, 2) == Definedness::MaybeUndefined);
    CHECK(ln_on(-2, -1) == Definedness::Undefined);
    auto inv = [](double lo, double hi) {
        return interval_eval(parse("1/x", x_only), std::vector<Interval>{Interval(lo, hi)}).status;
    };
    CHECK(inv(1, 2) == Definedness::Defined);
    CHECK(inv(-1, 1) == Definedness::MaybeUndefined);
    CHECK(inv(0, 0) == Definedness::Undefined);
}

TEST_CASE("print then parse is idempotent") {
    std::mt19937_64 rng(7);
    const std::vector<std::string> names{"x", "y", "z"};
    for (int i = 0; i < 300; ++i) {
        Expr e = testing_support::random_expr(rng, 4, 3);
        const std::string once = to_string(e, names);
        Expr back = parse(once, names);
        CHECK_MESSAGE(to_string(back, names) == once, once);
        const std::vector<double> at{0.3, -0.8, 1.1};
        CHECK(eval(back, at) == doctest::Approx(eval(e, at)).epsilon(1e-12));
    }
    CHECK(to_string(parse("-(x - y)", xy), xy) == "-(x - y)");
    CHECK(to_string(parse("x - (y - x)", xy), xy) == "x - (y - x)");
    CHECK(to_string(parse("(-x)^2", xy), xy) == "(-x)^2");
}

TEST_CASE("property: symbolic gradient matches central differences") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 500; ++i) {
        Expr e = testing_support::random_expr(rng, 4, 3);
        std::vector<double> x{u(rng), u(rng), u(rng)};
        for (std::size_t v = 0; v < 3; ++v) {
            const double d = eval(differentiate(e, v), x);
            const double h = 1e-5;
            std::vector<double> lo = x, hi = x;
            lo[v] -= h;
            hi[v] += h;
            const double fd = (eval(e, hi) - eval(e, lo)) / (2 * h);
            CHECK(std::fabs(d - fd) <= 1e-5 * (1 + std::fabs(d)));
        }
    }
}

TEST_CASE("property: interval soundness and inclusion monotonicity") {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int i = 0; i < 500; ++i) {
        Expr e = testing_support::random_expr(rng, 4, 3);
        std::vector<Interval> outer, inner;
        std::vector<double> point;
        for (int k = 0; k < 3; ++k) {
            double a = u(rng), b = u(rng);
            if (a > b) std::swap(a, b);
            outer.emplace_back(a, b);
            const double c = a + (b - a) * unit(rng);
            const double d = a + (b - a) * unit(rng);
            inner.emplace_back(std::min(c, d), std::max(c, d));
            point.push_back(inner.back().lower() + inner.back().width() * unit(rng));
        }
        IntervalValue big = interval_eval(e, outer);
        IntervalValue small = interval_eval(e, inner);
        REQUIRE(big.defined());
        REQUIRE(small.defined());
        CHECK(small.range.contains(eval(e, point)));
        CHECK(big.range.contains(small.range));
    }
}

TEST_CASE("substitute replaces variables") {
    Expr e = parse("x*y + x", xy);
    std::vector<Expr> repl{parse("y + 1", xy), Expr::constant(2.0)};
    CHECK(eval(substitute(e, repl), std::vector<double>{0.0, 3.0}) == doctest::Approx(4.0 * 2.0 + 4.0));
}
