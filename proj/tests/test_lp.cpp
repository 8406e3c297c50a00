#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "doctest.h"

#include "bsynth/lp.hpp"

using namespace bsynth;

namespace {

// Maximum over all vertices formed by n of the constraints (rows and bounds).
double vertex_oracle(const std::vector<double>& c, const std::vector<LinearConstraint>& rows,
                     const std::vector<double>& lo, const std::vector<double>& hi, bool& feasible) {
    const std::size_t n = c.size();
    std::vector<LinearConstraint> all = rows;
    for (std::size_t i = 0; i < n; ++i) {
        LinearConstraint a{std::vector<double>(n, 0.0), hi[i]};
        a.a[i] = 1;
        LinearConstraint b{std::vector<double>(n, 0.0), -lo[i]};
        b.a[i] = -1;
        all.push_back(a);
        all.push_back(b);
    }
    double best = -INFINITY;
    feasible = false;
    std::vector<std::size_t> pick(n);
    std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t start, std::size_t depth) {
        if (depth == n) {
            Eigen::MatrixXd A(n, n);
            Eigen::VectorXd b(n);
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < n; ++j) A(i, j) = all[pick[i]].a[j];
                b[i] = all[pick[i]].b;
            }
            Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
            if (lu.rank() < static_cast<int>(n)) return;
            Eigen::VectorXd x = lu.solve(b);
            for (const auto& r : all) {
                double s = 0;
                for (std::size_t j = 0; j < n; ++j) s += r.a[j] * x[j];
                if (s > r.b + 1e-9) return;
            }
            feasible = true;
            double v = 0;
            for (std::size_t j = 0; j < n; ++j) v += c[j] * x[j];
            best = std::max(best, v);
            return;
        }
        for (std::size_t i = start; i < all.size(); ++i) {
            pick[depth] = i;
            rec(i + 1, depth + 1);
        }
    };
    rec(0, 0);
    return best;
}

}  // namespace

TEST_CASE("lp_max examples") {
    LpResult a = lp_max(std::vector<double>{1}, std::vector<LinearConstraint>{{{1}, 3}}, std::vector<double>{-10},
                        std::vector<double>{10});
    REQUIRE(a.status == LpStatus::Optimal);
    CHECK(a.x[0] == doctest::Approx(3));
    CHECK(a.value == doctest::Approx(3));

    LpResult b = lp_max(std::vector<double>{1, 1}, std::vector<LinearConstraint>{{{1, 1}, 1}},
                        std::vector<double>{0, 0}, std::vector<double>{1, 1});
    REQUIRE(b.status == LpStatus::Optimal);
    CHECK(b.value == doctest::Approx(1));

    LpResult c = lp_max(std::vector<double>{1}, std::vector<LinearConstraint>{{{1}, -1}, {{-1}, -1}},
                        std::vector<double>{-10}, std::vector<double>{10});
    CHECK(c.status == LpStatus::Infeasible);
}

TEST_CASE("lp_max handles degenerate vertices") {
    // Many constraints through the origin; optimum on the box corner.
    std::vector<LinearConstraint> rows;
    for (int i = 0; i < 20; ++i) {
        const double t = 0.1 * i;
        rows.push_back({{-std::cos(t), -std::sin(t), 1.0}, 0.0});
    }
    LpResult r = lp_max(std::vector<double>{0, 0, 1}, rows, std::vector<double>{-1, -1, 0},
                        std::vector<double>{1, 1, 3});
    REQUIRE(r.status == LpStatus::Optimal);
    bool feasible = false;
    const double oracle = vertex_oracle({0, 0, 1}, rows, {-1, -1, 0}, {1, 1, 3}, feasible);
    CHECK(r.value == doctest::Approx(oracle).epsilon(1e-9));
}

TEST_CASE("property: lp_max agrees with vertex enumeration") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-1, 1);
    std::uniform_int_distribution<int> dim(1, 3), count(0, 6);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = dim(rng);
        std::vector<double> c(n), lo(n), hi(n);
        for (std::size_t i = 0; i < n; ++i) {
            c[i] = u(rng);
            lo[i] = -1 - std::fabs(u(rng));
            hi[i] = 1 + std::fabs(u(rng));
        }
        std::vector<LinearConstraint> rows(count(rng));
        for (auto& r : rows) {
            r.a.resize(n);
            for (double& v : r.a) v = u(rng);
            r.b = 0.5 * u(rng);
        }
        bool feasible = false;
        const double oracle = vertex_oracle(c, rows, lo, hi, feasible);
        LpResult res = lp_max(c, rows, lo, hi);
        if (!feasible) {
            CHECK(res.status == LpStatus::Infeasible);
            continue;
        }
        REQUIRE(res.status == LpStatus::Optimal);
        CHECK(std::fabs(res.value - oracle) <= 1e-7);
        for (const auto& r : rows) {
            double s = 0;
            for (std::size_t j = 0; j < n; ++j) s += r.a[j] * res.x[j];
            CHECK(s <= r.b + 1e-8);
        }
    }
}
