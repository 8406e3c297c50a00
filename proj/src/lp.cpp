#include "bsynth/lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Dense>

namespace bsynth {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class Core { Optimal, Unbounded, IterationLimit };

// Constraints G x <= h; W holds the indices of the n active constraints
// defining the current vertex x.
Core simplex(const MatrixXd& G, const VectorXd& h, const VectorXd& c, VectorXd& x, std::vector<int>& W,
             double tol, std::size_t max_iter, std::size_t& iters) {
    const int n = static_cast<int>(G.cols());
    const int m = static_cast<int>(G.rows());
    std::vector<char> active(m, 0);
    for (int w : W) active[w] = 1;
    MatrixXd B(n, n);
    VectorXd hw(n);

    while (true) {
        for (int i = 0; i < n; ++i) {
            B.row(i) = G.row(W[i]);
            hw[i] = h[W[i]];
        }
        Eigen::PartialPivLU<MatrixXd> lu(B);
        x = lu.solve(hw);
        const VectorXd lambda = lu.transpose().solve(c);

        // Leaving: smallest constraint index with a negative multiplier.
        int leave = -1;
        for (int i = 0; i < n; ++i) {
            if (lambda[i] < -tol && (leave < 0 || W[i] < W[leave])) leave = i;
        }
        if (leave < 0) return Core::Optimal;
        if (++iters > max_iter) return Core::IterationLimit;

        VectorXd e = VectorXd::Zero(n);
        e[leave] = -1.0;
        const VectorXd d = lu.solve(e);

        // Entering: minimum ratio, ties to the smallest index.
        int enter = -1;
        double best = std::numeric_limits<double>::infinity();
        for (int j = 0; j < m; ++j) {
            if (active[j]) continue;
            const double gd = G.row(j).dot(d);
            if (gd <= tol) continue;
            const double slack = std::max(0.0, h[j] - G.row(j).dot(x));
            const double ratio = slack / gd;
            if (enter < 0 || ratio < best - 1e-12 * (1.0 + best)) {
                best = ratio;
                enter = j;
            }
        }
        if (enter < 0) return Core::Unbounded;
        active[W[leave]] = 0;
        active[enter] = 1;
        W[leave] = enter;
    }
}

}  // namespace

LpResult lp_max(std::span<const double> objective, std::span<const LinearConstraint> rows,
                std::span<const double> lower, std::span<const double> upper, const LpOptions& opt) {
    const int n = static_cast<int>(objective.size());
    const int r = static_cast<int>(rows.size());
    if (lower.size() != objective.size() || upper.size() != objective.size()) {
        throw std::invalid_argument("lp_max: bound dimension mismatch");
    }
    for (int i = 0; i < n; ++i) {
        if (!std::isfinite(lower[i]) || !std::isfinite(upper[i])) throw std::invalid_argument("lp_max: bounds must be finite");
    }
    for (const auto& row : rows) {
        if (row.a.size() != objective.size()) throw std::invalid_argument("lp_max: row dimension mismatch");
    }

    LpResult res;
    for (int i = 0; i < n; ++i) {
        if (lower[i] > upper[i] + opt.tol) return res;
    }
    const std::size_t max_iter = opt.max_iterations ? opt.max_iterations : 50 * static_cast<std::size_t>(n + r + 10);

    // Phase 1 over (x, t): index 0 is t >= 0, then lower bounds, upper
    // bounds and rows a^T x - t <= b. Maximize -t from x = lower.
    const int m1 = 1 + 2 * n + r;
    MatrixXd G1 = MatrixXd::Zero(m1, n + 1);
    VectorXd h1(m1);
    G1(0, n) = -1.0;
    h1[0] = 0.0;
    for (int i = 0; i < n; ++i) {
        G1(1 + i, i) = -1.0;
        h1[1 + i] = -lower[i];
        G1(1 + n + i, i) = 1.0;
        h1[1 + n + i] = upper[i];
    }
    for (int j = 0; j < r; ++j) {
        for (int i = 0; i < n; ++i) G1(1 + 2 * n + j, i) = rows[j].a[i];
        G1(1 + 2 * n + j, n) = -1.0;
        h1[1 + 2 * n + j] = rows[j].b;
    }

    std::vector<int> W;
    for (int i = 0; i < n; ++i) W.push_back(1 + i);
    int worst = 0;  // t >= 0 when nothing is violated
    double violation = 0.0;
    for (int j = 0; j < r; ++j) {
        double ax = 0.0;
        for (int i = 0; i < n; ++i) ax += rows[j].a[i] * lower[i];
        if (ax - rows[j].b > violation) {
            violation = ax - rows[j].b;
            worst = 1 + 2 * n + j;
        }
    }
    W.push_back(worst);

    VectorXd x1(n + 1);
    VectorXd c1 = VectorXd::Zero(n + 1);
    c1[n] = -1.0;
    if (simplex(G1, h1, c1, x1, W, opt.tol, max_iter, res.iterations) == Core::IterationLimit) {
        res.status = LpStatus::IterationLimit;
        return res;
    }
    if (x1[n] > opt.tol) return res;  // infeasible

    // Make t >= 0 part of the active set, then drop it.
    if (std::find(W.begin(), W.end(), 0) == W.end()) {
        MatrixXd B(n + 1, n + 1);
        for (int i = 0; i <= n; ++i) B.row(i) = G1.row(W[i]);
        const VectorXd w = B.transpose().partialPivLu().solve(VectorXd(G1.row(0).transpose()));
        int swap = 0;
        for (int i = 1; i <= n; ++i) {
            if (std::fabs(w[i]) > std::fabs(w[swap])) swap = i;
        }
        W[swap] = 0;
    }
    std::vector<int> W2;
    for (int w : W) {
        if (w != 0) W2.push_back(w - 1);
    }

    MatrixXd G2 = G1.block(1, 0, m1 - 1, n);
    VectorXd h2 = h1.segment(1, m1 - 1);
    VectorXd c2(n);
    for (int i = 0; i < n; ++i) c2[i] = objective[i];
    VectorXd x2(n);
    const Core status = simplex(G2, h2, c2, x2, W2, opt.tol, max_iter, res.iterations);
    if (status == Core::IterationLimit) {
        res.status = LpStatus::IterationLimit;
        return res;
    }
    if (status == Core::Unbounded) throw std::logic_error("lp_max: unbounded despite finite bounds");
    res.status = LpStatus::Optimal;
    res.x.assign(x2.data(), x2.data() + n);
    res.value = c2.dot(x2);
    return res;
}

}  // namespace bsynth
