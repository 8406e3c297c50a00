#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace bsynth {

/// a^T x <= b
struct LinearConstraint {
    std::vector<double> a;
    double b = 0.0;
};

enum class LpStatus { Optimal, Infeasible, IterationLimit };

struct LpResult {
    LpStatus status = LpStatus::Infeasible;
    std::vector<double> x;
    double value = 0.0;
    std::size_t iterations = 0;
};

struct LpOptions {
    double tol = 1e-9;
    /// 0 selects a limit proportional to the problem size.
    std::size_t max_iterations = 0;
};

/// Maximizes objective^T x subject to rows and lower <= x <= upper (all
/// bounds finite). Two-phase active-set primal simplex on the inequality
/// form: every iterate is a vertex given by n active constraints, with
/// Bland's rule for both the leaving and the entering constraint.
LpResult lp_max(std::span<const double> objective, std::span<const LinearConstraint> rows,
                std::span<const double> lower, std::span<const double> upper, const LpOptions& opt = {});

}  // namespace bsynth
