#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "bsynth/model.hpp"

namespace bsynth {

/// Normalized sampled constraint over p: every hard row r demands
/// r^T p >= delta, every disjunction demands first^T p >= delta or
/// second^T p >= delta. All vectors have unit 2-norm.
struct SampledConstraint {
    struct Disjunction {
        std::vector<double> first;   // from V(p, s) >= delta
        std::vector<double> second;  // from -V(p, s') >= delta
    };

    std::size_t k = 0;
    std::vector<std::vector<double>> hard;
    std::vector<Disjunction> disjunctions;

    /// Smallest margin over all rows at p (disjunctions count their better side).
    double margin(std::span<const double> p) const;
};

/// Unit vector along a; throws InternalError for a zero vector.
std::vector<double> normalized(std::span<const double> a);

SampledConstraint build(std::span<const Segment> segments, const Template& t, const Problem& prob);

struct Candidate {
    std::vector<double> p;
    double delta = 0.0;
};

struct SolveOptions {
    double delta_min = 1e-6;
    /// Nodes whose bound does not exceed the incumbent by more than this are pruned.
    double opt_tol = 1e-9;
    std::size_t node_limit = 100000;
    /// Previous candidate; seeds the disjunct choices of an initial incumbent.
    std::optional<std::vector<double>> warm_start;
};

struct SolveResult {
    std::optional<Candidate> candidate;
    /// Best margin found and its parameters (also when below delta_min).
    double delta = 0.0;
    std::vector<double> p;
    std::size_t nodes = 0;
    std::size_t lp_solves = 0;
    bool node_limit_hit = false;
};

/// Maximizes delta over ||p||_inf <= 1 subject to the hard rows and one
/// disjunct per disjunction, by best-first branch and bound on the
/// disjunctions with an LP relaxation per node.
SolveResult solve(const SampledConstraint& c, const SolveOptions& opt = {});

}  // namespace bsynth
