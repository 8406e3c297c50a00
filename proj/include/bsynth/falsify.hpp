#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "bsynth/model.hpp"
#include "bsynth/sim.hpp"

namespace bsynth {

/// Objective over a box: returns the value at z and, when grad is non-empty,
/// writes the gradient. Non-finite values mark points to avoid.
using BoxObjective = std::function<double(std::span<const double> z, std::span<double> grad)>;

struct LocalOptions {
    double gradient_tol = 1e-8;
    std::size_t max_iterations = 200;
    double armijo = 1e-4;
};

struct LocalResult {
    Point z;
    double value = 0.0;
    std::size_t iterations = 0;
};

/// Projected gradient descent with Armijo backtracking on a box.
LocalResult minimize_projected(const BoxObjective& f, const Box& box, Point z0, const LocalOptions& opt = {});

/// Best point of one counter-example objective. value is +inf when the
/// search had nothing to look at (no resets, no zero-level point).
struct PointSearch {
    ModePoint x;
    Point d;
    std::size_t reset = 0;
    double value = 0.0;
};

PointSearch min_initial(const Problem& prob, const Template& t, std::span<const double> p, std::size_t starts,
                        std::uint64_t seed);
PointSearch min_unsafe(const Problem& prob, const Template& t, std::span<const double> p, std::size_t starts,
                       std::uint64_t seed);
/// Minimizes -(grad V / |grad V|) . (f / |f|) over the zero level of V and D.
PointSearch min_transversality(const Problem& prob, const Template& t, std::span<const double> p,
                               std::size_t starts, std::uint64_t seed);
/// Minimizes max(V(x), -V(r(x))) over the guards.
PointSearch min_reset(const Problem& prob, const Template& t, std::span<const double> p, std::size_t starts,
                      std::uint64_t seed);

/// F_I, F_U, F_grad and F_r at a point, for replaying search results.
double initial_objective(const Template& t, std::span<const double> p, const ModePoint& x);
double unsafe_objective(const Template& t, std::span<const double> p, const ModePoint& x);
/// Also writes the gradients in x and d when the spans are non-empty.
double transversality_objective(const Problem& prob, const Template& t, std::span<const double> p,
                                const ModePoint& x, std::span<const double> d, std::span<double> grad_x = {},
                                std::span<double> grad_d = {});
double reset_objective(const Problem& prob, const Template& t, std::span<const double> p, std::size_t reset,
                       std::span<const double> x);

enum class CounterexampleKind { Initial, Unsafe, Transversality, Reset };

const char* to_string(CounterexampleKind k);

struct Counterexample {
    CounterexampleKind kind = CounterexampleKind::Initial;
    ModePoint x;
    Point d;
    std::size_t reset = 0;
    double value = 0.0;
    Segment segment;
};

struct FalsifyConfig {
    std::size_t starts = 16;
    std::uint64_t seed = 0;
    double eps = 1e-9;
    /// Time bound of the omega / alpha simulations.
    double max_time = 10.0;
    SimOptions sim;
};

struct CheckResult {
    /// Minima of the initial, unsafe, transversality and reset objectives.
    double values[4] = {0, 0, 0, 0};
    std::optional<Counterexample> counterexample;
};

/// Segment through a counter-example point built from omega / alpha.
/// reversed must be reverse(prob) (unused for the initial case).
Segment counterexample_segment(const Problem& prob, const Problem& reversed, const Template& t,
                               std::span<const double> p, CounterexampleKind kind, const ModePoint& x,
                               std::size_t reset, double max_time, const SimOptions& opt = {});

/// True when p violates the sampled constraint of the single segment.
bool refutes(const Template& t, std::span<const double> p, const Segment& seg);

/// Runs the four searches and, on a violation below -eps, builds the
/// refuting segment. Throws InternalError when the segment does not refute p.
CheckResult find_counterexample(const Problem& prob, const Problem& reversed, const Template& t,
                                std::span<const double> p, const FalsifyConfig& cfg);

}  // namespace bsynth
