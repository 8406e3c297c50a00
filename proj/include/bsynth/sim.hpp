#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "bsynth/model.hpp"

namespace bsynth {

enum class StopReason { Horizon, LeftBloatedSpace, Event, Livelock, IntegrationFailure };

const char* to_string(StopReason r);

struct Trajectory {
    ModePoint start;
    ModePoint end;
    double end_time = 0.0;
    StopReason reason = StopReason::Horizon;
    std::size_t resets = 0;
};

struct SimOptions {
    double rtol = 1e-8;
    double atol = 1e-10;
    double event_time_tol = 1e-9;
    double max_step = 0.1;
    double bloat = 1.1;
    std::size_t max_resets = 100;
    std::size_t max_steps = 2'000'000;
};

/// Writes the disturbance to hold over the next step, given (mode, x).
using DisturbancePolicy = std::function<void(std::size_t, std::span<const double>, std::span<double>)>;

/// Continue-condition: integration stops where g(mode, x) <= 0.
using EventFunction = std::function<double(std::size_t, std::span<const double>)>;

DisturbancePolicy constant_disturbance(Point d);
/// The midpoint of the disturbance box.
DisturbancePolicy center_disturbance(const Problem& prob);

/// Single continuous phase in one mode, ignoring resets.
Trajectory integrate(const Problem& prob, std::size_t mode, Point x0, const DisturbancePolicy& policy,
                     double horizon, std::span<const EventFunction> events, const Box& bloated,
                     const SimOptions& opt = {});

/// Hybrid flow: continuous phases stopped at the earliest guard entry,
/// followed by the reset. The bloated box of each mode is
/// bloat(omega, opt.bloat).
Trajectory flow_hybrid(const Problem& prob, const ModePoint& start, const DisturbancePolicy& policy,
                       double horizon, const SimOptions& opt = {},
                       std::span<const EventFunction> events = {});

/// Negated flows, inverted resets (guard = declared image), I and U swapped.
Problem reverse(const Problem& prob);

/// Forward segments from the vertices of every initial box, then backward
/// segments from the vertices of every unsafe box. Boxes with more than
/// vertex_cap distinct vertices use a seeded random subset of that size.
std::vector<Segment> init_segments(const Problem& prob, double sigma, std::size_t vertex_cap,
                                   std::uint64_t seed, const SimOptions& opt = {});

/// Forward simulation while V increases, the disturbance maximizing dV/dt.
ModePoint omega(const Problem& prob, const Template& t, std::span<const double> p, const ModePoint& start,
                double max_time, const SimOptions& opt = {});

/// Backward simulation while V decreases in backward time. reversed must be
/// reverse(prob).
ModePoint alpha(const Problem& reversed, const Template& t, std::span<const double> p, const ModePoint& start,
                double max_time, const SimOptions& opt = {});

/// The disturbance vertex extremizing grad V . f at (mode, x); writes it to d
/// and returns the extreme value.
double extremal_lie_derivative(const Problem& prob, const Template& t, std::span<const double> p,
                               std::size_t mode, std::span<const double> x, bool maximize, std::span<double> d);

}  // namespace bsynth
