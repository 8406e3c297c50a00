#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "bsynth/falsify.hpp"
#include "bsynth/model.hpp"
#include "bsynth/sim.hpp"
#include "bsynth/verify.hpp"

namespace bsynth {

struct RunConfig {
    double sigma = 0.1;
    double bloat = 1.1;
    std::size_t vertex_cap = 256;
    std::size_t starts = 16;
    std::size_t max_iterations = 50;
    double delta_min = 1e-6;
    double eps_ce = 1e-9;
    std::uint64_t seed = 0;
    bool verify = true;
    /// omega / alpha simulations stop after this many multiples of sigma.
    double flow_time_factor = 100.0;
    /// Integrator settings; bloat above overrides sim.bloat.
    SimOptions sim;
    VerifyConfig verifier;
};

enum class RunStatus { BarrierFound, NoCandidate, IterationLimit };

const char* to_string(RunStatus s);

struct IterationRecord {
    double delta = 0.0;
    std::vector<double> p;
    std::size_t nodes = 0;
    /// Counter-example added in this iteration, if any.
    std::optional<CounterexampleKind> kind;
    double value = 0.0;
    /// The segment added in this iteration.
    std::optional<Segment> segment;
    /// Margin of the added segment's own constraint at p (<= 0 refutes).
    double added_margin = 0.0;
    /// The counter-example came from a verification witness.
    bool from_verifier = false;
};

struct PhaseTimes {
    double simulation = 0.0;
    double candidate = 0.0;
    double counterexample = 0.0;
    double verification = 0.0;
};

struct RunReport {
    RunStatus status = RunStatus::IterationLimit;
    std::optional<std::vector<double>> p;
    double delta = 0.0;
    std::optional<VerifyReport> verification;
    std::size_t iterations = 0;
    std::size_t segments = 0;
    PhaseTimes times;
    double total_seconds = 0.0;
    std::vector<IterationRecord> log;
};

/// CEGIS loop: bootstrap segments, then alternate the Chebyshev candidate
/// and the counter-example search until no counter-example is found.
RunReport run(const Problem& prob, const Template& t, const RunConfig& cfg);

}  // namespace bsynth
