#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "bsynth/model.hpp"

namespace bsynth {

enum class VerdictKind { Verified, Refuted, Unknown };

const char* to_string(VerdictKind k);

struct Verdict {
    VerdictKind kind = VerdictKind::Verified;
    /// Failing condition 1..4 (0 when verified).
    int condition = 0;
    /// Refuted: a point where the condition fails by plain evaluation.
    ModePoint witness;
    Point witness_d;
    std::size_t reset = 0;
    /// Unknown: undecided boxes (state dimensions, then disturbances).
    std::vector<ModeBox> unresolved;
    double smallest_width = 0.0;
};

struct ConditionReport {
    VerdictKind outcome = VerdictKind::Verified;
    std::size_t proved = 0;
    std::size_t split = 0;
    std::size_t unresolved = 0;
    /// Fraction of the region's volume covered by decided boxes plus
    /// minimum-width leaves.
    double covered = 0.0;
    double seconds = 0.0;
};

struct VerifyReport {
    Verdict verdict;
    ConditionReport conditions[4];
    double seconds = 0.0;
};

struct VerifyConfig {
    /// Minimum box width relative to the region width per dimension.
    double min_box_width = 1e-4;
    /// Boxes processed per condition before giving up with Unknown.
    std::size_t max_boxes = 2'000'000;
    /// At most this many unresolved boxes are listed in a verdict.
    std::size_t max_listed = 32;
    bool parallel = true;
};

/// Interval branch and bound over the four barrier conditions.
VerifyReport verify(const Problem& prob, const Template& t, std::span<const double> p, const VerifyConfig& cfg = {});

/// Replays a Refuted verdict by plain evaluation.
bool witness_violates(const Problem& prob, const Template& t, std::span<const double> p, const Verdict& v);

}  // namespace bsynth
