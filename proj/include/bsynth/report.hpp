#pragma once

#include "json.hpp"

#include "bsynth/engine.hpp"
#include "bsynth/verify.hpp"

namespace bsynth {

inline constexpr const char* kToolName = "bsynth";
inline constexpr const char* kToolVersion = "0.1.0";

nlohmann::json verify_report_to_json(const Problem& prob, const VerifyReport& r);

/// Report document; the barrier is present iff the status is BarrierFound.
nlohmann::json run_report_to_json(const Problem& prob, const Template& t, const RunReport& r, const RunConfig& cfg);

}  // namespace bsynth
