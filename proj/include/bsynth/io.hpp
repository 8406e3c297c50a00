#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "bsynth/model.hpp"

namespace bsynth {

inline constexpr const char* kProblemSchema = "bsynth-problem/1";
inline constexpr const char* kBarrierSchema = "bsynth-barrier/1";
inline constexpr const char* kReportSchema = "bsynth-report/1";

/// Malformed document. The message starts with the offending JSON path.
class SchemaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Optional "run" section of a problem document.
struct RunSettings {
    std::optional<double> sigma;
    std::optional<double> bloat;
    std::optional<std::size_t> starts;
    std::optional<std::size_t> max_iter;
    std::optional<std::size_t> vertex_cap;
    std::optional<std::uint64_t> seed;
    std::optional<double> delta_min;
    std::optional<double> min_box_width;
};

struct ProblemDocument {
    Problem problem;
    Template templ;
    RunSettings run;
};

ProblemDocument load_problem(const nlohmann::json& doc);
ProblemDocument load_problem_file(const std::filesystem::path& path);

/// Template from "linear", "quadratic-2d", a monomial list shared by all
/// modes, or an object mapping mode names to monomial lists.
Template parse_template(const nlohmann::json& spec, const Problem& prob);

/// Barrier document: per-mode monomial -> coefficient maps.
struct Barrier {
    Template templ;
    std::vector<double> p;
};

nlohmann::json barrier_to_json(const Problem& prob, const Template& t, std::span<const double> p);
Barrier load_barrier(const nlohmann::json& doc, const Problem& prob);

nlohmann::json read_json_file(const std::filesystem::path& path);

/// Document for the scalable benchmark family of dimension 2l + 1.
nlohmann::json scalable_problem(std::size_t l);

}  // namespace bsynth
