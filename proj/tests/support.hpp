#pragma once

#include <random>
#include <string>
#include <vector>

#include "bsynth/expr.hpp"
#include "bsynth/io.hpp"

namespace testing_support {

using bsynth::Expr;

// Random term over n variables that is defined and smooth on [-2, 2]^n:
// every ln, sqrt and division acts on something bounded away from zero.
inline Expr random_expr(std::mt19937_64& rng, int depth, std::size_t n) {
    std::uniform_int_distribution<int> pick(0, depth <= 0 ? 1 : 11);
    std::uniform_real_distribution<double> coef(-2.0, 2.0);
    std::uniform_int_distribution<std::size_t> var(0, n - 1);
    auto sub = [&] { return random_expr(rng, depth - 1, n); };
    auto positive = [&] { return Expr::constant(0.5) + bsynth::pow(sub(), 2); };
    switch (pick(rng)) {
        case 0: return Expr::variable(var(rng));
        case 1: return Expr::constant(coef(rng));
        case 2: return sub() + sub();
        case 3: return sub() - sub();
        case 4: return sub() * sub();
        case 5: return sub() / positive();
        case 6: return bsynth::pow(sub(), 2 + static_cast<int>(var(rng) % 2));
        case 7: return bsynth::sin(sub());
        case 8: return bsynth::cos(sub());
        case 9: return bsynth::ln(positive());
        case 10: return bsynth::sqrt(positive());
        default: return bsynth::exp(Expr::constant(0.25) * bsynth::sin(sub()));
    }
}

inline bsynth::Problem problem(const nlohmann::json& doc) {
    return bsynth::load_problem(doc).problem;
}

// One-mode problem document with the given flows and boxes.
inline nlohmann::json simple_doc(std::vector<std::string> vars, std::vector<std::string> flow,
                                 nlohmann::json omega, nlohmann::json init, nlohmann::json unsafe) {
    return nlohmann::json{{"variables", vars},
                          {"modes", nlohmann::json::array({{{"name", "m"}, {"omega", omega}, {"flow", flow}}})},
                          {"init", nlohmann::json::array({{{"box", init}}})},
                          {"unsafe", nlohmann::json::array({{{"box", unsafe}}})}};
}

}  // namespace testing_support
