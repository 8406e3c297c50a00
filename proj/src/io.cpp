#include "bsynth/io.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace bsynth {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& message) {
    throw SchemaError(path + ": " + message);
}

const json& member(const json& obj, const std::string& key, const std::string& path) {
    if (!obj.contains(key)) fail(path.empty() ? key : path + "." + key, "required section missing");
    return obj.at(key);
}

std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
}

std::string index(const std::string& path, std::size_t i) {
    return path + "[" + std::to_string(i) + "]";
}

double number(const json& j, const std::string& path) {
    if (!j.is_number()) fail(path, "expected a number");
    return j.get<double>();
}

std::string text(const json& j, const std::string& path) {
    if (!j.is_string()) fail(path, "expected a string");
    return j.get<std::string>();
}

const json& array(const json& j, const std::string& path) {
    if (!j.is_array()) fail(path, "expected an array");
    return j;
}

std::vector<std::string> names(const json& j, const std::string& path) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < array(j, path).size(); ++i) out.push_back(text(j[i], index(path, i)));
    return out;
}

Box box(const json& j, std::size_t dim, const std::string& path) {
    array(j, path);
    if (j.size() != dim) {
        fail(path, "expected " + std::to_string(dim) + " intervals, got " + std::to_string(j.size()));
    }
    Box b;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const std::string p = index(path, i);
        if (!j[i].is_array() || j[i].size() != 2) fail(p, "expected [lower, upper]");
        const double lo = number(j[i][0], p);
        const double hi = number(j[i][1], p);
        if (!(lo <= hi)) fail(p, "lower bound exceeds upper bound");
        b.dims.emplace_back(lo, hi);
    }
    return b;
}

Expr term(const json& j, std::span<const std::string> vars, const std::string& path) {
    if (j.is_number()) return Expr::constant(j.get<double>());
    try {
        return parse(text(j, path), vars);
    } catch (const ParseError& e) {
        fail(path, e.what());
    }
}

std::vector<Expr> terms(const json& j, std::size_t dim, std::span<const std::string> vars,
                        const std::string& path) {
    array(j, path);
    if (j.size() != dim) {
        fail(path, "dimension mismatch, expected " + std::to_string(dim) + " terms, got " +
                       std::to_string(j.size()));
    }
    std::vector<Expr> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(term(j[i], vars, index(path, i)));
    return out;
}

std::size_t mode_ref(const json& entry, const std::vector<ModeDef>& modes, const std::string& path) {
    if (!entry.contains("mode")) {
        if (modes.size() == 1) return 0;
        fail(join(path, "mode"), "required when the problem has several modes");
    }
    const std::string name = text(entry.at("mode"), join(path, "mode"));
    for (std::size_t m = 0; m < modes.size(); ++m) {
        if (modes[m].name == name) return m;
    }
    fail(join(path, "mode"), "unknown mode '" + name + "'");
}

std::vector<ModeBox> mode_boxes(const json& j, const std::vector<ModeDef>& modes, std::size_t n,
                                const std::string& path) {
    std::vector<ModeBox> out;
    for (std::size_t i = 0; i < array(j, path).size(); ++i) {
        const std::string p = index(path, i);
        if (!j[i].is_object()) fail(p, "expected an object with mode and box");
        out.push_back({mode_ref(j[i], modes, p), box(member(j[i], "box", p), n, join(p, "box"))});
    }
    return out;
}

template <class T>
std::optional<T> optional_field(const json& obj, const std::string& key, const std::string& path) {
    if (!obj.contains(key)) return std::nullopt;
    const json& v = obj.at(key);
    if constexpr (std::is_floating_point_v<T>) {
        return number(v, join(path, key));
    } else {
        if (!v.is_number_integer() || v.get<long long>() < 0) fail(join(path, key), "expected a non-negative integer");
        return v.get<T>();
    }
}

RunSettings run_settings(const json& j) {
    RunSettings r;
    if (!j.is_object()) fail("run", "expected an object");
    r.sigma = optional_field<double>(j, "sigma", "run");
    r.bloat = optional_field<double>(j, "bloat", "run");
    r.starts = optional_field<std::size_t>(j, "starts", "run");
    r.max_iter = optional_field<std::size_t>(j, "max_iter", "run");
    r.vertex_cap = optional_field<std::size_t>(j, "vertex_cap", "run");
    r.seed = optional_field<std::uint64_t>(j, "seed", "run");
    r.delta_min = optional_field<double>(j, "delta_min", "run");
    r.min_box_width = optional_field<double>(j, "min_box_width", "run");
    return r;
}

std::vector<Monomial> monomial_list(const json& j, const Problem& prob, const std::string& path) {
    std::vector<Monomial> out;
    for (std::size_t i = 0; i < array(j, path).size(); ++i) {
        try {
            out.push_back(parse_monomial(text(j[i], index(path, i)), prob.data().state_names));
        } catch (const ModelError& e) {
            fail(index(path, i), e.what());
        }
    }
    return out;
}

void check_schema(const json& doc, const char* expected) {
    if (!doc.is_object()) fail("document", "expected a JSON object");
    if (doc.contains("schema") && text(doc.at("schema"), "schema") != expected) {
        fail("schema", "expected '" + std::string(expected) + "'");
    }
}

}  // namespace

Template parse_template(const json& spec, const Problem& prob) {
    const std::size_t modes = prob.mode_count();
    const std::size_t n = prob.state_dim();
    try {
        if (spec.is_string()) {
            const std::string name = spec.get<std::string>();
            if (name == "linear") return Template::linear(modes, n);
            if (name == "quadratic-2d") {
                if (n != 2) fail("template", "quadratic-2d needs exactly two state variables");
                return Template::quadratic_2d(modes);
            }
            fail("template", "unknown shorthand '" + name + "'");
        }
        if (spec.is_array()) {
            return Template(std::vector<std::vector<Monomial>>(modes, monomial_list(spec, prob, "template")), n);
        }
        if (spec.is_object()) {
            std::vector<std::vector<Monomial>> per_mode(modes);
            std::vector<bool> seen(modes, false);
            for (const auto& [key, value] : spec.items()) {
                const auto m = prob.find_mode(key);
                if (!m) fail("template." + key, "unknown mode");
                per_mode[*m] = monomial_list(value, prob, "template." + key);
                seen[*m] = true;
            }
            for (std::size_t m = 0; m < modes; ++m) {
                if (!seen[m]) fail("template", "no monomials for mode '" + prob.mode(m).name + "'");
            }
            return Template(std::move(per_mode), n);
        }
    } catch (const ModelError& e) {
        fail("template", e.what());
    }
    fail("template", "expected a shorthand name, a monomial list or a per-mode object");
}

ProblemDocument load_problem(const json& doc) {
    check_schema(doc, kProblemSchema);
    ProblemData data;
    if (doc.contains("name")) data.name = text(doc.at("name"), "name");
    data.state_names = names(member(doc, "variables", ""), "variables");
    const std::size_t n = data.state_names.size();
    if (n == 0) fail("variables", "at least one state variable required");
    if (doc.contains("disturbances")) {
        const json& d = doc.at("disturbances");
        if (!d.is_object()) fail("disturbances", "expected an object with names and box");
        data.disturbance_names = names(member(d, "names", "disturbances"), "disturbances.names");
        data.disturbance_box =
            box(member(d, "box", "disturbances"), data.disturbance_names.size(), "disturbances.box");
    }
    std::vector<std::string> all_vars = data.state_names;
    all_vars.insert(all_vars.end(), data.disturbance_names.begin(), data.disturbance_names.end());

    const json& modes = member(doc, "modes", "");
    if (array(modes, "modes").empty()) fail("modes", "at least one mode required");
    for (std::size_t m = 0; m < modes.size(); ++m) {
        const std::string p = index("modes", m);
        const json& md = modes[m];
        if (!md.is_object()) fail(p, "expected an object");
        ModeDef def;
        def.name = md.contains("name") ? text(md.at("name"), join(p, "name")) : "m" + std::to_string(m);
        def.omega = box(member(md, "omega", p), n, join(p, "omega"));
        def.flow = terms(member(md, "flow", p), n, all_vars, join(p, "flow"));
        data.modes.push_back(std::move(def));
    }

    if (doc.contains("resets")) {
        const json& resets = doc.at("resets");
        for (std::size_t r = 0; r < array(resets, "resets").size(); ++r) {
            const std::string p = index("resets", r);
            const json& rd = resets[r];
            if (!rd.is_object()) fail(p, "expected an object");
            ResetRule rule;
            rule.source = mode_ref(json{{"mode", member(rd, "source", p)}}, data.modes, join(p, "source"));
            rule.target = mode_ref(json{{"mode", member(rd, "target", p)}}, data.modes, join(p, "target"));
            rule.guard = box(member(rd, "guard", p), n, join(p, "guard"));
            rule.map = terms(member(rd, "map", p), n, data.state_names, join(p, "map"));
            if (!rd.contains("inverse")) fail(join(p, "inverse"), "required for backward simulation");
            rule.inverse = terms(rd.at("inverse"), n, data.state_names, join(p, "inverse"));
            rule.image = box(member(rd, "image", p), n, join(p, "image"));
            data.resets.push_back(std::move(rule));
        }
    }

    data.initial = mode_boxes(member(doc, "init", ""), data.modes, n, "init");
    data.unsafe = mode_boxes(member(doc, "unsafe", ""), data.modes, n, "unsafe");

    ProblemDocument out{[&] {
                            try {
                                return Problem(std::move(data));
                            } catch (const ModelError& e) {
                                fail("problem", e.what());
                            }
                        }(),
                        Template::linear(1, 1), RunSettings{}};
    out.templ = doc.contains("template") ? parse_template(doc.at("template"), out.problem)
                                         : Template::linear(out.problem.mode_count(), n);
    if (doc.contains("run")) out.run = run_settings(doc.at("run"));
    return out;
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError(path.string() + ": cannot open file");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        std::ostringstream msg;
        msg << path.string() << ": JSON syntax error at byte " << e.byte;
        throw SchemaError(msg.str());
    }
}

ProblemDocument load_problem_file(const std::filesystem::path& path) {
    return load_problem(read_json_file(path));
}

json barrier_to_json(const Problem& prob, const Template& t, std::span<const double> p) {
    json modes = json::object();
    for (std::size_t m = 0; m < t.mode_count(); ++m) {
        json coeffs = json::object();
        const auto& list = t.monomials(m);
        for (std::size_t i = 0; i < list.size(); ++i) {
            coeffs[monomial_to_string(list[i], prob.data().state_names)] = p[t.offset(m) + i];
        }
        modes[prob.mode(m).name] = std::move(coeffs);
    }
    return json{{"schema", kBarrierSchema}, {"modes", std::move(modes)}};
}

Barrier load_barrier(const json& doc, const Problem& prob) {
    check_schema(doc, kBarrierSchema);
    const json& modes = member(doc, "modes", "");
    if (!modes.is_object()) fail("modes", "expected an object keyed by mode name");
    std::vector<std::vector<Monomial>> per_mode(prob.mode_count());
    std::vector<std::vector<double>> coeffs(prob.mode_count());
    for (const auto& [name, entries] : modes.items()) {
        const std::string p = "modes." + name;
        const auto m = prob.find_mode(name);
        if (!m) fail(p, "unknown mode");
        if (!entries.is_object()) fail(p, "expected a monomial -> coefficient object");
        for (const auto& [mono, value] : entries.items()) {
            try {
                per_mode[*m].push_back(parse_monomial(mono, prob.data().state_names));
            } catch (const ModelError& e) {
                fail(p, e.what());
            }
            coeffs[*m].push_back(number(value, p + "." + mono));
        }
    }
    // Modes without an entry get the constant 0, which is a legal template.
    for (std::size_t m = 0; m < prob.mode_count(); ++m) {
        const Monomial one(prob.state_dim(), 0);
        if (std::find(per_mode[m].begin(), per_mode[m].end(), one) == per_mode[m].end()) {
            per_mode[m].push_back(one);
            coeffs[m].push_back(0.0);
        }
    }
    Barrier out{[&] {
                    try {
                        return Template(per_mode, prob.state_dim());
                    } catch (const ModelError& e) {
                        fail("modes", e.what());
                    }
                }(),
                {}};
    for (const auto& c : coeffs) out.p.insert(out.p.end(), c.begin(), c.end());
    return out;
}

json scalable_problem(std::size_t l) {
    if (l == 0) throw SchemaError("scalable: l must be at least 1");
    const std::size_t n = 2 * l + 1;
    auto var = [](std::size_t i) { return "x" + std::to_string(i); };
    json variables = json::array();
    for (std::size_t i = 1; i <= n; ++i) variables.push_back(var(i));

    std::string sum;
    for (std::size_t i = 1; i <= l; ++i) {
        if (!sum.empty()) sum += " + ";
        sum += "(" + var(i + 1) + " + " + var(i + 2) + ")";
    }
    json flow = json::array();
    flow.push_back("1 + (1/" + std::to_string(l) + ")*(" + sum + ")");
    for (std::size_t i = 1; i <= l; ++i) {
        flow.push_back(var(2 * i + 1));
        flow.push_back("-10*sin(" + var(2 * i) + ") - " + var(2));
    }

    auto cube = [n](double lo1, double hi1) {
        json b = json::array();
        b.push_back({lo1, hi1});
        for (std::size_t i = 1; i < n; ++i) b.push_back({-10.0, 10.0});
        return b;
    };
    return json{{"schema", kProblemSchema},
                {"name", "scalable-" + std::to_string(l)},
                {"variables", variables},
                {"modes", json::array({json{{"name", "m"}, {"omega", cube(-10, 10)}, {"flow", flow}}})},
                {"init", json::array({json{{"mode", "m"}, {"box", cube(9, 10)}}})},
                {"unsafe", json::array({json{{"mode", "m"}, {"box", cube(-10, -9)}}})},
                {"template", "linear"},
                {"run", json{{"sigma", 0.1}, {"bloat", 1.1}}}};
}

}  // namespace bsynth
