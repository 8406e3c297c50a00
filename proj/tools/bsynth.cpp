#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "bsynth/engine.hpp"
#include "bsynth/io.hpp"
#include "bsynth/report.hpp"
#include "bsynth/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace bsynth;

namespace {

struct Overrides {
    std::optional<double> sigma, bloat, delta_min, min_box_width;
    std::optional<std::size_t> starts, max_iter;
    std::optional<std::uint64_t> seed;
    bool no_verify = false;
    std::string report;
};

// Defaults, then the document's run section, then command-line flags.
RunConfig make_config(const RunSettings& doc, const Overrides& o) {
    RunConfig cfg;
    auto pick = [](auto& field, const auto& from_doc, const auto& from_cli) {
        if (from_doc) field = *from_doc;
        if (from_cli) field = *from_cli;
    };
    pick(cfg.sigma, doc.sigma, o.sigma);
    pick(cfg.bloat, doc.bloat, o.bloat);
    pick(cfg.starts, doc.starts, o.starts);
    pick(cfg.max_iterations, doc.max_iter, o.max_iter);
    pick(cfg.seed, doc.seed, o.seed);
    pick(cfg.delta_min, doc.delta_min, o.delta_min);
    pick(cfg.verifier.min_box_width, doc.min_box_width, o.min_box_width);
    if (doc.vertex_cap) cfg.vertex_cap = *doc.vertex_cap;
    cfg.verify = !o.no_verify;
    return cfg;
}

void emit(const json& doc, const std::string& path) {
    if (path.empty()) {
        std::cout << doc.dump(2) << "\n";
        return;
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out << doc.dump(2) << "\n";
}

bool succeeded(const RunReport& r) {
    if (r.status != RunStatus::BarrierFound) return false;
    return !r.verification || r.verification->verdict.kind != VerdictKind::Refuted;
}

int cmd_synth(const std::string& file, const Overrides& o) {
    const ProblemDocument doc = load_problem_file(file);
    const RunConfig cfg = make_config(doc.run, o);
    const RunReport r = run(doc.problem, doc.templ, cfg);
    emit(run_report_to_json(doc.problem, doc.templ, r, cfg), o.report);
    return succeeded(r) ? 0 : 1;
}

int cmd_verify(const std::string& file, const std::string& barrier_file, const Overrides& o) {
    const ProblemDocument doc = load_problem_file(file);
    const Barrier b = load_barrier(read_json_file(barrier_file), doc.problem);
    VerifyConfig vc;
    if (doc.run.min_box_width) vc.min_box_width = *doc.run.min_box_width;
    if (o.min_box_width) vc.min_box_width = *o.min_box_width;
    const VerifyReport r = verify(doc.problem, b.templ, b.p, vc);
    json out{{"schema", kReportSchema},
             {"tool", {{"name", kToolName}, {"version", kToolVersion}}},
             {"problem", doc.problem.name()},
             {"barrier", barrier_to_json(doc.problem, b.templ, b.p)["modes"]},
             {"verdict", verify_report_to_json(doc.problem, r)}};
    emit(out, o.report);
    return r.verdict.kind == VerdictKind::Verified ? 0 : 1;
}

std::string template_label(const json& spec) {
    if (spec.is_string()) return spec.get<std::string>();
    if (spec.is_array()) return std::to_string(spec.size()) + " monomials";
    return "per-mode";
}

int cmd_bench(const std::string& dir, const Overrides& o) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.path().extension() == ".json") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    json rows = json::array();
    std::printf("%-16s %4s %-14s %5s %10s %10s %10s %10s  %-16s %s\n", "problem", "dim", "templ", "iter", "simulation",
                "candidate", "ctrexample", "verif", "status", "verdict");
    int failures = 0;
    for (const fs::path& f : files) {
        const json raw = read_json_file(f);
        if (raw.value("schema", std::string(kProblemSchema)) != kProblemSchema) continue;
        const ProblemDocument doc = load_problem(raw);
        const RunConfig cfg = make_config(doc.run, o);
        const RunReport r = run(doc.problem, doc.templ, cfg);
        const char* verdict = r.verification ? to_string(r.verification->verdict.kind) : "-";
        std::printf("%-16s %4zu %-14s %5zu %10.2f %10.2f %10.2f %10.2f  %-16s %s\n", doc.problem.name().c_str(),
                    doc.problem.state_dim(), template_label(raw.value("template", json("linear"))).c_str(),
                    r.iterations, r.times.simulation, r.times.candidate, r.times.counterexample,
                    r.times.verification, to_string(r.status), verdict);
        std::fflush(stdout);
        rows.push_back(run_report_to_json(doc.problem, doc.templ, r, cfg));
        if (!succeeded(r)) ++failures;
    }
    if (!o.report.empty()) emit(rows, o.report);
    return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Barrier certificate synthesis from simulations"};
    app.require_subcommand(1);
    Overrides o;

    auto add_run_flags = [&](CLI::App* cmd) {
        cmd->add_option("--sigma", o.sigma, "simulation length of the bootstrap segments");
        cmd->add_option("--bloat", o.bloat, "state-space bloating factor (>= 1)");
        cmd->add_option("--starts", o.starts, "multi-start count of the counter-example search");
        cmd->add_option("--max-iter", o.max_iter, "refinement iteration budget");
        cmd->add_option("--seed", o.seed, "random seed");
        cmd->add_option("--delta-min", o.delta_min, "smallest accepted candidate margin");
        cmd->add_option("--min-box-width", o.min_box_width, "verifier minimum box width, relative");
        cmd->add_flag("--no-verify", o.no_verify, "skip the final rigorous verification");
        cmd->add_option("--report", o.report, "write the report here instead of stdout");
    };

    std::string problem_file, barrier_file, corpus_dir, output;
    std::size_t scalable = 0;

    CLI::App* synth = app.add_subcommand("synth", "synthesize a barrier certificate");
    synth->add_option("problem", problem_file, "problem document")->required();
    add_run_flags(synth);

    CLI::App* verify_cmd = app.add_subcommand("verify", "verify a given barrier");
    verify_cmd->add_option("problem", problem_file, "problem document")->required();
    verify_cmd->add_option("--barrier", barrier_file, "barrier coefficient document")->required();
    verify_cmd->add_option("--min-box-width", o.min_box_width, "minimum box width, relative");
    verify_cmd->add_option("--report", o.report, "write the report here instead of stdout");

    CLI::App* bench = app.add_subcommand("bench", "run every problem document of a directory");
    bench->add_option("corpus", corpus_dir, "directory of problem documents")->required();
    add_run_flags(bench);

    CLI::App* gen = app.add_subcommand("gen", "emit a generated problem document");
    gen->add_option("--scalable", scalable, "scalable family parameter l (dimension 2l + 1)")->required();
    gen->add_option("--output", output, "write here instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*synth) return cmd_synth(problem_file, o);
        if (*verify_cmd) return cmd_verify(problem_file, barrier_file, o);
        if (*bench) return cmd_bench(corpus_dir, o);
        if (*gen) {
            if (scalable < 1) throw SchemaError("--scalable: l must be at least 1");
            emit(scalable_problem(scalable), output);
            return 0;
        }
    } catch (const SchemaError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ModelError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::runtime_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
