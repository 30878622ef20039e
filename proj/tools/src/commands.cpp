#include "plpde_cli/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "plpde/barrier.hpp"
#include "plpde/conegeo.hpp"
#include "plpde/errors.hpp"
#include "plpde/estimates.hpp"
#include "plpde/field_io.hpp"
#include "plpde/parallel.hpp"
#include "plpde/solver.hpp"
#include "plpde/version.hpp"
#include "plpde_cli/config.hpp"

namespace plpde::cli {

namespace fs = std::filesystem;

namespace {

class Diagnostics {
public:
    explicit Diagnostics(std::ostream& os) : os_(os) {}

    void emit(const std::string& level, const std::string& event, json fields = json::object()) {
        fields["level"] = level;
        fields["event"] = event;
        os_ << fields.dump() << '\n';
        os_.flush();
    }
    void info(const std::string& event, json fields = json::object()) { emit("info", event, std::move(fields)); }
    void warn(const std::string& event, json fields = json::object()) { emit("warning", event, std::move(fields)); }
    void error(const std::string& event, json fields = json::object()) { emit("error", event, std::move(fields)); }

    std::function<void(const json&)> sink() {
        return [this](const json& j) {
            json copy = j;
            const std::string event = copy.value("event", "solver");
            copy.erase("event");
            info(event, std::move(copy));
        };
    }

private:
    std::ostream& os_;
};

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw ConfigurationError("cannot write " + path.string(), "output.directory");
    out << j.dump(2) << '\n';
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw ConfigurationError("cannot write " + path.string(), "output.directory");
    out << text;
}

fs::path prepare_output(const RunConfig& config, const CommandOptions& options) {
    const fs::path dir = options.output ? *options.output : config.output.directory;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigurationError("cannot create output directory " + dir.string() + ": " + ec.message(), "output.directory");
    return dir;
}

void write_manifest(const fs::path& dir, const std::string& command, const RunConfig& config) {
    write_json(dir / "manifest.json", json{{"command", command},
                                           {"config_hash", hex64(config_hash(config.document))},
                                           {"config", config.document},
                                           {"seed", config.seed},
                                           {"versions", build_versions()},
                                           {"threads", worker_count()}});
}

json estimate_options_json(const Ball& ball, const std::optional<double>& shift) {
    json j{{"ball", {{"center", ball.center}, {"radius", ball.radius}}}};
    j["harnack_shift"] = shift ? json(*shift) : json(nullptr);
    return j;
}

double exact_error(const ProblemSpec& spec, const ScalarField& u) {
    if (!spec.exact) return std::nan("");
    const auto& e = spec.exact->values;
    const double offset = spec.mode == SolveMode::periodic_with_constant ? *std::max_element(e.begin(), e.end()) : 0.0;
    double err = 0.0;
    for (std::size_t p = 0; p < e.size(); ++p) err = std::max(err, std::abs(u.values[p] - (e[p] - offset)));
    return err;
}

json problem_summary(const ProblemSpec& spec) {
    return json{{"geometry", spec.geometry.to_json()},
                {"operator",
                 {{"family", to_string(spec.op.family)},
                  {"k", spec.op.k},
                  {"n", spec.op.n},
                  {"K", spec.op.K},
                  {"beta", spec.op.beta},
                  {"level_shift", spec.op.level_shift}}},
                {"mode", to_string(spec.mode)}};
}

// Runs one solve and writes fields plus the report into `dir`. Returns the
// exit code and appends the level summary.
struct LevelOutcome {
    int code = exit_ok;
    json report;
    std::optional<ScalarField> u;
};

LevelOutcome solve_and_write(const RunConfig& config, const ProblemSpec& spec, const fs::path& dir, Diagnostics& diag) {
    SolverOptions options = config.solver;
    options.diagnostics = diag.sink();
    LevelOutcome out;
    auto write_state = [&](const SolveState& state, const std::string& status) {
        out.report = to_json(state);
        out.report["status"] = status;
        out.report["problem"] = problem_summary(spec);
        if (spec.exact) out.report["exact_error"] = exact_error(spec, state.u);
        if (config.output.write_fields) write_field(dir / "u", state.u, json{{"status", status}});
        out.u = state.u;
    };
    try {
        const auto t0 = std::chrono::steady_clock::now();
        const SolveState state = solve(spec, options);
        diag.info("solve_timing",
                  {{"seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()}});
        write_state(state, "converged");
        for (const auto& w : state.warnings) diag.warn("solver_warning", {{"message", w}});
    } catch (const HomotopyStall& e) {
        diag.error("homotopy_stall", {{"message", e.what()}});
        write_state(e.last_good(), "stalled");
        out.report["error"] = e.what();
        out.code = exit_stalled;
    } catch (const NewtonStall& e) {
        diag.error("newton_stall", {{"message", e.what()}, {"worst_point", e.worst_point()}, {"residual", e.residual()}});
        out.report = json{{"status", "stalled"}, {"error", e.what()}, {"problem", problem_summary(spec)}};
        out.code = exit_stalled;
    } catch (const LinearSolveFailure& e) {
        diag.error("linear_solve_failure", {{"message", e.what()}});
        out.report = json{{"status", "stalled"}, {"error", e.what()}, {"problem", problem_summary(spec)}};
        out.code = exit_stalled;
    } catch (const AdmissibilityError& e) {
        diag.error("admissibility_error", {{"message", e.what()}});
        out.report = json{{"status", "stalled"}, {"error", e.what()}, {"problem", problem_summary(spec)}};
        out.code = exit_stalled;
    }
    return out;
}

template <class Fn>
int guarded(Diagnostics& diag, Fn&& body) {
    try {
        return body();
    } catch (const ConfigurationError& e) {
        diag.error("configuration_error", {{"field", e.field_path()}, {"message", e.what()}});
        return exit_configuration_error;
    } catch (const ProbeInconclusive& e) {
        diag.error("probe_inconclusive", {{"message", e.what()}});
        return exit_stalled;
    } catch (const Error& e) {
        diag.error("invalid_input", {{"message", e.what()}});
        return exit_configuration_error;
    } catch (const json::exception& e) {
        diag.error("configuration_error", {{"message", e.what()}});
        return exit_configuration_error;
    }
}

}  // namespace

// ---------------------------------------------------------------- solve

int cmd_solve(const fs::path& config_path, const CommandOptions& options, std::ostream& stream) {
    Diagnostics diag(stream);
    return guarded(diag, [&] {
        const RunConfig config = load_config(config_path);
        const ModelGeometry geometry = build_geometry(config);

        if (config.barrier) {
            const fs::path dir = prepare_output(config, options);
            write_manifest(dir, "solve", config);
            const BarrierResult r = barrier_solve(geometry, config.barrier_model);
            json report = to_json(r);
            report["rho1"] = config.barrier_model.rho1;
            report["b"] = config.barrier_model.b;
            report["geometry"] = geometry.to_json();
            if (r.h) report["residual"] = barrier_residual(*r.h, config.barrier_model);
            write_json(dir / "barrier_report.json", report);
            if (r.h && config.output.write_fields) write_field(dir / "h", *r.h);
            diag.info("barrier_result", {{"exists", r.exists}, {"nonexistence", !r.exists}});
            return int(exit_ok);
        }

        const ProblemSpec spec = build_problem(config, geometry);
        const fs::path dir = prepare_output(config, options);
        write_manifest(dir, "solve", config);
        diag.info("solve_start", problem_summary(spec));

        LevelOutcome outcome = solve_and_write(config, spec, dir, diag);
        if (outcome.code == exit_ok && outcome.u) {
            const EllipticityCheck check = check_ellipticity(spec, *outcome.u, config.probe);
            outcome.report["ellipticity"] = to_json(check);
            if (!check.holds) diag.warn("ellipticity_inequality_fails", to_json(check));

            const Ball ball = estimate_ball(config, geometry);
            write_json(dir / "estimate_options.json", estimate_options_json(ball, config.harnack_shift));
            const LevelMeasurement m = measure_level(*outcome.u, EstimateOptions{ball, config.harnack_shift});
            const EstimateReport er = make_estimate_report(config_path.stem().string(), ball, {m});
            if (config.output.write_json) write_json(dir / "estimate_report.json", to_json(er));
            if (config.output.write_csv) write_text(dir / "estimate_report.csv", to_csv(er));
        }
        write_json(dir / "solve_report.json", outcome.report);
        diag.info("solve_done", {{"status", outcome.report.value("status", "unknown")}});
        return outcome.code;
    });
}

// ---------------------------------------------------------------- probe-cone

int cmd_probe_cone(const fs::path& config_path, const CommandOptions& options, std::ostream& stream) {
    Diagnostics diag(stream);
    return guarded(diag, [&] {
        const RunConfig config = load_config(config_path);
        if (!config.document["problem"].contains("operator")) {
            throw ConfigurationError("missing required field", "problem.operator");
        }
        const fs::path dir = prepare_output(config, options);
        write_manifest(dir, "probe-cone", config);
        const Operator op(config.op);
        try {
            const RankConditionResult r = rank_condition_check(op, config.probe);
            json report = to_json(r);
            report["conclusive"] = true;
            write_json(dir / "rank_certificate.json", report);
            diag.info("rank_condition", {{"rank", r.rank}, {"threshold", r.threshold}, {"passes", r.passes}});
            return int(r.passes ? exit_ok : exit_rank_condition_fails);
        } catch (const ProbeInconclusive& e) {
            json report = to_json(e.certificate());
            report["conclusive"] = false;
            report["reason"] = e.what();
            write_json(dir / "rank_certificate.json", report);
            diag.warn("probe_inconclusive", {{"message", e.what()}});
            return int(exit_stalled);
        }
    });
}

// ---------------------------------------------------------------- verify-estimates

int cmd_verify_estimates(const fs::path& dir, const CommandOptions& options, std::ostream& stream) {
    Diagnostics diag(stream);
    return guarded(diag, [&] {
        if (!fs::is_directory(dir)) throw ConfigurationError("not a directory: " + dir.string(), "solution-dir");
        std::vector<fs::path> stems;
        if (fs::exists(dir / "u.json")) stems.push_back(dir / "u");
        std::vector<fs::path> subdirs;
        for (const auto& entry : fs::directory_iterator(dir)) {
            if (entry.is_directory() && fs::exists(entry.path() / "u.json")) subdirs.push_back(entry.path());
        }
        std::sort(subdirs.begin(), subdirs.end());
        for (const auto& s : subdirs) stems.push_back(s / "u");
        if (stems.empty()) throw ConfigurationError("no solution field (u.json) found in " + dir.string(), "solution-dir");

        std::vector<ScalarField> fields;
        for (const auto& s : stems) fields.push_back(read_scalar_field(s));

        std::optional<Ball> ball;
        std::optional<double> shift = options.harnack_shift;
        if (fs::exists(dir / "estimate_options.json")) {
            std::ifstream in(dir / "estimate_options.json");
            const json j = json::parse(in);
            ball = Ball{j.at("ball").at("center").get<std::vector<double>>(), j.at("ball").at("radius").get<double>()};
            if (!shift && j.contains("harnack_shift") && j["harnack_shift"].is_number()) shift = j["harnack_shift"].get<double>();
        }
        if (!ball) ball = default_ball(fields.front().geometry);
        if (!options.center.empty()) ball->center = options.center;
        if (options.radius) ball->radius = *options.radius;

        std::vector<LevelMeasurement> levels;
        for (const auto& u : fields) levels.push_back(measure_level(u, EstimateOptions{*ball, shift}));
        const EstimateReport report = make_estimate_report(dir.filename().string(), *ball, std::move(levels));
        const fs::path out = options.output ? *options.output : dir;
        fs::create_directories(out);
        write_json(out / "estimate_report.json", to_json(report));
        write_text(out / "estimate_report.csv", to_csv(report));
        diag.info("estimates", {{"levels", report.levels.size()}, {"all_stable", report.all_stable}});
        return int(report.all_stable ? exit_ok : exit_stalled);
    });
}

// ---------------------------------------------------------------- mms

int cmd_mms(const fs::path& config_path, const CommandOptions& options, std::ostream& stream) {
    Diagnostics diag(stream);
    return guarded(diag, [&] {
        const RunConfig config = load_config(config_path);
        if (config.barrier || config.psi.kind != PsiConfig::Kind::mms) {
            throw ConfigurationError("the mms command needs psi.mms", "problem.psi");
        }
        std::vector<int> levels = config.psi.levels;
        if (levels.empty()) levels.push_back(config.geometry.points);
        std::sort(levels.begin(), levels.end());

        // Validate every level before any output is written.
        std::vector<ProblemSpec> specs;
        for (int level : levels) specs.push_back(build_problem(config, build_geometry(config, level)));

        const fs::path dir = prepare_output(config, options);
        write_manifest(dir, "mms", config);
        const Ball ball = estimate_ball(config, specs.front().geometry);
        write_json(dir / "estimate_options.json", estimate_options_json(ball, config.harnack_shift));

        json rows = json::array();
        std::vector<LevelMeasurement> measurements;
        int code = exit_ok;
        double previous_error = 0.0;
        int previous_level = 0;
        for (std::size_t i = 0; i < levels.size(); ++i) {
            const fs::path level_dir = dir / ("level_" + std::to_string(levels[i]));
            fs::create_directories(level_dir);
            diag.info("mms_level", {{"level", levels[i]}});
            LevelOutcome outcome = solve_and_write(config, specs[i], level_dir, diag);
            write_json(level_dir / "solve_report.json", outcome.report);
            json row{{"level", levels[i]}, {"status", outcome.report.value("status", "unknown")}};
            if (outcome.code != exit_ok || !outcome.u) {
                code = outcome.code;
                rows.push_back(row);
                break;
            }
            const double err = exact_error(specs[i], *outcome.u);
            row["error"] = err;
            row["b"] = outcome.report["b"];
            row["final_residual"] = outcome.report["final_residual"];
            row["newton_iterations"] = outcome.report["newton_iterations"];
            if (i > 0 && err > 0.0 && previous_error > 0.0) {
                row["observed_order"] = std::log(previous_error / err) / std::log(double(levels[i]) / previous_level);
                row["error_ratio"] = previous_error / err;
            }
            previous_error = err;
            previous_level = levels[i];
            rows.push_back(row);
            measurements.push_back(measure_level(*outcome.u, EstimateOptions{ball, config.harnack_shift}));
        }
        write_json(dir / "mms_report.json", json{{"problem", problem_summary(specs.front())},
                                                 {"analytic_psi", config.psi.analytic},
                                                 {"levels", rows}});
        if (!measurements.empty()) {
            const EstimateReport er = make_estimate_report(config_path.stem().string(), ball, measurements);
            if (config.output.write_json) write_json(dir / "estimate_report.json", to_json(er));
            if (config.output.write_csv) write_text(dir / "estimate_report.csv", to_csv(er));
        }
        return code;
    });
}

// ---------------------------------------------------------------- front end

int run(int argc, char** argv) {
    CLI::App app{"plpde: partial-Laplacian fully nonlinear elliptic equations on flat model geometries"};
    app.footer(
        "Exit codes: 0 success, 1 configuration error, 2 stalled solve / inconclusive probe / unstable estimates,\n"
        "            3 rank condition fails.\n"
        "Environment: PLPDE_THREADS caps the number of worker threads.\n"
        "Diagnostics are written to standard error as one JSON object per line.");
    app.set_version_flag("--version", std::string(version()));
    app.require_subcommand(1);

    CommandOptions options;
    std::string output;
    fs::path config;
    fs::path solution_dir;

    auto* solve = app.add_subcommand("solve", "Solve the configured problem (or barrier problem)");
    solve->add_option("config", config, "JSON run configuration")->required();
    solve->add_option("-o,--output", output, "Output directory (overrides output.directory)");

    auto* probe = app.add_subcommand("probe-cone", "Probe the tangent cone at infinity and check the rank condition");
    probe->add_option("config", config, "JSON run configuration")->required();
    probe->add_option("-o,--output", output, "Output directory (overrides output.directory)");

    auto* verify = app.add_subcommand("verify-estimates", "Measure estimate ratios on solved fields");
    verify->add_option("solution-dir", solution_dir, "Directory written by solve or mms")->required();
    verify->add_option("-o,--output", output, "Report directory (defaults to solution-dir)");
    verify->add_option("--radius", options.radius, "Ball radius");
    verify->add_option("--center", options.center, "Ball center coordinates");
    verify->add_option("--harnack-shift", options.harnack_shift, "Constant added to u before the Harnack quotient");

    auto* mms = app.add_subcommand("mms", "Manufactured-solution convergence study over psi.mms.levels");
    mms->add_option("config", config, "JSON run configuration")->required();
    mms->add_option("-o,--output", output, "Output directory (overrides output.directory)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : int(exit_configuration_error);
    }
    if (!output.empty()) options.output = fs::path(output);

    if (solve->parsed()) return cmd_solve(config, options, std::cerr);
    if (probe->parsed()) return cmd_probe_cone(config, options, std::cerr);
    if (verify->parsed()) return cmd_verify_estimates(solution_dir, options, std::cerr);
    return cmd_mms(config, options, std::cerr);
}

}  // namespace plpde::cli
