#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>

#include "plap/config.hpp"
#include "plap/io.hpp"
#include "plap/verify.hpp"
#include "plap/version.hpp"

namespace plap {

/// Exit codes of the CLI contract.
enum ExitCode : int {
    ExitOk = 0,
    ExitValidation = 1,
    ExitConvergence = 2,
    ExitSuiteFailure = 3,
};

namespace rundetail {

inline std::string join(const std::string& dir, const std::string& name) {
    return (std::filesystem::path(dir) / name).string();
}

inline void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create output directory " + dir);
}

inline int run_eigen(const RunConfig& cfg, const ProblemSpec& spec, const std::string& outdir) {
    SpectrumOptions opts;
    opts.count = cfg.eigen_count;
    opts.tol = cfg.eigen_tolerance();
    opts.seed = cfg.seed;
    opts.multistart = cfg.eigen_multistart;
    SpectrumEstimate sp = estimate_spectrum(spec, opts);

    std::vector<std::string> files;
    for (std::size_t i = 0; i < sp.values.size(); ++i) {
        if (!sp.values[i].pair) {
            files.push_back("");
            continue;
        }
        char name[64];
        std::snprintf(name, sizeof(name), "eig_%03zu.csv", i);
        write_field_file(sp.values[i].pair->u, spec.grid, join(outdir, name));
        files.push_back(name);
    }
    write_json_file(spectrum_to_json(sp, files), join(outdir, "spectrum.json"));

    std::printf("eigen: %zu value(s), lowest", sp.values.size());
    for (std::size_t i = 0; i < std::min<std::size_t>(3, sp.values.size()); ++i)
        std::printf(" %.10g", sp.values[i].lambda);
    std::printf("\n");

    if (sp.values.empty()) return ExitConvergence;
    if (sp.values[0].pair && !sp.values[0].pair->converged) return ExitConvergence;
    return ExitOk;
}

inline int run_solve(const RunConfig& cfg, const ProblemSpec& spec, const std::string& outdir) {
    SpectrumOptions sopts;
    sopts.count = cfg.eigen_count;
    sopts.tol = cfg.eigen_tolerance();
    sopts.seed = cfg.seed;
    sopts.multistart = cfg.eigen_multistart;
    SpectrumEstimate sp =
        spec.v_plus_nonzero ? estimate_spectrum(spec, sopts) : SpectrumEstimate{spec.p, {}};

    GeometryOptions gopts;
    gopts.seed = cfg.seed;
    LinkingGeometry geom = estimate_geometry(spec, sp, gopts);
    write_json_file(geometry_to_json(geom), join(outdir, "geometry.json"));

    SolveOptions opts;
    opts.path_nodes = cfg.path_nodes;
    opts.samples = cfg.samples;
    opts.max_iterations = cfg.max_iterations;
    opts.seed = cfg.seed;

    CriticalPointResult result = geom.m == 0 ? mountain_pass(spec, geom, cfg.solve_tolerance(), opts)
                                             : linking_minimax(spec, geom, cfg.solve_tolerance(), opts);

    write_field_file(result.u, spec.grid, join(outdir, "solution.csv"));
    write_trace_csv(result.trace, join(outdir, "trace.csv"));

    SolutionReport rep = verify_solution(result.u, spec, cfg.solve_tolerance(), &geom);
    json out = result_to_json(result, "solution.csv", "trace.csv");
    out["verification"] = report_to_json(rep);
    write_json_file(out, join(outdir, "result.json"));

    std::printf("solve: %s, Phi = %.10g, cerami = %.3e, iterations = %d%s\n",
                result.classification.c_str(), result.value, result.cerami, result.iterations,
                result.converged ? "" : " (NOT converged)");
    return result.converged ? ExitOk : ExitConvergence;
}

inline int run_eval(const RunConfig& cfg, const ProblemSpec& spec, const std::string& outdir) {
    Field u = parse_field_file(cfg.field_path, spec.grid);
    EnergyBreakdown e = eval_energy(u, spec);
    json out = energy_to_json(e);
    out["cerami"] = cerami_residual(u, spec);
    write_json_file(out, join(outdir, "energy.json"));
    std::printf("eval: H = %.12g, I = %.12g, J = %.12g, Phi = %.12g\n", e.H, e.I, e.J, e.Phi);
    return ExitOk;
}

inline int run_verify(const RunConfig& cfg, const ProblemSpec& spec, const std::string& outdir) {
    VerificationReport rep = run_verification_suites(spec, cfg.seed);
    write_json_file(verification_to_json(rep), join(outdir, "verify.json"));
    for (const auto& suite : rep.suites)
        std::printf("%-30s %s\n", suite.name.c_str(), suite.pass ? "PASS" : "FAIL");
    return rep.all_pass() ? ExitOk : ExitSuiteFailure;
}

inline RunConfig apply_study_point(const RunConfig& base, const std::string& parameter,
                                   double value) {
    RunConfig cfg = base;
    if (parameter == "nodes") {
        long n = static_cast<long>(value);
        cfg.grid.nodes_per_axis.assign(cfg.grid.nodes_per_axis.size(), static_cast<int>(n));
    } else if (parameter == "length") {
        cfg.grid.extents.assign(cfg.grid.extents.size(), value);
    } else if (parameter == "lambda") {
        cfg.lambda = value;
    } else if (parameter == "path-nodes") {
        cfg.path_nodes = static_cast<int>(value);
    } else if (parameter == "samples") {
        cfg.samples = static_cast<int>(value);
    }
    return cfg;
}

inline int run_study(const RunConfig& cfg, const std::string& outdir) {
    const StudyConfig& st = *cfg.study;
    struct PointOutcome {
        double value;
        int exit_code = ExitOk;
        json record;
    };
    std::vector<PointOutcome> outcomes(st.values.size());

    parallel_for(st.values.size(), cfg.threads, [&](std::size_t i) {
        double value = st.values[i];
        RunConfig point = apply_study_point(cfg, st.parameter, value);
        char sub[64];
        std::snprintf(sub, sizeof(sub), "point_%03zu", i);
        std::string pdir = join(outdir, sub);
        ensure_dir(pdir);
        PointOutcome& oc = outcomes[i];
        oc.value = value;
        try {
            ProblemSpec spec = point.problem();
            if (st.command == Command::Eigen) {
                SpectrumOptions opts;
                opts.count = point.eigen_count;
                opts.tol = point.eigen_tolerance();
                opts.seed = point.seed;
                opts.multistart = point.eigen_multistart;
                SpectrumEstimate sp = estimate_spectrum(spec, opts);
                write_json_file(spectrum_to_json(sp), rundetail::join(pdir, "spectrum.json"));
                oc.record = json{{"parameter", st.parameter}, {"value", value}};
                for (std::size_t k = 0; k < sp.values.size(); ++k)
                    oc.record["lambda_" + std::to_string(k + 1)] = sp.values[k].lambda;
            } else {
                int code = run_solve(point, spec, pdir);
                std::ifstream rin(rundetail::join(pdir, "result.json"));
                json res = json::parse(rin);
                oc.record = json{{"parameter", st.parameter},
                                 {"value", value},
                                 {"phi", res["value"]},
                                 {"cerami", res["cerami"]},
                                 {"iterations", res["iterations"]},
                                 {"converged", res["converged"]}};
                oc.exit_code = code;
            }
        } catch (const std::exception& e) {
            oc.exit_code = ExitConvergence;
            oc.record = json{{"parameter", st.parameter}, {"value", value}, {"error", e.what()}};
        }
    });

    // combined CSV: stable column set from the union of record keys
    std::vector<std::string> cols{"index", "parameter", "value"};
    for (const auto& oc : outcomes)
        for (auto it = oc.record.begin(); it != oc.record.end(); ++it)
            if (it.key() != "parameter" && it.key() != "value" &&
                std::find(cols.begin(), cols.end(), it.key()) == cols.end())
                cols.push_back(it.key());

    std::ofstream csv(join(outdir, "study.csv"));
    for (std::size_t c = 0; c < cols.size(); ++c) csv << (c ? "," : "") << cols[c];
    csv << '\n';
    json records = json::array();
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        csv << i;
        for (std::size_t c = 1; c < cols.size(); ++c) {
            csv << ',';
            if (cols[c] == "parameter") csv << st.parameter;
            else if (cols[c] == "value") csv << outcomes[i].value;
            else if (outcomes[i].record.contains(cols[c])) {
                const json& v = outcomes[i].record[cols[c]];
                if (v.is_number()) {
                    char buf[64];
                    std::snprintf(buf, sizeof(buf), "%.17g", v.get<double>());
                    csv << buf;
                } else {
                    csv << v.dump();
                }
            }
        }
        csv << '\n';
        records.push_back(outcomes[i].record);
    }
    write_json_file(json{{"parameter", st.parameter}, {"points", records}},
                    join(outdir, "study.json"));

    int worst = ExitOk;
    for (const auto& oc : outcomes) worst = std::max(worst, oc.exit_code);
    std::printf("study: %zu point(s) over %s, combined CSV written\n", outcomes.size(),
                st.parameter.c_str());
    return worst;
}

} // namespace rundetail

/// Executes one run configuration; returns the process exit code and leaves
/// results (JSON), fields and traces (CSV) plus a separate metadata file in
/// the output directory.
inline int run(const RunConfig& cfg) {
    auto t0 = std::chrono::steady_clock::now();
    rundetail::ensure_dir(cfg.output_dir);

    int code = ExitOk;
    std::string error;
    try {
        if (cfg.command == Command::Study) {
            code = rundetail::run_study(cfg, cfg.output_dir);
        } else {
            ProblemSpec spec = cfg.problem();
            switch (cfg.command) {
                case Command::Eval: code = rundetail::run_eval(cfg, spec, cfg.output_dir); break;
                case Command::Eigen: code = rundetail::run_eigen(cfg, spec, cfg.output_dir); break;
                case Command::Solve: code = rundetail::run_solve(cfg, spec, cfg.output_dir); break;
                case Command::Verify: code = rundetail::run_verify(cfg, spec, cfg.output_dir); break;
                case Command::Study: break;
            }
        }
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "validation error: %s\n", e.what());
        code = ExitValidation;
        error = e.what();
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "validation error: %s\n", e.what());
        code = ExitValidation;
        error = e.what();
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        code = ExitConvergence;
        error = e.what();
    }

    auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                  std::chrono::steady_clock::now() - t0)
                  .count();
    json meta{{"seed", cfg.seed},
              {"threads", cfg.threads},
              {"version", version_string()},
              {"wall_time_ms", ms},
              {"exit_code", code}};
    if (!error.empty()) meta["error"] = error;
    try {
        write_json_file(meta, rundetail::join(cfg.output_dir, "run_meta.json"));
    } catch (const std::exception&) {
        // metadata is best effort; results already carry the exit code
    }
    return code;
}

} // namespace plap
