/*
 Copyright 2026 The ensemble-oc Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#include "ensemble_oc/app/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <optional>

#include <CLI11.hpp>

#include "ensemble_oc/app/benchmarks.hpp"
#include "ensemble_oc/app/io.hpp"
#include "ensemble_oc/app/problem.hpp"

namespace eoc::app {

namespace {

namespace fs = std::filesystem;

struct SolveFlags {
    std::string problem;
    std::string out;
    std::optional<int> level;
    std::optional<int> grid;
    std::optional<double> tol;
    std::optional<int> max_sweeps;
};

struct VerifyFlags {
    std::string problem;
    std::string certificate;
    std::string out;
    double tol = 1e-6;
    std::string mode;
};

struct DiscretizeFlags {
    std::string measure;
    std::string out;
    int level = 1;
};

struct BenchmarkFlags {
    std::string name;
    std::optional<int> level;
    std::optional<int> grid;
    std::optional<double> tol;
    std::string out;
    std::vector<int> ladder;
};

void apply(SolveConfig<double>& cfg, std::optional<int> level, std::optional<int> grid, std::optional<double> tol,
           std::optional<int> max_sweeps) {
    if (level) cfg.level = *level;
    if (grid) cfg.grid_steps = *grid;
    if (tol) cfg.maximality_target = *tol;
    if (max_sweeps) cfg.max_sweeps = *max_sweeps;
    cfg.validate();
}

Tolerances tolerances_for(const ControlSystem<double>& sys, const SolveConfig<double>& cfg) {
    Tolerances t;
    t.tol = cfg.maximality_target;
    t.mode = sys.constrained() ? VerifyMode::atomic : VerifyMode::smooth;
    t.maximize = cfg.maximize;
    return t;
}

bool has_certificate(const SolveResult<double>& r) {
    return !r.ensemble.states.empty() && r.costates.atom_count() == r.ensemble.atom_count();
}

// Writes the result directory; returns whether the certificate passed.
bool emit(const fs::path& dir, const ProblemFile& pf, const SolveResult<double>& r, const SolveConfig<double>& cfg,
          const std::vector<LevelCost>& ladder, std::ostream& out) {
    write_solution(dir, pf, r, cfg.level);
    if (!has_certificate(r)) return false;
    const Tolerances tol = tolerances_for(pf.system, cfg);
    const auto report = verify_all(Certificate<double>::from_result(r), pf.system, tol);
    write_json(dir / "report.json", report_json(report, tol));
    emit_plot_data(dir, pf.system, r, pf.measure, ladder, cfg.maximize);
    out << "certificate: " << (report.all_pass() ? "pass" : "fail") << "\n";
    return report.all_pass();
}

void print_result(std::ostream& out, const std::string& label, const SolveResult<double>& r) {
    out << label << ": status=" << to_string(r.status) << " cost=" << format_number(r.cost)
        << " constraint_residual=" << format_number(r.constraint_residual)
        << " maximality=" << format_number(r.maximality_residual) << " lambda=" << format_number(r.costates.lambda)
        << " sweeps=" << r.sweeps << "\n";
    if (!r.message.empty()) out << "  " << r.message << "\n";
}

int do_solve(const SolveFlags& f, std::ostream& out) {
    ProblemFile pf = load_problem(f.problem);
    apply(pf.config, f.level, f.grid, f.tol, f.max_sweeps);
    const auto r = solve(pf.system, pf.measure, pf.config);
    print_result(out, "solve", r);
    const bool certified = emit(f.out, pf, r, pf.config, {{pf.config.level, r.cost}}, out);
    return r.status == SolveStatus::converged && certified ? exit_ok : exit_check_failed;
}

int do_verify(const VerifyFlags& f, std::ostream& out) {
    const ProblemFile pf = load_problem(f.problem);
    const Certificate<double> cert = load_certificate(f.certificate, pf.system);
    Tolerances tol;
    tol.tol = f.tol;
    tol.maximize = pf.config.maximize;
    if (f.mode.empty()) {
        tol.mode = pf.system.constrained() ? VerifyMode::atomic : VerifyMode::smooth;
    } else {
        tol.mode = f.mode == "atomic" ? VerifyMode::atomic : VerifyMode::smooth;
    }
    const auto report = verify_all(cert, pf.system, tol);
    const fs::path dir = f.out.empty() ? fs::path(f.certificate) : fs::path(f.out);
    fs::create_directories(dir);
    write_json(dir / "report.json", report_json(report, tol));
    out << "verify: " << (report.all_pass() ? "pass" : "fail") << " (nontriviality=" << report.nontriviality_pass
        << " adjoint=" << report.adjoint_pass << " dynamics=" << report.dynamics_pass
        << " transversality=" << report.transversality_pass << " maximality=" << report.maximality_pass
        << " coverage=" << report.coverage_pass << ")\n";
    return report.all_pass() ? exit_ok : exit_check_failed;
}

int do_discretize(const DiscretizeFlags& f, std::ostream& out) {
    const auto mu = load_measure(f.measure);
    const auto mu_l = discretize(mu, f.level);
    const fs::path path(f.out);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write_csv(path, discretization_table(mu_l));
    out << "discretize: level " << f.level << ", " << mu_l.size() << " atoms, trimmed mass " << format_number(mu_l.trimmed_mass)
        << "\n";
    return exit_ok;
}

int do_benchmark(const BenchmarkFlags& f, std::ostream& out) {
    const BenchmarkEntry& entry = find_benchmark(f.name);
    ProblemFile pf = entry.build();
    apply(pf.config, f.level, f.grid, f.tol, std::nullopt);
    const auto r = solve(pf.system, pf.measure, pf.config);
    print_result(out, entry.name, r);

    std::vector<LevelCost> ladder;
    if (!f.ladder.empty()) {
        const auto runs = refine(pf.system, pf.measure, pf.config, f.ladder);
        for (std::size_t i = 0; i < runs.size(); ++i) {
            ladder.push_back({f.ladder[i], runs[i].cost});
            out << "  level " << f.ladder[i] << ": cost=" << format_number(runs[i].cost);
            if (i > 0) out << " delta=" << format_number(std::abs(runs[i].cost - runs[i - 1].cost));
            out << "\n";
        }
    } else {
        ladder.push_back({pf.config.level, r.cost});
    }

    const double gap = std::abs(r.cost - entry.known.cost);
    const bool matches = gap <= entry.known.cost_tolerance;
    out << "  known cost " << format_number(entry.known.cost) << " +- " << format_number(entry.known.cost_tolerance) << " ("
        << to_string(entry.known.provenance) << "): " << (matches ? "match" : "MISMATCH") << "\n";

    bool certified = true;
    if (!f.out.empty()) {
        certified = emit(f.out, pf, r, pf.config, ladder, out);
    } else if (has_certificate(r)) {
        certified = verify_all(Certificate<double>::from_result(r), pf.system, tolerances_for(pf.system, pf.config)).all_pass();
        out << "certificate: " << (certified ? "pass" : "fail") << "\n";
    }
    return r.status == SolveStatus::converged && matches && certified ? exit_ok : exit_check_failed;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Average-cost optimal control over parameter measures", "ensemble-oc"};
    app.require_subcommand(1);

    SolveFlags sf;
    auto* solve_cmd = app.add_subcommand("solve", "Solve a problem file and write a certificate directory");
    solve_cmd->add_option("--problem", sf.problem, "Problem JSON file")->required();
    solve_cmd->add_option("--out", sf.out, "Output directory")->required();
    solve_cmd->add_option("--level", sf.level, "Discretization level")->check(CLI::PositiveNumber);
    solve_cmd->add_option("--grid", sf.grid, "Number of time intervals")->check(CLI::PositiveNumber);
    solve_cmd->add_option("--tol", sf.tol, "Maximality residual target")->check(CLI::PositiveNumber);
    solve_cmd->add_option("--max-sweeps", sf.max_sweeps, "Sweep budget per penalty round")->check(CLI::PositiveNumber);

    VerifyFlags vf;
    auto* verify_cmd = app.add_subcommand("verify", "Check a certificate directory against the optimality conditions");
    verify_cmd->add_option("--problem", vf.problem, "Problem JSON file")->required();
    verify_cmd->add_option("--certificate", vf.certificate, "Directory written by solve")->required();
    verify_cmd->add_option("--tol", vf.tol, "Residual tolerance")->check(CLI::PositiveNumber);
    verify_cmd->add_option("--mode", vf.mode, "smooth or atomic")->check(CLI::IsMember({"smooth", "atomic"}));
    verify_cmd->add_option("--out", vf.out, "Directory for report.json (defaults to the certificate directory)");

    DiscretizeFlags df;
    auto* disc_cmd = app.add_subcommand("discretize", "Write the level-l Dirac approximation of a measure");
    disc_cmd->add_option("--measure", df.measure, "Measure JSON file")->required();
    disc_cmd->add_option("--level", df.level, "Discretization level")->required()->check(CLI::PositiveNumber);
    disc_cmd->add_option("--out", df.out, "Output CSV")->required();

    BenchmarkFlags bf;
    auto* bench_cmd = app.add_subcommand("benchmark", "Run a registered benchmark against its known answer");
    bench_cmd->add_option("--name", bf.name, "Benchmark name")->required();
    bench_cmd->add_option("--level", bf.level, "Discretization level")->check(CLI::PositiveNumber);
    bench_cmd->add_option("--grid", bf.grid, "Number of time intervals")->check(CLI::PositiveNumber);
    bench_cmd->add_option("--tol", bf.tol, "Maximality residual target")->check(CLI::PositiveNumber);
    bench_cmd->add_option("--out", bf.out, "Output directory");
    bench_cmd->add_option("--ladder", bf.ladder, "Comma-separated refinement levels")->delimiter(',')->check(CLI::PositiveNumber);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return exit_ok;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n" << app.help();
        return exit_usage;
    }

    try {
        if (*solve_cmd) return do_solve(sf, out);
        if (*verify_cmd) return do_verify(vf, out);
        if (*disc_cmd) return do_discretize(df, out);
        if (*bench_cmd) return do_benchmark(bf, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return exit_usage;
    }
    return exit_usage;
}

}  // namespace eoc::app
