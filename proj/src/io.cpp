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

#include "ensemble_oc/app/io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "schema.hpp"

namespace eoc::app {

namespace fs = std::filesystem;

std::string format_number(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

void write_csv(const fs::path& path, const CsvTable& table) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(path.string() + ": cannot write file");
    for (std::size_t i = 0; i < table.header.size(); ++i) out << (i ? "," : "") << table.header[i];
    out << "\n";
    for (const auto& row : table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << format_number(row[i]);
        out << "\n";
    }
}

CsvTable read_csv(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SchemaError(path.string() + ": cannot open file");
    CsvTable table;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (table.header.empty()) {
            table.header = cells;
            continue;
        }
        if (cells.size() != table.header.size()) {
            throw SchemaError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                              std::to_string(table.header.size()) + " columns");
        }
        std::vector<double> row;
        for (const auto& c : cells) {
            char* end = nullptr;
            const double v = std::strtod(c.c_str(), &end);
            if (c.empty() || end != c.c_str() + c.size()) {
                throw SchemaError(path.string() + ":" + std::to_string(line_no) + ": not a number: '" + c + "'");
            }
            row.push_back(v);
        }
        table.rows.push_back(std::move(row));
    }
    if (table.header.empty()) throw SchemaError(path.string() + ": empty file");
    return table;
}

void write_json(const fs::path& path, const json& doc) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(path.string() + ": cannot write file");
    out << doc.dump(2) << "\n";
}

json read_json(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SchemaError(path.string() + ": cannot open file");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw SchemaError(path.string() + ": " + e.what());
    }
}

CsvTable control_table(const ControlFunction<double>& u) {
    CsvTable t;
    t.header.push_back("t");
    for (Eigen::Index i = 0; i < u.dim(); ++i) t.header.push_back("u_" + std::to_string(i + 1));
    for (Eigen::Index k = 0; k < u.grid.steps; ++k) {
        std::vector<double> row{u.grid.node(k)};
        for (Eigen::Index i = 0; i < u.dim(); ++i) row.push_back(u.values(i, k));
        t.rows.push_back(std::move(row));
    }
    return t;
}

CsvTable ensemble_table(const std::vector<StateArray<double>>& arrays, const TimeGrid<double>& grid, const char* symbol) {
    CsvTable t;
    t.header = {"t", "omega_index"};
    const Eigen::Index n = arrays.empty() ? 0 : arrays.front().rows();
    for (Eigen::Index i = 0; i < n; ++i) t.header.push_back(std::string(symbol) + "_" + std::to_string(i + 1));
    for (std::size_t j = 0; j < arrays.size(); ++j) {
        for (Eigen::Index k = 0; k < grid.node_count(); ++k) {
            std::vector<double> row{grid.node(k), double(j)};
            for (Eigen::Index i = 0; i < n; ++i) row.push_back(arrays[j](i, k));
            t.rows.push_back(std::move(row));
        }
    }
    return t;
}

CsvTable discretization_table(const FiniteSupportMeasure<double>& mu) {
    CsvTable t;
    for (Eigen::Index i = 0; i < mu.space.dimension; ++i) t.header.push_back("omega_" + std::to_string(i + 1));
    t.header.push_back("weight");
    for (std::size_t j = 0; j < mu.size(); ++j) {
        std::vector<double> row(mu.atoms[j].data(), mu.atoms[j].data() + mu.atoms[j].size());
        row.push_back(mu.weights[j]);
        t.rows.push_back(std::move(row));
    }
    return t;
}

namespace {

json finite_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json array_of(const std::vector<double>& v) {
    json out = json::array();
    for (double x : v) out.push_back(finite_or_null(x));
    return out;
}

}  // namespace

json summary_json(const SolveResult<double>& r, int level) {
    json atoms = json::array();
    for (std::size_t j = 0; j < r.ensemble.measure.size(); ++j) {
        atoms.push_back(json{{"point", schema::to_json(r.ensemble.measure.atoms[j])}, {"weight", r.ensemble.measure.weights[j]}});
    }
    json history = json::array();
    json merits = json::array();
    for (const auto& h : r.history) {
        history.push_back(json{{"penalty", h.penalty}, {"merit", h.merit}, {"cost", h.cost}, {"maximality", h.maximality}, {"step", h.step}});
        merits.push_back(h.merit);
    }
    return json{{"status", to_string(r.status)},
                {"message", r.message},
                {"cost", finite_or_null(r.cost)},
                {"merit", finite_or_null(r.merit)},
                {"penalty", r.penalty},
                {"constraint_residual", finite_or_null(r.constraint_residual)},
                {"maximality_residual", finite_or_null(r.maximality_residual)},
                {"lambda", r.costates.lambda},
                {"sweeps", r.sweeps},
                {"level", level},
                {"grid", json{{"steps", r.control.grid.steps}, {"horizon", r.control.grid.horizon}}},
                {"atoms", atoms},
                {"cost_history", merits},
                {"history", history}};
}

json report_json(const ResidualReport<double>& r, const Tolerances& tol) {
    json node_pass = json::array();
    for (bool b : r.maximality_node_pass) node_pass.push_back(b);
    return json{{"mode", to_string(tol.mode)},
                {"tol", tol.tol},
                {"all_pass", r.all_pass()},
                {"message", r.message},
                {"nontriviality", json{{"value", r.nontriviality}, {"floor", tol.nontriviality_floor}, {"pass", r.nontriviality_pass}}},
                {"adjoint", json{{"residuals", array_of(r.adjoint)}, {"allowance", r.discretization_allowance}, {"pass", r.adjoint_pass}}},
                {"dynamics", json{{"residuals", array_of(r.dynamics)}, {"allowance", r.discretization_allowance}, {"pass", r.dynamics_pass}}},
                {"transversality", json{{"residuals", array_of(r.transversality)}, {"pass", r.transversality_pass}}},
                {"maximality",
                 json{{"residuals", array_of(r.maximality)}, {"scale", r.maximality_scale}, {"node_pass", node_pass}, {"pass", r.maximality_pass}}},
                {"coverage", json{{"pass", r.coverage_pass}}}};
}

void emit_plot_data(const fs::path& dir, const ControlSystem<double>& sys, const SolveResult<double>& r,
                    const ProbabilityMeasure<double>& mu, const std::vector<LevelCost>& ladder, const MaximizeOptions& opt) {
    CsvTable profile{{"t", "H_control", "H_max"}, {}};
    const auto& u = r.ensemble.control;
    for (Eigen::Index k = 0; k < u.grid.steps; ++k) {
        const double h = averaged_hamiltonian(sys, r.ensemble, r.costates, k, Vec(u.values.col(k)));
        const double best = maximize_hamiltonian(sys, r.ensemble, r.costates, k, opt).value;
        profile.rows.push_back({u.grid.node(k), h, std::max(h, best)});
    }
    write_csv(dir / "hamiltonian_profile.csv", profile);

    CsvTable levels{{"level", "cost", "delta"}, {}};
    for (std::size_t i = 0; i < ladder.size(); ++i) {
        levels.rows.push_back({double(ladder[i].level), ladder[i].cost, i == 0 ? 0.0 : std::abs(ladder[i].cost - ladder[i - 1].cost)});
    }
    write_csv(dir / "cost_vs_level.csv", levels);

    // Globally bounded Lipschitz test functions.
    const auto d = mu.dimension();
    const std::vector<TestFunction<double>> tests{
        {[](const Vec& w) { return std::sin(w.sum()); }, std::sqrt(double(d)), 1.0},
        {[](const Vec& w) { return std::cos(2.0 * w[0]); }, 2.0, 1.0},
        {[](const Vec& w) { return std::exp(-w.squaredNorm()); }, std::sqrt(2.0 / std::exp(1.0)), 1.0}};
    CsvTable gaps{{"level", "test", "gap", "bound"}, {}};
    const int top = ladder.empty() ? 1 : ladder.back().level;
    if (d <= 3) {
        for (int l = 1; l <= top; ++l) {
            const auto g = weak_star_gap(mu, discretize(mu, l), tests);
            for (std::size_t i = 0; i < g.size(); ++i) gaps.rows.push_back({double(l), double(i), g[i].gap, g[i].bound});
        }
    }
    write_csv(dir / "weakstar_gaps.csv", gaps);
}

void write_solution(const fs::path& dir, const ProblemFile& problem, const SolveResult<double>& r, int level) {
    fs::create_directories(dir);
    write_json(dir / "summary.json", summary_json(r, level));
    write_csv(dir / "control.csv", control_table(r.control));
    if (!r.ensemble.states.empty()) {
        write_csv(dir / "trajectories.csv", ensemble_table(r.ensemble.states, r.control.grid, "x"));
    }
    if (!r.costates.costates.empty()) {
        write_csv(dir / "costates.csv", ensemble_table(r.costates.costates, r.control.grid, "p"));
    }
    save_problem(problem, dir / "problem.json");
}

namespace {

std::vector<StateArray<double>> read_ensemble(const fs::path& path, std::size_t atoms, const TimeGrid<double>& grid,
                                              Eigen::Index n) {
    const CsvTable t = read_csv(path);
    if (t.header.size() != std::size_t(n) + 2) throw SchemaError(path.string() + ": expected " + std::to_string(n + 2) + " columns");
    std::vector<StateArray<double>> out(atoms, StateArray<double>::Zero(n, grid.node_count()));
    std::vector<Eigen::Index> filled(atoms, 0);
    for (const auto& row : t.rows) {
        const double j = row[1];
        if (j < 0 || j >= double(atoms) || j != std::floor(j)) throw SchemaError(path.string() + ": omega_index out of range");
        auto& count = filled[std::size_t(j)];
        if (count >= grid.node_count()) throw SchemaError(path.string() + ": too many rows for atom " + std::to_string(std::size_t(j)));
        for (Eigen::Index i = 0; i < n; ++i) out[std::size_t(j)](i, count) = row[std::size_t(i) + 2];
        ++count;
    }
    for (std::size_t j = 0; j < atoms; ++j) {
        if (filled[j] != grid.node_count()) throw SchemaError(path.string() + ": missing rows for atom " + std::to_string(j));
    }
    return out;
}

}  // namespace

Certificate<double> load_certificate(const fs::path& dir, const ControlSystem<double>& sys) {
    const json summary = read_json(dir / "summary.json");
    const std::string where = (dir / "summary.json").string();
    Certificate<double> cert;
    try {
        const auto& g = summary.at("grid");
        const TimeGrid<double> grid(g.at("steps").get<Eigen::Index>(), g.at("horizon").get<double>());
        std::vector<Atom<double>> atoms;
        for (const auto& a : summary.at("atoms")) {
            atoms.push_back({schema::vector(a.at("point"), where + ".atoms[].point"), a.at("weight").get<double>()});
        }
        cert.ensemble.measure = FiniteSupportMeasure<double>::from_atoms(atoms, summary.value("level", 0));
        cert.costates.lambda = summary.at("lambda").get<double>();

        const CsvTable u = read_csv(dir / "control.csv");
        if (u.header.size() != std::size_t(sys.control_dim) + 1 || Eigen::Index(u.rows.size()) != grid.steps) {
            throw SchemaError((dir / "control.csv").string() + ": shape does not match the grid and control_dim");
        }
        cert.ensemble.control.grid = grid;
        cert.ensemble.control.values.resize(sys.control_dim, grid.steps);
        for (Eigen::Index k = 0; k < grid.steps; ++k) {
            for (Eigen::Index i = 0; i < sys.control_dim; ++i) cert.ensemble.control.values(i, k) = u.rows[std::size_t(k)][std::size_t(i) + 1];
        }
        cert.ensemble.states = read_ensemble(dir / "trajectories.csv", atoms.size(), grid, sys.state_dim);
        cert.costates.costates = read_ensemble(dir / "costates.csv", atoms.size(), grid, sys.state_dim);
    } catch (const json::exception& e) {
        throw SchemaError(where + ": " + e.what());
    }
    return cert;
}

}  // namespace eoc::app
