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

// CSV and JSON artifacts of solve / verify runs. Numbers are printed with %.17g
// so that files round-trip exactly and repeated runs are byte-identical.

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ensemble_oc/app/problem.hpp"
#include "ensemble_oc/verify.hpp"

namespace eoc::app {

std::string format_number(double x);

/// Rows of numbers under a header line.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

void write_csv(const std::filesystem::path& path, const CsvTable& table);
CsvTable read_csv(const std::filesystem::path& path);

void write_json(const std::filesystem::path& path, const json& doc);
json read_json(const std::filesystem::path& path);

CsvTable control_table(const ControlFunction<double>& u);
/// t, omega_index, v_1..v_n for every atom and node.
CsvTable ensemble_table(const std::vector<StateArray<double>>& arrays, const TimeGrid<double>& grid, const char* symbol);
CsvTable discretization_table(const FiniteSupportMeasure<double>& mu);

json summary_json(const SolveResult<double>& result, int level);
json report_json(const ResidualReport<double>& report, const Tolerances& tol);

struct LevelCost {
    int level;
    double cost;
};

/// hamiltonian_profile.csv, cost_vs_level.csv and weakstar_gaps.csv.
void emit_plot_data(const std::filesystem::path& dir, const ControlSystem<double>& sys, const SolveResult<double>& result,
                    const ProbabilityMeasure<double>& mu, const std::vector<LevelCost>& ladder, const MaximizeOptions& opt);

/// Writes summary.json, control.csv, trajectories.csv, costates.csv and problem.json.
void write_solution(const std::filesystem::path& dir, const ProblemFile& problem, const SolveResult<double>& result, int level);

/// Reads a certificate back from the files written by write_solution.
Certificate<double> load_certificate(const std::filesystem::path& dir, const ControlSystem<double>& sys);

}  // namespace eoc::app
