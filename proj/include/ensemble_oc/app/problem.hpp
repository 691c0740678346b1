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

// Problem and measure files: strict JSON schema, builtin registry, canonical form.

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ensemble_oc/measure.hpp"
#include "ensemble_oc/solver.hpp"
#include "ensemble_oc/system.hpp"

namespace eoc::app {

using json = nlohmann::json;
using Vec = Vector<double>;

/// Malformed or inconsistent input file; the message names the offending field.
class SchemaError : public Error {
public:
    using Error::Error;
};

inline constexpr int schema_version = 1;

struct ProblemFile {
    std::string source;
    int version = schema_version;
    /// Fully defaulted description; save_problem writes exactly this.
    json canonical;
    ControlSystem<double> system;
    ProbabilityMeasure<double> measure = ProbabilityMeasure<double>::from_atoms({{Vec::Zero(1), 1.0}});
    SolveConfig<double> config;
};

ProblemFile parse_problem(const json& doc, const std::string& source = "<memory>");
ProblemFile parse_problem_text(const std::string& text, const std::string& source = "<memory>");
ProblemFile load_problem(const std::filesystem::path& path);
void save_problem(const ProblemFile& problem, const std::filesystem::path& path);

/// Builds a measure from its JSON description; `canonical` receives the defaulted form.
ProbabilityMeasure<double> parse_measure(const json& doc, const std::string& path, json* canonical = nullptr);
ProbabilityMeasure<double> load_measure(const std::filesystem::path& path);

std::vector<std::string> dynamics_builtins();
std::vector<std::string> cost_builtins();

}  // namespace eoc::app
