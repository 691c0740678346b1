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

#pragma once

#include <string>
#include <vector>

#include "ensemble_oc/app/problem.hpp"

namespace eoc::app {

enum class Provenance { paper, analytic };

inline const char* to_string(Provenance p) { return p == Provenance::paper ? "paper" : "analytic"; }

struct KnownAnswer {
    double cost;
    double cost_tolerance;
    std::string control;
    std::string costate;
    Provenance provenance;
};

struct BenchmarkEntry {
    std::string name;
    std::string description;
    /// Problem file document; parse_problem turns it into a system and measure.
    json document;
    KnownAnswer known;

    ProblemFile build() const { return parse_problem(document, "benchmark:" + name); }
};

const std::vector<BenchmarkEntry>& benchmarks();
/// Throws SchemaError listing the registered names when `name` is unknown.
const BenchmarkEntry& find_benchmark(const std::string& name);

}  // namespace eoc::app
