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

#include "ensemble_oc/app/benchmarks.hpp"

#include "schema.hpp"

namespace eoc::app {

namespace {

json atoms(std::initializer_list<std::pair<double, double>> list) {
    json out = json::array();
    for (const auto& [p, w] : list) out.push_back(json{{"point", {p}}, {"weight", w}});
    return out;
}

std::vector<BenchmarkEntry> make() {
    std::vector<BenchmarkEntry> out;

    out.push_back({"paper-example",
                   "x' = u, U = [-1,1], x(0) = 0, T = 1, cost -|x(1) - omega| averaged over uniform omega on [-1,1]",
                   json{{"name", "paper-example"},
                        {"state_dim", 1},
                        {"dynamics", {{"builtin", "integrator"}}},
                        {"control", {{"kind", "box"}, {"lo", {-1.0}}, {"hi", {1.0}}}},
                        {"x0", {0.0}},
                        {"horizon", 1.0},
                        {"cost", {{"builtin", "neg_abs_distance"}}},
                        {"measure", {{"kind", "uniform"}, {"domain", {{-1.0, 1.0}}}}},
                        {"regularity", {{"c", 1.0}, {"k_f", 0.0}, {"k_g", 1.0}, {"M", 3.0}}},
                        {"solver", {{"level", 6}, {"grid", 200}, {"initial_control", {0.1}}}}},
                   {-1.0, 5e-3, "u = 1 (the mirror branch u = -1 is equally optimal)", "p = 1", Provenance::paper}});

    out.push_back({"omega-free-lq",
                   "x' = u, U = [-10,10], cost (x(1) - 1)^2 / 2 independent of omega",
                   json{{"name", "omega-free-lq"},
                        {"state_dim", 1},
                        {"dynamics", {{"builtin", "integrator"}}},
                        {"control", {{"kind", "box"}, {"lo", {-10.0}}, {"hi", {10.0}}}},
                        {"x0", {0.0}},
                        {"horizon", 1.0},
                        {"cost", {{"builtin", "quadratic"}, {"params", {{"offset", {1.0}}}}}},
                        {"measure", {{"kind", "uniform"}, {"domain", {{-1.0, 1.0}}}}},
                        {"regularity", {{"c", 10.0}, {"k_f", 0.0}, {"k_g", 11.0}}}},
                   {0.0, 1e-8, "any u with integral 1, x(1) = 1", "p = 0", Provenance::analytic}});

    out.push_back({"scaled-drift",
                   "x' = omega u with omega = +-1, U = [-1,1], cost (x(1) - omega)^2 / 2",
                   json{{"name", "scaled-drift"},
                        {"state_dim", 1},
                        {"dynamics", {{"builtin", "scaled_drift"}}},
                        {"control", {{"kind", "box"}, {"lo", {-1.0}}, {"hi", {1.0}}}},
                        {"x0", {0.0}},
                        {"horizon", 1.0},
                        {"cost", {{"builtin", "quadratic"}, {"params", {{"omega_scale", 1.0}}}}},
                        {"measure", {{"kind", "atoms"}, {"atoms", atoms({{-1.0, 0.5}, {1.0, 0.5}})}}},
                        {"regularity", {{"c", 1.0}, {"k_f", 0.0}, {"k_g", 2.0}}}},
                   {0.0, 1e-8, "u = 1", "p = 0", Provenance::analytic}});

    out.push_back({"point-target",
                   "x' = omega u with omega in {1,2}, U = [-2,2], x(1) = omega/2 required, cost (x(1) - omega)^2 / 2",
                   json{{"name", "point-target"},
                        {"state_dim", 1},
                        {"dynamics", {{"builtin", "scaled_drift"}}},
                        {"control", {{"kind", "box"}, {"lo", {-2.0}}, {"hi", {2.0}}}},
                        {"x0", {0.0}},
                        {"horizon", 1.0},
                        {"cost", {{"builtin", "quadratic"}, {"params", {{"omega_scale", 1.0}}}}},
                        {"constraint", {{"kind", "point"}, {"omega_scale", 0.5}}},
                        {"measure", {{"kind", "atoms"}, {"atoms", atoms({{1.0, 0.5}, {2.0, 0.5}})}}},
                        {"regularity", {{"c", 4.0}, {"k_f", 0.0}, {"k_g", 4.0}}}},
                   {0.3125, 1e-4, "any u with integral 1/2", "-p(T, omega) = lambda (x(T) - omega) + nu with lambda near 1/2",
                    Provenance::analytic}});
    return out;
}

}  // namespace

const std::vector<BenchmarkEntry>& benchmarks() {
    static const std::vector<BenchmarkEntry> table = make();
    return table;
}

const BenchmarkEntry& find_benchmark(const std::string& name) {
    std::vector<std::string> names;
    for (const auto& b : benchmarks()) {
        if (b.name == name) return b;
        names.push_back(b.name);
    }
    throw SchemaError("unknown benchmark '" + name + "'; available: " + schema::join(names));
}

}  // namespace eoc::app
